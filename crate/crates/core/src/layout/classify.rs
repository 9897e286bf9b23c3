//! Region typing heuristics.
//!
//! Features per block: text-line runs from the horizontal projection, ink
//! density and gradient edge density. Images are tall dense blocks without
//! line structure, headlines have large lines relative to the page median,
//! captions sit just below an image. Anything ambiguous is content.

use std::collections::BTreeMap;

use image::GrayImage;

use super::segment::{cut_region, leaves};
use super::{reading_order, ArticleRecord, Roi, RoiKind, SegmentParams};
use crate::page_store::PageImage;
use crate::raster::{InkMask, Rect};

const DEFAULT_LINE_HEIGHT: f64 = 10.0;
const EDGE_STEP: i32 = 40;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LeafStats {
    pub lines: Vec<u32>,
    pub width: u32,
    pub median_line: f64,
    pub max_line: u32,
    pub density: f64,
    pub edge_density: f64,
}

impl LeafStats {
    pub fn looks_like_image(&self, line_h: f64, p: &SegmentParams) -> bool {
        self.max_line as f64 >= p.image_min_lines * line_h
            && self.density > p.image_density
            && self.edge_density >= p.image_edge_density
    }
}

pub(crate) fn analyze_leaf(mask: &InkMask, gray: &GrayImage, r: Rect) -> LeafStats {
    let mut lines = Vec::new();
    let mut run = 0;
    for y in r.y..r.bottom() {
        if mask.row_count(y, r.x, r.right()) > 0 {
            run += 1;
        } else if run > 0 {
            lines.push(run);
            run = 0;
        }
    }
    if run > 0 {
        lines.push(run);
    }
    let mut edges = 0u64;
    for y in r.y..r.bottom().saturating_sub(1) {
        for x in r.x..r.right().saturating_sub(1) {
            let v = gray.get_pixel(x, y).0[0] as i32;
            let gx = gray.get_pixel(x + 1, y).0[0] as i32 - v;
            let gy = gray.get_pixel(x, y + 1).0[0] as i32 - v;
            if gx.abs() + gy.abs() > EDGE_STEP {
                edges += 1;
            }
        }
    }
    LeafStats {
        median_line: median(lines.iter().map(|&l| l as f64).collect()).unwrap_or(0.0),
        max_line: lines.iter().copied().max().unwrap_or(0),
        density: mask.density(r),
        edge_density: edges as f64 / r.area().max(1) as f64,
        lines,
        width: r.w,
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Median text-line height over every line of every block, each line
/// weighted by its block's width so that a headline cut into words does not
/// outvote a paragraph.
pub(crate) fn median_line_height<'a>(stats: impl Iterator<Item = &'a LeafStats>) -> f64 {
    let mut all: Vec<(u32, u64)> = stats
        .flat_map(|s| s.lines.iter().map(move |&l| (l, u64::from(s.width))))
        .collect();
    if all.is_empty() {
        return DEFAULT_LINE_HEIGHT;
    }
    all.sort_unstable();
    let total: u64 = all.iter().map(|&(_, w)| w).sum();
    let mut seen = 0;
    for &(l, w) in &all {
        seen += w;
        if 2 * seen >= total {
            return l as f64;
        }
    }
    all[all.len() - 1].0 as f64
}

/// Median line height of the whole page, the yardstick for headline detection.
pub fn page_line_height(page: &PageImage, params: &SegmentParams) -> f64 {
    let mask = InkMask::new(&page.gray);
    let tree = cut_region(&mask, Rect::new(0, 0, page.width(), page.height()), params);
    let stats: Vec<LeafStats> = leaves(&tree)
        .into_iter()
        .map(|r| analyze_leaf(&mask, &page.gray, r))
        .collect();
    median_line_height(stats.iter())
}

/// Assigns a kind and sequence numbers to every region of `article`.
///
/// Regions come back in reading order. Running it twice gives the same record.
pub fn classify_rois(article: ArticleRecord, page: &PageImage, params: &SegmentParams) -> ArticleRecord {
    let mask = InkMask::new(&page.gray);
    let line_h = page_line_height(page, params);
    let stats: BTreeMap<Rect, LeafStats> = article
        .rois
        .iter()
        .map(|r| (r.bbox, analyze_leaf(&mask, &page.gray, r.bbox)))
        .collect();
    classify_with(article, &stats, line_h, params)
}

pub(crate) fn classify_with(
    mut article: ArticleRecord,
    stats: &BTreeMap<Rect, LeafStats>,
    line_h: f64,
    params: &SegmentParams,
) -> ArticleRecord {
    let level = article.embed_level();
    let boxes: Vec<Rect> = article.rois.iter().map(|r| r.bbox).collect();
    let order = reading_order(&boxes);
    let texts = std::mem::take(&mut article.texts);
    let old_pos: Vec<usize> = order.clone();
    let boxes: Vec<Rect> = order.iter().map(|&i| boxes[i]).collect();

    let feats: Vec<&LeafStats> = boxes.iter().map(|r| &stats[r]).collect();

    let mut kinds: Vec<RoiKind> = feats
        .iter()
        .map(|s| {
            if s.looks_like_image(line_h, params) {
                RoiKind::Image
            } else if s.median_line >= params.headline_ratio * line_h {
                RoiKind::Headline
            } else {
                RoiKind::Content
            }
        })
        .collect();

    let images: Vec<usize> = (0..boxes.len()).filter(|&i| kinds[i] == RoiKind::Image).collect();
    let mut image_seq = vec![0u32; boxes.len()];
    for (n, &i) in images.iter().enumerate() {
        image_seq[i] = n as u32 + 1;
    }
    let mut caption_of = vec![None; boxes.len()];
    for i in 0..boxes.len() {
        if kinds[i] != RoiKind::Content {
            continue;
        }
        let b = boxes[i];
        let best = images
            .iter()
            .filter_map(|&im| {
                let ib = boxes[im];
                let gap = b.y as i64 - ib.bottom() as i64;
                let overlaps = b.x < ib.right() && ib.x < b.right();
                let ok = gap >= 0
                    && (gap as f64) <= params.caption_gap_lines * line_h
                    && overlaps
                    && (b.w as f64) <= params.caption_width_ratio * ib.w as f64;
                ok.then_some((gap, im))
            })
            .min();
        if let Some((_, im)) = best {
            kinds[i] = RoiKind::Caption;
            caption_of[i] = Some(image_seq[im]);
        }
    }

    let mut headline_sub = 0;
    let mut content_seq = 0;
    let rois: Vec<Roi> = boxes
        .iter()
        .enumerate()
        .map(|(i, &bbox)| {
            let (seq_index, sub_index) = match kinds[i] {
                RoiKind::Headline => {
                    headline_sub += 1;
                    (level as u32 + 1, Some(headline_sub - 1))
                }
                RoiKind::Image => (image_seq[i], None),
                RoiKind::Caption => (caption_of[i].expect("caption paired"), None),
                _ => {
                    content_seq += 1;
                    (content_seq, None)
                }
            };
            Roi {
                kind: kinds[i],
                bbox,
                seq_index,
                sub_index,
                embed_level: level,
            }
        })
        .collect();
    article.rois = rois;
    article.texts = texts
        .into_iter()
        .filter_map(|(k, v)| old_pos.iter().position(|&o| o == k).map(|n| (n, v)))
        .collect();
    article
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Luma;

    fn stats_of(img: &GrayImage) -> LeafStats {
        let mask = InkMask::new(img);
        analyze_leaf(&mask, img, Rect::new(0, 0, img.width(), img.height()))
    }

    #[test]
    fn dark_flat_photo_is_image_but_solid_fill_is_not() {
        let p = SegmentParams::default();
        // dark ground with a few soft blobs: little texture, like a night shot
        let photo = GrayImage::from_fn(240, 180, |x, y| {
            let blob = |cx: i64, cy: i64, r: i64| (x as i64 - cx).pow(2) + (y as i64 - cy).pow(2) < r * r;
            Luma([if blob(60, 50, 30) || blob(170, 120, 40) { 150 } else { 15 }])
        });
        let s = stats_of(&photo);
        assert!(s.edge_density > 0.008 && s.edge_density < 0.02, "{}", s.edge_density);
        assert!(s.looks_like_image(14.0, &p));

        let fill = GrayImage::from_pixel(240, 180, Luma([10]));
        let s = stats_of(&fill);
        assert_eq!(s.edge_density, 0.0);
        assert!(!s.looks_like_image(14.0, &p));
    }
}
