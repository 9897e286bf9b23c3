//! Recursive XY-cut over ink projections with ruled-line and frame detection.

use std::collections::BTreeMap;

use log::warn;

use super::classify::{analyze_leaf, classify_with, median_line_height, LeafStats};
use super::{reading_order, ArticleRecord, Roi, SegmentParams};
use crate::page_store::PageImage;
use crate::raster::{InkMask, Rect};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Frame { outer: Rect, children: Vec<Node> },
    Leaf(Rect),
}

impl Node {
    fn collect_leaves(&self, out: &mut Vec<Rect>) {
        match self {
            Node::Leaf(r) => out.push(*r),
            Node::Frame { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }
}

pub(crate) fn leaves(nodes: &[Node]) -> Vec<Rect> {
    let mut out = Vec::new();
    nodes.iter().for_each(|n| n.collect_leaves(&mut out));
    out
}

/// Articles found on a page plus non-fatal warnings.
#[derive(Debug, Clone, Default)]
pub struct SegmentOutcome {
    pub articles: Vec<ArticleRecord>,
    pub warnings: Vec<String>,
}

pub(crate) fn cut_region(mask: &InkMask, region: Rect, params: &SegmentParams) -> Vec<Node> {
    cut(mask, region, params, params.min_gap, 0)
}

const MAX_DEPTH: u32 = 64;

fn cut(mask: &InkMask, region: Rect, params: &SegmentParams, min_gap: u32, depth: u32) -> Vec<Node> {
    let Some(t) = mask.trim(region) else {
        return Vec::new();
    };
    if depth >= MAX_DEPTH {
        return vec![Node::Leaf(t)];
    }
    if let Some(k) = frame_thickness(mask, t, params) {
        let children = t
            .inset(k)
            .map(|inner| cut(mask, inner, params, min_gap, depth + 1))
            .unwrap_or_default();
        return vec![Node::Frame { outer: t, children }];
    }
    let rows = blank_runs((t.y..t.bottom()).map(|y| mask.row_count(y, t.x, t.right()) == 0), t.y);
    let cols = blank_runs((t.x..t.right()).map(|x| mask.col_count(x, t.y, t.bottom()) == 0), t.x);
    let widest = |runs: &[(u32, u32)]| runs.iter().map(|r| r.1).max().unwrap_or(0);
    let (rw, cw) = (widest(&rows), widest(&cols));
    if rw.max(cw) < min_gap {
        // Touching blocks may still be divided by a printed rule; try that
        // only now, since the borders of a frame look like rules too.
        if let Some(parts) = split_on_rules(mask, t, params) {
            return parts
                .into_iter()
                .flat_map(|p| cut(mask, p, params, min_gap, depth + 1))
                .collect();
        }
        return vec![Node::Leaf(t)];
    }
    let horizontal = rw >= cw;
    let runs = if horizontal { rows } else { cols };
    let mut pieces = Vec::new();
    let (lo, hi) = if horizontal { (t.y, t.bottom()) } else { (t.x, t.right()) };
    let mut start = lo;
    for (s, len) in runs.into_iter().filter(|r| r.1 >= min_gap) {
        pieces.push((start, s));
        start = s + len;
    }
    pieces.push((start, hi));
    pieces
        .into_iter()
        .filter(|(a, b)| b > a)
        .flat_map(|(a, b)| {
            let sub = if horizontal {
                Rect::new(t.x, a, t.w, b - a)
            } else {
                Rect::new(a, t.y, b - a, t.h)
            };
            cut(mask, sub, params, min_gap, depth + 1)
        })
        .collect()
}

/// Interior blank runs as `(start, length)`; the slice is assumed trimmed.
fn blank_runs(blank: impl Iterator<Item = bool>, origin: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let mut run_start = None;
    for (i, b) in blank.enumerate() {
        let pos = origin + i as u32;
        match (b, run_start) {
            (true, None) => run_start = Some(pos),
            (false, Some(s)) => {
                out.push((s, pos - s));
                run_start = None;
            }
            _ => {}
        }
    }
    out
}

/// Border thickness when `t` is enclosed by four ruled lines with blank padding inside.
fn frame_thickness(mask: &InkMask, t: Rect, p: &SegmentParams) -> Option<u32> {
    if t.w < 20 || t.h < 20 {
        return None;
    }
    let fill = 0.9;
    let row_ruled = |y: u32| mask.longest_row_run(y, t.x, t.right()) as f64 >= fill * t.w as f64;
    let col_ruled = |x: u32| mask.longest_col_run(x, t.y, t.bottom()) as f64 >= fill * t.h as f64;
    if !(row_ruled(t.y) && row_ruled(t.bottom() - 1) && col_ruled(t.x) && col_ruled(t.right() - 1)) {
        return None;
    }
    let k = (0..p.max_rule_thickness.min(t.h / 2))
        .take_while(|&d| row_ruled(t.y + d))
        .count() as u32;
    if k == 0 || k >= p.max_rule_thickness {
        return None;
    }
    let inner = t.inset(k)?;
    // Just inside the border the frame must be mostly empty; a dense photo is not a frame.
    let first_row = mask.row_count(inner.y, inner.x, inner.right()) as f64 / inner.w as f64;
    let first_col = mask.col_count(inner.x, inner.y, inner.bottom()) as f64 / inner.h as f64;
    (first_row < 0.5 && first_col < 0.5).then_some(k)
}

/// Splits `t` around thin isolated ruled lines. `None` when there are none.
fn split_on_rules(mask: &InkMask, t: Rect, p: &SegmentParams) -> Option<Vec<Rect>> {
    let long = |run: u32, extent: u32| run >= p.min_rule_length && run as f64 >= p.ruled_fraction * extent as f64;
    let rows: Vec<bool> = (t.y..t.bottom())
        .map(|y| long(mask.longest_row_run(y, t.x, t.right()), t.w))
        .collect();
    let row_density = |y: u32| mask.row_count(y, t.x, t.right()) as f64 / t.w as f64;
    if let Some(bands) = isolated_bands(&rows, t.y, p.max_rule_thickness, |pos| row_density(pos)) {
        return Some(split_along(t, &bands, true));
    }
    let cols: Vec<bool> = (t.x..t.right())
        .map(|x| long(mask.longest_col_run(x, t.y, t.bottom()), t.h))
        .collect();
    let col_density = |x: u32| mask.col_count(x, t.y, t.bottom()) as f64 / t.h as f64;
    isolated_bands(&cols, t.x, p.max_rule_thickness, |pos| col_density(pos)).map(|b| split_along(t, &b, false))
}

fn isolated_bands(
    ruled: &[bool],
    origin: u32,
    max_thickness: u32,
    density: impl Fn(u32) -> f64,
) -> Option<Vec<(u32, u32)>> {
    let end = origin + ruled.len() as u32;
    let mut bands = Vec::new();
    let mut i = 0;
    while i < ruled.len() {
        if !ruled[i] {
            i += 1;
            continue;
        }
        let s = i;
        while i < ruled.len() && ruled[i] {
            i += 1;
        }
        let (a, b) = (origin + s as u32, origin + i as u32);
        let thin = b - a <= max_thickness;
        let quiet = |pos: Option<u32>| pos.is_none_or(|q| density(q) < 0.5);
        let before = a.checked_sub(2).filter(|&q| q >= origin);
        let after = Some(b + 1).filter(|&q| q < end);
        if thin && quiet(before) && quiet(after) {
            bands.push((a, b - a));
        }
    }
    (!bands.is_empty()).then_some(bands)
}

fn split_along(t: Rect, bands: &[(u32, u32)], horizontal: bool) -> Vec<Rect> {
    let (lo, hi) = if horizontal { (t.y, t.bottom()) } else { (t.x, t.right()) };
    let mut out = Vec::new();
    let mut start = lo;
    for &(s, len) in bands {
        if s > start {
            out.push((start, s));
        }
        start = s + len;
    }
    if hi > start {
        out.push((start, hi));
    }
    out.into_iter()
        .map(|(a, b)| {
            if horizontal {
                Rect::new(t.x, a, t.w, b - a)
            } else {
                Rect::new(a, t.y, b - a, t.h)
            }
        })
        .collect()
}

/// Joins text fragments that the cut split at the word or line gaps of
/// large type. Two text blocks of similar line height join when they sit in
/// one band no more than 1.5 lines apart, or are stacked no more than a line
/// apart, and their hull overlaps no other block.
fn merge_fragments(
    mut rects: Vec<Rect>,
    stats: &mut BTreeMap<Rect, LeafStats>,
    mask: &InkMask,
    page: &PageImage,
    line_h: f64,
    params: &SegmentParams,
) -> Vec<Rect> {
    let joinable = |a: &Rect, b: &Rect, sa: &LeafStats, sb: &LeafStats| {
        if sa.looks_like_image(line_h, params) || sb.looks_like_image(line_h, params) {
            return false;
        }
        let (ha, hb) = (sa.median_line.max(1.0), sb.median_line.max(1.0));
        if ha.max(hb) / ha.min(hb) > 1.3 {
            return false;
        }
        let h = ha.max(hb);
        let v_overlap = a.bottom().min(b.bottom()) as f64 - a.y.max(b.y) as f64;
        let h_overlap = a.right().min(b.right()) as f64 - a.x.max(b.x) as f64;
        let same_band = v_overlap >= 0.5 * a.h.min(b.h) as f64;
        if same_band {
            return -h_overlap <= 1.5 * h;
        }
        h_overlap > 0.0 && -v_overlap <= h
    };
    loop {
        let mut joined = None;
        'search: for i in 0..rects.len() {
            for j in i + 1..rects.len() {
                let (a, b) = (rects[i], rects[j]);
                if !joinable(&a, &b, &stats[&a], &stats[&b]) {
                    continue;
                }
                let hull = a.union(&b);
                let clear = rects
                    .iter()
                    .enumerate()
                    .all(|(k, r)| k == i || k == j || hull.intersection(r).is_none());
                if clear {
                    joined = Some((i, j, hull));
                    break 'search;
                }
            }
        }
        let Some((i, j, hull)) = joined else {
            break;
        };
        stats
            .entry(hull)
            .or_insert_with(|| analyze_leaf(mask, &page.gray, hull));
        rects.remove(j);
        rects[i] = hull;
    }
    rects
}

/// Cuts a page into articles and types each article's regions.
///
/// Ruled frames delimit articles; a frame nested in an article frame that
/// holds its own headline becomes an embedded article. Pages without any
/// frame fall back to whitespace blocks separated by three minimum gaps.
pub fn segment_page(page: &PageImage, params: &SegmentParams) -> SegmentOutcome {
    let mut outcome = SegmentOutcome::default();
    let mask = InkMask::new(&page.gray);
    let full = Rect::new(0, 0, page.width(), page.height());
    if mask.density(full) < params.blank_coverage {
        outcome.warnings.push(format!("page {} is blank", page.page_id));
        return outcome;
    }
    let tree = cut_region(&mask, full, params);
    let all_leaves = leaves(&tree);
    let mut stats: BTreeMap<Rect, LeafStats> = all_leaves
        .iter()
        .map(|&r| (r, analyze_leaf(&mask, &page.gray, r)))
        .collect();
    let line_h = median_line_height(stats.values());

    let is_headline_leaf = |r: &Rect| {
        let s = &stats[r];
        !s.looks_like_image(line_h, params) && s.median_line >= params.headline_ratio * line_h
    };

    // (frame, leaves, embedded (frame, leaves))
    type Group = (Option<Rect>, Vec<Rect>, Vec<(Rect, Vec<Rect>)>);
    let mut groups: Vec<Group> = Vec::new();
    let mut stray = Vec::new();
    for node in &tree {
        match node {
            Node::Frame { outer, children } => {
                let mut own = Vec::new();
                let mut embedded = Vec::new();
                for child in children {
                    match child {
                        Node::Leaf(r) => own.push(*r),
                        Node::Frame { outer: inner, children } => {
                            let inner_leaves = leaves(children);
                            if inner_leaves.iter().any(&is_headline_leaf) {
                                embedded.push((*inner, inner_leaves));
                            } else {
                                own.extend(inner_leaves);
                            }
                        }
                    }
                }
                if own.is_empty() && embedded.is_empty() {
                    continue;
                }
                if own.is_empty() {
                    // A frame holding only boxed sub-articles: promote the first.
                    own = embedded.remove(0).1;
                }
                groups.push((Some(*outer), own, embedded));
            }
            Node::Leaf(r) => stray.push(*r),
        }
    }
    if groups.is_empty() {
        let coarse = leaves(&cut(&mask, full, params, params.min_gap * 3, 0));
        let mut buckets: Vec<Vec<Rect>> = vec![Vec::new(); coarse.len()];
        for leaf in stray.drain(..) {
            if let Some(i) = coarse.iter().position(|c| c.contains(&leaf)) {
                buckets[i].push(leaf);
            }
        }
        groups.extend(buckets.into_iter().filter(|b| !b.is_empty()).map(|b| (None, b, Vec::new())));
    } else if !stray.is_empty() {
        outcome
            .warnings
            .push(format!("page {}: {} ink blocks outside any article frame", page.page_id, stray.len()));
    }

    for (_, own, embedded) in groups.iter_mut() {
        *own = merge_fragments(std::mem::take(own), &mut stats, &mask, page, line_h, params);
        for (_, e) in embedded.iter_mut() {
            *e = merge_fragments(std::mem::take(e), &mut stats, &mask, page, line_h, params);
        }
    }

    let hulls: Vec<Rect> = groups
        .iter()
        .map(|(f, l, _)| f.or_else(|| Rect::hull(l)).expect("non-empty group"))
        .collect();
    for (n, gi) in reading_order(&hulls).into_iter().enumerate() {
        let (frame, own, embedded) = &groups[gi];
        let article_id = format!("{}-a{:02}", page.page_id, n + 1);
        let record = ArticleRecord {
            article_id: article_id.clone(),
            page_id: page.page_id.clone(),
            rois: own.iter().map(|&r| Roi::unclassified(r, 0)).collect(),
            parent: None,
            frame: *frame,
            texts: BTreeMap::new(),
        };
        outcome.articles.push(classify_with(record, &stats, line_h, params));
        let eframes: Vec<Rect> = embedded.iter().map(|e| e.0).collect();
        for (m, ei) in reading_order(&eframes).into_iter().enumerate() {
            let (eframe, eleaves) = &embedded[ei];
            let record = ArticleRecord {
                article_id: format!("{article_id}e{}", m + 1),
                page_id: page.page_id.clone(),
                rois: eleaves.iter().map(|&r| Roi::unclassified(r, 1)).collect(),
                parent: Some(article_id.clone()),
                frame: Some(*eframe),
                texts: BTreeMap::new(),
            };
            outcome.articles.push(classify_with(record, &stats, line_h, params));
        }
    }
    if outcome.articles.is_empty() {
        warn!("page {}: no articles found", page.page_id);
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, Luma};

    fn blank(w: u32, h: u32) -> GrayImage {
        GrayImage::from_pixel(w, h, Luma([255]))
    }

    fn fill(img: &mut GrayImage, r: Rect, v: u8) {
        for y in r.y..r.bottom() {
            for x in r.x..r.right() {
                img.put_pixel(x, y, Luma([v]));
            }
        }
    }

    fn frame(img: &mut GrayImage, r: Rect) {
        fill(img, Rect::new(r.x, r.y, r.w, 2), 0);
        fill(img, Rect::new(r.x, r.bottom() - 2, r.w, 2), 0);
        fill(img, Rect::new(r.x, r.y, 2, r.h), 0);
        fill(img, Rect::new(r.right() - 2, r.y, 2, r.h), 0);
    }

    #[test]
    fn blank_runs_report_interior_gaps() {
        let v = [false, true, true, false, true, false];
        assert_eq!(blank_runs(v.into_iter(), 10), vec![(11, 2), (14, 1)]);
    }

    #[test]
    fn frames_become_nodes_and_text_leaves() {
        let mut img = blank(300, 200);
        frame(&mut img, Rect::new(10, 10, 200, 150));
        fill(&mut img, Rect::new(30, 30, 100, 10), 0);
        fill(&mut img, Rect::new(30, 60, 150, 10), 0);
        let mask = InkMask::new(&img);
        let tree = cut_region(&mask, Rect::new(0, 0, 300, 200), &SegmentParams::default());
        assert_eq!(tree.len(), 1);
        let Node::Frame { outer, children } = &tree[0] else {
            panic!("expected frame")
        };
        assert_eq!(*outer, Rect::new(10, 10, 200, 150));
        assert_eq!(leaves(children), vec![Rect::new(30, 30, 100, 10), Rect::new(30, 60, 150, 10)]);
    }

    #[test]
    fn dense_block_is_not_a_frame() {
        let mut img = blank(200, 200);
        fill(&mut img, Rect::new(20, 20, 120, 100), 40);
        let mask = InkMask::new(&img);
        let tree = cut_region(&mask, Rect::new(0, 0, 200, 200), &SegmentParams::default());
        assert_eq!(tree, vec![Node::Leaf(Rect::new(20, 20, 120, 100))]);
    }

    #[test]
    fn ruled_separator_splits_touching_blocks() {
        let mut img = blank(200, 100);
        fill(&mut img, Rect::new(10, 10, 150, 8), 0);
        fill(&mut img, Rect::new(10, 22, 180, 2), 0);
        fill(&mut img, Rect::new(10, 28, 150, 8), 0);
        let mask = InkMask::new(&img);
        let tree = cut_region(&mask, Rect::new(0, 0, 200, 100), &SegmentParams::default());
        assert_eq!(
            leaves(&tree),
            vec![Rect::new(10, 10, 150, 8), Rect::new(10, 28, 150, 8)]
        );
    }
}
