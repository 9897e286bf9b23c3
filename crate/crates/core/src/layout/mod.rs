//! Article segmentation and the typed regions of interest inside each article.
//!
//! A page is cut into articles ([`segment_page`]), each article's regions are
//! typed as headline, image, caption or content ([`classify_rois`]), and the
//! result can round-trip through the JSON annotation format or be written as
//! a marker-text document once the OCR stage has filled in the texts.

mod annotation;
mod classify;
mod marker;
mod segment;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use annotation::{load_annotations, parse_annotations, to_annotations, AnnotatedArticle, AnnotatedRoi};
pub use classify::{classify_rois, page_line_height};
pub use marker::{image_file_name, parse_article_document, serialize_article, MarkerDocument, MarkerSection};
pub use segment::{segment_page, SegmentOutcome};

use crate::error::{Error, Result};
use crate::raster::Rect;

/// Overlap tolerance between ROI boxes of the same article.
pub const OVERLAP_TOLERANCE: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoiKind {
    #[serde(alias = "H")]
    Headline,
    #[serde(alias = "I")]
    Image,
    #[serde(alias = "P")]
    Caption,
    #[serde(alias = "C")]
    Content,
    Unclassified,
}

impl RoiKind {
    /// Single-letter marker code.
    pub fn code(self) -> char {
        match self {
            RoiKind::Headline => 'H',
            RoiKind::Image => 'I',
            RoiKind::Caption => 'P',
            RoiKind::Content => 'C',
            RoiKind::Unclassified => 'U',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        Some(match c {
            'H' => RoiKind::Headline,
            'I' => RoiKind::Image,
            'P' => RoiKind::Caption,
            'C' => RoiKind::Content,
            _ => return None,
        })
    }

    pub fn is_text(self) -> bool {
        matches!(self, RoiKind::Headline | RoiKind::Caption | RoiKind::Content)
    }
}

impl fmt::Display for RoiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RoiKind::Headline => "headline",
            RoiKind::Image => "image",
            RoiKind::Caption => "caption",
            RoiKind::Content => "content",
            RoiKind::Unclassified => "unclassified",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub kind: RoiKind,
    #[serde(rename = "box")]
    pub bbox: Rect,
    pub seq_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_index: Option<u32>,
    #[serde(default)]
    pub embed_level: u8,
}

impl Roi {
    pub fn unclassified(bbox: Rect, embed_level: u8) -> Self {
        Roi {
            kind: RoiKind::Unclassified,
            bbox,
            seq_index: 0,
            sub_index: None,
            embed_level,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub article_id: String,
    pub page_id: String,
    pub rois: Vec<Roi>,
    pub parent: Option<String>,
    /// Ruled frame around the article when one was detected or annotated.
    pub frame: Option<Rect>,
    /// Extracted text keyed by position in `rois`.
    pub texts: BTreeMap<usize, String>,
}

impl ArticleRecord {
    pub fn embed_level(&self) -> u8 {
        u8::from(self.parent.is_some())
    }

    /// Frame when present, otherwise the union of the ROI boxes.
    pub fn hull(&self) -> Option<Rect> {
        self.frame.or_else(|| Rect::hull(self.rois.iter().map(|r| &r.bbox)))
    }

    pub fn rois_of(&self, kind: RoiKind) -> impl Iterator<Item = (usize, &Roi)> {
        self.rois.iter().enumerate().filter(move |(_, r)| r.kind == kind)
    }

    pub fn has_images(&self) -> bool {
        self.rois.iter().any(|r| r.kind == RoiKind::Image)
    }

    /// Text of the first main headline, if extracted.
    pub fn headline_text(&self) -> Option<&str> {
        self.rois_of(RoiKind::Headline)
            .min_by_key(|(_, r)| r.sub_index)
            .and_then(|(i, _)| self.texts.get(&i))
            .map(String::as_str)
            .filter(|t| !t.trim().is_empty())
    }

    /// Checks the structural invariants against the page bounds.
    pub fn validate(&self, page_width: u32, page_height: u32) -> Result<()> {
        let bad = |msg: String| Err(Error::Annotation(format!("article {}: {msg}", self.article_id)));
        if self.rois.is_empty() {
            return bad("has no regions".into());
        }
        for (i, r) in self.rois.iter().enumerate() {
            if !r.bbox.within(page_width, page_height) {
                return bad(format!("roi #{i} box {:?} outside page {page_width}x{page_height}", r.bbox));
            }
            if (r.kind == RoiKind::Headline) != r.sub_index.is_some() {
                return bad(format!("roi #{i} box {:?}: sub_index must be present exactly on headlines", r.bbox));
            }
            if r.kind == RoiKind::Caption && !self.rois_of(RoiKind::Image).any(|(_, im)| im.seq_index == r.seq_index) {
                return bad(format!(
                    "caption roi #{i} box {:?} has no image with seq_index {}",
                    r.bbox, r.seq_index
                ));
            }
        }
        for i in 0..self.rois.len() {
            for j in i + 1..self.rois.len() {
                let (a, b) = (&self.rois[i].bbox, &self.rois[j].bbox);
                if a.overlaps_beyond(b, OVERLAP_TOLERANCE) {
                    return bad(format!("roi boxes {a:?} and {b:?} overlap"));
                }
            }
        }
        if let Some(frame) = self.frame {
            if let Some(r) = self.rois.iter().find(|r| !frame.contains(&r.bbox)) {
                return bad(format!("roi box {:?} outside frame {frame:?}", r.bbox));
            }
        }
        Ok(())
    }
}

/// Checks nesting constraints that span several records of one page.
pub fn validate_hierarchy(articles: &[ArticleRecord]) -> Result<()> {
    for a in articles {
        let Some(pid) = &a.parent else { continue };
        let parent = articles
            .iter()
            .find(|p| &p.article_id == pid)
            .ok_or_else(|| Error::Annotation(format!("article {}: unknown parent {pid}", a.article_id)))?;
        if parent.parent.is_some() {
            return Err(Error::Annotation(format!(
                "article {}: parent {pid} is itself embedded",
                a.article_id
            )));
        }
        if parent.page_id != a.page_id {
            return Err(Error::Annotation(format!("article {}: parent on another page", a.article_id)));
        }
        let hull = parent.hull().expect("validated parent has rois");
        if let Some(r) = a.rois.iter().find(|r| !hull.grow(OVERLAP_TOLERANCE).contains(&r.bbox)) {
            return Err(Error::Annotation(format!(
                "article {}: roi box {:?} outside parent hull {hull:?}",
                a.article_id, r.bbox
            )));
        }
    }
    Ok(())
}

/// Tunables for segmentation and region typing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    /// Minimum blank run, in pixels, that separates two blocks.
    pub min_gap: u32,
    /// A line is "ruled" when its longest ink run covers this fraction of the band.
    pub ruled_fraction: f64,
    /// Maximum thickness of a ruled line or frame border.
    pub max_rule_thickness: u32,
    /// Shortest ink run that can be a rule; keeps glyph strokes from counting.
    pub min_rule_length: u32,
    /// Pages with less ink coverage than this are treated as blank.
    pub blank_coverage: f64,
    pub headline_ratio: f64,
    pub image_density: f64,
    pub image_edge_density: f64,
    /// An image block is at least this many page line heights tall.
    pub image_min_lines: f64,
    pub caption_gap_lines: f64,
    pub caption_width_ratio: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            min_gap: 9,
            ruled_fraction: 0.6,
            max_rule_thickness: 6,
            min_rule_length: 40,
            blank_coverage: 0.005,
            headline_ratio: 1.8,
            image_density: 0.35,
            image_edge_density: 0.008,
            image_min_lines: 3.0,
            caption_gap_lines: 1.5,
            caption_width_ratio: 1.2,
        }
    }
}

/// Band-then-column reading order for boxes.
pub(crate) fn reading_order(boxes: &[Rect]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..boxes.len()).collect();
    idx.sort_by_key(|&i| (boxes[i].y, boxes[i].x));
    let mut bands: Vec<Vec<usize>> = Vec::new();
    let mut band_bottom = 0;
    for i in idx {
        let b = boxes[i];
        match bands.last_mut() {
            Some(band) if b.y < band_bottom => {
                band.push(i);
                band_bottom = band_bottom.max(b.bottom());
            }
            _ => {
                bands.push(vec![i]);
                band_bottom = b.bottom();
            }
        }
    }
    bands
        .into_iter()
        .flat_map(|mut band| {
            band.sort_by_key(|&i| (boxes[i].x, boxes[i].y));
            band
        })
        .collect()
}
