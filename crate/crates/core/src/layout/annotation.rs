//! JSON region annotations: the import path for externally produced layouts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_hierarchy, ArticleRecord, Roi, RoiKind};
use crate::error::{Error, Result};
use crate::page_store::PageSet;
use crate::raster::Rect;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedArticle {
    pub article_id: String,
    pub page_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Rect>,
    pub rois: Vec<AnnotatedRoi>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedRoi {
    pub kind: RoiKind,
    #[serde(rename = "box")]
    pub bbox: Rect,
    pub seq_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_index: Option<u32>,
}

pub fn to_annotations(articles: &[ArticleRecord]) -> Vec<AnnotatedArticle> {
    articles
        .iter()
        .map(|a| AnnotatedArticle {
            article_id: a.article_id.clone(),
            page_id: a.page_id.clone(),
            parent: a.parent.clone(),
            frame: a.frame,
            rois: a
                .rois
                .iter()
                .map(|r| AnnotatedRoi {
                    kind: r.kind,
                    bbox: r.bbox,
                    seq_index: r.seq_index,
                    sub_index: r.sub_index,
                })
                .collect(),
        })
        .collect()
}

/// Builds records from parsed annotations, enforcing every article invariant.
pub fn parse_annotations(annotated: Vec<AnnotatedArticle>, set: &PageSet) -> Result<Vec<ArticleRecord>> {
    let mut out = Vec::with_capacity(annotated.len());
    for a in annotated {
        let page = set.page(&a.page_id).ok_or_else(|| {
            Error::Annotation(format!("article {}: unknown page_id {}", a.article_id, a.page_id))
        })?;
        if a.rois.iter().any(|r| r.kind == RoiKind::Unclassified) {
            return Err(Error::Annotation(format!("article {}: unclassified roi", a.article_id)));
        }
        let level = u8::from(a.parent.is_some());
        let record = ArticleRecord {
            article_id: a.article_id,
            page_id: a.page_id,
            rois: a
                .rois
                .into_iter()
                .map(|r| Roi {
                    kind: r.kind,
                    bbox: r.bbox,
                    seq_index: r.seq_index,
                    sub_index: r.sub_index,
                    embed_level: level,
                })
                .collect(),
            parent: a.parent,
            frame: a.frame,
            texts: BTreeMap::new(),
        };
        record.validate(page.width(), page.height())?;
        out.push(record);
    }
    let mut by_page: BTreeMap<&str, Vec<ArticleRecord>> = BTreeMap::new();
    for a in &out {
        by_page.entry(a.page_id.as_str()).or_default().push(a.clone());
    }
    for page_articles in by_page.values() {
        validate_hierarchy(page_articles)?;
    }
    Ok(out)
}

pub fn load_annotations(file: &Path, set: &PageSet) -> Result<Vec<ArticleRecord>> {
    let raw = fs::read(file).map_err(|e| Error::io(file, e))?;
    let annotated: Vec<AnnotatedArticle> = serde_json::from_slice(&raw)?;
    parse_annotations(annotated, set)
}
