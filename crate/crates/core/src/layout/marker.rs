//! Marker-text documents: one marker line per region followed by its text.
//!
//! ```text
//! #article <id> page=<page_id> parent=<id|-> level=<0|1>
//! [H|1|0]
//! headline text
//! [I|1] file=<id>_I1.png
//! [P|1]
//! caption text
//! [C|1]
//! content text
//! ```
//!
//! Text lines that would read as a marker or header are prefixed with `\`.

use super::{ArticleRecord, RoiKind};
use crate::error::{Error, Result};

pub fn image_file_name(article_id: &str, seq_index: u32) -> String {
    format!("{article_id}_I{seq_index}.png")
}

pub fn serialize_article(article: &ArticleRecord) -> Result<String> {
    let mut out = format!(
        "#article {} page={} parent={} level={}\n",
        article.article_id,
        article.page_id,
        article.parent.as_deref().unwrap_or("-"),
        article.embed_level()
    );
    for (i, roi) in article.rois.iter().enumerate() {
        match roi.kind {
            RoiKind::Image => {
                out.push_str(&format!(
                    "[I|{}] file={}\n",
                    roi.seq_index,
                    image_file_name(&article.article_id, roi.seq_index)
                ));
                continue;
            }
            RoiKind::Headline => out.push_str(&format!(
                "[H|{}|{}]\n",
                roi.seq_index,
                roi.sub_index.unwrap_or(0)
            )),
            RoiKind::Unclassified => {
                return Err(Error::Invalid(format!(
                    "article {}: roi #{i} is unclassified",
                    article.article_id
                )))
            }
            k => out.push_str(&format!("[{}|{}]\n", k.code(), roi.seq_index)),
        }
        let text = article.texts.get(&i).ok_or_else(|| Error::MissingText {
            article_id: article.article_id.clone(),
            kind: roi.kind.to_string(),
            index: i,
        })?;
        for line in text.lines() {
            if line.starts_with('[') || line.starts_with('#') || line.starts_with('\\') {
                out.push('\\');
            }
            out.push_str(line);
            out.push('\n');
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerSection {
    pub kind: RoiKind,
    pub seq_index: u32,
    pub sub_index: Option<u32>,
    /// Image file for `I` markers, text otherwise.
    pub body: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerDocument {
    pub article_id: String,
    pub page_id: String,
    pub parent: Option<String>,
    pub embed_level: u8,
    pub sections: Vec<MarkerSection>,
}

pub fn parse_article_document(doc: &str) -> Result<MarkerDocument> {
    let bad = |m: &str| Error::Invalid(format!("marker document: {m}"));
    let mut lines = doc.lines();
    let header = lines.next().ok_or_else(|| bad("empty"))?;
    let rest = header.strip_prefix("#article ").ok_or_else(|| bad("missing header"))?;
    let mut parts = rest.split(' ');
    let article_id = parts.next().ok_or_else(|| bad("missing id"))?.to_string();
    let mut page_id = None;
    let mut parent = None;
    let mut level = 0;
    for kv in parts {
        match kv.split_once('=') {
            Some(("page", v)) => page_id = Some(v.to_string()),
            Some(("parent", v)) => parent = (v != "-").then(|| v.to_string()),
            Some(("level", v)) => level = v.parse().map_err(|_| bad("bad level"))?,
            _ => return Err(bad("bad header field")),
        }
    }
    let mut sections: Vec<MarkerSection> = Vec::new();
    for line in lines {
        if let Some(marker) = line.strip_prefix('[') {
            let (inner, tail) = marker.split_once(']').ok_or_else(|| bad("unterminated marker"))?;
            let fields: Vec<&str> = inner.split('|').collect();
            let kind = fields
                .first()
                .and_then(|f| f.chars().next())
                .and_then(RoiKind::from_code)
                .ok_or_else(|| bad("unknown marker kind"))?;
            let num = |i: usize| -> Result<u32> {
                fields.get(i).and_then(|f| f.parse().ok()).ok_or_else(|| bad("bad marker index"))
            };
            let (seq_index, sub_index) = match (kind, fields.len()) {
                (RoiKind::Headline, 3) => (num(1)?, Some(num(2)?)),
                (RoiKind::Headline, _) => return Err(bad("headline marker needs seq and sub index")),
                (_, 2) => (num(1)?, None),
                _ => return Err(bad("marker arity")),
            };
            let body = match kind {
                RoiKind::Image => tail
                    .trim()
                    .strip_prefix("file=")
                    .ok_or_else(|| bad("image marker without file"))?
                    .to_string(),
                _ => String::new(),
            };
            sections.push(MarkerSection {
                kind,
                seq_index,
                sub_index,
                body,
            });
        } else {
            let section = sections.last_mut().ok_or_else(|| bad("text before first marker"))?;
            let line = line.strip_prefix('\\').unwrap_or(line);
            if !section.body.is_empty() {
                section.body.push('\n');
            }
            section.body.push_str(line);
        }
    }
    Ok(MarkerDocument {
        article_id,
        page_id: page_id.ok_or_else(|| bad("missing page"))?,
        parent,
        embed_level: level,
        sections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Roi;
    use crate::raster::Rect;
    use std::collections::BTreeMap;

    fn roi(kind: RoiKind, seq: u32, sub: Option<u32>, y: u32, level: u8) -> Roi {
        Roi {
            kind,
            bbox: Rect::new(0, y, 10, 5),
            seq_index: seq,
            sub_index: sub,
            embed_level: level,
        }
    }

    #[test]
    fn headline_and_content_markers() {
        let a = ArticleRecord {
            article_id: "x-a01".into(),
            page_id: "x".into(),
            rois: vec![roi(RoiKind::Headline, 1, Some(0), 0, 0), roi(RoiKind::Content, 1, None, 10, 0)],
            parent: None,
            frame: None,
            texts: BTreeMap::from([(0, "Big news".to_string()), (1, "Body text.".to_string())]),
        };
        let doc = serialize_article(&a).unwrap();
        assert_eq!(
            doc,
            "#article x-a01 page=x parent=- level=0\n[H|1|0]\nBig news\n[C|1]\nBody text.\n"
        );
    }

    #[test]
    fn embedded_headline_marker() {
        let a = ArticleRecord {
            article_id: "x-a01e1".into(),
            page_id: "x".into(),
            rois: vec![roi(RoiKind::Headline, 2, Some(0), 0, 1)],
            parent: Some("x-a01".into()),
            frame: None,
            texts: BTreeMap::from([(0, "Side story".to_string())]),
        };
        let doc = serialize_article(&a).unwrap();
        assert!(doc.starts_with("#article x-a01e1 page=x parent=x-a01 level=1\n[H|2|0]\n"));
    }

    #[test]
    fn image_and_caption_markers_and_parse_back() {
        let a = ArticleRecord {
            article_id: "x-a02".into(),
            page_id: "x".into(),
            rois: vec![roi(RoiKind::Image, 1, None, 0, 0), roi(RoiKind::Caption, 1, None, 10, 0)],
            parent: None,
            frame: None,
            texts: BTreeMap::from([(1, "[Photo] of the bridge\nsecond line".to_string())]),
        };
        let doc = serialize_article(&a).unwrap();
        assert!(doc.contains("[I|1] file=x-a02_I1.png\n[P|1]\n\\[Photo] of the bridge\n"));
        let parsed = parse_article_document(&doc).unwrap();
        assert_eq!(parsed.sections.len(), 2);
        assert_eq!(parsed.sections[0].body, "x-a02_I1.png");
        assert_eq!(parsed.sections[1].body, "[Photo] of the bridge\nsecond line");
    }

    #[test]
    fn missing_text_is_an_error() {
        let a = ArticleRecord {
            article_id: "x-a03".into(),
            page_id: "x".into(),
            rois: vec![roi(RoiKind::Content, 1, None, 0, 0)],
            parent: None,
            frame: None,
            texts: BTreeMap::new(),
        };
        assert!(matches!(serialize_article(&a), Err(Error::MissingText { index: 0, .. })));
    }
}
