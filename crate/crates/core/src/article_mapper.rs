//! Cross-language article pairing through shared photos, and embedded articles
//! through headline similarity.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, match_descriptors, Descriptor, FeatureParams};
use crate::layout::{image_file_name, ArticleRecord};

/// An article with the context needed for pairing.
#[derive(Debug, Clone)]
pub struct ArticleInput {
    pub article: ArticleRecord,
    pub language: String,
    pub date: NaiveDate,
    /// `(seq_index, pixels)` of each Image region.
    pub images: Vec<(u32, GrayImage)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairOrigin {
    ImagePivot,
    HeadlinePivot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEvidence {
    pub left_image: String,
    pub right_image: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticlePair {
    pub left: String,
    pub right: String,
    pub left_language: String,
    pub right_language: String,
    pub date: NaiveDate,
    pub image_evidence: Vec<ImageEvidence>,
    pub pair_score: f64,
    pub origin: PairOrigin,
    /// `(left parent, right parent)` for embedded pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parents: Option<(String, String)>,
}

/// Greedy one-to-one selection by descending score; ties go to the
/// lexicographically smaller `(left, right)` key.
pub fn greedy_assign<K: Ord + Clone + std::hash::Hash>(mut cands: Vec<(K, K, f64)>) -> Vec<(K, K, f64)> {
    cands.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)).then_with(|| a.1.cmp(&b.1)));
    let mut used_l = HashSet::new();
    let mut used_r = HashSet::new();
    let mut out = Vec::new();
    for (l, r, s) in cands {
        if !used_l.contains(&l) && !used_r.contains(&r) {
            used_l.insert(l.clone());
            used_r.insert(r.clone());
            out.push((l, r, s));
        }
    }
    out
}

/// Pairs articles of one date whose photos match at or above
/// `params.similarity_threshold`. Articles of other dates are ignored.
pub fn map_articles(
    left: &[ArticleInput],
    right: &[ArticleInput],
    date: NaiveDate,
    params: &FeatureParams,
) -> Result<Vec<ArticlePair>> {
    let left: Vec<&ArticleInput> = left.iter().filter(|a| a.date == date).collect();
    let right: Vec<&ArticleInput> = right.iter().filter(|a| a.date == date).collect();
    if let (Some(a), Some(b)) = (left.first(), right.first()) {
        if a.language == b.language {
            return Err(Error::Invalid(format!("both sides are in language {}", a.language)));
        }
    }
    for side in [&left, &right] {
        let langs: HashSet<&str> = side.iter().map(|a| a.language.as_str()).collect();
        if langs.len() > 1 {
            return Err(Error::Invalid("articles of one side span several languages".into()));
        }
    }

    type Feat = (usize, u32, Vec<Descriptor>);
    let features = |side: &[&ArticleInput]| -> Result<Vec<Feat>> {
        side.par_iter()
            .enumerate()
            .flat_map_iter(|(ai, a)| a.images.iter().map(move |(seq, img)| (ai, *seq, img)))
            .map(|(ai, seq, img)| Ok((ai, seq, extract_features(img, params)?)))
            .collect()
    };
    let lf = features(&left)?;
    let rf = features(&right)?;

    let cells: Vec<(usize, usize, ImageEvidence)> = lf
        .par_iter()
        .flat_map_iter(|l| rf.iter().map(move |r| (l, r)))
        .map(|((la, lseq, ld), (ra, rseq, rd))| {
            let similarity = match_descriptors(ld, rd, params.ratio).score;
            (
                *la,
                *ra,
                ImageEvidence {
                    left_image: image_file_name(&left[*la].article.article_id, *lseq),
                    right_image: image_file_name(&right[*ra].article.article_id, *rseq),
                    similarity,
                },
            )
        })
        .collect();

    let mut evidence: BTreeMap<(usize, usize), Vec<ImageEvidence>> = BTreeMap::new();
    for (la, ra, ev) in cells {
        evidence.entry((la, ra)).or_default().push(ev);
    }
    let scored: BTreeMap<(usize, usize), f64> = evidence
        .iter()
        .map(|(k, ev)| (*k, ev.iter().map(|e| e.similarity).fold(0.0, f64::max)))
        .collect();
    let cands = scored
        .iter()
        .filter(|(_, &s)| s >= params.similarity_threshold)
        .map(|(&(la, ra), &s)| (left[la].article.article_id.clone(), right[ra].article.article_id.clone(), s))
        .collect();
    let by_id = |side: &[&ArticleInput], id: &str| side.iter().position(|a| a.article.article_id == id).expect("known id");
    Ok(greedy_assign(cands)
        .into_iter()
        .map(|(l, r, s)| {
            let (la, ra) = (by_id(&left, &l), by_id(&right, &r));
            ArticlePair {
                left: l,
                right: r,
                left_language: left[la].language.clone(),
                right_language: right[ra].language.clone(),
                date,
                image_evidence: evidence.remove(&(la, ra)).unwrap_or_default(),
                pair_score: s,
                origin: PairOrigin::ImagePivot,
                parents: None,
            }
        })
        .collect())
}

/// Headline similarity used to pair embedded articles.
pub type HeadlineSimilarity<'a> = dyn Fn(&str, &str) -> Result<f64> + Sync + 'a;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddedOutcome {
    pub pairs: Vec<ArticlePair>,
    pub warnings: Vec<String>,
}

/// Pairs the embedded children of an established pair by headline similarity.
pub fn map_embedded(
    pair: &ArticlePair,
    left: &[ArticleInput],
    right: &[ArticleInput],
    delta: &HeadlineSimilarity<'_>,
    threshold: f64,
) -> Result<EmbeddedOutcome> {
    let mut out = EmbeddedOutcome::default();
    let mut children = |side: &[ArticleInput], parent: &str| -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = Vec::new();
        for a in side.iter().filter(|a| a.article.parent.as_deref() == Some(parent)) {
            match a.article.headline_text() {
                Some(h) if !h.trim().is_empty() => v.push((a.article.article_id.clone(), h.to_string())),
                _ => {
                    let msg = format!("embedded article {} has no headline text; skipped", a.article.article_id);
                    log::warn!("{msg}");
                    out.warnings.push(msg);
                }
            }
        }
        v.sort();
        v
    };
    let lc = children(left, &pair.left);
    let rc = children(right, &pair.right);
    if lc.is_empty() || rc.is_empty() {
        return Ok(out);
    }
    let mut cands = Vec::new();
    for (lid, lh) in &lc {
        for (rid, rh) in &rc {
            let s = delta(lh, rh)?;
            if s >= threshold {
                cands.push((lid.clone(), rid.clone(), s));
            }
        }
    }
    out.pairs = greedy_assign(cands)
        .into_iter()
        .map(|(l, r, s)| ArticlePair {
            left: l,
            right: r,
            left_language: pair.left_language.clone(),
            right_language: pair.right_language.clone(),
            date: pair.date,
            image_evidence: Vec::new(),
            pair_score: s,
            origin: PairOrigin::HeadlinePivot,
            parents: Some((pair.left.clone(), pair.right.clone())),
        })
        .collect();
    Ok(out)
}

pub fn write_pair_report(pairs: &[ArticlePair], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for p in pairs {
        serde_json::to_writer(&mut f, p)?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

pub fn read_pair_report(path: &Path) -> Result<Vec<ArticlePair>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
