//! Precision and recall of pipeline output against a bundle's truth.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::FixtureTruth;
use crate::article_mapper::{greedy_assign, ArticlePair};
use crate::corpus::normalize_text;
use crate::layout::{AnnotatedArticle, ArticleRecord};
use crate::raster::Rect;
use crate::sentence::SentencePair;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub true_positives: usize,
    pub predicted: usize,
    pub expected: usize,
}

impl Prf {
    pub fn from_sets<T: Ord>(predicted: &BTreeSet<T>, expected: &BTreeSet<T>) -> Self {
        Prf {
            true_positives: predicted.intersection(expected).count(),
            predicted: predicted.len(),
            expected: expected.len(),
        }
    }

    /// Vacuously 1 with no predictions.
    pub fn precision(&self) -> f64 {
        if self.predicted == 0 {
            1.0
        } else {
            self.true_positives as f64 / self.predicted as f64
        }
    }

    /// Vacuously 1 with nothing expected.
    pub fn recall(&self) -> f64 {
        if self.expected == 0 {
            1.0
        } else {
            self.true_positives as f64 / self.expected as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// Pairs compared as `(left id, right id)`; origin is ignored.
pub fn score_article_pairs(predicted: &[ArticlePair], truth: &FixtureTruth) -> Prf {
    let pred: BTreeSet<_> = predicted.iter().map(|p| (p.left.clone(), p.right.clone())).collect();
    let exp: BTreeSet<_> = truth.article_pairs.iter().map(|p| (p.left.clone(), p.right.clone())).collect();
    Prf::from_sets(&pred, &exp)
}

/// Sentence pairs compared by article ids and normalized texts, so the same
/// pair found by two strategies counts once.
pub fn score_sentence_pairs<'a>(predicted: impl IntoIterator<Item = &'a SentencePair>, truth: &FixtureTruth) -> Prf {
    let pred: BTreeSet<_> = predicted
        .into_iter()
        .map(|p| {
            (
                p.provenance.article_ids.0.clone(),
                p.provenance.article_ids.1.clone(),
                normalize_text(&p.left.text),
                normalize_text(&p.right.text),
            )
        })
        .collect();
    let exp: BTreeSet<_> = truth
        .sentence_pairs
        .iter()
        .map(|p| {
            (
                p.left_article.clone(),
                p.right_article.clone(),
                normalize_text(&p.left),
                normalize_text(&p.right),
            )
        })
        .collect();
    Prf::from_sets(&pred, &exp)
}

fn annotated_hull(a: &AnnotatedArticle) -> Option<Rect> {
    a.frame.or_else(|| Rect::hull(a.rois.iter().map(|r| &r.bbox)))
}

/// Truth id of each predicted article whose hull has IoU at least `min_iou`
/// with a truth article on the same page; each truth article is used once,
/// best overlaps first.
pub fn match_articles(predicted: &[ArticleRecord], truth: &[AnnotatedArticle], min_iou: f64) -> BTreeMap<String, String> {
    let mut cands = Vec::new();
    for p in predicted {
        let Some(ph) = p.hull() else { continue };
        for t in truth.iter().filter(|t| t.page_id == p.page_id) {
            if let Some(th) = annotated_hull(t) {
                let iou = ph.iou(&th);
                if iou >= min_iou {
                    cands.push((p.article_id.clone(), t.article_id.clone(), iou));
                }
            }
        }
    }
    greedy_assign(cands).into_iter().map(|(p, t, _)| (p, t)).collect()
}

/// Share of truth articles matched at `min_iou`, as `(matched, total)`.
pub fn boundary_recall(predicted: &[ArticleRecord], truth: &[AnnotatedArticle], min_iou: f64) -> (usize, usize) {
    (match_articles(predicted, truth, min_iou).len(), truth.len())
}

fn renamed(id: &str, ids: &BTreeMap<String, String>) -> String {
    // unmatched ids are kept, prefixed so they cannot collide with truth ids
    ids.get(id).cloned().unwrap_or_else(|| format!("unmatched:{id}"))
}

/// Article pairs with ids replaced through `ids`.
pub fn rename_article_pairs(pairs: &[ArticlePair], ids: &BTreeMap<String, String>) -> Vec<ArticlePair> {
    pairs
        .iter()
        .map(|p| ArticlePair {
            left: renamed(&p.left, ids),
            right: renamed(&p.right, ids),
            ..p.clone()
        })
        .collect()
}

/// Sentence pairs with provenance article ids replaced through `ids`.
pub fn rename_sentence_pairs(pairs: &[SentencePair], ids: &BTreeMap<String, String>) -> Vec<SentencePair> {
    pairs
        .iter()
        .map(|p| {
            let mut p = p.clone();
            let (l, r) = &p.provenance.article_ids;
            p.provenance.article_ids = (renamed(l, ids), renamed(r, ids));
            p
        })
        .collect()
}
