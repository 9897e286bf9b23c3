//! Per-stream alignment of one article pair.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embed::{cosine, EmbeddingProvider};
use super::lexicon::{lo_score_tokens, PivotLexicon};
use super::slas::{slas_align, SlasParams};
use super::{split_sentences, tokenize, Sentence};
use crate::article_mapper::greedy_assign;
use crate::error::{Error, Result};
use crate::layout::{ArticleRecord, RoiKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Strategy {
    Las,
    Slas,
    Lo,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Las, Strategy::Slas, Strategy::Lo];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Las => "LAS",
            Strategy::Slas => "SLAS",
            Strategy::Lo => "LO",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "las" => Ok(Strategy::Las),
            "slas" => Ok(Strategy::Slas),
            "lo" => Ok(Strategy::Lo),
            _ => Err(Error::Config(format!("unknown strategy {s:?} (las, slas, lo)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignParams {
    pub las_threshold: f64,
    pub slas_threshold: f64,
    pub lo_threshold: f64,
    pub slas: SlasParams,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            las_threshold: 0.6,
            slas_threshold: 0.5,
            lo_threshold: 0.5,
            slas: SlasParams::default(),
        }
    }
}

impl AlignParams {
    pub fn threshold(&self, strategy: Strategy) -> f64 {
        match strategy {
            Strategy::Las => self.las_threshold,
            Strategy::Slas => self.slas_threshold,
            Strategy::Lo => self.lo_threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64, lo: f64, hi: f64| {
            if !(lo..=hi).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [{lo}, {hi}]")));
            }
            Ok(())
        };
        check("las_threshold", self.las_threshold, -1.0, 1.0)?;
        check("slas_threshold", self.slas_threshold, 0.0, 1.0)?;
        check("lo_threshold", self.lo_threshold, 0.0, 1.0)?;
        if !(self.slas.ratio > 0.0) || !(self.slas.variance > 0.0) {
            return Err(Error::Config("slas ratio and variance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub date: NaiveDate,
    pub page_ids: (String, String),
    pub article_ids: (String, String),
    /// Sentence count of the left article.
    pub article_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub left: Sentence,
    pub right: Sentence,
    pub score: f64,
    pub strategy: Strategy,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy)]
pub struct AlignSide<'a> {
    pub article: &'a ArticleRecord,
    pub language: &'a str,
    pub date: NaiveDate,
}

#[derive(Clone, Copy, Default)]
pub struct AlignContext<'a> {
    pub provider: Option<&'a dyn EmbeddingProvider>,
    /// `(left, right)` lexicons.
    pub lexicons: Option<(&'a PivotLexicon, &'a PivotLexicon)>,
}

const STREAMS: [RoiKind; 3] = [RoiKind::Headline, RoiKind::Caption, RoiKind::Content];

/// Sentences of one ROI kind, indexed along the stream in reading order.
pub fn stream_sentences(article: &ArticleRecord, language: &str, kind: RoiKind) -> Vec<Sentence> {
    let mut out: Vec<Sentence> = Vec::new();
    for (i, _) in article.rois_of(kind) {
        let Some(text) = article.texts.get(&i) else { continue };
        for mut s in split_sentences(text, language) {
            s.index = out.len();
            s.article_id = article.article_id.clone();
            s.roi_kind = kind;
            out.push(s);
        }
    }
    out
}

/// Every sentence of an article, stream by stream.
pub fn article_sentences(article: &ArticleRecord, language: &str) -> Vec<Sentence> {
    STREAMS.iter().flat_map(|&k| stream_sentences(article, language, k)).collect()
}

/// Right-to-left word ratio over a set of article pairs; 1.0 when undefined.
pub fn length_ratio<'a>(pairs: impl IntoIterator<Item = (&'a [Sentence], &'a [Sentence])>) -> f64 {
    let (mut l, mut r) = (0usize, 0usize);
    for (a, b) in pairs {
        l += a.iter().map(|s| s.word_count).sum::<usize>();
        r += b.iter().map(|s| s.word_count).sum::<usize>();
    }
    if l == 0 || r == 0 {
        1.0
    } else {
        r as f64 / l as f64
    }
}

fn score_matrix(
    left: &[Sentence],
    right: &[Sentence],
    strategy: Strategy,
    ctx: &AlignContext<'_>,
    left_lang: &str,
    right_lang: &str,
) -> Result<Vec<Vec<f64>>> {
    match strategy {
        Strategy::Las => {
            let provider = ctx
                .provider
                .ok_or_else(|| Error::Config("LAS needs an embedding provider".into()))?;
            let texts = |s: &[Sentence]| s.iter().map(|x| x.text.clone()).collect::<Vec<_>>();
            let lv = provider.embed(&texts(left), left_lang)?;
            let rv = provider.embed(&texts(right), right_lang)?;
            if lv.len() != left.len() || rv.len() != right.len() {
                return Err(Error::Provider {
                    provider: provider.provider_id().into(),
                    message: "vector count differs from text count".into(),
                });
            }
            lv.par_iter()
                .map(|a| rv.iter().map(|b| cosine(a, b)).collect())
                .collect()
        }
        Strategy::Lo => {
            let (la, lb) = ctx
                .lexicons
                .ok_or_else(|| Error::Config("LO needs pivot lexicons for both languages".into()))?;
            let lp: Vec<_> = left.iter().map(|s| la.pivot_tokens(&tokenize(&s.text))).collect();
            let rp: Vec<_> = right.iter().map(|s| lb.pivot_tokens(&tokenize(&s.text))).collect();
            Ok(lp
                .par_iter()
                .map(|a| rp.iter().map(|b| lo_score_tokens(a, b)).collect())
                .collect())
        }
        Strategy::Slas => unreachable!("SLAS does not score a matrix"),
    }
}

/// Aligns the headline, caption and content streams of one article pair.
pub fn align_sentences(
    left: &AlignSide<'_>,
    right: &AlignSide<'_>,
    strategy: Strategy,
    params: &AlignParams,
    ctx: &AlignContext<'_>,
) -> Result<Vec<SentencePair>> {
    match strategy {
        Strategy::Las if ctx.provider.is_none() => {
            return Err(Error::Config("LAS needs an embedding provider".into()))
        }
        Strategy::Lo if ctx.lexicons.is_none() => {
            return Err(Error::Config("LO needs pivot lexicons for both languages".into()))
        }
        _ => {}
    }
    let provenance = Provenance {
        date: left.date,
        page_ids: (left.article.page_id.clone(), right.article.page_id.clone()),
        article_ids: (left.article.article_id.clone(), right.article.article_id.clone()),
        article_len: article_sentences(left.article, left.language).len(),
    };
    let threshold = params.threshold(strategy);
    let mut out = Vec::new();
    for kind in STREAMS {
        let ls = stream_sentences(left.article, left.language, kind);
        let rs = stream_sentences(right.article, right.language, kind);
        if ls.is_empty() || rs.is_empty() {
            continue;
        }
        let pair = |l: Sentence, r: Sentence, score: f64| SentencePair {
            left: l,
            right: r,
            score,
            strategy,
            provenance: provenance.clone(),
        };
        if strategy == Strategy::Slas {
            out.extend(slas_align(&ls, &rs, &params.slas, threshold).into_iter().map(|(l, r, p)| pair(l, r, p)));
            continue;
        }
        let m = score_matrix(&ls, &rs, strategy, ctx, left.language, right.language)?;
        let cands = m
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &s)| (i, j, s)))
            .filter(|c| c.2 >= threshold)
            .collect();
        let mut chosen = greedy_assign(cands);
        chosen.sort_by_key(|c| (c.0, c.1));
        out.extend(chosen.into_iter().map(|(i, j, s)| pair(ls[i].clone(), rs[j].clone(), s)));
    }
    Ok(out)
}
