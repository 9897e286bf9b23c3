//! STS annotation sheets: stratified sampling and aggregation.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BilingualCorpus;
use crate::error::{Error, Result};
use crate::sentence::Strategy;

/// Sentence-length bins in words: 1-10, 11-19, 20+.
pub const SENTENCE_BINS: [&str; 3] = ["1-10", "11-19", "20+"];
/// Article-length bins in sentences: 1-5, 6-15, 16+.
pub const ARTICLE_BINS: [&str; 3] = ["1-5", "6-15", "16+"];

pub fn sentence_bin(words: usize) -> usize {
    match words {
        0..=10 => 0,
        11..=19 => 1,
        _ => 2,
    }
}

pub fn article_bin(sentences: usize) -> usize {
    match sentences {
        0..=5 => 0,
        6..=15 => 1,
        _ => 2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetRow {
    pub pair_id: String,
    pub left_text: String,
    pub right_text: String,
    pub score: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumReport {
    pub bin: String,
    pub available: usize,
    pub requested: usize,
    pub taken: usize,
    pub shortfall: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsSheet {
    pub rows: Vec<SheetRow>,
    pub strata: Vec<StratumReport>,
}

/// Up to `n_per_stratum` pairs from each sentence-length bin (left side),
/// chosen and then shuffled with a seeded generator.
pub fn sample_sts(corpus: &BilingualCorpus, n_per_stratum: usize, seed: u64) -> StsSheet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_bin: Vec<Vec<usize>> = vec![Vec::new(); SENTENCE_BINS.len()];
    for (i, e) in corpus.entries.iter().enumerate() {
        by_bin[sentence_bin(e.pair.left.word_count)].push(i);
    }
    let mut picked = Vec::new();
    let mut strata = Vec::new();
    for (b, mut members) in by_bin.into_iter().enumerate() {
        let available = members.len();
        members.shuffle(&mut rng);
        members.truncate(n_per_stratum);
        strata.push(StratumReport {
            bin: SENTENCE_BINS[b].into(),
            available,
            requested: n_per_stratum,
            taken: members.len(),
            shortfall: n_per_stratum.saturating_sub(available),
        });
        picked.extend(members);
    }
    picked.shuffle(&mut rng);
    let rows = picked
        .into_iter()
        .map(|i| {
            let e = &corpus.entries[i];
            SheetRow {
                pair_id: e.pair_id.clone(),
                left_text: e.pair.left.text.clone(),
                right_text: e.pair.right.text.clone(),
                score: None,
                annotator_id: None,
            }
        })
        .collect();
    StsSheet { rows, strata }
}

pub fn write_sheet(sheet: &StsSheet, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| Error::Invalid(format!("{}: {e}", path.display()));
    w.write_record(["pair_id", "left_text", "right_text", "score"]).map_err(csv_err)?;
    for r in &sheet.rows {
        w.write_record([&r.pair_id, &r.left_text, &r.right_text, r.score.as_deref().unwrap_or("")])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a sheet; an optional `annotator_id` column is honoured, otherwise
/// `default_annotator` is used.
pub fn read_sheet(path: &Path, default_annotator: &str) -> Result<Vec<SheetRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in r.deserialize::<SheetRow>() {
        let mut row = rec.map_err(|e| Error::Annotation(format!("{}: {e}", path.display())))?;
        if row.annotator_id.as_deref().map_or(true, str::is_empty) {
            row.annotator_id = Some(default_annotator.to_string());
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub n: usize,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub n: usize,
    pub mean: Option<f64>,
    pub sentence: [Bucket; 3],
    pub article: [Bucket; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StsReport {
    pub n_pairs: usize,
    pub n_annotations: usize,
    pub mean_sts: f64,
    pub frac_above_3: f64,
    pub rows: BTreeMap<Strategy, StrategyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StsRowError {
    pub row: usize,
    pub pair_id: String,
    pub message: String,
}

fn buckets(values: &[(usize, f64)]) -> [Bucket; 3] {
    let mut out = [Bucket::default(); 3];
    let mut sums = [0.0; 3];
    for &(b, v) in values {
        out[b].n += 1;
        sums[b] += v;
    }
    for (b, s) in out.iter_mut().zip(sums) {
        b.mean = (b.n > 0).then(|| s / b.n as f64);
    }
    out
}

/// Aggregates annotations against the corpus they were sampled from. Each
/// pair's scores are averaged over annotators before anything else.
pub fn aggregate_sts(rows: &[SheetRow], corpus: &BilingualCorpus) -> (StsReport, Vec<StsRowError>) {
    let index: BTreeMap<&str, usize> = corpus
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.pair_id.as_str(), i))
        .collect();
    let mut errors = Vec::new();
    let mut per_pair: BTreeMap<usize, Vec<u8>> = BTreeMap::new();
    for (n, row) in rows.iter().enumerate() {
        let err = |m: &str| StsRowError {
            row: n + 1,
            pair_id: row.pair_id.clone(),
            message: m.to_string(),
        };
        let Some(&i) = index.get(row.pair_id.as_str()) else {
            errors.push(err("unknown pair_id"));
            continue;
        };
        let score = match row.score.as_deref().map(str::trim) {
            None | Some("") => {
                errors.push(err("missing score"));
                continue;
            }
            Some(s) => s.parse::<u8>().ok().filter(|v| *v <= 5),
        };
        match score {
            Some(v) => per_pair.entry(i).or_default().push(v),
            None => errors.push(err("score must be an integer 0..5")),
        }
    }
    let mut report = StsReport {
        n_annotations: per_pair.values().map(Vec::len).sum(),
        n_pairs: per_pair.len(),
        ..StsReport::default()
    };
    let mut by_strategy: BTreeMap<Strategy, Vec<(usize, usize, f64)>> = BTreeMap::new();
    let mut total = 0.0;
    let mut above = 0usize;
    for (&i, scores) in &per_pair {
        let mean = scores.iter().map(|&s| s as f64).sum::<f64>() / scores.len() as f64;
        total += mean;
        above += usize::from(mean > 3.0);
        let pair = &corpus.entries[i].pair;
        by_strategy.entry(pair.strategy).or_default().push((
            sentence_bin(pair.left.word_count),
            article_bin(pair.provenance.article_len),
            mean,
        ));
    }
    if report.n_pairs > 0 {
        report.mean_sts = total / report.n_pairs as f64;
        report.frac_above_3 = above as f64 / report.n_pairs as f64;
    }
    for (strategy, vals) in by_strategy {
        let sum: f64 = vals.iter().map(|v| v.2).sum();
        report.rows.insert(
            strategy,
            StrategyRow {
                n: vals.len(),
                mean: Some(sum / vals.len() as f64),
                sentence: buckets(&vals.iter().map(|v| (v.0, v.2)).collect::<Vec<_>>()),
                article: buckets(&vals.iter().map(|v| (v.1, v.2)).collect::<Vec<_>>()),
            },
        );
    }
    (report, errors)
}

impl StsReport {
    /// Plain-text table: one row per strategy, sentence then article bins.
    pub fn render_table(&self) -> String {
        let cell = |b: &Bucket| b.mean.map_or("-".to_string(), |m| format!("{m:.1}"));
        let mut out = format!(
            "{:<8}{}{}\n",
            "strategy",
            SENTENCE_BINS.iter().map(|b| format!("{:>8}", format!("{b}w"))).collect::<String>(),
            ARTICLE_BINS.iter().map(|b| format!("{:>8}", format!("{b}s"))).collect::<String>()
        );
        for (s, row) in &self.rows {
            out.push_str(&format!("{:<8}", s.to_string()));
            for b in row.sentence.iter().chain(row.article.iter()) {
                out.push_str(&format!("{:>8}", cell(b)));
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "mean {:.2} over {} pairs, {:.1}% above 3\n",
            self.mean_sts,
            self.n_pairs,
            100.0 * self.frac_above_3
        ));
        out
    }
}
