//! Corpus assembly and export, STS sampling and aggregation, BLEU.

mod bleu;
mod sts;

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

pub use bleu::bleu;
pub use sts::{
    aggregate_sts, article_bin, read_sheet, sample_sts, sentence_bin, write_sheet, Bucket, SheetRow, StratumReport,
    StrategyRow, StsReport, StsRowError, StsSheet, ARTICLE_BINS, SENTENCE_BINS,
};

use crate::error::{Error, Result};
use crate::layout::RoiKind;
use crate::sentence::{tokenize, SentencePair};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub by_strategy: BTreeMap<String, usize>,
    pub by_roi_kind: BTreeMap<String, usize>,
    pub duplicates_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub pair_id: String,
    #[serde(flatten)]
    pub pair: SentencePair,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BilingualCorpus {
    pub languages: (String, String),
    pub entries: Vec<CorpusEntry>,
    pub stats: CorpusStats,
}

impl BilingualCorpus {
    pub fn pairs(&self) -> impl Iterator<Item = &SentencePair> {
        self.entries.iter().map(|e| &e.pair)
    }

    pub fn entry(&self, pair_id: &str) -> Option<&CorpusEntry> {
        self.entries.iter().find(|e| e.pair_id == pair_id)
    }
}

/// NFC, trimmed, internal whitespace runs collapsed to one space.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn pair_id(pair: &SentencePair) -> String {
    let mut h = Sha256::new();
    for part in [pair.strategy.to_string().as_str(), &pair.left.text, &pair.right.text] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex::encode(&h.finalize()[..8])
}

fn stream_rank(kind: RoiKind) -> u8 {
    match kind {
        RoiKind::Headline => 0,
        RoiKind::Caption => 1,
        RoiKind::Content => 2,
        RoiKind::Image => 3,
        RoiKind::Unclassified => 4,
    }
}

/// Normalizes, orders by provenance then stream position, and drops repeated
/// (left, right) texts keeping the first.
pub fn build_corpus(pairs: impl IntoIterator<Item = SentencePair>) -> BilingualCorpus {
    let mut pairs: Vec<SentencePair> = pairs
        .into_iter()
        .map(|mut p| {
            p.left.text = normalize_text(&p.left.text);
            p.right.text = normalize_text(&p.right.text);
            p.left.word_count = tokenize(&p.left.text).len();
            p.right.word_count = tokenize(&p.right.text).len();
            p
        })
        .filter(|p| !p.left.text.is_empty() && !p.right.text.is_empty())
        .collect();
    pairs.sort_by(|a, b| {
        a.provenance
            .cmp(&b.provenance)
            .then(stream_rank(a.left.roi_kind).cmp(&stream_rank(b.left.roi_kind)))
            .then(a.left.index.cmp(&b.left.index))
            .then(a.right.index.cmp(&b.right.index))
            .then(a.strategy.cmp(&b.strategy))
            .then(a.left.text.cmp(&b.left.text))
            .then(a.right.text.cmp(&b.right.text))
            .then(a.score.total_cmp(&b.score))
    });
    let mut seen = HashSet::new();
    let mut stats = CorpusStats::default();
    let mut entries = Vec::new();
    for p in pairs {
        if !seen.insert((p.left.text.clone(), p.right.text.clone())) {
            stats.duplicates_dropped += 1;
            continue;
        }
        *stats.by_strategy.entry(p.strategy.to_string()).or_insert(0) += 1;
        *stats.by_roi_kind.entry(p.left.roi_kind.to_string()).or_insert(0) += 1;
        entries.push(CorpusEntry {
            pair_id: pair_id(&p),
            pair: p,
        });
    }
    stats.total = entries.len();
    let languages = entries
        .first()
        .map(|e| (e.pair.left.language.clone(), e.pair.right.language.clone()))
        .unwrap_or_default();
    BilingualCorpus {
        languages,
        entries,
        stats,
    }
}

fn tsv_line(e: &CorpusEntry) -> Result<String> {
    Ok(format!(
        "{}\t{}\t{:.6}\t{}\t{}\n",
        e.pair.left.text,
        e.pair.right.text,
        e.pair.score,
        e.pair.strategy,
        serde_json::to_string(&e.pair.provenance)?
    ))
}

/// Corpus TSV body, captions excluded.
pub fn corpus_tsv(corpus: &BilingualCorpus) -> Result<String> {
    corpus
        .entries
        .iter()
        .filter(|e| e.pair.left.roi_kind != RoiKind::Caption)
        .map(tsv_line)
        .collect()
}

/// Caption pairs, held out as MT reference data.
pub fn caption_tsv(corpus: &BilingualCorpus) -> Result<String> {
    corpus
        .entries
        .iter()
        .filter(|e| e.pair.left.roi_kind == RoiKind::Caption)
        .map(tsv_line)
        .collect()
}

#[derive(Serialize, Deserialize)]
struct JsonlRecord {
    split: String,
    #[serde(flatten)]
    entry: CorpusEntry,
}

fn write_file(path: &Path, body: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body).map_err(|e| Error::io(path, e))
}

/// Writes `<stem>.tsv`, `<stem>.captions.tsv` and `<stem>.jsonl` next to `tsv_path`.
pub fn write_corpus(corpus: &BilingualCorpus, tsv_path: &Path) -> Result<()> {
    write_file(tsv_path, corpus_tsv(corpus)?.as_bytes())?;
    write_file(&tsv_path.with_extension("captions.tsv"), caption_tsv(corpus)?.as_bytes())?;
    let mut jsonl = String::new();
    for e in &corpus.entries {
        let split = if e.pair.left.roi_kind == RoiKind::Caption { "caption" } else { "train" };
        jsonl.push_str(&serde_json::to_string(&JsonlRecord {
            split: split.into(),
            entry: e.clone(),
        })?);
        jsonl.push('\n');
    }
    write_file(&tsv_path.with_extension("jsonl"), jsonl.as_bytes())
}

/// Reads a corpus JSONL mirror back; pair ids are taken as written.
pub fn read_corpus_jsonl(path: &Path) -> Result<BilingualCorpus> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut corpus = BilingualCorpus::default();
    for line in raw.lines().filter(|l| !l.trim().is_empty()) {
        let rec: JsonlRecord = serde_json::from_str(line)?;
        *corpus.stats.by_strategy.entry(rec.entry.pair.strategy.to_string()).or_insert(0) += 1;
        *corpus.stats.by_roi_kind.entry(rec.entry.pair.left.roi_kind.to_string()).or_insert(0) += 1;
        corpus.entries.push(rec.entry);
    }
    corpus.stats.total = corpus.entries.len();
    if let Some(e) = corpus.entries.first() {
        corpus.languages = (e.pair.left.language.clone(), e.pair.right.language.clone());
    }
    Ok(corpus)
}

/// Aligned sentence pairs as written by the align stage (one JSON per line).
pub fn read_sentence_pairs(path: &Path) -> Result<Vec<SentencePair>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

pub fn write_sentence_pairs(pairs: &[SentencePair], path: &Path) -> Result<()> {
    let mut body = String::new();
    for p in pairs {
        body.push_str(&serde_json::to_string(p)?);
        body.push('\n');
    }
    write_file(path, body.as_bytes())
}
