//! Staged, cached pipeline: ingest, segment, ocr, map, align, corpus.
//!
//! Each stage's output lives in `<cache_dir>/<stage>-<key>/` where the key
//! hashes the previous stage's key, the stage parameters and the bytes of
//! any file the stage reads besides its predecessor's output. A stage is
//! written to a scratch directory and renamed into place only when it
//! completes, so a failed run leaves earlier entries intact.

mod config;
pub mod stages;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::*;
pub use stages::StagedArticle;

use crate::article_mapper::{read_pair_report, write_pair_report, ArticlePair};
use crate::corpus::{build_corpus, read_corpus_jsonl, read_sentence_pairs, write_corpus, write_sentence_pairs, BilingualCorpus};
use crate::error::{Error, Result};
use crate::page_store::{load_store, ManifestEntry, PageSet};
use crate::sentence::SentencePair;

pub const STAGES: [&str; 6] = ["ingest", "segment", "ocr", "map", "align", "corpus"];
const DONE_FILE: &str = "stage.json";
pub const PAIRS_FILE: &str = "article_pairs.jsonl";
pub const SENTENCES_FILE: &str = "sentences.jsonl";
pub const CORPUS_FILE: &str = "corpus.tsv";
pub const REPORT_FILE: &str = "run_report.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub key: String,
    pub cache_hit: bool,
    pub seconds: f64,
    pub counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub ok: bool,
    pub languages: Vec<String>,
    pub stages: Vec<StageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub mapped_articles: usize,
    pub mapped_sentences: usize,
    /// Final artifacts by name.
    pub outputs: BTreeMap<String, PathBuf>,
}

impl RunReport {
    pub fn stage(&self, name: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == name)
    }

    pub fn all_cached(&self) -> bool {
        !self.stages.is_empty() && self.stages.iter().all(|s| s.cache_hit)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Validation(Error),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        source: Error,
        report: Box<RunReport>,
    },
}

impl PipelineError {
    pub fn report(&self) -> Option<&RunReport> {
        match self {
            PipelineError::Stage { report, .. } => Some(report),
            PipelineError::Validation(_) => None,
        }
    }
}

struct KeyBuilder(Sha256);

impl KeyBuilder {
    fn new(stage: &str, prev: &str) -> Self {
        let mut h = Sha256::new();
        h.update(stage.as_bytes());
        h.update([0]);
        h.update(prev.as_bytes());
        KeyBuilder(h)
    }

    fn bytes(mut self, b: &[u8]) -> Self {
        self.0.update((b.len() as u64).to_le_bytes());
        self.0.update(b);
        self
    }

    fn json<T: Serialize>(self, v: &T) -> Result<Self> {
        Ok(self.bytes(&serde_json::to_vec(v)?))
    }

    fn file(self, p: &Path) -> Result<Self> {
        let raw = fs::read(p).map_err(|e| Error::io(p, e))?;
        Ok(self.bytes(&raw))
    }

    fn finish(self) -> String {
        hex::encode(&self.0.finalize()[..12])
    }
}

struct Runner<'a> {
    cfg: &'a PipelineConfig,
    cache: PathBuf,
    report: RunReport,
}

impl Runner<'_> {
    /// Runs `body` into a fresh directory unless `<stage>-<key>` is complete.
    /// `body` returns counts and warnings; `load` reads the stage result back.
    fn stage<T>(
        &mut self,
        name: &str,
        key: String,
        body: impl FnOnce(&Path) -> Result<(T, BTreeMap<String, usize>, Vec<String>)>,
        load: impl FnOnce(&Path) -> Result<T>,
    ) -> Result<(T, PathBuf)> {
        let t0 = Instant::now();
        let dir = self.cache.join(format!("{name}-{key}"));
        let done = dir.join(DONE_FILE);
        if let Ok(raw) = fs::read(&done) {
            if let Ok(mut rep) = serde_json::from_slice::<StageReport>(&raw) {
                let value = load(&dir)?;
                rep.cache_hit = true;
                rep.seconds = t0.elapsed().as_secs_f64();
                log::info!("{name}: cache hit {key}");
                self.report.stages.push(rep);
                return Ok((value, dir));
            }
        }
        log::info!("{name}: running {key}");
        let scratch = self.cache.join(format!(".{name}-{key}.{}", std::process::id()));
        if scratch.exists() {
            fs::remove_dir_all(&scratch).map_err(|e| Error::io(&scratch, e))?;
        }
        fs::create_dir_all(&scratch).map_err(|e| Error::io(&scratch, e))?;
        let outcome = body(&scratch);
        let (value, counts, warnings) = match outcome {
            Ok(v) => v,
            Err(e) => {
                let _ = fs::remove_dir_all(&scratch);
                return Err(e);
            }
        };
        for w in &warnings {
            log::warn!("{name}: {w}");
        }
        let rep = StageReport {
            stage: name.into(),
            key: key.clone(),
            cache_hit: false,
            seconds: t0.elapsed().as_secs_f64(),
            counts,
            warnings,
        };
        let marker = scratch.join(DONE_FILE);
        fs::write(&marker, serde_json::to_vec_pretty(&rep)?).map_err(|e| Error::io(&marker, e))?;
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::rename(&scratch, &dir).map_err(|e| Error::io(&dir, e))?;
        self.report.stages.push(rep);
        Ok((value, dir))
    }
}

fn counts(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn ingest_key(cfg: &PipelineConfig) -> Result<String> {
    let manifest = cfg.manifest();
    let raw = fs::read(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let entries: Vec<ManifestEntry> = serde_json::from_slice(&raw)?;
    let mut k = KeyBuilder::new("ingest", "").bytes(&raw);
    let src = cfg.source_dir();
    for e in &entries {
        let p = src.join(&e.file);
        // missing files are reported by ingest itself
        k = match fs::read(&p) {
            Ok(b) => k.bytes(&b),
            Err(_) => k.bytes(b"<missing>"),
        };
    }
    Ok(k.finish())
}

/// Runs every stage, reusing cached results, and copies the corpus, pair
/// report and run report into `out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> std::result::Result<RunReport, PipelineError> {
    cfg.validate().map_err(PipelineError::Validation)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::Validation(Error::Config(format!("thread pool: {e}"))))?;
    let mut runner = Runner {
        cfg,
        cache: cfg.resolve(&cfg.cache_dir),
        report: RunReport {
            languages: cfg.languages.clone(),
            ..RunReport::default()
        },
    };
    let mut current = "setup";
    let result = pool.install(|| run_stages(&mut runner, &mut current));
    let mut report = runner.report;
    match result {
        Ok(()) => {
            report.ok = true;
            let out = cfg.resolve(&cfg.out_dir);
            let path = out.join(REPORT_FILE);
            report.outputs.insert("run_report".into(), path.clone());
            let written = serde_json::to_vec_pretty(&report)
                .map_err(Error::from)
                .and_then(|body| fs::write(&path, body).map_err(|e| Error::io(&path, e)));
            match written {
                Ok(()) => Ok(report),
                Err(e) => fail(report, "output", e),
            }
        }
        Err(e) => fail(report, current, e),
    }
}

fn fail(mut report: RunReport, stage: &str, e: Error) -> std::result::Result<RunReport, PipelineError> {
    report.ok = false;
    report.failed_stage = Some(stage.into());
    report.error = Some(e.to_string());
    Err(PipelineError::Stage {
        stage: stage.into(),
        source: e,
        report: Box::new(report),
    })
}

fn run_stages(r: &mut Runner<'_>, current: &mut &'static str) -> Result<()> {
    let cfg = r.cfg;
    fs::create_dir_all(&r.cache).map_err(|e| Error::io(&r.cache, e))?;

    *current = "ingest";
    let key = ingest_key(cfg)?;
    let (manifest, source) = (cfg.manifest(), cfg.source_dir());
    let (set, _) = r.stage(
        "ingest",
        key.clone(),
        |dir| {
            let set = stages::ingest(&manifest, &source, dir)?;
            if set.pages.is_empty() {
                return Err(Error::Invalid("no page was ingested".into()));
            }
            let warnings = set.errors.iter().map(|e| format!("{}: {}", e.file, e.message)).collect();
            let c = counts(&[("pages", set.pages.len()), ("errors", set.errors.len())]);
            Ok((set, c, warnings))
        },
        load_store,
    )?;
    let set: PageSet = set;

    *current = "segment";
    let annotations = match cfg.layout.source {
        LayoutSource::Annotations => cfg.layout.annotations.as_ref().map(|a| cfg.resolve(a)),
        LayoutSource::Segment => None,
    };
    let mut k = KeyBuilder::new("segment", &key).json(&cfg.layout)?;
    if let Some(a) = &annotations {
        k = k.file(a)?;
    }
    let key = k.finish();
    let (articles, _) = r.stage(
        "segment",
        key.clone(),
        |dir| {
            let (articles, warnings) = stages::segment(&set, annotations.as_deref(), &cfg.layout.segment, dir)?;
            let c = counts(&[("articles", articles.len())]);
            Ok((articles, c, warnings))
        },
        stages::read_articles,
    )?;

    *current = "ocr";
    let mut k = KeyBuilder::new("ocr", &key).json(&cfg.ocr)?;
    for e in &cfg.ocr.engines {
        if let EngineKind::Mock { truth, .. } = &e.kind {
            k = k.file(&cfg.resolve(truth))?;
        }
    }
    let key = k.finish();
    let (articles, ocr_dir) = r.stage(
        "ocr",
        key.clone(),
        |dir| {
            let ensemble = cfg.ocr.build(&cfg.base_dir)?;
            let (articles, warnings) = stages::ocr(&set, articles, &ensemble, dir)?;
            let texts = articles.iter().map(|a| a.record.texts.len()).sum();
            let c = counts(&[("articles", articles.len()), ("text_regions", texts), ("problems", warnings.len())]);
            Ok((articles, c, warnings))
        },
        stages::read_articles,
    )?;

    let provider = cfg.provider()?;
    let provider_key = (&cfg.align.provider, cfg.align.dim, &cfg.align.embed_lexicons);
    let embed_files = |mut k: KeyBuilder| -> Result<KeyBuilder> {
        if let Some((a, b)) = &cfg.align.embed_lexicons {
            k = k.file(&cfg.resolve(a))?.file(&cfg.resolve(b))?;
        }
        Ok(k)
    };

    *current = "map";
    let key = embed_files(
        KeyBuilder::new("map", &key)
            .json(&cfg.features)?
            .json(&cfg.mapping)?
            .json(&provider_key)?,
    )?
    .finish();
    let (pairs, _) = r.stage(
        "map",
        key.clone(),
        |dir| {
            let images = ocr_dir.join(stages::IMAGES_DIR);
            let left = stages::article_inputs(&articles, cfg.left(), &images)?;
            let right = stages::article_inputs(&articles, cfg.right(), &images)?;
            let embedded = cfg
                .mapping
                .embedded
                .then_some((provider.as_ref(), cfg.mapping.headline_threshold));
            let (pairs, warnings) = stages::map(&left, &right, &cfg.features, embedded)?;
            write_pair_report(&pairs, &dir.join(PAIRS_FILE))?;
            let c = counts(&[("left_articles", left.len()), ("right_articles", right.len()), ("pairs", pairs.len())]);
            Ok((pairs, c, warnings))
        },
        |dir| read_pair_report(&dir.join(PAIRS_FILE)),
    )?;
    let pairs: Vec<ArticlePair> = pairs;
    r.report.mapped_articles = pairs.len();

    *current = "align";
    let mut k = embed_files(KeyBuilder::new("align", &key).json(&cfg.align)?)?;
    if let Some((a, b)) = &cfg.align.lexicons {
        k = k.file(&cfg.resolve(a))?.file(&cfg.resolve(b))?;
    }
    let key = k.finish();
    let lexicons = cfg.lexicons()?;
    let (sentences, _) = r.stage(
        "align",
        key.clone(),
        |dir| {
            let inputs = stages::AlignInputs {
                strategies: &cfg.align.strategies,
                params: &cfg.align.params,
                provider: Some(provider.as_ref()),
                lexicons: lexicons.as_ref().map(|(a, b)| (a, b)),
                estimate_ratio: cfg.align.estimate_ratio,
            };
            let (sentences, ratio) = stages::align(&pairs, &articles, &inputs)?;
            write_sentence_pairs(&sentences, &dir.join(SENTENCES_FILE))?;
            let c = counts(&[("sentence_pairs", sentences.len())]);
            if cfg.align.strategies.contains(&crate::sentence::Strategy::Slas) {
                log::info!("align: slas length ratio {ratio:.4}");
            }
            Ok((sentences, c, Vec::new()))
        },
        |dir| read_sentence_pairs(&dir.join(SENTENCES_FILE)),
    )?;
    let sentences: Vec<SentencePair> = sentences;

    *current = "corpus";
    let key = KeyBuilder::new("corpus", &key).finish();
    let (corpus, corpus_dir) = r.stage(
        "corpus",
        key,
        |dir| {
            let corpus = build_corpus(sentences);
            write_corpus(&corpus, &dir.join(CORPUS_FILE))?;
            let c = counts(&[
                ("entries", corpus.entries.len()),
                ("duplicates_dropped", corpus.stats.duplicates_dropped),
            ]);
            Ok((corpus, c, Vec::new()))
        },
        |dir| read_corpus_jsonl(&dir.join(CORPUS_FILE).with_extension("jsonl")),
    )?;
    let corpus: BilingualCorpus = corpus;
    r.report.mapped_sentences = corpus.entries.len();

    *current = "output";
    let out = cfg.resolve(&cfg.out_dir);
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let map_dir = r.cache.join(format!("map-{}", r.report.stage("map").map(|s| s.key.as_str()).unwrap_or("")));
    let copies = [
        ("corpus", corpus_dir.join(CORPUS_FILE), out.join(CORPUS_FILE)),
        ("captions", corpus_dir.join("corpus.captions.tsv"), out.join("corpus.captions.tsv")),
        ("corpus_jsonl", corpus_dir.join("corpus.jsonl"), out.join("corpus.jsonl")),
        ("article_pairs", map_dir.join(PAIRS_FILE), out.join(PAIRS_FILE)),
    ];
    for (name, from, to) in copies {
        fs::copy(&from, &to).map_err(|e| Error::io(&from, e))?;
        r.report.outputs.insert(name.into(), to);
    }
    Ok(())
}
