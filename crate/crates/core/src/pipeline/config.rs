use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureParams;
use crate::fixture::BundlePaths;
use crate::layout::SegmentParams;
use crate::ocr::{validate_ensemble, CommandEngine, FixedEngine, MockEngine, OcrEngineAdapter};
use crate::sentence::{AlignParams, EmbeddingProvider, HashProvider, HttpProvider, PivotLexicon, Strategy, DEFAULT_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputConfig {
    pub manifest: PathBuf,
    /// Directory the manifest's file names are relative to; defaults to the manifest's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutSource {
    Annotations,
    #[default]
    Segment,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub source: LayoutSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    pub segment: SegmentParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EngineKind {
    /// Ground-truth sidecar reader with optional seeded corruption.
    Mock {
        truth: PathBuf,
        #[serde(default)]
        corruption: f64,
        #[serde(default)]
        seed: u64,
    },
    /// External program; `{image}` is replaced by a PNG path.
    Command { template: String },
    Fixed { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub id: String,
    pub priority: u32,
    #[serde(flatten)]
    pub kind: EngineKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OcrConfig {
    pub engines: Vec<EngineConfig>,
}

impl OcrConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Adapters with file paths resolved against `base`.
    pub fn build(&self, base: &Path) -> Result<Vec<OcrEngineAdapter>> {
        let ensemble = self
            .engines
            .iter()
            .map(|e| {
                let engine: Arc<dyn crate::ocr::OcrEngine> = match &e.kind {
                    EngineKind::Mock { truth, corruption, seed } => {
                        Arc::new(MockEngine::load(&base.join(truth), *corruption, *seed)?)
                    }
                    EngineKind::Command { template } => Arc::new(CommandEngine {
                        template: template.clone(),
                    }),
                    EngineKind::Fixed { text } => Arc::new(FixedEngine::ok(text)),
                };
                Ok(OcrEngineAdapter::new(e.id.clone(), e.priority, engine))
            })
            .collect::<Result<Vec<_>>>()?;
        validate_ensemble(&ensemble)?;
        Ok(ensemble)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MappingConfig {
    /// Pair embedded articles of mapped parents by headline similarity.
    pub embedded: bool,
    /// LAS cosine a headline pair needs.
    pub headline_threshold: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            embedded: true,
            headline_threshold: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    pub strategies: Vec<Strategy>,
    /// `builtin` or the base URL of an embedding service.
    pub provider: String,
    pub dim: usize,
    /// Replace `slas.ratio` with the right/left word ratio of the run.
    pub estimate_ratio: bool,
    /// `(left, right)` lexicons for LO.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicons: Option<(PathBuf, PathBuf)>,
    /// `(left, right)` lexicons the builtin embedder maps tokens through.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embed_lexicons: Option<(PathBuf, PathBuf)>,
    #[serde(flatten)]
    pub params: AlignParams,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            strategies: vec![Strategy::Las],
            provider: "builtin".into(),
            dim: DEFAULT_DIM,
            estimate_ratio: true,
            lexicons: None,
            embed_lexicons: None,
            params: AlignParams::default(),
        }
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get())
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from("cache")
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// `[left, right]` language codes.
    pub languages: Vec<String>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub input: InputConfig,
    #[serde(default)]
    pub layout: LayoutConfig,
    pub ocr: OcrConfig,
    #[serde(default)]
    pub features: FeatureParams,
    #[serde(default)]
    pub mapping: MappingConfig,
    #[serde(default)]
    pub align: AlignConfig,
    /// Relative paths resolve against this; the config file's directory when loaded.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn left(&self) -> &str {
        &self.languages[0]
    }

    pub fn right(&self) -> &str {
        &self.languages[1]
    }

    pub fn manifest(&self) -> PathBuf {
        self.resolve(&self.input.manifest)
    }

    pub fn source_dir(&self) -> PathBuf {
        match &self.input.source_dir {
            Some(d) => self.resolve(d),
            None => self.manifest().parent().map(Path::to_path_buf).unwrap_or_default(),
        }
    }

    /// Config for a generated bundle: page segmentation (the ground-truth
    /// layout is filled in for `source = "annotations"`), two faithful mock
    /// engines plus one that corrupts 10% of characters, LAS through the full
    /// lexicons, LO through the partial ones.
    pub fn for_bundle(paths: &BundlePaths, languages: &(String, String)) -> Self {
        let rel = |p: &Path| p.strip_prefix(&paths.dir).unwrap_or(p).to_path_buf();
        let mock = |id: &str, priority: u32, corruption: f64, seed: u64| EngineConfig {
            id: id.into(),
            priority,
            kind: EngineKind::Mock {
                truth: rel(&paths.ocr_truth),
                corruption,
                seed,
            },
        };
        PipelineConfig {
            languages: vec![languages.0.clone(), languages.1.clone()],
            workers: default_workers(),
            cache_dir: default_cache_dir(),
            out_dir: default_out_dir(),
            input: InputConfig {
                manifest: rel(&paths.manifest),
                source_dir: None,
            },
            layout: LayoutConfig {
                source: LayoutSource::Segment,
                annotations: Some(rel(&paths.layout)),
                segment: SegmentParams::default(),
            },
            ocr: OcrConfig {
                engines: vec![mock("mock-a", 1, 0.0, 1), mock("mock-b", 2, 0.1, 2), mock("mock-c", 3, 0.0, 3)],
            },
            features: FeatureParams::default(),
            mapping: MappingConfig::default(),
            align: AlignConfig {
                lexicons: Some((rel(&paths.partial_lexicons.0), rel(&paths.partial_lexicons.1))),
                embed_lexicons: Some((rel(&paths.lexicons.0), rel(&paths.lexicons.1))),
                ..AlignConfig::default()
            },
            base_dir: paths.dir.clone(),
        }
    }

    /// Checks everything that can be checked before a stage runs.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.languages.len() != 2 || self.languages[0] == self.languages[1] {
            return bad(format!("languages must be two distinct codes, got {:?}", self.languages));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        let must_exist = |what: &str, p: PathBuf| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} {} does not exist", p.display())))
            }
        };
        must_exist("manifest", self.manifest())?;
        must_exist("source_dir", self.source_dir())?;
        if self.layout.source == LayoutSource::Annotations {
            match &self.layout.annotations {
                Some(a) => must_exist("annotation file", self.resolve(a))?,
                None => return bad("layout.source = \"annotations\" needs layout.annotations".into()),
            }
        }
        if self.ocr.engines.is_empty() {
            return bad("ocr.engines is empty".into());
        }
        for e in &self.ocr.engines {
            if let EngineKind::Mock { truth, corruption, .. } = &e.kind {
                must_exist("mock OCR truth", self.resolve(truth))?;
                if !(0.0..=1.0).contains(corruption) {
                    return bad(format!("engine {}: corruption {corruption} outside [0, 1]", e.id));
                }
            }
        }
        self.ocr.build(&self.base_dir)?;
        self.features.validate()?;
        if !(-1.0..=1.0).contains(&self.mapping.headline_threshold) {
            return bad(format!(
                "mapping.headline_threshold = {} outside [-1, 1]",
                self.mapping.headline_threshold
            ));
        }
        if self.align.strategies.is_empty() {
            return bad("align.strategies is empty".into());
        }
        self.align.params.validate()?;
        if self.align.provider != "builtin"
            && !(self.align.provider.starts_with("http://") || self.align.provider.starts_with("https://"))
        {
            return bad(format!("align.provider {:?} is neither builtin nor an http URL", self.align.provider));
        }
        if self.align.dim < 16 {
            return bad("align.dim must be at least 16".into());
        }
        if self.align.strategies.contains(&Strategy::Lo) && self.align.lexicons.is_none() {
            return bad("LO needs align.lexicons".into());
        }
        for (a, b) in [&self.align.lexicons, &self.align.embed_lexicons].into_iter().flatten() {
            must_exist("lexicon", self.resolve(a))?;
            must_exist("lexicon", self.resolve(b))?;
        }
        Ok(())
    }

    pub fn lexicons(&self) -> Result<Option<(PivotLexicon, PivotLexicon)>> {
        self.load_pair(&self.align.lexicons)
    }

    fn load_pair(&self, pair: &Option<(PathBuf, PathBuf)>) -> Result<Option<(PivotLexicon, PivotLexicon)>> {
        pair.as_ref()
            .map(|(a, b)| {
                Ok((
                    PivotLexicon::load(self.left(), &self.resolve(a))?,
                    PivotLexicon::load(self.right(), &self.resolve(b))?,
                ))
            })
            .transpose()
    }

    pub fn provider(&self) -> Result<Box<dyn EmbeddingProvider>> {
        if self.align.provider == "builtin" {
            let mut p = HashProvider::new(self.align.dim);
            if let Some((a, b)) = self.load_pair(&self.align.embed_lexicons)? {
                p = p.with_lexicon(a).with_lexicon(b);
            }
            Ok(Box::new(p))
        } else {
            Ok(Box::new(HttpProvider::new(&self.align.provider)))
        }
    }
}
