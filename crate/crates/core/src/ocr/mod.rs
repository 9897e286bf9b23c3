//! OCR ensemble: pluggable engines per region, combined by majority vote.

mod engine;
mod vote;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use engine::{CommandEngine, FixedEngine, MockEngine, TruthEntry};
pub use vote::vote;

use crate::error::{Error, Result};
use crate::layout::{image_file_name, ArticleRecord, RoiKind};
use crate::page_store::PageImage;
use crate::raster::{crop, Rect};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrCandidate {
    pub engine_id: String,
    pub text: String,
    pub confidence: Option<f64>,
}

/// A region handed to an engine: the crop plus where it came from.
pub struct OcrRegion<'a> {
    pub page_id: &'a str,
    pub rect: Rect,
    pub image: &'a GrayImage,
}

pub trait OcrEngine: Send + Sync {
    fn recognize(&self, region: &OcrRegion<'_>) -> Result<String>;
}

#[derive(Clone)]
pub struct OcrEngineAdapter {
    pub engine_id: String,
    /// Tie-break rank; 1 is the most trusted engine.
    pub priority: u32,
    pub engine: Arc<dyn OcrEngine>,
}

impl std::fmt::Debug for OcrEngineAdapter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OcrEngineAdapter")
            .field("engine_id", &self.engine_id)
            .field("priority", &self.priority)
            .finish_non_exhaustive()
    }
}

impl OcrEngineAdapter {
    pub fn new(engine_id: impl Into<String>, priority: u32, engine: Arc<dyn OcrEngine>) -> Self {
        OcrEngineAdapter {
            engine_id: engine_id.into(),
            priority,
            engine,
        }
    }

    /// Engine that answers every region with the same text.
    pub fn fixed(engine_id: impl Into<String>, priority: u32, text: &str) -> Self {
        Self::new(engine_id, priority, Arc::new(FixedEngine::ok(text)))
    }
}

pub fn validate_ensemble(ensemble: &[OcrEngineAdapter]) -> Result<()> {
    if ensemble.is_empty() {
        return Err(Error::Config("OCR ensemble is empty".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for e in ensemble {
        if e.engine_id.is_empty() {
            return Err(Error::Config("OCR engine with empty id".into()));
        }
        if e.priority == 0 || !seen.insert(e.priority) {
            return Err(Error::Config(format!(
                "engine {}: priorities must be positive and unique",
                e.engine_id
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineRun {
    pub candidates: Vec<OcrCandidate>,
    /// `(engine_id, diagnostic)` for every engine that failed.
    pub failures: Vec<(String, String)>,
}

/// Runs every engine on the region concurrently.
pub fn run_engines(region: &OcrRegion<'_>, ensemble: &[OcrEngineAdapter]) -> Result<EngineRun> {
    validate_ensemble(ensemble)?;
    let results: Vec<(String, Result<String>)> = ensemble
        .par_iter()
        .map(|e| (e.engine_id.clone(), e.engine.recognize(region)))
        .collect();
    let mut run = EngineRun {
        candidates: Vec::new(),
        failures: Vec::new(),
    };
    for (engine_id, r) in results {
        match r {
            Ok(text) => run.candidates.push(OcrCandidate {
                engine_id,
                text,
                confidence: None,
            }),
            Err(e) => {
                log::warn!("OCR engine {engine_id} failed on {}: {e}", region.page_id);
                run.failures.push((engine_id, e.to_string()));
            }
        }
    }
    if run.candidates.is_empty() {
        return Err(Error::AllEnginesFailed {
            diagnostics: run.failures.iter().map(|(id, m)| format!("{id}: {m}")).collect(),
        });
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiError {
    pub article_id: String,
    pub roi_index: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub article: ArticleRecord,
    pub errors: Vec<RoiError>,
    pub engine_failures: Vec<(String, String)>,
}

/// Fills the text of every headline, caption and content region.
///
/// Image regions are written as `<article_id>_I<seq>.png` under `image_dir`
/// when one is given. A region whose engines all fail is left without text and
/// reported; the other regions still get extracted.
pub fn extract_text(
    mut article: ArticleRecord,
    page: &PageImage,
    ensemble: &[OcrEngineAdapter],
    image_dir: Option<&Path>,
) -> Result<Extraction> {
    validate_ensemble(ensemble)?;
    let mut errors = Vec::new();
    let mut engine_failures = Vec::new();
    let mut texts = BTreeMap::new();
    for (i, roi) in article.rois.iter().enumerate() {
        let img = crop(&page.gray, roi.bbox);
        match roi.kind {
            RoiKind::Image => {
                if let Some(dir) = image_dir {
                    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    let color = page.color.as_ref().map(|c| {
                        image::imageops::crop_imm(c, roi.bbox.x, roi.bbox.y, roi.bbox.w, roi.bbox.h).to_image()
                    });
                    let path = dir.join(image_file_name(&article.article_id, roi.seq_index));
                    match color {
                        Some(c) => c.save(&path)?,
                        None => img.save(&path)?,
                    }
                }
            }
            kind if kind.is_text() => {
                let region = OcrRegion {
                    page_id: &page.page_id,
                    rect: roi.bbox,
                    image: &img,
                };
                match run_engines(&region, ensemble) {
                    Ok(run) => {
                        engine_failures.extend(run.failures);
                        texts.insert(i, vote(&run.candidates, ensemble));
                    }
                    Err(e) => errors.push(RoiError {
                        article_id: article.article_id.clone(),
                        roi_index: i,
                        message: e.to_string(),
                    }),
                }
            }
            _ => errors.push(RoiError {
                article_id: article.article_id.clone(),
                roi_index: i,
                message: "region is unclassified".into(),
            }),
        }
    }
    article.texts = texts;
    Ok(Extraction {
        article,
        errors,
        engine_failures,
    })
}
