//! Engine adapters: external commands, a fixture-backed mock and a fixed-text stub.

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{OcrEngine, OcrRegion};
use crate::error::{Error, Result};
use crate::raster::Rect;

/// Runs an external program; `{image}` in the template becomes the path of a
/// temporary PNG of the region. The program's UTF-8 stdout is the text.
#[derive(Debug, Clone)]
pub struct CommandEngine {
    pub template: String,
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl OcrEngine for CommandEngine {
    fn recognize(&self, region: &OcrRegion<'_>) -> Result<String> {
        let n = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = std::env::temp_dir().join(format!("corpus-forge-ocr-{}-{n}.png", std::process::id()));
        region.image.save(&path)?;
        let path_str = path.to_string_lossy().into_owned();
        let mut words = self.template.split_whitespace().map(|w| w.replace("{image}", &path_str));
        let program = words
            .next()
            .ok_or_else(|| Error::Config("empty OCR command template".into()))?;
        let output = Command::new(&program).args(words).output();
        let _ = std::fs::remove_file(&path);
        let output = output.map_err(|e| Error::io(&program, e))?;
        if !output.status.success() {
            return Err(Error::Invalid(format!(
                "{program} exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let text = String::from_utf8(output.stdout)
            .map_err(|_| Error::Invalid(format!("{program} wrote non-UTF-8 output")))?;
        Ok(text.trim_end_matches(['\n', '\r']).to_string())
    }
}

#[derive(Debug, Clone)]
pub struct FixedEngine {
    text: Option<String>,
}

impl FixedEngine {
    pub fn ok(text: &str) -> Self {
        FixedEngine {
            text: Some(text.to_string()),
        }
    }

    pub fn failing() -> Self {
        FixedEngine { text: None }
    }
}

impl OcrEngine for FixedEngine {
    fn recognize(&self, _region: &OcrRegion<'_>) -> Result<String> {
        self.text
            .clone()
            .ok_or_else(|| Error::Invalid("engine configured to fail".into()))
    }
}

/// One ground-truth text region of a fixture page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub page_id: String,
    #[serde(rename = "box")]
    pub bbox: Rect,
    pub text: String,
}

/// Reads fixture ground truth instead of pixels, optionally corrupting characters.
#[derive(Debug, Clone)]
pub struct MockEngine {
    truth: BTreeMap<String, Vec<(Rect, String)>>,
    corruption: f64,
    seed: u64,
}

const NOISE: &[char] = &['@', '#', '~', '%', 'x', 'q', '0', '7'];

impl MockEngine {
    pub fn new(entries: Vec<TruthEntry>, corruption: f64, seed: u64) -> Self {
        let mut truth: BTreeMap<String, Vec<(Rect, String)>> = BTreeMap::new();
        for e in entries {
            truth.entry(e.page_id).or_default().push((e.bbox, e.text));
        }
        MockEngine {
            truth,
            corruption,
            seed,
        }
    }

    pub fn load(path: &std::path::Path, corruption: f64, seed: u64) -> Result<Self> {
        let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(serde_json::from_slice(&raw)?, corruption, seed))
    }

    /// Ground-truth text of the best-overlapping region (IoU at least 0.5).
    pub fn lookup(&self, page_id: &str, rect: Rect) -> Option<&str> {
        self.truth
            .get(page_id)?
            .iter()
            .map(|(r, t)| (r.iou(&rect), t))
            .filter(|(iou, _)| *iou >= 0.5)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, t)| t.as_str())
    }
}

pub(crate) fn corrupt(text: &str, rate: f64, rng: &mut impl Rng) -> String {
    text.chars()
        .map(|c| {
            if rng.gen_bool(rate) {
                let alternatives: Vec<char> = NOISE.iter().copied().filter(|&n| n != c).collect();
                alternatives[rng.gen_range(0..alternatives.len())]
            } else {
                c
            }
        })
        .collect()
}

impl OcrEngine for MockEngine {
    fn recognize(&self, region: &OcrRegion<'_>) -> Result<String> {
        let text = self.lookup(region.page_id, region.rect).unwrap_or("");
        if self.corruption <= 0.0 {
            return Ok(text.to_string());
        }
        let mut h = std::collections::hash_map::DefaultHasher::new();
        (self.seed, region.page_id, region.rect).hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        Ok(corrupt(text, self.corruption.min(1.0), &mut rng))
    }
}
