//! Embedding providers: deterministic n-gram hashing, HTTP sidecar, fixed stub.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{tokenize, PivotLexicon, Sentence};
use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub components: Vec<f64>,
    pub dim: usize,
    pub provider_id: String,
}

pub trait EmbeddingProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    /// One unit vector per text, in order.
    fn embed(&self, texts: &[String], language: &str) -> Result<Vec<EmbeddingVector>>;
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

const PAD: char = '\u{2}';

fn normalize(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        return false;
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    true
}

/// Signed feature hashing of padded character trigrams of each token.
pub fn hash_embed(text: &str, dim: usize) -> Result<EmbeddingVector> {
    if dim < 16 {
        return Err(Error::Invalid(format!("hash_embed dim {dim} is below 16")));
    }
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::Invalid("hash_embed of empty text".into()));
    }
    let mut grams = Vec::new();
    let mut buf = [0u8; 4];
    for t in &tokens {
        let chars: Vec<char> = std::iter::once(PAD).chain(t.chars()).chain(std::iter::once(PAD)).collect();
        for w in chars.windows(3.min(chars.len())) {
            let mut bytes = Vec::with_capacity(12);
            for c in w {
                bytes.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            }
            grams.push(fnv1a(&bytes));
        }
    }
    let mut v = vec![0f64; dim];
    for h in &grams {
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[(h % dim as u64) as usize] += sign;
    }
    if !normalize(&mut v) {
        // every signed count cancelled; fall back to unsigned counts
        for h in &grams {
            v[(h % dim as u64) as usize] += 1.0;
        }
        normalize(&mut v);
    }
    Ok(EmbeddingVector {
        components: v,
        dim,
        provider_id: "hash-embed".into(),
    })
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim != b.dim || a.components.len() != b.components.len() {
        return Err(Error::Provider {
            provider: a.provider_id.clone(),
            message: format!("dimension mismatch {} vs {}", a.dim, b.dim),
        });
    }
    let dot: f64 = a.components.iter().zip(&b.components).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

pub fn las_score(a: &Sentence, b: &Sentence, provider: &dyn EmbeddingProvider) -> Result<f64> {
    let va = provider.embed(&[a.text.clone()], &a.language)?;
    let vb = provider.embed(&[b.text.clone()], &b.language)?;
    let (va, vb) = (one(va, provider)?, one(vb, provider)?);
    cosine(&va, &vb)
}

fn one(mut v: Vec<EmbeddingVector>, provider: &dyn EmbeddingProvider) -> Result<EmbeddingVector> {
    if v.len() != 1 {
        return Err(Error::Provider {
            provider: provider.provider_id().into(),
            message: format!("expected 1 vector, got {}", v.len()),
        });
    }
    Ok(v.remove(0))
}

/// Builtin provider. With lexicons, tokens are first mapped to their pivot
/// translations so both languages land in one token space.
#[derive(Debug, Clone, Default)]
pub struct HashProvider {
    pub dim: usize,
    pub lexicons: HashMap<String, PivotLexicon>,
}

impl HashProvider {
    pub fn new(dim: usize) -> Self {
        HashProvider {
            dim,
            lexicons: HashMap::new(),
        }
    }

    pub fn with_lexicon(mut self, lexicon: PivotLexicon) -> Self {
        self.lexicons.insert(lexicon.language.clone(), lexicon);
        self
    }

    fn pivot_text(&self, text: &str, language: &str) -> String {
        let Some(lex) = self.lexicons.get(language) else {
            return text.to_string();
        };
        tokenize(text)
            .into_iter()
            .map(|t| match lex.entries.get(&t) {
                Some(p) => p.iter().cloned().collect::<Vec<_>>().join(" "),
                None => t,
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl EmbeddingProvider for HashProvider {
    fn provider_id(&self) -> &str {
        "builtin-hash"
    }

    fn embed(&self, texts: &[String], language: &str) -> Result<Vec<EmbeddingVector>> {
        texts
            .iter()
            .map(|t| {
                let mut v = hash_embed(&self.pivot_text(t, language), self.dim)?;
                v.provider_id = self.provider_id().into();
                Ok(v)
            })
            .collect()
    }
}

/// Fixed vectors per text, for tests.
#[derive(Debug, Clone, Default)]
pub struct StubProvider {
    pub vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingProvider for StubProvider {
    fn provider_id(&self) -> &str {
        "stub"
    }

    fn embed(&self, texts: &[String], _language: &str) -> Result<Vec<EmbeddingVector>> {
        texts
            .iter()
            .map(|t| {
                let mut v = self.vectors.get(t).cloned().ok_or_else(|| Error::Provider {
                    provider: "stub".into(),
                    message: format!("no vector for {t:?}"),
                })?;
                if !normalize(&mut v) {
                    return Err(Error::Provider {
                        provider: "stub".into(),
                        message: "zero vector".into(),
                    });
                }
                Ok(EmbeddingVector {
                    dim: v.len(),
                    components: v,
                    provider_id: "stub".into(),
                })
            })
            .collect()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
    language: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    dim: usize,
    model_id: String,
}

/// Client for the embedding sidecar (`POST {base}/embed`).
#[derive(Debug, Clone)]
pub struct HttpProvider {
    pub base_url: String,
    pub batch: usize,
    pub timeout: Duration,
    id: String,
}

const NORM_TOLERANCE: f64 = 1e-5;

impl HttpProvider {
    pub fn new(base_url: &str) -> Self {
        HttpProvider {
            base_url: base_url.trim_end_matches('/').to_string(),
            batch: 256,
            timeout: Duration::from_secs(60),
            id: format!("http:{}", base_url.trim_end_matches('/')),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Provider {
            provider: self.id.clone(),
            message: message.into(),
        }
    }

    fn request(&self, texts: &[String], language: &str) -> Result<Vec<EmbeddingVector>> {
        let url = format!("{}/embed", self.base_url);
        let resp = ureq::post(&url)
            .timeout(self.timeout)
            .send_json(EmbedRequest { texts, language })
            .map_err(|e| match e {
                ureq::Error::Status(code, r) => {
                    let body = r.into_string().unwrap_or_default();
                    self.err(format!("status {code}: {}", body.trim()))
                }
                other => self.err(other.to_string()),
            })?;
        let body: EmbedResponse = resp.into_json().map_err(|e| self.err(format!("bad response body: {e}")))?;
        if body.vectors.len() != texts.len() {
            return Err(self.err(format!("sent {} texts, got {} vectors", texts.len(), body.vectors.len())));
        }
        body.vectors
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                if v.len() != body.dim {
                    return Err(self.err(format!("vector {i} has {} components, dim is {}", v.len(), body.dim)));
                }
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (n - 1.0).abs() > NORM_TOLERANCE {
                    return Err(self.err(format!("vector {i} has norm {n}")));
                }
                Ok(EmbeddingVector {
                    components: v,
                    dim: body.dim,
                    provider_id: format!("{}:{}", self.id, body.model_id),
                })
            })
            .collect()
    }
}

impl EmbeddingProvider for HttpProvider {
    fn provider_id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[String], language: &str) -> Result<Vec<EmbeddingVector>> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch.max(1)) {
            out.extend(self.request(chunk, language)?);
        }
        if let Some(d) = out.first().map(|v| v.dim) {
            if out.iter().any(|v| v.dim != d) {
                return Err(self.err("dimension changed between batches"));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos(a: &str, b: &str) -> f64 {
        cosine(&hash_embed(a, DEFAULT_DIM).unwrap(), &hash_embed(b, DEFAULT_DIM).unwrap()).unwrap()
    }

    #[test]
    fn hash_embed_contract() {
        let a = hash_embed("पणजी शहरात पाऊस", 64).unwrap();
        assert_eq!(a, hash_embed("पणजी शहरात पाऊस", 64).unwrap());
        let n: f64 = a.components.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
        assert!(hash_embed("", 64).is_err());
        assert!(hash_embed("abc", 8).is_err());
    }

    #[test]
    fn ngram_overlap_dominates() {
        assert!(cos("abcdef", "abcdeg") > cos("abcdef", "zzzzzz"));
        assert!((cos("same text", "same text") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stub_vectors() {
        let stub = StubProvider {
            vectors: HashMap::from([
                ("x".to_string(), vec![1.0, 0.0]),
                ("y".to_string(), vec![0.0, 1.0]),
                ("z".to_string(), vec![0.6, 0.8]),
            ]),
        };
        let s = |t: &str| super::super::split_sentences(t, "l1").remove(0);
        assert_eq!(las_score(&s("x"), &s("y"), &stub).unwrap(), 0.0);
        assert!((las_score(&s("x"), &s("z"), &stub).unwrap() - 0.6).abs() < 1e-12);
    }
}
