//! Pivot-language lexicons and the lexical-overlap score.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::{tokenize, Sentence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PivotLexicon {
    pub language: String,
    pub entries: BTreeMap<String, BTreeSet<String>>,
}

fn key(token: &str) -> String {
    token.nfc().collect::<String>().to_lowercase()
}

impl PivotLexicon {
    /// Parses `source<TAB>pivot` lines; repeated sources add pivots.
    pub fn parse(language: &str, tsv: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (n, line) in tsv.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (src, pivot) = line
                .split_once('\t')
                .ok_or_else(|| Error::Invalid(format!("lexicon line {}: expected source<TAB>pivot", n + 1)))?;
            let (src, pivot) = (key(src.trim()), key(pivot.trim()));
            if src.is_empty() || pivot.is_empty() {
                return Err(Error::Invalid(format!("lexicon line {}: empty field", n + 1)));
            }
            entries.entry(src).or_default().insert(pivot);
        }
        Ok(PivotLexicon {
            language: language.to_string(),
            entries,
        })
    }

    pub fn load(language: &str, path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(language, &raw)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (src, pivots) in &self.entries {
            for p in pivots {
                out.push_str(src);
                out.push('\t');
                out.push_str(p);
                out.push('\n');
            }
        }
        out
    }

    /// Pivot multiset of a token list; each pivot counted once per source token.
    pub fn pivot_tokens(&self, tokens: &[String]) -> BTreeMap<String, usize> {
        let mut bag = BTreeMap::new();
        for t in tokens {
            match self.entries.get(t) {
                Some(pivots) => {
                    for p in pivots {
                        *bag.entry(p.clone()).or_insert(0) += 1;
                    }
                }
                None => log::debug!("no {} lexicon entry for {t:?}", self.language),
            }
        }
        bag
    }
}

/// F1 over two pivot multisets.
pub fn lo_score_tokens(a: &BTreeMap<String, usize>, b: &BTreeMap<String, usize>) -> f64 {
    let na: usize = a.values().sum();
    let nb: usize = b.values().sum();
    if na == 0 || nb == 0 {
        return 0.0;
    }
    let common: usize = a.iter().map(|(k, &c)| c.min(b.get(k).copied().unwrap_or(0))).sum();
    if common == 0 {
        return 0.0;
    }
    let p = common as f64 / na as f64;
    let r = common as f64 / nb as f64;
    2.0 * p * r / (p + r)
}

pub fn lo_score(a: &Sentence, b: &Sentence, lex_a: &PivotLexicon, lex_b: &PivotLexicon) -> f64 {
    lo_score_tokens(&lex_a.pivot_tokens(&tokenize(&a.text)), &lex_b.pivot_tokens(&tokenize(&b.text)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bag(words: &[&str]) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for w in words {
            *m.entry(w.to_string()).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn f1_arithmetic() {
        let s = lo_score_tokens(&bag(&["the", "cat", "sat"]), &bag(&["cat", "sat", "mat"]));
        assert!((s - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(lo_score_tokens(&bag(&["a"]), &bag(&["b"])), 0.0);
        assert_eq!(lo_score_tokens(&bag(&["a", "b"]), &bag(&["b", "a"])), 1.0);
    }

    #[test]
    fn parse_and_lookup() {
        let lex = PivotLexicon::parse("kok", "घर\thouse\nघर\thome\n# comment\nशहर\tcity\n").unwrap();
        assert_eq!(lex.entries["घर"].len(), 2);
        let b = lex.pivot_tokens(&["घर".into(), "अज्ञात".into()]);
        assert_eq!(b, bag(&["home", "house"]));
        assert!(PivotLexicon::parse("kok", "no tab here").is_err());
        assert_eq!(PivotLexicon::parse("kok", &lex.to_tsv()).unwrap(), lex);
    }
}
