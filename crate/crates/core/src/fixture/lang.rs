//! Two pseudo-languages sharing one concept inventory through a pivot.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::sentence::PivotLexicon;

const PIVOT_C: &[&str] = &["b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "w", "z"];
const PIVOT_V: &[&str] = &["a", "e", "i", "o", "u", "ea", "ou"];
const LEFT_C: &[&str] = &["k", "g", "c", "j", "t", "d", "n", "p", "b", "m", "r", "l", "s", "v", "x"];
const LEFT_V: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const RIGHT_C: &[&str] = &[
    "क", "ख", "ग", "घ", "च", "ज", "ट", "ड", "त", "द", "न", "प", "ब", "म", "य", "र", "ल", "व", "स", "ह",
];
const RIGHT_V: &[&str] = &["", "ा", "ि", "ी", "ु", "ू", "े", "ो"];

fn word(rng: &mut ChaCha8Rng, cons: &[&str], vowels: &[&str], syllables: usize) -> String {
    (0..syllables)
        .map(|_| format!("{}{}", cons[rng.gen_range(0..cons.len())], vowels[rng.gen_range(0..vowels.len())]))
        .collect()
}

fn inventory(
    rng: &mut ChaCha8Rng,
    n: usize,
    cons: &[&str],
    vowels: &[&str],
    min_chars: usize,
) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.gen_range(2..=3);
        let w = word(rng, cons, vowels, syllables);
        if w.chars().count() >= min_chars && seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Concept `k` is written `left[k]` and `right[k]` and glossed `pivot[k]`.
pub(crate) struct Vocabulary {
    pub pivot: Vec<String>,
    pub left: Vec<String>,
    pub right: Vec<String>,
    zipf: WeightedIndex<f64>,
}

impl Vocabulary {
    pub fn new(rng: &mut ChaCha8Rng, size: usize) -> Self {
        let pivot = inventory(rng, size, PIVOT_C, PIVOT_V, 3);
        let left = inventory(rng, size, LEFT_C, LEFT_V, 4);
        let right = inventory(rng, size, RIGHT_C, RIGHT_V, 2);
        let zipf = WeightedIndex::new((0..size).map(|k| 1.0 / (k as f64 + 2.0))).expect("positive weights");
        Vocabulary { pivot, left, right, zipf }
    }

    pub fn concepts(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
        (0..n).map(|_| self.zipf.sample(rng)).collect()
    }

    /// Left text: first letter capitalized, `end` appended.
    pub fn left_text(&self, concepts: &[usize], end: &str) -> String {
        let mut s = concepts.iter().map(|&k| self.left[k].as_str()).collect::<Vec<_>>().join(" ");
        if let Some(c) = s.chars().next() {
            s.replace_range(..c.len_utf8(), &c.to_uppercase().to_string());
        }
        s + end
    }

    pub fn right_text(&self, concepts: &[usize], end: &str) -> String {
        concepts.iter().map(|&k| self.right[k].as_str()).collect::<Vec<_>>().join(" ") + end
    }

    /// Lexicon for one side keeping each concept with probability `coverage`.
    pub fn lexicon(&self, language: &str, left_side: bool, coverage: f64, rng: &mut ChaCha8Rng) -> PivotLexicon {
        let forms = if left_side { &self.left } else { &self.right };
        let mut entries = BTreeMap::new();
        for (k, form) in forms.iter().enumerate() {
            if coverage >= 1.0 || rng.gen_bool(coverage) {
                entries.insert(form.clone(), BTreeSet::from([self.pivot[k].clone()]));
            }
        }
        PivotLexicon {
            language: language.to_string(),
            entries,
        }
    }
}
