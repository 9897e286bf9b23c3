use std::collections::HashMap;

use crate::error::{Error, Result};

const EPSILON: f64 = 0.1;

fn ngrams(tokens: &[&str], n: usize) -> HashMap<Vec<String>, usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.iter().map(|s| s.to_string()).collect()).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus BLEU over whitespace tokens, in [0, 100].
///
/// An order with no hypothesis n-grams at all is left out of the geometric
/// mean; an order with n-grams but no matches gets `0.1 / total`. The brevity
/// penalty uses the reference length closest to each hypothesis, shorter on ties.
pub fn bleu(hypotheses: &[String], references: &[Vec<String>], max_n: usize) -> Result<f64> {
    if hypotheses.is_empty() {
        return Err(Error::Invalid("bleu: no hypotheses".into()));
    }
    if hypotheses.len() != references.len() {
        return Err(Error::Invalid(format!(
            "bleu: {} hypotheses but {} reference sets",
            hypotheses.len(),
            references.len()
        )));
    }
    if max_n == 0 {
        return Err(Error::Invalid("bleu: max_n must be at least 1".into()));
    }
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (hyp, refs) in hypotheses.iter().zip(references) {
        if refs.is_empty() {
            return Err(Error::Invalid("bleu: hypothesis without references".into()));
        }
        let h: Vec<&str> = hyp.split_whitespace().collect();
        let rs: Vec<Vec<&str>> = refs.iter().map(|r| r.split_whitespace().collect()).collect();
        hyp_len += h.len();
        ref_len += rs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| ((l as i64 - h.len() as i64).abs(), l))
            .expect("non-empty");
        for n in 1..=max_n {
            let hc = ngrams(&h, n);
            let mut max_ref: HashMap<Vec<String>, usize> = HashMap::new();
            for r in &rs {
                for (g, c) in ngrams(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            totals[n - 1] += hc.values().sum::<usize>();
            matches[n - 1] += hc
                .iter()
                .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
        }
    }
    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    let mut orders = 0;
    for (&m, &t) in matches.iter().zip(&totals) {
        if t == 0 {
            continue;
        }
        let p = if m == 0 { EPSILON / t as f64 } else { m as f64 / t as f64 };
        log_sum += p.ln();
        orders += 1;
    }
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * bp * (log_sum / orders as f64).exp())
}
