//! Length-based sentence alignment (Gale–Church style DP over word counts).

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::Sentence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bead {
    OneOne,
    OneZero,
    ZeroOne,
    TwoOne,
    OneTwo,
}

impl Bead {
    /// Also the tie-break order of the DP.
    pub const ALL: [Bead; 5] = [Bead::OneOne, Bead::OneZero, Bead::ZeroOne, Bead::TwoOne, Bead::OneTwo];

    pub fn steps(self) -> (usize, usize) {
        match self {
            Bead::OneOne => (1, 1),
            Bead::OneZero => (1, 0),
            Bead::ZeroOne => (0, 1),
            Bead::TwoOne => (2, 1),
            Bead::OneTwo => (1, 2),
        }
    }

    pub fn prior(self) -> f64 {
        match self {
            Bead::OneOne => 0.89,
            Bead::OneZero | Bead::ZeroOne => 0.0099,
            Bead::TwoOne | Bead::OneTwo => 0.089,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlasParams {
    /// Expected right/left length ratio.
    pub ratio: f64,
    pub variance: f64,
}

impl Default for SlasParams {
    fn default() -> Self {
        SlasParams {
            ratio: 1.0,
            variance: 6.8,
        }
    }
}

const MIN_PROB: f64 = 1e-300;

/// -ln P(bead) - ln P(|δ|) for a bead covering `l1` left and `l2` right words.
pub fn bead_cost(bead: Bead, l1: usize, l2: usize, params: &SlasParams) -> f64 {
    let (l1, l2) = (l1 as f64, l2 as f64);
    let mean = (l1 + l2 / params.ratio) / 2.0;
    let delta = if mean > 0.0 {
        (l1 * params.ratio - l2) / (mean * params.variance).sqrt()
    } else {
        0.0
    };
    let p = erfc(delta.abs() / std::f64::consts::SQRT_2).max(MIN_PROB);
    -bead.prior().ln() - p.ln()
}

fn span_len(lens: &[usize], from: usize, n: usize) -> usize {
    lens[from..from + n].iter().sum()
}

fn cost_at(bead: Bead, i: usize, j: usize, left: &[usize], right: &[usize], params: &SlasParams) -> Option<f64> {
    let (di, dj) = bead.steps();
    (i + di <= left.len() && j + dj <= right.len())
        .then(|| bead_cost(bead, span_len(left, i, di), span_len(right, j, dj), params))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlasPath {
    pub cost: f64,
    /// `(bead, left start, right start, posterior)` in order.
    pub beads: Vec<(Bead, usize, usize, f64)>,
}

/// Posterior of `bead` among the beads that could start at the same cell.
fn local_posterior(bead: Bead, i: usize, j: usize, left: &[usize], right: &[usize], params: &SlasParams) -> f64 {
    let costs: Vec<(Bead, f64)> = Bead::ALL
        .iter()
        .filter_map(|&b| cost_at(b, i, j, left, right, params).map(|c| (b, c)))
        .collect();
    let min = costs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let z: f64 = costs.iter().map(|c| (min - c.1).exp()).sum();
    let own = costs.iter().find(|c| c.0 == bead).map_or(0.0, |c| (min - c.1).exp());
    (own / z).clamp(0.0, 1.0)
}

/// Minimum-cost bead path over two word-count lists.
pub fn slas_dp(left: &[usize], right: &[usize], params: &SlasParams) -> SlasPath {
    let (n, m) = (left.len(), right.len());
    let mut dist = vec![vec![f64::INFINITY; m + 1]; n + 1];
    let mut back: Vec<Vec<Option<Bead>>> = vec![vec![None; m + 1]; n + 1];
    dist[0][0] = 0.0;
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            for b in Bead::ALL {
                let (di, dj) = b.steps();
                if di > i || dj > j || !dist[i - di][j - dj].is_finite() {
                    continue;
                }
                let c = dist[i - di][j - dj] + cost_at(b, i - di, j - dj, left, right, params).expect("in range");
                if c < dist[i][j] {
                    dist[i][j] = c;
                    back[i][j] = Some(b);
                }
            }
        }
    }
    let mut beads = Vec::new();
    let (mut i, mut j) = (n, m);
    while let Some(b) = back[i][j] {
        let (di, dj) = b.steps();
        i -= di;
        j -= dj;
        beads.push((b, i, j, local_posterior(b, i, j, left, right, params)));
    }
    beads.reverse();
    SlasPath {
        cost: dist[n][m],
        beads,
    }
}

/// Exhaustive minimum over every bead path; costs summed in path order.
pub fn slas_brute_force(left: &[usize], right: &[usize], params: &SlasParams) -> f64 {
    fn walk(i: usize, j: usize, acc: f64, left: &[usize], right: &[usize], params: &SlasParams, best: &mut f64) {
        if i == left.len() && j == right.len() {
            *best = best.min(acc);
            return;
        }
        for b in Bead::ALL {
            if let Some(c) = cost_at(b, i, j, left, right, params) {
                let (di, dj) = b.steps();
                walk(i + di, j + dj, acc + c, left, right, params, best);
            }
        }
    }
    let mut best = f64::INFINITY;
    walk(0, 0, 0.0, left, right, params, &mut best);
    best
}

fn merge(parts: &[Sentence]) -> Sentence {
    let mut s = parts[0].clone();
    for p in &parts[1..] {
        s.text.push(' ');
        s.text.push_str(&p.text);
        s.word_count += p.word_count;
        s.span.1 = p.span.1;
    }
    s
}

/// Aligned sentence tuples of the best path (1-1, 2-1 and 1-2 beads) whose
/// posterior reaches `threshold`. Multi-sentence sides are joined with a space.
pub fn slas_align(left: &[Sentence], right: &[Sentence], params: &SlasParams, threshold: f64) -> Vec<(Sentence, Sentence, f64)> {
    if left.is_empty() || right.is_empty() {
        return Vec::new();
    }
    let ll: Vec<usize> = left.iter().map(|s| s.word_count).collect();
    let rl: Vec<usize> = right.iter().map(|s| s.word_count).collect();
    slas_dp(&ll, &rl, params)
        .beads
        .into_iter()
        .filter(|(b, _, _, p)| !matches!(b, Bead::OneZero | Bead::ZeroOne) && *p >= threshold)
        .map(|(b, i, j, p)| {
            let (di, dj) = b.steps();
            (merge(&left[i..i + di]), merge(&right[j..j + dj]), p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_lengths_go_diagonal() {
        let p = slas_dp(&[12, 7, 20, 9], &[12, 7, 20, 9], &SlasParams::default());
        assert!(p.beads.iter().all(|b| b.0 == Bead::OneOne));
        assert_eq!(p.beads.len(), 4);
        assert!(p.beads.iter().all(|b| b.3 > 0.5));
    }

    #[test]
    fn extra_final_left_sentence_is_absorbed() {
        // with these priors a trailing extra sentence merges into a 2-1 bead
        // rather than standing alone as 1-0
        let left = [10, 14, 8, 11];
        let right = [10, 14, 8];
        let p = slas_dp(&left, &right, &SlasParams::default());
        let kinds: Vec<Bead> = p.beads.iter().map(|b| b.0).collect();
        assert_eq!(kinds, [Bead::OneOne, Bead::TwoOne, Bead::OneOne]);
        assert_eq!(p.cost, slas_brute_force(&left, &right, &SlasParams::default()));
    }

    #[test]
    fn unmatched_short_tail_becomes_one_zero() {
        let left = [36, 41, 9, 8];
        let right = [18, 1, 53];
        let p = slas_dp(&left, &right, &SlasParams::default());
        assert_eq!(p.beads.last().unwrap().0, Bead::OneZero);
        assert_eq!(p.cost, slas_brute_force(&left, &right, &SlasParams::default()));
    }

    #[test]
    fn cost_is_symmetric_in_delta_sign() {
        let p = SlasParams::default();
        assert!((bead_cost(Bead::OneOne, 10, 12, &p) - bead_cost(Bead::OneOne, 12, 10, &p)).abs() < 0.2);
        assert!(bead_cost(Bead::OneOne, 10, 10, &p) < bead_cost(Bead::OneOne, 10, 30, &p));
        // huge mismatch saturates instead of overflowing
        assert!(bead_cost(Bead::OneOne, 1, 5000, &p).is_finite());
    }
}
