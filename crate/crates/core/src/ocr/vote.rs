//! Character-level majority voting over aligned OCR candidates.
//!
//! Every candidate is aligned to a pivot (the longest candidate, ties to the
//! best-ranked engine) with a minimum edit distance alignment that prefers,
//! among equal-cost alignments, the one with the most exact matches. The
//! aligned columns are the pivot's characters plus one insertion slot before
//! each of them and one at the end; each column is decided by majority, ties
//! going to the best-ranked engine holding a tied option.

use std::cmp::Reverse;

use unicode_normalization::UnicodeNormalization;

use super::{OcrCandidate, OcrEngineAdapter};

/// One candidate projected onto the pivot's columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Projection {
    /// Character aligned to each pivot position, `None` for a gap.
    pub at: Vec<Option<char>>,
    /// Characters inserted before pivot position `k` (index `n` is the tail).
    pub inserted: Vec<Vec<char>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Cost {
    edits: u32,
    matches: Reverse<u32>,
}

impl Cost {
    const ZERO: Cost = Cost {
        edits: 0,
        matches: Reverse(0),
    };

    fn step(self, edit: bool, matched: bool) -> Cost {
        Cost {
            edits: self.edits + u32::from(edit),
            matches: Reverse(self.matches.0 + u32::from(matched)),
        }
    }
}

pub(crate) fn project(pivot: &[char], other: &[char]) -> Projection {
    let (n, m) = (pivot.len(), other.len());
    let w = m + 1;
    let mut dp = vec![Cost::ZERO; (n + 1) * w];
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best: Option<Cost> = None;
            let mut consider = |c: Cost| {
                if best.is_none_or(|b| c < b) {
                    best = Some(c);
                }
            };
            if i > 0 && j > 0 {
                let same = pivot[i - 1] == other[j - 1];
                consider(dp[(i - 1) * w + j - 1].step(!same, same));
            }
            if i > 0 {
                consider(dp[(i - 1) * w + j].step(true, false));
            }
            if j > 0 {
                consider(dp[i * w + j - 1].step(true, false));
            }
            dp[i * w + j] = best.expect("at least one predecessor");
        }
    }

    let mut at = vec![None; n];
    let mut inserted = vec![Vec::new(); n + 1];
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * w + j];
        if i > 0 && j > 0 {
            let same = pivot[i - 1] == other[j - 1];
            if dp[(i - 1) * w + j - 1].step(!same, same) == here {
                at[i - 1] = Some(other[j - 1]);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[(i - 1) * w + j].step(true, false) == here {
            i -= 1;
            continue;
        }
        inserted[i].insert(0, other[j - 1]);
        j -= 1;
    }
    Projection { at, inserted }
}

/// Majority among `options`, ties resolved by the earliest (best-ranked) holder.
fn majority<T: PartialEq + Clone>(options: &[T]) -> T {
    let mut best: Option<(usize, usize)> = None; // (count, first holder)
    for (i, o) in options.iter().enumerate() {
        if options[..i].contains(o) {
            continue;
        }
        let count = options.iter().filter(|x| *x == o).count();
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, i));
        }
    }
    options[best.expect("non-empty options").1].clone()
}

fn rank_of(engine_id: &str, ensemble: &[OcrEngineAdapter]) -> u32 {
    ensemble
        .iter()
        .find(|e| e.engine_id == engine_id)
        .map_or(u32::MAX, |e| e.priority)
}

/// Combines OCR candidates into one string by per-column majority.
///
/// Lower `priority` values rank higher. A single candidate is returned verbatim.
pub fn vote(candidates: &[OcrCandidate], ensemble: &[OcrEngineAdapter]) -> String {
    match candidates {
        [] => return String::new(),
        [only] => return only.text.clone(),
        _ => {}
    }
    let mut ranked: Vec<&OcrCandidate> = candidates.iter().collect();
    ranked.sort_by(|a, b| {
        (rank_of(&a.engine_id, ensemble), &a.engine_id).cmp(&(rank_of(&b.engine_id, ensemble), &b.engine_id))
    });
    let seqs: Vec<Vec<char>> = ranked.iter().map(|c| c.text.nfc().collect()).collect();
    let pivot_idx = (0..seqs.len())
        .max_by_key(|&i| (seqs[i].len(), Reverse(i)))
        .expect("non-empty");
    let pivot = &seqs[pivot_idx];
    let projections: Vec<Projection> = seqs
        .iter()
        .map(|s| project(pivot, s))
        .collect();

    let mut out = String::new();
    for k in 0..=pivot.len() {
        let slot: Vec<Vec<char>> = projections.iter().map(|p| p.inserted[k].clone()).collect();
        out.extend(majority(&slot));
        if k < pivot.len() {
            let col: Vec<Option<char>> = projections.iter().map(|p| p.at[k]).collect();
            if let Some(c) = majority(&col) {
                out.push(c);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocr::OcrEngineAdapter;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    fn cands(texts: &[&str]) -> (Vec<OcrCandidate>, Vec<OcrEngineAdapter>) {
        let c = texts
            .iter()
            .enumerate()
            .map(|(i, t)| OcrCandidate {
                engine_id: format!("engine{}", i + 1),
                text: t.to_string(),
                confidence: None,
            })
            .collect();
        let e = (0..texts.len())
            .map(|i| OcrEngineAdapter::fixed(format!("engine{}", i + 1), i as u32 + 1, ""))
            .collect();
        (c, e)
    }

    #[test]
    fn projection_prefers_matches_among_equal_costs() {
        // "bc" against "ab": two substitutions or delete-a/insert-c both cost 2;
        // the second keeps b aligned with b.
        let p = project(&chars("ab"), &chars("bc"));
        assert_eq!(p.at, vec![None, Some('b')]);
        assert_eq!(p.inserted, vec![vec![], vec![], vec!['c']]);
    }

    #[test]
    fn projection_of_identity() {
        let p = project(&chars("karnataka"), &chars("karnataka"));
        assert!(p.inserted.iter().all(Vec::is_empty));
        assert_eq!(p.at.iter().flatten().collect::<String>(), "karnataka");
    }

    #[test]
    fn two_of_three_per_column() {
        let (c, e) = cands(&["karnataka", "karnataka", "karn@taka"]);
        assert_eq!(vote(&c, &e), "karnataka");
    }

    #[test]
    fn single_candidate_verbatim() {
        let (c, e) = cands(&["abc"]);
        assert_eq!(vote(&c, &e), "abc");
    }

    #[test]
    fn disputed_columns_follow_engine_priority() {
        // Pivot "ab" (engine1). Columns: position 0 = {a, a, gap}, position 1 =
        // {b, c, b}, tail slot = {"", "", "c"}. Majorities give "ab".
        let (c, e) = cands(&["ab", "ac", "bc"]);
        assert_eq!(vote(&c, &e), "ab");
    }

    #[test]
    fn three_way_tie_goes_to_highest_priority() {
        let (c, e) = cands(&["x", "y", "z"]);
        assert_eq!(vote(&c, &e), "x");
        let (mut c, mut e) = cands(&["x", "y", "z"]);
        e[2].priority = 0;
        c.reverse();
        assert_eq!(vote(&c, &e), "z");
    }

    #[test]
    fn nfc_before_alignment() {
        // Decomposed and precomposed forms of the same text agree.
        let (c, e) = cands(&["e\u{301}te\u{301}", "\u{e9}t\u{e9}", "xyz"]);
        assert_eq!(vote(&c, &e), "\u{e9}t\u{e9}");
    }
}
