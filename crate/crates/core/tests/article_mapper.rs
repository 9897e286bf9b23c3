use std::collections::{BTreeMap, HashSet};

use chrono::NaiveDate;
use corpus_forge_core::article_mapper::*;
use corpus_forge_core::features::FeatureParams;
use corpus_forge_core::fixture::{perturb_photo, synth_photo, Perturbation};
use corpus_forge_core::layout::{ArticleRecord, Roi, RoiKind};
use corpus_forge_core::raster::Rect;
use image::GrayImage;
use proptest::prelude::*;

fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, 5, 2).unwrap()
}

fn record(id: &str, parent: Option<&str>, headline: Option<&str>, n_images: u32) -> ArticleRecord {
    let mut rois = Vec::new();
    let mut texts = BTreeMap::new();
    if let Some(h) = headline {
        texts.insert(rois.len(), h.to_string());
        rois.push(Roi {
            kind: RoiKind::Headline,
            bbox: Rect { x: 0, y: 0, w: 100, h: 20 },
            seq_index: 0,
            sub_index: Some(0),
            embed_level: u8::from(parent.is_some()),
        });
    }
    for k in 0..n_images {
        rois.push(Roi {
            kind: RoiKind::Image,
            bbox: Rect { x: 0, y: 30 + 200 * k, w: 200, h: 150 },
            seq_index: k,
            sub_index: None,
            embed_level: 0,
        });
    }
    ArticleRecord {
        article_id: id.into(),
        page_id: "pg".into(),
        rois,
        parent: parent.map(String::from),
        frame: None,
        texts,
    }
}

fn input(id: &str, lang: &str, images: Vec<GrayImage>) -> ArticleInput {
    ArticleInput {
        article: record(id, None, Some("h"), images.len() as u32),
        language: lang.into(),
        date: date(),
        images: images.into_iter().enumerate().map(|(i, im)| (i as u32, im)).collect(),
    }
}

fn photo(seed: u64) -> GrayImage {
    synth_photo(seed, 200, 150)
}

fn variant(seed: u64) -> GrayImage {
    perturb_photo(&photo(seed), &Perturbation::default())
}

#[test]
fn three_shared_photos_out_of_four_by_five() {
    let left: Vec<_> = (0..4).map(|i| input(&format!("L-a{i:02}"), "kok", vec![photo(10 + i)])).collect();
    // right articles 1, 3, 4 carry perturbed copies of left photos 0, 1, 2; the rest are unrelated
    let right = vec![
        input("R-a00", "mr", vec![photo(50)]),
        input("R-a01", "mr", vec![variant(10)]),
        input("R-a02", "mr", vec![photo(51)]),
        input("R-a03", "mr", vec![variant(11)]),
        input("R-a04", "mr", vec![variant(12)]),
    ];
    let pairs = map_articles(&left, &right, date(), &FeatureParams::default()).unwrap();
    let got: HashSet<(String, String)> = pairs.iter().map(|p| (p.left.clone(), p.right.clone())).collect();
    let want: HashSet<(String, String)> = [("L-a00", "R-a01"), ("L-a01", "R-a03"), ("L-a02", "R-a04")]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(got, want);
    for p in &pairs {
        assert_eq!(p.origin, PairOrigin::ImagePivot);
        assert!(p.pair_score >= FeatureParams::default().similarity_threshold);
        assert_eq!(p.image_evidence.len(), 1);
        assert_eq!(p.pair_score, p.image_evidence[0].similarity);
        assert_eq!((p.left_language.as_str(), p.right_language.as_str()), ("kok", "mr"));
    }
}

#[test]
fn articles_without_images_are_never_paired() {
    let left = vec![input("L-a00", "kok", vec![]), input("L-a01", "kok", vec![])];
    let right = vec![input("R-a00", "mr", vec![])];
    assert!(map_articles(&left, &right, date(), &FeatureParams::default()).unwrap().is_empty());
    let right = vec![input("R-a00", "mr", vec![photo(1)])];
    assert!(map_articles(&left, &right, date(), &FeatureParams::default()).unwrap().is_empty());
}

#[test]
fn duplicate_stock_photo_keeps_the_stronger_pair() {
    let left = vec![input("L-a00", "kok", vec![photo(7)])];
    let strong = perturb_photo(&photo(7), &Perturbation { scale: 1.0, brightness: 10, shift: 0 });
    let right = vec![input("R-a00", "mr", vec![variant(7)]), input("R-a01", "mr", vec![strong])];
    let params = FeatureParams::default();
    let pairs = map_articles(&left, &right, date(), &params).unwrap();
    assert_eq!(pairs.len(), 1);
    let full = |r: &str| {
        map_articles(&left, &right.iter().filter(|a| a.article.article_id == r).cloned().collect::<Vec<_>>(), date(), &params)
            .unwrap()[0]
            .pair_score
    };
    let (s0, s1) = (full("R-a00"), full("R-a01"));
    let expect = if s1 > s0 { "R-a01" } else { "R-a00" };
    assert_eq!(pairs[0].right, expect);
    assert_eq!(pairs[0].pair_score, s0.max(s1));
}

#[test]
fn multi_image_articles_score_by_best_photo() {
    let left = vec![input("L-a00", "kok", vec![photo(30), photo(31)])];
    let right = vec![input("R-a00", "mr", vec![photo(60), variant(31)])];
    let pairs = map_articles(&left, &right, date(), &FeatureParams::default()).unwrap();
    assert_eq!(pairs.len(), 1);
    let ev = &pairs[0].image_evidence;
    assert_eq!(ev.len(), 4);
    let best = ev.iter().map(|e| e.similarity).fold(0.0, f64::max);
    assert_eq!(pairs[0].pair_score, best);
    let top = ev.iter().find(|e| e.similarity == best).unwrap();
    assert_eq!((top.left_image.as_str(), top.right_image.as_str()), ("L-a00_I1.png", "R-a00_I1.png"));
}

#[test]
fn other_dates_and_language_errors() {
    let mut other = input("L-a00", "kok", vec![photo(1)]);
    other.date = date().succ_opt().unwrap();
    let right = vec![input("R-a00", "mr", vec![photo(1)])];
    assert!(map_articles(&[other], &right, date(), &FeatureParams::default()).unwrap().is_empty());
    let same = vec![input("X", "mr", vec![photo(1)])];
    assert!(map_articles(&same, &right, date(), &FeatureParams::default()).is_err());
    let mixed = vec![input("A", "kok", vec![]), input("B", "hi", vec![])];
    assert!(map_articles(&mixed, &right, date(), &FeatureParams::default()).is_err());
}

#[test]
fn threshold_monotonicity_and_determinism() {
    let left: Vec<_> = (0..3).map(|i| input(&format!("L{i}"), "kok", vec![photo(70 + i)])).collect();
    let right: Vec<_> = (0..3).map(|i| input(&format!("R{i}"), "mr", vec![variant(70 + (2 - i))])).collect();
    let run = |t: f64| {
        let params = FeatureParams { similarity_threshold: t, ..Default::default() };
        map_articles(&left, &right, date(), &params).unwrap()
    };
    let base = run(0.25);
    assert_eq!(base, run(0.25));
    let mut prev: HashSet<(String, String)> = base.iter().map(|p| (p.left.clone(), p.right.clone())).collect();
    assert_eq!(prev.len(), 3);
    for t in [0.4, 0.6, 0.8, 0.95, 1.0] {
        let now: HashSet<_> = run(t).iter().map(|p| (p.left.clone(), p.right.clone())).collect();
        assert!(now.is_subset(&prev), "threshold {t} added a pair");
        prev = now;
    }
}

#[test]
fn pair_report_round_trip() {
    let left = vec![input("L-a00", "kok", vec![photo(5)])];
    let right = vec![input("R-a00", "mr", vec![variant(5)])];
    let pairs = map_articles(&left, &right, date(), &FeatureParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.jsonl");
    write_pair_report(&pairs, &path).unwrap();
    assert_eq!(read_pair_report(&path).unwrap(), pairs);
}

fn parent_pair() -> ArticlePair {
    ArticlePair {
        left: "L".into(),
        right: "R".into(),
        left_language: "kok".into(),
        right_language: "mr".into(),
        date: date(),
        image_evidence: vec![],
        pair_score: 0.9,
        origin: PairOrigin::ImagePivot,
        parents: None,
    }
}

fn child(id: &str, parent: &str, headline: Option<&str>, lang: &str) -> ArticleInput {
    ArticleInput {
        article: record(id, Some(parent), headline, 0),
        language: lang.into(),
        date: date(),
        images: vec![],
    }
}

fn table(m: &'static [(&'static str, &'static str, f64)]) -> impl Fn(&str, &str) -> corpus_forge_core::Result<f64> + Sync {
    move |a: &str, b: &str| Ok(m.iter().find(|(x, y, _)| *x == a && *y == b).map_or(0.0, |t| t.2))
}

#[test]
fn one_embedded_child_each() {
    let left = vec![child("L-e1", "L", Some("hl"), "kok")];
    let right = vec![child("R-e1", "R", Some("hr"), "mr")];
    let delta = table(&[("hl", "hr", 0.9)]);
    let out = map_embedded(&parent_pair(), &left, &right, &delta, 0.5).unwrap();
    assert_eq!(out.pairs.len(), 1);
    let p = &out.pairs[0];
    assert_eq!((p.left.as_str(), p.right.as_str(), p.origin), ("L-e1", "R-e1", PairOrigin::HeadlinePivot));
    assert_eq!(p.parents, Some(("L".into(), "R".into())));
    assert!(map_embedded(&parent_pair(), &left, &right, &delta, 0.95).unwrap().pairs.is_empty());
}

#[test]
fn no_children_on_one_side() {
    let left = vec![child("L-e1", "L", Some("hl"), "kok")];
    let delta = table(&[]);
    assert!(map_embedded(&parent_pair(), &left, &[], &delta, 0.0).unwrap().pairs.is_empty());
    // children of a different parent do not count
    let right = vec![child("R-e1", "OTHER", Some("hr"), "mr")];
    assert!(map_embedded(&parent_pair(), &left, &right, &delta, 0.0).unwrap().pairs.is_empty());
}

#[test]
fn crossed_two_by_two() {
    let left = vec![child("L-e1", "L", Some("a"), "kok"), child("L-e2", "L", Some("b"), "kok")];
    let right = vec![child("R-e1", "R", Some("x"), "mr"), child("R-e2", "R", Some("y"), "mr")];
    // greedy: (b, x) 0.9 first, then (a, y) 0.7; the diagonal would total less
    let delta = table(&[("a", "x", 0.8), ("a", "y", 0.7), ("b", "x", 0.9), ("b", "y", 0.2)]);
    let out = map_embedded(&parent_pair(), &left, &right, &delta, 0.5).unwrap();
    let got: Vec<_> = out.pairs.iter().map(|p| (p.left.as_str(), p.right.as_str(), p.pair_score)).collect();
    assert_eq!(got, vec![("L-e2", "R-e1", 0.9), ("L-e1", "R-e2", 0.7)]);
    // full tie: article_id order decides
    let tie = table(&[("a", "x", 0.6), ("a", "y", 0.6), ("b", "x", 0.6), ("b", "y", 0.6)]);
    let out = map_embedded(&parent_pair(), &left, &right, &tie, 0.5).unwrap();
    let got: Vec<_> = out.pairs.iter().map(|p| (p.left.as_str(), p.right.as_str())).collect();
    assert_eq!(got, vec![("L-e1", "R-e1"), ("L-e2", "R-e2")]);
}

#[test]
fn missing_headline_is_skipped_with_warning() {
    let left = vec![child("L-e1", "L", None, "kok"), child("L-e2", "L", Some("a"), "kok")];
    let right = vec![child("R-e1", "R", Some("x"), "mr")];
    let delta = table(&[("a", "x", 0.8)]);
    let out = map_embedded(&parent_pair(), &left, &right, &delta, 0.5).unwrap();
    assert_eq!(out.pairs.len(), 1);
    assert_eq!(out.warnings.len(), 1);
    assert!(out.warnings[0].contains("L-e1"));
}

/// Best total score over all one-to-one assignments restricted to candidates.
fn exhaustive_best(m: &[Vec<f64>], thr: f64) -> f64 {
    fn go(m: &[Vec<f64>], i: usize, used: &mut Vec<bool>, thr: f64) -> f64 {
        if i == m.len() {
            return 0.0;
        }
        let mut best = go(m, i + 1, used, thr);
        for j in 0..used.len() {
            if !used[j] && m[i][j] >= thr {
                used[j] = true;
                best = best.max(m[i][j] + go(m, i + 1, used, thr));
                used[j] = false;
            }
        }
        best
    }
    let cols = m.first().map_or(0, Vec::len);
    go(m, 0, &mut vec![false; cols], thr)
}

proptest! {
    #[test]
    fn greedy_is_one_to_one_and_respects_scores(m in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 1..7), 1..7)) {
        let cols = m.iter().map(Vec::len).min().unwrap();
        let cands: Vec<(usize, usize, f64)> = m.iter().enumerate().flat_map(|(i, row)| (0..cols).map(move |j| (i, j, row[j]))).collect();
        let out = greedy_assign(cands.clone());
        let ls: HashSet<_> = out.iter().map(|p| p.0).collect();
        let rs: HashSet<_> = out.iter().map(|p| p.1).collect();
        prop_assert_eq!(ls.len(), out.len());
        prop_assert_eq!(rs.len(), out.len());
        prop_assert_eq!(out.len(), m.len().min(cols));
        // emitted in non-increasing score order
        prop_assert!(out.windows(2).all(|w| w[0].2 >= w[1].2));
        // the first pick is the global maximum
        let max = cands.iter().map(|c| c.2).fold(f64::MIN, f64::max);
        prop_assert_eq!(out[0].2, max);
        let mut shuffled = cands.clone();
        shuffled.reverse();
        prop_assert_eq!(greedy_assign(shuffled), out);
    }

    #[test]
    fn greedy_matches_exhaustive_on_separated_scores(
        n in 1usize..7, m in 1usize..7,
        perm_seed in 0u64..1000,
        noise in prop::collection::vec(0.0f64..0.2, 36),
        true_scores in prop::collection::vec(0.5f64..1.0, 6),
    ) {
        // fixture-like matrices: one strong cell per true pair, weak elsewhere
        let k = n.min(m);
        let mut cols: Vec<usize> = (0..m).collect();
        let mut s = perm_seed;
        for i in (1..cols.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            cols.swap(i, (s >> 33) as usize % (i + 1));
        }
        let mut mat = vec![vec![0.0; m]; n];
        for i in 0..n {
            for j in 0..m {
                mat[i][j] = noise[i * 6 + j];
            }
        }
        for i in 0..k {
            mat[i][cols[i]] = true_scores[i];
        }
        let thr = 0.25;
        let cands: Vec<(usize, usize, f64)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| (i, j, mat[i][j])).filter(|c| c.2 >= thr).collect();
        let greedy: f64 = greedy_assign(cands).iter().map(|c| c.2).sum();
        prop_assert!((greedy - exhaustive_best(&mat, thr)).abs() < 1e-12);
    }
}
