use std::path::PathBuf;

use chrono::NaiveDate;
use corpus_forge_core::corpus::*;
use corpus_forge_core::layout::RoiKind;
use corpus_forge_core::sentence::{Provenance, Sentence, SentencePair, Strategy};
use proptest::prelude::*;

fn sentence(text: &str, lang: &str, index: usize, kind: RoiKind) -> Sentence {
    Sentence {
        text: text.into(),
        index,
        article_id: "a".into(),
        language: lang.into(),
        roi_kind: kind,
        word_count: text.split_whitespace().count(),
        span: (0, text.len()),
    }
}

fn pair(l: &str, r: &str, index: usize, strategy: Strategy, article_len: usize) -> SentencePair {
    SentencePair {
        left: sentence(l, "kok", index, RoiKind::Content),
        right: sentence(r, "mr", index, RoiKind::Content),
        score: 0.8,
        strategy,
        provenance: Provenance {
            date: NaiveDate::from_ymd_opt(2024, 1, 15).unwrap(),
            page_ids: ("p1".into(), "p2".into()),
            article_ids: ("a1".into(), "b1".into()),
            article_len,
        },
    }
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[test]
fn duplicates_are_dropped() {
    let c = build_corpus(vec![
        pair("एक दोन", "one two", 0, Strategy::Las, 3),
        pair("तीन", "three", 1, Strategy::Las, 3),
        pair("  एक   दोन ", "one two", 2, Strategy::Las, 3),
    ]);
    assert_eq!(c.entries.len(), 2);
    assert_eq!(c.stats.total, 2);
    assert_eq!(c.stats.duplicates_dropped, 1);
    assert_eq!(c.stats.by_strategy["LAS"], 2);
    assert_eq!(c.languages, ("kok".to_string(), "mr".to_string()));
}

#[test]
fn empty_corpus_has_zero_stats() {
    let c = build_corpus(Vec::new());
    assert!(c.entries.is_empty());
    assert_eq!(c.stats, CorpusStats::default());
}

#[test]
fn nfc_normalization_merges_equivalent_text() {
    // decomposed vs precomposed "é"
    let c = build_corpus(vec![
        pair("cafe\u{301} x", "y", 0, Strategy::Lo, 1),
        pair("caf\u{e9} x", "y", 1, Strategy::Lo, 1),
    ]);
    assert_eq!(c.entries.len(), 1);
    assert_eq!(c.entries[0].pair.left.text, "caf\u{e9} x");
}

#[test]
fn captions_go_to_their_own_split() {
    let mut cap = pair("चित्र ओळ", "photo line", 0, Strategy::Las, 2);
    cap.left.roi_kind = RoiKind::Caption;
    cap.right.roi_kind = RoiKind::Caption;
    let c = build_corpus(vec![cap, pair("मजकूर", "text", 0, Strategy::Las, 2)]);
    let main = corpus_tsv(&c).unwrap();
    let caps = caption_tsv(&c).unwrap();
    assert_eq!(main.lines().count(), 1);
    assert!(main.starts_with("मजकूर\ttext\t0.800000\tLAS\t{"));
    assert_eq!(caps.lines().count(), 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.tsv");
    write_corpus(&c, &path).unwrap();
    let back = read_corpus_jsonl(&path.with_extension("jsonl")).unwrap();
    assert_eq!(back.entries, c.entries);
    assert!(std::fs::read_to_string(path.with_extension("jsonl")).unwrap().contains("\"split\":\"caption\""));
}

fn corpus_of(n: usize, words: impl Fn(usize) -> usize) -> BilingualCorpus {
    build_corpus((0..n).map(|i| {
        let w = words(i);
        let l = (0..w).map(|k| format!("l{i}_{k}")).collect::<Vec<_>>().join(" ");
        let r = (0..w).map(|k| format!("r{i}_{k}")).collect::<Vec<_>>().join(" ");
        pair(&l, &r, i, Strategy::Las, 4)
    }))
}

#[test]
fn stratified_sample_of_600() {
    let c = corpus_of(600, |i| [5, 15, 25][i % 3]);
    let sheet = sample_sts(&c, 200, 42);
    assert_eq!(sheet.rows.len(), 600);
    assert!(sheet.strata.iter().all(|s| s.taken == 200 && s.shortfall == 0));
    let again = sample_sts(&c, 200, 42);
    assert_eq!(sheet, again);
    let small = sample_sts(&c, 50, 42);
    assert_eq!(small.rows.len(), 150);
    // shuffled: consecutive rows are not all from one stratum
    let bins: Vec<usize> = small
        .rows
        .iter()
        .map(|r| sentence_bin(c.entry(&r.pair_id).unwrap().pair.left.word_count))
        .collect();
    assert!(bins[..50].iter().any(|&b| b != bins[0]));
}

#[test]
fn short_only_corpus_reports_shortfall() {
    let c = corpus_of(30, |_| 4);
    let sheet = sample_sts(&c, 20, 1);
    assert_eq!(sheet.rows.len(), 20);
    assert_eq!(sheet.strata[0].shortfall, 0);
    assert_eq!(sheet.strata[1].shortfall, 20);
    assert_eq!(sheet.strata[2].taken, 0);
}

#[test]
fn sheet_csv_round_trip() {
    let c = corpus_of(9, |i| 3 + i);
    let sheet = sample_sts(&c, 5, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sheet.csv");
    write_sheet(&sheet, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("pair_id,left_text,right_text,score\n"));
    let rows = read_sheet(&path, "ann1").unwrap();
    assert_eq!(rows.len(), sheet.rows.len());
    assert!(rows.iter().all(|r| r.score.is_none() && r.annotator_id.as_deref() == Some("ann1")));
}

fn scored(c: &BilingualCorpus, scores: &[u8]) -> Vec<SheetRow> {
    c.entries
        .iter()
        .zip(scores)
        .map(|(e, s)| SheetRow {
            pair_id: e.pair_id.clone(),
            left_text: e.pair.left.text.clone(),
            right_text: e.pair.right.text.clone(),
            score: Some(s.to_string()),
            annotator_id: None,
        })
        .collect()
}

#[test]
fn constructed_annotation_set() {
    let c = corpus_of(10, |_| 5);
    let (r, errs) = aggregate_sts(&scored(&c, &[4, 4, 3, 4, 4, 3, 4, 4, 4, 3]), &c);
    assert!(errs.is_empty());
    assert!((r.mean_sts - 3.7).abs() < 1e-9);
    assert_eq!(r.frac_above_3, 0.7);
    let (r, _) = aggregate_sts(&scored(&c, &[5; 10]), &c);
    assert_eq!((r.mean_sts, r.frac_above_3), (5.0, 1.0));
}

#[test]
fn annotators_are_averaged_per_pair_first() {
    let c = corpus_of(2, |_| 5);
    let mut rows = scored(&c, &[3, 5]);
    let mut extra = scored(&c, &[4, 5]);
    for r in &mut extra {
        r.annotator_id = Some("b".into());
    }
    rows.extend(extra);
    let (r, _) = aggregate_sts(&rows, &c);
    assert_eq!(r.n_pairs, 2);
    assert_eq!(r.n_annotations, 4);
    // pair means 3.5 and 5.0
    assert!((r.mean_sts - 4.25).abs() < 1e-12);
    assert_eq!(r.frac_above_3, 1.0);
}

#[test]
fn bad_rows_are_reported_and_skipped() {
    let c = corpus_of(3, |_| 5);
    let mut rows = scored(&c, &[4, 4, 4]);
    rows[1].score = Some("7".into());
    rows[2].pair_id = "nope".into();
    rows.push(SheetRow {
        score: Some("x".into()),
        ..rows[0].clone()
    });
    let (r, errs) = aggregate_sts(&rows, &c);
    assert_eq!(r.n_pairs, 1);
    assert_eq!(errs.len(), 3);
    assert_eq!(errs[1].message, "unknown pair_id");
}

#[test]
fn canned_annotations_reproduce_bucket_table() {
    let corpus = read_corpus_jsonl(&data("sts_bucket_corpus.jsonl")).unwrap();
    let rows = read_sheet(&data("sts_bucket_annotations.csv"), "canned").unwrap();
    let (report, errs) = aggregate_sts(&rows, &corpus);
    assert!(errs.is_empty());
    let expect = [
        (Strategy::Las, [3.8, 3.7, 3.8], [3.8, 3.8, 3.7]),
        (Strategy::Slas, [3.4, 3.4, 3.2], [3.1, 3.5, 3.3]),
        (Strategy::Lo, [2.9, 3.0, 2.6], [2.8, 2.9, 2.9]),
    ];
    for (s, sent, art) in expect {
        let row = &report.rows[&s];
        for b in 0..3 {
            assert!((row.sentence[b].mean.unwrap() - sent[b]).abs() < 1e-9, "{s} sentence bin {b}");
            assert!((row.article[b].mean.unwrap() - art[b]).abs() < 1e-9, "{s} article bin {b}");
            assert!((0.0..=5.0).contains(&row.sentence[b].mean.unwrap()));
        }
    }
    // overall mean is the pair-weighted mean of the buckets
    let weighted: f64 = report
        .rows
        .values()
        .flat_map(|r| r.sentence.iter())
        .map(|b| b.n as f64 * b.mean.unwrap_or(0.0))
        .sum::<f64>()
        / report.n_pairs as f64;
    assert!((weighted - report.mean_sts).abs() < 1e-9);
    let table = report.render_table();
    assert!(table.contains("LAS          3.8     3.7     3.8     3.8     3.8     3.7"), "{table}");
    assert!(table.contains("LO           2.9     3.0     2.6     2.8     2.9     2.9"), "{table}");
}

fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

#[test]
fn bleu_identity_is_exactly_100() {
    let h = s(&["the cat sat", "a b c d e", "x"]);
    let r: Vec<Vec<String>> = h.iter().map(|x| vec![x.clone()]).collect();
    assert_eq!(bleu(&h, &r, 4).unwrap(), 100.0);
}

#[test]
fn bleu_hand_computed_values() {
    // hyp 3 words, ref 4: p1..p3 = 1, no 4-grams, brevity penalty exp(1 - 4/3)
    let v = bleu(&s(&["the cat sat"]), &[s(&["the cat sat down"])], 4).unwrap();
    assert!((v - 100.0 * (1.0f64 - 4.0 / 3.0).exp()).abs() < 1e-9, "{v}");

    // p = 5/5, 3/4, 2/3, 1/2; bp = exp(1 - 6/5)
    let v = bleu(&s(&["the cat sat on mat"]), &[s(&["the cat sat on the mat"])], 4).unwrap();
    let oracle = 100.0 * (-0.2f64).exp() * (1.0 * 0.75 * (2.0 / 3.0) * 0.5f64).powf(0.25);
    assert!((v - oracle).abs() < 1e-9, "{v} {oracle}");

    // zero trigram and 4-gram matches take epsilon 0.1 over their totals
    let v = bleu(&s(&["a b c d"]), &[s(&["a b x d"])], 4).unwrap();
    let oracle = 100.0 * (0.75 * (1.0 / 3.0) * (0.1 / 2.0) * (0.1 / 1.0f64)).powf(0.25);
    assert!((v - oracle).abs() < 1e-9, "{v} {oracle}");
}

#[test]
fn bleu_closest_reference_length() {
    // refs of length 2 and 6 for a 3-word hyp: closest is 2, so no penalty
    let v = bleu(&s(&["a b c"]), &[s(&["a b", "a b c q r s"])], 1).unwrap();
    assert_eq!(v, 100.0);
}

#[test]
fn bleu_no_overlap_and_errors() {
    // every order falls back to 0.1 / total
    let v = bleu(&s(&["p q r s t"]), &[s(&["a b c d e"])], 4).unwrap();
    let oracle = 100.0 * ((0.1 / 5.0) * (0.1 / 4.0) * (0.1 / 3.0) * (0.1 / 2.0f64)).powf(0.25);
    assert!((v - oracle).abs() < 1e-9, "{v} {oracle}");
    assert!(bleu(&[], &[], 4).is_err());
    assert!(bleu(&s(&["a"]), &[], 4).is_err());
}

proptest! {
    #[test]
    fn dedup_is_idempotent(texts in prop::collection::vec(("[a-c]{1,3}( [a-c]{1,3}){0,3}", "[x-z]{1,3}"), 0..20)) {
        let pairs: Vec<SentencePair> = texts.iter().enumerate().map(|(i, (l, r))| pair(l, r, i, Strategy::Las, 2)).collect();
        let once = build_corpus(pairs);
        let twice = build_corpus(once.pairs().cloned());
        prop_assert_eq!(&once.entries, &twice.entries);
        let mut keys: Vec<_> = once.pairs().map(|p| (p.left.text.clone(), p.right.text.clone())).collect();
        let n = keys.len();
        keys.sort();
        keys.dedup();
        prop_assert_eq!(keys.len(), n);
        prop_assert_eq!(once.stats.total, n);
    }

    #[test]
    fn sts_mean_is_sum_over_count(scores in prop::collection::vec(0u8..=5, 1..40)) {
        let c = corpus_of(scores.len(), |i| 1 + i % 25);
        let (r, errs) = aggregate_sts(&scored(&c, &scores), &c);
        prop_assert!(errs.is_empty());
        let mean = scores.iter().map(|&v| v as f64).sum::<f64>() / scores.len() as f64;
        prop_assert!((r.mean_sts - mean).abs() < 1e-9);
        let above = scores.iter().filter(|&&v| v > 3).count() as f64 / scores.len() as f64;
        prop_assert!((r.frac_above_3 - above).abs() < 1e-12);
    }

    #[test]
    fn sample_is_a_pure_function(seed in 0u64..1000, n in 1usize..30) {
        let c = corpus_of(40, |i| 1 + (i * 7) % 30);
        prop_assert_eq!(sample_sts(&c, n, seed), sample_sts(&c, n, seed));
    }

    #[test]
    fn bleu_invariant_under_row_reordering(
        rows in prop::collection::vec(("[a-d]( [a-d]){0,6}", "[a-d]( [a-d]){0,6}"), 1..8),
        rot in 0usize..8,
    ) {
        let h: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
        let r: Vec<Vec<String>> = rows.iter().map(|r| vec![r.1.clone()]).collect();
        let base = bleu(&h, &r, 4).unwrap();
        let k = rot % h.len();
        let mut h2 = h.clone();
        let mut r2 = r.clone();
        h2.rotate_left(k);
        r2.rotate_left(k);
        prop_assert_eq!(base, bleu(&h2, &r2, 4).unwrap());
        prop_assert!((0.0..=100.0).contains(&base));
        prop_assert_eq!(bleu(&h, &h.iter().map(|x| vec![x.clone()]).collect::<Vec<_>>(), 4).unwrap(), 100.0);
    }
}
