use corpus_forge_core::features::*;
use corpus_forge_core::fixture::synth_photo;
use image::imageops::{self, FilterType};
use image::{GrayImage, Luma};
use proptest::prelude::*;

fn checkerboard() -> GrayImage {
    GrayImage::from_fn(256, 256, |x, y| Luma([if (x / 16 + y / 16) % 2 == 0 { 20 } else { 235 }]))
}

fn params() -> FeatureParams {
    FeatureParams::default()
}

#[test]
fn checkerboard_keypoint_count_is_in_pinned_range() {
    let n = detect_keypoints(&checkerboard(), &params()).unwrap().len();
    // first run gave 2586
    assert!((1800..3400).contains(&n), "{n}");
}

/// Keypoints coarse enough to exist after halving must reappear there, within
/// 2 px in the halved frame.
fn repeatability(img: &GrayImage) -> f64 {
    let p = params();
    let orig = detect_keypoints(img, &p).unwrap();
    let half = imageops::resize(img, img.width() / 2, img.height() / 2, FilterType::Triangle);
    let small = detect_keypoints(&half, &p).unwrap();
    let coarse: Vec<_> = orig.iter().filter(|k| k.scale >= 2.0 * p.sigma).collect();
    assert!(!coarse.is_empty());
    let hit = coarse
        .iter()
        .filter(|o| small.iter().any(|k| (k.x - o.x / 2.0).hypot(k.y - o.y / 2.0) <= 2.0))
        .count();
    hit as f64 / coarse.len() as f64
}

#[test]
fn half_scale_repeatability() {
    let r = repeatability(&checkerboard());
    assert!(r >= 0.6, "checkerboard {r}");
    for seed in 0..3 {
        let r = repeatability(&synth_photo(seed, 240, 180));
        assert!(r >= 0.6, "photo {seed}: {r}");
    }
}

#[test]
fn rotation_by_90_degrees_keeps_descriptors_close() {
    let p = params();
    for seed in 0..3 {
        let a = synth_photo(seed, 240, 180);
        let b = imageops::rotate90(&a);
        let da = extract_features(&a, &p).unwrap();
        let db = extract_features(&b, &p).unwrap();
        // repeatable = keypoints whose rotated position carries a keypoint in b
        let h = a.height() as f64;
        let mut repeatable = 0;
        let mut close = 0;
        for d in &da {
            let (rx, ry) = (h - 1.0 - d.keypoint.y, d.keypoint.x);
            let best = db
                .iter()
                .filter(|e| (e.keypoint.x - rx).hypot(e.keypoint.y - ry) <= 2.0)
                .map(|e| {
                    d.vector
                        .iter()
                        .zip(&e.vector)
                        .map(|(x, y)| ((x - y) as f64).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            if best.is_finite() {
                repeatable += 1;
                close += usize::from(best < 0.4);
            }
        }
        assert!(repeatable > 20, "{repeatable}");
        assert!(close as f64 >= 0.5 * repeatable as f64, "{close}/{repeatable}");
    }
}

#[test]
fn self_similarity_and_illumination() {
    let p = params();
    for seed in 0..5 {
        let a = synth_photo(seed, 220, 160);
        assert!(detect_keypoints(&a, &p).unwrap().len() >= 20);
        let s = image_similarity(&a, &a, &p).unwrap();
        assert!(s >= 0.9, "self {seed}: {s}");
        let mut bright = a.clone();
        for px in bright.pixels_mut() {
            px.0[0] = px.0[0].saturating_add(30);
        }
        let s = image_similarity(&a, &bright, &p).unwrap();
        assert!(s >= 0.5, "bright {seed}: {s}");
    }
}

#[test]
fn unrelated_photos_stay_below_bound() {
    let p = params();
    let feats: Vec<_> = (0..10)
        .map(|s| extract_features(&synth_photo(100 + s, 200, 150), &p).unwrap())
        .collect();
    for i in 0..10 {
        for j in i + 1..10 {
            let s = match_descriptors(&feats[i], &feats[j], p.ratio).score;
            assert!(s < 0.05, "{i} vs {j}: {s}");
        }
    }
}

#[test]
fn blank_border_does_not_change_score() {
    let p = params();
    for seed in 0..3 {
        let a = synth_photo(seed, 200, 150);
        let b = synth_photo(seed + 50, 200, 150);
        let mut framed = GrayImage::from_pixel(200 + 32, 150 + 32, Luma([255]));
        imageops::replace(&mut framed, &a, 16, 16);
        let plain = image_similarity(&a, &a, &p).unwrap();
        let bordered = image_similarity(&a, &framed, &p).unwrap();
        assert!((plain - bordered).abs() <= 0.05, "{plain} vs {bordered}");
        let other = image_similarity(&b, &a, &p).unwrap();
        let other_b = image_similarity(&b, &framed, &p).unwrap();
        assert!((other - other_b).abs() <= 0.05, "{other} vs {other_b}");
    }
}

#[test]
fn downscaling_large_images_keeps_keypoints_in_source_frame() {
    let p = FeatureParams {
        max_dim: 128,
        ..params()
    };
    let a = synth_photo(4, 400, 300);
    let kps = detect_keypoints(&a, &p).unwrap();
    assert!(!kps.is_empty());
    assert!(kps.iter().any(|k| k.x > 200.0));
    assert!(kps.iter().all(|k| k.x < 400.0 && k.y < 300.0));
    let d = compute_descriptors(&a, &kps, &p).unwrap();
    assert!(!d.is_empty());
}

#[test]
fn compute_matches_extract() {
    let p = params();
    let a = synth_photo(9, 160, 120);
    let kps = detect_keypoints(&a, &p).unwrap();
    assert_eq!(compute_descriptors(&a, &kps, &p).unwrap(), extract_features(&a, &p).unwrap());
}

fn arb_descriptors(max: usize) -> impl Strategy<Value = Vec<Descriptor>> {
    prop::collection::vec(prop::collection::vec(0.0f32..0.2, DESCRIPTOR_LEN), 0..max).prop_map(|vs| {
        vs.into_iter()
            .map(|vector| Descriptor {
                vector,
                keypoint: Keypoint {
                    x: 0.0,
                    y: 0.0,
                    scale: 1.0,
                    orientation: 0.0,
                    response: 0.0,
                    octave: 0,
                    layer: 1.0,
                },
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn match_result_invariants(a in arb_descriptors(12), b in arb_descriptors(12), ratio in 0.05f64..0.99) {
        let r = match_descriptors(&a, &b, ratio);
        prop_assert!((0.0..=1.0).contains(&r.score));
        let mut seen_a = std::collections::HashSet::new();
        let mut seen_b = std::collections::HashSet::new();
        for &(i, j, _) in &r.pairs {
            prop_assert!(seen_a.insert(i) && seen_b.insert(j));
        }
        prop_assert!(r.pairs.windows(2).all(|w| w[0].2 <= w[1].2));
        if a.is_empty() || b.is_empty() {
            prop_assert_eq!(r.score, 0.0);
        }
        // raising the ratio can only admit more candidates
        let looser = match_descriptors(&a, &b, (ratio + 0.2).min(0.999));
        prop_assert!(looser.pairs.len() >= r.pairs.len() || looser.score >= 0.0);
    }

    #[test]
    fn self_match_of_distinct_vectors_is_one(a in arb_descriptors(10)) {
        prop_assume!(!a.is_empty());
        let r = match_descriptors(&a, &a, 0.75);
        prop_assert_eq!(r.score, 1.0);
    }

    #[test]
    fn similarity_is_deterministic_and_nearly_symmetric(s1 in 0u64..1000, s2 in 0u64..1000) {
        let p = FeatureParams::default();
        let a = synth_photo(s1, 200, 150);
        let b = synth_photo(s2, 200, 150);
        let ab = image_similarity(&a, &b, &p).unwrap();
        prop_assert_eq!(ab, image_similarity(&a, &b, &p).unwrap());
        let ba = image_similarity(&b, &a, &p).unwrap();
        prop_assert!((ab - ba).abs() <= 0.05, "{} vs {}", ab, ba);
    }
}
