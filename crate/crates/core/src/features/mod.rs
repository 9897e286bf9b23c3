//! Scale-invariant keypoints, 128-d gradient descriptors and ratio-test matching.

mod scale_space;

use std::f64::consts::PI;

use image::imageops::FilterType;
use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use scale_space::{Plane, Pyramid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub octaves: usize,
    pub scales: usize,
    pub sigma: f64,
    /// Applied to DoG values of images scaled to [0, 1].
    pub contrast_threshold: f64,
    pub edge_threshold: f64,
    pub ratio: f64,
    pub similarity_threshold: f64,
    pub max_dim: u32,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            octaves: 4,
            scales: 3,
            sigma: 1.6,
            contrast_threshold: 0.04,
            edge_threshold: 10.0,
            ratio: 0.75,
            similarity_threshold: 0.25,
            max_dim: 1024,
        }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("feature params: {m}")));
        if self.octaves == 0 || self.scales == 0 {
            return bad("octaves and scales must be positive");
        }
        if !(self.sigma > 0.0) || !(self.contrast_threshold > 0.0) || !(self.edge_threshold > 1.0) {
            return bad("sigma, contrast_threshold must be positive and edge_threshold > 1");
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return bad("ratio must be in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return bad("similarity_threshold must be in [0, 1]");
        }
        if self.max_dim < 32 {
            return bad("max_dim must be at least 32");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Blur sigma in source-image pixels.
    pub scale: f64,
    /// Radians in [0, 2π), image axes (y grows downwards).
    pub orientation: f64,
    /// |DoG| at the refined extremum.
    pub response: f64,
    pub octave: usize,
    /// Refined layer within the octave.
    pub layer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub vector: Vec<f32>,
    pub keypoint: Keypoint,
}

pub const DESCRIPTOR_LEN: usize = 128;
const GRID: usize = 4;
const ORI_BINS: usize = 8;
const CLAMP: f32 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `(index in a, index in b, distance)`, ascending by distance.
    pub pairs: Vec<(usize, usize, f64)>,
    pub score: f64,
}

const MIN_EDGE: u32 = 32;
const BORDER: usize = 5;
const MAX_REFINE_STEPS: usize = 5;
const ORI_HIST_BINS: usize = 36;
const ORI_PEAK_RATIO: f64 = 0.8;
const ORI_SIGMA_FACTOR: f64 = 1.5;
const DESCR_SCALE_FACTOR: f64 = 3.0;

fn check_size(gray: &GrayImage) -> Result<()> {
    if gray.width() < MIN_EDGE || gray.height() < MIN_EDGE {
        return Err(Error::Invalid(format!(
            "image {}x{} is below the {MIN_EDGE}x{MIN_EDGE} minimum",
            gray.width(),
            gray.height()
        )));
    }
    Ok(())
}

/// Working plane plus the factor mapping working pixels to source pixels.
fn working_plane(gray: &GrayImage, max_dim: u32) -> (Plane, f64) {
    let longest = gray.width().max(gray.height());
    if longest <= max_dim {
        return (Plane::from_gray(gray), 1.0);
    }
    let f = max_dim as f64 / longest as f64;
    let w = ((gray.width() as f64 * f).round() as u32).max(1);
    let h = ((gray.height() as f64 * f).round() as u32).max(1);
    let small = image::imageops::resize(gray, w, h, FilterType::Triangle);
    (Plane::from_gray(&small), gray.width() as f64 / w as f64)
}

fn pyramid(gray: &GrayImage, params: &FeatureParams) -> (Pyramid, f64) {
    let (plane, factor) = working_plane(gray, params.max_dim);
    (Pyramid::build(&plane, params.octaves, params.scales, params.sigma), factor)
}

pub fn detect_keypoints(gray: &GrayImage, params: &FeatureParams) -> Result<Vec<Keypoint>> {
    check_size(gray)?;
    let (pyr, factor) = pyramid(gray, params);
    Ok(detect_in(&pyr, factor, params, gray.width(), gray.height()))
}

pub fn compute_descriptors(gray: &GrayImage, kps: &[Keypoint], params: &FeatureParams) -> Result<Vec<Descriptor>> {
    check_size(gray)?;
    let (pyr, factor) = pyramid(gray, params);
    Ok(describe_in(&pyr, factor, kps))
}

/// Detection and description sharing one pyramid.
pub fn extract_features(gray: &GrayImage, params: &FeatureParams) -> Result<Vec<Descriptor>> {
    check_size(gray)?;
    let (pyr, factor) = pyramid(gray, params);
    let kps = detect_in(&pyr, factor, params, gray.width(), gray.height());
    Ok(describe_in(&pyr, factor, &kps))
}

pub fn image_similarity(a: &GrayImage, b: &GrayImage, params: &FeatureParams) -> Result<f64> {
    let da = extract_features(a, params)?;
    let db = extract_features(b, params)?;
    Ok(match_descriptors(&da, &db, params.ratio).score)
}

fn is_extremum(dog: &[Plane], l: usize, x: usize, y: usize) -> bool {
    let v = dog[l].at(x, y);
    let mut is_max = v > 0.0;
    let mut is_min = v < 0.0;
    for plane in &dog[l - 1..=l + 1] {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                let n = plane.at(xx, yy);
                is_max &= v >= n;
                is_min &= v <= n;
            }
        }
        if !is_max && !is_min {
            return false;
        }
    }
    is_max || is_min
}

struct Refined {
    x: f64,
    y: f64,
    layer: f64,
    /// Integer sample the refinement converged on.
    ix: usize,
    iy: usize,
    il: usize,
    response: f64,
}

fn solve3(h: [[f64; 3]; 3], g: [f64; 3]) -> Option<[f64; 3]> {
    let det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
    if det.abs() < 1e-12 {
        return None;
    }
    let col = |c: usize| {
        let mut m = h;
        for r in 0..3 {
            m[r][c] = g[r];
        }
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    Some([col(0) / det, col(1) / det, col(2) / det])
}

/// Quadratic interpolation of a DoG extremum plus contrast and edge tests.
fn refine(dog: &[Plane], scales: usize, mut x: usize, mut y: usize, mut l: usize, params: &FeatureParams) -> Option<Refined> {
    let (w, h) = (dog[0].w, dog[0].h);
    let mut previous = None;
    for _ in 0..MAX_REFINE_STEPS {
        let d = |dl: isize, dx: isize, dy: isize| -> f64 {
            dog[(l as isize + dl) as usize].at((x as isize + dx) as usize, (y as isize + dy) as usize) as f64
        };
        let c = d(0, 0, 0);
        let g = [
            (d(0, 1, 0) - d(0, -1, 0)) / 2.0,
            (d(0, 0, 1) - d(0, 0, -1)) / 2.0,
            (d(1, 0, 0) - d(-1, 0, 0)) / 2.0,
        ];
        let dxx = d(0, 1, 0) + d(0, -1, 0) - 2.0 * c;
        let dyy = d(0, 0, 1) + d(0, 0, -1) - 2.0 * c;
        let dss = d(1, 0, 0) + d(-1, 0, 0) - 2.0 * c;
        let dxy = (d(0, 1, 1) - d(0, -1, 1) - d(0, 1, -1) + d(0, -1, -1)) / 4.0;
        let dxs = (d(1, 1, 0) - d(1, -1, 0) - d(-1, 1, 0) + d(-1, -1, 0)) / 4.0;
        let dys = (d(1, 0, 1) - d(1, 0, -1) - d(-1, 0, 1) + d(-1, 0, -1)) / 4.0;
        let hess = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
        let off = solve3(hess, [-g[0], -g[1], -g[2]])?;
        let step = |v: usize, o: f64| (v as f64 + o.round()) as isize;
        let next = (step(x, off[0]), step(y, off[1]), step(l, off[2]));
        // an extremum midway between two samples makes the steps bounce
        let bouncing = previous == Some(next);
        if off.iter().all(|o| o.abs() < 0.5) || (bouncing && off.iter().all(|o| o.abs() < 1.0)) {
            let response = c + 0.5 * (g[0] * off[0] + g[1] * off[1] + g[2] * off[2]);
            if response.abs() * (scales as f64) < params.contrast_threshold {
                return None;
            }
            let tr = dxx + dyy;
            let det = dxx * dyy - dxy * dxy;
            let r = params.edge_threshold;
            if det <= 0.0 || tr * tr * r >= (r + 1.0) * (r + 1.0) * det {
                return None;
            }
            return Some(Refined {
                x: x as f64 + off[0],
                y: y as f64 + off[1],
                layer: l as f64 + off[2],
                ix: x,
                iy: y,
                il: l,
                response: response.abs(),
            });
        }
        if off.iter().any(|o| !o.is_finite() || o.abs() > 1e6) {
            return None;
        }
        let (nx, ny, nl) = next;
        if nl < 1
            || nl > scales as isize
            || nx < BORDER as isize
            || nx >= (w - BORDER) as isize
            || ny < BORDER as isize
            || ny >= (h - BORDER) as isize
        {
            return None;
        }
        previous = Some((x as isize, y as isize, l as isize));
        (x, y, l) = (nx as usize, ny as usize, nl as usize);
    }
    None
}

/// Gradient (dx, dy) of a plane at an interior pixel, y pointing down.
#[inline]
fn gradient(p: &Plane, x: usize, y: usize) -> (f64, f64) {
    (
        (p.at(x + 1, y) - p.at(x - 1, y)) as f64,
        (p.at(x, y + 1) - p.at(x, y - 1)) as f64,
    )
}

/// Dominant gradient directions around a point, one per histogram peak.
fn orientations(img: &Plane, x: usize, y: usize, sigma: f64) -> Vec<f64> {
    let sw = ORI_SIGMA_FACTOR * sigma;
    let radius = (3.0 * sw).round() as isize;
    let mut hist = [0f64; ORI_HIST_BINS];
    for dy in -radius..=radius {
        let yy = y as isize + dy;
        if yy <= 0 || yy >= img.h as isize - 1 {
            continue;
        }
        for dx in -radius..=radius {
            let xx = x as isize + dx;
            if xx <= 0 || xx >= img.w as isize - 1 {
                continue;
            }
            let (gx, gy) = gradient(img, xx as usize, yy as usize);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let weight = (-((dx * dx + dy * dy) as f64) / (2.0 * sw * sw)).exp();
            let angle = gy.atan2(gx).rem_euclid(2.0 * PI);
            let bin = ((angle / (2.0 * PI) * ORI_HIST_BINS as f64).round() as usize) % ORI_HIST_BINS;
            hist[bin] += weight * mag;
        }
    }
    let n = ORI_HIST_BINS;
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            (hist[(i + n - 2) % n] + hist[(i + 2) % n]) / 16.0
                + (hist[(i + n - 1) % n] + hist[(i + 1) % n]) * 4.0 / 16.0
                + hist[i] * 6.0 / 16.0
        })
        .collect();
    let max = smooth.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..n {
        let (l, c, r) = (smooth[(i + n - 1) % n], smooth[i], smooth[(i + 1) % n]);
        if c > l && c > r && c >= ORI_PEAK_RATIO * max {
            let bin = i as f64 + 0.5 * (l - r) / (l - 2.0 * c + r);
            let angle = (bin / n as f64 * 2.0 * PI).rem_euclid(2.0 * PI);
            // rem_euclid can round up to exactly 2π
            out.push(if angle >= 2.0 * PI { 0.0 } else { angle });
        }
    }
    out
}

fn detect_in(pyr: &Pyramid, factor: f64, params: &FeatureParams, src_w: u32, src_h: u32) -> Vec<Keypoint> {
    let s = pyr.scales;
    let prelim = (0.5 * params.contrast_threshold / s as f64) as f32;
    let mut out = Vec::new();
    for (o, dog) in pyr.dog.iter().enumerate() {
        let (w, h) = (dog[0].w, dog[0].h);
        if w <= 2 * BORDER || h <= 2 * BORDER {
            continue;
        }
        let octave_scale = 2f64.powi(o as i32) * factor;
        for l in 1..=s {
            for y in BORDER..h - BORDER {
                for x in BORDER..w - BORDER {
                    if dog[l].at(x, y).abs() <= prelim || !is_extremum(dog, l, x, y) {
                        continue;
                    }
                    let Some(r) = refine(dog, s, x, y, l, params) else {
                        continue;
                    };
                    let sigma = pyr.layer_sigma(r.layer);
                    let gx = r.x * octave_scale;
                    let gy = r.y * octave_scale;
                    if gx < 0.0 || gy < 0.0 || gx >= src_w as f64 || gy >= src_h as f64 {
                        continue;
                    }
                    for orientation in orientations(&pyr.gauss[o][r.il], r.ix, r.iy, sigma) {
                        out.push(Keypoint {
                            x: gx,
                            y: gy,
                            scale: sigma * octave_scale,
                            orientation,
                            response: r.response,
                            octave: o,
                            layer: r.layer,
                        });
                    }
                }
            }
        }
    }
    out
}

fn describe_in(pyr: &Pyramid, factor: f64, kps: &[Keypoint]) -> Vec<Descriptor> {
    kps.iter()
        .filter_map(|kp| {
            let octave = pyr.gauss.get(kp.octave)?;
            let octave_scale = 2f64.powi(kp.octave as i32) * factor;
            let il = (kp.layer.round() as usize).clamp(1, pyr.scales);
            let img = &octave[il];
            let x = kp.x / octave_scale;
            let y = kp.y / octave_scale;
            let sigma = kp.scale / octave_scale;
            let vector = describe_one(img, x, y, sigma, kp.orientation)?;
            Some(Descriptor { vector, keypoint: *kp })
        })
        .collect()
}

/// 4x4x8 histogram of rotated gradients, or None if the grid leaves the image
/// or carries no gradient energy.
fn describe_one(img: &Plane, x: f64, y: f64, sigma: f64, orientation: f64) -> Option<Vec<f32>> {
    let d = GRID as f64;
    let hist_width = DESCR_SCALE_FACTOR * sigma;
    // the grid square itself must fit, rotation aside
    let half = hist_width * d / 2.0;
    if x - half < 1.0 || y - half < 1.0 || x + half > (img.w - 2) as f64 || y + half > (img.h - 2) as f64 {
        return None;
    }
    let (ix, iy) = (x.round() as isize, y.round() as isize);
    let radius = (hist_width * std::f64::consts::SQRT_2 * (d + 1.0) * 0.5).round() as isize;
    let (cos_t, sin_t) = (orientation.cos() / hist_width, orientation.sin() / hist_width);
    let mut hist = vec![0f64; (GRID + 2) * (GRID + 2) * (ORI_BINS + 2)];
    let idx = |r: usize, c: usize, o: usize| (r * (GRID + 2) + c) * (ORI_BINS + 2) + o;
    let bins_per_rad = ORI_BINS as f64 / (2.0 * PI);
    for i in -radius..=radius {
        for j in -radius..=radius {
            let px = ix + j;
            let py = iy + i;
            if px <= 0 || py <= 0 || px >= img.w as isize - 1 || py >= img.h as isize - 1 {
                continue;
            }
            // offset from the subpixel centre, in the keypoint's rotated frame
            let ox = px as f64 - x;
            let oy = py as f64 - y;
            let c_rot = ox * cos_t + oy * sin_t;
            let r_rot = -ox * sin_t + oy * cos_t;
            let rbin = r_rot + d / 2.0 - 0.5;
            let cbin = c_rot + d / 2.0 - 0.5;
            if rbin <= -1.0 || rbin >= d || cbin <= -1.0 || cbin >= d {
                continue;
            }
            let (gx, gy) = gradient(img, px as usize, py as usize);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let weight = (-(c_rot * c_rot + r_rot * r_rot) / (0.5 * d * d)).exp();
            let angle = (gy.atan2(gx) - orientation).rem_euclid(2.0 * PI);
            let obin = angle * bins_per_rad;
            let v = mag * weight;

            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            let (r0, c0) = ((r0 + 1.0) as usize, (c0 + 1.0) as usize);
            let o0 = o0 as usize % ORI_BINS;
            for (dr, wr) in [(0, 1.0 - fr), (1, fr)] {
                for (dc, wc) in [(0, 1.0 - fc), (1, fc)] {
                    for (dor, wo) in [(0, 1.0 - fo), (1, fo)] {
                        hist[idx(r0 + dr, c0 + dc, o0 + dor)] += v * wr * wc * wo;
                    }
                }
            }
        }
    }
    let mut out = Vec::with_capacity(DESCRIPTOR_LEN);
    for r in 0..GRID {
        for c in 0..GRID {
            for o in 0..ORI_BINS {
                let mut v = hist[idx(r + 1, c + 1, o)];
                if o == 0 {
                    v += hist[idx(r + 1, c + 1, ORI_BINS)];
                }
                out.push(v);
            }
        }
    }
    clamp_normalize(&out)
}

/// Unit-normalizes, then caps every component at 0.2 while keeping unit norm.
///
/// Repeated clamp-and-renormalize converges to capping the largest k entries
/// and scaling the rest; this solves for that fixed point directly. Vectors
/// with fewer than 26 non-zero entries cannot satisfy both constraints.
pub(crate) fn clamp_normalize(v: &[f64]) -> Option<Vec<f32>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return None;
    }
    let cap = CLAMP as f64;
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut rest: f64 = v.iter().map(|x| x * x).sum();
    for k in 0..v.len() {
        let budget = 1.0 - k as f64 * cap * cap;
        if budget <= 0.0 || rest <= 0.0 {
            return None;
        }
        let scale = (budget / rest).sqrt();
        if v[order[k]] * scale <= cap {
            let mut out = vec![0f32; v.len()];
            for (rank, &i) in order.iter().enumerate() {
                out[i] = if rank < k { CLAMP } else { (v[i] * scale) as f32 };
            }
            // f32 rounding can leave the norm a few ulps off; one rescale fixes it
            let n = out.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            for x in &mut out {
                *x = ((*x as f64) / n).min(cap) as f32;
            }
            return Some(out);
        }
        rest -= v[order[k]] * v[order[k]];
    }
    None
}

fn distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f32>()
        .sqrt() as f64
}

/// Lowe ratio test applied from both sides, so a pair is kept only when each
/// descriptor is the other's clear nearest neighbour; then a greedy one-to-one
/// pass in ascending distance. The kept set, and so the score, is symmetric.
pub fn match_descriptors(a: &[Descriptor], b: &[Descriptor], ratio: f64) -> MatchResult {
    if a.is_empty() || b.is_empty() {
        return MatchResult {
            pairs: Vec::new(),
            score: 0.0,
        };
    }
    let nb = b.len();
    let dist: Vec<f64> = a
        .iter()
        .flat_map(|da| b.iter().map(move |db| distance(&da.vector, &db.vector)))
        .collect();
    // nearest and second-nearest a for every b; ties go to the lower index
    let mut back = vec![(usize::MAX, f64::INFINITY, f64::INFINITY); nb];
    for i in 0..a.len() {
        for (j, slot) in back.iter_mut().enumerate() {
            let d = dist[i * nb + j];
            if d < slot.1 {
                *slot = (i, d, slot.1);
            } else if d < slot.2 {
                slot.2 = d;
            }
        }
    }
    let mut candidates: Vec<(usize, usize, f64)> = (0..a.len())
        .filter_map(|i| {
            let row = &dist[i * nb..(i + 1) * nb];
            let mut best = (usize::MAX, f64::INFINITY);
            let mut second = f64::INFINITY;
            for (j, &d) in row.iter().enumerate() {
                if d < best.1 {
                    second = best.1;
                    best = (j, d);
                } else if d < second {
                    second = d;
                }
            }
            // d1 = d2 = 0 is ambiguous, not a match
            let (rev_i, _, rev_second) = back[best.0];
            let mutual = rev_i == i && best.1 < ratio * rev_second;
            (best.1 < ratio * second && mutual).then_some((i, best.0, best.1))
        })
        .collect();
    candidates.sort_by(|x, y| x.2.total_cmp(&y.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (i, j, d) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j, d));
        }
    }
    let score = pairs.len() as f64 / a.len().min(b.len()) as f64;
    MatchResult { pairs, score }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(size: u32, cell: u32) -> GrayImage {
        GrayImage::from_fn(size, size, |x, y| image::Luma([if (x / cell + y / cell) % 2 == 0 { 20 } else { 235 }]))
    }

    fn blobs(w: u32, h: u32, seed: u64) -> GrayImage {
        crate::fixture::synth_photo(seed, w, h)
    }

    #[test]
    fn uniform_image_has_no_keypoints() {
        let img = GrayImage::from_pixel(64, 64, image::Luma([128]));
        assert!(detect_keypoints(&img, &FeatureParams::default()).unwrap().is_empty());
    }

    #[test]
    fn small_image_is_rejected() {
        let img = GrayImage::new(31, 64);
        assert!(detect_keypoints(&img, &FeatureParams::default()).is_err());
    }

    #[test]
    fn checkerboard_yields_keypoints() {
        let kps = detect_keypoints(&checkerboard(256, 32), &FeatureParams::default()).unwrap();
        assert!(kps.len() >= 20, "{}", kps.len());
        for k in &kps {
            assert!(k.x >= 0.0 && k.x < 256.0 && k.y >= 0.0 && k.y < 256.0);
            assert!(k.scale > 0.0);
            assert!((0.0..2.0 * PI).contains(&k.orientation));
        }
    }

    #[test]
    fn descriptors_are_clamped_unit_vectors() {
        let img = blobs(200, 160, 7);
        let d = extract_features(&img, &FeatureParams::default()).unwrap();
        assert!(d.len() >= 20, "{}", d.len());
        for desc in &d {
            assert_eq!(desc.vector.len(), DESCRIPTOR_LEN);
            let n: f64 = desc.vector.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6, "{n}");
            assert!(desc.vector.iter().all(|&x| (0.0..=CLAMP).contains(&x)));
        }
    }

    #[test]
    fn clamp_normalize_fixed_point() {
        let mut v = vec![0.01; 128];
        v[0] = 10.0;
        v[1] = 5.0;
        let out = clamp_normalize(&v).unwrap();
        assert_eq!(out[0], CLAMP);
        assert_eq!(out[1], CLAMP);
        assert!(clamp_normalize(&[1.0; 10]).is_none());
        assert!(clamp_normalize(&[0.0; 128]).is_none());
    }

    #[test]
    fn self_match_is_perfect() {
        let img = blobs(200, 160, 11);
        let d = extract_features(&img, &FeatureParams::default()).unwrap();
        let r = match_descriptors(&d, &d, 0.75);
        assert!(r.score >= 0.9, "{}", r.score);
        assert!(r.pairs.windows(2).all(|p| p[0].2 <= p[1].2));
    }

    #[test]
    fn empty_side_scores_zero() {
        let img = blobs(120, 120, 3);
        let d = extract_features(&img, &FeatureParams::default()).unwrap();
        let r = match_descriptors(&d, &[], 0.75);
        assert_eq!(r.score, 0.0);
        assert!(r.pairs.is_empty());
    }

    #[test]
    fn unrelated_images_score_low() {
        let p = FeatureParams::default();
        let s = image_similarity(&blobs(200, 160, 1), &blobs(200, 160, 2), &p).unwrap();
        assert!(s < 0.1, "{s}");
    }

    #[test]
    fn brightness_shift_still_matches() {
        let a = blobs(200, 160, 5);
        let mut b = a.clone();
        for p in b.pixels_mut() {
            p.0[0] = p.0[0].saturating_add(30);
        }
        let s = image_similarity(&a, &b, &FeatureParams::default()).unwrap();
        assert!(s >= 0.5, "{s}");
    }
}
