//! Procedural stand-ins for press photos.

use image::{GrayImage, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn value_noise(rng: &mut ChaCha8Rng, w: u32, h: u32, cell: u32) -> Vec<f32> {
    let gw = w / cell + 2;
    let gh = h / cell + 2;
    let grid: Vec<f32> = (0..gw * gh).map(|_| rng.gen::<f32>()).collect();
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        let gy = y as f32 / cell as f32;
        let (y0, fy) = (gy.floor() as u32, gy.fract());
        let fy = fy * fy * (3.0 - 2.0 * fy);
        for x in 0..w {
            let gx = x as f32 / cell as f32;
            let (x0, fx) = (gx.floor() as u32, gx.fract());
            let fx = fx * fx * (3.0 - 2.0 * fx);
            let g = |xx: u32, yy: u32| grid[(yy * gw + xx) as usize];
            let top = g(x0, y0) * (1.0 - fx) + g(x0 + 1, y0) * fx;
            let bottom = g(x0, y0 + 1) * (1.0 - fx) + g(x0 + 1, y0 + 1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Dark textured background with bright shapes; every seed gives a distinct
/// picture with plenty of blob and corner structure.
pub fn synth_photo(seed: u64, w: u32, h: u32) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = [(16, 0.4f32), (8, 0.35), (4, 0.25)];
    let mut acc = vec![0f32; (w * h) as usize];
    for (cell, amp) in layers {
        for (a, v) in acc.iter_mut().zip(value_noise(&mut rng, w, h, cell)) {
            *a += amp * v;
        }
    }
    let base = rng.gen_range(0.0..25.0f32);
    let mut img = GrayImage::from_fn(w, h, |x, y| Luma([(base + 150.0 * acc[(y * w + x) as usize]).min(255.0) as u8]));
    for _ in 0..rng.gen_range(40..60) {
        let v = rng.gen_range(10..=215u8);
        let cx = rng.gen_range(0..w) as i64;
        let cy = rng.gen_range(0..h) as i64;
        let r = rng.gen_range(2..(w.min(h) as i64 / 8).max(3));
        let rect = rng.gen_bool(0.5);
        let (rw, rh) = (r, rng.gen_range(2..=r));
        for y in (cy - r).max(0)..(cy + r).min(h as i64) {
            for x in (cx - r).max(0)..(cx + r).min(w as i64) {
                let inside = if rect {
                    (x - cx).abs() <= rw && (y - cy).abs() <= rh
                } else {
                    (x - cx).pow(2) + (y - cy).pow(2) <= r * r
                };
                if inside {
                    img.put_pixel(x as u32, y as u32, Luma([v]));
                }
            }
        }
    }
    image::imageops::blur(&img, 0.6)
}

/// How the second edition's copy of a shared photo differs from the first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Perturbation {
    /// Resize factor in [0.5, 1].
    pub scale: f64,
    /// Added to every pixel, saturating; |brightness| ≤ 40.
    pub brightness: i32,
    /// Content translation in pixels along both axes, edges replicated.
    pub shift: u32,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation { scale: 0.8, brightness: 20, shift: 10 }
    }
}

impl Perturbation {
    pub fn identity() -> Self {
        Perturbation { scale: 1.0, brightness: 0, shift: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.scale) {
            return Err(Error::Config(format!("perturbation scale {} outside [0.5, 1]", self.scale)));
        }
        if self.brightness.abs() > 40 {
            return Err(Error::Config(format!("perturbation brightness {} outside ±40", self.brightness)));
        }
        Ok(())
    }
}

pub fn perturb_photo(img: &GrayImage, p: &Perturbation) -> GrayImage {
    let (w, h) = img.dimensions();
    let nw = ((w as f64 * p.scale).round() as u32).max(1);
    let nh = ((h as f64 * p.scale).round() as u32).max(1);
    let scaled = if (nw, nh) == (w, h) {
        img.clone()
    } else {
        image::imageops::resize(img, nw, nh, image::imageops::FilterType::Triangle)
    };
    let s = p.shift as i64;
    GrayImage::from_fn(nw, nh, |x, y| {
        let sx = (x as i64 - s).clamp(0, nw as i64 - 1) as u32;
        let sy = (y as i64 - s).clamp(0, nh as i64 - 1) as u32;
        let v = scaled.get_pixel(sx, sy)[0] as i32 + p.brightness;
        Luma([v.clamp(0, 255) as u8])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_a_copy() {
        let img = synth_photo(3, 64, 48);
        assert_eq!(perturb_photo(&img, &Perturbation::identity()), img);
    }

    #[test]
    fn default_perturbation_shape() {
        let img = synth_photo(3, 200, 150);
        let out = perturb_photo(&img, &Perturbation::default());
        assert_eq!(out.dimensions(), (160, 120));
        assert!(Perturbation { scale: 0.4, ..Default::default() }.validate().is_err());
        assert!(Perturbation { brightness: -41, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn same_seed_same_photo() {
        assert_eq!(synth_photo(9, 80, 60), synth_photo(9, 80, 60));
        assert_ne!(synth_photo(9, 80, 60), synth_photo(10, 80, 60));
    }
}
