//! Gaussian and difference-of-Gaussians pyramids.

use image::GrayImage;

/// Single-channel float image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Plane {
    pub w: usize,
    pub h: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn from_gray(img: &GrayImage) -> Self {
        Plane {
            w: img.width() as usize,
            h: img.height() as usize,
            data: img.as_raw().iter().map(|&v| v as f32 / 255.0).collect(),
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.w + x]
    }

    pub fn sub(&self, other: &Plane) -> Plane {
        Plane {
            w: self.w,
            h: self.h,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Every second pixel in both directions.
    pub fn halve(&self) -> Plane {
        let (w, h) = (self.w / 2, self.h / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(self.at(2 * x, 2 * y));
            }
        }
        Plane { w, h, data }
    }

    pub fn blur(&self, sigma: f64) -> Plane {
        if sigma <= 0.0 {
            return self.clone();
        }
        let kernel = gaussian_kernel(sigma);
        let r = (kernel.len() / 2) as isize;
        let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
        let mut tmp = vec![0f32; self.data.len()];
        for y in 0..self.h {
            let row = &self.data[y * self.w..(y + 1) * self.w];
            for x in 0..self.w {
                let mut acc = 0f32;
                for (k, &kv) in kernel.iter().enumerate() {
                    acc += kv * row[clamp(x as isize + k as isize - r, self.w)];
                }
                tmp[y * self.w + x] = acc;
            }
        }
        let mut out = vec![0f32; self.data.len()];
        for y in 0..self.h {
            for (k, &kv) in kernel.iter().enumerate() {
                let sy = clamp(y as isize + k as isize - r, self.h);
                let src = &tmp[sy * self.w..(sy + 1) * self.w];
                let dst = &mut out[y * self.w..(y + 1) * self.w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += kv * s;
                }
            }
        }
        Plane {
            w: self.w,
            h: self.h,
            data: out,
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let r = (3.0 * sigma).ceil().max(1.0) as i64;
    let raw: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| (v / sum) as f32).collect()
}

/// Blur assumed to be present in the input image.
const INPUT_SIGMA: f64 = 0.5;

pub(crate) struct Pyramid {
    /// `gauss[o]` holds `scales + 3` images of octave `o`.
    pub gauss: Vec<Vec<Plane>>,
    /// `dog[o]` holds `scales + 2` differences.
    pub dog: Vec<Vec<Plane>>,
    pub scales: usize,
    pub sigma: f64,
}

/// Smallest octave edge worth searching.
const MIN_OCTAVE_EDGE: usize = 16;

impl Pyramid {
    pub fn build(base: &Plane, octaves: usize, scales: usize, sigma: f64) -> Pyramid {
        let first = base.blur((sigma * sigma - INPUT_SIGMA * INPUT_SIGMA).max(0.01).sqrt());
        let k = 2f64.powf(1.0 / scales as f64);
        let increments: Vec<f64> = (1..scales + 3)
            .map(|i| {
                let prev = sigma * k.powi(i as i32 - 1);
                let cur = prev * k;
                (cur * cur - prev * prev).sqrt()
            })
            .collect();
        let mut gauss: Vec<Vec<Plane>> = Vec::new();
        let mut seed = first;
        for o in 0..octaves {
            if seed.w.min(seed.h) < MIN_OCTAVE_EDGE {
                break;
            }
            let mut layers = Vec::with_capacity(scales + 3);
            layers.push(seed);
            for inc in &increments {
                let next = layers.last().expect("seeded").blur(*inc);
                layers.push(next);
            }
            seed = layers[scales].halve();
            gauss.push(layers);
            let _ = o;
        }
        let dog = gauss
            .iter()
            .map(|layers| layers.windows(2).map(|p| p[1].sub(&p[0])).collect())
            .collect();
        Pyramid {
            gauss,
            dog,
            scales,
            sigma,
        }
    }

    /// Blur of layer `layer` (fractional) within an octave, in octave pixels.
    pub fn layer_sigma(&self, layer: f64) -> f64 {
        self.sigma * 2f64.powf(layer / self.scales as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_sums_to_one() {
        let k = gaussian_kernel(1.6);
        assert_eq!(k.len(), 11);
        assert!((k.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn blur_preserves_constant() {
        let p = Plane {
            w: 20,
            h: 10,
            data: vec![0.25; 200],
        };
        let b = p.blur(2.0);
        assert!(b.data.iter().all(|v| (v - 0.25).abs() < 1e-6));
    }

    #[test]
    fn pyramid_shape() {
        let p = Plane {
            w: 128,
            h: 160,
            data: vec![0.5; 128 * 160],
        };
        let pyr = Pyramid::build(&p, 4, 3, 1.6);
        assert_eq!(pyr.gauss.len(), 4);
        assert_eq!(pyr.gauss[0].len(), 6);
        assert_eq!(pyr.dog[0].len(), 5);
        assert_eq!((pyr.gauss[3][0].w, pyr.gauss[3][0].h), (16, 20));
    }
}
