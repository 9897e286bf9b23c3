//! Small raster helpers shared by the layout, OCR and fixture code.

use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

/// Pixel value below which a grayscale pixel counts as ink.
pub const INK_THRESHOLD: u8 = 128;

/// Axis-aligned rectangle in pixel coordinates. Serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl From<[u32; 4]> for Rect {
    fn from(v: [u32; 4]) -> Self {
        Rect::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Rect> for [u32; 4] {
    fn from(r: Rect) -> Self {
        [r.x, r.y, r.w, r.h]
    }
}

impl Rect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn union(&self, other: &Rect) -> Rect {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = self.right().max(other.right());
        let y1 = self.bottom().max(other.bottom());
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection(other).map_or(0, |r| r.area());
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Shrinks by `by` pixels on every side; `None` when nothing is left.
    pub fn inset(&self, by: u32) -> Option<Rect> {
        (self.w > 2 * by && self.h > 2 * by)
            .then(|| Rect::new(self.x + by, self.y + by, self.w - 2 * by, self.h - 2 * by))
    }

    pub fn grow(&self, by: u32) -> Rect {
        let x = self.x.saturating_sub(by);
        let y = self.y.saturating_sub(by);
        Rect::new(x, y, self.right() + by - x, self.bottom() + by - y)
    }

    pub fn contains(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    /// Overlap area once both rectangles are shrunk by `tolerance` pixels.
    pub fn overlaps_beyond(&self, other: &Rect, tolerance: u32) -> bool {
        match (self.inset(tolerance), other.inset(tolerance)) {
            (Some(a), Some(b)) => a.intersection(&b).is_some(),
            _ => false,
        }
    }

    pub fn within(&self, width: u32, height: u32) -> bool {
        !self.is_empty() && self.right() <= width && self.bottom() <= height
    }

    pub fn hull<'a>(rects: impl IntoIterator<Item = &'a Rect>) -> Option<Rect> {
        rects.into_iter().copied().reduce(|a, b| a.union(&b))
    }
}

/// ITU-R 601 luma in integer arithmetic, rounded half up.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

pub fn rgb_to_gray(rgb: &RgbImage) -> GrayImage {
    GrayImage::from_fn(rgb.width(), rgb.height(), |x, y| {
        let p = rgb.get_pixel(x, y).0;
        image::Luma([luma(p[0], p[1], p[2])])
    })
}

pub fn crop(img: &GrayImage, r: Rect) -> GrayImage {
    image::imageops::crop_imm(img, r.x, r.y, r.w, r.h).to_image()
}

/// Row-major boolean ink mask with cheap projection queries.
pub struct InkMask {
    pub width: u32,
    pub height: u32,
    bits: Vec<bool>,
}

impl InkMask {
    pub fn new(img: &GrayImage) -> Self {
        let bits = img.as_raw().iter().map(|&v| v < INK_THRESHOLD).collect();
        InkMask {
            width: img.width(),
            height: img.height(),
            bits,
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    pub fn count(&self, r: Rect) -> u64 {
        (r.y..r.bottom())
            .map(|y| self.row_count(y, r.x, r.right()) as u64)
            .sum()
    }

    pub fn row_count(&self, y: u32, x0: u32, x1: u32) -> u32 {
        let start = (y * self.width) as usize;
        self.bits[start + x0 as usize..start + x1 as usize]
            .iter()
            .filter(|&&b| b)
            .count() as u32
    }

    pub fn col_count(&self, x: u32, y0: u32, y1: u32) -> u32 {
        (y0..y1).filter(|&y| self.get(x, y)).count() as u32
    }

    pub fn longest_row_run(&self, y: u32, x0: u32, x1: u32) -> u32 {
        longest_run((x0..x1).map(|x| self.get(x, y)))
    }

    pub fn longest_col_run(&self, x: u32, y0: u32, y1: u32) -> u32 {
        longest_run((y0..y1).map(|y| self.get(x, y)))
    }

    /// Tight bounding box of the ink inside `r`.
    pub fn trim(&self, r: Rect) -> Option<Rect> {
        let rows: Vec<u32> = (r.y..r.bottom())
            .filter(|&y| self.row_count(y, r.x, r.right()) > 0)
            .collect();
        let (&y0, &y1) = (rows.first()?, rows.last()?);
        let x0 = (r.x..r.right()).find(|&x| self.col_count(x, y0, y1 + 1) > 0)?;
        let x1 = (r.x..r.right())
            .rev()
            .find(|&x| self.col_count(x, y0, y1 + 1) > 0)?;
        Some(Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    pub fn density(&self, r: Rect) -> f64 {
        if r.is_empty() {
            0.0
        } else {
            self.count(r) as f64 / r.area() as f64
        }
    }
}

fn longest_run(bits: impl Iterator<Item = bool>) -> u32 {
    let mut best = 0;
    let mut cur = 0;
    for b in bits {
        if b {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luma_rounds_half_up() {
        assert_eq!(luma(0, 0, 0), 0);
        assert_eq!(luma(255, 255, 255), 255);
        // 0.299 * 100 = 29.9 -> 30
        assert_eq!(luma(100, 0, 0), 30);
        // 0.114 * 5 = 0.57 -> 1
        assert_eq!(luma(0, 0, 5), 1);
        // 0.587 * 1 + 0.114 * 8 = 1.499 -> 1
        assert_eq!(luma(0, 1, 8), 1);
    }

    #[test]
    fn iou_of_disjoint_and_identical() {
        let a = Rect::new(0, 0, 10, 10);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&Rect::new(20, 20, 5, 5)), 0.0);
        let b = Rect::new(5, 0, 10, 10);
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn trim_finds_ink_bbox() {
        let mut img = GrayImage::from_pixel(40, 40, image::Luma([255]));
        for y in 10..15 {
            for x in 3..30 {
                img.put_pixel(x, y, image::Luma([0]));
            }
        }
        let mask = InkMask::new(&img);
        assert_eq!(
            mask.trim(Rect::new(0, 0, 40, 40)),
            Some(Rect::new(3, 10, 27, 5))
        );
        assert_eq!(mask.trim(Rect::new(0, 20, 40, 20)), None);
    }
}
