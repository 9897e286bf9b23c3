//! Rasterizes article blocks onto newspaper-like pages.
//!
//! Text is drawn as blocky pseudo-glyphs: the pixels only have to look like
//! lines of type to the segmenter, the words themselves reach the pipeline
//! through the mock OCR ground truth.

use image::{GrayImage, Luma};

use crate::raster::Rect;

pub(crate) const INK: u8 = 25;
pub(crate) const PAPER: u8 = 250;
pub(crate) const HEADLINE_PX: u32 = 28;
pub(crate) const SUBHEAD_PX: u32 = 24;
pub(crate) const BODY_PX: u32 = 12;
const FRAME: u32 = 2;
const PAD: u32 = 10;
const GAP: u32 = 12;

pub(crate) fn blank(w: u32, h: u32) -> GrayImage {
    GrayImage::from_pixel(w, h, Luma([PAPER]))
}

fn cell_width(px: u32) -> u32 {
    (px * 6 / 10).max(4)
}

fn fill(img: &mut GrayImage, x: u32, y: u32, w: u32, h: u32, v: u8) {
    for yy in y..(y + h).min(img.height()) {
        for xx in x..(x + w).min(img.width()) {
            img.put_pixel(xx, yy, Luma([v]));
        }
    }
}

fn glyph(img: &mut GrayImage, c: char, x: u32, y: u32, px: u32) {
    let w = cell_width(px) - 1;
    let t = (px / 8).max(1);
    let top = y + px / 5;
    let h = px - px / 5;
    let mut bits = (c as u32).wrapping_mul(2_654_435_761) >> 27;
    if bits & 0b11111 == 0 {
        bits = 0b01000;
    }
    if bits & 1 != 0 {
        fill(img, x, top, t, h, INK);
    }
    if bits & 2 != 0 {
        fill(img, x + w - t, top, t, h, INK);
    }
    if bits & 4 != 0 {
        fill(img, x, top, w, t, INK);
    }
    if bits & 8 != 0 {
        fill(img, x, top + h / 2 - t / 2, w, t, INK);
    }
    if bits & 16 != 0 {
        fill(img, x, top + h - t, w, t, INK);
    }
}

/// Greedy word wrap by character cells.
pub(crate) fn wrap(text: &str, px: u32, width: u32) -> Vec<String> {
    let per_line = (width / cell_width(px)).max(1) as usize;
    let mut lines: Vec<String> = Vec::new();
    let mut cur = String::new();
    for word in text.split_whitespace() {
        let need = cur.chars().count() + usize::from(!cur.is_empty()) + word.chars().count();
        if !cur.is_empty() && need > per_line {
            lines.push(std::mem::take(&mut cur));
        }
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.push_str(word);
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    lines
}

fn pitch(px: u32) -> u32 {
    px * 3 / 2
}

/// Height of `text` wrapped into `width`, with no trailing leading.
pub(crate) fn text_height(text: &str, px: u32, width: u32) -> u32 {
    let n = wrap(text, px, width).len() as u32;
    if n == 0 {
        0
    } else {
        (n - 1) * pitch(px) + px
    }
}

/// Draws wrapped text and returns its tight box.
pub(crate) fn draw_text(img: &mut GrayImage, text: &str, x: u32, y: u32, px: u32, width: u32) -> Rect {
    let lines = wrap(text, px, width);
    let cw = cell_width(px);
    let mut widest = 0;
    for (i, line) in lines.iter().enumerate() {
        let ly = y + i as u32 * pitch(px);
        let mut cx = x;
        for c in line.chars() {
            if !c.is_whitespace() {
                glyph(img, c, cx, ly, px);
            }
            cx += cw;
        }
        widest = widest.max(cx - x);
    }
    Rect::new(x, y, widest.max(1), text_height(text, px, width).max(1))
}

pub(crate) fn draw_frame(img: &mut GrayImage, r: Rect) {
    fill(img, r.x, r.y, r.w, FRAME, INK);
    fill(img, r.x, r.bottom() - FRAME, r.w, FRAME, INK);
    fill(img, r.x, r.y, FRAME, r.h, INK);
    fill(img, r.right() - FRAME, r.y, FRAME, r.h, INK);
}

pub(crate) fn paste(img: &mut GrayImage, photo: &GrayImage, x: u32, y: u32) -> Rect {
    image::imageops::replace(img, photo, x as i64, y as i64);
    Rect::new(x, y, photo.width(), photo.height())
}

/// Text and pictures of one article block, ready to lay out.
#[derive(Debug, Clone)]
pub(crate) struct BlockContent {
    pub headline: String,
    pub photo: Option<(GrayImage, String)>,
    pub content: String,
    pub child: Option<Box<BlockContent>>,
}

/// Where each part of a block landed.
#[derive(Debug, Clone, Default)]
pub(crate) struct BlockBoxes {
    pub frame: Rect,
    pub headline: Rect,
    pub image: Option<Rect>,
    pub caption: Option<Rect>,
    pub content: Option<Rect>,
    pub child: Option<Box<BlockBoxes>>,
}

fn headline_px(nested: bool) -> u32 {
    if nested {
        SUBHEAD_PX
    } else {
        HEADLINE_PX
    }
}

pub(crate) fn block_height(b: &BlockContent, width: u32, nested: bool) -> u32 {
    let inner = width - 2 * (FRAME + PAD);
    let mut h = 2 * (FRAME + PAD) + text_height(&b.headline, headline_px(nested), inner);
    if let Some((photo, caption)) = &b.photo {
        h += GAP + photo.height() + GAP + text_height(caption, BODY_PX, photo.width().min(inner));
    }
    if !b.content.is_empty() {
        h += GAP + text_height(&b.content, BODY_PX, inner);
    }
    if let Some(c) = &b.child {
        h += GAP + block_height(c, inner, true);
    }
    h
}

pub(crate) fn draw_block(img: &mut GrayImage, b: &BlockContent, x: u32, y: u32, width: u32, nested: bool) -> BlockBoxes {
    let frame = Rect::new(x, y, width, block_height(b, width, nested));
    draw_frame(img, frame);
    let ix = x + FRAME + PAD;
    let inner = width - 2 * (FRAME + PAD);
    let mut cy = y + FRAME + PAD;
    let headline = draw_text(img, &b.headline, ix, cy, headline_px(nested), inner);
    cy = headline.bottom();
    let mut out = BlockBoxes {
        frame,
        headline,
        ..Default::default()
    };
    if let Some((photo, caption)) = &b.photo {
        cy += GAP;
        let im = paste(img, photo, ix, cy);
        cy = im.bottom() + GAP;
        let cap = draw_text(img, caption, ix, cy, BODY_PX, photo.width().min(inner));
        cy = cap.bottom();
        out.image = Some(im);
        out.caption = Some(cap);
    }
    if !b.content.is_empty() {
        cy += GAP;
        let c = draw_text(img, &b.content, ix, cy, BODY_PX, inner);
        cy = c.bottom();
        out.content = Some(c);
    }
    if let Some(child) = &b.child {
        cy += GAP;
        out.child = Some(Box::new(draw_block(img, child, ix, cy, inner, true)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_respects_width() {
        let lines = wrap("aaaa bbbb cccc dddd", BODY_PX, 7 * 10);
        assert_eq!(lines, vec!["aaaa bbbb", "cccc dddd"]);
        assert!(wrap("", BODY_PX, 100).is_empty());
    }

    #[test]
    fn block_boxes_stay_inside_frame() {
        let mut img = blank(600, 800);
        let b = BlockContent {
            headline: "head line".into(),
            photo: Some((GrayImage::from_pixel(100, 80, Luma([90])), "a caption.".into())),
            content: "some words here. more words.".into(),
            child: Some(Box::new(BlockContent {
                headline: "inner".into(),
                photo: None,
                content: "x y z.".into(),
                child: None,
            })),
        };
        let boxes = draw_block(&mut img, &b, 20, 20, 540, false);
        let inner = boxes.child.as_ref().unwrap();
        for r in [boxes.headline, boxes.image.unwrap(), boxes.caption.unwrap(), boxes.content.unwrap(), inner.frame] {
            assert!(boxes.frame.contains(&r), "{r:?} in {:?}", boxes.frame);
        }
        assert!(inner.frame.contains(&inner.content.unwrap()));
        assert_eq!(boxes.frame.h, block_height(&b, 540, false));
        assert!(boxes.content.unwrap().bottom() <= inner.frame.y);
    }
}
