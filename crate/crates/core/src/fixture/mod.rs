//! Synthetic bilingual newspaper bundles with ground truth.
//!
//! Two pseudo-language editions of one date are rendered from a shared
//! concept inventory. Article pairs share a photo (perturbed in the right
//! edition), their sentences are concept-for-concept translations, and the
//! pivot lexicons that map both vocabularies onto the pivot glosses are
//! written alongside, so every pairing the pipeline should find is known.

mod lang;
mod photo;
mod render;
pub mod score;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use image::GrayImage;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use photo::{perturb_photo, synth_photo, Perturbation};
pub use score::{
    boundary_recall, match_articles, rename_article_pairs, rename_sentence_pairs, score_article_pairs,
    score_sentence_pairs, Prf,
};

use crate::error::{Error, Result};
use crate::layout::{image_file_name, AnnotatedArticle, AnnotatedRoi, RoiKind};
use crate::ocr::TruthEntry;
use crate::page_store::{ManifestEntry, PageImage, DEFAULT_DPI};
use crate::raster::Rect;
use crate::sentence::PivotLexicon;
use lang::Vocabulary;
use render::{block_height, blank, draw_block, BlockBoxes, BlockContent};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LAYOUT_FILE: &str = "layout.json";
pub const OCR_TRUTH_FILE: &str = "ocr_truth.json";
pub const TRUTH_FILE: &str = "truth.json";

const MARGIN: u32 = 40;
const GUTTER: u32 = 40;
const BLOCK_GAP: u32 = 30;
const QUESTION_RATE: f64 = 0.1;
const UNPAIRED_PHOTO_RATE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureSpec {
    pub languages: (String, String),
    pub date: NaiveDate,
    pub left_articles: usize,
    pub right_articles: usize,
    /// Article pairs that share a photo.
    pub shared_images: usize,
    /// Shared pairs whose parents each carry one embedded article.
    pub embedded_pairs: usize,
    /// Inclusive range of content sentences per article.
    pub sentences: (usize, usize),
    /// Inclusive range of words per content sentence.
    pub words: (usize, usize),
    /// Chance that the right edition drops one content sentence of a pair.
    pub omission_rate: f64,
    pub vocabulary: usize,
    /// Share of the vocabulary kept in the partial lexicons.
    pub lexicon_coverage: f64,
    pub perturbation: Perturbation,
    pub page_size: (u32, u32),
    pub photo_size: (u32, u32),
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            languages: ("xk".into(), "xm".into()),
            date: NaiveDate::from_ymd_opt(2024, 3, 5).expect("valid date"),
            left_articles: 24,
            right_articles: 24,
            shared_images: 20,
            embedded_pairs: 2,
            sentences: (3, 8),
            words: (3, 26),
            omission_rate: 0.25,
            vocabulary: 1500,
            lexicon_coverage: 0.6,
            perturbation: Perturbation::default(),
            page_size: (1200, 1600),
            photo_size: (240, 180),
        }
    }
}

impl FixtureSpec {
    /// Reads a spec from TOML; omitted fields take their defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: FixtureSpec = toml::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("fixture spec: {m}")));
        if self.languages.0 == self.languages.1 || self.languages.0.is_empty() || self.languages.1.is_empty() {
            return bad("needs two distinct language codes".into());
        }
        if self.shared_images > self.left_articles.min(self.right_articles) {
            return bad(format!(
                "{} shared images but only {} left and {} right articles",
                self.shared_images, self.left_articles, self.right_articles
            ));
        }
        if self.embedded_pairs > self.shared_images {
            return bad(format!(
                "{} embedded pairs need as many shared pairs, got {}",
                self.embedded_pairs, self.shared_images
            ));
        }
        for (name, (lo, hi)) in [("sentences", self.sentences), ("words", self.words)] {
            if lo == 0 || lo > hi {
                return bad(format!("{name} range {lo}..={hi} is empty or starts at 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.omission_rate) || !(0.0..=1.0).contains(&self.lexicon_coverage) {
            return bad("rates must lie in [0, 1]".into());
        }
        if self.vocabulary < 50 {
            return bad("vocabulary needs at least 50 concepts".into());
        }
        self.perturbation.validate()?;
        let (pw, ph) = self.page_size;
        let (fw, fh) = self.photo_size;
        if fw < 64 || fh < 64 {
            return bad("photos must be at least 64x64".into());
        }
        if column_width(pw) < fw + 40 || ph < 2 * MARGIN + fh + 200 {
            return bad(format!("page {pw}x{ph} too small for {fw}x{fh} photos"));
        }
        Ok(())
    }
}

fn column_width(page_w: u32) -> u32 {
    page_w.saturating_sub(2 * MARGIN + GUTTER) / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruthOrigin {
    ImagePivot,
    HeadlinePivot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthArticlePair {
    pub left: String,
    pub right: String,
    pub origin: TruthOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthSentencePair {
    pub left_article: String,
    pub right_article: String,
    pub roi_kind: RoiKind,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthArticle {
    pub article_id: String,
    pub language: String,
    pub page_id: String,
    pub headline: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    pub content: String,
    /// Byte spans of the content sentences.
    pub sentence_spans: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthPage {
    pub file: String,
    pub language: String,
    pub page_number: u32,
    pub page_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureTruth {
    pub seed: u64,
    pub spec: FixtureSpec,
    pub pages: Vec<TruthPage>,
    pub articles: Vec<TruthArticle>,
    pub article_pairs: Vec<TruthArticlePair>,
    /// `(left image file, right image file)` of every shared photo.
    pub image_pairs: Vec<(String, String)>,
    pub sentence_pairs: Vec<TruthSentencePair>,
}

impl FixtureTruth {
    pub fn page_count(&self, language: &str) -> usize {
        self.pages.iter().filter(|p| p.language == language).count()
    }
}

#[derive(Debug, Clone)]
pub struct RenderedPage {
    pub file: String,
    pub language: String,
    pub page_number: u32,
    pub image: GrayImage,
}

#[derive(Debug, Clone)]
pub struct FixtureBundle {
    pub pages: Vec<RenderedPage>,
    pub manifest: Vec<ManifestEntry>,
    pub layout: Vec<AnnotatedArticle>,
    pub ocr_truth: Vec<TruthEntry>,
    pub truth: FixtureTruth,
    /// Complete `(left, right)` lexicons.
    pub lexicons: (PivotLexicon, PivotLexicon),
    /// `(left, right)` lexicons covering `spec.lexicon_coverage` of the vocabulary.
    pub partial_lexicons: (PivotLexicon, PivotLexicon),
}

/// Paths of a bundle written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct BundlePaths {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub layout: PathBuf,
    pub ocr_truth: PathBuf,
    pub truth: PathBuf,
    pub lexicons: (PathBuf, PathBuf),
    pub partial_lexicons: (PathBuf, PathBuf),
}

impl BundlePaths {
    pub fn new(dir: &Path, languages: &(String, String)) -> Self {
        let lex = |l: &str, partial: bool| {
            dir.join(if partial {
                format!("lexicon.{l}.partial.tsv")
            } else {
                format!("lexicon.{l}.tsv")
            })
        };
        BundlePaths {
            dir: dir.to_path_buf(),
            manifest: dir.join(MANIFEST_FILE),
            layout: dir.join(LAYOUT_FILE),
            ocr_truth: dir.join(OCR_TRUTH_FILE),
            truth: dir.join(TRUTH_FILE),
            lexicons: (lex(&languages.0, false), lex(&languages.1, false)),
            partial_lexicons: (lex(&languages.0, true), lex(&languages.1, true)),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

impl FixtureBundle {
    pub fn write(&self, dir: &Path) -> Result<BundlePaths> {
        let paths = BundlePaths::new(dir, &self.truth.spec.languages);
        for p in &self.pages {
            let path = dir.join(&p.file);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            p.image.save(&path)?;
        }
        write_file(&paths.manifest, &serde_json::to_vec_pretty(&self.manifest)?)?;
        write_file(&paths.layout, &serde_json::to_vec_pretty(&self.layout)?)?;
        write_file(&paths.ocr_truth, &serde_json::to_vec_pretty(&self.ocr_truth)?)?;
        write_file(&paths.truth, &serde_json::to_vec_pretty(&self.truth)?)?;
        write_file(&paths.lexicons.0, self.lexicons.0.to_tsv().as_bytes())?;
        write_file(&paths.lexicons.1, self.lexicons.1.to_tsv().as_bytes())?;
        write_file(&paths.partial_lexicons.0, self.partial_lexicons.0.to_tsv().as_bytes())?;
        write_file(&paths.partial_lexicons.1, self.partial_lexicons.1.to_tsv().as_bytes())?;
        Ok(paths)
    }
}

pub fn read_truth(path: &Path) -> Result<FixtureTruth> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&raw)?)
}

/// Text of one article in one edition.
#[derive(Debug, Clone)]
struct ArticleText {
    headline: String,
    caption: Option<String>,
    sentences: Vec<String>,
    photo: Option<GrayImage>,
    child: Option<Box<ArticleText>>,
}

impl ArticleText {
    fn content(&self) -> String {
        self.sentences.join(" ")
    }

    fn block(&self) -> BlockContent {
        BlockContent {
            headline: self.headline.clone(),
            photo: self
                .photo
                .clone()
                .map(|p| (p, self.caption.clone().expect("photos carry captions"))),
            content: self.content(),
            child: self.child.as_ref().map(|c| Box::new(c.block())),
        }
    }
}

/// The two editions of one shared story, plus which sentences are translations.
struct StoryPair {
    left: ArticleText,
    right: ArticleText,
    /// `(left index, right index)` of translated content sentences.
    aligned: Vec<(usize, usize)>,
    child_aligned: Vec<(usize, usize)>,
}

struct Writer<'a> {
    vocab: &'a Vocabulary,
    spec: &'a FixtureSpec,
}

impl Writer<'_> {
    fn ends(&self, rng: &mut ChaCha8Rng) -> (&'static str, &'static str) {
        if rng.gen_bool(QUESTION_RATE) {
            ("?", "?")
        } else {
            (".", "।")
        }
    }

    fn sentence(&self, rng: &mut ChaCha8Rng, words: (usize, usize)) -> (String, String) {
        let n = rng.gen_range(words.0..=words.1);
        let c = self.vocab.concepts(rng, n);
        let (le, re) = self.ends(rng);
        (self.vocab.left_text(&c, le), self.vocab.right_text(&c, re))
    }

    fn headline(&self, rng: &mut ChaCha8Rng) -> (String, String) {
        let n = rng.gen_range(3..=7);
        let c = self.vocab.concepts(rng, n);
        (self.vocab.left_text(&c, ""), self.vocab.right_text(&c, ""))
    }

    fn photo(&self, rng: &mut ChaCha8Rng) -> GrayImage {
        synth_photo(rng.gen(), self.spec.photo_size.0, self.spec.photo_size.1)
    }

    fn story(&self, rng: &mut ChaCha8Rng, with_child: bool) -> StoryPair {
        let (lh, rh) = self.headline(rng);
        let (lc, rc) = self.sentence(rng, (3, 8));
        let n = rng.gen_range(self.spec.sentences.0..=self.spec.sentences.1);
        let (ls, mut rs): (Vec<String>, Vec<String>) = (0..n).map(|_| self.sentence(rng, self.spec.words)).unzip();
        let mut aligned: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        if n >= 2 && rng.gen_bool(self.spec.omission_rate) {
            let d = rng.gen_range(0..n);
            rs.remove(d);
            aligned = (0..n).filter(|&i| i != d).enumerate().map(|(j, i)| (i, j)).collect();
        }
        let photo = self.photo(rng);
        let right_photo = perturb_photo(&photo, &self.spec.perturbation);
        let (mut lchild, mut rchild, mut child_aligned) = (None, None, Vec::new());
        if with_child {
            let (ch_l, ch_r) = self.headline(rng);
            let k = rng.gen_range(1..=3);
            let (cl, cr): (Vec<String>, Vec<String>) = (0..k).map(|_| self.sentence(rng, self.spec.words)).unzip();
            child_aligned = (0..k).map(|i| (i, i)).collect();
            let child = |headline: String, sentences: Vec<String>| {
                Some(Box::new(ArticleText {
                    headline,
                    caption: None,
                    sentences,
                    photo: None,
                    child: None,
                }))
            };
            lchild = child(ch_l, cl);
            rchild = child(ch_r, cr);
        }
        StoryPair {
            left: ArticleText {
                headline: lh,
                caption: Some(lc),
                sentences: ls,
                photo: Some(photo),
                child: lchild,
            },
            right: ArticleText {
                headline: rh,
                caption: Some(rc),
                sentences: rs,
                photo: Some(right_photo),
                child: rchild,
            },
            aligned,
            child_aligned,
        }
    }

    /// An article that appears in one edition only.
    fn single(&self, rng: &mut ChaCha8Rng, left: bool) -> ArticleText {
        let pick = |(l, r): (String, String)| if left { l } else { r };
        let headline = pick(self.headline(rng));
        let n = rng.gen_range(self.spec.sentences.0..=self.spec.sentences.1);
        let sentences = (0..n).map(|_| pick(self.sentence(rng, self.spec.words))).collect();
        let (photo, caption) = if rng.gen_bool(UNPAIRED_PHOTO_RATE) {
            (Some(self.photo(rng)), Some(pick(self.sentence(rng, (3, 8)))))
        } else {
            (None, None)
        };
        ArticleText {
            headline,
            caption,
            sentences,
            photo,
            child: None,
        }
    }
}

/// Where an article ended up: page index within its edition and its boxes.
struct Placed {
    page: usize,
    boxes: BlockBoxes,
}

fn lay_out(articles: &[ArticleText], spec: &FixtureSpec) -> Result<(Vec<GrayImage>, Vec<Placed>)> {
    let (pw, ph) = spec.page_size;
    let cw = column_width(pw);
    let mut pages = vec![blank(pw, ph)];
    let mut placed = Vec::with_capacity(articles.len());
    let (mut col, mut y) = (0u32, MARGIN);
    for a in articles {
        let block = a.block();
        let h = block_height(&block, cw, false);
        if h > ph - 2 * MARGIN {
            return Err(Error::Config(format!(
                "fixture spec: an article needs {h}px, taller than a {ph}px page"
            )));
        }
        if y + h > ph - MARGIN {
            col += 1;
            y = MARGIN;
            if col == 2 {
                col = 0;
                pages.push(blank(pw, ph));
            }
        }
        let x = MARGIN + col * (cw + GUTTER);
        let page = pages.len() - 1;
        let boxes = draw_block(&mut pages[page], &block, x, y, cw, false);
        y += h + BLOCK_GAP;
        placed.push(Placed { page, boxes });
    }
    Ok((pages, placed))
}

fn sentence_spans(sentences: &[String]) -> Vec<(usize, usize)> {
    let mut at = 0;
    sentences
        .iter()
        .map(|s| {
            let span = (at, at + s.len());
            at += s.len() + 1;
            span
        })
        .collect()
}

struct Edition {
    pages: Vec<RenderedPage>,
    page_ids: Vec<String>,
    /// Article id per input position, and the embedded child's id.
    ids: Vec<(String, Option<String>)>,
    layout: Vec<AnnotatedArticle>,
    ocr: Vec<TruthEntry>,
    articles: Vec<TruthArticle>,
}

fn text_roi(kind: RoiKind, bbox: Rect) -> AnnotatedRoi {
    AnnotatedRoi {
        kind,
        bbox,
        seq_index: 0,
        sub_index: (kind == RoiKind::Headline).then_some(0),
    }
}

fn render_edition(language: &str, articles: &[ArticleText], spec: &FixtureSpec) -> Result<Edition> {
    let (images, placed) = lay_out(articles, spec)?;
    let mut pages = Vec::new();
    let mut page_ids = Vec::new();
    for (i, img) in images.into_iter().enumerate() {
        let number = i as u32 + 1;
        let page = PageImage::new(language, spec.date, number, Some(img), None, DEFAULT_DPI)?;
        page_ids.push(page.page_id.clone());
        pages.push(RenderedPage {
            file: format!("pages/{language}-p{number:02}.png"),
            language: language.to_string(),
            page_number: number,
            image: page.gray,
        });
    }
    let mut ed = Edition {
        pages,
        page_ids,
        ids: Vec::new(),
        layout: Vec::new(),
        ocr: Vec::new(),
        articles: Vec::new(),
    };
    let mut per_page: BTreeMap<usize, usize> = BTreeMap::new();
    for (a, p) in articles.iter().zip(&placed) {
        let n = per_page.entry(p.page).or_default();
        *n += 1;
        let page_id = ed.page_ids[p.page].clone();
        let id = format!("{page_id}-a{:02}", *n);
        let child_id = a.child.as_ref().map(|_| format!("{id}e1"));
        emit(&mut ed, language, &page_id, &id, None, a, &p.boxes);
        if let (Some(cid), Some(child), Some(cb)) = (&child_id, &a.child, &p.boxes.child) {
            emit(&mut ed, language, &page_id, cid, Some(&id), child, cb);
        }
        ed.ids.push((id, child_id));
    }
    Ok(ed)
}

fn emit(
    ed: &mut Edition,
    language: &str,
    page_id: &str,
    id: &str,
    parent: Option<&str>,
    a: &ArticleText,
    b: &BlockBoxes,
) {
    let mut rois = vec![text_roi(RoiKind::Headline, b.headline)];
    let mut ocr = vec![(b.headline, a.headline.clone())];
    if let (Some(im), Some(cap), Some(text)) = (b.image, b.caption, &a.caption) {
        rois.push(AnnotatedRoi {
            kind: RoiKind::Image,
            bbox: im,
            seq_index: 0,
            sub_index: None,
        });
        rois.push(text_roi(RoiKind::Caption, cap));
        ocr.push((cap, text.clone()));
    }
    if let Some(c) = b.content {
        rois.push(text_roi(RoiKind::Content, c));
        ocr.push((c, a.content()));
    }
    ed.layout.push(AnnotatedArticle {
        article_id: id.to_string(),
        page_id: page_id.to_string(),
        parent: parent.map(String::from),
        frame: Some(b.frame),
        rois,
    });
    ed.ocr.extend(ocr.into_iter().map(|(bbox, text)| TruthEntry {
        page_id: page_id.to_string(),
        bbox,
        text,
    }));
    ed.articles.push(TruthArticle {
        article_id: id.to_string(),
        language: language.to_string(),
        page_id: page_id.to_string(),
        headline: a.headline.clone(),
        caption: a.caption.clone(),
        content: a.content(),
        sentence_spans: sentence_spans(&a.sentences),
    });
}

/// Generates a bundle; the same `(seed, spec)` always gives identical bytes.
pub fn gen_fixture(seed: u64, spec: &FixtureSpec) -> Result<FixtureBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocabulary::new(&mut rng, spec.vocabulary);
    let writer = Writer { vocab: &vocab, spec };

    let mut left_slots: Vec<usize> = (0..spec.left_articles).collect();
    let mut right_slots: Vec<usize> = (0..spec.right_articles).collect();
    left_slots.shuffle(&mut rng);
    right_slots.shuffle(&mut rng);
    let stories: Vec<StoryPair> = (0..spec.shared_images)
        .map(|k| writer.story(&mut rng, k < spec.embedded_pairs))
        .collect();

    let mut left: Vec<Option<ArticleText>> = vec![None; spec.left_articles];
    let mut right: Vec<Option<ArticleText>> = vec![None; spec.right_articles];
    for (k, s) in stories.iter().enumerate() {
        left[left_slots[k]] = Some(s.left.clone());
        right[right_slots[k]] = Some(s.right.clone());
    }
    let left: Vec<ArticleText> = left
        .into_iter()
        .map(|a| a.unwrap_or_else(|| writer.single(&mut rng, true)))
        .collect();
    let right: Vec<ArticleText> = right
        .into_iter()
        .map(|a| a.unwrap_or_else(|| writer.single(&mut rng, false)))
        .collect();

    let (l1, l2) = &spec.languages;
    let le = render_edition(l1, &left, spec)?;
    let re = render_edition(l2, &right, spec)?;

    let mut article_pairs = Vec::new();
    let mut image_pairs = Vec::new();
    let mut sentence_pairs = Vec::new();
    for (k, s) in stories.iter().enumerate() {
        let (lid, lchild) = &le.ids[left_slots[k]];
        let (rid, rchild) = &re.ids[right_slots[k]];
        article_pairs.push(TruthArticlePair {
            left: lid.clone(),
            right: rid.clone(),
            origin: TruthOrigin::ImagePivot,
        });
        image_pairs.push((image_file_name(lid, 0), image_file_name(rid, 0)));
        let mut add = |la: &str, ra: &str, kind: RoiKind, l: &str, r: &str| {
            sentence_pairs.push(TruthSentencePair {
                left_article: la.to_string(),
                right_article: ra.to_string(),
                roi_kind: kind,
                left: l.to_string(),
                right: r.to_string(),
            })
        };
        add(lid, rid, RoiKind::Headline, &s.left.headline, &s.right.headline);
        if let (Some(a), Some(b)) = (&s.left.caption, &s.right.caption) {
            add(lid, rid, RoiKind::Caption, a, b);
        }
        for &(i, j) in &s.aligned {
            add(lid, rid, RoiKind::Content, &s.left.sentences[i], &s.right.sentences[j]);
        }
        if let (Some(lc), Some(rc), Some(ca), Some(cb)) = (lchild, rchild, &s.left.child, &s.right.child) {
            article_pairs.push(TruthArticlePair {
                left: lc.clone(),
                right: rc.clone(),
                origin: TruthOrigin::HeadlinePivot,
            });
            add(lc, rc, RoiKind::Headline, &ca.headline, &cb.headline);
            for &(i, j) in &s.child_aligned {
                add(lc, rc, RoiKind::Content, &ca.sentences[i], &cb.sentences[j]);
            }
        }
    }

    let lexicons = (vocab.lexicon(l1, true, 1.0, &mut rng), vocab.lexicon(l2, false, 1.0, &mut rng));
    let partial_lexicons = (
        vocab.lexicon(l1, true, spec.lexicon_coverage, &mut rng),
        vocab.lexicon(l2, false, spec.lexicon_coverage, &mut rng),
    );

    let mut pages = le.pages;
    pages.extend(re.pages);
    let manifest = pages
        .iter()
        .map(|p| ManifestEntry {
            file: p.file.clone(),
            language: p.language.clone(),
            date: spec.date,
            page_start: p.page_number,
            dpi: None,
        })
        .collect();
    let truth_pages = pages
        .iter()
        .zip(le.page_ids.iter().chain(&re.page_ids))
        .map(|(p, id)| TruthPage {
            file: p.file.clone(),
            language: p.language.clone(),
            page_number: p.page_number,
            page_id: id.clone(),
        })
        .collect();
    let mut layout = le.layout;
    layout.extend(re.layout);
    let mut ocr_truth = le.ocr;
    ocr_truth.extend(re.ocr);
    let mut articles = le.articles;
    articles.extend(re.articles);

    Ok(FixtureBundle {
        pages,
        manifest,
        layout,
        ocr_truth,
        truth: FixtureTruth {
            seed,
            spec: spec.clone(),
            pages: truth_pages,
            articles,
            article_pairs,
            image_pairs,
            sentence_pairs,
        },
        lexicons,
        partial_lexicons,
    })
}
