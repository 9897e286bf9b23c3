//! Page ingestion: a manifest of raster files becomes a labeled, indexed [`PageSet`].
//!
//! Ingestion never fails as a whole because of one bad entry. Missing files,
//! undecodable images and duplicate `(language, date, page)` labels are
//! collected as [`IngestError`] records next to the pages that did load.

use std::collections::HashSet;
use std::fs;
use std::io::Cursor;
use std::path::Path;

use chrono::NaiveDate;
use image::{DynamicImage, GrayImage, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::raster::rgb_to_gray;

/// Smallest accepted page edge, in pixels.
pub const MIN_PAGE_EDGE: u32 = 32;
pub const DEFAULT_DPI: u32 = 300;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub language: String,
    pub date: NaiveDate,
    pub page_start: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dpi: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageImage {
    pub page_id: String,
    pub language: String,
    pub date: NaiveDate,
    pub page_number: u32,
    pub gray: GrayImage,
    pub color: Option<RgbImage>,
    pub dpi: u32,
}

impl PageImage {
    /// Builds a page, deriving the grayscale plane from `color` when given.
    pub fn new(
        language: impl Into<String>,
        date: NaiveDate,
        page_number: u32,
        gray: Option<GrayImage>,
        color: Option<RgbImage>,
        dpi: u32,
    ) -> Result<Self> {
        let gray = match (gray, &color) {
            (Some(g), _) => g,
            (None, Some(c)) => rgb_to_gray(c),
            (None, None) => return Err(Error::Invalid("page has no pixels".into())),
        };
        if gray.width() < MIN_PAGE_EDGE || gray.height() < MIN_PAGE_EDGE {
            return Err(Error::Invalid(format!(
                "page is {}x{}, both edges must be at least {MIN_PAGE_EDGE}px",
                gray.width(),
                gray.height()
            )));
        }
        if page_number == 0 {
            return Err(Error::Invalid("page numbers start at 1".into()));
        }
        let language = language.into();
        let page_id = page_id(&language, date, page_number, &gray);
        Ok(PageImage {
            page_id,
            language,
            date,
            page_number,
            gray,
            color,
            dpi,
        })
    }

    pub fn width(&self) -> u32 {
        self.gray.width()
    }

    pub fn height(&self) -> u32 {
        self.gray.height()
    }
}

fn page_id(language: &str, date: NaiveDate, page_number: u32, gray: &GrayImage) -> String {
    let mut px = Sha256::new();
    px.update(gray.width().to_le_bytes());
    px.update(gray.height().to_le_bytes());
    px.update(gray.as_raw());
    let mut h = Sha256::new();
    h.update(language.as_bytes());
    h.update([0]);
    h.update(date.to_string().as_bytes());
    h.update([0]);
    h.update(page_number.to_le_bytes());
    h.update(px.finalize());
    hex::encode(&h.finalize()[..8])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestError {
    pub entry: usize,
    pub file: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PageSet {
    pub pages: Vec<PageImage>,
    pub manifest_digest: String,
    /// The two language codes of the run, in manifest order.
    pub languages: Vec<String>,
    pub errors: Vec<IngestError>,
}

impl PageSet {
    /// Pages for one language and date, ordered by page number.
    pub fn get_pages(&self, language: &str, date: NaiveDate) -> Vec<&PageImage> {
        let mut out: Vec<&PageImage> = self
            .pages
            .iter()
            .filter(|p| p.language == language && p.date == date)
            .collect();
        out.sort_by_key(|p| p.page_number);
        out
    }

    pub fn page(&self, page_id: &str) -> Option<&PageImage> {
        self.pages.iter().find(|p| p.page_id == page_id)
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        let mut d: Vec<NaiveDate> = self.pages.iter().map(|p| p.date).collect();
        d.sort();
        d.dedup();
        d
    }
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Ingests every manifest entry relative to `source_dir`.
///
/// Only an unreadable or malformed manifest is an `Err`; per-entry problems
/// land in [`PageSet::errors`].
pub fn ingest_bundle(source_dir: &Path, manifest: &Path) -> Result<PageSet> {
    let raw = fs::read(manifest).map_err(|e| Error::io(manifest, e))?;
    let entries: Vec<ManifestEntry> = serde_json::from_slice(&raw)?;
    let manifest_digest = digest_bytes(&raw);

    let decoded: Vec<Result<Vec<DecodedPage>>> = entries
        .par_iter()
        .map(|entry| {
            let path = source_dir.join(&entry.file);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            decode_pages(&bytes)
        })
        .collect();

    let mut set = PageSet {
        manifest_digest,
        ..PageSet::default()
    };
    let mut seen: HashSet<(String, NaiveDate, u32)> = HashSet::new();
    for (i, (entry, result)) in entries.iter().zip(decoded).enumerate() {
        let fail = |message: String| IngestError {
            entry: i,
            file: entry.file.clone(),
            message,
        };
        if !set.languages.contains(&entry.language) {
            if set.languages.len() == 2 {
                set.errors.push(fail(format!(
                    "language {:?} is not one of the run's two languages {:?}",
                    entry.language, set.languages
                )));
                continue;
            }
            set.languages.push(entry.language.clone());
        }
        let decoded = match result {
            Ok(pages) => pages,
            Err(e) => {
                set.errors.push(fail(e.to_string()));
                continue;
            }
        };
        if entry.page_start == 0 {
            set.errors.push(fail("page_start must be positive".into()));
            continue;
        }
        let mut built = Vec::with_capacity(decoded.len());
        let mut entry_error = None;
        for (k, d) in decoded.into_iter().enumerate() {
            let number = entry.page_start + k as u32;
            let key = (entry.language.clone(), entry.date, number);
            if seen.contains(&key) {
                entry_error = Some(format!(
                    "duplicate page ({}, {}, {number})",
                    entry.language, entry.date
                ));
                break;
            }
            match PageImage::new(
                &entry.language,
                entry.date,
                number,
                d.gray,
                d.color,
                entry.dpi.unwrap_or(DEFAULT_DPI),
            ) {
                Ok(p) => built.push((key, p)),
                Err(e) => {
                    entry_error = Some(format!("page {number}: {e}"));
                    break;
                }
            }
        }
        match entry_error {
            Some(msg) => set.errors.push(fail(msg)),
            None => {
                for (key, page) in built {
                    seen.insert(key);
                    set.pages.push(page);
                }
            }
        }
    }
    Ok(set)
}

struct DecodedPage {
    gray: Option<GrayImage>,
    color: Option<RgbImage>,
}

fn decode_pages(bytes: &[u8]) -> Result<Vec<DecodedPage>> {
    if bytes.starts_with(b"II*\0") || bytes.starts_with(b"MM\0*") {
        return decode_tiff(bytes);
    }
    let img = image::load_from_memory(bytes)?;
    Ok(vec![from_dynamic(img)])
}

fn from_dynamic(img: DynamicImage) -> DecodedPage {
    if img.color().has_color() {
        DecodedPage {
            gray: None,
            color: Some(img.to_rgb8()),
        }
    } else {
        DecodedPage {
            gray: Some(img.to_luma8()),
            color: None,
        }
    }
}

fn decode_tiff(bytes: &[u8]) -> Result<Vec<DecodedPage>> {
    use tiff::decoder::{Decoder, DecodingResult};
    use tiff::ColorType;

    let tiff_err = |e: tiff::TiffError| Error::Image(format!("tiff: {e}"));
    let mut dec = Decoder::new(Cursor::new(bytes)).map_err(tiff_err)?;
    let mut out = Vec::new();
    loop {
        let (w, h) = dec.dimensions().map_err(tiff_err)?;
        let ct = dec.colortype().map_err(tiff_err)?;
        let data = match dec.read_image().map_err(tiff_err)? {
            DecodingResult::U8(v) => v,
            DecodingResult::U16(v) => v.into_iter().map(|s| (s >> 8) as u8).collect(),
            _ => return Err(Error::Image("unsupported TIFF sample format".into())),
        };
        let channels = match ct {
            ColorType::Gray(_) => 1,
            ColorType::GrayA(_) => 2,
            ColorType::RGB(_) => 3,
            ColorType::RGBA(_) => 4,
            other => return Err(Error::Image(format!("unsupported TIFF color type {other:?}"))),
        };
        if data.len() != (w * h) as usize * channels {
            return Err(Error::Image("truncated TIFF page".into()));
        }
        let page = if channels <= 2 {
            let g: Vec<u8> = data.chunks(channels).map(|c| c[0]).collect();
            DecodedPage {
                gray: GrayImage::from_raw(w, h, g),
                color: None,
            }
        } else {
            let rgb: Vec<u8> = data.chunks(channels).flat_map(|c| [c[0], c[1], c[2]]).collect();
            DecodedPage {
                gray: None,
                color: RgbImage::from_raw(w, h, rgb),
            }
        };
        out.push(page);
        if !dec.more_images() {
            break;
        }
        dec.next_image().map_err(tiff_err)?;
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreIndex {
    manifest_digest: String,
    languages: Vec<String>,
    pages: Vec<StoredPage>,
    errors: Vec<IngestError>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StoredPage {
    page_id: String,
    language: String,
    date: NaiveDate,
    page_number: u32,
    dpi: u32,
    color: bool,
}

pub const STORE_INDEX: &str = "index.json";

/// Writes the set as `index.json` plus one PNG per page plane under `pages/`.
pub fn write_store(set: &PageSet, dir: &Path) -> Result<()> {
    let pages_dir = dir.join("pages");
    fs::create_dir_all(&pages_dir).map_err(|e| Error::io(&pages_dir, e))?;
    for p in &set.pages {
        p.gray.save(pages_dir.join(format!("{}.png", p.page_id)))?;
        if let Some(c) = &p.color {
            c.save(pages_dir.join(format!("{}.rgb.png", p.page_id)))?;
        }
    }
    let index = StoreIndex {
        manifest_digest: set.manifest_digest.clone(),
        languages: set.languages.clone(),
        pages: set
            .pages
            .iter()
            .map(|p| StoredPage {
                page_id: p.page_id.clone(),
                language: p.language.clone(),
                date: p.date,
                page_number: p.page_number,
                dpi: p.dpi,
                color: p.color.is_some(),
            })
            .collect(),
        errors: set.errors.clone(),
    };
    let path = dir.join(STORE_INDEX);
    fs::write(&path, serde_json::to_vec_pretty(&index)?).map_err(|e| Error::io(&path, e))
}

pub fn load_store(dir: &Path) -> Result<PageSet> {
    let path = dir.join(STORE_INDEX);
    let raw = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let index: StoreIndex = serde_json::from_slice(&raw)?;
    let pages = index
        .pages
        .into_par_iter()
        .map(|sp| {
            let gray = image::open(dir.join("pages").join(format!("{}.png", sp.page_id)))?.to_luma8();
            let color = if sp.color {
                Some(image::open(dir.join("pages").join(format!("{}.rgb.png", sp.page_id)))?.to_rgb8())
            } else {
                None
            };
            Ok(PageImage {
                page_id: sp.page_id,
                language: sp.language,
                date: sp.date,
                page_number: sp.page_number,
                gray,
                color,
                dpi: sp.dpi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PageSet {
        pages,
        manifest_digest: index.manifest_digest,
        languages: index.languages,
        errors: index.errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Luma;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 3, 14).unwrap()
    }

    fn page_png(dir: &Path, name: &str, shade: u8) {
        let mut img = GrayImage::from_pixel(64, 48, Luma([255]));
        img.put_pixel(5, 5, Luma([shade]));
        img.save(dir.join(name)).unwrap();
    }

    fn write_manifest(dir: &Path, entries: &[ManifestEntry]) -> std::path::PathBuf {
        let p = dir.join("manifest.json");
        fs::write(&p, serde_json::to_vec(entries).unwrap()).unwrap();
        p
    }

    fn entry(file: &str, lang: &str, start: u32) -> ManifestEntry {
        ManifestEntry {
            file: file.into(),
            language: lang.into(),
            date: date(),
            page_start: start,
            dpi: None,
        }
    }

    #[test]
    fn two_single_pages() {
        let tmp = tempfile::tempdir().unwrap();
        page_png(tmp.path(), "a.png", 0);
        page_png(tmp.path(), "b.png", 10);
        let m = write_manifest(tmp.path(), &[entry("a.png", "kok", 1), entry("b.png", "mar", 1)]);
        let set = ingest_bundle(tmp.path(), &m).unwrap();
        assert_eq!(set.pages.len(), 2);
        assert!(set.errors.is_empty());
        assert_eq!(set.languages, vec!["kok", "mar"]);
        assert_eq!(set.get_pages("kok", date()).len(), 1);
    }

    #[test]
    fn multipage_tiff_is_split() {
        use tiff::encoder::{colortype, TiffEncoder};
        let tmp = tempfile::tempdir().unwrap();
        let mut buf = Cursor::new(Vec::new());
        {
            let mut enc = TiffEncoder::new(&mut buf).unwrap();
            for shade in [10u8, 20, 30] {
                let data = vec![shade; 40 * 40];
                enc.write_image::<colortype::Gray8>(40, 40, &data).unwrap();
            }
        }
        fs::write(tmp.path().join("doc.tif"), buf.into_inner()).unwrap();
        let m = write_manifest(tmp.path(), &[entry("doc.tif", "kok", 4)]);
        let set = ingest_bundle(tmp.path(), &m).unwrap();
        assert!(set.errors.is_empty(), "{:?}", set.errors);
        let numbers: Vec<u32> = set.get_pages("kok", date()).iter().map(|p| p.page_number).collect();
        assert_eq!(numbers, vec![4, 5, 6]);
    }

    #[test]
    fn missing_file_is_recorded() {
        let tmp = tempfile::tempdir().unwrap();
        let m = write_manifest(tmp.path(), &[entry("nope.png", "kok", 1)]);
        let set = ingest_bundle(tmp.path(), &m).unwrap();
        assert!(set.pages.is_empty());
        assert_eq!(set.errors.len(), 1);
        assert_eq!(set.errors[0].file, "nope.png");
    }

    #[test]
    fn duplicate_label_and_small_page_are_errors() {
        let tmp = tempfile::tempdir().unwrap();
        page_png(tmp.path(), "a.png", 0);
        page_png(tmp.path(), "b.png", 1);
        GrayImage::from_pixel(16, 64, Luma([0]))
            .save(tmp.path().join("tiny.png"))
            .unwrap();
        let m = write_manifest(
            tmp.path(),
            &[
                entry("a.png", "kok", 1),
                entry("b.png", "kok", 1),
                entry("tiny.png", "kok", 2),
            ],
        );
        let set = ingest_bundle(tmp.path(), &m).unwrap();
        assert_eq!(set.pages.len(), 1);
        assert_eq!(set.errors.iter().map(|e| e.entry).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn third_language_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        for n in ["a.png", "b.png", "c.png"] {
            page_png(tmp.path(), n, 0);
        }
        let m = write_manifest(
            tmp.path(),
            &[entry("a.png", "kok", 1), entry("b.png", "mar", 1), entry("c.png", "hin", 1)],
        );
        let set = ingest_bundle(tmp.path(), &m).unwrap();
        assert_eq!(set.pages.len(), 2);
        assert_eq!(set.errors.len(), 1);
    }

    #[test]
    fn color_page_gets_gray_plane() {
        let tmp = tempfile::tempdir().unwrap();
        let rgb = RgbImage::from_pixel(40, 40, image::Rgb([200, 100, 50]));
        rgb.save(tmp.path().join("c.png")).unwrap();
        let m = write_manifest(tmp.path(), &[entry("c.png", "kok", 1)]);
        let set = ingest_bundle(tmp.path(), &m).unwrap();
        let p = &set.pages[0];
        assert!(p.color.is_some());
        // 0.299*200 + 0.587*100 + 0.114*50 = 124.2
        assert_eq!(p.gray.get_pixel(0, 0).0[0], 124);
    }

    #[test]
    fn ingest_is_deterministic_and_store_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        page_png(tmp.path(), "a.png", 0);
        page_png(tmp.path(), "b.png", 10);
        let m = write_manifest(tmp.path(), &[entry("a.png", "kok", 1), entry("b.png", "mar", 2)]);
        let one = ingest_bundle(tmp.path(), &m).unwrap();
        let two = ingest_bundle(tmp.path(), &m).unwrap();
        assert_eq!(one, two);
        let store = tmp.path().join("store");
        write_store(&one, &store).unwrap();
        assert_eq!(load_store(&store).unwrap(), one);
    }
}
