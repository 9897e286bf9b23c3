//! Stage bodies shared by the full pipeline and the single-stage commands.
//!
//! Every stage reads and writes plain files so that any stage can be rerun
//! by hand on the output of the previous one:
//!
//! - ingest: a page store (`index.json` + `pages/`)
//! - segment / ocr: `articles.json`; ocr adds `images/` and `docs/`
//! - map-articles: a JSONL pair report
//! - align: JSONL sentence pairs

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use image::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::article_mapper::{map_articles, map_embedded, ArticleInput, ArticlePair};
use crate::error::{Error, Result};
use crate::features::{extract_features, match_descriptors, FeatureParams};
use crate::layout::{image_file_name, load_annotations, segment_page, serialize_article, ArticleRecord, RoiKind, SegmentParams};
use crate::ocr::{extract_text, OcrEngineAdapter};
use crate::page_store::{ingest_bundle, write_store, PageSet};
use crate::sentence::{
    align_sentences, article_sentences, cosine, length_ratio, stream_sentences, AlignContext, AlignParams,
    AlignSide, EmbeddingProvider, PivotLexicon, SentencePair, Strategy,
};

pub const ARTICLES_FILE: &str = "articles.json";
pub const IMAGES_DIR: &str = "images";
pub const DOCS_DIR: &str = "docs";

/// An article record with the labels of the page it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedArticle {
    pub language: String,
    pub date: NaiveDate,
    pub record: ArticleRecord,
}

pub fn write_articles(articles: &[StagedArticle], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(ARTICLES_FILE);
    fs::write(&path, serde_json::to_vec_pretty(articles)?).map_err(|e| Error::io(&path, e))
}

pub fn read_articles(dir: &Path) -> Result<Vec<StagedArticle>> {
    let path = dir.join(ARTICLES_FILE);
    let raw = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_slice(&raw)?)
}

pub fn ingest(manifest: &Path, source_dir: &Path, out: &Path) -> Result<PageSet> {
    let set = ingest_bundle(source_dir, manifest)?;
    write_store(&set, out)?;
    Ok(set)
}

fn stage(set: &PageSet, records: Vec<ArticleRecord>) -> Result<Vec<StagedArticle>> {
    records
        .into_iter()
        .map(|record| {
            let page = set
                .page(&record.page_id)
                .ok_or_else(|| Error::Invalid(format!("article {} on unknown page {}", record.article_id, record.page_id)))?;
            Ok(StagedArticle {
                language: page.language.clone(),
                date: page.date,
                record,
            })
        })
        .collect()
}

/// Article records from an annotation file, or by segmenting every page.
/// Returns the articles and the segmenter's warnings.
pub fn segment(
    set: &PageSet,
    annotations: Option<&Path>,
    params: &SegmentParams,
    out: &Path,
) -> Result<(Vec<StagedArticle>, Vec<String>)> {
    let (records, warnings) = match annotations {
        Some(file) => (load_annotations(file, set)?, Vec::new()),
        None => {
            let outcomes: Vec<_> = set.pages.par_iter().map(|p| segment_page(p, params)).collect();
            let mut records = Vec::new();
            let mut warnings = Vec::new();
            for o in outcomes {
                records.extend(o.articles);
                warnings.extend(o.warnings);
            }
            (records, warnings)
        }
    };
    let articles = stage(set, records)?;
    write_articles(&articles, out)?;
    Ok((articles, warnings))
}

/// Fills article texts with the voted OCR output, exports image crops and
/// marker documents. Returns the articles and per-region problems.
pub fn ocr(
    set: &PageSet,
    articles: Vec<StagedArticle>,
    ensemble: &[OcrEngineAdapter],
    out: &Path,
) -> Result<(Vec<StagedArticle>, Vec<String>)> {
    let images = out.join(IMAGES_DIR);
    let docs = out.join(DOCS_DIR);
    for d in [&images, &docs] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let results: Vec<Result<(StagedArticle, Vec<String>)>> = articles
        .into_par_iter()
        .map(|a| {
            let page = set
                .page(&a.record.page_id)
                .ok_or_else(|| Error::Invalid(format!("unknown page {}", a.record.page_id)))?;
            let ex = extract_text(a.record, page, ensemble, Some(&images))?;
            let mut warnings: Vec<String> = ex
                .errors
                .iter()
                .map(|e| format!("{} roi #{}: {}", e.article_id, e.roi_index, e.message))
                .collect();
            warnings.extend(ex.engine_failures.iter().map(|(id, m)| format!("{}: engine {id}: {m}", ex.article.article_id)));
            match serialize_article(&ex.article) {
                Ok(doc) => {
                    let path = docs.join(format!("{}.txt", ex.article.article_id));
                    fs::write(&path, doc).map_err(|e| Error::io(&path, e))?;
                }
                Err(e) => warnings.push(format!("{}: no marker document: {e}", ex.article.article_id)),
            }
            Ok((
                StagedArticle {
                    language: a.language,
                    date: a.date,
                    record: ex.article,
                },
                warnings,
            ))
        })
        .collect();
    let mut done = Vec::new();
    let mut warnings = Vec::new();
    for r in results {
        let (a, w) = r?;
        done.push(a);
        warnings.extend(w);
    }
    write_articles(&done, out)?;
    Ok((done, warnings))
}

/// Mapper inputs for the articles of `language`, with photos read from the
/// OCR stage's exported crops.
pub fn article_inputs(articles: &[StagedArticle], language: &str, image_dir: &Path) -> Result<Vec<ArticleInput>> {
    articles
        .iter()
        .filter(|a| a.language == language)
        .map(|a| {
            let images = a
                .record
                .rois_of(RoiKind::Image)
                .map(|(_, roi)| {
                    let path = image_dir.join(image_file_name(&a.record.article_id, roi.seq_index));
                    Ok((roi.seq_index, image::open(&path)?.to_luma8()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ArticleInput {
                article: a.record.clone(),
                language: a.language.clone(),
                date: a.date,
                images,
            })
        })
        .collect()
}

/// LAS cosine between two headlines.
pub fn headline_las<'a>(
    provider: &'a dyn EmbeddingProvider,
    left_language: &'a str,
    right_language: &'a str,
) -> impl Fn(&str, &str) -> Result<f64> + Sync + 'a {
    move |a: &str, b: &str| {
        let va = provider.embed(&[a.to_string()], left_language)?;
        let vb = provider.embed(&[b.to_string()], right_language)?;
        cosine(&va[0], &vb[0])
    }
}

/// Image-pivot pairs for every date, followed by the embedded pairs of each
/// mapped parent when `embedded` is given as `(provider, threshold)`.
pub fn map(
    left: &[ArticleInput],
    right: &[ArticleInput],
    params: &FeatureParams,
    embedded: Option<(&dyn EmbeddingProvider, f64)>,
) -> Result<(Vec<ArticlePair>, Vec<String>)> {
    let mut dates: Vec<NaiveDate> = left.iter().chain(right).map(|a| a.date).collect();
    dates.sort();
    dates.dedup();
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for date in dates {
        let found = map_articles(left, right, date, params)?;
        let mut children = Vec::new();
        if let Some((provider, threshold)) = embedded {
            for p in &found {
                let delta = headline_las(provider, &p.left_language, &p.right_language);
                let outcome = map_embedded(p, left, right, &delta, threshold)?;
                children.extend(outcome.pairs);
                warnings.extend(outcome.warnings);
            }
        }
        pairs.extend(found);
        pairs.extend(children);
    }
    Ok((pairs, warnings))
}

/// Right/left word ratio over every stream of every pair.
pub fn run_length_ratio(pairs: &[ArticlePair], by_id: &HashMap<&str, &StagedArticle>) -> f64 {
    let mut sides = Vec::new();
    for p in pairs {
        if let (Some(l), Some(r)) = (by_id.get(p.left.as_str()), by_id.get(p.right.as_str())) {
            for kind in [RoiKind::Headline, RoiKind::Caption, RoiKind::Content] {
                let ls = stream_sentences(&l.record, &l.language, kind);
                let rs = stream_sentences(&r.record, &r.language, kind);
                if !ls.is_empty() && !rs.is_empty() {
                    sides.push((ls, rs));
                }
            }
        }
    }
    length_ratio(sides.iter().map(|(a, b)| (a.as_slice(), b.as_slice())))
}

pub struct AlignInputs<'a> {
    pub strategies: &'a [Strategy],
    pub params: &'a AlignParams,
    pub provider: Option<&'a dyn EmbeddingProvider>,
    pub lexicons: Option<(&'a PivotLexicon, &'a PivotLexicon)>,
    /// Replace the SLAS ratio with the run estimate.
    pub estimate_ratio: bool,
}

/// Sentence pairs of every article pair, strategy by strategy. Returns the
/// pairs and the SLAS ratio used.
pub fn align(
    pairs: &[ArticlePair],
    articles: &[StagedArticle],
    inputs: &AlignInputs<'_>,
) -> Result<(Vec<SentencePair>, f64)> {
    let by_id: HashMap<&str, &StagedArticle> = articles.iter().map(|a| (a.record.article_id.as_str(), a)).collect();
    let mut params = inputs.params.clone();
    if inputs.estimate_ratio {
        params.slas.ratio = run_length_ratio(pairs, &by_id);
    }
    let ctx = AlignContext {
        provider: inputs.provider,
        lexicons: inputs.lexicons,
    };
    let mut out = Vec::new();
    for &strategy in inputs.strategies {
        let per_pair: Vec<Result<Vec<SentencePair>>> = pairs
            .par_iter()
            .map(|p| {
                let get = |id: &str| {
                    by_id
                        .get(id)
                        .copied()
                        .ok_or_else(|| Error::Invalid(format!("pair names unknown article {id}")))
                };
                let (l, r) = (get(&p.left)?, get(&p.right)?);
                align_sentences(
                    &AlignSide {
                        article: &l.record,
                        language: &l.language,
                        date: l.date,
                    },
                    &AlignSide {
                        article: &r.record,
                        language: &r.language,
                        date: r.date,
                    },
                    strategy,
                    &params,
                    &ctx,
                )
            })
            .collect();
        for r in per_pair {
            out.extend(r?);
        }
    }
    Ok((out, params.slas.ratio))
}

/// Every image file (png, jpg, jpeg, tif, tiff) directly in `dir`, by name.
pub fn images_in(dir: &Path) -> Result<Vec<(String, GrayImage)>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg" | "tif" | "tiff"))
        })
        .collect();
    files.sort();
    files
        .par_iter()
        .map(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, image::open(p)?.to_luma8()))
        })
        .collect()
}

/// Similarity of every left image to every right image.
pub fn similarity_matrix(
    left: &[(String, GrayImage)],
    right: &[(String, GrayImage)],
    params: &FeatureParams,
) -> Result<Vec<Vec<f64>>> {
    let feats = |side: &[(String, GrayImage)]| -> Result<Vec<_>> {
        side.par_iter().map(|(_, img)| extract_features(img, params)).collect()
    };
    let (lf, rf) = (feats(left)?, feats(right)?);
    Ok(lf
        .par_iter()
        .map(|a| rf.iter().map(|b| match_descriptors(a, b, params.ratio).score).collect())
        .collect())
}

/// Matrix as TSV: a header row of right names, then one row per left image.
pub fn matrix_tsv(left: &[(String, GrayImage)], right: &[(String, GrayImage)], m: &[Vec<f64>]) -> String {
    let mut out = String::from("left");
    for (name, _) in right {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');
    for ((name, _), row) in left.iter().zip(m) {
        out.push_str(name);
        for v in row {
            out.push_str(&format!("\t{v:.6}"));
        }
        out.push('\n');
    }
    out
}

/// Sentence counts per article, for reports.
pub fn sentence_counts(articles: &[StagedArticle]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for a in articles {
        *out.entry(a.language.clone()).or_default() += article_sentences(&a.record, &a.language).len();
    }
    out
}
