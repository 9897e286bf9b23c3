use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use log::{info, warn};

use corpus_forge_core::article_mapper::{read_pair_report, write_pair_report};
use corpus_forge_core::corpus::{
    aggregate_sts, bleu, build_corpus, read_corpus_jsonl, read_sentence_pairs, read_sheet, sample_sts, write_corpus,
    write_sentence_pairs,
};
use corpus_forge_core::features::FeatureParams;
use corpus_forge_core::fixture::{gen_fixture, FixtureSpec};
use corpus_forge_core::layout::SegmentParams;
use corpus_forge_core::page_store::load_store;
use corpus_forge_core::pipeline::{run_pipeline, stages, OcrConfig, PipelineConfig, PipelineError, StagedArticle};
use corpus_forge_core::sentence::{AlignParams, EmbeddingProvider, HashProvider, HttpProvider, PivotLexicon, Strategy};
use corpus_forge_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "corpus-forge", version, about = "Mine parallel sentences from newspaper pages using shared photos")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Copy page images named in a manifest into a page store.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory the manifest's file names are relative to; defaults to the manifest's.
        #[arg(long)]
        source_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Find articles and their regions on every stored page.
    Segment {
        #[arg(long)]
        store: PathBuf,
        /// Use a layout annotation file instead of the segmenter.
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Read region texts with the OCR ensemble and export image crops.
    Ocr {
        #[arg(long)]
        store: PathBuf,
        /// Directory written by `segment`.
        #[arg(long)]
        articles: PathBuf,
        /// TOML file listing the engines.
        #[arg(long)]
        engines: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Similarity matrix between two directories of images, as TSV.
    MatchImages {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Pair articles across languages through shared photos.
    MapArticles {
        /// Directory written by `ocr` holding the left articles.
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// Needed only when a directory holds both languages.
        #[arg(long)]
        left_lang: Option<String>,
        #[arg(long)]
        right_lang: Option<String>,
        /// Only this date; all dates otherwise.
        #[arg(long)]
        date: Option<NaiveDate>,
        /// Image similarity a pair needs.
        #[arg(long)]
        threshold: Option<f64>,
        /// Skip headline pairing of embedded articles.
        #[arg(long)]
        no_embedded: bool,
        #[arg(long, default_value_t = 0.6)]
        headline_threshold: f64,
        #[arg(long, num_args = 2, value_names = ["LEFT", "RIGHT"])]
        embed_lexicons: Option<Vec<PathBuf>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Align the sentences of mapped article pairs.
    Align {
        #[arg(long)]
        pairs: PathBuf,
        /// Directories written by `ocr`; both languages must be covered.
        #[arg(long, required = true, num_args = 1..)]
        articles: Vec<PathBuf>,
        #[arg(long = "strategy", required = true, value_parser = parse_strategy)]
        strategies: Vec<Strategy>,
        /// `builtin` or the base URL of an embedding service.
        #[arg(long, default_value = "builtin")]
        provider: String,
        #[arg(long, num_args = 2, value_names = ["LEFT", "RIGHT"])]
        lexicons: Option<Vec<PathBuf>>,
        #[arg(long, num_args = 2, value_names = ["LEFT", "RIGHT"])]
        embed_lexicons: Option<Vec<PathBuf>>,
        /// Keep the configured SLAS length ratio instead of estimating it.
        #[arg(long)]
        fixed_ratio: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge aligned sentence files into a deduplicated corpus.
    Corpus {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a stratified annotation sheet from a corpus.
    SampleSts {
        /// The corpus JSONL mirror.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate filled annotation sheets.
    StsReport {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long = "sheet", required = true, num_args = 1..)]
        sheets: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Corpus BLEU of a hypothesis file against reference files, one sentence per line.
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref", required = true, num_args = 1..)]
        refs: Vec<PathBuf>,
    },
    /// Run every stage from a config file; prints the run report.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic two-edition bundle with ground truth and a config.
    GenFixture {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// TOML fixture spec; defaults apply to omitted fields.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    match s.to_ascii_lowercase().as_str() {
        "las" => Ok(Strategy::Las),
        "slas" => Ok(Strategy::Slas),
        "lo" => Ok(Strategy::Lo),
        _ => Err(format!("unknown strategy {s}, expected las, slas or lo")),
    }
}

/// Bad arguments or inputs; exits 1.
#[derive(Debug)]
struct Invalid(String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Invalid>() {
            return 1;
        }
        if let Some(CoreError::Config(_)) = cause.downcast_ref::<CoreError>() {
            return 1;
        }
        if let Some(PipelineError::Validation(_)) = cause.downcast_ref::<PipelineError>() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn need(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(invalid(format!("{what} {} does not exist", path.display())))
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        warn!("{w}");
    }
}

fn lexicon_pair(paths: &Option<Vec<PathBuf>>, langs: (&str, &str)) -> Result<Option<(PivotLexicon, PivotLexicon)>> {
    let Some(p) = paths else { return Ok(None) };
    for f in p {
        need(f, "lexicon")?;
    }
    Ok(Some((PivotLexicon::load(langs.0, &p[0])?, PivotLexicon::load(langs.1, &p[1])?)))
}

fn builtin_provider(lexicons: Option<(PivotLexicon, PivotLexicon)>) -> HashProvider {
    let mut p = HashProvider::new(corpus_forge_core::sentence::DEFAULT_DIM);
    if let Some((a, b)) = lexicons {
        p = p.with_lexicon(a).with_lexicon(b);
    }
    p
}

/// The single language of `articles`, or `given` when set.
fn side_language(articles: &[StagedArticle], given: Option<String>, dir: &Path) -> Result<String> {
    if let Some(l) = given {
        return Ok(l);
    }
    let langs: BTreeSet<&str> = articles.iter().map(|a| a.language.as_str()).collect();
    match langs.len() {
        1 => Ok(langs.into_iter().next().unwrap_or_default().to_string()),
        0 => Err(invalid(format!("{} holds no articles", dir.display()))),
        _ => Err(invalid(format!("{} holds several languages; pass --left-lang and --right-lang", dir.display()))),
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    need(path, "file")?;
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(raw.lines().map(str::to_string).collect())
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Ingest { manifest, source_dir, out } => {
            need(&manifest, "manifest")?;
            let source = source_dir.unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default());
            let set = stages::ingest(&manifest, &source, &out)?;
            for e in &set.errors {
                warn!("{}: {}", e.file, e.message);
            }
            info!("ingested {} pages into {}", set.pages.len(), out.display());
        }
        Cmd::Segment { store, annotations, out } => {
            need(&store, "store")?;
            if let Some(a) = &annotations {
                need(a, "annotations")?;
            }
            let set = load_store(&store)?;
            let (articles, warnings) = stages::segment(&set, annotations.as_deref(), &SegmentParams::default(), &out)?;
            warn_all(&warnings);
            info!("{} articles written to {}", articles.len(), out.display());
        }
        Cmd::Ocr { store, articles, engines, out } => {
            need(&store, "store")?;
            need(&articles, "articles directory")?;
            need(&engines, "engine config")?;
            let set = load_store(&store)?;
            let base = engines.parent().map(Path::to_path_buf).unwrap_or_default();
            let ensemble = OcrConfig::load(&engines)?.build(&base)?;
            let staged = stages::read_articles(&articles)?;
            let (done, warnings) = stages::ocr(&set, staged, &ensemble, &out)?;
            stages::write_articles(&done, &out)?;
            warn_all(&warnings);
            info!("read {} articles into {}", done.len(), out.display());
        }
        Cmd::MatchImages { left, right, report } => {
            need(&left, "directory")?;
            need(&right, "directory")?;
            let (l, r) = (stages::images_in(&left)?, stages::images_in(&right)?);
            let m = stages::similarity_matrix(&l, &r, &FeatureParams::default())?;
            fs::write(&report, stages::matrix_tsv(&l, &r, &m)).with_context(|| format!("writing {}", report.display()))?;
            info!("{}x{} matrix written to {}", l.len(), r.len(), report.display());
        }
        Cmd::MapArticles {
            left,
            right,
            left_lang,
            right_lang,
            date,
            threshold,
            no_embedded,
            headline_threshold,
            embed_lexicons,
            out,
        } => {
            need(&left, "directory")?;
            need(&right, "directory")?;
            let mut params = FeatureParams::default();
            if let Some(t) = threshold {
                if !(0.0..=1.0).contains(&t) {
                    return Err(invalid(format!("--threshold {t} outside [0, 1]")));
                }
                params.similarity_threshold = t;
            }
            if !(0.0..=1.0).contains(&headline_threshold) {
                return Err(invalid(format!("--headline-threshold {headline_threshold} outside [0, 1]")));
            }
            let keep = |mut a: Vec<StagedArticle>| {
                if let Some(d) = date {
                    a.retain(|x| x.date == d);
                }
                a
            };
            let la = keep(stages::read_articles(&left)?);
            let ra = keep(stages::read_articles(&right)?);
            let ll = side_language(&la, left_lang, &left)?;
            let rl = side_language(&ra, right_lang, &right)?;
            if ll == rl {
                return Err(invalid(format!("both sides are language {ll}")));
            }
            let li = stages::article_inputs(&la, &ll, &left.join(stages::IMAGES_DIR))?;
            let ri = stages::article_inputs(&ra, &rl, &right.join(stages::IMAGES_DIR))?;
            let provider = builtin_provider(lexicon_pair(&embed_lexicons, (&ll, &rl))?);
            let embedded = (!no_embedded).then_some((&provider as &dyn EmbeddingProvider, headline_threshold));
            let (pairs, warnings) = stages::map(&li, &ri, &params, embedded)?;
            warn_all(&warnings);
            write_pair_report(&pairs, &out)?;
            info!("{} article pairs written to {}", pairs.len(), out.display());
        }
        Cmd::Align {
            pairs,
            articles,
            strategies,
            provider,
            lexicons,
            embed_lexicons,
            fixed_ratio,
            out,
        } => {
            need(&pairs, "pair report")?;
            let pair_list = read_pair_report(&pairs)?;
            let mut staged = Vec::new();
            for d in &articles {
                need(d, "articles directory")?;
                staged.extend(stages::read_articles(d)?);
            }
            let langs = pair_list
                .first()
                .map(|p| (p.left_language.clone(), p.right_language.clone()))
                .unwrap_or_default();
            let lex = lexicon_pair(&lexicons, (&langs.0, &langs.1))?;
            if strategies.contains(&Strategy::Lo) && lex.is_none() {
                return Err(invalid("LO needs --lexicons"));
            }
            let needs_provider = strategies.iter().any(|s| *s != Strategy::Lo);
            let embedder: Box<dyn EmbeddingProvider> = if provider == "builtin" {
                Box::new(builtin_provider(lexicon_pair(&embed_lexicons, (&langs.0, &langs.1))?))
            } else {
                Box::new(HttpProvider::new(&provider))
            };
            let params = AlignParams::default();
            let inputs = stages::AlignInputs {
                strategies: &strategies,
                params: &params,
                provider: needs_provider.then_some(embedder.as_ref()),
                lexicons: lex.as_ref().map(|(a, b)| (a, b)),
                estimate_ratio: !fixed_ratio,
            };
            let (sentences, ratio) = stages::align(&pair_list, &staged, &inputs)?;
            write_sentence_pairs(&sentences, &out)?;
            info!("{} sentence pairs written to {} (length ratio {ratio:.3})", sentences.len(), out.display());
        }
        Cmd::Corpus { inputs, out } => {
            let mut all = Vec::new();
            for f in &inputs {
                need(f, "aligned file")?;
                all.extend(read_sentence_pairs(f)?);
            }
            let corpus = build_corpus(all);
            write_corpus(&corpus, &out)?;
            info!("{} entries written to {}", corpus.entries.len(), out.display());
        }
        Cmd::SampleSts { corpus, n, seed, out } => {
            need(&corpus, "corpus")?;
            if n == 0 {
                return Err(invalid("--n must be at least 1"));
            }
            let c = read_corpus_jsonl(&corpus)?;
            let sheet = sample_sts(&c, n, seed);
            corpus_forge_core::corpus::write_sheet(&sheet, &out)?;
            info!("{} rows written to {}", sheet.rows.len(), out.display());
        }
        Cmd::StsReport { corpus, sheets, json } => {
            need(&corpus, "corpus")?;
            let c = read_corpus_jsonl(&corpus)?;
            let mut rows = Vec::new();
            for (i, s) in sheets.iter().enumerate() {
                need(s, "sheet")?;
                rows.extend(read_sheet(s, &format!("annotator{}", i + 1))?);
            }
            let (report, errors) = aggregate_sts(&rows, &c);
            for e in &errors {
                warn!("row {} ({}): {}", e.row, e.pair_id, e.message);
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.render_table());
            }
        }
        Cmd::Bleu { hyp, refs } => {
            let hyps = read_lines(&hyp)?;
            let ref_sets: Vec<Vec<String>> = refs.iter().map(|r| read_lines(r)).collect::<Result<_>>()?;
            if let Some(bad) = ref_sets.iter().position(|r| r.len() != hyps.len()) {
                return Err(invalid(format!(
                    "{} has {} lines, hypotheses have {}",
                    refs[bad].display(),
                    ref_sets[bad].len(),
                    hyps.len()
                )));
            }
            let per_hyp: Vec<Vec<String>> = (0..hyps.len())
                .map(|i| ref_sets.iter().map(|r| r[i].clone()).collect())
                .collect();
            let score = bleu(&hyps, &per_hyp, 4).map_err(|e| invalid(e.to_string()))?;
            println!("{score:.2}");
        }
        Cmd::Run { config } => {
            need(&config, "config")?;
            let cfg = PipelineConfig::load(&config)?;
            match run_pipeline(&cfg) {
                Ok(report) => println!("{}", serde_json::to_string_pretty(&report)?),
                Err(e) => {
                    if let Some(r) = e.report() {
                        println!("{}", serde_json::to_string_pretty(r)?);
                    }
                    return Err(e.into());
                }
            }
        }
        Cmd::GenFixture { seed, out, spec } => {
            let spec = match spec {
                Some(p) => {
                    need(&p, "fixture spec")?;
                    FixtureSpec::load(&p)?
                }
                None => FixtureSpec::default(),
            };
            let bundle = gen_fixture(seed, &spec)?;
            let paths = bundle.write(&out)?;
            let cfg = PipelineConfig::for_bundle(&paths, &spec.languages);
            let cfg_path = out.join("pipeline.toml");
            fs::write(&cfg_path, cfg.to_toml()?).with_context(|| format!("writing {}", cfg_path.display()))?;
            info!(
                "bundle with {} pages and {} true article pairs written to {}",
                bundle.pages.len(),
                bundle.truth.article_pairs.len(),
                out.display()
            );
        }
    }
    Ok(())
}
