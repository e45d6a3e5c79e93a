use std::io::Read;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use boostcd::catalog::{read_names, Catalog};
use boostcd::curation::Sample;
use boostcd::decoding::NgramScorer;
use boostcd::linearization::render;
use boostcd::vocab::Vocabulary;
use clap::{ArgGroup, Args, Subcommand};
use serde::Serialize;

use crate::util::{load_catalog, open, read_records, write_json, ScorerFile};

#[derive(Subcommand)]
pub enum CatalogCommand {
    /// Build a JSON manifest from one-name-per-line files.
    Build(CatalogBuildArgs),
}

#[derive(Args, Serialize)]
pub struct CatalogBuildArgs {
    /// Entity names, one per line.
    #[arg(long)]
    entities: PathBuf,
    /// Relation names, one per line.
    #[arg(long)]
    relations: PathBuf,
    /// Dataset JSONL files whose texts must be encodable with the catalog
    /// vocabulary. Repeatable.
    #[arg(long = "dataset")]
    datasets: Vec<PathBuf>,
    /// Manifest path, `-` for stdout.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
pub enum ScorerCommand {
    /// Fit a Laplace-smoothed n-gram scorer.
    FitNgram(FitNgramArgs),
}

#[derive(Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["train", "dataset"])))]
pub struct FitNgramArgs {
    /// N-gram order.
    #[arg(long)]
    order: usize,
    /// Text file with one linearized target per line, markers written out.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Dataset JSONL; the scorer is fitted on the linearized gold sets.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Catalog manifest or directory supplying the vocabulary.
    #[arg(long, env = "BOOSTCD_CATALOG")]
    catalog: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

pub fn run_catalog(cmd: CatalogCommand) -> Result<()> {
    match cmd {
        CatalogCommand::Build(args) => build(args),
    }
}

pub fn run_scorer(cmd: ScorerCommand) -> Result<()> {
    match cmd {
        ScorerCommand::FitNgram(args) => fit_ngram(args),
    }
}

fn build(args: CatalogBuildArgs) -> Result<()> {
    let entities = read_names(open(&args.entities)?).with_context(|| format!("reading {}", args.entities.display()))?;
    let relations =
        read_names(open(&args.relations)?).with_context(|| format!("reading {}", args.relations.display()))?;
    let mut texts: Vec<String> = Vec::new();
    for path in &args.datasets {
        let samples: Vec<Sample> = read_records(path)?;
        texts.extend(samples.into_iter().map(|s| s.text));
    }
    let vocab = Vocabulary::for_texts(entities.iter().chain(&relations).chain(&texts).map(String::as_str));
    let catalog = Catalog::new(Arc::new(vocab), entities, relations)?;
    let manifest = catalog.manifest();
    log::info!(
        "catalog: {} entities, {} relations, {} tokens",
        manifest.stats.entities,
        manifest.stats.relations,
        manifest.stats.vocab_size
    );
    write_json(&args.out, &manifest)
}

fn fit_ngram(args: FitNgramArgs) -> Result<()> {
    let catalog = load_catalog(&args.catalog)?;
    let vocab = catalog.vocab_arc();
    let scorer = if let Some(path) = &args.train {
        let mut raw = String::new();
        open(path)?.read_to_string(&mut raw)?;
        NgramScorer::fit_text(args.order, vocab, raw.as_bytes())
            .with_context(|| format!("fitting on {}", path.display()))?
    } else {
        let path = args.dataset.as_ref().expect("clap requires a source");
        let samples: Vec<Sample> = read_records(path)?;
        let sequences = samples
            .iter()
            .map(|s| render(&s.gold, &vocab).with_context(|| format!("sample {}", s.id)))
            .collect::<Result<Vec<_>>>()?;
        NgramScorer::fit(args.order, vocab, sequences)?
    };
    write_json(&args.out, &ScorerFile::Ngram(scorer.to_model()))
}
