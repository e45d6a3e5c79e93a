use std::path::PathBuf;

use anyhow::{Context, Result};
use boostcd::curation::{
    curate as curate_samples, decode_pass_over, CuratedRecord, CuratedSample, CurationConfig, Sample,
};
use boostcd::decoding::Scorer;
use boostcd::io::PredictionRecord;
use boostcd::linearization::{render, Diagnostic, TripletSet};
use boostcd::pipeline::{
    assemble_boosted_input, boost_infer_chain, build_boosted_training_set, BoostedRecordJson, FinalMode,
    WeakPredictions,
};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::util::{invalid, load_catalog, load_scorer, read_records, write_records, BeamArgs, LoadedScorer};

/// Phase-1 output line.
#[derive(Debug, Serialize, Deserialize)]
pub struct WeakRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub removed_entities: Vec<String>,
    /// Curated gold, the phase-2 training target.
    pub target: TripletSet,
    /// Unconstrained top-1 with markers written out.
    pub unconstrained_text: String,
    #[serde(flatten)]
    pub weak: WeakPredictions,
}

#[derive(Args, Serialize)]
pub struct Phase1Args {
    /// Dataset or curated JSONL.
    #[arg(long = "in")]
    input: PathBuf,
    /// Base scorer file.
    #[arg(long)]
    scorer: PathBuf,
    #[arg(long, env = "BOOSTCD_CATALOG")]
    catalog: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    beam: BeamArgs,
    /// Weak-prediction JSONL.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct AssembleArgs {
    /// Output of `phase1`.
    #[arg(long)]
    weak: PathBuf,
    #[arg(long, env = "BOOSTCD_CATALOG")]
    catalog: PathBuf,
    /// Boosted training records.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct BuildTrainArgs {
    /// Dataset or curated JSONL.
    #[arg(long = "in")]
    input: PathBuf,
    /// Base scorer file.
    #[arg(long)]
    scorer: PathBuf,
    #[arg(long, env = "BOOSTCD_CATALOG")]
    catalog: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    beam: BeamArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct CurateArgs {
    /// Dataset JSONL.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Probability that a sample is altered.
    #[arg(long, default_value_t = 0.4)]
    fraction: f64,
    /// Most entities removed from one sample.
    #[arg(long, default_value_t = 3)]
    max_removed: usize,
    #[arg(long)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalModeArg {
    Constrained,
    Unconstrained,
}

#[derive(Args, Serialize)]
pub struct InferArgs {
    /// Base scorer file.
    #[arg(long)]
    base: PathBuf,
    /// Boosted scorer file. Repeat to chain several boosting rounds.
    #[arg(long, required = true)]
    boosted: Vec<PathBuf>,
    #[arg(long, env = "BOOSTCD_CATALOG")]
    catalog: PathBuf,
    /// Dataset JSONL; only `id` and `text` are read.
    #[arg(long = "in")]
    input: PathBuf,
    /// Predictions JSONL.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "constrained")]
    final_mode: FinalModeArg,
    #[command(flatten)]
    #[serde(flatten)]
    beam: BeamArgs,
}

#[derive(Serialize)]
struct WithJobs<'a, A> {
    #[serde(flatten)]
    args: &'a A,
    jobs: usize,
}

fn read_curated(path: &std::path::Path) -> Result<Vec<CuratedSample>> {
    let records: Vec<CuratedRecord> = read_records(path)?;
    Ok(records.into_iter().map(CuratedSample::from).collect())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("starting worker pool")
}

pub fn phase1(args: Phase1Args, jobs: usize) -> Result<()> {
    let beam = args.beam.config()?;
    let catalog = load_catalog(&args.catalog)?;
    let scorer = load_scorer(&args.scorer, &catalog)?;
    let curated = read_curated(&args.input)?;
    let mut out = Vec::with_capacity(curated.len());
    let mut failed = 0;
    for result in decode_pass_over(&curated, &scorer, &catalog, beam, jobs) {
        match result {
            Ok(d) => out.push(WeakRecord {
                id: d.sample.base.id,
                text: d.sample.base.text,
                removed_entities: d.sample.removed_entities,
                target: d.sample.curated_gold,
                unconstrained_text: catalog.vocab().decode(&d.weak.unconstrained_tokens),
                weak: d.weak,
            }),
            Err(e) => {
                log::warn!("{e}");
                failed += 1;
            }
        }
    }
    summarize("phase1", out.len(), failed);
    write_records(&args.out, &out, &WithJobs { args: &args, jobs })
}

pub fn assemble(args: AssembleArgs) -> Result<()> {
    let catalog = load_catalog(&args.catalog)?;
    let vocab = catalog.vocab();
    let weak: Vec<WeakRecord> = read_records(&args.weak)?;
    let out = weak
        .iter()
        .map(|w| {
            let input = assemble_boosted_input(&w.text, &w.weak.unconstrained, &w.weak.constrained, vocab)
                .with_context(|| format!("sample {}", w.id))?;
            let target = render(&w.target, vocab).with_context(|| format!("sample {}", w.id))?;
            Ok(BoostedRecordJson {
                id: w.id.clone(),
                input_text: vocab.decode(&input),
                target_text: vocab.decode(&target),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_records(&args.out, &out, &args)
}

pub fn build_train(args: BuildTrainArgs, jobs: usize) -> Result<()> {
    let beam = args.beam.config()?;
    let catalog = load_catalog(&args.catalog)?;
    let scorer = load_scorer(&args.scorer, &catalog)?;
    let curated = read_curated(&args.input)?;
    let outcome = build_boosted_training_set(&curated, &scorer, &catalog, beam, jobs);
    summarize("build-train", outcome.records.len(), outcome.failures.len());
    let out: Vec<BoostedRecordJson> = outcome.records.iter().map(|r| r.to_json(catalog.vocab())).collect();
    write_records(&args.out, &out, &WithJobs { args: &args, jobs })
}

pub fn curate(args: CurateArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.fraction) {
        return Err(invalid("--fraction must lie in [0, 1]"));
    }
    if args.max_removed == 0 {
        return Err(invalid("--max-removed must be at least 1"));
    }
    let config = CurationConfig {
        alter_fraction: args.fraction,
        max_removed: args.max_removed,
    };
    let samples: Vec<Sample> = read_records(&args.input)?;
    let curated = curate_samples(&samples, config, args.seed)?;
    let altered = curated.iter().filter(|c| c.is_altered()).count();
    log::info!("curate: altered {altered} of {} samples", curated.len());
    let out: Vec<CuratedRecord> = curated.iter().map(CuratedRecord::from).collect();
    write_records(&args.out, &out, &args)
}

/// Prediction line; diagnostics are kept when the final decode was
/// unconstrained and produced malformed output.
#[derive(Serialize)]
struct InferRecord {
    #[serde(flatten)]
    prediction: PredictionRecord,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    diagnostics: Vec<Diagnostic>,
}

#[derive(Deserialize)]
struct InferInput {
    id: String,
    text: String,
}

pub fn infer(args: InferArgs, jobs: usize) -> Result<()> {
    let beam = args.beam.config()?;
    let catalog = load_catalog(&args.catalog)?;
    let mut scorers: Vec<LoadedScorer> = vec![load_scorer(&args.base, &catalog)?];
    for path in &args.boosted {
        scorers.push(load_scorer(path, &catalog)?);
    }
    let chain: Vec<&(dyn Scorer<f64> + Sync)> = scorers.iter().map(|s| s as &(dyn Scorer<f64> + Sync)).collect();
    let mode = match args.final_mode {
        FinalModeArg::Constrained => FinalMode::Constrained,
        FinalModeArg::Unconstrained => FinalMode::Unconstrained,
    };
    let inputs: Vec<InferInput> = read_records(&args.input)?;
    let results: Vec<Result<InferRecord>> = pool(jobs)?.install(|| {
        inputs
            .par_iter()
            .map(|x| {
                let out = boost_infer_chain(&chain, &x.text, &catalog, mode, beam)
                    .with_context(|| format!("sample {}", x.id))?;
                Ok(InferRecord {
                    prediction: PredictionRecord {
                        id: x.id.clone(),
                        triplets: out.triplets,
                    },
                    diagnostics: out.report.diagnostics,
                })
            })
            .collect()
    });
    let out = results.into_iter().collect::<Result<Vec<_>>>()?;
    write_records(&args.out, &out, &WithJobs { args: &args, jobs })
}

fn summarize(stage: &str, ok: usize, failed: usize) {
    if failed > 0 {
        eprintln!("{stage}: {ok} samples written, {failed} failed");
    } else {
        log::info!("{stage}: {ok} samples written");
    }
}
