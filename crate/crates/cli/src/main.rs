mod catalog;
mod decode;
mod dpo;
mod eval;
mod stages;
mod util;

use std::process::ExitCode;

use boostcd::error::{
    CatalogError, DataError, DecodeError, EvalError, LinearizationError, PipelineError, ScorerError, VocabError,
};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use util::Invalid;

/// Boosted constrained decoding for closed information extraction.
#[derive(Parser)]
#[command(name = "boostcd", version, propagate_version = true)]
struct Cli {
    /// Upper bound on worker threads inside a stage.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and inspect catalogs.
    #[command(subcommand)]
    Catalog(catalog::CatalogCommand),
    /// Fit test scorers.
    #[command(subcommand)]
    Scorer(catalog::ScorerCommand),
    /// Beam-decode one prompt.
    Decode(decode::DecodeArgs),
    /// Run the base scorer unconstrained and constrained over a dataset.
    Phase1(stages::Phase1Args),
    /// Turn phase-1 output into boosted training records.
    Assemble(stages::AssembleArgs),
    /// Phase 1 plus assembly in one step.
    BuildTrain(stages::BuildTrainArgs),
    /// Remove random entities from gold sets.
    Curate(stages::CurateArgs),
    /// Two-phase inference over a dataset.
    Infer(stages::InferArgs),
    /// Score predictions against gold.
    Eval(eval::EvalArgs),
    /// Scores per relation-frequency bucket.
    Buckets(eval::BucketsArgs),
    /// Build DPO preference pairs.
    DpoPrep(dpo::DpoPrepArgs),
    /// Tables and a chart from bucket reports and error annotations.
    Report(eval::ReportArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.jobs == 0 {
        return Err(util::invalid("--jobs must be at least 1"));
    }
    let jobs = cli.jobs;
    match cli.command {
        Command::Catalog(c) => catalog::run_catalog(c),
        Command::Scorer(c) => catalog::run_scorer(c),
        Command::Decode(a) => decode::run(a),
        Command::Phase1(a) => stages::phase1(a, jobs),
        Command::Assemble(a) => stages::assemble(a),
        Command::BuildTrain(a) => stages::build_train(a, jobs),
        Command::Curate(a) => stages::curate(a),
        Command::Infer(a) => stages::infer(a, jobs),
        Command::Eval(a) => eval::eval(a),
        Command::Buckets(a) => eval::buckets(a),
        Command::DpoPrep(a) => dpo::run(a, jobs),
        Command::Report(a) => eval::report(a),
    }
}

/// 1 for bad input, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let validation = err.chain().any(|e| {
        e.is::<Invalid>()
            || e.is::<serde_json::Error>()
            || e.is::<VocabError>()
            || e.is::<EvalError>()
            || e.is::<LinearizationError>()
            || matches!(e.downcast_ref::<DataError>(), Some(d) if !matches!(d, DataError::Io(_)))
            || matches!(e.downcast_ref::<CatalogError>(), Some(c) if !matches!(c, CatalogError::Io(_)))
            || matches!(e.downcast_ref::<ScorerError>(), Some(s) if !matches!(s, ScorerError::Io(_)))
            || matches!(e.downcast_ref::<DecodeError>(), Some(DecodeError::InvalidConfig(_)))
            || matches!(
                e.downcast_ref::<PipelineError>(),
                Some(PipelineError::InvalidCuration(_) | PipelineError::ShortChain(_))
            )
    });
    if validation {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
