use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use boostcd::catalog::Catalog;
use boostcd::curation::Sample;
use boostcd::dpo::{
    build_preferences, select_realistic, CandidateProvider, CommandTransport, DecodingProvider, DpoError, MockJudge,
    PreferenceJson, PreferenceJudge, PreferenceOptions, RemoteJudge, TableRealness,
};
use boostcd::io::PredictionRecord;
use boostcd::linearization::TripletSet;
use clap::{ArgGroup, Args};
use serde::{Deserialize, Serialize};

use crate::util::{invalid, load_catalog, load_scorer, open, read_records, write_records, BeamArgs, LoadedScorer};

#[derive(Args, Serialize)]
#[command(
    group(ArgGroup::new("source_a").required(true).args(["scorer_a", "pred_a"])),
    group(ArgGroup::new("source_b").required(true).args(["scorer_b", "pred_b"])),
    group(ArgGroup::new("judge").required(true).args(["judge_rules", "judge_command"])),
)]
pub struct DpoPrepArgs {
    /// Candidate texts, JSONL with `id` and `text`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, env = "BOOSTCD_CATALOG")]
    catalog: PathBuf,
    /// Scorer whose constrained top-1 is candidate a.
    #[arg(long)]
    scorer_a: Option<PathBuf>,
    /// Precomputed predictions JSONL used as candidate a.
    #[arg(long)]
    pred_a: Option<PathBuf>,
    #[arg(long)]
    scorer_b: Option<PathBuf>,
    #[arg(long)]
    pred_b: Option<PathBuf>,
    #[arg(long, default_value = "a")]
    name_a: String,
    #[arg(long, default_value = "b")]
    name_b: String,
    /// Mock judge rules: `{"rules": {id: verdict}, "default": verdict}`.
    #[arg(long)]
    judge_rules: Option<PathBuf>,
    /// Judge program: reads a request JSON on stdin, writes `{"verdict"}`.
    /// Whitespace separates the program from its arguments.
    #[arg(long)]
    judge_command: Option<String>,
    /// Realness table `{"scores": {text: p}, "default": p}`. Without it
    /// every text ties and selection falls back to id order.
    #[arg(long)]
    realness: Option<PathBuf>,
    #[arg(long, default_value_t = 600)]
    train_size: usize,
    #[arg(long, default_value_t = 100)]
    val_size: usize,
    /// Ask the judge twice with the candidates swapped; keep only
    /// consistent verdicts.
    #[arg(long)]
    swap_trial: bool,
    #[command(flatten)]
    #[serde(flatten)]
    beam: BeamArgs,
    #[arg(long)]
    out_train: PathBuf,
    #[arg(long)]
    out_val: PathBuf,
}

#[derive(Deserialize)]
struct TextLine {
    id: String,
    text: String,
}

/// Candidates read from a predictions file.
struct FileProvider {
    name: String,
    by_id: HashMap<String, TripletSet>,
}

impl CandidateProvider for FileProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn candidates(&self, sample: &Sample) -> Result<TripletSet, DpoError> {
        self.by_id.get(&sample.id).cloned().ok_or_else(|| DpoError::Provider {
            provider: self.name.clone(),
            reason: format!("no prediction for {}", sample.id),
        })
    }
}

fn provider<'a>(
    name: &str,
    scorer: Option<&Path>,
    pred: Option<&Path>,
    catalog: &'a Catalog,
    args: &BeamArgs,
) -> Result<Box<dyn CandidateProvider + Sync + 'a>> {
    if let Some(path) = scorer {
        return Ok(Box::new(DecodingProvider::<LoadedScorer> {
            name: name.to_owned(),
            scorer: load_scorer(path, catalog)?,
            catalog,
            beam: args.config()?,
        }));
    }
    let path = pred.expect("clap requires a candidate source");
    let records: Vec<PredictionRecord> = read_records(path)?;
    let mut by_id = HashMap::new();
    for r in records {
        if by_id.insert(r.id.clone(), r.triplets).is_some() {
            return Err(invalid(format!("{}: duplicate id {}", path.display(), r.id)));
        }
    }
    Ok(Box::new(FileProvider {
        name: name.to_owned(),
        by_id,
    }))
}

fn judge(args: &DpoPrepArgs) -> Result<Box<dyn PreferenceJudge + Sync>> {
    if let Some(path) = &args.judge_rules {
        let mut raw = String::new();
        open(path)?.read_to_string(&mut raw)?;
        let rules: MockJudge = serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(Box::new(rules));
    }
    let command = args.judge_command.as_deref().expect("clap requires a judge");
    let mut words = command.split_whitespace().map(str::to_owned);
    let program = words.next().ok_or_else(|| invalid("--judge-command is empty"))?;
    Ok(Box::new(RemoteJudge(CommandTransport {
        program,
        args: words.collect(),
    })))
}

#[derive(Serialize)]
struct DpoConfig<'a> {
    #[serde(flatten)]
    args: &'a DpoPrepArgs,
    jobs: usize,
}

pub fn run(args: DpoPrepArgs, jobs: usize) -> Result<()> {
    if args.name_a == args.name_b {
        return Err(invalid("--name-a and --name-b must differ"));
    }
    let catalog = load_catalog(&args.catalog)?;
    let gen_a = provider(
        &args.name_a,
        args.scorer_a.as_deref(),
        args.pred_a.as_deref(),
        &catalog,
        &args.beam,
    )?;
    let gen_b = provider(
        &args.name_b,
        args.scorer_b.as_deref(),
        args.pred_b.as_deref(),
        &catalog,
        &args.beam,
    )?;
    let judge = judge(&args)?;
    let realness = match &args.realness {
        Some(path) => {
            let mut raw = String::new();
            open(path)?.read_to_string(&mut raw)?;
            serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?
        }
        None => TableRealness::default(),
    };

    let lines: Vec<TextLine> = read_records(&args.input)?;
    let samples: Vec<Sample> = lines
        .into_iter()
        .map(|l| Sample {
            id: l.id,
            text: l.text,
            gold: TripletSet::new(),
        })
        .collect();
    let k = args.train_size + args.val_size;
    let selected = select_realistic(&samples, &realness, k).map_err(|e| invalid(e.to_string()))?;
    let (train, val) = selected.split_at(args.train_size);

    let options = PreferenceOptions {
        swap_trial: args.swap_trial,
        jobs,
    };
    let config = DpoConfig { args: &args, jobs };
    for (part, out) in [(train, &args.out_train), (val, &args.out_val)] {
        let outcome = build_preferences(part, gen_a.as_ref(), gen_b.as_ref(), judge.as_ref(), options);
        if !outcome.skipped.is_empty() {
            eprintln!(
                "{}: kept {} of {} samples, {} skipped",
                out.display(),
                outcome.records.len(),
                part.len(),
                outcome.skipped.len()
            );
        }
        let lines: Vec<PreferenceJson> = outcome.records.iter().map(PreferenceJson::from).collect();
        write_records(out, &lines, &config)?;
    }
    Ok(())
}
