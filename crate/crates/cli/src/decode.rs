use std::io::{Read, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use boostcd::decoding::beam_decode;
use boostcd::linearization::{parse_checked, parse_lenient, ParseReport};
use boostcd::vocab::TokenId;
use clap::{ArgGroup, Args};
use serde::Serialize;

use crate::util::{create, load_catalog, load_scorer, open, write_json, BeamArgs, RunRecord};

#[derive(Args, Serialize)]
#[command(group(ArgGroup::new("input").required(true).args(["prompt_file", "prompt"])))]
pub struct DecodeArgs {
    /// Scorer file (table or n-gram).
    #[arg(long)]
    scorer: PathBuf,
    /// Catalog manifest or directory.
    #[arg(long, env = "BOOSTCD_CATALOG")]
    catalog: PathBuf,
    /// File holding the prompt text; one trailing newline is dropped.
    #[arg(long)]
    prompt_file: Option<PathBuf>,
    /// Prompt text.
    #[arg(long)]
    prompt: Option<String>,
    /// Restrict the output to catalog triplets.
    #[arg(long)]
    constrained: bool,
    #[command(flatten)]
    #[serde(flatten)]
    beam: BeamArgs,
    /// Number of hypotheses printed, best first.
    #[arg(long, default_value_t = 1)]
    top: usize,
    /// Write a JSON trace of the ranked hypotheses here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Serialize)]
struct TraceHypothesis {
    rank: usize,
    text: String,
    tokens: Vec<TokenId>,
    score: f64,
    finished: bool,
    parse: ParseReport,
}

#[derive(Serialize)]
struct Trace<'a> {
    #[serde(flatten)]
    run: RunRecord<'a, DecodeArgs>,
    prompt_tokens: Vec<TokenId>,
    hypotheses: Vec<TraceHypothesis>,
}

pub fn run(args: DecodeArgs) -> Result<()> {
    let beam = args.beam.config()?;
    let catalog = load_catalog(&args.catalog)?;
    let scorer = load_scorer(&args.scorer, &catalog)?;
    let prompt = match (&args.prompt, &args.prompt_file) {
        (Some(p), _) => p.clone(),
        (None, Some(path)) => {
            let mut s = String::new();
            open(path)?.read_to_string(&mut s)?;
            let trimmed = s.strip_suffix('\n').unwrap_or(&s);
            trimmed.strip_suffix('\r').unwrap_or(trimmed).to_owned()
        }
        (None, None) => unreachable!("clap requires a prompt"),
    };
    let vocab = catalog.vocab();
    let prompt_tokens = vocab.tokenize(&prompt).context("tokenizing prompt")?;
    let view = args.constrained.then_some(&catalog);
    let hyps = beam_decode(&scorer, &prompt_tokens, view, beam)?;

    let mut out = create(std::path::Path::new("-"))?;
    for h in hyps.iter().take(args.top) {
        writeln!(out, "{}", vocab.decode(&h.tokens))?;
    }
    out.flush()?;

    if let Some(path) = &args.trace {
        let hypotheses = hyps
            .iter()
            .enumerate()
            .map(|(rank, h)| TraceHypothesis {
                rank: rank + 1,
                text: vocab.decode(&h.tokens),
                tokens: h.tokens.clone(),
                score: h.score,
                finished: h.finished,
                parse: if args.constrained {
                    parse_checked(&h.tokens, &catalog)
                } else {
                    parse_lenient(&h.tokens, vocab)
                },
            })
            .collect();
        let trace = Trace {
            run: RunRecord::new(&args),
            prompt_tokens,
            hypotheses,
        };
        write_json(path, &trace)?;
    }
    Ok(())
}
