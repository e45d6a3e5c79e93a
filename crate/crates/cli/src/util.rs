use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use boostcd::catalog::Catalog;
use boostcd::decoding::{BeamConfig, NgramModel, NgramScorer, Scorer, TableScorer, TableSpec};
use boostcd::io::{read_jsonl, write_jsonl};
use boostcd::vocab::TokenId;
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Bad flags or malformed inputs; mapped to exit code 1.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

#[derive(Debug, Clone, Copy, Args, Serialize)]
pub struct BeamArgs {
    /// Beam width.
    #[arg(long = "beams", default_value_t = 10)]
    pub beams: usize,
    /// Maximum number of generated tokens, end marker included.
    #[arg(long, default_value_t = 256)]
    pub max_len: usize,
}

impl BeamArgs {
    pub fn config(&self) -> Result<BeamConfig> {
        if self.beams == 0 {
            bail!(invalid("--beams must be at least 1"));
        }
        if self.max_len == 0 {
            bail!(invalid("--max-len must be at least 1"));
        }
        Ok(BeamConfig {
            beam_width: self.beams,
            max_len: self.max_len,
        })
    }
}

pub fn open(path: &Path) -> Result<Box<dyn Read>> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdin()));
    }
    match File::open(path) {
        Ok(f) => Ok(Box::new(f)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(invalid(format!("{}: no such file", path.display()))),
        Err(e) => Err(anyhow::Error::new(e).context(format!("cannot open {}", path.display()))),
    }
}

pub fn create(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufWriter::new(io::stdout())));
    }
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(Box::new(BufWriter::new(f)))
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// Writes `items` as JSONL and, for file outputs, the resolved run
/// configuration next to it as `<out>.config.json`.
pub fn write_records<T: Serialize, C: Serialize>(path: &Path, items: &[T], config: &C) -> Result<()> {
    write_jsonl(create(path)?, items).with_context(|| format!("writing {}", path.display()))?;
    if path != Path::new("-") {
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".config.json");
        write_json(Path::new(&sidecar), &RunRecord::new(config))?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Resolved configuration of one invocation.
#[derive(Serialize)]
pub struct RunRecord<'a, C> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a C,
}

impl<'a, C: Serialize> RunRecord<'a, C> {
    pub fn new(config: &'a C) -> Self {
        RunRecord {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config,
        }
    }
}

pub fn load_catalog(path: &Path) -> Result<Catalog> {
    Catalog::load(path).with_context(|| format!("loading catalog {}", path.display()))
}

/// Scorer file: an n-gram model (`"kind": "ngram"`) or a lookup table.
#[derive(Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScorerFile {
    Ngram(NgramModel),
    Table(TableSpec),
}

pub enum LoadedScorer {
    Table(TableScorer<f64>),
    Ngram(NgramScorer),
}

impl Scorer<f64> for LoadedScorer {
    fn vocab_size(&self) -> usize {
        match self {
            LoadedScorer::Table(s) => Scorer::<f64>::vocab_size(s),
            LoadedScorer::Ngram(s) => Scorer::<f64>::vocab_size(s),
        }
    }

    fn next_logprobs(&self, prompt: &[TokenId], generated: &[TokenId]) -> Vec<f64> {
        match self {
            LoadedScorer::Table(s) => s.next_logprobs(prompt, generated),
            LoadedScorer::Ngram(s) => s.next_logprobs(prompt, generated),
        }
    }
}

/// Loads a scorer file against `catalog`'s vocabulary. Files without a
/// `kind` field are read as table specs.
pub fn load_scorer(path: &Path, catalog: &Catalog) -> Result<LoadedScorer> {
    let mut raw = String::new();
    open(path)?.read_to_string(&mut raw)?;
    let mut value: serde_json::Value =
        serde_json::from_str(&raw).with_context(|| format!("parsing scorer {}", path.display()))?;
    if let Some(obj) = value.as_object_mut() {
        obj.entry("kind").or_insert_with(|| "table".into());
    }
    let file: ScorerFile =
        serde_json::from_value(value).with_context(|| format!("parsing scorer {}", path.display()))?;
    match file {
        ScorerFile::Table(spec) => Ok(LoadedScorer::Table(
            TableScorer::new(&spec, catalog.vocab_arc()).with_context(|| format!("scorer {}", path.display()))?,
        )),
        ScorerFile::Ngram(model) => {
            if &model.vocab != catalog.vocab() {
                bail!(invalid(format!(
                    "scorer {} was fitted on a different vocabulary than the catalog",
                    path.display()
                )));
            }
            Ok(LoadedScorer::Ngram(NgramScorer::from_model(model)?))
        }
    }
}
