use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use boostcd::curation::Sample;
use boostcd::evaluation::{
    bucket_report, error_fraction_report, read_counts_tsv, score_with_ci, Annotation, Averaging, BootstrapConfig,
    BucketReport, EvalBatch, MacroF1, MacroOptions, RelationUniverse, ScoreReport,
};
use boostcd::io::PredictionRecord;
use boostcd::CategoryFraction;
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::util::{create, invalid, load_catalog, open, read_records, write_json, RunRecord};

#[derive(Args, Serialize)]
pub struct BootArgs {
    /// Bootstrap resamples.
    #[arg(long, default_value_t = 50)]
    boot: usize,
    /// Confidence level of the percentile intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

impl BootArgs {
    fn config(&self) -> Result<BootstrapConfig> {
        if self.boot == 0 {
            return Err(invalid("--boot must be at least 1"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(invalid("--level must lie in (0, 1)"));
        }
        Ok(BootstrapConfig {
            n_boot: self.boot,
            level: self.level,
        })
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UniverseArg {
    /// Relations seen in the batch.
    Batch,
    /// Every catalog relation; needs --catalog.
    Catalog,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MacroF1Arg {
    /// Mean of per-relation F1.
    Mean,
    /// Harmonic mean of macro precision and macro recall.
    Harmonic,
}

#[derive(Args, Serialize)]
pub struct EvalArgs {
    /// Predictions JSONL.
    #[arg(long)]
    pred: PathBuf,
    /// Gold dataset JSONL.
    #[arg(long)]
    gold: PathBuf,
    /// Optional `relation<TAB>count` table; adds a bucket section.
    #[arg(long)]
    counts: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    boot: BootArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "batch")]
    macro_universe: UniverseArg,
    #[arg(long = "macro-f1", value_enum, default_value = "mean")]
    macro_f1: MacroF1Arg,
    /// Catalog, needed for `--macro-universe catalog`.
    #[arg(long, env = "BOOSTCD_CATALOG")]
    catalog: Option<PathBuf>,
    /// JSON report, `-` for stdout.
    #[arg(long, default_value = "-")]
    #[serde(skip)]
    out: PathBuf,
    /// CSV flattening of the report.
    #[arg(long)]
    #[serde(skip)]
    csv: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalReport<'a> {
    #[serde(flatten)]
    run: RunRecord<'a, EvalArgs>,
    n_docs: usize,
    micro: ScoreReport<f64>,
    #[serde(rename = "macro")]
    macro_: ScoreReport<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    buckets: Option<BucketReport>,
}

#[derive(Args, Serialize)]
pub struct BucketsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// `relation<TAB>count` table.
    #[arg(long)]
    counts: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    boot: BootArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "-")]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Serialize)]
struct BucketsFile<'a> {
    #[serde(flatten)]
    run: RunRecord<'a, BucketsArgs>,
    buckets: BucketReport,
}

#[derive(Args, Serialize)]
pub struct ReportArgs {
    /// Output of `buckets` or `eval --counts`.
    #[arg(long)]
    buckets: Option<PathBuf>,
    /// Per-bucket table.
    #[arg(long, requires = "buckets")]
    csv: Option<PathBuf>,
    /// Per-bucket F1 chart.
    #[arg(long, requires = "buckets")]
    svg: Option<PathBuf>,
    /// Error annotations JSONL: `{"sample_id", "errors": [...]}`.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Per-category error fractions.
    #[arg(long, requires = "annotations")]
    errors_csv: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    boot: BootArgs,
    /// Bootstrap seed, required with --annotations.
    #[arg(long)]
    seed: Option<u64>,
}

fn load_batch(pred: &Path, gold: &Path) -> Result<EvalBatch> {
    let predictions: Vec<PredictionRecord> = read_records(pred)?;
    let gold: Vec<Sample> = read_records(gold)?;
    let batch = EvalBatch::join(predictions, gold)?;
    if batch.is_empty() {
        return Err(invalid("gold file holds no documents"));
    }
    Ok(batch)
}

fn load_counts(path: &Path) -> Result<BTreeMap<String, u64>> {
    read_counts_tsv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let boot = args.boot.config()?;
    let universe = match args.macro_universe {
        UniverseArg::Batch => RelationUniverse::Batch,
        UniverseArg::Catalog => {
            let path = args
                .catalog
                .as_ref()
                .ok_or_else(|| invalid("--macro-universe catalog needs --catalog"))?;
            RelationUniverse::Catalog(load_catalog(path)?.relations().map(str::to_owned).collect())
        }
    };
    let options = MacroOptions {
        universe,
        f1: match args.macro_f1 {
            MacroF1Arg::Mean => MacroF1::MeanOfPerRelation,
            MacroF1Arg::Harmonic => MacroF1::HarmonicOfMeans,
        },
    };
    let batch = load_batch(&args.pred, &args.gold)?;
    let micro = score_with_ci(&batch, Averaging::Micro, &options, boot, args.seed)?;
    let macro_ = score_with_ci(&batch, Averaging::Macro, &options, boot, args.seed)?;
    let buckets = match &args.counts {
        Some(path) => Some(bucket_report(&batch, &load_counts(path)?, boot, args.seed)?),
        None => None,
    };
    if let Some(path) = &args.csv {
        let mut rows = String::from("section,bucket,metric,value,low,high\n");
        score_rows(&mut rows, "micro", "", &micro);
        score_rows(&mut rows, "macro", "", &macro_);
        for b in buckets.iter().flat_map(|r| &r.buckets) {
            score_rows(&mut rows, "bucket", &b.exponent.to_string(), &b.scores);
        }
        write_text(path, &rows)?;
    }
    let report = EvalReport {
        run: RunRecord::new(&args),
        n_docs: batch.len(),
        micro,
        macro_,
        buckets,
    };
    write_json(&args.out, &report)
}

fn score_rows(out: &mut String, section: &str, bucket: &str, s: &ScoreReport<f64>) {
    let ci = s.ci.as_ref();
    let metrics = [
        ("precision", s.precision, ci.map(|c| &c.precision)),
        ("recall", s.recall, ci.map(|c| &c.recall)),
        ("f1", s.f1, ci.map(|c| &c.f1)),
    ];
    for (name, value, iv) in metrics {
        let (low, high) = iv.map_or((String::new(), String::new()), |i| {
            (i.low.to_string(), i.high.to_string())
        });
        let _ = writeln!(out, "{section},{bucket},{name},{value},{low},{high}");
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn buckets(args: BucketsArgs) -> Result<()> {
    let boot = args.boot.config()?;
    let batch = load_batch(&args.pred, &args.gold)?;
    let report = bucket_report(&batch, &load_counts(&args.counts)?, boot, args.seed)?;
    for r in &report.uncounted {
        log::warn!("relation {r} has no count and is left out of every bucket");
    }
    write_json(
        &args.out,
        &BucketsFile {
            run: RunRecord::new(&args),
            buckets: report,
        },
    )
}

pub fn report(args: ReportArgs) -> Result<()> {
    if args.buckets.is_none() && args.annotations.is_none() {
        return Err(invalid("nothing to report: give --buckets or --annotations"));
    }
    if let Some(path) = &args.buckets {
        let mut raw = String::new();
        open(path)?.read_to_string(&mut raw)?;
        let mut value: serde_json::Value =
            serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?;
        let section = value
            .get_mut("buckets")
            .map(serde_json::Value::take)
            .ok_or_else(|| invalid(format!("{} has no buckets section", path.display())))?;
        let report: BucketReport =
            serde_json::from_value(section).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(csv) = &args.csv {
            write_text(csv, &bucket_table(&report))?;
        }
        if let Some(svg) = &args.svg {
            write_text(svg, &bucket_chart(&report))?;
        }
    }
    if let Some(path) = &args.annotations {
        let seed = args
            .seed
            .ok_or_else(|| invalid("--seed is required with --annotations"))?;
        let annotations: Vec<Annotation> = read_records(path)?;
        if annotations.is_empty() {
            return Err(invalid(format!("{} holds no annotations", path.display())));
        }
        let fractions: Vec<CategoryFraction> = error_fraction_report(&annotations, args.boot.config()?, seed)?;
        let mut rows = String::from("category,fraction,low,high\n");
        for f in &fractions {
            let _ = writeln!(rows, "{:?},{},{},{}", f.category, f.fraction, f.ci.low, f.ci.high);
        }
        match &args.errors_csv {
            Some(out) => write_text(out, &rows)?,
            None => write_text(Path::new("-"), &rows)?,
        }
    }
    Ok(())
}

fn bucket_table(report: &BucketReport) -> String {
    let mut out = String::from("exponent,count_low,count_high,n_relations,precision,recall,f1,f1_low,f1_high\n");
    for b in &report.buckets {
        let (low, high) = b.scores.ci.as_ref().map_or((String::new(), String::new()), |c| {
            (c.f1.low.to_string(), c.f1.high.to_string())
        });
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            b.exponent,
            1u128 << b.exponent,
            (1u128 << (b.exponent + 1)) - 1,
            b.relations.len(),
            b.scores.precision,
            b.scores.recall,
            b.scores.f1,
            low,
            high
        );
    }
    out
}

/// Bar per bucket with its F1 interval as a whisker.
fn bucket_chart(report: &BucketReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 360.0;
    const PAD: f64 = 48.0;
    let n = report.buckets.len().max(1) as f64;
    let slot = (W - 2.0 * PAD) / n;
    let y = |v: f64| H - PAD - v.clamp(0.0, 1.0) * (H - 2.0 * PAD);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{PAD}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>",
        H - PAD,
        W - PAD
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>",
        H - PAD
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{tick}</text>",
            PAD - 6.0,
            y(tick) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">F1</text>",
        PAD / 3.0,
        PAD - 12.0
    );
    for (i, b) in report.buckets.iter().enumerate() {
        let x = PAD + slot * i as f64;
        let top = y(b.scores.f1);
        let _ = writeln!(
            svg,
            "<rect x=\"{:.1}\" y=\"{top:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"steelblue\"/>",
            x + slot * 0.15,
            slot * 0.7,
            H - PAD - top
        );
        if let Some(ci) = &b.scores.ci {
            let cx = x + slot / 2.0;
            let _ = writeln!(
                svg,
                "<line x1=\"{cx:.1}\" y1=\"{:.1}\" x2=\"{cx:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
                y(ci.f1.low),
                y(ci.f1.high)
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">2^{}</text>",
            x + slot / 2.0,
            H - PAD + 16.0,
            b.exponent
        );
    }
    svg.push_str("</svg>\n");
    svg
}
