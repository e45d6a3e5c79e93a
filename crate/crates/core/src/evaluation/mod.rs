//! Scoring predicted triplet sets against gold: micro and macro
//! precision/recall/F1, bootstrap intervals, relation-frequency buckets and
//! error-annotation fractions.

mod annotations;
mod bootstrap;
mod buckets;
mod metrics;

pub use annotations::{error_fraction_report, Annotation, CategoryFraction, ErrorCategory};
pub use bootstrap::{bootstrap, bootstrap_many, percentile, resample_indices, BootstrapConfig, BootstrapResult};
pub use buckets::{bucket_exponent, bucket_report, read_counts_tsv, Bucket, BucketReport};
pub use metrics::{
    f1, macro_scores, micro_scores, relation_counts, safe_ratio, Counts, Interval, MacroF1, MacroOptions,
    MetricIntervals, RelationUniverse, ScoreReport,
};

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::curation::Sample;
use crate::error::EvalError;
use crate::io::PredictionRecord;
use crate::linearization::TripletSet;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalDoc {
    pub id: String,
    pub predicted: TripletSet,
    pub gold: TripletSet,
}

/// Documents with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalBatch {
    docs: Vec<EvalDoc>,
}

impl EvalBatch {
    pub fn new(docs: Vec<EvalDoc>) -> Result<Self, EvalError> {
        let mut seen = HashSet::new();
        for d in &docs {
            if !seen.insert(d.id.as_str()) {
                return Err(EvalError::DuplicateDoc(d.id.clone()));
            }
        }
        Ok(EvalBatch { docs })
    }

    /// Pairs predictions with gold samples by id, in gold order. Gold
    /// documents without a prediction get an empty predicted set.
    pub fn join(predictions: Vec<PredictionRecord>, gold: Vec<Sample>) -> Result<Self, EvalError> {
        let mut by_id: HashMap<String, TripletSet> = HashMap::new();
        for p in predictions {
            if by_id.insert(p.id.clone(), p.triplets).is_some() {
                return Err(EvalError::DuplicateDoc(p.id));
            }
        }
        let mut docs = Vec::with_capacity(gold.len());
        for g in gold {
            let predicted = by_id.remove(&g.id).unwrap_or_else(|| {
                log::warn!("no prediction for document {}", g.id);
                TripletSet::new()
            });
            docs.push(EvalDoc {
                id: g.id,
                predicted,
                gold: g.gold,
            });
        }
        if let Some(extra) = by_id.into_keys().min() {
            return Err(EvalError::UnknownDoc(extra));
        }
        EvalBatch::new(docs)
    }

    pub fn docs(&self) -> &[EvalDoc] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// The batch with every triplet whose relation fails `keep` removed.
    pub fn filter_relations<P: Fn(&str) -> bool>(&self, keep: P) -> EvalBatch {
        let docs = self
            .docs
            .iter()
            .map(|d| {
                let f = |s: &TripletSet| s.iter().filter(|t| keep(&t.relation)).cloned().collect();
                EvalDoc {
                    id: d.id.clone(),
                    predicted: f(&d.predicted),
                    gold: f(&d.gold),
                }
            })
            .collect();
        EvalBatch { docs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Micro,
    Macro,
}

/// Point scores plus bootstrap intervals for all three metrics, sharing
/// one set of document resamples.
pub fn score_with_ci<S: Scalar>(
    batch: &EvalBatch,
    averaging: Averaging,
    options: &MacroOptions,
    config: BootstrapConfig,
    seed: u64,
) -> Result<ScoreReport<S>, EvalError> {
    let score = |docs: &[&EvalDoc]| -> ScoreReport<S> {
        match averaging {
            Averaging::Micro => micro_scores(docs),
            Averaging::Macro => macro_scores(docs, options),
        }
    };
    let mut report = score(&batch.docs.iter().collect::<Vec<_>>());
    let cis = bootstrap_many(
        batch.docs(),
        |docs| {
            let r = score(docs);
            vec![r.precision, r.recall, r.f1]
        },
        config,
        seed,
    )?;
    let mut cis = cis.into_iter().map(|r| r.interval);
    report.ci = Some(MetricIntervals {
        precision: cis.next().expect("three metrics"),
        recall: cis.next().expect("three metrics"),
        f1: cis.next().expect("three metrics"),
    });
    Ok(report)
}
