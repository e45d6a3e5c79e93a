use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::EvalDoc;
use crate::scalar::Scalar;

/// `(low, high)` interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval<S> {
    pub low: S,
    pub high: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricIntervals<S> {
    pub precision: Interval<S>,
    pub recall: Interval<S>,
    pub f1: Interval<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport<S> {
    pub precision: S,
    pub recall: S,
    pub f1: S,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<MetricIntervals<S>>,
    pub n_docs: usize,
    pub n_relations: usize,
}

impl<S: Scalar> ScoreReport<S> {
    pub fn to_f64(&self) -> ScoreReport<f64> {
        let iv = |i: &Interval<S>| Interval {
            low: i.low.to_f64(),
            high: i.high.to_f64(),
        };
        ScoreReport {
            precision: self.precision.to_f64(),
            recall: self.recall.to_f64(),
            f1: self.f1.to_f64(),
            ci: self.ci.as_ref().map(|c| MetricIntervals {
                precision: iv(&c.precision),
                recall: iv(&c.recall),
                f1: iv(&c.f1),
            }),
            n_docs: self.n_docs,
            n_relations: self.n_relations,
        }
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1<S: Scalar>(precision: &S, recall: &S) -> S {
    let sum = precision.clone() + recall.clone();
    if sum > S::zero() {
        S::from_count(2) * precision.clone() * recall.clone() / sum
    } else {
        S::zero()
    }
}

/// `num / den`, or 1 when `den` is 0 (nothing to get wrong).
pub fn safe_ratio<S: Scalar>(num: usize, den: usize) -> S {
    if den == 0 {
        S::one()
    } else {
        S::ratio(num, den)
    }
}

/// Exact-match counts: correct, predicted, gold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Counts {
    pub fn precision<S: Scalar>(&self) -> S {
        safe_ratio(self.correct, self.predicted)
    }

    pub fn recall<S: Scalar>(&self) -> S {
        safe_ratio(self.correct, self.gold)
    }
}

fn doc_counts(doc: &EvalDoc) -> Counts {
    Counts {
        correct: doc.predicted.iter().filter(|t| doc.gold.contains(t)).count(),
        predicted: doc.predicted.len(),
        gold: doc.gold.len(),
    }
}

fn relations_of<D: Borrow<EvalDoc>>(docs: &[D]) -> BTreeSet<&str> {
    docs.iter()
        .flat_map(|d| {
            let d = d.borrow();
            d.predicted.iter().chain(d.gold.iter()).map(|t| t.relation.as_str())
        })
        .collect()
}

/// Micro-averaged precision, recall and F1: counts are pooled over all
/// documents before dividing. A triplet counts only on an exact match.
pub fn micro_scores<S: Scalar, D: Borrow<EvalDoc>>(docs: &[D]) -> ScoreReport<S> {
    let mut total = Counts::default();
    for d in docs {
        let c = doc_counts(d.borrow());
        total.correct += c.correct;
        total.predicted += c.predicted;
        total.gold += c.gold;
    }
    let precision = total.precision::<S>();
    let recall = total.recall::<S>();
    ScoreReport {
        f1: f1(&precision, &recall),
        precision,
        recall,
        ci: None,
        n_docs: docs.len(),
        n_relations: relations_of(docs).len(),
    }
}

/// Which relations the macro average runs over.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationUniverse {
    /// Relations seen in the batch's predictions or gold sets.
    #[default]
    Batch,
    /// An explicit relation list, e.g. the whole catalog. Relations absent
    /// from the batch score 1 on both precision and recall.
    Catalog(Vec<String>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroF1 {
    /// Mean over relations of the per-relation F1.
    #[default]
    MeanOfPerRelation,
    /// Harmonic mean of macro precision and macro recall.
    HarmonicOfMeans,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacroOptions {
    pub universe: RelationUniverse,
    pub f1: MacroF1,
}

/// Pooled counts per relation, keyed in sorted order.
pub fn relation_counts<D: Borrow<EvalDoc>>(docs: &[D]) -> BTreeMap<&str, Counts> {
    let mut out: BTreeMap<&str, Counts> = BTreeMap::new();
    for d in docs {
        let d = d.borrow();
        for t in &d.predicted {
            let c = out.entry(t.relation.as_str()).or_default();
            c.predicted += 1;
            if d.gold.contains(t) {
                c.correct += 1;
            }
        }
        for t in &d.gold {
            out.entry(t.relation.as_str()).or_default().gold += 1;
        }
    }
    out
}

/// Macro-averaged scores: precision and recall per relation over pooled
/// documents, then averaged with equal weight per relation.
pub fn macro_scores<S: Scalar, D: Borrow<EvalDoc>>(docs: &[D], options: &MacroOptions) -> ScoreReport<S> {
    let counts = relation_counts(docs);
    let universe: Vec<&str> = match &options.universe {
        RelationUniverse::Batch => counts.keys().copied().collect(),
        RelationUniverse::Catalog(all) => {
            let mut all: Vec<&str> = all.iter().map(String::as_str).collect();
            all.sort_unstable();
            all.dedup();
            all
        }
    };
    let n = universe.len();
    let (mut p_sum, mut r_sum, mut f_sum) = (S::zero(), S::zero(), S::zero());
    for rel in &universe {
        let c = counts.get(rel).copied().unwrap_or_default();
        let p = c.precision::<S>();
        let r = c.recall::<S>();
        f_sum = f_sum + f1(&p, &r);
        p_sum = p_sum + p;
        r_sum = r_sum + r;
    }
    let (precision, recall, mean_f1) = if n == 0 {
        (S::one(), S::one(), S::one())
    } else {
        let n = S::from_count(n);
        (p_sum / n.clone(), r_sum / n.clone(), f_sum / n)
    };
    let f1 = match options.f1 {
        MacroF1::MeanOfPerRelation => mean_f1,
        MacroF1::HarmonicOfMeans => f1(&precision, &recall),
    };
    ScoreReport {
        precision,
        recall,
        f1,
        ci: None,
        n_docs: docs.len(),
        n_relations: n,
    }
}
