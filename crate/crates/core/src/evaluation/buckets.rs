use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{score_with_ci, Averaging, BootstrapConfig, EvalBatch, MacroOptions, ScoreReport};
use crate::error::{DataError, EvalError};

/// `i` such that `count ∈ [2^i, 2^(i+1))`; `None` for 0.
pub fn bucket_exponent(count: u64) -> Option<u32> {
    count.checked_ilog2()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub exponent: u32,
    /// Sorted.
    pub relations: Vec<String>,
    /// Micro scores restricted to this bucket's relations.
    pub scores: ScoreReport<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub buckets: Vec<Bucket>,
    /// Relations whose count is 0.
    pub zero_count: Vec<String>,
    /// Relations seen in the batch but missing from the counts table.
    pub uncounted: Vec<String>,
}

/// Groups relations by frequency bucket and scores each bucket on the
/// triplets of its relations only. Buckets without relations are omitted.
pub fn bucket_report(
    batch: &EvalBatch,
    relation_counts: &BTreeMap<String, u64>,
    config: BootstrapConfig,
    seed: u64,
) -> Result<BucketReport, EvalError> {
    let mut groups: BTreeMap<u32, BTreeSet<&str>> = BTreeMap::new();
    let mut zero_count = Vec::new();
    for (rel, &count) in relation_counts {
        match bucket_exponent(count) {
            Some(i) => {
                groups.entry(i).or_default().insert(rel);
            }
            None => zero_count.push(rel.clone()),
        }
    }
    let seen: BTreeSet<&str> = batch
        .docs()
        .iter()
        .flat_map(|d| d.predicted.iter().chain(d.gold.iter()))
        .map(|t| t.relation.as_str())
        .collect();
    let uncounted = seen
        .into_iter()
        .filter(|r| !relation_counts.contains_key(*r))
        .map(str::to_owned)
        .collect();
    let mut buckets = Vec::with_capacity(groups.len());
    for (exponent, relations) in groups {
        let sub = batch.filter_relations(|r| relations.contains(r));
        let scores = score_with_ci(&sub, Averaging::Micro, &MacroOptions::default(), config, seed)?;
        buckets.push(Bucket {
            exponent,
            relations: relations.into_iter().map(str::to_owned).collect(),
            scores,
        });
    }
    Ok(BucketReport {
        buckets,
        zero_count,
        uncounted,
    })
}

/// Reads `relation<TAB>count` lines. A header line whose count column is
/// not a number is skipped.
pub fn read_counts_tsv<R: Read>(reader: R) -> Result<BTreeMap<String, u64>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .flexible(false)
        .from_reader(reader);
    let mut out = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 1;
        if record.len() != 2 {
            return Err(DataError::Invalid {
                line,
                reason: "expected relation<TAB>count".into(),
            });
        }
        let count = match record[1].trim().parse::<u64>() {
            Ok(c) => c,
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(DataError::Invalid {
                    line,
                    reason: e.to_string(),
                })
            }
        };
        if out.insert(record[0].to_owned(), count).is_some() {
            return Err(DataError::DuplicateId(record[0].to_owned()));
        }
    }
    Ok(out)
}
