//! Boosted-model training data: simulate an incomplete knowledge base by
//! removing entities from a fraction of the samples.

use std::collections::BTreeSet;

use num_traits::Float;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::decoding::{BeamConfig, Scorer};
use crate::error::PipelineError;
use crate::linearization::TripletSet;
use crate::pipeline::{phase_one, WeakPredictions};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub text: String,
    #[serde(rename = "triplets")]
    pub gold: TripletSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurationFlag {
    /// Selected for alteration but its gold set has no entities.
    NoEntities,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CuratedSample {
    pub base: Sample,
    /// Sorted.
    pub removed_entities: Vec<String>,
    pub curated_gold: TripletSet,
    pub flag: Option<CurationFlag>,
}

impl CuratedSample {
    /// A sample left as is.
    pub fn unaltered(base: Sample) -> Self {
        CuratedSample {
            curated_gold: base.gold.clone(),
            base,
            removed_entities: Vec::new(),
            flag: None,
        }
    }

    pub fn with_removed(base: Sample, removed: Vec<String>) -> Self {
        let curated_gold = remove_entities(&base.gold, &removed);
        let mut removed_entities = removed;
        removed_entities.sort();
        removed_entities.dedup();
        CuratedSample {
            base,
            removed_entities,
            curated_gold,
            flag: None,
        }
    }

    pub fn is_altered(&self) -> bool {
        !self.removed_entities.is_empty()
    }
}

/// `gold` without every triplet whose subject or object is in `removed`.
pub fn remove_entities<S: AsRef<str>>(gold: &TripletSet, removed: &[S]) -> TripletSet {
    gold.iter()
        .filter(|t| !removed.iter().any(|e| t.mentions(e.as_ref())))
        .cloned()
        .collect()
}

/// JSONL form: the dataset line with `triplets` replaced by the curated
/// gold, plus `removed_entities` and the untouched `original_triplets`.
/// A plain dataset line reads as an unaltered record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuratedRecord {
    pub id: String,
    pub text: String,
    pub triplets: TripletSet,
    #[serde(default)]
    pub removed_entities: Vec<String>,
    #[serde(default)]
    pub original_triplets: Option<TripletSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<CurationFlag>,
}

impl From<&CuratedSample> for CuratedRecord {
    fn from(c: &CuratedSample) -> Self {
        CuratedRecord {
            id: c.base.id.clone(),
            text: c.base.text.clone(),
            triplets: c.curated_gold.clone(),
            removed_entities: c.removed_entities.clone(),
            original_triplets: Some(c.base.gold.clone()),
            flag: c.flag,
        }
    }
}

impl From<CuratedRecord> for CuratedSample {
    fn from(r: CuratedRecord) -> Self {
        let gold = r.original_triplets.unwrap_or_else(|| r.triplets.clone());
        CuratedSample {
            base: Sample {
                id: r.id,
                text: r.text,
                gold,
            },
            removed_entities: r.removed_entities,
            curated_gold: r.triplets,
            flag: r.flag,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurationConfig {
    /// Per-sample probability of alteration.
    pub alter_fraction: f64,
    /// Upper bound on entities removed from one sample.
    pub max_removed: usize,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            alter_fraction: 0.4,
            max_removed: 3,
        }
    }
}

/// Selects each sample for alteration with probability `alter_fraction`;
/// an altered sample loses `k ~ Uniform{1..=min(max_removed, #entities)}`
/// distinct entities of its gold set, drawn without replacement, together
/// with every triplet mentioning them. Sample `i` draws from stream `i` of
/// `seed`.
pub fn curate(dataset: &[Sample], config: CurationConfig, seed: u64) -> Result<Vec<CuratedSample>, PipelineError> {
    if !(0.0..=1.0).contains(&config.alter_fraction) {
        return Err(PipelineError::InvalidCuration("alter_fraction must lie in [0, 1]"));
    }
    if config.max_removed == 0 {
        return Err(PipelineError::InvalidCuration("max_removed must be >= 1"));
    }
    Ok(dataset
        .iter()
        .enumerate()
        .map(|(i, sample)| {
            let mut rng = rng::stream(seed, i as u64);
            if !rng.gen_bool(config.alter_fraction) {
                return CuratedSample::unaltered(sample.clone());
            }
            let entities = sample.gold.entities();
            if entities.is_empty() {
                log::debug!("sample {} selected but has no entities", sample.id);
                return CuratedSample {
                    flag: Some(CurationFlag::NoEntities),
                    ..CuratedSample::unaltered(sample.clone())
                };
            }
            let k = rng.gen_range(1..=config.max_removed.min(entities.len()));
            let removed: Vec<String> = index::sample(&mut rng, entities.len(), k)
                .into_iter()
                .map(|j| entities[j].to_owned())
                .collect();
            CuratedSample::with_removed(sample.clone(), removed)
        })
        .collect())
}

/// Phase-1 output for one curated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedSample {
    pub sample: CuratedSample,
    pub weak: WeakPredictions,
}

/// Decodes every sample twice with the base scorer: unconstrained, and
/// constrained under the catalog minus that sample's removed entities.
pub fn decode_pass_over<F, S>(
    dataset: &[CuratedSample],
    base_scorer: &S,
    catalog: &Catalog,
    beam: BeamConfig,
    jobs: usize,
) -> Vec<Result<DecodedSample, PipelineError>>
where
    F: Float + Send + Sync,
    S: Scorer<F> + Sync + ?Sized,
{
    rng::par_map(jobs, dataset, |_, sample| {
        let id = || sample.base.id.clone();
        let view: BTreeSet<&str> = sample.removed_entities.iter().map(String::as_str).collect();
        let view = catalog
            .restrict(view)
            .map_err(|source| PipelineError::Catalog { id: id(), source })?;
        let prompt = catalog
            .vocab()
            .tokenize(&sample.base.text)
            .map_err(|e| PipelineError::Linearization {
                id: id(),
                source: e.into(),
            })?;
        let weak = phase_one(base_scorer, &prompt, &view, beam)
            .map_err(|source| PipelineError::Decode { id: id(), source })?;
        Ok(DecodedSample {
            sample: sample.clone(),
            weak,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearization::Triplet;

    fn t(s: &str, r: &str, o: &str) -> Triplet {
        Triplet::new(s, r, o)
    }

    fn sample(id: &str, gold: Vec<Triplet>) -> Sample {
        Sample {
            id: id.into(),
            text: "text".into(),
            gold: gold.into(),
        }
    }

    #[test]
    fn removing_an_entity_drops_its_triplets() {
        let gold: TripletSet = vec![t("A", "r", "B"), t("A", "r", "C")].into();
        assert_eq!(remove_entities(&gold, &["B"]).as_slice(), [t("A", "r", "C")]);
        assert!(remove_entities(&gold, &["A"]).is_empty());
    }

    #[test]
    fn removing_all_entities_leaves_an_empty_target() {
        let c = CuratedSample::with_removed(sample("x", vec![t("A", "r", "B")]), vec!["B".into(), "A".into()]);
        assert!(c.curated_gold.is_empty());
        assert_eq!(c.removed_entities, ["A", "B"]);
    }

    #[test]
    fn zero_fraction_is_identity() {
        let data: Vec<_> = (0..50)
            .map(|i| sample(&i.to_string(), vec![t("A", "r", "B")]))
            .collect();
        let out = curate(
            &data,
            CurationConfig {
                alter_fraction: 0.0,
                max_removed: 3,
            },
            1,
        )
        .unwrap();
        assert!(out.iter().all(|c| !c.is_altered() && c.curated_gold == c.base.gold));
    }

    #[test]
    fn full_fraction_alters_every_sample_with_entities() {
        let mut data: Vec<_> = (0..50)
            .map(|i| sample(&i.to_string(), vec![t("A", "r", "B"), t("C", "r", "D")]))
            .collect();
        data.push(sample("empty", vec![]));
        let out = curate(
            &data,
            CurationConfig {
                alter_fraction: 1.0,
                max_removed: 3,
            },
            9,
        )
        .unwrap();
        for c in &out[..50] {
            assert!((1..=3).contains(&c.removed_entities.len()));
            for trip in &c.curated_gold {
                assert!(!c.removed_entities.iter().any(|e| trip.mentions(e)));
            }
        }
        assert_eq!(out[50].flag, Some(CurationFlag::NoEntities));
        assert!(!out[50].is_altered());
    }

    #[test]
    fn removal_count_is_capped_by_available_entities() {
        let data: Vec<_> = (0..200)
            .map(|i| sample(&i.to_string(), vec![t("A", "r", "A")]))
            .collect();
        let cfg = CurationConfig {
            alter_fraction: 1.0,
            max_removed: 3,
        };
        assert!(curate(&data, cfg, 3)
            .unwrap()
            .iter()
            .all(|c| c.removed_entities == ["A"]));
    }

    #[test]
    fn invalid_configs() {
        let bad = |alter_fraction, max_removed| {
            curate(
                &[],
                CurationConfig {
                    alter_fraction,
                    max_removed,
                },
                0,
            )
            .is_err()
        };
        assert!(bad(1.5, 3));
        assert!(bad(-0.1, 3));
        assert!(bad(0.4, 0));
    }

    #[test]
    fn record_round_trip() {
        let c = CuratedSample::with_removed(sample("x", vec![t("A", "r", "B"), t("C", "r", "D")]), vec!["B".into()]);
        let rec = CuratedRecord::from(&c);
        let json = serde_json::to_string(&rec).unwrap();
        let back: CuratedRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(CuratedSample::from(back), c);
    }
}
