use serde::{Deserialize, Serialize};

use super::{bootstrap_many, BootstrapConfig, Interval};
use crate::error::EvalError;
use crate::scalar::Scalar;

/// Error types assigned during manual inspection of extracted triplet sets.
/// A sample may carry several.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    /// Some correct triplets are missing.
    Unexhaustive,
    /// Triplets about the right entities with an incorrect relation.
    IncorrectRelated,
    /// An entity was mapped to the wrong catalog entry.
    MisclassifiedEntity,
    /// Triplets unrelated to the text or its entities.
    Unrelated,
    /// Triplets centered around a single entity.
    EntityCentered,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::Unexhaustive,
        ErrorCategory::IncorrectRelated,
        ErrorCategory::MisclassifiedEntity,
        ErrorCategory::Unrelated,
        ErrorCategory::EntityCentered,
    ];
}

/// One annotated sample: the categories of error it exhibits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub sample_id: String,
    #[serde(default)]
    pub errors: Vec<ErrorCategory>,
}

impl Annotation {
    pub fn has(&self, category: ErrorCategory) -> bool {
        self.errors.contains(&category)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryFraction<S> {
    pub category: ErrorCategory,
    pub fraction: S,
    pub ci: Interval<S>,
}

/// Per-category fraction of samples with that error, each with a bootstrap
/// interval over samples. Categories are counted independently.
pub fn error_fraction_report<S: Scalar>(
    annotations: &[Annotation],
    config: BootstrapConfig,
    seed: u64,
) -> Result<Vec<CategoryFraction<S>>, EvalError> {
    let fractions = |items: &[&Annotation]| -> Vec<S> {
        ErrorCategory::ALL
            .iter()
            .map(|&c| S::ratio(items.iter().filter(|a| a.has(c)).count(), items.len()))
            .collect()
    };
    let point = fractions(&annotations.iter().collect::<Vec<_>>());
    let cis = bootstrap_many(annotations, fractions, config, seed)?;
    Ok(ErrorCategory::ALL
        .iter()
        .zip(point)
        .zip(cis)
        .map(|((&category, fraction), ci)| CategoryFraction {
            category,
            fraction,
            ci: ci.interval,
        })
        .collect())
}
