//! Closed-catalog triplet extraction with constrained decoding and a
//! two-phase boosting pipeline.
//!
//! Decoding is generic over the score type (`f32`/`f64` via
//! [`num_traits::Float`]); metrics are generic over [`Scalar`], which also
//! covers exact rationals. The aliases below fix the common choices.

pub mod catalog;
pub mod curation;
pub mod decoding;
pub mod dpo;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod linearization;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod vocab;

pub use catalog::{Catalog, CatalogManifest, PrefixIndex};
pub use curation::{curate, CuratedSample, CurationConfig, Sample};
pub use decoding::{beam_decode, BeamConfig, DecoderState, Scorer};
pub use error::{
    CatalogError, DataError, DecodeError, EvalError, LinearizationError, PipelineError, ScorerError, VocabError,
};
pub use evaluation::{EvalBatch, EvalDoc};
pub use linearization::{parse_lenient, parse_strict, render, Triplet, TripletSet};
pub use pipeline::{boost_infer, FinalMode};
pub use scalar::Scalar;
pub use vocab::{Special, TokenId, Vocabulary};

/// Exact rational used for oracle-grade metric computations.
pub type Exact = num_rational::BigRational;

pub type Hypothesis = decoding::Hypothesis<f64>;
pub type Hypothesis32 = decoding::Hypothesis<f32>;
pub type TableScorer = decoding::TableScorer<f64>;
pub type TableScorer32 = decoding::TableScorer<f32>;
pub type ScoreReport = evaluation::ScoreReport<f64>;
pub type ExactScoreReport = evaluation::ScoreReport<Exact>;
pub type Interval = evaluation::Interval<f64>;
pub type CategoryFraction = evaluation::CategoryFraction<f64>;
