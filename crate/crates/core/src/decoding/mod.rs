//! Constrained and unconstrained beam decoding over a pluggable scorer.

mod beam;
mod scorer;
mod state;

pub use beam::{beam_decode, masked_logprobs, rank, BeamConfig, Hypothesis};
pub use scorer::{
    log_normalize, log_sum_exp, Distribution, FnScorer, NgramModel, NgramScorer, Scorer, TableEntry, TableScorer,
    TableSpec, UniformScorer,
};
pub use state::{advance, allowed_tokens, DecoderState, GrammarPhase};
