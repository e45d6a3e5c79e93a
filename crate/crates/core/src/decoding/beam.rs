use std::cmp::Ordering;

use num_traits::Float;

use super::scorer::{log_sum_exp, Scorer};
use super::state::DecoderState;
use crate::catalog::Catalog;
use crate::error::DecodeError;
use crate::vocab::{Special, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamConfig {
    pub beam_width: usize,
    /// Upper bound on generated tokens, counting the final `Eos`.
    pub max_len: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            beam_width: 10,
            max_len: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<F> {
    /// Generated tokens, without the terminating `Eos`.
    pub tokens: Vec<TokenId>,
    /// Sum of the chosen tokens' log-probabilities, `Eos` included.
    pub score: F,
    /// Grammar state; `None` in unconstrained mode.
    pub state: Option<DecoderState>,
    pub finished: bool,
}

/// Descending score, then ascending token sequence.
pub fn rank<F: Float>(a: &Hypothesis<F>, b: &Hypothesis<F>) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

fn check_logprobs<F: Float>(lp: &[F], vocab_size: usize) -> Result<(), DecodeError> {
    if lp.len() != vocab_size {
        return Err(DecodeError::ScorerContract(format!(
            "expected {vocab_size} log-probabilities, got {}",
            lp.len()
        )));
    }
    // -inf is a legitimate zero probability
    if let Some(i) = lp.iter().position(|x| x.is_nan() || *x == F::infinity()) {
        return Err(DecodeError::ScorerContract(format!(
            "invalid log-probability for token {i}"
        )));
    }
    Ok(())
}

/// Log-probabilities over `allowed` after masking and renormalizing, in
/// the order of `allowed`.
pub fn masked_logprobs<F: Float>(logprobs: &[F], allowed: &[TokenId]) -> Vec<F> {
    let norm = log_sum_exp(allowed.iter().map(|&t| logprobs[t as usize]));
    allowed.iter().map(|&t| logprobs[t as usize] - norm).collect()
}

/// Beam search over `scorer`.
///
/// With a catalog, every step masks the distribution to the grammar's
/// allowed tokens and renormalizes; hypotheses that can no longer finish
/// within `max_len` are dropped. Without one, the raw distribution is used
/// and, if nothing finishes, the best unfinished hypotheses are returned.
///
/// Zero-probability tokens are never taken. Scores are raw log-probability sums with no length normalization; ties
/// are broken by the lexicographically smaller token sequence.
pub fn beam_decode<F, S>(
    scorer: &S,
    prompt: &[TokenId],
    catalog: Option<&Catalog>,
    config: BeamConfig,
) -> Result<Vec<Hypothesis<F>>, DecodeError>
where
    F: Float,
    S: Scorer<F> + ?Sized,
{
    let BeamConfig { beam_width, max_len } = config;
    if beam_width == 0 {
        return Err(DecodeError::InvalidConfig("beam width must be >= 1"));
    }
    if max_len == 0 {
        return Err(DecodeError::InvalidConfig("max_len must be >= 1"));
    }
    let vocab_size = scorer.vocab_size();
    if let Some(c) = catalog {
        if c.vocab().len() != vocab_size {
            return Err(DecodeError::ScorerContract(format!(
                "scorer vocabulary has {vocab_size} tokens, catalog vocabulary {}",
                c.vocab().len()
            )));
        }
    }
    let eos = Special::Eos.id();

    let mut beam = vec![Hypothesis {
        tokens: Vec::new(),
        score: F::zero(),
        state: catalog.map(|_| DecoderState::new()),
        finished: false,
    }];
    let mut finished: Vec<Hypothesis<F>> = Vec::new();

    for step in 0..max_len {
        let remaining = max_len - step - 1;
        let mut live = Vec::new();
        for hyp in &beam {
            let logprobs = scorer.next_logprobs(prompt, &hyp.tokens);
            check_logprobs(&logprobs, vocab_size)?;
            match (catalog, &hyp.state) {
                (Some(catalog), Some(state)) => {
                    let allowed: Vec<TokenId> = state.allowed_tokens(catalog).into_iter().collect();
                    let masked = masked_logprobs(&logprobs, &allowed);
                    for (&tok, &lp) in allowed.iter().zip(&masked) {
                        if !lp.is_finite() {
                            continue;
                        }
                        let score = hyp.score + lp;
                        if tok == eos {
                            finished.push(Hypothesis {
                                tokens: hyp.tokens.clone(),
                                score,
                                state: Some(state.clone()),
                                finished: true,
                            });
                            continue;
                        }
                        let next = state.advance(tok, catalog)?;
                        if next.min_completion(catalog).is_none_or(|need| need > remaining) {
                            continue;
                        }
                        let mut tokens = hyp.tokens.clone();
                        tokens.push(tok);
                        live.push(Hypothesis {
                            tokens,
                            score,
                            state: Some(next),
                            finished: false,
                        });
                    }
                }
                _ => {
                    for (tok, &lp) in logprobs.iter().enumerate() {
                        if !lp.is_finite() {
                            continue;
                        }
                        let tok = tok as TokenId;
                        let score = hyp.score + lp;
                        let mut tokens = hyp.tokens.clone();
                        let done = tok == eos;
                        if !done {
                            tokens.push(tok);
                        }
                        let h = Hypothesis {
                            tokens,
                            score,
                            state: None,
                            finished: done,
                        };
                        if done {
                            finished.push(h);
                        } else {
                            live.push(h);
                        }
                    }
                }
            }
        }
        finished.sort_by(rank);
        finished.truncate(beam_width);
        live.sort_by(rank);
        live.truncate(beam_width);

        // Step scores are <= 0, so a live hypothesis strictly below the
        // worst kept finished one can never enter the final list.
        if finished.len() == beam_width {
            let worst = finished[beam_width - 1].score;
            live.retain(|h| h.score >= worst);
        }
        if live.is_empty() {
            beam = live;
            break;
        }
        beam = live;
    }

    if !finished.is_empty() {
        return Ok(finished);
    }
    if catalog.is_some() {
        return Err(DecodeError::NoValidContinuation { max_len });
    }
    Ok(beam)
}
