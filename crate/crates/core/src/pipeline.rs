//! Two-phase boosted decoding.
//!
//! Phase 1 decodes the base scorer twice, unconstrained and constrained.
//! Phase 2 feeds `[TEXT] x [UNC] y_u [CON] y_c` to the boosted scorer,
//! whose training target is the (curated) gold linearization.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::curation::{decode_pass_over, CuratedSample, DecodedSample};
use crate::decoding::{beam_decode, BeamConfig, Scorer};
use crate::error::{DecodeError, PipelineError, VocabError};
use crate::linearization::{parse_checked, parse_lenient, render, ParseReport, TripletSet};
use crate::vocab::{Special, TokenId, Vocabulary};

/// The two phase-1 predictions of one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakPredictions {
    /// Raw top-1 unconstrained output.
    pub unconstrained_tokens: Vec<TokenId>,
    pub unconstrained: ParseReport,
    pub constrained: TripletSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalMode {
    Constrained,
    Unconstrained,
}

/// Top-1 unconstrained and constrained decodes of `prompt`.
pub fn phase_one<F, S>(
    scorer: &S,
    prompt: &[TokenId],
    catalog: &Catalog,
    beam: BeamConfig,
) -> Result<WeakPredictions, DecodeError>
where
    F: Float + Send + Sync,
    S: Scorer<F> + Sync + ?Sized,
{
    let (unconstrained, constrained) = rayon::join(
        || beam_decode(scorer, prompt, None, beam),
        || beam_decode(scorer, prompt, Some(catalog), beam),
    );
    let unconstrained_tokens = unconstrained?.swap_remove(0).tokens;
    let constrained = constrained?.swap_remove(0);
    let constrained = parse_checked(&constrained.tokens, catalog).triplets;
    Ok(WeakPredictions {
        unconstrained: parse_lenient(&unconstrained_tokens, catalog.vocab()),
        unconstrained_tokens,
        constrained,
    })
}

/// `[TEXT] x [UNC] render(y_u) [CON] render(y_c)`. The unconstrained
/// triplets are rendered verbatim, malformed relations included.
pub fn assemble_boosted_input(
    text: &str,
    unconstrained: &ParseReport,
    constrained: &TripletSet,
    vocab: &Vocabulary,
) -> Result<Vec<TokenId>, VocabError> {
    let mut out = vec![Special::Text.id()];
    out.extend(vocab.tokenize(text)?);
    out.push(Special::Unconstrained.id());
    out.extend(render(&unconstrained.triplets, vocab)?);
    out.push(Special::Constrained.id());
    out.extend(render(constrained, vocab)?);
    Ok(out)
}

/// The three segments of an assembled input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoostedSegments<'a> {
    pub text: &'a [TokenId],
    pub unconstrained: &'a [TokenId],
    pub constrained: &'a [TokenId],
}

/// Inverse of [`assemble_boosted_input`].
pub fn split_boosted_input(input: &[TokenId]) -> Result<BoostedSegments<'_>, PipelineError> {
    let find = |special: Special, name| {
        let mut hits = input.iter().enumerate().filter(|&(_, &t)| t == special.id());
        match (hits.next(), hits.next()) {
            (Some((i, _)), None) => Ok(i),
            _ => Err(PipelineError::MissingSegment(name)),
        }
    };
    let text = find(Special::Text, "[TEXT]")?;
    let unc = find(Special::Unconstrained, "[UNC]")?;
    let con = find(Special::Constrained, "[CON]")?;
    if !(text == 0 && text < unc && unc < con) {
        return Err(PipelineError::MissingSegment("[TEXT] < [UNC] < [CON]"));
    }
    Ok(BoostedSegments {
        text: &input[text + 1..unc],
        unconstrained: &input[unc + 1..con],
        constrained: &input[con + 1..],
    })
}

/// One boosted-model training example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoostedRecord {
    pub sample_id: String,
    pub input: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

/// JSONL form of a [`BoostedRecord`], using human-readable marker strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoostedRecordJson {
    pub id: String,
    pub input_text: String,
    pub target_text: String,
}

impl BoostedRecord {
    pub fn to_json(&self, vocab: &Vocabulary) -> BoostedRecordJson {
        BoostedRecordJson {
            id: self.sample_id.clone(),
            input_text: vocab.decode(&self.input),
            target_text: vocab.decode(&self.target),
        }
    }
}

/// Training set plus the samples that failed.
#[derive(Debug, Default)]
pub struct BuildOutcome {
    pub records: Vec<BoostedRecord>,
    pub decoded: Vec<DecodedSample>,
    pub failures: Vec<PipelineError>,
}

/// Phase-1 decodes every curated sample, then pairs the assembled input
/// with the curated gold target. Failing samples are collected and the run
/// continues.
pub fn build_boosted_training_set<F, S>(
    curated: &[CuratedSample],
    base_scorer: &S,
    catalog: &Catalog,
    beam: BeamConfig,
    jobs: usize,
) -> BuildOutcome
where
    F: Float + Send + Sync,
    S: Scorer<F> + Sync + ?Sized,
{
    let vocab = catalog.vocab();
    let mut outcome = BuildOutcome::default();
    for result in decode_pass_over(curated, base_scorer, catalog, beam, jobs) {
        let decoded = match result {
            Ok(d) => d,
            Err(e) => {
                log::warn!("{e}");
                outcome.failures.push(e);
                continue;
            }
        };
        let sample = &decoded.sample;
        let built = assemble_boosted_input(
            &sample.base.text,
            &decoded.weak.unconstrained,
            &decoded.weak.constrained,
            vocab,
        )
        .and_then(|input| Ok((input, render(&sample.curated_gold, vocab)?)));
        match built {
            Ok((input, target)) => {
                outcome.records.push(BoostedRecord {
                    sample_id: sample.base.id.clone(),
                    input,
                    target,
                });
                outcome.decoded.push(decoded);
            }
            Err(e) => outcome.failures.push(PipelineError::Linearization {
                id: sample.base.id.clone(),
                source: e.into(),
            }),
        }
    }
    outcome
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostOutput {
    pub triplets: TripletSet,
    pub report: ParseReport,
    pub tokens: Vec<TokenId>,
    /// Weak predictions of every non-final stage, in order.
    pub weak: Vec<WeakPredictions>,
}

/// Base decode, assembly, boosted decode in `final_mode` over the full catalog.
pub fn boost_infer<F, S, B>(
    base_scorer: &S,
    boosted_scorer: &B,
    text: &str,
    catalog: &Catalog,
    final_mode: FinalMode,
    beam: BeamConfig,
) -> Result<BoostOutput, PipelineError>
where
    F: Float + Send + Sync,
    S: Scorer<F> + Sync + ?Sized,
    B: Scorer<F> + Sync + ?Sized,
{
    let chain: [&(dyn Scorer<F> + Sync); 2] = [&DynRef(base_scorer), &DynRef(boosted_scorer)];
    boost_infer_chain(&chain, text, catalog, final_mode, beam)
}

struct DynRef<'a, S: ?Sized>(&'a S);

impl<F: Float, S: Scorer<F> + ?Sized> Scorer<F> for DynRef<'_, S> {
    fn vocab_size(&self) -> usize {
        self.0.vocab_size()
    }

    fn next_logprobs(&self, prompt: &[TokenId], generated: &[TokenId]) -> Vec<F> {
        self.0.next_logprobs(prompt, generated)
    }
}

/// Generalization of [`boost_infer`] to several boosting rounds: every
/// scorer but the last produces weak predictions for the next one, whose
/// input is always assembled around the original text.
pub fn boost_infer_chain<F>(
    chain: &[&(dyn Scorer<F> + Sync)],
    text: &str,
    catalog: &Catalog,
    final_mode: FinalMode,
    beam: BeamConfig,
) -> Result<BoostOutput, PipelineError>
where
    F: Float + Send + Sync,
{
    if chain.len() < 2 {
        return Err(PipelineError::ShortChain(chain.len()));
    }
    let id = || "<infer>".to_owned();
    let vocab = catalog.vocab();
    let vocab_err = |e: VocabError| PipelineError::Linearization {
        id: id(),
        source: e.into(),
    };
    let mut prompt = vocab.tokenize(text).map_err(vocab_err)?;
    let mut weak = Vec::new();
    let (last, stages) = chain.split_last().expect("chain has at least two scorers");
    for &scorer in stages {
        let w =
            phase_one(scorer, &prompt, catalog, beam).map_err(|source| PipelineError::Decode { id: id(), source })?;
        prompt = assemble_boosted_input(text, &w.unconstrained, &w.constrained, vocab).map_err(vocab_err)?;
        weak.push(w);
    }
    let view = match final_mode {
        FinalMode::Constrained => Some(catalog),
        FinalMode::Unconstrained => None,
    };
    let top = beam_decode(*last, &prompt, view, beam)
        .map_err(|source| PipelineError::Decode { id: id(), source })?
        .swap_remove(0);
    let report = match final_mode {
        FinalMode::Constrained => parse_checked(&top.tokens, catalog),
        FinalMode::Unconstrained => parse_lenient(&top.tokens, vocab),
    };
    Ok(BoostOutput {
        triplets: report.triplets.clone(),
        report,
        tokens: top.tokens,
        weak,
    })
}
