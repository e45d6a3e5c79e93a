//! Preference pairs for DPO fine-tuning.
//!
//! Realistic-looking samples are picked with a [`RealnessScorer`]; two
//! candidate extractions per sample are compared by a [`PreferenceJudge`]
//! and kept as (chosen, rejected) when the judge prefers one of them.

use std::collections::HashMap;
use std::io::Write;
use std::process::{Command, Stdio};

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::curation::Sample;
use crate::decoding::{beam_decode, BeamConfig, Scorer};
use crate::linearization::{parse_checked, TripletSet};
use crate::rng::par_map;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DpoError {
    #[error("asked for {k} samples but only {available} exist")]
    TooFew { k: usize, available: usize },
    #[error("judge failed: {0}")]
    Judge(String),
    #[error("candidate provider {provider} failed: {reason}")]
    Provider { provider: String, reason: String },
}

/// Probability that a text is natural rather than synthetic.
pub trait RealnessScorer {
    fn score(&self, text: &str) -> f64;
}

impl<F: Fn(&str) -> f64> RealnessScorer for F {
    fn score(&self, text: &str) -> f64 {
        self(text)
    }
}

/// Fixed scores keyed by sample text; unknown texts score `default`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TableRealness {
    pub scores: HashMap<String, f64>,
    #[serde(default)]
    pub default: f64,
}

impl RealnessScorer for TableRealness {
    fn score(&self, text: &str) -> f64 {
        self.scores.get(text).copied().unwrap_or(self.default)
    }
}

/// Top `k` samples by realness, descending; ties by ascending id.
pub fn select_realistic<R: RealnessScorer + ?Sized>(
    samples: &[Sample],
    scorer: &R,
    k: usize,
) -> Result<Vec<Sample>, DpoError> {
    if k > samples.len() {
        return Err(DpoError::TooFew {
            k,
            available: samples.len(),
        });
    }
    let mut scored: Vec<(f64, &Sample)> = samples.iter().map(|s| (scorer.score(&s.text), s)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
    Ok(scored.into_iter().take(k).map(|(_, s)| s.clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    PreferA,
    PreferB,
    NeitherGood,
}

impl Verdict {
    fn swapped(self) -> Verdict {
        match self {
            Verdict::PreferA => Verdict::PreferB,
            Verdict::PreferB => Verdict::PreferA,
            Verdict::NeitherGood => Verdict::NeitherGood,
        }
    }
}

/// Judge request. `a` and `b` are linearized triplet strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub id: String,
    pub text: String,
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeResponse {
    pub verdict: Verdict,
}

pub trait PreferenceJudge {
    fn judge(&self, request: &JudgeRequest) -> Result<Verdict, DpoError>;
}

/// Carries one request/response exchange, e.g. over HTTP or a subprocess.
pub trait JudgeTransport {
    fn send(&self, request: &JudgeRequest) -> Result<JudgeResponse, DpoError>;
}

/// Judge backed by a remote service reached through a [`JudgeTransport`].
pub struct RemoteJudge<T>(pub T);

impl<T: JudgeTransport> PreferenceJudge for RemoteJudge<T> {
    fn judge(&self, request: &JudgeRequest) -> Result<Verdict, DpoError> {
        self.0.send(request).map(|r| r.verdict)
    }
}

/// Runs a command per request: the request JSON goes to stdin, a
/// [`JudgeResponse`] JSON is read from stdout.
#[derive(Debug, Clone)]
pub struct CommandTransport {
    pub program: String,
    pub args: Vec<String>,
}

impl JudgeTransport for CommandTransport {
    fn send(&self, request: &JudgeRequest) -> Result<JudgeResponse, DpoError> {
        let fail = |e: &dyn std::fmt::Display| DpoError::Judge(format!("{}: {e}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| fail(&e))?;
        let body = serde_json::to_vec(request).map_err(|e| fail(&e))?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(&body)
            .map_err(|e| fail(&e))?;
        let out = child.wait_with_output().map_err(|e| fail(&e))?;
        if !out.status.success() {
            return Err(fail(&out.status));
        }
        serde_json::from_slice(&out.stdout).map_err(|e| fail(&e))
    }
}

/// Deterministic judge: a verdict per sample id, `default` otherwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockJudge {
    pub rules: HashMap<String, Verdict>,
    #[serde(default = "neither")]
    pub default: Verdict,
}

fn neither() -> Verdict {
    Verdict::NeitherGood
}

impl MockJudge {
    pub fn always(verdict: Verdict) -> Self {
        MockJudge {
            rules: HashMap::new(),
            default: verdict,
        }
    }
}

impl PreferenceJudge for MockJudge {
    fn judge(&self, request: &JudgeRequest) -> Result<Verdict, DpoError> {
        Ok(self.rules.get(&request.id).copied().unwrap_or(self.default))
    }
}

/// Produces one candidate triplet set per sample.
pub trait CandidateProvider {
    fn name(&self) -> &str;

    fn candidates(&self, sample: &Sample) -> Result<TripletSet, DpoError>;
}

/// Top-1 constrained decode of a scorer.
pub struct DecodingProvider<'a, S> {
    pub name: String,
    pub scorer: S,
    pub catalog: &'a Catalog,
    pub beam: BeamConfig,
}

impl<S> DecodingProvider<'_, S> {
    pub fn decode<F: Float>(&self, sample: &Sample) -> Result<TripletSet, DpoError>
    where
        S: Scorer<F>,
    {
        let fail = |reason: String| DpoError::Provider {
            provider: self.name.clone(),
            reason,
        };
        let prompt = self
            .catalog
            .vocab()
            .tokenize(&sample.text)
            .map_err(|e| fail(e.to_string()))?;
        let top = beam_decode(&self.scorer, &prompt, Some(self.catalog), self.beam)
            .map_err(|e| fail(e.to_string()))?
            .swap_remove(0);
        Ok(parse_checked(&top.tokens, self.catalog).triplets)
    }
}

impl<S: Scorer<f64>> CandidateProvider for DecodingProvider<'_, S> {
    fn name(&self) -> &str {
        &self.name
    }

    fn candidates(&self, sample: &Sample) -> Result<TripletSet, DpoError> {
        self.decode::<f64>(sample)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub chosen_from: Side,
    pub chosen_provider: String,
    pub rejected_provider: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceRecord {
    pub sample_id: String,
    pub prompt: String,
    pub chosen: TripletSet,
    pub rejected: TripletSet,
    pub provenance: Provenance,
}

/// JSONL form of a [`PreferenceRecord`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceJson {
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub id: String,
    pub chosen_provider: String,
    pub verdict: Verdict,
}

impl From<&PreferenceRecord> for PreferenceJson {
    fn from(r: &PreferenceRecord) -> Self {
        PreferenceJson {
            prompt: r.prompt.clone(),
            chosen: r.chosen.to_text(),
            rejected: r.rejected.to_text(),
            id: r.sample_id.clone(),
            chosen_provider: r.provenance.chosen_provider.clone(),
            verdict: r.provenance.verdict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    NeitherGood,
    DegeneratePair,
    InconsistentJudge,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub id: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreferenceOutcome {
    pub records: Vec<PreferenceRecord>,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreferenceOptions {
    /// Also ask with the candidates swapped; keep only consistent verdicts.
    pub swap_trial: bool,
    /// Upper bound on concurrent judge calls.
    pub jobs: usize,
}

impl Default for PreferenceOptions {
    fn default() -> Self {
        PreferenceOptions {
            swap_trial: false,
            jobs: 1,
        }
    }
}

/// Judges `gen_a` against `gen_b` on every sample. The output keeps sample
/// order; discarded samples are listed with a reason.
pub fn build_preferences<A, B, J>(
    samples: &[Sample],
    gen_a: &A,
    gen_b: &B,
    judge: &J,
    options: PreferenceOptions,
) -> PreferenceOutcome
where
    A: CandidateProvider + Sync + ?Sized,
    B: CandidateProvider + Sync + ?Sized,
    J: PreferenceJudge + Sync + ?Sized,
{
    let results = par_map(
        options.jobs,
        samples,
        |_, sample| -> Result<PreferenceRecord, SkipReason> {
            let failed = |e: DpoError| SkipReason::Failed(e.to_string());
            let a = gen_a.candidates(sample).map_err(failed)?;
            let b = gen_b.candidates(sample).map_err(failed)?;
            let (a_text, b_text) = (a.to_text(), b.to_text());
            if a_text == b_text {
                return Err(SkipReason::DegeneratePair);
            }
            let request = JudgeRequest {
                id: sample.id.clone(),
                text: sample.text.clone(),
                a: a_text,
                b: b_text,
            };
            let verdict = judge.judge(&request).map_err(failed)?;
            if options.swap_trial {
                let swapped = JudgeRequest {
                    a: request.b.clone(),
                    b: request.a.clone(),
                    ..request.clone()
                };
                if judge.judge(&swapped).map_err(failed)?.swapped() != verdict {
                    return Err(SkipReason::InconsistentJudge);
                }
            }
            let provenance = |chosen_from, chosen: &str, rejected: &str| Provenance {
                chosen_from,
                chosen_provider: chosen.to_owned(),
                rejected_provider: rejected.to_owned(),
                verdict,
            };
            let (chosen, rejected, provenance) = match verdict {
                Verdict::PreferA => (a, b, provenance(Side::A, gen_a.name(), gen_b.name())),
                Verdict::PreferB => (b, a, provenance(Side::B, gen_b.name(), gen_a.name())),
                Verdict::NeitherGood => return Err(SkipReason::NeitherGood),
            };
            Ok(PreferenceRecord {
                sample_id: sample.id.clone(),
                prompt: sample.text.clone(),
                chosen,
                rejected,
                provenance,
            })
        },
    );
    let mut outcome = PreferenceOutcome::default();
    for (sample, result) in samples.iter().zip(results) {
        match result {
            Ok(r) => outcome.records.push(r),
            Err(reason) => {
                log::info!("skipping {}: {reason:?}", sample.id);
                outcome.skipped.push(Skipped {
                    id: sample.id.clone(),
                    reason,
                });
            }
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linearization::Triplet;

    fn sample(id: &str, text: &str) -> Sample {
        Sample {
            id: id.into(),
            text: text.into(),
            gold: TripletSet::new(),
        }
    }

    struct Fixed(&'static str, TripletSet);

    impl CandidateProvider for Fixed {
        fn name(&self) -> &str {
            self.0
        }

        fn candidates(&self, _: &Sample) -> Result<TripletSet, DpoError> {
            Ok(self.1.clone())
        }
    }

    fn providers() -> (Fixed, Fixed) {
        (
            Fixed("genie", vec![Triplet::new("A", "r", "B")].into()),
            Fixed("synthie", vec![Triplet::new("A", "q", "B")].into()),
        )
    }

    #[test]
    fn select_sorts_by_score_then_id() {
        let samples = [sample("a", "0.9"), sample("b", "0.1"), sample("c", "0.5")];
        let score = |t: &str| t.parse::<f64>().unwrap();
        let ids = |v: Vec<Sample>| v.into_iter().map(|s| s.id).collect::<Vec<_>>();
        assert_eq!(ids(select_realistic(&samples, &score, 2).unwrap()), ["a", "c"]);
        assert_eq!(ids(select_realistic(&samples, &score, 3).unwrap()), ["a", "c", "b"]);
        let flat = |_: &str| 0.5;
        let tied = [sample("z", ""), sample("m", ""), sample("b", "")];
        assert_eq!(ids(select_realistic(&tied, &flat, 2).unwrap()), ["b", "m"]);
        assert!(select_realistic(&tied, &flat, 4).is_err());
    }

    #[test]
    fn prefer_a_everywhere() {
        let (a, b) = providers();
        let samples = [sample("1", "x"), sample("2", "y"), sample("3", "z")];
        let out = build_preferences(
            &samples,
            &a,
            &b,
            &MockJudge::always(Verdict::PreferA),
            Default::default(),
        );
        assert_eq!(out.records.len(), 3);
        for r in &out.records {
            assert_eq!(r.chosen, a.1);
            assert_eq!(r.rejected, b.1);
            assert_eq!(r.provenance.chosen_provider, "genie");
        }
        let ids: Vec<_> = out.records.iter().map(|r| r.sample_id.as_str()).collect();
        assert_eq!(ids, ["1", "2", "3"]);
    }

    #[test]
    fn neither_good_discards_everything() {
        let (a, b) = providers();
        let samples = [sample("1", "x"), sample("2", "y")];
        let out = build_preferences(
            &samples,
            &a,
            &b,
            &MockJudge::always(Verdict::NeitherGood),
            Default::default(),
        );
        assert!(out.records.is_empty());
        assert!(out.skipped.iter().all(|s| s.reason == SkipReason::NeitherGood));
    }

    #[test]
    fn identical_candidates_are_degenerate() {
        let (a, _) = providers();
        let twin = Fixed("twin", a.1.clone());
        let out = build_preferences(
            &[sample("1", "x")],
            &a,
            &twin,
            &MockJudge::always(Verdict::PreferB),
            Default::default(),
        );
        assert_eq!(out.skipped[0].reason, SkipReason::DegeneratePair);
    }

    #[test]
    fn swap_trial_drops_position_biased_verdicts() {
        let (a, b) = providers();
        // always prefers whichever candidate is shown first
        let biased = MockJudge::always(Verdict::PreferA);
        let opts = PreferenceOptions {
            swap_trial: true,
            jobs: 2,
        };
        let out = build_preferences(&[sample("1", "x")], &a, &b, &biased, opts);
        assert_eq!(out.skipped[0].reason, SkipReason::InconsistentJudge);

        struct ContentJudge;
        impl PreferenceJudge for ContentJudge {
            fn judge(&self, r: &JudgeRequest) -> Result<Verdict, DpoError> {
                Ok(if r.a.contains("[r] r ") {
                    Verdict::PreferA
                } else {
                    Verdict::PreferB
                })
            }
        }
        let out = build_preferences(&[sample("1", "x")], &a, &b, &ContentJudge, opts);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].provenance.chosen_from, Side::A);
    }

    #[test]
    fn mock_judge_uses_rules_by_id() {
        let judge: MockJudge = serde_json::from_str(r#"{"rules": {"2": "PreferB"}}"#).unwrap();
        let (a, b) = providers();
        let out = build_preferences(
            &[sample("1", "x"), sample("2", "y")],
            &a,
            &b,
            &judge,
            Default::default(),
        );
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].sample_id, "2");
        assert_eq!(out.records[0].chosen, b.1);
        let json = PreferenceJson::from(&out.records[0]);
        assert_eq!(json.chosen, "[s] A [r] q [o] B [e]");
    }

    #[test]
    fn wire_format() {
        let req = JudgeRequest {
            id: "1".into(),
            text: "t".into(),
            a: "[s] A [r] r [o] B [e]".into(),
            b: String::new(),
        };
        let json = serde_json::to_value(&req).unwrap();
        assert_eq!(json["a"], "[s] A [r] r [o] B [e]");
        let resp: JudgeResponse = serde_json::from_str(r#"{"verdict":"NeitherGood"}"#).unwrap();
        assert_eq!(resp.verdict, Verdict::NeitherGood);
    }
}
