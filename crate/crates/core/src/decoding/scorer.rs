//! Token scorers: the autoregressive model behind a decode.
//!
//! Two file-backed scorers ship with the crate: [`TableScorer`] (explicit
//! per-context distributions) and [`NgramScorer`] (Laplace-smoothed counts).

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read};
use std::sync::Arc;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::ScorerError;
use crate::vocab::{Special, TokenId, Vocabulary};

/// A source of next-token log-probabilities.
///
/// `prompt` is the conditioning input (the encoder side) and `generated`
/// the tokens decoded so far. The result holds one log-probability per
/// vocabulary id (`-inf` for impossible tokens, never NaN) and must not
/// depend on anything but the arguments.
pub trait Scorer<F: Float> {
    fn vocab_size(&self) -> usize;

    fn next_logprobs(&self, prompt: &[TokenId], generated: &[TokenId]) -> Vec<F>;
}

impl<F: Float, S: Scorer<F> + ?Sized> Scorer<F> for &S {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_logprobs(&self, prompt: &[TokenId], generated: &[TokenId]) -> Vec<F> {
        (**self).next_logprobs(prompt, generated)
    }
}

impl<F: Float, S: Scorer<F> + ?Sized> Scorer<F> for Box<S> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_logprobs(&self, prompt: &[TokenId], generated: &[TokenId]) -> Vec<F> {
        (**self).next_logprobs(prompt, generated)
    }
}

impl<F: Float, S: Scorer<F> + ?Sized> Scorer<F> for Arc<S> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_logprobs(&self, prompt: &[TokenId], generated: &[TokenId]) -> Vec<F> {
        (**self).next_logprobs(prompt, generated)
    }
}

/// `max + ln Σ exp(x - max)`, summed in iteration order.
pub fn log_sum_exp<F: Float, I: IntoIterator<Item = F>>(values: I) -> F {
    let values: Vec<F> = values.into_iter().collect();
    let max = values.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    let sum = values.iter().fold(F::zero(), |acc, &x| acc + (x - max).exp());
    max + sum.ln()
}

/// Turns non-negative weights into log-probabilities.
pub fn log_normalize<F: Float>(weights: &[F]) -> Vec<F> {
    let total = weights.iter().fold(F::zero(), |a, &w| a + w);
    weights.iter().map(|&w| (w / total).ln()).collect()
}

/// Wraps a closure as a scorer.
pub struct FnScorer<Func> {
    vocab_size: usize,
    func: Func,
}

impl<Func> FnScorer<Func> {
    pub fn new(vocab_size: usize, func: Func) -> Self {
        FnScorer { vocab_size, func }
    }
}

impl<F, Func> Scorer<F> for FnScorer<Func>
where
    F: Float,
    Func: Fn(&[TokenId], &[TokenId]) -> Vec<F>,
{
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, prompt: &[TokenId], generated: &[TokenId]) -> Vec<F> {
        (self.func)(prompt, generated)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UniformScorer {
    pub vocab_size: usize,
}

impl<F: Float> Scorer<F> for UniformScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, _: &[TokenId], _: &[TokenId]) -> Vec<F> {
        let n = F::from(self.vocab_size).expect("vocabulary size fits the float type");
        vec![-n.ln(); self.vocab_size]
    }
}

/// Probability weights keyed by token string.
pub type Distribution = BTreeMap<String, f64>;

/// JSON form of a [`TableScorer`].
///
/// Context and prompt keys are the raw concatenation of token strings
/// ([`Vocabulary::raw`]), e.g. `"[s]Pep"`. Weights need not be normalized;
/// every token missing from a distribution gets weight `floor`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TableSpec {
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default)]
    pub default: Distribution,
    #[serde(default)]
    pub entries: Vec<TableEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub context: String,
    pub dist: Distribution,
}

fn default_floor() -> f64 {
    1e-6
}

/// Scorer driven by an explicit lookup table. Lookup order: entry for
/// (prompt, context), entry for context alone, default distribution.
#[derive(Debug, Clone)]
pub struct TableScorer<F> {
    vocab: Arc<Vocabulary>,
    default: Vec<F>,
    by_context: HashMap<String, Vec<F>>,
    by_prompt: HashMap<(String, String), Vec<F>>,
}

impl<F: Float> TableScorer<F> {
    pub fn new(spec: &TableSpec, vocab: Arc<Vocabulary>) -> Result<Self, ScorerError> {
        if !(spec.floor > 0.0 && spec.floor.is_finite()) {
            return Err(ScorerError::Invalid(format!(
                "floor must be positive, got {}",
                spec.floor
            )));
        }
        let resolve = |dist: &Distribution| -> Result<Vec<F>, ScorerError> {
            let floor = if dist.is_empty() { 1.0 } else { spec.floor };
            let mut weights = vec![floor; vocab.len()];
            for (tok, &w) in dist {
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(ScorerError::Invalid(format!(
                        "weight for {tok:?} must be finite and >= 0"
                    )));
                }
                let id = vocab.id_of(tok).ok_or_else(|| ScorerError::UnknownToken(tok.clone()))?;
                weights[id as usize] = w.max(spec.floor);
            }
            let weights: Vec<F> = weights.into_iter().map(|w| F::from(w).unwrap()).collect();
            Ok(log_normalize(&weights))
        };
        let mut by_context = HashMap::new();
        let mut by_prompt = HashMap::new();
        for entry in &spec.entries {
            let dist = resolve(&entry.dist)?;
            match &entry.prompt {
                Some(p) => by_prompt.insert((p.clone(), entry.context.clone()), dist),
                None => by_context.insert(entry.context.clone(), dist),
            };
        }
        Ok(TableScorer {
            default: resolve(&spec.default)?,
            by_context,
            by_prompt,
            vocab,
        })
    }

    pub fn from_reader<R: Read>(reader: R, vocab: Arc<Vocabulary>) -> Result<Self, ScorerError> {
        let spec: TableSpec = serde_json::from_reader(BufReader::new(reader))?;
        TableScorer::new(&spec, vocab)
    }
}

impl<F: Float> Scorer<F> for TableScorer<F> {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn next_logprobs(&self, prompt: &[TokenId], generated: &[TokenId]) -> Vec<F> {
        let context = self.vocab.raw(generated);
        if !self.by_prompt.is_empty() {
            let key = (self.vocab.raw(prompt), context);
            if let Some(d) = self.by_prompt.get(&key) {
                return d.clone();
            }
            return self.by_context.get(&key.1).unwrap_or(&self.default).clone();
        }
        self.by_context.get(&context).unwrap_or(&self.default).clone()
    }
}

/// `(history, [(next, count)])` rows of an n-gram model.
pub type NgramCounts = Vec<(Vec<TokenId>, Vec<(TokenId, u64)>)>;

/// Serialized n-gram model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramModel {
    pub order: usize,
    pub vocab: Vocabulary,
    /// Sorted by history.
    pub counts: NgramCounts,
}

/// Laplace-smoothed n-gram scorer over the generated tokens; the prompt is
/// ignored. Histories shorter than `order - 1` are left-padded with `Bos`.
#[derive(Debug, Clone)]
pub struct NgramScorer {
    order: usize,
    vocab: Arc<Vocabulary>,
    counts: HashMap<Vec<TokenId>, (u64, HashMap<TokenId, u64>)>,
}

impl NgramScorer {
    /// Fits on token sequences; each is followed by `Eos`.
    pub fn fit<I>(order: usize, vocab: Arc<Vocabulary>, sequences: I) -> Result<Self, ScorerError>
    where
        I: IntoIterator<Item = Vec<TokenId>>,
    {
        if order == 0 {
            return Err(ScorerError::Invalid("n-gram order must be >= 1".into()));
        }
        let mut counts: HashMap<Vec<TokenId>, (u64, HashMap<TokenId, u64>)> = HashMap::new();
        for seq in sequences {
            let mut padded = vec![Special::Bos.id(); order - 1];
            padded.extend(seq);
            padded.push(Special::Eos.id());
            for window in padded.windows(order) {
                let (history, next) = window.split_at(order - 1);
                let slot = counts.entry(history.to_vec()).or_default();
                slot.0 += 1;
                *slot.1.entry(next[0]).or_default() += 1;
            }
        }
        Ok(NgramScorer { order, vocab, counts })
    }

    /// Fits on lines of marked text (see [`Vocabulary::encode_marked`]).
    pub fn fit_text<R: Read>(order: usize, vocab: Arc<Vocabulary>, reader: R) -> Result<Self, ScorerError> {
        let mut sequences = Vec::new();
        for line in BufReader::new(reader).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            sequences.push(vocab.encode_marked(&line)?);
        }
        NgramScorer::fit(order, vocab, sequences)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn to_model(&self) -> NgramModel {
        let mut counts: Vec<_> = self
            .counts
            .iter()
            .map(|(h, (_, next))| {
                let mut next: Vec<_> = next.iter().map(|(&t, &c)| (t, c)).collect();
                next.sort_unstable();
                (h.clone(), next)
            })
            .collect();
        counts.sort();
        NgramModel {
            order: self.order,
            vocab: (*self.vocab).clone(),
            counts,
        }
    }

    pub fn from_model(model: NgramModel) -> Result<Self, ScorerError> {
        if model.order == 0 {
            return Err(ScorerError::Invalid("n-gram order must be >= 1".into()));
        }
        let vocab_size = model.vocab.len() as TokenId;
        let mut counts = HashMap::new();
        for (history, next) in model.counts {
            if history.len() != model.order - 1 || next.iter().any(|&(t, _)| t >= vocab_size) {
                return Err(ScorerError::Invalid(
                    "n-gram table does not match its order or vocabulary".into(),
                ));
            }
            let total = next.iter().map(|&(_, c)| c).sum();
            counts.insert(history, (total, next.into_iter().collect()));
        }
        Ok(NgramScorer {
            order: model.order,
            vocab: Arc::new(model.vocab),
            counts,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }
}

impl<F: Float> Scorer<F> for NgramScorer {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn next_logprobs(&self, _prompt: &[TokenId], generated: &[TokenId]) -> Vec<F> {
        let k = self.order - 1;
        let mut history = vec![Special::Bos.id(); k.saturating_sub(generated.len())];
        history.extend_from_slice(&generated[generated.len().saturating_sub(k)..]);
        let v = self.vocab.len();
        let cast = |x: u64| F::from(x).expect("count fits the float type");
        match self.counts.get(&history) {
            Some((total, next)) => {
                let denom = cast(total + v as u64);
                (0..v as TokenId)
                    .map(|t| (cast(next.get(&t).copied().unwrap_or(0) + 1) / denom).ln())
                    .collect()
            }
            None => vec![-cast(v as u64).ln(); v],
        }
    }
}
