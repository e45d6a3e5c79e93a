#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use boostcd::catalog::Catalog;
use boostcd::decoding::{FnScorer, Scorer};
use boostcd::linearization::{Triplet, TripletSet};
use boostcd::vocab::{Special, TokenId, Vocabulary};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random name over a small alphabet so that names share prefixes often.
pub fn random_name<R: Rng>(rng: &mut R, alphabet: &[char], max_len: usize) -> String {
    loop {
        let len = rng.gen_range(1..=max_len);
        let s: String = (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect();
        if s.trim() == s {
            return s;
        }
    }
}

pub fn distinct_names<R: Rng>(rng: &mut R, n: usize, alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut attempts = 0;
    while out.len() < n && attempts < 1000 {
        attempts += 1;
        let s = random_name(rng, alphabet, max_len);
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Entity and relation names plus a catalog over a shared vocabulary.
pub struct RandomCatalog {
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub catalog: Catalog,
}

pub fn random_catalog<R: Rng>(
    rng: &mut R,
    vocab: Arc<Vocabulary>,
    max_entities: usize,
    max_relations: usize,
    alphabet: &[char],
    max_name_len: usize,
) -> RandomCatalog {
    let ne = rng.gen_range(0..=max_entities);
    let nr = rng.gen_range(0..=max_relations);
    let entities = distinct_names(rng, ne, alphabet, max_name_len);
    let relations = distinct_names(rng, nr, alphabet, max_name_len);
    let catalog = Catalog::new(vocab, entities.clone(), relations.clone()).expect("valid random names");
    RandomCatalog {
        entities,
        relations,
        catalog,
    }
}

pub fn random_triplets<R: Rng>(rng: &mut R, entities: &[String], relations: &[String], max: usize) -> TripletSet {
    if entities.is_empty() || relations.is_empty() {
        return TripletSet::new();
    }
    let n = rng.gen_range(0..=max);
    (0..n)
        .map(|_| {
            Triplet::new(
                entities.choose(rng).unwrap().clone(),
                relations.choose(rng).unwrap().clone(),
                entities.choose(rng).unwrap().clone(),
            )
        })
        .collect()
}

fn context_hash(seed: u64, prompt: &[TokenId], generated: &[TokenId]) -> u64 {
    let mut h = DefaultHasher::new();
    seed.hash(&mut h);
    prompt.hash(&mut h);
    generated.hash(&mut h);
    h.finish()
}

/// Deterministic pseudo-random next-token distributions. With `coarse`,
/// weights come from {1, 2} so that many sequences tie on score.
pub fn hashed_scorer(vocab_size: usize, seed: u64, coarse: bool) -> impl Scorer<f64> + Sync {
    FnScorer::new(vocab_size, move |prompt: &[TokenId], generated: &[TokenId]| {
        let mut r = rng(context_hash(seed, prompt, generated));
        let w: Vec<f64> = (0..vocab_size)
            .map(|_| {
                if coarse {
                    f64::from(r.gen_range(1..=2u8))
                } else {
                    r.gen_range(0.01..1.0)
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|x| (x / total).ln()).collect::<Vec<f64>>()
    })
}

/// Log-sum-exp written out the obvious way: shift by the max, sum the
/// exponentials in the given order.
pub fn naive_log_sum_exp(xs: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        if x > max {
            max = x;
        }
    }
    if max == f64::NEG_INFINITY {
        return max;
    }
    let mut sum = 0.0;
    for &x in xs {
        sum += (x - max).exp();
    }
    max + sum.ln()
}

/// Tokens the linearization grammar allows next, computed by scanning the
/// name lists directly.
fn naive_allowed(prefix: &[TokenId], entities: &[Vec<TokenId>], relations: &[Vec<TokenId>]) -> Vec<TokenId> {
    let s = Special::Subject.id();
    let r = Special::Relation.id();
    let o = Special::Object.id();
    let e = Special::End.id();
    // locate the last marker to learn which field we are in
    let last = prefix.iter().rposition(|&t| t == s || t == r || t == o || t == e);
    let (names, close, partial) = match last {
        None => return boundary(entities, relations),
        Some(i) if prefix[i] == e => return boundary(entities, relations),
        Some(i) if prefix[i] == s => (entities, r, &prefix[i + 1..]),
        Some(i) if prefix[i] == r => (relations, o, &prefix[i + 1..]),
        Some(i) => (entities, e, &prefix[i + 1..]),
    };
    let mut out = Vec::new();
    for name in names {
        if name.len() > partial.len() && name.starts_with(partial) {
            out.push(name[partial.len()]);
        }
        if !partial.is_empty() && name.as_slice() == partial {
            out.push(close);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn boundary(entities: &[Vec<TokenId>], relations: &[Vec<TokenId>]) -> Vec<TokenId> {
    let mut out = vec![Special::Eos.id()];
    if !entities.is_empty() && !relations.is_empty() {
        out.push(Special::Subject.id());
    }
    out
}

/// Every constrained sequence (EOS excluded) that finishes within `max_len`
/// steps, with its masked log-probability, ranked by score descending then
/// tokens ascending.
pub fn exhaustive_decode<S: Scorer<f64>>(
    scorer: &S,
    prompt: &[TokenId],
    entities: &[Vec<TokenId>],
    relations: &[Vec<TokenId>],
    max_len: usize,
) -> Vec<(Vec<TokenId>, f64)> {
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    walk(scorer, prompt, entities, relations, max_len, &mut prefix, 0.0, &mut out);
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[allow(clippy::too_many_arguments)]
fn walk<S: Scorer<f64>>(
    scorer: &S,
    prompt: &[TokenId],
    entities: &[Vec<TokenId>],
    relations: &[Vec<TokenId>],
    max_len: usize,
    prefix: &mut Vec<TokenId>,
    score: f64,
    out: &mut Vec<(Vec<TokenId>, f64)>,
) {
    let allowed = naive_allowed(prefix, entities, relations);
    let lp = scorer.next_logprobs(prompt, prefix);
    let picked: Vec<f64> = allowed.iter().map(|&t| lp[t as usize]).collect();
    let norm = naive_log_sum_exp(&picked);
    for &t in &allowed {
        let s = score + (lp[t as usize] - norm);
        if t == Special::Eos.id() {
            out.push((prefix.clone(), s));
        } else if prefix.len() + 2 <= max_len {
            prefix.push(t);
            walk(scorer, prompt, entities, relations, max_len, prefix, s, out);
            prefix.pop();
        }
    }
}
