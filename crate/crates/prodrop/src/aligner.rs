//! Minimal EM word aligner (lexical-translation model).
//!
//! The model explains each source word as a sample from the lexical
//! distribution of one target word (or of the special NULL item): for a
//! pair with target length `l`, P(source sentence | target sentence) =
//! prod_i sum_j (1/(l+1)) * t(f_i | e_j), with `j` ranging over target
//! positions plus NULL. Training is classic EM with uniform
//! initialization; each iteration's expected corpus log-likelihood is
//! recorded and must be non-decreasing.
//!
//! Viterbi alignment links each source word to its argmax target word
//! unless the NULL item strictly beats every target word (ties prefer a
//! real target, then the smallest target index). A target word is then
//! "unaligned" — the signal downstream projection consumes — when no
//! source word links to it.
//!
//! The conditioning symbol for NULL is the reserved string `<null>`;
//! corpora that use it as an ordinary target token are not supported.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus::{AlignedSentencePair, CorpusError, Sentence};

/// Reserved conditioning symbol for the empty (NULL) target item.
pub const NULL_TOKEN: &str = "<null>";

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("cannot train an alignment model on an empty corpus")]
    EmptyCorpus,
    #[error("EM needs at least 1 iteration, got {0}")]
    InvalidIterations(usize),
}

/// Lexical translation table: for each target word `e` (or NULL) a
/// distribution over source words, `sum_f t(f|e) = 1`.
#[derive(Debug, Clone)]
pub struct LexTable {
    t: BTreeMap<String, BTreeMap<String, f64>>,
    log_likelihoods: Vec<f64>,
}

impl LexTable {
    /// t(source | target); `None` is the NULL item. Unseen combinations
    /// score 0.
    pub fn prob(&self, target: Option<&str>, source: &str) -> f64 {
        let key = target.unwrap_or(NULL_TOKEN);
        self.t
            .get(key)
            .and_then(|dist| dist.get(source))
            .copied()
            .unwrap_or(0.0)
    }

    /// Expected corpus log-likelihood per EM iteration, evaluated under
    /// the parameters that iteration started from.
    pub fn log_likelihood_series(&self) -> &[f64] {
        &self.log_likelihoods
    }

    /// All stored conditional distributions, keyed by target word
    /// (`<null>` for the NULL item).
    pub fn distributions(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, f64>)> {
        self.t.iter().map(|(e, d)| (e.as_str(), d))
    }
}

/// Trains the lexical table with `iterations` EM sweeps.
pub fn train_model1(
    pairs: &[(Sentence, Sentence)],
    iterations: usize,
) -> Result<LexTable, AlignError> {
    if pairs.is_empty() {
        return Err(AlignError::EmptyCorpus);
    }
    if iterations == 0 {
        return Err(AlignError::InvalidIterations(0));
    }

    let mut source_vocab: BTreeMap<&str, ()> = BTreeMap::new();
    for (src, _) in pairs {
        for f in src.surfaces() {
            source_vocab.insert(f, ());
        }
    }
    let uniform = 1.0 / source_vocab.len() as f64;

    // t[e][f], initialized uniform over the source vocabulary for every
    // conditioning item that ever co-occurs with f (plus NULL).
    let mut t: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (src, tgt) in pairs {
        for f in src.surfaces() {
            for e in tgt.surfaces().chain(std::iter::once(NULL_TOKEN)) {
                t.entry(e.to_string())
                    .or_default()
                    .insert(f.to_string(), uniform);
            }
        }
    }

    let mut log_likelihoods = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut counts: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
        let mut ll = 0.0;
        for (src, tgt) in pairs {
            let prior = 1.0 / (tgt.len() as f64 + 1.0);
            for f in src.surfaces() {
                let items = || tgt.surfaces().chain(std::iter::once(NULL_TOKEN));
                let denom: f64 = items().map(|e| t[e][f]).sum();
                ll += (denom * prior).ln();
                for e in items() {
                    *counts.entry(e).or_default().entry(f).or_insert(0.0) +=
                        t[e][f] / denom;
                }
            }
        }
        if let Some(prev) = log_likelihoods.last() {
            let prev: f64 = *prev;
            assert!(
                ll >= prev - prev.abs() * 1e-9 - 1e-12,
                "EM log-likelihood decreased: {prev} -> {ll}"
            );
        }
        log_likelihoods.push(ll);

        for (e, fs) in counts {
            let total: f64 = fs.values().sum();
            let dist = t.get_mut(e).expect("counted item was initialized");
            for (f, c) in fs {
                dist.insert(f.to_string(), c / total);
            }
        }
    }

    Ok(LexTable { t, log_likelihoods })
}

/// Viterbi alignment of one pair: returns Pharaoh-convention links
/// (source index, target index). A source word gets no link only when
/// NULL strictly outscores every target word for it (or nothing scores
/// above zero).
pub fn viterbi_align(
    table: &LexTable,
    source: &Sentence,
    target: &Sentence,
) -> Vec<(usize, usize)> {
    let mut links = Vec::new();
    for (i, f) in source.surfaces().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, e) in target.surfaces().enumerate() {
            let p = table.prob(Some(e), f);
            if best.map_or(true, |(_, bp)| p > bp) {
                best = Some((j, p));
            }
        }
        if let Some((j, p)) = best {
            if p > 0.0 && p >= table.prob(None, f) {
                links.push((i, j));
            }
        }
    }
    links
}

/// Aligns a whole corpus, packaging each pair with its Viterbi links.
pub fn align_corpus(
    table: &LexTable,
    pairs: &[(Sentence, Sentence)],
) -> Result<Vec<AlignedSentencePair>, CorpusError> {
    pairs
        .iter()
        .map(|(src, tgt)| {
            let links = viterbi_align(table, src, tgt).into_iter().collect();
            AlignedSentencePair::new(src.clone(), tgt.clone(), links)
        })
        .collect()
}
