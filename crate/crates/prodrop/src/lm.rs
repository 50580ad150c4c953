//! Back-off n-gram language model with interpolated absolute discounting.
//!
//! Training replaces singleton tokens with `<unk>`, pads each sentence with
//! `n-1` `<s>` symbols, and appends one `</s>`. For every context observed
//! in training (all orders `0..n-1`) the model stores the full interpolated
//! distribution over the vocabulary; scoring backs off to the longest
//! stored suffix of the history, which reproduces the interpolated model
//! exactly (an unseen context passes all its mass to its suffix).
//!
//! Perplexity of a sentence of `T` tokens is
//! `exp(-(1/(T+1)) * sum log P(w_t | context))`, the end marker counted as
//! a predicted event.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::corpus::Sentence;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Absolute discount subtracted from every observed n-gram count.
pub const DISCOUNT: f64 = 0.75;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("cannot train a language model on an empty corpus")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct NGramLM {
    order: usize,
    vocab: BTreeSet<String>,
    /// context (space-joined, "" for the empty context) -> token -> P(token|context)
    dists: BTreeMap<String, BTreeMap<String, f64>>,
}

impl NGramLM {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    /// All stored conditional distributions (each covers the full vocab).
    pub fn distributions(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, f64>)> {
        self.dists.iter().map(|(c, d)| (c.as_str(), d))
    }

    fn map_token<'a>(&self, token: &'a str) -> &'a str {
        if self.vocab.contains(token) {
            token
        } else {
            UNK
        }
    }

    /// P(token | context), where `context` lists the preceding tokens
    /// oldest-first. Uses at most the last `order - 1` of them; unknown
    /// tokens (in the context or as the prediction) map to `<unk>`.
    pub fn prob(&self, context: &[&str], token: &str) -> f64 {
        let token = self.map_token(token);
        let start = context.len().saturating_sub(self.order - 1);
        let mut window: Vec<&str> = context[start..].iter().map(|t| self.map_token(t)).collect();
        loop {
            let key = window.join(" ");
            if let Some(dist) = self.dists.get(&key) {
                return dist[token];
            }
            window.remove(0); // the empty context is always stored
        }
    }

    /// Perplexity of the sentence, end marker included in the length.
    pub fn perplexity(&self, sentence: &Sentence) -> f64 {
        let mut seq: Vec<&str> = Vec::with_capacity(sentence.len() + self.order);
        for _ in 0..self.order - 1 {
            seq.push(BOS);
        }
        seq.extend(sentence.surfaces());
        seq.push(EOS);
        let first = self.order - 1;
        let mut log_prob = 0.0;
        for i in first..seq.len() {
            log_prob += self.prob(&seq[..i], seq[i]).ln();
        }
        let t = (sentence.len() + 1) as f64;
        (-log_prob / t).exp()
    }
}

/// Trains an order-`order` model on the corpus. Tokens that occur exactly
/// once in the whole corpus are replaced by `<unk>` before counting.
pub fn train_lm(corpus: &[Sentence], order: usize) -> Result<NGramLM, LmError> {
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    if order == 0 {
        return Err(LmError::InvalidOrder(0));
    }

    let mut freq: HashMap<&str, u64> = HashMap::new();
    for sentence in corpus {
        for surface in sentence.surfaces() {
            *freq.entry(surface).or_insert(0) += 1;
        }
    }
    fn map<'a>(freq: &HashMap<&str, u64>, t: &'a str) -> &'a str {
        if freq[&t] == 1 {
            UNK
        } else {
            t
        }
    }

    let mut vocab: BTreeSet<String> = [BOS, EOS, UNK].iter().map(|s| s.to_string()).collect();
    for (surface, n) in &freq {
        if *n > 1 {
            vocab.insert(surface.to_string());
        }
    }

    // counts[context joined by spaces] = (total, per-token counts)
    let mut counts: HashMap<String, (u64, HashMap<String, u64>)> = HashMap::new();
    for sentence in corpus {
        let mut seq: Vec<&str> = Vec::with_capacity(sentence.len() + order);
        for _ in 0..order - 1 {
            seq.push(BOS);
        }
        seq.extend(sentence.surfaces().map(|t| map(&freq, t)));
        seq.push(EOS);
        for i in order - 1..seq.len() {
            let token = seq[i];
            for k in 0..order {
                let key = seq[i - k..i].join(" ");
                let entry = counts.entry(key).or_default();
                entry.0 += 1;
                *entry.1.entry(token.to_string()).or_insert(0) += 1;
            }
        }
    }

    // Build full distributions bottom-up: short contexts first, so each
    // context can interpolate with its (always present) one-shorter suffix.
    let vocab_size = vocab.len() as f64;
    let mut keys: Vec<String> = counts.keys().cloned().collect();
    keys.sort_by_key(|k| context_len(k));
    let mut dists: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for key in keys {
        let (total, token_counts) = &counts[&key];
        let total = *total as f64;
        let distinct = token_counts.len() as f64;
        let backoff_mass = DISCOUNT * distinct / total;
        let parent = parent_key(&key).map(|p| dists[p].clone());
        let mut dist = BTreeMap::new();
        for word in &vocab {
            let count = token_counts.get(word).copied().unwrap_or(0) as f64;
            let discounted = (count - DISCOUNT).max(0.0) / total;
            let lower = match &parent {
                Some(p) => p[word],
                None => 1.0 / vocab_size,
            };
            dist.insert(word.clone(), discounted + backoff_mass * lower);
        }
        dists.insert(key, dist);
    }

    Ok(NGramLM {
        order,
        vocab,
        dists,
    })
}

fn context_len(key: &str) -> usize {
    if key.is_empty() {
        0
    } else {
        key.split(' ').count()
    }
}

fn parent_key(key: &str) -> Option<&str> {
    if key.is_empty() {
        None
    } else {
        Some(key.split_once(' ').map_or("", |(_, rest)| rest))
    }
}

// ------------------------------------------------------------- model file

/// Renders the model as text: a `NGRAM <order> <vocab_size>` header, then
/// one `context<TAB>token<TAB>probability` record per (stored context,
/// vocab token), probabilities at 12 significant digits.
pub fn render_lm(lm: &NGramLM) -> String {
    let mut out = String::new();
    out.push_str(&format!("NGRAM {} {}\n", lm.order, lm.vocab.len()));
    for (context, dist) in &lm.dists {
        for (token, p) in dist {
            out.push_str(&format!("{context}\t{token}\t{p:.11e}\n"));
        }
    }
    out
}

pub fn parse_lm(text: &str) -> Result<NGramLM, LmError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(LmError::Malformed {
        line: 1,
        msg: "empty model file".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (order, vocab_size) = match fields.as_slice() {
        ["NGRAM", o, v] => (
            o.parse::<usize>().map_err(|_| bad_header())?,
            v.parse::<usize>().map_err(|_| bad_header())?,
        ),
        _ => return Err(bad_header()),
    };
    if order == 0 {
        return Err(LmError::InvalidOrder(0));
    }
    let mut dists: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(LmError::Malformed {
                line: line_no,
                msg: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        let p: f64 = cols[2].parse().map_err(|_| LmError::Malformed {
            line: line_no,
            msg: format!("bad probability {:?}", cols[2]),
        })?;
        if !(p > 0.0 && p <= 1.0) {
            return Err(LmError::Malformed {
                line: line_no,
                msg: format!("probability {p} outside (0, 1]"),
            });
        }
        if context_len(cols[0]) >= order {
            return Err(LmError::Malformed {
                line: line_no,
                msg: format!("context {:?} too long for order {order}", cols[0]),
            });
        }
        dists
            .entry(cols[0].to_string())
            .or_default()
            .insert(cols[1].to_string(), p);
    }
    let vocab: BTreeSet<String> = dists
        .get("")
        .ok_or(LmError::Malformed {
            line: 0,
            msg: "model has no empty-context distribution".into(),
        })?
        .keys()
        .cloned()
        .collect();
    if vocab.len() != vocab_size {
        return Err(LmError::Malformed {
            line: 1,
            msg: format!(
                "header says {vocab_size} vocab items, empty context lists {}",
                vocab.len()
            ),
        });
    }
    for (context, dist) in &dists {
        if dist.len() != vocab.len() {
            return Err(LmError::Malformed {
                line: 0,
                msg: format!(
                    "context {context:?} lists {} tokens, vocab has {}",
                    dist.len(),
                    vocab.len()
                ),
            });
        }
    }
    Ok(NGramLM {
        order,
        vocab,
        dists,
    })
}

fn bad_header() -> LmError {
    LmError::Malformed {
        line: 1,
        msg: "header must be `NGRAM <order> <vocab_size>`".into(),
    }
}
