//! End-to-end recovery on raw input: run the slot detector, predict an
//! N-best pronoun list per slot, and package the result either as
//! plain text with the 1-best pronouns spliced in or as a confusion
//! network whose DP columns carry all N candidates for a downstream
//! decoder.
//!
//! Confusion-network weights follow the uniform rule — every candidate
//! arc gets exactly 1/N, with an epsilon arc soaking up the residual
//! when fewer than N candidates exist. Weighting arcs by classifier
//! probability instead is available behind [`CnWeighting::Probability`]
//! as an explicit extension.

use std::mem::take;

use thiserror::Error;

use crate::corpus::{CorpusError, PronounInventory, Sentence, Token};
use crate::detector::RnnDetector;
use crate::predictor::{extract_features, FeatureConfig, MlpPredictor, PredictError};

/// Arc label meaning "insert nothing here".
pub const EPSILON_TOKEN: &str = "*EPS*";
/// Detection probability at which a slot is considered dropped
/// (inclusive).
pub const DETECT_THRESHOLD: f64 = 0.5;
/// Column weights must sum to 1 within this bound for in-memory
/// networks built by [`build_cn`].
pub const CN_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("N-best size must be at least 1")]
    InvalidNBest,
    #[error("slot {slot} exceeds sentence bound {bound}")]
    SlotOutOfRange { slot: usize, bound: usize },
    #[error("slots must be strictly ascending")]
    UnsortedSlots,
    #[error("{slots} slots but {lists} N-best lists")]
    ParallelLengthMismatch { slots: usize, lists: usize },
    #[error("N-best list has {len} entries, more than N={n}")]
    NBestTooLong { len: usize, n: usize },
    #[error("token {0:?} cannot appear on a confusion-network arc")]
    ReservedToken(String),
    #[error("column {index}: {msg}")]
    InvalidColumn { index: usize, msg: String },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ------------------------------------------------------------ structure

/// How DP-column arcs are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CnWeighting {
    /// Every candidate arc weighs exactly 1/N; an epsilon arc carries
    /// the residual (N-k)/N when only k < N candidates exist.
    #[default]
    Uniform,
    /// Extension (not part of the reference behaviour): arcs carry the
    /// classifier probabilities; an epsilon arc carries the probability
    /// mass of the classes left off the list.
    Probability,
}

/// One lattice position: alternative (token, weight) arcs. Original
/// tokens are singleton weight-1 columns; DP columns hold the N-best
/// pronouns and possibly an epsilon arc.
#[derive(Debug, Clone, PartialEq)]
pub struct CnColumn {
    pub arcs: Vec<(String, f64)>,
    pub is_dp: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionNetwork {
    pub columns: Vec<CnColumn>,
}

impl ConfusionNetwork {
    /// Tokens of the non-DP columns — the original sentence verbatim.
    pub fn original_tokens(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| !c.is_dp)
            .map(|c| c.arcs[0].0.as_str())
            .collect()
    }

    pub fn dp_column_count(&self) -> usize {
        self.columns.iter().filter(|c| c.is_dp).count()
    }

    /// Structural well-formedness: non-empty columns, valid arc tokens,
    /// weights in (0, 1], column sums within `tolerance` of 1, original
    /// columns singleton at weight exactly 1, at most one epsilon arc
    /// and only in DP columns.
    pub fn validate(&self, tolerance: f64) -> Result<(), GenerateError> {
        for (index, column) in self.columns.iter().enumerate() {
            let fail = |msg: String| Err(GenerateError::InvalidColumn { index, msg });
            if column.arcs.is_empty() {
                return fail("empty column".into());
            }
            let mut sum = 0.0;
            let mut epsilons = 0;
            let mut seen: Vec<&str> = Vec::new();
            for (token, weight) in &column.arcs {
                if token == EPSILON_TOKEN {
                    epsilons += 1;
                } else {
                    check_arc_token(token)?;
                }
                if seen.contains(&token.as_str()) {
                    return fail(format!("duplicate arc token {token:?}"));
                }
                seen.push(token);
                if !weight.is_finite() || *weight <= 0.0 || *weight > 1.0 {
                    return fail(format!("arc weight {weight} outside (0, 1]"));
                }
                sum += weight;
            }
            if (sum - 1.0).abs() > tolerance {
                return fail(format!("column weights sum to {sum}, not 1"));
            }
            if epsilons > 1 {
                return fail("more than one epsilon arc".into());
            }
            if !column.is_dp {
                if column.arcs.len() != 1 || epsilons != 0 {
                    return fail("original column must be a single token arc".into());
                }
                if column.arcs[0].1 != 1.0 {
                    return fail("original column weight must be exactly 1".into());
                }
            }
        }
        Ok(())
    }
}

fn check_arc_token(token: &str) -> Result<(), GenerateError> {
    let reserved = token.is_empty()
        || token == EPSILON_TOKEN
        || token.contains('|')
        || token.chars().any(char::is_whitespace);
    if reserved {
        return Err(GenerateError::ReservedToken(token.to_string()));
    }
    Ok(())
}

// ----------------------------------------------------------- generation

/// Detected slots and their N-best pronoun lists for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceGeneration {
    /// Insertion slots, strictly ascending (slot i = before token i).
    pub slots: Vec<usize>,
    /// Per-slot candidates, descending probability, parallel to slots.
    pub nbest: Vec<Vec<(String, f64)>>,
}

/// Runs the detector over every sentence of `doc` (threshold
/// [`DETECT_THRESHOLD`]) and, for each detected slot, predicts the
/// N-best pronouns from features extracted at that slot.
pub fn generate(
    detector: &RnnDetector,
    predictor: &MlpPredictor,
    doc: &[Sentence],
    n: usize,
    cfg: &FeatureConfig,
    inventory: &PronounInventory,
) -> Result<Vec<SentenceGeneration>, GenerateError> {
    if n == 0 {
        return Err(GenerateError::InvalidNBest);
    }
    let mut out = Vec::with_capacity(doc.len());
    for (sentence_idx, sentence) in doc.iter().enumerate() {
        let slots = detector.detect(sentence, DETECT_THRESHOLD);
        let mut nbest = Vec::with_capacity(slots.len());
        for &slot in &slots {
            let bundle = extract_features(doc, sentence_idx, slot, cfg, inventory);
            nbest.push(predictor.predict_nbest(&bundle, n)?);
        }
        out.push(SentenceGeneration { slots, nbest });
    }
    Ok(out)
}

fn validate_slots(
    bound: usize,
    slots: &[usize],
    nbest: &[Vec<(String, f64)>],
) -> Result<(), GenerateError> {
    if slots.len() != nbest.len() {
        return Err(GenerateError::ParallelLengthMismatch {
            slots: slots.len(),
            lists: nbest.len(),
        });
    }
    for window in slots.windows(2) {
        if window[0] >= window[1] {
            return Err(GenerateError::UnsortedSlots);
        }
    }
    if let Some(&slot) = slots.iter().find(|&&s| s > bound) {
        return Err(GenerateError::SlotOutOfRange { slot, bound });
    }
    Ok(())
}

/// Builds the confusion network for one sentence: original tokens as
/// singleton weight-1 columns, one DP column per slot (inserted before
/// the token at that index; slot = len appends).
pub fn build_cn(
    sentence: &Sentence,
    slots: &[usize],
    nbest: &[Vec<(String, f64)>],
    n: usize,
    weighting: CnWeighting,
) -> Result<ConfusionNetwork, GenerateError> {
    if n == 0 {
        return Err(GenerateError::InvalidNBest);
    }
    validate_slots(sentence.len(), slots, nbest)?;
    for list in nbest {
        if list.len() > n {
            return Err(GenerateError::NBestTooLong {
                len: list.len(),
                n,
            });
        }
    }
    let mut columns = Vec::with_capacity(sentence.len() + slots.len());
    let mut next_slot = 0;
    for p in 0..=sentence.len() {
        if next_slot < slots.len() && slots[next_slot] == p {
            columns.push(dp_column(&nbest[next_slot], n, weighting)?);
            next_slot += 1;
        }
        if p < sentence.len() {
            let token = sentence.tokens()[p].surface();
            check_arc_token(token)?;
            columns.push(CnColumn {
                arcs: vec![(token.to_string(), 1.0)],
                is_dp: false,
            });
        }
    }
    let cn = ConfusionNetwork { columns };
    cn.validate(CN_SUM_TOLERANCE)?;
    Ok(cn)
}

fn dp_column(
    list: &[(String, f64)],
    n: usize,
    weighting: CnWeighting,
) -> Result<CnColumn, GenerateError> {
    let mut arcs = Vec::with_capacity(list.len() + 1);
    match weighting {
        CnWeighting::Uniform => {
            let weight = 1.0 / n as f64;
            for (token, _) in list {
                check_arc_token(token)?;
                arcs.push((token.clone(), weight));
            }
            if list.len() < n {
                let residual = (n - list.len()) as f64 / n as f64;
                arcs.push((EPSILON_TOKEN.to_string(), residual));
            }
        }
        CnWeighting::Probability => {
            let mut mass = 0.0;
            for (token, p) in list {
                check_arc_token(token)?;
                arcs.push((token.clone(), *p));
                mass += p;
            }
            let residual = 1.0 - mass;
            if residual > CN_SUM_TOLERANCE {
                arcs.push((EPSILON_TOKEN.to_string(), residual));
            }
        }
    }
    Ok(CnColumn { arcs, is_dp: true })
}

/// Splices the 1-best pronoun of every slot into the sentence,
/// right-to-left so earlier slot indices stay valid. Slots with an
/// empty candidate list are skipped.
pub fn insert_1best(
    sentence: &Sentence,
    slots: &[usize],
    nbest: &[Vec<(String, f64)>],
) -> Result<Sentence, GenerateError> {
    validate_slots(sentence.len(), slots, nbest)?;
    let mut out = sentence.clone();
    for (&slot, list) in slots.iter().zip(nbest).rev() {
        if let Some((pronoun, _)) = list.first() {
            out.insert_token(slot, Token::new(pronoun.clone())?);
        }
    }
    Ok(out)
}

// ------------------------------------------------------- text emission

/// Canonical arc-weight rendering: the shortest exact decimal when it
/// has at most 12 significant digits (covers every 1/N with N of the
/// form 2^a*5^b, and weight 1 prints as "1"), otherwise the value
/// rounded to 12 significant digits in plain decimal, trailing zeros
/// trimmed. Re-parsing and re-rendering any output of this function is
/// byte-stable.
pub fn format_weight(w: f64) -> String {
    debug_assert!(w.is_finite() && w > 0.0);
    let shortest = format!("{w}");
    if !shortest.contains(['e', 'E']) && significant_digits(&shortest) <= 12 {
        return shortest;
    }
    let sci = format!("{w:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponential format");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let mut plain = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else {
        let point = exp as usize + 1;
        if point >= digits.len() {
            format!("{}{}", digits, "0".repeat(point - digits.len()))
        } else {
            format!("{}.{}", &digits[..point], &digits[point..])
        }
    };
    if plain.contains('.') {
        while plain.ends_with('0') {
            plain.pop();
        }
        if plain.ends_with('.') {
            plain.pop();
        }
    }
    plain
}

fn significant_digits(s: &str) -> usize {
    let mut seen_nonzero = false;
    let mut count = 0;
    for c in s.chars() {
        if c.is_ascii_digit() {
            if c != '0' {
                seen_nonzero = true;
            }
            if seen_nonzero {
                count += 1;
            }
        }
    }
    count
}

/// Renders confusion networks as text: one column per line with
/// space-separated `token|weight` arcs, a blank line between sentences,
/// epsilon arcs as `*EPS*`. Emit -> parse -> emit is byte-identical.
pub fn emit_cn(networks: &[ConfusionNetwork]) -> String {
    let mut out = String::new();
    for (i, cn) in networks.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for column in &cn.columns {
            for (a, (token, weight)) in column.arcs.iter().enumerate() {
                if a > 0 {
                    out.push(' ');
                }
                out.push_str(token);
                out.push('|');
                out.push_str(&format_weight(*weight));
            }
            out.push('\n');
        }
    }
    out
}

/// Parses [`emit_cn`] output. A column is marked as a DP column when it
/// has several arcs or an epsilon arc; a DP column that consisted of a
/// single weight-1 pronoun is indistinguishable from an original token
/// in this format and comes back as an original column (bytes still
/// round-trip). Column sums are checked within a per-column tolerance
/// that allows for the 12-significant-digit quantization of each arc.
pub fn parse_cn(text: &str) -> Result<Vec<ConfusionNetwork>, GenerateError> {
    let mut networks = Vec::new();
    let mut columns: Vec<CnColumn> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.is_empty() {
            if columns.is_empty() {
                return Err(GenerateError::Malformed {
                    line: line_no,
                    msg: "blank line without a preceding sentence".into(),
                });
            }
            networks.push(ConfusionNetwork {
                columns: take(&mut columns),
            });
            continue;
        }
        let mut arcs = Vec::new();
        for field in line.split(' ') {
            let (token, weight) = field.rsplit_once('|').ok_or(GenerateError::Malformed {
                line: line_no,
                msg: format!("arc {field:?} is not token|weight"),
            })?;
            let weight: f64 = weight.parse().map_err(|_| GenerateError::Malformed {
                line: line_no,
                msg: format!("bad weight in arc {field:?}"),
            })?;
            arcs.push((token.to_string(), weight));
        }
        let is_dp = arcs.len() > 1 || arcs[0].0 == EPSILON_TOKEN;
        columns.push(CnColumn { arcs, is_dp });
    }
    if !columns.is_empty() {
        networks.push(ConfusionNetwork { columns });
    }
    for cn in &networks {
        // each arc weight may sit up to half an ulp of the 12th digit
        // from its source value, so the sum tolerance scales with the
        // arc count of the widest column
        let max_arcs = cn.columns.iter().map(|c| c.arcs.len()).max().unwrap_or(1);
        cn.validate(max_arcs as f64 * 1e-12)?;
    }
    Ok(networks)
}
