//! Data model and file formats shared by the whole pipeline: tokens,
//! sentences, aligned sentence pairs, the pronoun inventory, and labeled
//! sentences carrying dropped-pronoun annotations.
//!
//! Insertion points ("slots") are indices `0..=len`: slot `i` means
//! "insert before token `i`", and slot `len` is the sentence-final
//! sentinel slot. A sentence of `len` tokens therefore has `len + 1`
//! label slots.

mod inventory;
mod io;

pub use inventory::{default_inventory, PronounCategory, PronounEntry, PronounInventory};
pub use io::{
    apply_sidecar, load_parallel, parse_alignments, parse_corpus, parse_labeled, parse_parallel,
    parse_sidecar, render_alignments, render_corpus, render_labeled, render_sidecar,
    SENTINEL_SURFACE,
};

use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("token surface is empty")]
    EmptyToken,
    #[error("token surface {0:?} contains whitespace")]
    WhitespaceToken(String),
    #[error("sentence has no tokens")]
    EmptySentence,
    #[error("{what}: line counts differ ({left} vs {right})")]
    LineCountMismatch {
        what: String,
        left: usize,
        right: usize,
    },
    #[error("line {line}: malformed alignment link {text:?}")]
    MalformedLink { line: usize, text: String },
    #[error("line {line}: link {src}-{tgt} out of range for {src_len}x{tgt_len} sentence pair")]
    IndexOutOfRange {
        line: usize,
        src: usize,
        tgt: usize,
        src_len: usize,
        tgt_len: usize,
    },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("pronoun entry {0:?} has no candidates")]
    EmptyCandidates(String),
    #[error("slot {position} exceeds sentence bound {bound}")]
    SlotOutOfRange { position: usize, bound: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One surface token, optionally carrying a POS tag and a syntax path
/// (the node sequence from the token to the parse root).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    surface: String,
    pub pos: Option<String>,
    pub path: Option<String>,
}

impl Token {
    pub fn new(surface: impl Into<String>) -> Result<Self, CorpusError> {
        let surface = surface.into();
        if surface.is_empty() {
            return Err(CorpusError::EmptyToken);
        }
        if surface.chars().any(char::is_whitespace) {
            return Err(CorpusError::WhitespaceToken(surface));
        }
        Ok(Token {
            surface,
            pos: None,
            path: None,
        })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

/// A tokenized sentence plus its position within its document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<Token>,
    pub discourse_index: usize,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>, discourse_index: usize) -> Result<Self, CorpusError> {
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence);
        }
        Ok(Sentence {
            tokens,
            discourse_index,
        })
    }

    /// Parses a whitespace-tokenized line.
    pub fn from_line(line: &str, discourse_index: usize) -> Result<Self, CorpusError> {
        let tokens = line
            .split_whitespace()
            .map(Token::new)
            .collect::<Result<Vec<_>, _>>()?;
        Sentence::new(tokens, discourse_index)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-emptiness is a construction invariant
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(Token::surface)
    }

    /// Inserts a token before position `at` (`at == len` appends).
    pub fn insert_token(&mut self, at: usize, token: Token) {
        self.tokens.insert(at, token);
    }

    /// Space-joined surface form.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(t.surface());
        }
        out
    }
}

/// A sentence pair with a many-to-many word alignment. Links are
/// `(source index, target index)`, both 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedSentencePair {
    pub source: Sentence,
    pub target: Sentence,
    links: BTreeSet<(usize, usize)>,
}

impl AlignedSentencePair {
    pub fn new(
        source: Sentence,
        target: Sentence,
        links: BTreeSet<(usize, usize)>,
    ) -> Result<Self, CorpusError> {
        if let Some(&(s, t)) = links
            .iter()
            .find(|&&(s, t)| s >= source.len() || t >= target.len())
        {
            return Err(CorpusError::IndexOutOfRange {
                line: 0,
                src: s,
                tgt: t,
                src_len: source.len(),
                tgt_len: target.len(),
            });
        }
        Ok(AlignedSentencePair {
            source,
            target,
            links,
        })
    }

    pub fn links(&self) -> &BTreeSet<(usize, usize)> {
        &self.links
    }

    pub fn target_is_linked(&self, tgt_index: usize) -> bool {
        self.links.iter().any(|&(_, t)| t == tgt_index)
    }

    /// Source indices linked to the given target position, ascending.
    pub fn source_links_of_target(&self, tgt_index: usize) -> Vec<usize> {
        self.links
            .iter()
            .filter(|&&(_, t)| t == tgt_index)
            .map(|&(s, _)| s)
            .collect()
    }
}

/// The target-side pronoun occurrence that triggered a recovery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trigger {
    pub target_pronoun: String,
    pub target_index: usize,
}

/// A recovered dropped pronoun: which source-side slot it belongs in and
/// which pronoun form goes there. `trigger` is present on annotations
/// produced by projection; the label-file format does not carry it, so
/// annotations read back from disk have `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DPAnnotation {
    pub position: usize,
    pub pronoun: String,
    pub trigger: Option<Trigger>,
}

/// Per-slot label: is a pronoun missing before this token?
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotLabel {
    Na,
    Dp,
}

impl SlotLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SlotLabel::Na => "NA",
            SlotLabel::Dp => "DP",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "NA" => Some(SlotLabel::Na),
            "DP" => Some(SlotLabel::Dp),
            _ => None,
        }
    }
}

/// A sentence with one label per insertion slot (`len + 1` labels) and the
/// dropped-pronoun annotations that produced those labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSentence {
    pub sentence: Sentence,
    labels: Vec<SlotLabel>,
    annotations: Vec<DPAnnotation>,
}

impl LabeledSentence {
    /// Builds the slot labels from the annotations: slot `i` is `Dp` iff
    /// some annotation has `position == i`.
    pub fn new(sentence: Sentence, annotations: Vec<DPAnnotation>) -> Result<Self, CorpusError> {
        let bound = sentence.len();
        for a in &annotations {
            if a.position > bound {
                return Err(CorpusError::SlotOutOfRange {
                    position: a.position,
                    bound,
                });
            }
        }
        let mut labels = vec![SlotLabel::Na; bound + 1];
        for a in &annotations {
            labels[a.position] = SlotLabel::Dp;
        }
        Ok(LabeledSentence {
            sentence,
            labels,
            annotations,
        })
    }

    pub fn labels(&self) -> &[SlotLabel] {
        &self.labels
    }

    pub fn annotations(&self) -> &[DPAnnotation] {
        &self.annotations
    }

    /// Pronouns annotated at the given slot, in annotation order.
    pub fn pronouns_at(&self, slot: usize) -> Vec<&str> {
        self.annotations
            .iter()
            .filter(|a| a.position == slot)
            .map(|a| a.pronoun.as_str())
            .collect()
    }
}

/// Splits a flat sentence-like stream back into documents using the
/// convention that `discourse_index` restarts at 0 on each new document.
pub fn group_by_document<T>(items: Vec<T>, discourse_index: impl Fn(&T) -> usize) -> Vec<Vec<T>> {
    let mut docs: Vec<Vec<T>> = Vec::new();
    for item in items {
        if discourse_index(&item) == 0 || docs.is_empty() {
            docs.push(Vec::new());
        }
        docs.last_mut().unwrap().push(item);
    }
    docs
}
