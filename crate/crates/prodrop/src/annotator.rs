//! Projection of unaligned target-side pronouns onto source-side
//! insertion slots, with language-model arbitration.
//!
//! A pronoun that the target side says out loud but no source word aligns
//! to is the trace of a drop. Its source-side home is found with a
//! diagonal heuristic: the nearest aligned target neighbours on each side
//! anchor a source span, and every insertion slot strictly inside that
//! span is a candidate. Each (slot, pronoun form) candidate sentence is
//! scored by n-gram perplexity next to the untouched original; the best
//! candidate wins only if it strictly beats the original, which filters
//! alignment noise.

use thiserror::Error;

use crate::corpus::{
    AlignedSentencePair, DPAnnotation, LabeledSentence, PronounInventory, Sentence, Token,
    Trigger,
};
use crate::lm::NGramLM;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("target token {target_index} has no aligned neighbour on either side")]
    NoAnchors { target_index: usize },
    #[error(
        "anchors around target token {target_index} invert: left anchor at source \
         {lo}, right anchor at source {hi}"
    )]
    InvertedAnchors {
        target_index: usize,
        lo: usize,
        hi: usize,
    },
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

/// Source-side insertion span for one unaligned target token.
///
/// With both anchors present, `gaps` covers the insertion slots strictly
/// interior to `[lo, hi]`, i.e. `lo+1 ..= hi` ("insert before source
/// token g"). A missing left anchor widens the span to the sentence
/// start (`0 ..= hi`); a missing right anchor widens it to the end
/// (`lo+1 ..= len`, where slot `len` appends).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionSpan {
    pub lo: Option<usize>,
    pub hi: Option<usize>,
    pub gaps: Vec<usize>,
}

/// One scored insertion candidate (kept public for inspection tooling).
#[derive(Debug, Clone, PartialEq)]
pub struct InsertionCandidate {
    pub position: usize,
    pub pronoun: String,
    /// Perplexity of the sentence with the pronoun inserted; > 0.
    pub score: f64,
}

/// Target positions whose token is an inventory pronoun participating in
/// no alignment link, left to right.
pub fn find_unaligned_pronouns(
    pair: &AlignedSentencePair,
    inventory: &PronounInventory,
) -> Vec<usize> {
    pair.target
        .surfaces()
        .enumerate()
        .filter(|(j, tok)| inventory.lookup(tok).is_some() && !pair.target_is_linked(*j))
        .map(|(j, _)| j)
        .collect()
}

/// Projects the unaligned target token at `tgt_index` onto a source
/// insertion span via the nearest aligned neighbours.
pub fn diagonal_span(
    pair: &AlignedSentencePair,
    tgt_index: usize,
) -> Result<ProjectionSpan, AnnotateError> {
    // nearest aligned target token to the left -> max linked source index
    let lo = (0..tgt_index)
        .rev()
        .find(|&j| pair.target_is_linked(j))
        .map(|j| *pair.source_links_of_target(j).last().expect("linked"));
    // nearest aligned target token to the right -> min linked source index
    let hi = (tgt_index + 1..pair.target.len())
        .find(|&j| pair.target_is_linked(j))
        .map(|j| *pair.source_links_of_target(j).first().expect("linked"));

    let len = pair.source.len();
    let gaps: Vec<usize> = match (lo, hi) {
        (Some(lo), Some(hi)) => {
            if lo >= hi {
                return Err(AnnotateError::InvertedAnchors {
                    target_index: tgt_index,
                    lo,
                    hi,
                });
            }
            (lo + 1..=hi).collect()
        }
        (None, Some(hi)) => (0..=hi).collect(),
        (Some(lo), None) => (lo + 1..=len).collect(),
        (None, None) => {
            return Err(AnnotateError::NoAnchors {
                target_index: tgt_index,
            })
        }
    };
    Ok(ProjectionSpan { lo, hi, gaps })
}

/// Scores every (gap, pronoun) insertion into `sentence` and returns the
/// lowest-perplexity one, provided it strictly beats the unmodified
/// sentence. Ties prefer the smallest position, then earlier candidate
/// order. The returned annotation carries no trigger; callers attach it.
pub fn score_and_select(
    sentence: &Sentence,
    span: &ProjectionSpan,
    pronoun_candidates: &[String],
    lm: &NGramLM,
) -> Option<DPAnnotation> {
    let original = lm.perplexity(sentence);
    let mut best: Option<InsertionCandidate> = None;
    for &position in &span.gaps {
        for pronoun in pronoun_candidates {
            let Ok(token) = Token::new(pronoun.clone()) else {
                continue;
            };
            let mut candidate = sentence.clone();
            candidate.insert_token(position, token);
            let score = lm.perplexity(&candidate);
            if best.as_ref().map_or(true, |b| score < b.score) {
                best = Some(InsertionCandidate {
                    position,
                    pronoun: pronoun.clone(),
                    score,
                });
            }
        }
    }
    let best = best?;
    (best.score < original).then(|| DPAnnotation {
        position: best.position,
        pronoun: best.pronoun,
        trigger: None,
    })
}

/// Runs projection over a corpus: for every pair, processes its unaligned
/// target pronouns left-to-right, each accepted insertion updating the
/// working sentence before the next is scored. Returns the label corpus
/// (annotations in original-sentence slot coordinates) and the
/// DP-inserted source sentences.
pub fn annotate_corpus(
    pairs: &[AlignedSentencePair],
    inventory: &PronounInventory,
    lm: &NGramLM,
) -> Result<(Vec<LabeledSentence>, Vec<Sentence>), AnnotateError> {
    let mut labeled = Vec::with_capacity(pairs.len());
    let mut inserted_sources = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let mut working = pair.source.clone();
        // original slot positions of accepted insertions, in accept order
        let mut accepted_slots: Vec<usize> = Vec::new();
        let mut annotations: Vec<DPAnnotation> = Vec::new();

        for tgt_index in find_unaligned_pronouns(pair, inventory) {
            let span = match diagonal_span(pair, tgt_index) {
                Ok(span) => span,
                // a pronoun the heuristic cannot place is skipped, not fatal
                Err(AnnotateError::NoAnchors { .. })
                | Err(AnnotateError::InvertedAnchors { .. }) => continue,
                Err(other) => return Err(other),
            };
            let target_pronoun = pair.target.tokens()[tgt_index].surface().to_string();
            let candidates = match inventory.lookup(&target_pronoun) {
                Some(entry) => entry.candidates.clone(),
                None => continue,
            };

            // map original-coordinate gaps into the working sentence:
            // slot g has moved right once per accepted insertion at <= g
            let to_working =
                |g: usize| g + accepted_slots.iter().filter(|&&q| q <= g).count();
            let working_gaps: Vec<usize> = span.gaps.iter().map(|&g| to_working(g)).collect();
            let working_span = ProjectionSpan {
                lo: span.lo,
                hi: span.hi,
                gaps: working_gaps.clone(),
            };

            if let Some(found) = score_and_select(&working, &working_span, &candidates, lm) {
                let gap_index = working_gaps
                    .iter()
                    .position(|&w| w == found.position)
                    .expect("selected position comes from the gap list");
                let original_position = span.gaps[gap_index];
                working.insert_token(
                    found.position,
                    Token::new(found.pronoun.clone()).map_err(AnnotateError::Corpus)?,
                );
                accepted_slots.push(original_position);
                annotations.push(DPAnnotation {
                    position: original_position,
                    pronoun: found.pronoun,
                    trigger: Some(Trigger {
                        target_pronoun,
                        target_index: tgt_index,
                    }),
                });
            }
        }

        annotations.sort_by_key(|a| a.position);
        labeled.push(LabeledSentence::new(pair.source.clone(), annotations)?);
        inserted_sources.push(working);
    }
    Ok((labeled, inserted_sources))
}
