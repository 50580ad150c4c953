//! Text formats: tokenized corpora, Pharaoh alignments, POS/path sidecars,
//! and the labeled corpus produced by annotation.
//!
//! Every `render_*` function emits a canonical byte form, and
//! `render(parse(render(x)))` is byte-identical to `render(x)`.
//!
//! - Corpus text: one sentence per line, tokens space-separated, one blank
//!   line between documents.
//! - Alignments: one line per sentence pair, links as space-separated
//!   `src-tgt` (0-based); an empty line is an empty link set.
//! - Sidecar TSV: `token<TAB>pos<TAB>path` per token, `_` for an absent
//!   column, one blank line between sentences.
//! - Labeled corpus TSV: `token<TAB>label<TAB>pronouns` per slot, one line
//!   per token plus a final sentinel line whose token column is `</s>`;
//!   `label` is `NA` or `DP`, `pronouns` is `_` or the space-joined
//!   pronouns inserted at that slot. One blank line separates sentences,
//!   two blank lines separate documents.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use super::{
    AlignedSentencePair, CorpusError, DPAnnotation, LabeledSentence, Sentence, SlotLabel, Token,
};

/// Token column of the slot line that carries the sentence-final label.
pub const SENTINEL_SURFACE: &str = "</s>";

const ABSENT: &str = "_";

// ---------------------------------------------------------------- corpus

/// Parses documents of sentences; a run of blank lines is one document
/// boundary, and `discourse_index` restarts at 0 in each document.
pub fn parse_corpus(text: &str) -> Result<Vec<Vec<Sentence>>, CorpusError> {
    let mut docs: Vec<Vec<Sentence>> = Vec::new();
    let mut cur: Vec<Sentence> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                docs.push(std::mem::take(&mut cur));
            }
        } else {
            let sentence = Sentence::from_line(line, cur.len())?;
            cur.push(sentence);
        }
    }
    if !cur.is_empty() {
        docs.push(cur);
    }
    Ok(docs)
}

pub fn render_corpus(docs: &[Vec<Sentence>]) -> String {
    let mut out = String::new();
    for (d, doc) in docs.iter().enumerate() {
        if d > 0 {
            out.push('\n');
        }
        for sentence in doc {
            out.push_str(&sentence.render());
            out.push('\n');
        }
    }
    out
}

// ------------------------------------------------------------ alignments

/// Parses one link set per line. Line numbers in errors are 1-based.
pub fn parse_alignments(text: &str) -> Result<Vec<BTreeSet<(usize, usize)>>, CorpusError> {
    text.lines()
        .enumerate()
        .map(|(i, line)| parse_alignment_line(line, i + 1))
        .collect()
}

fn parse_alignment_line(line: &str, line_no: usize) -> Result<BTreeSet<(usize, usize)>, CorpusError> {
    let mut links = BTreeSet::new();
    for piece in line.split_whitespace() {
        let link = piece
            .split_once('-')
            .and_then(|(s, t)| Some((s.parse::<usize>().ok()?, t.parse::<usize>().ok()?)));
        match link {
            Some(pair) => {
                links.insert(pair);
            }
            None => {
                return Err(CorpusError::MalformedLink {
                    line: line_no,
                    text: piece.to_string(),
                })
            }
        }
    }
    Ok(links)
}

/// Canonical form: links in ascending `(src, tgt)` order.
pub fn render_alignments(link_sets: &[BTreeSet<(usize, usize)>]) -> String {
    let mut out = String::new();
    for links in link_sets {
        let mut first = true;
        for (s, t) in links {
            if !first {
                out.push(' ');
            }
            out.push_str(&format!("{s}-{t}"));
            first = false;
        }
        out.push('\n');
    }
    out
}

// -------------------------------------------------------------- parallel

/// Loads a line-aligned parallel corpus with its alignment file.
pub fn load_parallel(
    src_path: &Path,
    tgt_path: &Path,
    align_path: &Path,
) -> Result<Vec<AlignedSentencePair>, CorpusError> {
    let src = fs::read_to_string(src_path)?;
    let tgt = fs::read_to_string(tgt_path)?;
    let align = fs::read_to_string(align_path)?;
    parse_parallel(&src, &tgt, &align)
}

pub fn parse_parallel(
    src_text: &str,
    tgt_text: &str,
    align_text: &str,
) -> Result<Vec<AlignedSentencePair>, CorpusError> {
    let src_docs = parse_corpus(src_text)?;
    let tgt_docs = parse_corpus(tgt_text)?;
    let src_n: usize = src_docs.iter().map(Vec::len).sum();
    let tgt_n: usize = tgt_docs.iter().map(Vec::len).sum();
    if src_n != tgt_n {
        return Err(CorpusError::LineCountMismatch {
            what: "source vs target sentences".into(),
            left: src_n,
            right: tgt_n,
        });
    }
    if src_docs.len() != tgt_docs.len() {
        return Err(CorpusError::LineCountMismatch {
            what: "source vs target documents".into(),
            left: src_docs.len(),
            right: tgt_docs.len(),
        });
    }
    let link_sets = parse_alignments(align_text)?;
    if link_sets.len() != src_n {
        return Err(CorpusError::LineCountMismatch {
            what: "sentence pairs vs alignment lines".into(),
            left: src_n,
            right: link_sets.len(),
        });
    }
    let sources = src_docs.into_iter().flatten();
    let targets = tgt_docs.into_iter().flatten();
    sources
        .zip(targets)
        .zip(link_sets)
        .enumerate()
        .map(|(i, ((source, target), links))| {
            AlignedSentencePair::new(source, target, links).map_err(|e| match e {
                CorpusError::IndexOutOfRange {
                    src,
                    tgt,
                    src_len,
                    tgt_len,
                    ..
                } => CorpusError::IndexOutOfRange {
                    line: i + 1,
                    src,
                    tgt,
                    src_len,
                    tgt_len,
                },
                other => other,
            })
        })
        .collect()
}

// ---------------------------------------------------------------- sidecar

/// Parses per-token POS/path annotations: returns one `Vec<Token>` per
/// sentence block, with `pos`/`path` set from the second and third columns.
pub fn parse_sidecar(text: &str) -> Result<Vec<Vec<Token>>, CorpusError> {
    let mut sentences: Vec<Vec<Token>> = Vec::new();
    let mut cur: Vec<Token> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            if !cur.is_empty() {
                sentences.push(std::mem::take(&mut cur));
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(CorpusError::Malformed {
                line: line_no,
                msg: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        let mut token = Token::new(cols[0])?;
        token.pos = (cols[1] != ABSENT).then(|| cols[1].to_string());
        token.path = (cols[2] != ABSENT).then(|| cols[2].to_string());
        cur.push(token);
    }
    if !cur.is_empty() {
        sentences.push(cur);
    }
    Ok(sentences)
}

pub fn render_sidecar(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for (i, sentence) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for token in sentence.tokens() {
            out.push_str(token.surface());
            out.push('\t');
            out.push_str(token.pos.as_deref().unwrap_or(ABSENT));
            out.push('\t');
            out.push_str(token.path.as_deref().unwrap_or(ABSENT));
            out.push('\n');
        }
    }
    out
}

/// Copies POS/path columns from a parsed sidecar onto the corpus
/// sentences, validating that both sides agree on tokenization.
pub fn apply_sidecar(
    docs: &mut [Vec<Sentence>],
    sidecar: &[Vec<Token>],
) -> Result<(), CorpusError> {
    let total: usize = docs.iter().map(Vec::len).sum();
    if total != sidecar.len() {
        return Err(CorpusError::LineCountMismatch {
            what: "corpus vs sidecar sentences".into(),
            left: total,
            right: sidecar.len(),
        });
    }
    let mut k = 0;
    for doc in docs.iter_mut() {
        for sentence in doc.iter_mut() {
            let annotated = &sidecar[k];
            k += 1;
            if annotated.len() != sentence.len() {
                return Err(CorpusError::LineCountMismatch {
                    what: format!("sidecar tokens for sentence {k}"),
                    left: sentence.len(),
                    right: annotated.len(),
                });
            }
            for (tok, ann) in sentence.tokens.iter_mut().zip(annotated) {
                if tok.surface() != ann.surface() {
                    return Err(CorpusError::Malformed {
                        line: 0,
                        msg: format!(
                            "sidecar token {:?} does not match corpus token {:?} (sentence {k})",
                            ann.surface(),
                            tok.surface()
                        ),
                    });
                }
                tok.pos = ann.pos.clone();
                tok.path = ann.path.clone();
            }
        }
    }
    Ok(())
}

// --------------------------------------------------------- labeled corpus

pub fn render_labeled(docs: &[Vec<LabeledSentence>]) -> String {
    let mut out = String::new();
    for (d, doc) in docs.iter().enumerate() {
        for (s, labeled) in doc.iter().enumerate() {
            if d > 0 && s == 0 {
                out.push('\n');
                out.push('\n');
            } else if s > 0 {
                out.push('\n');
            }
            render_labeled_sentence(labeled, &mut out);
        }
    }
    out
}

fn render_labeled_sentence(labeled: &LabeledSentence, out: &mut String) {
    let len = labeled.sentence.len();
    for slot in 0..=len {
        let surface = if slot < len {
            labeled.sentence.tokens()[slot].surface()
        } else {
            SENTINEL_SURFACE
        };
        out.push_str(surface);
        out.push('\t');
        out.push_str(labeled.labels()[slot].as_str());
        out.push('\t');
        let pronouns = labeled.pronouns_at(slot);
        if pronouns.is_empty() {
            out.push_str(ABSENT);
        } else {
            out.push_str(&pronouns.join(" "));
        }
        out.push('\n');
    }
}

/// Parses a labeled corpus back into documents. Trigger information is not
/// part of the format, so reconstructed annotations carry `trigger: None`.
pub fn parse_labeled(text: &str) -> Result<Vec<Vec<LabeledSentence>>, CorpusError> {
    // Split into blocks of consecutive non-blank lines, remembering how
    // many blank lines preceded each block (2+ starts a new document).
    let mut docs: Vec<Vec<LabeledSentence>> = Vec::new();
    let mut cur_doc: Vec<LabeledSentence> = Vec::new();
    let mut block: Vec<(usize, &str)> = Vec::new();
    let mut blank_run = 0usize;
    let mut seen_any = false;

    let flush_block = |block: &mut Vec<(usize, &str)>,
                           cur_doc: &mut Vec<LabeledSentence>|
     -> Result<(), CorpusError> {
        if block.is_empty() {
            return Ok(());
        }
        let labeled = parse_labeled_block(block, cur_doc.len())?;
        cur_doc.push(labeled);
        block.clear();
        Ok(())
    };

    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            flush_block(&mut block, &mut cur_doc)?;
            blank_run += 1;
        } else {
            if blank_run >= 2 && seen_any {
                if !cur_doc.is_empty() {
                    docs.push(std::mem::take(&mut cur_doc));
                }
            }
            blank_run = 0;
            seen_any = true;
            block.push((i + 1, line));
        }
    }
    flush_block(&mut block, &mut cur_doc)?;
    if !cur_doc.is_empty() {
        docs.push(cur_doc);
    }
    Ok(docs)
}

fn parse_labeled_block(
    lines: &[(usize, &str)],
    discourse_index: usize,
) -> Result<LabeledSentence, CorpusError> {
    let (sentinel_line_no, _) = lines[lines.len() - 1];
    if lines.len() < 2 {
        return Err(CorpusError::Malformed {
            line: sentinel_line_no,
            msg: "labeled sentence needs at least one token line and a sentinel line".into(),
        });
    }
    let mut tokens = Vec::with_capacity(lines.len() - 1);
    let mut labels = Vec::with_capacity(lines.len());
    let mut annotations: Vec<DPAnnotation> = Vec::new();
    for (slot, &(line_no, line)) in lines.iter().enumerate() {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(CorpusError::Malformed {
                line: line_no,
                msg: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        let is_sentinel_slot = slot == lines.len() - 1;
        if is_sentinel_slot {
            if cols[0] != SENTINEL_SURFACE {
                return Err(CorpusError::Malformed {
                    line: line_no,
                    msg: format!(
                        "sentence-final slot must use token {SENTINEL_SURFACE:?}, found {:?}",
                        cols[0]
                    ),
                });
            }
        } else {
            tokens.push(Token::new(cols[0])?);
        }
        let label = SlotLabel::parse(cols[1]).ok_or_else(|| CorpusError::Malformed {
            line: line_no,
            msg: format!("unknown label {:?}", cols[1]),
        })?;
        labels.push(label);
        match (label, cols[2]) {
            (SlotLabel::Na, ABSENT) => {}
            (SlotLabel::Na, other) => {
                return Err(CorpusError::Malformed {
                    line: line_no,
                    msg: format!("NA slot carries pronoun column {other:?}"),
                })
            }
            (SlotLabel::Dp, ABSENT) => {
                return Err(CorpusError::Malformed {
                    line: line_no,
                    msg: "DP slot has no pronoun".into(),
                })
            }
            (SlotLabel::Dp, pronouns) => {
                for p in pronouns.split(' ').filter(|p| !p.is_empty()) {
                    annotations.push(DPAnnotation {
                        position: slot,
                        pronoun: p.to_string(),
                        trigger: None,
                    });
                }
            }
        }
    }
    let sentence = Sentence::new(tokens, discourse_index)?;
    LabeledSentence::new(sentence, annotations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_round_trip_is_byte_identical() {
        let text = "你 说 过 想\n我 去\n\n他 来 了\n";
        let docs = parse_corpus(text).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].len(), 2);
        assert_eq!(docs[0][1].discourse_index, 1);
        assert_eq!(docs[1][0].discourse_index, 0);
        let rendered = render_corpus(&docs);
        assert_eq!(rendered, text);
        let again = render_corpus(&parse_corpus(&rendered).unwrap());
        assert_eq!(again, rendered);
    }

    #[test]
    fn corpus_collapses_blank_runs_to_one_boundary() {
        let docs = parse_corpus("a\n\n\n\nb\n").unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(render_corpus(&docs), "a\n\nb\n");
    }

    #[test]
    fn alignment_line_parses_three_links() {
        let sets = parse_alignments("0-0 1-1 3-3\n").unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(
            sets[0],
            [(0, 0), (1, 1), (3, 3)].into_iter().collect::<BTreeSet<_>>()
        );
    }

    #[test]
    fn alignment_rejects_non_numeric_link() {
        let err = parse_alignments("0-0 x-1\n").unwrap_err();
        match err {
            CorpusError::MalformedLink { line, text } => {
                assert_eq!(line, 1);
                assert_eq!(text, "x-1");
            }
            other => panic!("expected MalformedLink, got {other:?}"),
        }
    }

    #[test]
    fn alignment_rejects_negative_index() {
        assert!(matches!(
            parse_alignments("-1-2\n"),
            Err(CorpusError::MalformedLink { .. })
        ));
    }

    #[test]
    fn alignment_empty_line_is_empty_link_set() {
        let sets = parse_alignments("0-0\n\n1-0\n").unwrap();
        assert_eq!(sets.len(), 3);
        assert!(sets[1].is_empty());
    }

    #[test]
    fn alignment_round_trip_sorts_links() {
        let sets = parse_alignments("3-3 0-0 1-1\n").unwrap();
        let rendered = render_alignments(&sets);
        assert_eq!(rendered, "0-0 1-1 3-3\n");
        assert_eq!(render_alignments(&parse_alignments(&rendered).unwrap()), rendered);
    }

    #[test]
    fn parallel_rejects_sentence_count_mismatch() {
        let err = parse_parallel("a\nb\n", "x\n", "0-0\n").unwrap_err();
        assert!(matches!(err, CorpusError::LineCountMismatch { .. }));
    }

    #[test]
    fn parallel_rejects_alignment_count_mismatch() {
        let err = parse_parallel("a\n", "x\n", "0-0\n0-0\n").unwrap_err();
        assert!(matches!(err, CorpusError::LineCountMismatch { .. }));
    }

    #[test]
    fn parallel_reports_out_of_range_with_line_number() {
        let err = parse_parallel("a b\nc\n", "x\ny\n", "0-0\n1-0\n").unwrap_err();
        match err {
            CorpusError::IndexOutOfRange { line, src, .. } => {
                assert_eq!(line, 2);
                assert_eq!(src, 1);
            }
            other => panic!("expected IndexOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn parallel_loads_pairs_in_order() {
        let pairs = parse_parallel("a b\nc\n", "x y\nz\n", "0-0 1-1\n0-0\n").unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].source.render(), "a b");
        assert_eq!(pairs[1].target.render(), "z");
    }

    #[test]
    fn sidecar_round_trip() {
        let text = "你\tPN\tIP-NP\n说\tVV\t_\n\n他\tPN\t_\n";
        let parsed = parse_sidecar(text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0][0].pos.as_deref(), Some("PN"));
        assert_eq!(parsed[0][1].path, None);
        let mut docs = parse_corpus("你 说\n他\n").unwrap();
        apply_sidecar(&mut docs, &parsed).unwrap();
        let flat: Vec<Sentence> = docs.into_iter().flatten().collect();
        assert_eq!(render_sidecar(&flat), text);
    }

    #[test]
    fn sidecar_rejects_token_mismatch() {
        let parsed = parse_sidecar("你\tPN\t_\n").unwrap();
        let mut docs = parse_corpus("我\n").unwrap();
        assert!(apply_sidecar(&mut docs, &parsed).is_err());
    }

    fn labeled_fixture() -> Vec<Vec<LabeledSentence>> {
        let s1 = Sentence::from_line("想 去", 0).unwrap();
        let a1 = vec![DPAnnotation {
            position: 0,
            pronoun: "我".into(),
            trigger: None,
        }];
        let s2 = Sentence::from_line("他 来 了", 1).unwrap();
        let s3 = Sentence::from_line("吃 吧", 0).unwrap();
        let a3 = vec![
            DPAnnotation {
                position: 0,
                pronoun: "你".into(),
                trigger: None,
            },
            DPAnnotation {
                position: 2,
                pronoun: "它".into(),
                trigger: None,
            },
        ];
        vec![
            vec![
                LabeledSentence::new(s1, a1).unwrap(),
                LabeledSentence::new(s2, vec![]).unwrap(),
            ],
            vec![LabeledSentence::new(s3, a3).unwrap()],
        ]
    }

    #[test]
    fn labeled_corpus_renders_slots_and_sentinel() {
        let docs = labeled_fixture();
        let text = render_labeled(&docs);
        let expected = "想\tDP\t我\n去\tNA\t_\n</s>\tNA\t_\n\n他\tNA\t_\n来\tNA\t_\n了\tNA\t_\n</s>\tNA\t_\n\n\n吃\tDP\t你\n吧\tNA\t_\n</s>\tDP\t它\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn labeled_corpus_round_trip() {
        let docs = labeled_fixture();
        let text = render_labeled(&docs);
        let parsed = parse_labeled(&text).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].len(), 2);
        assert_eq!(parsed[1].len(), 1);
        assert_eq!(parsed[0][0].annotations().len(), 1);
        assert_eq!(parsed[0][0].annotations()[0].pronoun, "我");
        assert_eq!(parsed[1][0].sentence.discourse_index, 0);
        assert_eq!(render_labeled(&parsed), text);
    }

    #[test]
    fn labeled_corpus_rejects_inconsistent_label() {
        // NA slot carrying a pronoun
        let text = "想\tNA\t我\n</s>\tNA\t_\n";
        assert!(parse_labeled(text).is_err());
        // DP slot without a pronoun
        let text = "想\tDP\t_\n</s>\tNA\t_\n";
        assert!(parse_labeled(text).is_err());
        // unknown label
        let text = "想\tXX\t_\n</s>\tNA\t_\n";
        assert!(parse_labeled(text).is_err());
    }

    #[test]
    fn labeled_corpus_requires_sentinel_token() {
        let text = "想\tNA\t_\n去\tNA\t_\n";
        let err = parse_labeled(text).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
    }
}
