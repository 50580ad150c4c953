//! Recovery of dropped pronouns in pro-drop source text.
//!
//! Pro-drop languages omit pronouns that are recoverable from context; when
//! such text is paired with a non-pro-drop translation, every dropped pronoun
//! leaves a trace: an overt target-side pronoun that aligns to nothing. This
//! crate turns that trace into training data and models:
//!
//! 1. [`aligner`] learns a lexical translation table (IBM Model 1 style EM)
//!    and produces word alignments.
//! 2. [`annotator`] finds unaligned target pronouns, projects each one onto a
//!    source-side insertion span between its nearest aligned neighbours, and
//!    lets an n-gram language model ([`lm`]) pick the insertion point and
//!    pronoun form — yielding a labeled corpus without manual annotation.
//! 3. [`detector`] (recurrent sequence labeler) learns *where* pronouns are
//!    missing; [`predictor`] (windowed MLP over lexical and discourse
//!    features) learns *which* pronoun belongs at a detected slot.
//! 4. [`generator`] combines both into 1-best insertions or confusion
//!    networks that downstream systems can consume.
//!
//! [`corpus`] holds the shared data model and file formats, [`neural`] the
//! shared numeric kernels, [`evaluator`] the scoring, and [`synth`] a
//! self-checking synthetic corpus builder used by the test suite and the
//! `synth` CLI subcommand.

pub mod aligner;
pub mod annotator;
pub mod corpus;
pub mod detector;
pub mod evaluator;
pub mod generator;
pub mod lm;
pub mod neural;
pub mod predictor;
pub mod synth;
