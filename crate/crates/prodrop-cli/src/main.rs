//! Command-line front end for the dropped-pronoun recovery pipeline.
//!
//! Nine subcommands cover the full workflow: `synth` builds a synthetic
//! parallel corpus with planted drops, `align` and `train-lm` produce
//! the projection inputs, `annotate` turns unaligned target pronouns
//! into a label corpus, `train-detector` / `train-predictor` fit the
//! two neural models, `generate` emits confusion networks from raw
//! text, `emit-cn` converts a label corpus into the same format, and
//! `evaluate` scores one label corpus against another.
//!
//! Conventions shared by every subcommand:
//! * settings come from flags, with an optional `--config FILE` of
//!   `key=value` lines (keys are the long flag names); explicit flags
//!   win over file values;
//! * every output file is written atomically (temp file + rename) and
//!   is UTF-8 with a trailing newline;
//! * all randomness is seeded (default seed 7), so reruns with the
//!   same inputs are byte-identical;
//! * failures print one machine-parsable line to stderr,
//!   `error: <kind>: <message>`, and exit with a kind-specific code:
//!   2 config, 3 I/O, 4 model, 5 data consistency.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use prodrop::aligner::{align_corpus, train_model1, AlignError};
use prodrop::annotator::annotate_corpus;
use prodrop::corpus::{
    apply_sidecar, default_inventory, group_by_document, parse_corpus, parse_labeled,
    parse_sidecar, render_alignments, render_corpus, render_labeled, render_sidecar, CorpusError,
    LabeledSentence, PronounInventory, Sentence,
};
use prodrop::detector::{parse_detector, render_detector, train_detector, DetectorConfig, DetectorError};
use prodrop::evaluator::{evaluate_labels, render_report};
use prodrop::generator::{build_cn, emit_cn, generate, CnWeighting, GenerateError};
use prodrop::lm::{parse_lm, render_lm, train_lm, LmError};
use prodrop::neural::parse_embeddings;
use prodrop::predictor::{
    extract_features, render_predictor, train_predictor, FeatureBundle, FeatureConfig,
    MlpPredictor, PredictError, PredictorConfig,
};
use prodrop::synth::{synth_corpus, SynthConfig, SynthError};

// ------------------------------------------------------------------
// Errors and exit codes
// ------------------------------------------------------------------

/// One error class per exit code. The printed form is a single line:
/// `error: <kind>: <message>`.
#[derive(Debug)]
enum CliError {
    /// Bad or missing settings: exit 2.
    Config(String),
    /// File system failures: exit 3.
    Io(String),
    /// Unreadable or inconsistent model files: exit 4.
    Model(String),
    /// Inconsistent data files or corpora: exit 5.
    Data(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Model(_) => "model",
            CliError::Data(_) => "data",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Model(m) | CliError::Data(m) => m,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Model(_) => 4,
            CliError::Data(_) => 5,
        }
    }
}

fn config_err(field: &str, why: impl Display) -> CliError {
    CliError::Config(format!("--{field}: {why}"))
}

fn io_err(path: &Path, why: impl Display) -> CliError {
    CliError::Io(format!("{}: {why}", path.display()))
}

/// Corpus errors carry their own I/O variant; everything else in them
/// is a data-consistency problem.
fn corpus_err(path: &Path, e: CorpusError) -> CliError {
    match e {
        CorpusError::Io(inner) => io_err(path, inner),
        other => CliError::Data(format!("{}: {other}", path.display())),
    }
}

fn model_err(path: &Path, why: impl Display) -> CliError {
    CliError::Model(format!("{}: {why}", path.display()))
}

fn detector_train_err(e: DetectorError) -> CliError {
    match e {
        DetectorError::InvalidWindow(_) => CliError::Config(e.to_string()),
        DetectorError::EmptyCorpus => CliError::Data(e.to_string()),
        DetectorError::Io(inner) => CliError::Io(inner.to_string()),
        DetectorError::Malformed { .. } | DetectorError::Neural(_) => {
            CliError::Model(e.to_string())
        }
    }
}

fn predictor_train_err(e: PredictError) -> CliError {
    match e {
        PredictError::InvalidWindows { .. } => CliError::Config(e.to_string()),
        PredictError::EmptyCorpus | PredictError::SingleClassCorpus => {
            CliError::Data(e.to_string())
        }
        PredictError::Io(inner) => CliError::Io(inner.to_string()),
        PredictError::BundleLengthMismatch { .. }
        | PredictError::Malformed { .. }
        | PredictError::Neural(_) => CliError::Model(e.to_string()),
    }
}

fn generate_err(e: GenerateError) -> CliError {
    match e {
        GenerateError::InvalidNBest => CliError::Config(e.to_string()),
        GenerateError::Predict(inner) => predictor_train_err(inner),
        GenerateError::Io(inner) => CliError::Io(inner.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

// ------------------------------------------------------------------
// Settings resolution: flags > config file > default
// ------------------------------------------------------------------

/// Key=value settings loaded from `--config`; keys are the long flag
/// names. Explicit flags always win.
struct Resolver {
    values: BTreeMap<String, String>,
}

impl Resolver {
    fn load(path: Option<&Path>) -> Result<Resolver, CliError> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            for (i, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(CliError::Config(format!(
                        "{}:{}: expected key=value, got {line:?}",
                        path.display(),
                        i + 1
                    )));
                };
                values.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Resolver { values })
    }

    /// Flag value if given, else the config-file value parsed as `T`.
    fn get<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| config_err(key, format!("{e} (config file value {raw:?})"))),
        }
    }

    fn required<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.get(key, flag)?
            .ok_or_else(|| config_err(key, "required setting is missing"))
    }

    fn or<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        Ok(self.get(key, flag)?.unwrap_or(default))
    }
}

// ------------------------------------------------------------------
// File helpers
// ------------------------------------------------------------------

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Writes atomically: the content goes to a temp file in the target
/// directory, which is renamed over the destination. Output is always
/// newline-terminated.
fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| io_err(path, "not a file path"))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{file_name}.tmp-{}", std::process::id()));
    let mut owned;
    let content = if content.ends_with('\n') {
        content
    } else {
        owned = content.to_string();
        owned.push('\n');
        &owned
    };
    fs::write(&tmp, content).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path, e)
    })?;
    Ok(())
}

fn read_corpus(path: &Path) -> Result<Vec<Vec<Sentence>>, CliError> {
    parse_corpus(&read(path)?).map_err(|e| corpus_err(path, e))
}

fn read_labels(path: &Path) -> Result<Vec<Vec<LabeledSentence>>, CliError> {
    parse_labeled(&read(path)?).map_err(|e| corpus_err(path, e))
}

/// Attaches a POS/path sidecar to label documents in place.
fn attach_sidecar(
    docs: &mut [Vec<LabeledSentence>],
    path: &Path,
) -> Result<(), CliError> {
    let tokens = parse_sidecar(&read(path)?).map_err(|e| corpus_err(path, e))?;
    let mut sentence_docs: Vec<Vec<Sentence>> = docs
        .iter()
        .map(|doc| doc.iter().map(|l| l.sentence.clone()).collect())
        .collect();
    apply_sidecar(&mut sentence_docs, &tokens).map_err(|e| corpus_err(path, e))?;
    for (doc, tagged) in docs.iter_mut().zip(sentence_docs) {
        for (labeled, sentence) in doc.iter_mut().zip(tagged) {
            labeled.sentence = sentence;
        }
    }
    Ok(())
}

/// One training instance per annotation, features extracted in
/// document context.
fn predictor_instances(
    docs: &[Vec<LabeledSentence>],
    cfg: &FeatureConfig,
    inventory: &PronounInventory,
) -> Vec<(FeatureBundle, String)> {
    let mut out = Vec::new();
    for doc in docs {
        let sentences: Vec<Sentence> = doc.iter().map(|l| l.sentence.clone()).collect();
        for (idx, labeled) in doc.iter().enumerate() {
            for a in labeled.annotations() {
                out.push((
                    extract_features(&sentences, idx, a.position, cfg, inventory),
                    a.pronoun.clone(),
                ));
            }
        }
    }
    out
}

// ------------------------------------------------------------------
// Command-line surface
// ------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "prodrop",
    version,
    about = "Dropped-pronoun recovery pipeline",
    disable_help_subcommand = true
)]
struct Cli {
    /// Optional key=value settings file; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a lexical translation table by EM and write word alignments.
    Align(AlignArgs),
    /// Train the n-gram language model used to arbitrate insertions.
    TrainLm(TrainLmArgs),
    /// Project unaligned target pronouns into a label corpus.
    Annotate(AnnotateArgs),
    /// Train the slot detector on a label corpus.
    TrainDetector(TrainDetectorArgs),
    /// Train the pronoun classifier on a label corpus.
    TrainPredictor(TrainPredictorArgs),
    /// Run detector + classifier over text and write confusion networks.
    Generate(GenerateArgs),
    /// Convert a label corpus into a confusion-network file.
    EmitCn(EmitCnArgs),
    /// Score an automatic label corpus against a reference one.
    Evaluate(EvaluateArgs),
    /// Build a deterministic synthetic parallel corpus with planted drops.
    Synth(SynthArgs),
}

#[derive(Args)]
struct AlignArgs {
    /// Source-language corpus (one sentence per line, blank line between documents).
    #[arg(long)]
    src: Option<PathBuf>,
    /// Target-language corpus, sentence-parallel to --src.
    #[arg(long)]
    tgt: Option<PathBuf>,
    /// Output word-alignment file ("i-j" pairs, one line per sentence pair).
    #[arg(long)]
    out: Option<PathBuf>,
    /// EM iterations [default: 5].
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args)]
struct TrainLmArgs {
    /// Training corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output language-model file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// N-gram order [default: 5].
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Args)]
struct AnnotateArgs {
    /// Source-language corpus.
    #[arg(long)]
    src: Option<PathBuf>,
    /// Target-language corpus, sentence-parallel to --src.
    #[arg(long)]
    tgt: Option<PathBuf>,
    /// Word-alignment file for the pair.
    #[arg(long)]
    align: Option<PathBuf>,
    /// Language-model file for insertion arbitration.
    #[arg(long)]
    lm: Option<PathBuf>,
    /// Output label corpus.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional output of the pronoun-inserted source text.
    #[arg(long)]
    inserted_out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainDetectorArgs {
    /// Label corpus to train on.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Context window size, odd [default: 5].
    #[arg(long)]
    window: Option<usize>,
    /// Hidden layer size [default: 200].
    #[arg(long)]
    hidden: Option<usize>,
    /// Training epochs [default: 10].
    #[arg(long)]
    epochs: Option<usize>,
    /// Embedding dimension [default: 200].
    #[arg(long)]
    dim: Option<usize>,
    /// Learning rate [default: 0.1].
    #[arg(long)]
    lr: Option<f64>,
    /// RNG seed [default: 7].
    #[arg(long)]
    seed: Option<u64>,
    /// Optional pre-trained embedding file to fine-tune from.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args)]
struct TrainPredictorArgs {
    /// Label corpus to train on.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional POS/path sidecar for the label corpus.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Words/tags taken on each side of the slot [default: 3].
    #[arg(long)]
    s: Option<usize>,
    /// Sentences of pronoun context on each side [default: 2].
    #[arg(long)]
    x: Option<usize>,
    /// Sentences of noun context on each side [default: 2].
    #[arg(long)]
    y: Option<usize>,
    /// Nearest pronouns/nouns kept per direction [default: 4].
    #[arg(long)]
    cap: Option<usize>,
    /// Hidden layer size [default: 200].
    #[arg(long)]
    hidden: Option<usize>,
    /// Training epochs [default: 200].
    #[arg(long)]
    epochs: Option<usize>,
    /// Embedding dimension [default: 100].
    #[arg(long)]
    dim: Option<usize>,
    /// Learning rate [default: 0.1].
    #[arg(long)]
    lr: Option<f64>,
    /// RNG seed [default: 7].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Detector model file.
    #[arg(long)]
    detector: Option<PathBuf>,
    /// Predictor model file.
    #[arg(long)]
    predictor: Option<PathBuf>,
    /// Input source-language corpus.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output confusion-network file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Candidates per slot [default: 6].
    #[arg(long)]
    nbest: Option<usize>,
    /// Optional POS/path sidecar for the input corpus.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Words/tags taken on each side of the slot [default: 3].
    #[arg(long)]
    s: Option<usize>,
    /// Sentences of pronoun context on each side [default: 2].
    #[arg(long)]
    x: Option<usize>,
    /// Sentences of noun context on each side [default: 2].
    #[arg(long)]
    y: Option<usize>,
    /// Nearest pronouns/nouns kept per direction [default: 4].
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Args)]
struct EmitCnArgs {
    /// Label corpus whose annotations become slot columns.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output confusion-network file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Label corpus produced by the pipeline.
    #[arg(long)]
    auto: Option<PathBuf>,
    /// Reference label corpus.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Optional file to write the report to (always printed to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for the generated files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Sentences to generate [default: 5000].
    #[arg(long)]
    sentences: Option<usize>,
    /// Probability of dropping each subject pronoun [default: 0.3].
    #[arg(long)]
    drop_rate: Option<f64>,
    /// Sentences per document [default: 5].
    #[arg(long)]
    doc_len: Option<usize>,
    /// RNG seed [default: 7].
    #[arg(long)]
    seed: Option<u64>,
}

// ------------------------------------------------------------------
// Subcommand bodies
// ------------------------------------------------------------------

fn flatten<T: Clone>(docs: &[Vec<T>]) -> Vec<T> {
    docs.iter().flatten().cloned().collect()
}

fn run_align(args: AlignArgs, cfg: &Resolver) -> Result<(), CliError> {
    let src = cfg.required("src", args.src)?;
    let tgt = cfg.required("tgt", args.tgt)?;
    let out = cfg.required("out", args.out)?;
    let iterations = cfg.or("iterations", args.iterations, 5)?;

    let src_sents = flatten(&read_corpus(&src)?);
    let tgt_sents = flatten(&read_corpus(&tgt)?);
    if src_sents.len() != tgt_sents.len() {
        return Err(CliError::Data(format!(
            "source has {} sentences but target has {}",
            src_sents.len(),
            tgt_sents.len()
        )));
    }
    let pairs: Vec<(Sentence, Sentence)> =
        src_sents.into_iter().zip(tgt_sents).collect();
    let table = train_model1(&pairs, iterations).map_err(|e| match e {
        AlignError::InvalidIterations(_) => config_err("iterations", e),
        AlignError::EmptyCorpus => CliError::Data(e.to_string()),
    })?;
    let aligned = align_corpus(&table, &pairs).map_err(|e| CliError::Data(e.to_string()))?;
    let link_sets: Vec<_> = aligned.iter().map(|p| p.links().clone()).collect();
    write_atomic(&out, &render_alignments(&link_sets))
}

fn run_train_lm(args: TrainLmArgs, cfg: &Resolver) -> Result<(), CliError> {
    let corpus = cfg.required("corpus", args.corpus)?;
    let out = cfg.required("out", args.out)?;
    let order = cfg.or("order", args.order, 5)?;

    let sentences = flatten(&read_corpus(&corpus)?);
    let lm = train_lm(&sentences, order).map_err(|e| match e {
        LmError::InvalidOrder(_) => config_err("order", e),
        other => CliError::Data(other.to_string()),
    })?;
    write_atomic(&out, &render_lm(&lm))
}

fn run_annotate(args: AnnotateArgs, cfg: &Resolver) -> Result<(), CliError> {
    let src = cfg.required::<PathBuf>("src", args.src)?;
    let tgt = cfg.required::<PathBuf>("tgt", args.tgt)?;
    let align = cfg.required::<PathBuf>("align", args.align)?;
    let lm_path = cfg.required::<PathBuf>("lm", args.lm)?;
    let out = cfg.required("out", args.out)?;
    let inserted_out = cfg.get("inserted-out", args.inserted_out)?;

    let pairs = prodrop::corpus::parse_parallel(&read(&src)?, &read(&tgt)?, &read(&align)?)
        .map_err(|e| corpus_err(&src, e))?;
    let lm = parse_lm(&read(&lm_path)?).map_err(|e| model_err(&lm_path, e))?;
    let inventory = default_inventory();
    let (labels, inserted) =
        annotate_corpus(&pairs, &inventory, &lm).map_err(|e| CliError::Data(e.to_string()))?;

    let label_docs = group_by_document(labels, |l| l.sentence.discourse_index);
    write_atomic(&out, &render_labeled(&label_docs))?;
    if let Some(path) = inserted_out {
        let docs = group_by_document(inserted, |s| s.discourse_index);
        write_atomic(&path, &render_corpus(&docs))?;
    }
    Ok(())
}

fn run_train_detector(args: TrainDetectorArgs, cfg: &Resolver) -> Result<(), CliError> {
    let labels = cfg.required::<PathBuf>("labels", args.labels)?;
    let out = cfg.required("out", args.out)?;
    let embeddings_path = cfg.get::<PathBuf>("embeddings", args.embeddings)?;
    let defaults = DetectorConfig::default();
    let config = DetectorConfig {
        window: cfg.or("window", args.window, defaults.window)?,
        hidden: cfg.or("hidden", args.hidden, defaults.hidden)?,
        epochs: cfg.or("epochs", args.epochs, defaults.epochs)?,
        embedding_dim: cfg.or("dim", args.dim, defaults.embedding_dim)?,
        learning_rate: cfg.or("lr", args.lr, defaults.learning_rate)?,
        seed: cfg.or("seed", args.seed, defaults.seed)?,
        pretrained: match embeddings_path {
            None => None,
            Some(path) => {
                Some(parse_embeddings(&read(&path)?).map_err(|e| model_err(&path, e))?)
            }
        },
    };

    let corpus = flatten(&read_labels(&labels)?);
    let (model, _) = train_detector(&corpus, &config).map_err(detector_train_err)?;
    write_atomic(&out, &render_detector(&model))
}

fn feature_config(
    cfg: &Resolver,
    s: Option<usize>,
    x: Option<usize>,
    y: Option<usize>,
    cap: Option<usize>,
) -> Result<FeatureConfig, CliError> {
    let defaults = FeatureConfig::default();
    let config = FeatureConfig {
        s: cfg.or("s", s, defaults.s)?,
        x: cfg.or("x", x, defaults.x)?,
        y: cfg.or("y", y, defaults.y)?,
        cap: cfg.or("cap", cap, defaults.cap)?,
    };
    config.validate().map_err(predictor_train_err)?;
    Ok(config)
}

fn run_train_predictor(args: TrainPredictorArgs, cfg: &Resolver) -> Result<(), CliError> {
    let labels = cfg.required::<PathBuf>("labels", args.labels)?;
    let out = cfg.required("out", args.out)?;
    let sidecar = cfg.get::<PathBuf>("sidecar", args.sidecar)?;
    let features = feature_config(cfg, args.s, args.x, args.y, args.cap)?;
    let defaults = PredictorConfig::default();
    let config = PredictorConfig {
        hidden: cfg.or("hidden", args.hidden, defaults.hidden)?,
        epochs: cfg.or("epochs", args.epochs, defaults.epochs)?,
        embedding_dim: cfg.or("dim", args.dim, defaults.embedding_dim)?,
        learning_rate: cfg.or("lr", args.lr, defaults.learning_rate)?,
        seed: cfg.or("seed", args.seed, defaults.seed)?,
    };

    let mut docs = read_labels(&labels)?;
    if let Some(path) = sidecar {
        attach_sidecar(&mut docs, &path)?;
    }
    let inventory = default_inventory();
    let instances = predictor_instances(&docs, &features, &inventory);
    let (model, _) = train_predictor(&instances, &config).map_err(predictor_train_err)?;
    write_atomic(&out, &render_predictor(&model))
}

fn run_generate(args: GenerateArgs, cfg: &Resolver) -> Result<(), CliError> {
    let detector_path = cfg.required::<PathBuf>("detector", args.detector)?;
    let predictor_path = cfg.required::<PathBuf>("predictor", args.predictor)?;
    let input = cfg.required::<PathBuf>("in", args.input)?;
    let out = cfg.required("out", args.out)?;
    let nbest = cfg.or("nbest", args.nbest, 6)?;
    let sidecar = cfg.get::<PathBuf>("sidecar", args.sidecar)?;
    let features = feature_config(cfg, args.s, args.x, args.y, args.cap)?;
    if nbest == 0 {
        return Err(config_err("nbest", "must be at least 1"));
    }

    let detector =
        parse_detector(&read(&detector_path)?).map_err(|e| model_err(&detector_path, e))?;
    let predictor: MlpPredictor =
        prodrop::predictor::parse_predictor(&read(&predictor_path)?)
            .map_err(|e| model_err(&predictor_path, e))?;
    let mut docs = read_corpus(&input)?;
    if let Some(path) = sidecar {
        let tokens = parse_sidecar(&read(&path)?).map_err(|e| corpus_err(&path, e))?;
        apply_sidecar(&mut docs, &tokens).map_err(|e| corpus_err(&path, e))?;
    }
    let inventory = default_inventory();

    let mut networks = Vec::new();
    for doc in &docs {
        let generations = generate(&detector, &predictor, doc, nbest, &features, &inventory)
            .map_err(generate_err)?;
        for (sentence, g) in doc.iter().zip(&generations) {
            networks.push(
                build_cn(sentence, &g.slots, &g.nbest, nbest, CnWeighting::Uniform)
                    .map_err(generate_err)?,
            );
        }
    }
    write_atomic(&out, &emit_cn(&networks))
}

fn run_emit_cn(args: EmitCnArgs, cfg: &Resolver) -> Result<(), CliError> {
    let labels = cfg.required::<PathBuf>("labels", args.labels)?;
    let out = cfg.required("out", args.out)?;

    let docs = read_labels(&labels)?;
    let mut networks = Vec::new();
    for labeled in docs.iter().flatten() {
        // one slot column per annotated position, holding its first
        // pronoun at weight 1 (label corpora carry a single decision
        // per slot)
        let mut slots: Vec<usize> = labeled
            .annotations()
            .iter()
            .map(|a| a.position)
            .collect();
        slots.sort_unstable();
        slots.dedup();
        let nbest: Vec<Vec<(String, f64)>> = slots
            .iter()
            .map(|&p| {
                let pronouns = labeled.pronouns_at(p);
                vec![(pronouns[0].to_string(), 1.0)]
            })
            .collect();
        networks.push(
            build_cn(&labeled.sentence, &slots, &nbest, 1, CnWeighting::Uniform)
                .map_err(generate_err)?,
        );
    }
    write_atomic(&out, &emit_cn(&networks))
}

fn run_evaluate(args: EvaluateArgs, cfg: &Resolver) -> Result<(), CliError> {
    let auto_path = cfg.required::<PathBuf>("auto", args.auto)?;
    let gold_path = cfg.required::<PathBuf>("gold", args.gold)?;
    let out = cfg.get::<PathBuf>("out", args.out)?;

    let auto = flatten(&read_labels(&auto_path)?);
    let gold = flatten(&read_labels(&gold_path)?);
    let report =
        evaluate_labels(&auto, &gold).map_err(|e| CliError::Data(e.to_string()))?;
    let rendered = render_report(&report);
    print!("{rendered}");
    if let Some(path) = out {
        write_atomic(&path, &rendered)?;
    }
    Ok(())
}

fn run_synth(args: SynthArgs, cfg: &Resolver) -> Result<(), CliError> {
    let out_dir: PathBuf = cfg.required("out-dir", args.out_dir)?;
    let defaults = SynthConfig::default();
    let config = SynthConfig {
        sentences: cfg.or("sentences", args.sentences, defaults.sentences)?,
        drop_rate: cfg.or("drop-rate", args.drop_rate, defaults.drop_rate)?,
        doc_len: cfg.or("doc-len", args.doc_len, defaults.doc_len)?,
        seed: cfg.or("seed", args.seed, defaults.seed)?,
    };
    let corpus = synth_corpus(&config).map_err(|e| match e {
        SynthError::NoSentences => config_err("sentences", e),
        SynthError::InvalidDropRate(_) => config_err("drop-rate", e),
        SynthError::InvalidDocLen => config_err("doc-len", e),
        SynthError::Corpus(inner) => CliError::Data(inner.to_string()),
    })?;

    let sources: Vec<Sentence> = corpus.pairs.iter().map(|p| p.source.clone()).collect();
    let targets: Vec<Sentence> = corpus.pairs.iter().map(|p| p.target.clone()).collect();
    let links: Vec<_> = corpus.pairs.iter().map(|p| p.links().clone()).collect();

    let by_doc = |sentences: Vec<Sentence>| group_by_document(sentences, |s| s.discourse_index);
    write_atomic(&out_dir.join("source.txt"), &render_corpus(&by_doc(sources.clone())))?;
    write_atomic(&out_dir.join("source.pos"), &render_sidecar(&sources))?;
    write_atomic(&out_dir.join("target.txt"), &render_corpus(&by_doc(targets)))?;
    write_atomic(&out_dir.join("alignments.pharaoh"), &render_alignments(&links))?;
    write_atomic(
        &out_dir.join("full-source.txt"),
        &render_corpus(&by_doc(corpus.full_source)),
    )?;
    let gold_docs = group_by_document(corpus.gold, |g| g.sentence.discourse_index);
    write_atomic(&out_dir.join("gold-labels.tsv"), &render_labeled(&gold_docs))?;
    Ok(())
}

// ------------------------------------------------------------------
// Entry point
// ------------------------------------------------------------------

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = Resolver::load(cli.config.as_deref())?;
    match cli.command {
        Command::Align(args) => run_align(args, &cfg),
        Command::TrainLm(args) => run_train_lm(args, &cfg),
        Command::Annotate(args) => run_annotate(args, &cfg),
        Command::TrainDetector(args) => run_train_detector(args, &cfg),
        Command::TrainPredictor(args) => run_train_predictor(args, &cfg),
        Command::Generate(args) => run_generate(args, &cfg),
        Command::EmitCn(args) => run_emit_cn(args, &cfg),
        Command::Evaluate(args) => run_evaluate(args, &cfg),
        Command::Synth(args) => run_synth(args, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first_line = e.to_string();
            let first_line = first_line.lines().next().unwrap_or("bad arguments");
            let message = first_line.strip_prefix("error: ").unwrap_or(first_line);
            eprintln!("error: config: {message}");
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let one_line = e.message().replace('\n', "; ");
            eprintln!("error: {}: {}", e.kind(), one_line);
            ExitCode::from(e.exit_code())
        }
    }
}
