//! Multi-class classifier choosing WHICH pronoun was dropped at a
//! detected slot.
//!
//! Each training/inference instance is a fixed-length bundle of named
//! indicator features around the insertion slot `p` (surrounding words
//! and POS tags, nearby overt pronouns in the same and neighbouring
//! sentences, nearby nouns, and syntax paths read from an optional
//! sidecar). Every feature name is embedded through a per-kind lookup
//! table — separate tables keep a POS tag from colliding with a
//! homographic word — and the concatenated embeddings pass through two
//! ReLU layers into a bias-free softmax over the observed pronoun
//! classes.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{PronounInventory, Sentence};
use crate::neural::{
    self, matvec, matvec_t, outer_acc, relu_derivative, softmax, EmbeddingTable,
    NeuralError, NONE_SYMBOL,
};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("cannot train a predictor on an empty instance set")]
    EmptyCorpus,
    #[error("training instances contain only one pronoun class")]
    SingleClassCorpus,
    #[error("feature bundle length mismatch: expected {expected}, found {found}")]
    BundleLengthMismatch { expected: usize, found: usize },
    #[error("window sizes must be at least 1 (s={s}, x={x}, y={y}, cap={cap})")]
    InvalidWindows { s: usize, x: usize, y: usize, cap: usize },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ------------------------------------------------------------- features

/// Which embedding table a feature slot reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FeatureKind {
    Word,
    Pos,
    Pronoun,
    Noun,
    Path,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::Word,
        FeatureKind::Pos,
        FeatureKind::Pronoun,
        FeatureKind::Noun,
        FeatureKind::Path,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Word => "word",
            FeatureKind::Pos => "pos",
            FeatureKind::Pronoun => "pronoun",
            FeatureKind::Noun => "noun",
            FeatureKind::Path => "path",
        }
    }

    pub fn from_name(name: &str) -> Option<FeatureKind> {
        FeatureKind::ALL.into_iter().find(|k| k.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Context window sizes for feature extraction: `s` tokens on each side
/// of the slot, pronouns from `x` and nouns from `y` neighbouring
/// sentences, and `cap` entries per variable-length group.
#[derive(Debug, Clone, Copy)]
pub struct FeatureConfig {
    pub s: usize,
    pub x: usize,
    pub y: usize,
    pub cap: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            s: 3,
            x: 2,
            y: 2,
            cap: 4,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), PredictError> {
        if self.s < 1 || self.x < 1 || self.y < 1 || self.cap < 1 {
            return Err(PredictError::InvalidWindows {
                s: self.s,
                x: self.x,
                y: self.y,
                cap: self.cap,
            });
        }
        Ok(())
    }

    /// Every bundle extracted under this config has exactly this length:
    /// 2s words + 2s POS tags + 2 same-sentence pronouns + 2*cap
    /// neighbouring-sentence pronouns + 2*cap neighbouring-sentence
    /// nouns + 2 syntax paths.
    pub fn bundle_len(&self) -> usize {
        4 * self.s + 4 * self.cap + 4
    }
}

/// Fixed-length ordered feature list; missing values hold `<none>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureBundle {
    pub slots: Vec<(FeatureKind, String)>,
}

impl FeatureBundle {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

fn none() -> String {
    NONE_SYMBOL.to_string()
}

/// Extracts the feature bundle for insertion slot `p` of
/// `doc[sentence_idx]`. Overt pronouns are identified through the
/// inventory's source-side candidate forms; nouns are tokens whose POS
/// annotation starts with `N`; paths come from the token path
/// annotations. Anything absent (document edges, missing sidecar)
/// becomes `<none>`.
pub fn extract_features(
    doc: &[Sentence],
    sentence_idx: usize,
    p: usize,
    cfg: &FeatureConfig,
    inventory: &PronounInventory,
) -> FeatureBundle {
    let sentence = &doc[sentence_idx];
    let tokens = sentence.tokens();
    let len = tokens.len();
    let mut slots: Vec<(FeatureKind, String)> = Vec::with_capacity(cfg.bundle_len());

    // 1. surrounding words: s before the slot, s after, reading order
    let word_at = |i: isize| -> String {
        if i < 0 || i as usize >= len {
            none()
        } else {
            tokens[i as usize].surface().to_string()
        }
    };
    let p_ = p as isize;
    let s_ = cfg.s as isize;
    for i in p_ - s_..p_ {
        slots.push((FeatureKind::Word, word_at(i)));
    }
    for i in p_..p_ + s_ {
        slots.push((FeatureKind::Word, word_at(i)));
    }

    // 2. surrounding POS tags over the same window
    let pos_at = |i: isize| -> String {
        if i < 0 || i as usize >= len {
            none()
        } else {
            tokens[i as usize].pos.clone().unwrap_or_else(none)
        }
    };
    for i in p_ - s_..p_ {
        slots.push((FeatureKind::Pos, pos_at(i)));
    }
    for i in p_..p_ + s_ {
        slots.push((FeatureKind::Pos, pos_at(i)));
    }

    // 3-4. nearest overt pronoun before / from the slot on, same sentence
    let is_pronoun = |i: usize| inventory.is_source_pronoun(tokens[i].surface());
    let preceding = (0..p.min(len))
        .rev()
        .find(|&i| is_pronoun(i))
        .map(|i| tokens[i].surface().to_string());
    slots.push((FeatureKind::Pronoun, preceding.unwrap_or_else(none)));
    let following = (p.min(len)..len)
        .find(|&i| is_pronoun(i))
        .map(|i| tokens[i].surface().to_string());
    slots.push((FeatureKind::Pronoun, following.unwrap_or_else(none)));

    // 5-6. overt pronouns in the x sentences before / after this one
    let collect = |range: &mut dyn Iterator<Item = usize>, pick: &dyn Fn(&Sentence) -> Vec<String>| {
        let mut found: Vec<String> = Vec::new();
        for idx in range {
            found.extend(pick(&doc[idx]));
        }
        found
    };
    let pronouns_of = |s: &Sentence| -> Vec<String> {
        s.surfaces()
            .filter(|t| inventory.is_source_pronoun(t))
            .map(str::to_string)
            .collect()
    };
    let before_range = sentence_idx.saturating_sub(cfg.x)..sentence_idx;
    let after_range = sentence_idx + 1..(sentence_idx + 1 + cfg.x).min(doc.len());
    let mut prev_pronouns = collect(&mut before_range.clone().into_iter(), &pronouns_of);
    // keep the `cap` nearest (the tail of the preceding context)
    if prev_pronouns.len() > cfg.cap {
        prev_pronouns.drain(..prev_pronouns.len() - cfg.cap);
    }
    prev_pronouns.resize_with(cfg.cap, none);
    for v in prev_pronouns {
        slots.push((FeatureKind::Pronoun, v));
    }
    let mut next_pronouns = collect(&mut after_range.clone().into_iter(), &pronouns_of);
    next_pronouns.truncate(cfg.cap);
    next_pronouns.resize_with(cfg.cap, none);
    for v in next_pronouns {
        slots.push((FeatureKind::Pronoun, v));
    }

    // 7-8. nouns (POS starting with N) in the y sentences before / after
    let nouns_of = |s: &Sentence| -> Vec<String> {
        s.tokens()
            .iter()
            .filter(|t| t.pos.as_deref().is_some_and(|p| p.starts_with('N')))
            .map(|t| t.surface().to_string())
            .collect()
    };
    let before_range = sentence_idx.saturating_sub(cfg.y)..sentence_idx;
    let after_range = sentence_idx + 1..(sentence_idx + 1 + cfg.y).min(doc.len());
    let mut prev_nouns = collect(&mut before_range.into_iter(), &nouns_of);
    if prev_nouns.len() > cfg.cap {
        prev_nouns.drain(..prev_nouns.len() - cfg.cap);
    }
    prev_nouns.resize_with(cfg.cap, none);
    for v in prev_nouns {
        slots.push((FeatureKind::Noun, v));
    }
    let mut next_nouns = collect(&mut after_range.into_iter(), &nouns_of);
    next_nouns.truncate(cfg.cap);
    next_nouns.resize_with(cfg.cap, none);
    for v in next_nouns {
        slots.push((FeatureKind::Noun, v));
    }

    // 9-10. syntax path of the token at p and of the token before it
    let path_at = |i: isize| -> String {
        if i < 0 || i as usize >= len {
            none()
        } else {
            tokens[i as usize].path.clone().unwrap_or_else(none)
        }
    };
    slots.push((FeatureKind::Path, path_at(p_)));
    slots.push((FeatureKind::Path, path_at(p_ - 1)));

    debug_assert_eq!(slots.len(), cfg.bundle_len());
    FeatureBundle { slots }
}

// ---------------------------------------------------------------- model

/// Training configuration. Defaults: hidden 200, 200 epochs,
/// 100-dimensional embeddings, learning rate 0.1, seed 7.
#[derive(Debug, Clone)]
pub struct PredictorConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub embedding_dim: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            hidden: 200,
            epochs: 200,
            embedding_dim: 100,
            learning_rate: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MlpPredictor {
    /// One embedding table per feature kind, indexed by `FeatureKind`.
    tables: Vec<EmbeddingTable>,
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    /// output layer, deliberately bias-free
    w3: Vec<Vec<f64>>,
    /// lexicographically sorted distinct pronouns seen in training
    classes: Vec<String>,
    bundle_len: usize,
}

impl MlpPredictor {
    /// Assembles a predictor from explicit parts, validating the shape
    /// chain (bundle embeddings -> hidden1 -> hidden2 -> classes).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        tables: Vec<EmbeddingTable>,
        w1: Vec<Vec<f64>>,
        b1: Vec<f64>,
        w2: Vec<Vec<f64>>,
        b2: Vec<f64>,
        w3: Vec<Vec<f64>>,
        classes: Vec<String>,
        bundle_len: usize,
    ) -> Result<Self, PredictError> {
        let mismatch = |expected: usize, found: usize| {
            PredictError::Neural(NeuralError::ShapeMismatch { expected, found })
        };
        if tables.len() != FeatureKind::ALL.len() {
            return Err(mismatch(FeatureKind::ALL.len(), tables.len()));
        }
        let dim = tables[0].dim();
        if tables.iter().any(|t| t.dim() != dim) {
            return Err(mismatch(dim, 0));
        }
        if classes.len() < 2 {
            return Err(PredictError::SingleClassCorpus);
        }
        let input = bundle_len * dim;
        let h1 = w1.len();
        let h2 = w2.len();
        let ok = w1.iter().all(|r| r.len() == input)
            && b1.len() == h1
            && w2.iter().all(|r| r.len() == h1)
            && b2.len() == h2
            && w3.len() == classes.len()
            && w3.iter().all(|r| r.len() == h2)
            && h1 > 0
            && h2 > 0;
        if !ok {
            return Err(mismatch(input, 0));
        }
        Ok(MlpPredictor {
            tables,
            w1,
            b1,
            w2,
            b2,
            w3,
            classes,
            bundle_len,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn bundle_len(&self) -> usize {
        self.bundle_len
    }

    pub fn table(&self, kind: FeatureKind) -> &EmbeddingTable {
        &self.tables[kind.index()]
    }

    fn embed(&self, bundle: &FeatureBundle) -> Result<Vec<f64>, PredictError> {
        if bundle.len() != self.bundle_len {
            return Err(PredictError::BundleLengthMismatch {
                expected: self.bundle_len,
                found: bundle.len(),
            });
        }
        let dim = self.tables[0].dim();
        let mut x = Vec::with_capacity(bundle.len() * dim);
        for (kind, value) in &bundle.slots {
            x.extend_from_slice(self.tables[kind.index()].get(value));
        }
        Ok(x)
    }

    /// Probability vector over [`classes`](Self::classes).
    pub fn forward(&self, bundle: &FeatureBundle) -> Result<Vec<f64>, PredictError> {
        Ok(self.forward_states(bundle)?.probs)
    }

    fn forward_states(&self, bundle: &FeatureBundle) -> Result<ForwardStates, PredictError> {
        let x = self.embed(bundle)?;
        let mut z1 = matvec(&self.w1, &x);
        for (z, b) in z1.iter_mut().zip(&self.b1) {
            *z += b;
        }
        let h1: Vec<f64> = z1.iter().map(|&z| neural::relu(z)).collect();
        let mut z2 = matvec(&self.w2, &h1);
        for (z, b) in z2.iter_mut().zip(&self.b2) {
            *z += b;
        }
        let h2: Vec<f64> = z2.iter().map(|&z| neural::relu(z)).collect();
        let probs = softmax(&matvec(&self.w3, &h2));
        Ok(ForwardStates {
            x,
            z1,
            h1,
            z2,
            h2,
            probs,
        })
    }

    /// Cross-entropy of one instance (gold must be a known class).
    pub fn loss(&self, bundle: &FeatureBundle, gold: &str) -> Result<f64, PredictError> {
        let target = self.class_index(gold)?;
        Ok(neural::cross_entropy(&self.forward(bundle)?, target))
    }

    fn class_index(&self, pronoun: &str) -> Result<usize, PredictError> {
        self.classes
            .binary_search_by(|c| c.as_str().cmp(pronoun))
            .map_err(|_| PredictError::Malformed {
                line: 0,
                msg: format!("unknown pronoun class {pronoun:?}"),
            })
    }

    /// Top-N classes by descending probability; ties break toward the
    /// earlier class in sorted order. Probabilities are raw softmax
    /// values. Returns min(N, |classes|) entries.
    pub fn predict_nbest(
        &self,
        bundle: &FeatureBundle,
        n: usize,
    ) -> Result<Vec<(String, f64)>, PredictError> {
        let probs = self.forward(bundle)?;
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| {
            probs[b]
                .partial_cmp(&probs[a])
                .expect("softmax outputs are finite")
                .then(a.cmp(&b))
        });
        Ok(order
            .into_iter()
            .take(n)
            .map(|i| (self.classes[i].clone(), probs[i]))
            .collect())
    }

    fn backward(
        &self,
        bundle: &FeatureBundle,
        gold: &str,
    ) -> Result<PredictorGrads, PredictError> {
        let states = self.forward_states(bundle)?;
        let target = self.class_index(gold)?;
        let mut grads = PredictorGrads::zeros(self);

        let mut dz3 = states.probs.clone();
        dz3[target] -= 1.0;
        outer_acc(&mut grads.w3, &dz3, &states.h2);

        let dh2 = matvec_t(&self.w3, &dz3);
        let da2: Vec<f64> = dh2
            .iter()
            .zip(&states.z2)
            .map(|(&g, &z)| g * relu_derivative(z))
            .collect();
        outer_acc(&mut grads.w2, &da2, &states.h1);
        neural::axpy(&mut grads.b2, 1.0, &da2);

        let dh1 = matvec_t(&self.w2, &da2);
        let da1: Vec<f64> = dh1
            .iter()
            .zip(&states.z1)
            .map(|(&g, &z)| g * relu_derivative(z))
            .collect();
        outer_acc(&mut grads.w1, &da1, &states.x);
        neural::axpy(&mut grads.b1, 1.0, &da1);

        let dx = matvec_t(&self.w1, &da1);
        let dim = self.tables[0].dim();
        for (slot, (kind, value)) in bundle.slots.iter().enumerate() {
            let key = self.tables[kind.index()].resolve(value).to_string();
            let acc = grads.tables[kind.index()]
                .entry(key)
                .or_insert_with(|| vec![0.0; dim]);
            for (a, &g) in acc.iter_mut().zip(&dx[slot * dim..(slot + 1) * dim]) {
                *a += g;
            }
        }
        Ok(grads)
    }

    fn apply_grads(&mut self, grads: &PredictorGrads, lr: f64) -> Result<(), NeuralError> {
        neural::sgd_step_matrix(&mut self.w1, &grads.w1, lr)?;
        neural::sgd_step(&mut self.b1, &grads.b1, lr)?;
        neural::sgd_step_matrix(&mut self.w2, &grads.w2, lr)?;
        neural::sgd_step(&mut self.b2, &grads.b2, lr)?;
        neural::sgd_step_matrix(&mut self.w3, &grads.w3, lr)?;
        for (kind, table_grads) in grads.tables.iter().enumerate() {
            for (token, g) in table_grads {
                neural::sgd_step(self.tables[kind].get_mut(token), g, lr)?;
            }
        }
        Ok(())
    }

    /// Parameters flattened in fixed order: the five embedding tables
    /// (kind order, tokens sorted), then W1, b1, W2, b2, W3 row-major.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for table in &self.tables {
            for (_, v) in table.iter() {
                flat.extend_from_slice(v);
            }
        }
        for m in [&self.w1, &self.w2] {
            for row in m {
                flat.extend_from_slice(row);
            }
        }
        // biases after their matrices would interleave awkwardly between
        // models; keep a single documented order instead
        flat.extend_from_slice(&self.b1);
        flat.extend_from_slice(&self.b2);
        for row in &self.w3 {
            flat.extend_from_slice(row);
        }
        flat
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for table in &mut self.tables {
            for (_, v) in table.iter_mut() {
                for x in v.iter_mut() {
                    *x = it.next().expect("flat vector too short");
                }
            }
        }
        for m in [&mut self.w1, &mut self.w2] {
            for row in m {
                for x in row.iter_mut() {
                    *x = it.next().expect("flat vector too short");
                }
            }
        }
        for b in [&mut self.b1, &mut self.b2] {
            for x in b.iter_mut() {
                *x = it.next().expect("flat vector too short");
            }
        }
        for row in &mut self.w3 {
            for x in row.iter_mut() {
                *x = it.next().expect("flat vector too short");
            }
        }
        assert!(it.next().is_none(), "flat vector too long");
    }

    /// Analytic gradients in [`params_flat`](Self::params_flat) order.
    pub fn grads_flat(&self, bundle: &FeatureBundle, gold: &str) -> Result<Vec<f64>, PredictError> {
        let grads = self.backward(bundle, gold)?;
        let mut flat = Vec::new();
        for (kind, table) in self.tables.iter().enumerate() {
            let dim = table.dim();
            let zero = vec![0.0; dim];
            for (token, _) in table.iter() {
                flat.extend_from_slice(grads.tables[kind].get(token).unwrap_or(&zero));
            }
        }
        for m in [&grads.w1, &grads.w2] {
            for row in m {
                flat.extend_from_slice(row);
            }
        }
        flat.extend_from_slice(&grads.b1);
        flat.extend_from_slice(&grads.b2);
        for row in &grads.w3 {
            flat.extend_from_slice(row);
        }
        Ok(flat)
    }
}

struct ForwardStates {
    x: Vec<f64>,
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
    probs: Vec<f64>,
}

struct PredictorGrads {
    tables: Vec<BTreeMap<String, Vec<f64>>>,
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    w3: Vec<Vec<f64>>,
}

impl PredictorGrads {
    fn zeros(model: &MlpPredictor) -> Self {
        PredictorGrads {
            tables: vec![BTreeMap::new(); FeatureKind::ALL.len()],
            w1: model.w1.iter().map(|r| vec![0.0; r.len()]).collect(),
            b1: vec![0.0; model.b1.len()],
            w2: model.w2.iter().map(|r| vec![0.0; r.len()]).collect(),
            b2: vec![0.0; model.b2.len()],
            w3: model.w3.iter().map(|r| vec![0.0; r.len()]).collect(),
        }
    }
}

/// Trains a predictor on (bundle, gold pronoun) instances; returns the
/// model and the summed training loss per epoch. The class list is the
/// sorted set of distinct gold pronouns.
pub fn train_predictor(
    instances: &[(FeatureBundle, String)],
    config: &PredictorConfig,
) -> Result<(MlpPredictor, Vec<f64>), PredictError> {
    if instances.is_empty() {
        return Err(PredictError::EmptyCorpus);
    }
    let bundle_len = instances[0].0.len();
    for (bundle, _) in instances {
        if bundle.len() != bundle_len {
            return Err(PredictError::BundleLengthMismatch {
                expected: bundle_len,
                found: bundle.len(),
            });
        }
    }
    let mut classes: Vec<String> = instances.iter().map(|(_, g)| g.clone()).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(PredictError::SingleClassCorpus);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tables = Vec::with_capacity(FeatureKind::ALL.len());
    for kind in FeatureKind::ALL {
        let vocab: Vec<String> = instances
            .iter()
            .flat_map(|(b, _)| {
                b.slots
                    .iter()
                    .filter(|(k, _)| *k == kind)
                    .map(|(_, v)| v.clone())
            })
            .collect();
        tables.push(EmbeddingTable::new_random(
            vocab,
            config.embedding_dim,
            &mut rng,
        ));
    }
    let input = bundle_len * config.embedding_dim;
    let w1 = neural::uniform_matrix(&mut rng, config.hidden, input);
    let b1 = neural::uniform_vec(&mut rng, config.hidden);
    let w2 = neural::uniform_matrix(&mut rng, config.hidden, config.hidden);
    let b2 = neural::uniform_vec(&mut rng, config.hidden);
    let w3 = neural::uniform_matrix(&mut rng, classes.len(), config.hidden);
    let mut model =
        MlpPredictor::from_parts(tables, w1, b1, w2, b2, w3, classes, bundle_len)?;

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let mut total = 0.0;
        for (bundle, gold) in instances {
            total += model.loss(bundle, gold)?;
            let grads = model.backward(bundle, gold)?;
            model.apply_grads(&grads, config.learning_rate)?;
        }
        epoch_losses.push(total);
    }
    Ok((model, epoch_losses))
}

// -------------------------------------------------------- instance dump

/// One instance per line: the gold pronoun, a TAB, then the bundle as
/// space-separated `kind=value` fields in slot order.
pub fn render_instances(instances: &[(FeatureBundle, String)]) -> String {
    let mut out = String::new();
    for (bundle, gold) in instances {
        out.push_str(gold);
        out.push('\t');
        for (i, (kind, value)) in bundle.slots.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(kind.name());
            out.push('=');
            out.push_str(value);
        }
        out.push('\n');
    }
    out
}

pub fn parse_instances(text: &str) -> Result<Vec<(FeatureBundle, String)>, PredictError> {
    let mut instances = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let (gold, rest) = line.split_once('\t').ok_or(PredictError::Malformed {
            line: line_no,
            msg: "expected `<pronoun>\\t<kind=value ...>`".into(),
        })?;
        if gold.is_empty() {
            return Err(PredictError::Malformed {
                line: line_no,
                msg: "empty gold pronoun".into(),
            });
        }
        let mut slots = Vec::new();
        for field in rest.split(' ').filter(|f| !f.is_empty()) {
            let (kind, value) = field.split_once('=').ok_or(PredictError::Malformed {
                line: line_no,
                msg: format!("field {field:?} is not kind=value"),
            })?;
            let kind = FeatureKind::from_name(kind).ok_or(PredictError::Malformed {
                line: line_no,
                msg: format!("unknown feature kind {kind:?}"),
            })?;
            slots.push((kind, value.to_string()));
        }
        if slots.is_empty() {
            return Err(PredictError::Malformed {
                line: line_no,
                msg: "instance has no features".into(),
            });
        }
        instances.push((FeatureBundle { slots }, gold.to_string()));
    }
    Ok(instances)
}

// ------------------------------------------------------------ model file

/// Renders the predictor as text: header, class list, per-kind embedding
/// tables, then the weight blocks row-major at 9 significant digits.
pub fn render_predictor(model: &MlpPredictor) -> String {
    let mut out = String::new();
    out.push_str("MLP-PREDICTOR v1\n");
    out.push_str(&format!(
        "dim {} hidden1 {} hidden2 {} bundle {} classes {}\n",
        model.tables[0].dim(),
        model.w1.len(),
        model.w2.len(),
        model.bundle_len,
        model.classes.len()
    ));
    for class in &model.classes {
        out.push_str(class);
        out.push('\n');
    }
    for kind in FeatureKind::ALL {
        let table = model.table(kind);
        out.push_str(&format!("TABLE {} {}\n", kind.name(), table.len()));
        for (token, vector) in table.iter() {
            out.push_str(token);
            for x in vector {
                out.push_str(&format!(" {x:.8e}"));
            }
            out.push('\n');
        }
    }
    let blocks: [(&str, &dyn Fn(&mut String)); 5] = [
        ("W1", &|o| push_matrix(o, &model.w1)),
        ("B1", &|o| push_row(o, &model.b1)),
        ("W2", &|o| push_matrix(o, &model.w2)),
        ("B2", &|o| push_row(o, &model.b2)),
        ("W3", &|o| push_matrix(o, &model.w3)),
    ];
    for (name, write) in blocks {
        out.push_str(name);
        out.push('\n');
        write(&mut out);
    }
    out
}

fn push_row(out: &mut String, row: &[f64]) {
    for (i, x) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!("{x:.8e}"));
    }
    out.push('\n');
}

fn push_matrix(out: &mut String, m: &[Vec<f64>]) {
    for row in m {
        push_row(out, row);
    }
}

pub fn parse_predictor(text: &str) -> Result<MlpPredictor, PredictError> {
    let lines: Vec<&str> = text.lines().collect();
    let bad = |line: usize, msg: String| PredictError::Malformed { line, msg };
    if lines.first() != Some(&"MLP-PREDICTOR v1") {
        return Err(bad(1, "expected header `MLP-PREDICTOR v1`".into()));
    }
    let dims: Vec<&str> = lines
        .get(1)
        .ok_or_else(|| bad(2, "missing dimension line".into()))?
        .split_whitespace()
        .collect();
    let &[d_, dim, h1_, h1, h2_, h2, b_, bundle, c_, n_classes] = dims.as_slice() else {
        return Err(bad(
            2,
            "expected `dim <d> hidden1 <h> hidden2 <h> bundle <b> classes <c>`".into(),
        ));
    };
    if [d_, h1_, h2_, b_, c_] != ["dim", "hidden1", "hidden2", "bundle", "classes"] {
        return Err(bad(2, "bad dimension line keys".into()));
    }
    let parse_usize = |s: &str, line: usize| {
        s.parse::<usize>()
            .map_err(|_| bad(line, format!("bad integer {s:?}")))
    };
    let dim = parse_usize(dim, 2)?;
    let h1 = parse_usize(h1, 2)?;
    let h2 = parse_usize(h2, 2)?;
    let bundle_len = parse_usize(bundle, 2)?;
    let n_classes = parse_usize(n_classes, 2)?;

    let mut cursor = 2;
    let mut classes = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let line = lines
            .get(cursor)
            .ok_or_else(|| bad(cursor + 1, "class list truncated".into()))?;
        classes.push(line.to_string());
        cursor += 1;
    }

    let mut tables = Vec::with_capacity(FeatureKind::ALL.len());
    for kind in FeatureKind::ALL {
        let line = lines
            .get(cursor)
            .ok_or_else(|| bad(cursor + 1, "missing TABLE block".into()))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let &["TABLE", name, count] = fields.as_slice() else {
            return Err(bad(cursor + 1, format!("expected TABLE marker, got {line:?}")));
        };
        if name != kind.name() {
            return Err(bad(
                cursor + 1,
                format!("expected table {:?}, found {name:?}", kind.name()),
            ));
        }
        let count = parse_usize(count, cursor + 1)?;
        cursor += 1;
        let mut vectors = BTreeMap::new();
        for _ in 0..count {
            let line = lines
                .get(cursor)
                .ok_or_else(|| bad(cursor + 1, "embedding table truncated".into()))?;
            let mut fields = line.split_whitespace();
            let token = fields
                .next()
                .ok_or_else(|| bad(cursor + 1, "blank embedding line".into()))?;
            let vector: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| bad(cursor + 1, format!("bad number {f:?}")))
                })
                .collect::<Result<_, _>>()?;
            if vector.len() != dim {
                return Err(bad(cursor + 1, "embedding vector has wrong length".into()));
            }
            vectors.insert(token.to_string(), vector);
            cursor += 1;
        }
        if vectors.len() != count {
            return Err(bad(cursor, "duplicate tokens in embedding table".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0); // sentinels always on disk
        tables.push(EmbeddingTable::from_vectors(vectors, dim, &mut rng)?);
    }

    let mut read_rows = |name: &str, rows: usize, cols: usize| {
        if lines.get(cursor) != Some(&name) {
            return Err(bad(cursor + 1, format!("expected `{name}` marker")));
        }
        cursor += 1;
        let mut m = Vec::with_capacity(rows);
        for _ in 0..rows {
            let line = lines
                .get(cursor)
                .ok_or_else(|| bad(cursor + 1, "weight block truncated".into()))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| bad(cursor + 1, format!("bad number {f:?}")))
                })
                .collect::<Result<_, _>>()?;
            if row.len() != cols {
                return Err(bad(cursor + 1, "weight row has wrong length".into()));
            }
            m.push(row);
            cursor += 1;
        }
        Ok(m)
    };
    let input = bundle_len * dim;
    let w1 = read_rows("W1", h1, input)?;
    let b1 = read_rows("B1", 1, h1)?.remove(0);
    let w2 = read_rows("W2", h2, h1)?;
    let b2 = read_rows("B2", 1, h2)?.remove(0);
    let w3 = read_rows("W3", n_classes, h2)?;
    if cursor != lines.len() {
        return Err(bad(cursor + 1, "trailing content after weight blocks".into()));
    }
    MlpPredictor::from_parts(tables, w1, b1, w2, b2, w3, classes, bundle_len)
}
