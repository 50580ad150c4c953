//! Recurrent sequence labeler that marks, for every insertion slot of a
//! sentence, whether a pronoun is missing there ({NA, DP}).
//!
//! Architecture: a window of token embeddings around each slot is
//! concatenated into the input vector; a single Elman recurrence
//! `h_t = sigmoid(U x_t + V h_{t-1})` (h_0 = 0) feeds a bias-free
//! softmax output layer over the two labels. A sentence of `n` tokens
//! has `n + 1` slots — slot `i` means "insert before token `i`", slot
//! `n` sits before the end-of-sentence sentinel.
//!
//! Training is plain per-sentence backpropagation through time over the
//! full (short) sentence with summed cross-entropy loss; embeddings are
//! fine-tuned together with the weights.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{LabeledSentence, Sentence, SlotLabel};
use crate::neural::{
    self, matvec, matvec_t, outer_acc, softmax, EmbeddingTable, NeuralError,
};

/// Embedding used for window positions outside the sentence.
pub const PAD_SYMBOL: &str = "<pad>";

/// Output class order: index 0 = NA, index 1 = DP.
pub const DP_CLASS: usize = 1;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("cannot train a detector on an empty corpus")]
    EmptyCorpus,
    #[error("context window must be odd and positive, got {0}")]
    InvalidWindow(usize),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Training configuration. Defaults: window 5, hidden 200, 10 epochs,
/// 200-dimensional embeddings, learning rate 0.1, seed 7.
#[derive(Debug, Clone)]
pub struct DetectorConfig {
    pub window: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub embedding_dim: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Optional pre-trained embeddings; tokens missing from it are
    /// randomly initialized. Fine-tuned during training either way.
    pub pretrained: Option<EmbeddingTable>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            window: 5,
            hidden: 200,
            epochs: 10,
            embedding_dim: 200,
            learning_rate: 0.1,
            seed: 7,
            pretrained: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RnnDetector {
    embeddings: EmbeddingTable,
    /// hidden x (window * dim): raw input -> hidden
    u: Vec<Vec<f64>>,
    /// hidden x hidden: previous hidden (context nodes) -> hidden
    v: Vec<Vec<f64>>,
    /// 2 x hidden: hidden -> label logits (no bias)
    w: Vec<Vec<f64>>,
    /// context half-window; full window = 2k + 1
    k: usize,
}

impl RnnDetector {
    /// Assembles a detector from explicit parts, validating shapes.
    pub fn from_parts(
        embeddings: EmbeddingTable,
        u: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
        w: Vec<Vec<f64>>,
        k: usize,
    ) -> Result<Self, DetectorError> {
        if !embeddings.contains(PAD_SYMBOL) {
            return Err(DetectorError::Malformed {
                line: 0,
                msg: format!("embedding table is missing {PAD_SYMBOL}"),
            });
        }
        let hidden = u.len();
        let input = (2 * k + 1) * embeddings.dim();
        let dims_ok = v.len() == hidden
            && w.len() == 2
            && u.iter().all(|r| r.len() == input)
            && v.iter().all(|r| r.len() == hidden)
            && w.iter().all(|r| r.len() == hidden);
        if !dims_ok || hidden == 0 {
            return Err(DetectorError::Neural(NeuralError::ShapeMismatch {
                expected: hidden,
                found: v.len(),
            }));
        }
        Ok(RnnDetector {
            embeddings,
            u,
            v,
            w,
            k,
        })
    }

    pub fn half_window(&self) -> usize {
        self.k
    }

    pub fn hidden_size(&self) -> usize {
        self.u.len()
    }

    pub fn embeddings(&self) -> &EmbeddingTable {
        &self.embeddings
    }

    /// Embedding keys feeding slot `t`: token indices `t-k ..= t+k`,
    /// out-of-range positions replaced by the PAD symbol.
    fn window_keys(&self, sentence: &Sentence, t: usize) -> Vec<String> {
        let len = sentence.len() as isize;
        let t = t as isize;
        let k = self.k as isize;
        (t - k..=t + k)
            .map(|i| {
                if i < 0 || i >= len {
                    PAD_SYMBOL.to_string()
                } else {
                    self.embeddings
                        .resolve(sentence.tokens()[i as usize].surface())
                        .to_string()
                }
            })
            .collect()
    }

    /// Concatenated window embedding for slot `t` (length (2k+1)*dim).
    pub fn window_embed(&self, sentence: &Sentence, t: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity((2 * self.k + 1) * self.embeddings.dim());
        for key in self.window_keys(sentence, t) {
            x.extend_from_slice(self.embeddings.get(&key));
        }
        x
    }

    /// Per-slot label distributions, `|tokens| + 1` rows summing to 1.
    pub fn forward(&self, sentence: &Sentence) -> Vec<Vec<f64>> {
        self.forward_states(sentence).2
    }

    /// Forward pass keeping intermediate states for backpropagation:
    /// (window keys per slot, hidden states, output distributions).
    #[allow(clippy::type_complexity)]
    fn forward_states(
        &self,
        sentence: &Sentence,
    ) -> (Vec<Vec<String>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let slots = sentence.len() + 1;
        let mut keys = Vec::with_capacity(slots);
        let mut hiddens = Vec::with_capacity(slots);
        let mut outputs = Vec::with_capacity(slots);
        let mut h_prev = vec![0.0; self.hidden_size()];
        for t in 0..slots {
            let slot_keys = self.window_keys(sentence, t);
            let mut x = Vec::with_capacity((2 * self.k + 1) * self.embeddings.dim());
            for key in &slot_keys {
                x.extend_from_slice(self.embeddings.get(key));
            }
            let mut a = matvec(&self.u, &x);
            let rec = matvec(&self.v, &h_prev);
            for (ai, ri) in a.iter_mut().zip(&rec) {
                *ai += ri;
            }
            let h: Vec<f64> = a.iter().map(|&z| neural::sigmoid(z)).collect();
            let y = softmax(&matvec(&self.w, &h));
            keys.push(slot_keys);
            hiddens.push(h.clone());
            outputs.push(y);
            h_prev = h;
        }
        (keys, hiddens, outputs)
    }

    /// Slots whose P(DP) is at or above the threshold, ascending.
    pub fn detect(&self, sentence: &Sentence, threshold: f64) -> Vec<usize> {
        self.forward(sentence)
            .iter()
            .enumerate()
            .filter(|(_, y)| y[DP_CLASS] >= threshold)
            .map(|(t, _)| t)
            .collect()
    }

    /// Summed cross-entropy of the labeled sentence.
    pub fn loss(&self, labeled: &LabeledSentence) -> f64 {
        let outputs = self.forward(&labeled.sentence);
        outputs
            .iter()
            .zip(labeled.labels())
            .map(|(y, &label)| neural::cross_entropy(y, class_index(label)))
            .sum()
    }

    /// Full-sentence backpropagation through time. Returns gradients of
    /// the summed cross-entropy with respect to every parameter.
    fn backward(&self, labeled: &LabeledSentence) -> DetectorGrads {
        let (keys, hiddens, outputs) = self.forward_states(&labeled.sentence);
        let slots = outputs.len();
        let dim = self.embeddings.dim();
        let mut grads = DetectorGrads::zeros(self);

        // gradient of the NEXT slot's pre-activation, for the recurrence
        let mut da_next: Option<Vec<f64>> = None;
        for t in (0..slots).rev() {
            let mut dz = outputs[t].clone();
            dz[class_index(labeled.labels()[t])] -= 1.0;
            outer_acc(&mut grads.w, &dz, &hiddens[t]);

            let mut dh = matvec_t(&self.w, &dz);
            if let Some(da) = &da_next {
                for (dhi, vi) in dh.iter_mut().zip(matvec_t(&self.v, da)) {
                    *dhi += vi;
                }
            }
            let da: Vec<f64> = dh
                .iter()
                .zip(&hiddens[t])
                .map(|(&g, &h)| g * h * (1.0 - h))
                .collect();

            let x = {
                let mut x = Vec::with_capacity((2 * self.k + 1) * dim);
                for key in &keys[t] {
                    x.extend_from_slice(self.embeddings.get(key));
                }
                x
            };
            outer_acc(&mut grads.u, &da, &x);
            if t > 0 {
                outer_acc(&mut grads.v, &da, &hiddens[t - 1]);
            }
            let dx = matvec_t(&self.u, &da);
            for (w_idx, key) in keys[t].iter().enumerate() {
                let slice = &dx[w_idx * dim..(w_idx + 1) * dim];
                let acc = grads
                    .embeddings
                    .entry(key.clone())
                    .or_insert_with(|| vec![0.0; dim]);
                for (a, &g) in acc.iter_mut().zip(slice) {
                    *a += g;
                }
            }
            da_next = Some(da);
        }
        grads
    }

    fn apply_grads(&mut self, grads: &DetectorGrads, lr: f64) -> Result<(), NeuralError> {
        neural::sgd_step_matrix(&mut self.u, &grads.u, lr)?;
        neural::sgd_step_matrix(&mut self.v, &grads.v, lr)?;
        neural::sgd_step_matrix(&mut self.w, &grads.w, lr)?;
        for (token, g) in &grads.embeddings {
            neural::sgd_step(self.embeddings.get_mut(token), g, lr)?;
        }
        Ok(())
    }

    /// All parameters flattened in a fixed order (embedding table in
    /// sorted token order, then U, V, W row-major) for gradient checking.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for (_, v) in self.embeddings.iter() {
            flat.extend_from_slice(v);
        }
        for m in [&self.u, &self.v, &self.w] {
            for row in m {
                flat.extend_from_slice(row);
            }
        }
        flat
    }

    /// Writes a flat parameter vector back (inverse of [`params_flat`]).
    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for (_, v) in self.embeddings.iter_mut() {
            for x in v.iter_mut() {
                *x = it.next().expect("flat vector too short");
            }
        }
        for m in [&mut self.u, &mut self.v, &mut self.w] {
            for row in m {
                for x in row.iter_mut() {
                    *x = it.next().expect("flat vector too short");
                }
            }
        }
        assert!(it.next().is_none(), "flat vector too long");
    }

    /// Analytic gradients in [`params_flat`] order.
    pub fn grads_flat(&self, labeled: &LabeledSentence) -> Vec<f64> {
        let grads = self.backward(labeled);
        let dim = self.embeddings.dim();
        let zero = vec![0.0; dim];
        let mut flat = Vec::new();
        for (token, _) in self.embeddings.iter() {
            flat.extend_from_slice(grads.embeddings.get(token).unwrap_or(&zero));
        }
        for m in [&grads.u, &grads.v, &grads.w] {
            for row in m {
                flat.extend_from_slice(row);
            }
        }
        flat
    }
}

struct DetectorGrads {
    embeddings: BTreeMap<String, Vec<f64>>,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
}

impl DetectorGrads {
    fn zeros(model: &RnnDetector) -> Self {
        DetectorGrads {
            embeddings: BTreeMap::new(),
            u: model.u.iter().map(|r| vec![0.0; r.len()]).collect(),
            v: model.v.iter().map(|r| vec![0.0; r.len()]).collect(),
            w: model.w.iter().map(|r| vec![0.0; r.len()]).collect(),
        }
    }
}

fn class_index(label: SlotLabel) -> usize {
    match label {
        SlotLabel::Na => 0,
        SlotLabel::Dp => DP_CLASS,
    }
}

/// Trains a detector; returns the model and the summed training loss per
/// epoch.
pub fn train_detector(
    corpus: &[LabeledSentence],
    config: &DetectorConfig,
) -> Result<(RnnDetector, Vec<f64>), DetectorError> {
    if corpus.is_empty() {
        return Err(DetectorError::EmptyCorpus);
    }
    if config.window == 0 || config.window % 2 == 0 {
        return Err(DetectorError::InvalidWindow(config.window));
    }
    let k = config.window / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut vocab: Vec<String> = corpus
        .iter()
        .flat_map(|ls| ls.sentence.surfaces().map(str::to_string))
        .collect();
    vocab.push(PAD_SYMBOL.to_string());
    let embeddings = match &config.pretrained {
        None => EmbeddingTable::new_random(vocab, config.embedding_dim, &mut rng),
        Some(pre) => {
            let mut vectors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            vocab.push(neural::UNK_SYMBOL.to_string());
            vocab.push(neural::NONE_SYMBOL.to_string());
            vocab.sort();
            vocab.dedup();
            for token in vocab {
                let vector = if pre.contains(&token) {
                    pre.get(&token).to_vec()
                } else {
                    neural::uniform_vec(&mut rng, config.embedding_dim)
                };
                vectors.insert(token, vector);
            }
            EmbeddingTable::from_vectors(vectors, config.embedding_dim, &mut rng)?
        }
    };

    let input = (2 * k + 1) * config.embedding_dim;
    let u = neural::uniform_matrix(&mut rng, config.hidden, input);
    let v = neural::uniform_matrix(&mut rng, config.hidden, config.hidden);
    let w = neural::uniform_matrix(&mut rng, 2, config.hidden);
    let mut model = RnnDetector::from_parts(embeddings, u, v, w, k)?;

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let mut total = 0.0;
        for labeled in corpus {
            total += model.loss(labeled);
            let grads = model.backward(labeled);
            model.apply_grads(&grads, config.learning_rate)?;
        }
        epoch_losses.push(total);
    }
    Ok((model, epoch_losses))
}

// ------------------------------------------------------------ model file

/// Renders the detector as text: a self-describing header, the embedding
/// table, then the U, V, W blocks row-major at 9 significant digits.
pub fn render_detector(model: &RnnDetector) -> String {
    let mut out = String::new();
    out.push_str("RNN-DETECTOR v1\n");
    out.push_str(&format!(
        "k {} hidden {} dim {} vocab {}\n",
        model.k,
        model.hidden_size(),
        model.embeddings.dim(),
        model.embeddings.len()
    ));
    for (token, vector) in model.embeddings.iter() {
        out.push_str(token);
        for x in vector {
            out.push_str(&format!(" {x:.8e}"));
        }
        out.push('\n');
    }
    for (name, m) in [("U", &model.u), ("V", &model.v), ("W", &model.w)] {
        out.push_str(name);
        out.push('\n');
        for row in m {
            let mut first = true;
            for x in row {
                if !first {
                    out.push(' ');
                }
                out.push_str(&format!("{x:.8e}"));
                first = false;
            }
            out.push('\n');
        }
    }
    out
}

pub fn parse_detector(text: &str) -> Result<RnnDetector, DetectorError> {
    let lines: Vec<&str> = text.lines().collect();
    let bad = |line: usize, msg: &str| DetectorError::Malformed {
        line,
        msg: msg.to_string(),
    };
    if lines.first() != Some(&"RNN-DETECTOR v1") {
        return Err(bad(1, "expected header `RNN-DETECTOR v1`"));
    }
    let dims: Vec<&str> = lines
        .get(1)
        .ok_or_else(|| bad(2, "missing dimension line"))?
        .split_whitespace()
        .collect();
    let &[k_, k, h_, hidden, d_, dim, v_, vocab] = dims.as_slice() else {
        return Err(bad(2, "expected `k <k> hidden <h> dim <d> vocab <n>`"));
    };
    if [k_, h_, d_, v_] != ["k", "hidden", "dim", "vocab"] {
        return Err(bad(2, "expected `k <k> hidden <h> dim <d> vocab <n>`"));
    }
    let parse_usize = |s: &str, line: usize| {
        s.parse::<usize>()
            .map_err(|_| bad(line, &format!("bad integer {s:?}")))
    };
    let k = parse_usize(k, 2)?;
    let hidden = parse_usize(hidden, 2)?;
    let dim = parse_usize(dim, 2)?;
    let vocab = parse_usize(vocab, 2)?;

    let mut cursor = 2;
    let mut vectors = BTreeMap::new();
    for _ in 0..vocab {
        let line = lines
            .get(cursor)
            .ok_or_else(|| bad(cursor + 1, "embedding table truncated"))?;
        let mut fields = line.split_whitespace();
        let token = fields
            .next()
            .ok_or_else(|| bad(cursor + 1, "blank embedding line"))?;
        let vector: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| bad(cursor + 1, &format!("bad number {f:?}")))
            })
            .collect::<Result<_, _>>()?;
        if vector.len() != dim {
            return Err(bad(cursor + 1, "embedding vector has wrong length"));
        }
        vectors.insert(token.to_string(), vector);
        cursor += 1;
    }
    if vectors.len() != vocab {
        return Err(bad(2, "duplicate tokens in embedding table"));
    }

    let mut read_matrix = |name: &str, rows: usize, cols: usize| {
        if lines.get(cursor) != Some(&name) {
            return Err(bad(cursor + 1, &format!("expected `{name}` marker")));
        }
        cursor += 1;
        let mut m = Vec::with_capacity(rows);
        for _ in 0..rows {
            let line = lines
                .get(cursor)
                .ok_or_else(|| bad(cursor + 1, "weight block truncated"))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| bad(cursor + 1, &format!("bad number {f:?}")))
                })
                .collect::<Result<_, _>>()?;
            if row.len() != cols {
                return Err(bad(cursor + 1, "weight row has wrong length"));
            }
            m.push(row);
            cursor += 1;
        }
        Ok(m)
    };
    let input = (2 * k + 1) * dim;
    let u = read_matrix("U", hidden, input)?;
    let v = read_matrix("V", hidden, hidden)?;
    let w = read_matrix("W", 2, hidden)?;
    if cursor != lines.len() {
        return Err(bad(cursor + 1, "trailing content after weight blocks"));
    }

    // the rng is never consulted: files always carry both sentinels
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let embeddings = EmbeddingTable::from_vectors(vectors, dim, &mut rng)?;
    RnnDetector::from_parts(embeddings, u, v, w, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DPAnnotation;

    fn sent(line: &str) -> Sentence {
        Sentence::from_line(line, 0).unwrap()
    }

    fn labeled(line: &str, dp_slots: &[usize]) -> LabeledSentence {
        let annotations = dp_slots
            .iter()
            .map(|&position| DPAnnotation {
                position,
                pronoun: "我".to_string(),
                trigger: None,
            })
            .collect();
        LabeledSentence::new(sent(line), annotations).unwrap()
    }

    fn table(entries: &[(&str, &[f64])]) -> EmbeddingTable {
        let dim = entries[0].1.len();
        let vectors: BTreeMap<String, Vec<f64>> = entries
            .iter()
            .map(|(t, v)| (t.to_string(), v.to_vec()))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        EmbeddingTable::from_vectors(vectors, dim, &mut rng).unwrap()
    }

    /// Hand-computable scalar model: one real token, d = 1, k = 0,
    /// hidden = 1, v(a) = 0.5, v(pad) = -0.3, U = 0.8, V = 0.4,
    /// W = [[1], [-1]].
    fn tiny_model() -> RnnDetector {
        let emb = table(&[
            ("a", &[0.5]),
            (PAD_SYMBOL, &[-0.3]),
            (neural::UNK_SYMBOL, &[0.1]),
            (neural::NONE_SYMBOL, &[0.0]),
        ]);
        RnnDetector::from_parts(
            emb,
            vec![vec![0.8]],
            vec![vec![0.4]],
            vec![vec![1.0], vec![-1.0]],
            0,
        )
        .unwrap()
    }

    #[test]
    fn window_pads_the_edges() {
        let emb = table(&[
            ("a", &[1.0, 2.0]),
            ("b", &[3.0, 4.0]),
            (PAD_SYMBOL, &[-1.0, -2.0]),
        ]);
        let model = RnnDetector::from_parts(
            emb,
            vec![vec![0.0; 10]; 3],
            vec![vec![0.0; 3]; 3],
            vec![vec![0.0; 3]; 2],
            2,
        )
        .unwrap();
        let s = sent("a b");
        // slot 0, k=2: positions -2,-1 pad; 0 -> a; 1 -> b; 2 -> pad
        let x = model.window_embed(&s, 0);
        assert_eq!(
            x,
            vec![-1.0, -2.0, -1.0, -2.0, 1.0, 2.0, 3.0, 4.0, -1.0, -2.0]
        );
        // the sentinel slot sees only the last window of real tokens
        let x_end = model.window_embed(&s, 2);
        assert_eq!(
            x_end,
            vec![1.0, 2.0, 3.0, 4.0, -1.0, -2.0, -1.0, -2.0, -1.0, -2.0]
        );
    }

    #[test]
    fn oov_tokens_use_the_unk_vector() {
        let emb = table(&[("a", &[1.0]), (PAD_SYMBOL, &[0.0])]);
        let model = RnnDetector::from_parts(
            emb,
            vec![vec![0.0; 1]],
            vec![vec![0.0; 1]],
            vec![vec![0.0; 1]; 2],
            0,
        )
        .unwrap();
        let unk = model.embeddings().get(neural::UNK_SYMBOL).to_vec();
        assert_eq!(model.window_embed(&sent("zzz"), 0), unk);
    }

    #[test]
    fn zero_weights_give_uniform_outputs() {
        let emb = table(&[("a", &[0.3, -0.2]), (PAD_SYMBOL, &[0.1, 0.1])]);
        let model = RnnDetector::from_parts(
            emb,
            vec![vec![0.0; 6]; 4],
            vec![vec![0.0; 4]; 4],
            vec![vec![0.0; 4]; 2],
            1,
        )
        .unwrap();
        let out = model.forward(&sent("a a a"));
        assert_eq!(out.len(), 4); // |tokens| + 1 slots
        for y in out {
            assert_eq!(y, vec![0.5, 0.5]);
        }
    }

    /// Frozen hand forward-pass: both slots of a one-token sentence.
    /// Slot 0: x=0.5, h=sigmoid(0.4)=0.598687660..., P=(0.768057539, 0.231942461).
    /// Slot 1: x=-0.3 (pad), h=sigmoid(-0.24+0.4*h0)=0.499868766...,
    ///          P=(0.731006971, 0.268993029).
    #[test]
    fn tiny_forward_matches_hand_computation() {
        let model = tiny_model();
        let out = model.forward(&sent("a"));
        assert_eq!(out.len(), 2);
        let expected = [
            (0.76805753851646123, 0.23194246148353877),
            (0.73100697116525471, 0.26899302883474529),
        ];
        for (y, (p_na, p_dp)) in out.iter().zip(expected) {
            assert!((y[0] - p_na).abs() < 1e-12, "{} vs {p_na}", y[0]);
            assert!((y[1] - p_dp).abs() < 1e-12, "{} vs {p_dp}", y[1]);
        }
    }

    #[test]
    fn detect_uses_at_or_above_threshold() {
        // all-zero weights put P(DP) at exactly 0.5 everywhere
        let emb = table(&[("a", &[0.2]), (PAD_SYMBOL, &[0.0])]);
        let model = RnnDetector::from_parts(
            emb,
            vec![vec![0.0; 1]],
            vec![vec![0.0; 1]],
            vec![vec![0.0; 1]; 2],
            0,
        )
        .unwrap();
        let s = sent("a a");
        assert_eq!(model.detect(&s, 0.5), vec![0, 1, 2]); // >= convention
        assert_eq!(model.detect(&s, 0.5 + 1e-12), Vec::<usize>::new());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let config = DetectorConfig {
            window: 3,
            hidden: 3,
            epochs: 0,
            embedding_dim: 2,
            learning_rate: 0.1,
            seed: 11,
            pretrained: None,
        };
        let data = vec![labeled("a b c", &[1])];
        let (model, _) = train_detector(&data, &config).unwrap();
        let case = labeled("a b c", &[0, 2]);
        let params = model.params_flat();
        let analytic = model.grads_flat(&case);
        let mut probe = model.clone();
        let err = neural::grad_check(
            &params,
            &analytic,
            |p| {
                probe.set_params_flat(p);
                probe.loss(&case)
            },
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn overfitting_one_sentence_reduces_loss() {
        let config = DetectorConfig {
            window: 3,
            hidden: 8,
            epochs: 3,
            embedding_dim: 4,
            learning_rate: 0.1,
            seed: 7,
            pretrained: None,
        };
        let data = vec![labeled("他 说 过 想", &[0, 2]); 4];
        let (_, losses) = train_detector(&data, &config).unwrap();
        assert_eq!(losses.len(), 3);
        assert!(losses[0] > losses[1] && losses[1] > losses[2], "{losses:?}");
    }

    #[test]
    fn training_is_deterministic_under_a_seed() {
        let config = DetectorConfig {
            window: 3,
            hidden: 4,
            epochs: 2,
            embedding_dim: 3,
            learning_rate: 0.1,
            seed: 42,
            pretrained: None,
        };
        let data = vec![labeled("a b", &[1]), labeled("b a", &[])];
        let (m1, l1) = train_detector(&data, &config).unwrap();
        let (m2, l2) = train_detector(&data, &config).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(render_detector(&m1), render_detector(&m2));
    }

    #[test]
    fn outputs_depend_on_prefix_order() {
        let config = DetectorConfig {
            window: 3,
            hidden: 5,
            epochs: 1,
            embedding_dim: 3,
            learning_rate: 0.1,
            seed: 3,
            pretrained: None,
        };
        let data = vec![labeled("a b c", &[1]), labeled("c a b", &[2])];
        let (model, _) = train_detector(&data, &config).unwrap();
        let fwd = model.forward(&sent("a b c"));
        let rev = model.forward(&sent("c b a"));
        let differs = fwd
            .iter()
            .zip(&rev)
            .any(|(a, b)| (a[DP_CLASS] - b[DP_CLASS]).abs() > 1e-12);
        assert!(differs, "recurrence should be order-sensitive");
    }

    #[test]
    fn empty_corpus_and_even_window_are_errors() {
        let config = DetectorConfig::default();
        assert!(matches!(
            train_detector(&[], &config),
            Err(DetectorError::EmptyCorpus)
        ));
        let bad = DetectorConfig {
            window: 4,
            ..DetectorConfig::default()
        };
        assert!(matches!(
            train_detector(&[labeled("a", &[])], &bad),
            Err(DetectorError::InvalidWindow(4))
        ));
    }

    #[test]
    fn default_config_matches_documented_settings() {
        let c = DetectorConfig::default();
        assert_eq!(
            (c.window, c.hidden, c.epochs, c.embedding_dim),
            (5, 200, 10, 200)
        );
        assert_eq!(c.learning_rate, 0.1);
    }

    #[test]
    fn model_file_round_trip_is_byte_identical() {
        let config = DetectorConfig {
            window: 3,
            hidden: 3,
            epochs: 1,
            embedding_dim: 2,
            learning_rate: 0.1,
            seed: 5,
            pretrained: None,
        };
        let data = vec![labeled("a b", &[0])];
        let (model, _) = train_detector(&data, &config).unwrap();
        let text = render_detector(&model);
        let parsed = parse_detector(&text).unwrap();
        assert_eq!(render_detector(&parsed), text);
        // behaviour survives the round trip up to formatting quantization
        let probs = model.forward(&sent("a b"));
        let probs2 = parsed.forward(&sent("a b"));
        for (a, b) in probs.iter().zip(&probs2) {
            assert!((a[DP_CLASS] - b[DP_CLASS]).abs() < 1e-7);
        }
    }

    #[test]
    fn parser_rejects_malformed_files() {
        assert!(parse_detector("").is_err());
        assert!(parse_detector("RNN-DETECTOR v1\n").is_err());
        assert!(parse_detector("WRONG v1\nk 0 hidden 1 dim 1 vocab 0\n").is_err());
        let (model, _) = train_detector(
            &[labeled("a", &[])],
            &DetectorConfig {
                window: 1,
                hidden: 1,
                epochs: 0,
                embedding_dim: 1,
                learning_rate: 0.1,
                seed: 1,
                pretrained: None,
            },
        )
        .unwrap();
        let text = render_detector(&model);
        // truncate: drop the last line (a W row)
        let truncated: String = text.lines().collect::<Vec<_>>()
            [..text.lines().count() - 1]
            .join("\n");
        assert!(parse_detector(&(truncated + "\n")).is_err());
        // trailing garbage
        assert!(parse_detector(&(text + "extra\n")).is_err());
    }

    #[test]
    fn pretrained_embeddings_are_loaded_and_extended() {
        let pre = table(&[("a", &[9.0, 9.0]), (PAD_SYMBOL, &[1.0, 1.0])]);
        let config = DetectorConfig {
            window: 1,
            hidden: 2,
            epochs: 0,
            embedding_dim: 2,
            learning_rate: 0.1,
            seed: 2,
            pretrained: Some(pre),
        };
        let data = vec![labeled("a b", &[])];
        let (model, _) = train_detector(&data, &config).unwrap();
        assert_eq!(model.embeddings().get("a"), [9.0, 9.0].as_slice());
        // "b" was not pretrained: falls back to random but exists
        assert!(model.embeddings().contains("b"));
        assert_ne!(model.embeddings().get("b"), [9.0, 9.0].as_slice());
    }
}
