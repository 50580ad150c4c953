//! Shared numeric core for the two neural models: activations, softmax,
//! cross-entropy, SGD, embedding tables, matrix helpers, and
//! finite-difference gradient checking.
//!
//! Everything runs in `f64`. All random initialization is uniform in
//! [-0.1, 0.1] and flows from a caller-supplied seeded generator, so a
//! fixed seed reproduces parameters and training trajectories bit for
//! bit.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

/// Fallback symbol for tokens absent from an embedding table.
pub const UNK_SYMBOL: &str = "<unk>";
/// Explicit missing-value symbol (absent feature, out-of-range context).
pub const NONE_SYMBOL: &str = "<none>";

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite gradient encountered during checking")]
    NonFiniteGradient,
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ------------------------------------------------------------ activations

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_vec(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&x| sigmoid(x)).collect()
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn relu_vec(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&x| relu(x)).collect()
}

/// Subgradient used everywhere for backprop: 0 at the kink.
pub fn relu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Max-subtracted softmax; output sums to 1 even for extreme inputs.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Cross-entropy of a probability vector against a one-hot target.
pub fn cross_entropy(probs: &[f64], target: usize) -> f64 {
    -probs[target].ln()
}

// ------------------------------------------------------- linear algebra

/// y = W x, with W stored row-major as `rows x cols`.
pub fn matvec(w: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    w.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// x = W^T y — the backward counterpart of [`matvec`].
pub fn matvec_t(w: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let cols = w.first().map_or(0, Vec::len);
    let mut out = vec![0.0; cols];
    for (row, &yi) in w.iter().zip(y) {
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += yi * wij;
        }
    }
    out
}

/// acc += y x^T (outer-product accumulation for weight gradients).
pub fn outer_acc(acc: &mut [Vec<f64>], y: &[f64], x: &[f64]) {
    for (row, &yi) in acc.iter_mut().zip(y) {
        for (a, &xj) in row.iter_mut().zip(x) {
            *a += yi * xj;
        }
    }
}

/// acc += a * x.
pub fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (o, &xi) in acc.iter_mut().zip(x) {
        *o += a * xi;
    }
}

// --------------------------------------------------------- optimization

/// One SGD step: p <- p - lr * g, elementwise.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) -> Result<(), NeuralError> {
    if params.len() != grads.len() {
        return Err(NeuralError::ShapeMismatch {
            expected: params.len(),
            found: grads.len(),
        });
    }
    for (p, &g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}

/// SGD over a matrix held as rows.
pub fn sgd_step_matrix(
    params: &mut [Vec<f64>],
    grads: &[Vec<f64>],
    lr: f64,
) -> Result<(), NeuralError> {
    if params.len() != grads.len() {
        return Err(NeuralError::ShapeMismatch {
            expected: params.len(),
            found: grads.len(),
        });
    }
    for (p, g) in params.iter_mut().zip(grads) {
        sgd_step(p, g, lr)?;
    }
    Ok(())
}

// ------------------------------------------------------- initialization

/// Uniform [-0.1, 0.1] vector drawn from the shared generator.
pub fn uniform_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect()
}

/// Uniform [-0.1, 0.1] matrix, row-major.
pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| uniform_vec(rng, cols)).collect()
}

// ----------------------------------------------------- embedding tables

/// Token -> dense vector lookup with `<unk>` and `<none>` sentinels
/// always present. Lookups for unlisted tokens fall back to `<unk>`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Randomly initialized table over `vocab` plus the two sentinels.
    pub fn new_random(
        vocab: impl IntoIterator<Item = String>,
        dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut names: Vec<String> = vocab.into_iter().collect();
        names.push(UNK_SYMBOL.to_string());
        names.push(NONE_SYMBOL.to_string());
        names.sort();
        names.dedup();
        // draw in sorted order so the seed fully determines every vector
        let vectors = names
            .into_iter()
            .map(|name| (name, uniform_vec(rng, dim)))
            .collect();
        EmbeddingTable { dim, vectors }
    }

    pub fn from_vectors(
        mut vectors: BTreeMap<String, Vec<f64>>,
        dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, NeuralError> {
        for sentinel in [UNK_SYMBOL, NONE_SYMBOL] {
            vectors
                .entry(sentinel.to_string())
                .or_insert_with(|| uniform_vec(rng, dim));
        }
        for v in vectors.values() {
            if v.len() != dim {
                return Err(NeuralError::ShapeMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
        }
        Ok(EmbeddingTable { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    /// The stored vector, falling back to `<unk>` for unlisted tokens.
    pub fn get(&self, token: &str) -> &[f64] {
        self.vectors
            .get(token)
            .unwrap_or_else(|| &self.vectors[UNK_SYMBOL])
    }

    /// Canonical key a lookup resolves to (the token itself or `<unk>`).
    pub fn resolve<'a>(&self, token: &'a str) -> &'a str {
        if self.vectors.contains_key(token) {
            token
        } else {
            UNK_SYMBOL
        }
    }

    /// Mutable access for fine-tuning; resolves OOV to `<unk>` first.
    pub fn get_mut(&mut self, token: &str) -> &mut Vec<f64> {
        let key = if self.vectors.contains_key(token) {
            token
        } else {
            UNK_SYMBOL
        };
        self.vectors.get_mut(key).expect("sentinel always present")
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Vec<f64>)> {
        self.vectors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }
}

/// Renders an embedding table as text: `vocab_size dim` header, then one
/// line per token — the token followed by `dim` decimal numbers at 9
/// significant digits. Canonical (sorted) order makes the rendering
/// byte-stable.
pub fn render_embeddings(table: &EmbeddingTable) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", table.len(), table.dim()));
    for (token, vector) in table.iter() {
        out.push_str(token);
        for x in vector {
            out.push_str(&format!(" {x:.8e}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable, NeuralError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(NeuralError::Malformed {
        line: 1,
        msg: "empty embedding file".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [vocab_size, dim] = fields.as_slice() else {
        return Err(NeuralError::Malformed {
            line: 1,
            msg: "header must be `<vocab_size> <dim>`".into(),
        });
    };
    let vocab_size: usize = vocab_size.parse().map_err(|_| NeuralError::Malformed {
        line: 1,
        msg: "bad vocab size".into(),
    })?;
    let dim: usize = dim.parse().map_err(|_| NeuralError::Malformed {
        line: 1,
        msg: "bad dimension".into(),
    })?;
    let mut vectors = BTreeMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let mut fields = line.split_whitespace();
        let token = fields.next().ok_or(NeuralError::Malformed {
            line: line_no,
            msg: "blank embedding line".into(),
        })?;
        let vector: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| NeuralError::Malformed {
                    line: line_no,
                    msg: format!("bad number {f:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        if vector.len() != dim {
            return Err(NeuralError::Malformed {
                line: line_no,
                msg: format!("expected {dim} values, found {}", vector.len()),
            });
        }
        vectors.insert(token.to_string(), vector);
    }
    if vectors.len() != vocab_size {
        return Err(NeuralError::Malformed {
            line: 1,
            msg: format!(
                "header says {vocab_size} tokens, file lists {}",
                vectors.len()
            ),
        });
    }
    for sentinel in [UNK_SYMBOL, NONE_SYMBOL] {
        if !vectors.contains_key(sentinel) {
            return Err(NeuralError::Malformed {
                line: 1,
                msg: format!("embedding file is missing the {sentinel} sentinel"),
            });
        }
    }
    Ok(EmbeddingTable { dim, vectors })
}

// ---------------------------------------------------- gradient checking

/// Compares an analytic gradient against central finite differences at
/// every coordinate and returns the maximum relative error
/// `|a - n| / max(|a| + |n|, 1e-8)`.
pub fn grad_check(
    params: &[f64],
    analytic_grad: &[f64],
    mut loss: impl FnMut(&[f64]) -> f64,
    epsilon: f64,
) -> Result<f64, NeuralError> {
    if params.len() != analytic_grad.len() {
        return Err(NeuralError::ShapeMismatch {
            expected: params.len(),
            found: analytic_grad.len(),
        });
    }
    let mut theta = params.to_vec();
    let mut max_rel = 0.0f64;
    for i in 0..theta.len() {
        let original = theta[i];
        theta[i] = original + epsilon;
        let f_plus = loss(&theta);
        theta[i] = original - epsilon;
        let f_minus = loss(&theta);
        theta[i] = original;
        let numeric = (f_plus - f_minus) / (2.0 * epsilon);
        let analytic = analytic_grad[i];
        if !numeric.is_finite() || !analytic.is_finite() {
            return Err(NeuralError::NonFiniteGradient);
        }
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}
