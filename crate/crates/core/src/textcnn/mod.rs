//! Single-layer convolutional text encoder.
//!
//! Three filter banks of different heights slide over the embedded tokens,
//! each feature map is max-pooled over the positions that hold real tokens,
//! and the pooled `3M` vector goes through a ReLU dense layer (`q`). The
//! output head reads `q` concatenated with optional fixed side features and
//! applies either independent sigmoids or a softmax.

mod train;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use train::{
    accuracy, categorical_cross_entropy_bits, loss_and_grad, train_classifier, EpochRecord, Example, History, Loss,
    TrainConfig, PROBABILITY_FLOOR,
};

use crate::corpus::{TokenId, Vocabulary, PAD, UNK};
use crate::embedding::EmbeddingTable;
use crate::numerics::{dot, grad_check, sigmoid, Matrix, Real};
use crate::tensor::{NamedTensor, TensorSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Sigmoid,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnnConfig {
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub heights: [usize; 3],
    /// Feature maps per filter height.
    pub feature_maps: usize,
    /// Width of the dense layer whose activations are the text vector.
    pub hidden: usize,
    pub classes: usize,
    pub head: Head,
    pub max_len: usize,
    /// Fixed features appended to the hidden vector before the head.
    pub extra_dim: usize,
}

impl CnnConfig {
    /// Five independent trait outputs.
    pub fn personality(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            embedding_dim: 300,
            heights: [3, 4, 5],
            feature_maps: 128,
            hidden: 100,
            classes: 5,
            head: Head::Sigmoid,
            max_len: 100,
            extra_dim: 0,
        }
    }

    /// Sarcastic / non-sarcastic softmax.
    pub fn sarcasm(vocab_size: usize) -> Self {
        Self {
            classes: 2,
            head: Head::Softmax,
            ..Self::personality(vocab_size)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b, c] = self.heights;
        if a == 0 || b == 0 || c == 0 || a == b || b == c || a == c {
            return Err(Error::contract("filter heights must be distinct and at least 1"));
        }
        if self.max_len < a.max(b).max(c) {
            return Err(Error::contract("max_len must be at least the largest filter height"));
        }
        if self.vocab_size < 1
            || self.embedding_dim < 1
            || self.feature_maps < 1
            || self.hidden < 1
            || self.classes < 1
        {
            return Err(Error::contract("all CNN dimensions must be at least 1"));
        }
        Ok(())
    }

    fn head_input(&self) -> usize {
        self.hidden + self.extra_dim
    }
}

/// Names of the parameter tensors, in the order of [`CnnModel::params`].
pub const PARAM_NAMES: [&str; 11] = [
    "embeddings",
    "filter0",
    "filter_bias0",
    "filter1",
    "filter_bias1",
    "filter2",
    "filter_bias2",
    "w1",
    "b1",
    "w2",
    "b2",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel<T: Real> {
    pub config: CnnConfig,
    /// `|V| × d_em`; the PAD row stays zero.
    pub embeddings: Matrix<T>,
    /// Per height `h`: `M × (h·d_em)`, a row is one filter over a window.
    pub filters: [Matrix<T>; 3],
    pub filter_bias: [Matrix<T>; 3],
    pub w1: Matrix<T>,
    pub b1: Matrix<T>,
    pub w2: Matrix<T>,
    pub b2: Matrix<T>,
    version: u64,
}

/// Gradients laid out like [`CnnModel::params`].
pub type CnnGrads<T> = Vec<Matrix<T>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Forward<T> {
    /// `max_len − h + 1` per filter height.
    pub map_lengths: [usize; 3],
    /// Max-pooled feature maps, `3M`.
    pub pooled: Vec<T>,
    /// Dense activations `q`.
    pub hidden: Vec<T>,
    pub logits: Vec<T>,
    pub output: Vec<T>,
    cache: Cache<T>,
}

#[derive(Debug, Clone, PartialEq)]
struct Cache<T> {
    tokens: Vec<TokenId>,
    extra: Vec<T>,
    /// Winning position of every pooled feature map.
    argmax: Vec<usize>,
    /// Pre-activation at the winning position.
    pre_at_max: Vec<T>,
    hidden_pre: Vec<T>,
    version: u64,
}

fn glorot<T: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Matrix<T> {
    let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let data = (0..rows * cols)
        .map(|_| T::of_f64(rng.random_range(-bound..bound)))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("finite init")
}

/// Right-pads with PAD or keeps the first `max_len` tokens.
pub fn pad_or_truncate(tokens: &[TokenId], max_len: usize) -> Vec<TokenId> {
    let mut out: Vec<TokenId> = tokens.iter().copied().take(max_len).collect();
    out.resize(max_len, PAD);
    out
}

/// Tokenizes `text` and pads it for the encoder. Text with no tokens at all
/// becomes a lone UNK so every comment has at least one real position.
pub fn encode_padded(vocab: &Vocabulary, text: &str, max_len: usize) -> Vec<TokenId> {
    let tokens = vocab.encode_text(text);
    if tokens.is_empty() {
        pad_or_truncate(&[UNK], max_len)
    } else {
        pad_or_truncate(&tokens, max_len)
    }
}

/// Number of leading positions up to and including the last non-PAD token.
fn real_length(tokens: &[TokenId]) -> usize {
    tokens.iter().rposition(|&t| t != PAD).map_or(0, |p| p + 1)
}

impl<T: Real> CnnModel<T> {
    /// Random initialization: embeddings uniform in `[−0.05, 0.05]`, weights
    /// Glorot-uniform, biases zero.
    pub fn new(config: CnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.embedding_dim;
        let m = config.feature_maps;
        let mut embeddings = Matrix::from_vec(
            config.vocab_size,
            d,
            (0..config.vocab_size * d)
                .map(|_| T::of_f64(rng.random_range(-0.05..0.05)))
                .collect(),
        )?;
        embeddings.row_mut(PAD as usize).fill(T::zero());
        let filters = config
            .heights
            .map(|h| glorot(&mut rng, m, h * d, h * d, m));
        let w1 = glorot(&mut rng, config.hidden, 3 * m, 3 * m, config.hidden);
        let w2 = glorot(&mut rng, config.classes, config.head_input(), config.head_input(), config.classes);
        Ok(Self {
            filter_bias: [Matrix::zeros(1, m), Matrix::zeros(1, m), Matrix::zeros(1, m)],
            b1: Matrix::zeros(1, config.hidden),
            b2: Matrix::zeros(1, config.classes),
            config,
            embeddings,
            filters,
            w1,
            w2,
            version: 0,
        })
    }

    pub fn params(&self) -> [&Matrix<T>; 11] {
        let [f0, f1, f2] = &self.filters;
        let [c0, c1, c2] = &self.filter_bias;
        [&self.embeddings, f0, c0, f1, c1, f2, c2, &self.w1, &self.b1, &self.w2, &self.b2]
    }

    /// Mutable parameter access; invalidates cached forward passes.
    pub fn params_mut(&mut self) -> [&mut Matrix<T>; 11] {
        self.version += 1;
        let [f0, f1, f2] = &mut self.filters;
        let [c0, c1, c2] = &mut self.filter_bias;
        [
            &mut self.embeddings,
            f0,
            c0,
            f1,
            c1,
            f2,
            c2,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
        ]
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.params().iter().map(|p| p.shape()).collect()
    }

    pub fn zero_grads(&self) -> CnnGrads<T> {
        self.params().iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect()
    }

    /// Overwrites embedding rows of tokens found in `table`; returns how many
    /// rows were loaded.
    pub fn load_word_vectors(&mut self, vocab: &Vocabulary, table: &EmbeddingTable) -> Result<usize> {
        if table.dim() != self.config.embedding_dim {
            return Err(Error::Dimension {
                op: "load_word_vectors",
                left: (1, self.config.embedding_dim),
                right: (1, table.dim()),
            });
        }
        self.version += 1;
        let mut loaded = 0;
        for (token, row) in table.iter() {
            if let Some(id) = vocab.index_of(token) {
                if id == PAD || id as usize >= self.config.vocab_size {
                    continue;
                }
                for (dst, &v) in self.embeddings.row_mut(id as usize).iter_mut().zip(row) {
                    *dst = T::of_f64(v as f64);
                }
                loaded += 1;
            }
        }
        Ok(loaded)
    }

    pub fn forward(&self, tokens: &[TokenId], extra: &[T]) -> Result<Forward<T>> {
        let c = &self.config;
        if tokens.len() != c.max_len {
            return Err(Error::contract(format!(
                "input has {} tokens, expected padded length {}",
                tokens.len(),
                c.max_len
            )));
        }
        if extra.len() != c.extra_dim {
            return Err(Error::Dimension {
                op: "cnn forward extra features",
                left: (1, c.extra_dim),
                right: (1, extra.len()),
            });
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= c.vocab_size) {
            return Err(Error::contract(format!("token {bad} outside vocabulary")));
        }
        let n = real_length(tokens);
        if n == 0 {
            return Err(Error::contract("input has no real tokens"));
        }
        let d = c.embedding_dim;
        let m = c.feature_maps;
        let mut pooled = vec![T::zero(); 3 * m];
        let mut argmax = vec![0usize; 3 * m];
        let mut pre_at_max = vec![T::zero(); 3 * m];
        let mut window = Vec::with_capacity(c.heights.iter().max().unwrap() * d);
        for (k, &h) in c.heights.iter().enumerate() {
            // windows reaching into padding are masked; an input shorter than
            // the filter keeps its single partial window
            let valid = if n >= h { n - h + 1 } else { 1 };
            let filters = &self.filters[k];
            let bias = self.filter_bias[k].as_slice();
            let mut best = vec![T::neg_infinity(); m];
            for j in 0..valid {
                window.clear();
                for &t in &tokens[j..j + h] {
                    window.extend_from_slice(self.embeddings.row(t as usize));
                }
                for f in 0..m {
                    let z = dot(filters.row(f), &window) + bias[f];
                    let v = z.max(T::zero());
                    if v > best[f] {
                        best[f] = v;
                        argmax[k * m + f] = j;
                        pre_at_max[k * m + f] = z;
                    }
                }
            }
            pooled[k * m..(k + 1) * m].copy_from_slice(&best);
        }
        let hidden_pre: Vec<T> = (0..c.hidden)
            .map(|i| dot(self.w1.row(i), &pooled) + self.b1.as_slice()[i])
            .collect();
        let hidden: Vec<T> = hidden_pre.iter().map(|&a| a.max(T::zero())).collect();
        let logits: Vec<T> = (0..c.classes)
            .map(|i| {
                let w = self.w2.row(i);
                dot(&w[..c.hidden], &hidden) + dot(&w[c.hidden..], extra) + self.b2.as_slice()[i]
            })
            .collect();
        let output = activate(c.head, &logits);
        Ok(Forward {
            map_lengths: c.heights.map(|h| c.max_len - h + 1),
            pooled,
            hidden,
            logits,
            output,
            cache: Cache {
                tokens: tokens.to_vec(),
                extra: extra.to_vec(),
                argmax,
                pre_at_max,
                hidden_pre,
                version: self.version,
            },
        })
    }

    /// Accumulates into `grads` the parameter gradients for an upstream
    /// gradient on the logits. Max-pooling routes to the first maximal
    /// position; the PAD embedding row never receives gradient.
    pub fn backward(&self, fwd: &Forward<T>, dlogits: &[T], grads: &mut CnnGrads<T>) -> Result<()> {
        let c = &self.config;
        let cache = &fwd.cache;
        if cache.version != self.version {
            return Err(Error::contract("forward cache is stale: parameters changed since the forward pass"));
        }
        if dlogits.len() != c.classes || grads.len() != PARAM_NAMES.len() {
            return Err(Error::Dimension {
                op: "cnn backward",
                left: (c.classes, PARAM_NAMES.len()),
                right: (dlogits.len(), grads.len()),
            });
        }
        let d = c.embedding_dim;
        let m = c.feature_maps;
        let (hid, extra_dim) = (c.hidden, c.extra_dim);

        // head
        let mut dq = vec![T::zero(); hid];
        {
            let (gw2, rest) = grads[9..].split_at_mut(1);
            let gw2 = &mut gw2[0];
            let gb2 = &mut rest[0];
            for (i, &g) in dlogits.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                let row = gw2.row_mut(i);
                for (j, &q) in fwd.hidden.iter().enumerate() {
                    row[j] = row[j] + g * q;
                }
                for (j, &e) in cache.extra.iter().enumerate() {
                    row[hid + j] = row[hid + j] + g * e;
                }
                gb2.as_mut_slice()[i] = gb2.as_slice()[i] + g;
                for (j, &w) in self.w2.row(i)[..hid].iter().enumerate() {
                    dq[j] = dq[j] + g * w;
                }
            }
            debug_assert_eq!(gw2.cols(), hid + extra_dim);
        }

        // dense
        let mut dpooled = vec![T::zero(); 3 * m];
        {
            let (gw1, rest) = grads[7..9].split_at_mut(1);
            let gw1 = &mut gw1[0];
            let gb1 = &mut rest[0];
            for i in 0..hid {
                if cache.hidden_pre[i] <= T::zero() || dq[i] == T::zero() {
                    continue;
                }
                let g = dq[i];
                gb1.as_mut_slice()[i] = gb1.as_slice()[i] + g;
                let row = gw1.row_mut(i);
                for (j, &o) in fwd.pooled.iter().enumerate() {
                    row[j] = row[j] + g * o;
                }
                for (j, &w) in self.w1.row(i).iter().enumerate() {
                    dpooled[j] = dpooled[j] + g * w;
                }
            }
        }

        // convolution and embeddings
        let (gemb, gconv) = grads[..7].split_at_mut(1);
        let gemb = &mut gemb[0];
        for (k, &h) in c.heights.iter().enumerate() {
            let (gf, gb) = gconv[2 * k..2 * k + 2].split_at_mut(1);
            let gf = &mut gf[0];
            let gb = &mut gb[0];
            for f in 0..m {
                let idx = k * m + f;
                let g = dpooled[idx];
                if g == T::zero() || cache.pre_at_max[idx] <= T::zero() {
                    continue;
                }
                let j = cache.argmax[idx];
                gb.as_mut_slice()[f] = gb.as_slice()[f] + g;
                let filter = self.filters[k].row(f);
                let grow = gf.row_mut(f);
                for r in 0..h {
                    let t = cache.tokens[j + r] as usize;
                    let emb = self.embeddings.row(t);
                    for e in 0..d {
                        grow[r * d + e] = grow[r * d + e] + g * emb[e];
                    }
                    if t != PAD as usize {
                        let erow = gemb.row_mut(t);
                        for e in 0..d {
                            erow[e] = erow[e] + g * filter[r * d + e];
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Dense activations `q` for a padded token sequence.
    pub fn hidden(&self, tokens: &[TokenId], extra: &[T]) -> Result<Vec<T>> {
        Ok(self.forward(tokens, extra)?.hidden)
    }
}

impl CnnModel<f64> {
    /// Worst relative error of [`CnnModel::backward`] against central finite
    /// differences of the loss, over every trainable parameter (all but the
    /// frozen PAD embedding row), for one example.
    pub fn gradient_error(&self, tokens: &[TokenId], extra: &[f64], target: &[f64], loss: Loss) -> Result<f64> {
        let fwd = self.forward(tokens, extra)?;
        let (_, dlogits) = loss_and_grad(loss, &fwd.output, target);
        let mut grads = self.zero_grads();
        self.backward(&fwd, &dlogits, &mut grads)?;
        let mut worst = 0.0f64;
        for (p, grad) in grads.iter().enumerate() {
            // PAD is row 0 of the embeddings, the first parameter block
            let skip = if p == 0 { self.config.embedding_dim } else { 0 };
            let point = self.params()[p].as_slice()[skip..].to_vec();
            let mut probe = self.clone();
            let err = grad_check(
                |x| {
                    probe.params_mut()[p].as_mut_slice()[skip..].copy_from_slice(x);
                    probe
                        .forward(tokens, extra)
                        .map_or(f64::NAN, |f| loss_and_grad(loss, &f.output, target).0)
                },
                &point,
                &grad.as_slice()[skip..],
            )?;
            worst = worst.max(err);
        }
        Ok(worst)
    }
}

fn activate<T: Real>(head: Head, logits: &[T]) -> Vec<T> {
    match head {
        Head::Sigmoid => logits.iter().map(|&z| sigmoid(z)).collect(),
        Head::Softmax => {
            let max = logits.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
            let sum: T = exps.iter().copied().sum();
            exps.into_iter().map(|e| e / sum).collect()
        }
    }
}

impl CnnModel<f32> {
    pub fn to_tensors(&self, prefix: &str) -> TensorSet {
        let c = &self.config;
        let head = match c.head {
            Head::Sigmoid => 0.0,
            Head::Softmax => 1.0,
        };
        let mut set = TensorSet::new();
        set.push(NamedTensor::vector(
            format!("{prefix}config"),
            vec![
                c.vocab_size as f32,
                c.embedding_dim as f32,
                c.heights[0] as f32,
                c.heights[1] as f32,
                c.heights[2] as f32,
                c.feature_maps as f32,
                c.hidden as f32,
                c.classes as f32,
                head,
                c.max_len as f32,
                c.extra_dim as f32,
            ],
        ));
        for (name, p) in PARAM_NAMES.iter().zip(self.params()) {
            set.push(NamedTensor::from_matrix(format!("{prefix}{name}"), p));
        }
        set
    }

    pub fn from_tensors(set: &TensorSet, prefix: &str) -> Result<Self> {
        let cfg = &set.get(&format!("{prefix}config"))?.data;
        if cfg.len() != 11 {
            return Err(Error::contract("CNN config tensor has the wrong length"));
        }
        let u = |i: usize| cfg[i] as usize;
        let config = CnnConfig {
            vocab_size: u(0),
            embedding_dim: u(1),
            heights: [u(2), u(3), u(4)],
            feature_maps: u(5),
            hidden: u(6),
            classes: u(7),
            head: if cfg[8] == 0.0 { Head::Sigmoid } else { Head::Softmax },
            max_len: u(9),
            extra_dim: u(10),
        };
        config.validate()?;
        let mut model = Self::new(config, 0)?;
        let shapes = model.param_shapes();
        for ((name, p), shape) in PARAM_NAMES.iter().zip(model.params_mut()).zip(shapes) {
            let m = set.matrix(&format!("{prefix}{name}"))?;
            if m.shape() != shape {
                return Err(Error::Dimension {
                    op: "load CNN tensor",
                    left: shape,
                    right: m.shape(),
                });
            }
            *p = m;
        }
        model.version = 0;
        Ok(model)
    }
}

impl<T: Real> CnnModel<T> {
    /// Same parameters in another scalar type.
    pub fn cast<U: Real>(&self) -> CnnModel<U> {
        let f = |m: &Matrix<T>| m.map(|v| U::of_f64(v.as_f64()));
        CnnModel {
            config: self.config.clone(),
            embeddings: f(&self.embeddings),
            filters: [f(&self.filters[0]), f(&self.filters[1]), f(&self.filters[2])],
            filter_bias: [
                f(&self.filter_bias[0]),
                f(&self.filter_bias[1]),
                f(&self.filter_bias[2]),
            ],
            w1: f(&self.w1),
            b1: f(&self.b1),
            w2: f(&self.w2),
            b2: f(&self.b2),
            version: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(head: Head, classes: usize) -> CnnConfig {
        CnnConfig {
            vocab_size: 12,
            embedding_dim: 4,
            heights: [1, 2, 3],
            feature_maps: 3,
            hidden: 5,
            classes,
            head,
            max_len: 8,
            extra_dim: 0,
        }
    }

    #[test]
    fn map_lengths_follow_height() {
        let cfg = CnnConfig {
            vocab_size: 10,
            embedding_dim: 2,
            feature_maps: 2,
            hidden: 2,
            ..CnnConfig::sarcasm(10)
        };
        let model = CnnModel::<f32>::new(cfg, 0).unwrap();
        let f = model.forward(&pad_or_truncate(&[3, 4, 5], 100), &[]).unwrap();
        assert_eq!(f.map_lengths, [98, 97, 96]);
        assert_eq!(f.pooled.len(), 3 * 2);
    }

    #[test]
    fn zero_parameters_softmax_is_uniform() {
        let mut model = CnnModel::<f64>::new(tiny(Head::Softmax, 2), 1).unwrap();
        for p in model.params_mut() {
            p.fill(0.0);
        }
        let f = model.forward(&pad_or_truncate(&[3, 4], 8), &[]).unwrap();
        assert_eq!(f.output, vec![0.5, 0.5]);
    }

    #[test]
    fn pooling_takes_maximum() {
        // one map, height 1, embedding dim 1: pooled value is the max of the
        // per-token feature values (1, 3, 2)
        let cfg = CnnConfig {
            vocab_size: 6,
            embedding_dim: 1,
            heights: [1, 2, 3],
            feature_maps: 1,
            hidden: 1,
            classes: 2,
            head: Head::Softmax,
            max_len: 4,
            extra_dim: 0,
        };
        let mut model = CnnModel::<f64>::new(cfg, 0).unwrap();
        for (t, v) in [(3usize, 1.0), (4, 3.0), (5, 2.0)] {
            model.embeddings[(t, 0)] = v;
        }
        model.filters[0][(0, 0)] = 1.0;
        model.filter_bias[0][(0, 0)] = 0.0;
        let f = model.forward(&pad_or_truncate(&[3, 4, 5], 4), &[]).unwrap();
        assert_eq!(f.pooled[0], 3.0);
    }

    #[test]
    fn empty_input_rejected() {
        let model = CnnModel::<f32>::new(tiny(Head::Softmax, 2), 0).unwrap();
        assert!(model.forward(&[0; 8], &[]).is_err());
        assert!(model.forward(&[3; 7], &[]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let model = CnnModel::<f64>::new(tiny(Head::Softmax, 2), 3).unwrap();
        let f = model.forward(&pad_or_truncate(&[3, 4, 5, 6, 7, 8], 8), &[]).unwrap();
        let mut g = model.zero_grads();
        model.backward(&f, &[0.0, 0.0], &mut g).unwrap();
        assert!(g.iter().all(|m| m.max_abs() == 0.0));
    }

    #[test]
    fn max_pool_tie_goes_to_first_position() {
        let cfg = CnnConfig {
            vocab_size: 6,
            embedding_dim: 1,
            heights: [1, 2, 3],
            feature_maps: 1,
            hidden: 1,
            classes: 2,
            head: Head::Softmax,
            max_len: 4,
            extra_dim: 0,
        };
        let mut model = CnnModel::<f64>::new(cfg, 0).unwrap();
        model.embeddings[(3, 0)] = 2.0;
        model.embeddings[(4, 0)] = 1.0;
        model.embeddings[(5, 0)] = 2.0;
        // only the height-1 filter sees the embeddings
        model.filters[1].fill(0.0);
        model.filters[2].fill(0.0);
        model.filters[0][(0, 0)] = 1.0;
        model.w1.fill(1.0);
        model.w2.fill(0.0);
        model.w2[(0, 0)] = 1.0;
        // tokens 3 4 5: equal maxima at positions 0 and 2
        let f = model.forward(&pad_or_truncate(&[3, 4, 5], 4), &[]).unwrap();
        assert_eq!(f.cache.argmax[0], 0);
        let mut g = model.zero_grads();
        model.backward(&f, &[1.0, 0.0], &mut g).unwrap();
        assert!(g[0][(3, 0)] != 0.0);
        assert_eq!(g[0][(5, 0)], 0.0);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut model = CnnModel::<f64>::new(tiny(Head::Softmax, 2), 3).unwrap();
        let f = model.forward(&pad_or_truncate(&[3, 4, 5], 8), &[]).unwrap();
        let _ = model.params_mut();
        let mut g = model.zero_grads();
        assert!(model.backward(&f, &[1.0, -1.0], &mut g).is_err());
    }

    #[test]
    fn pad_or_truncate_rules() {
        let p = pad_or_truncate(&[5, 6, 7], 100);
        assert_eq!(p.len(), 100);
        assert_eq!(&p[..3], &[5, 6, 7]);
        assert!(p[3..].iter().all(|&t| t == PAD));
        let long: Vec<TokenId> = (0..150).map(|i| 3 + i % 7).collect();
        assert_eq!(pad_or_truncate(&long, 100), long[..100].to_vec());
        let exact: Vec<TokenId> = (0..100).map(|i| 3 + i % 5).collect();
        assert_eq!(pad_or_truncate(&exact, 100), exact);
    }

    #[test]
    fn tensor_round_trip() {
        let model = CnnModel::<f32>::new(tiny(Head::Sigmoid, 5), 4).unwrap();
        let back = CnnModel::<f32>::from_tensors(&model.to_tensors("p."), "p.").unwrap();
        assert_eq!(back, model);
    }
}
