//! Paragraph vectors, distributed-memory variant, trained with hierarchical
//! softmax.
//!
//! For every target position the context vector is the mean of the document
//! vector and the `2k` surrounding word vectors. The target is predicted by a
//! walk down the Huffman tree; each inner node `n` takes branch `1` with
//! probability `σ(h·n)`. Training is plain SGD on `−log p(target)` with a
//! learning rate decaying linearly to 1% of its start value.

mod huffman;
#[cfg(feature = "std")]
mod parallel;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use huffman::{build_huffman, HuffmanTree};
#[cfg(feature = "std")]
pub use parallel::train_parallel;

use crate::corpus::{EntityDocument, TokenId, UNK};
use crate::embedding::EmbeddingTable;
use crate::numerics::{dot, grad_check, sigmoid, Matrix, Real};
use crate::{Error, Result};

const FINAL_LR_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvdmConfig {
    /// Embedding size of words and documents.
    pub dim: usize,
    /// Context words on each side of the target.
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Also train truncated windows for documents shorter than `2·window+1`.
    pub edge_windows: bool,
}

impl Default for PvdmConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            window: 2,
            epochs: 20,
            learning_rate: 0.025,
            seed: 0,
            edge_windows: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvdmModel<T: Real> {
    pub config: PvdmConfig,
    doc_ids: Vec<String>,
    doc_index: BTreeMap<String, usize>,
    /// One row per document.
    pub doc_vectors: Matrix<T>,
    /// One row per vocabulary entry.
    pub word_vectors: Matrix<T>,
    /// One row per inner Huffman node.
    pub inner: Matrix<T>,
    pub tree: HuffmanTree,
}

/// Mean negative log-likelihood per trained window, one entry per epoch.
pub type LossHistory = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferStatus {
    Ok,
    /// No token of the input has a leaf in the tree; the vector is zero.
    NoKnownTokens,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference<T> {
    pub vector: Vec<T>,
    pub status: InferStatus,
}

/// Parameter storage seen by one SGD window update.
pub(crate) trait Tables<T: Real> {
    fn read_doc(&self, doc: usize, out: &mut [T]);
    fn read_word(&self, word: usize, out: &mut [T]);
    fn read_inner(&self, node: usize, out: &mut [T]);
    fn add_doc(&mut self, doc: usize, delta: &[T], scale: T);
    fn add_word(&mut self, word: usize, delta: &[T], scale: T);
    fn add_inner(&mut self, node: usize, delta: &[T], scale: T);
}

struct MatrixTables<'a, T: Real> {
    docs: &'a mut Matrix<T>,
    words: &'a mut Matrix<T>,
    inner: &'a mut Matrix<T>,
}

#[inline]
fn axpy<T: Real>(dst: &mut [T], src: &[T], scale: T) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + scale * s;
    }
}

impl<T: Real> Tables<T> for MatrixTables<'_, T> {
    fn read_doc(&self, doc: usize, out: &mut [T]) {
        out.copy_from_slice(self.docs.row(doc));
    }
    fn read_word(&self, word: usize, out: &mut [T]) {
        out.copy_from_slice(self.words.row(word));
    }
    fn read_inner(&self, node: usize, out: &mut [T]) {
        out.copy_from_slice(self.inner.row(node));
    }
    fn add_doc(&mut self, doc: usize, delta: &[T], scale: T) {
        axpy(self.docs.row_mut(doc), delta, scale);
    }
    fn add_word(&mut self, word: usize, delta: &[T], scale: T) {
        axpy(self.words.row_mut(word), delta, scale);
    }
    fn add_inner(&mut self, node: usize, delta: &[T], scale: T) {
        axpy(self.inner.row_mut(node), delta, scale);
    }
}

pub(crate) struct Scratch<T> {
    h: Vec<T>,
    dh: Vec<T>,
    row: Vec<T>,
    ctx: Vec<TokenId>,
}

impl<T: Real> Scratch<T> {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            h: vec![T::zero(); dim],
            dh: vec![T::zero(); dim],
            row: vec![T::zero(); dim],
            ctx: Vec::new(),
        }
    }
}

/// `−log σ(z)` without overflow.
#[inline]
fn neg_log_sigmoid(z: f64) -> f64 {
    if z > 0.0 {
        libm::log1p(libm::exp(-z))
    } else {
        -z + libm::log1p(libm::exp(z))
    }
}

/// One SGD step on a single window; returns the window's loss before the
/// update. With `shared` false only the document row moves.
pub(crate) fn sgd_window<T: Real, P: Tables<T>>(
    tables: &mut P,
    tree: &HuffmanTree,
    doc: usize,
    context: &[TokenId],
    target: TokenId,
    lr: T,
    shared: bool,
    s: &mut Scratch<T>,
) -> f64 {
    tables.read_doc(doc, &mut s.h);
    for &w in context {
        tables.read_word(w as usize, &mut s.row);
        for (h, &r) in s.h.iter_mut().zip(&s.row) {
            *h = *h + r;
        }
    }
    let inv_count = T::one() / T::of_f64((context.len() + 1) as f64);
    for h in s.h.iter_mut() {
        *h = *h * inv_count;
    }
    s.dh.iter_mut().for_each(|d| *d = T::zero());

    let mut loss = 0.0;
    for (&node, &bit) in tree.path(target).iter().zip(tree.code(target)) {
        tables.read_inner(node as usize, &mut s.row);
        let x = dot(&s.h, &s.row);
        let sign = if bit { 1.0 } else { -1.0 };
        loss += neg_log_sigmoid(sign * x.as_f64());
        // d(−log σ(±x))/dx = σ(x) − bit
        let g = sigmoid(x) - if bit { T::one() } else { T::zero() };
        axpy(&mut s.dh, &s.row, g);
        if shared {
            tables.add_inner(node as usize, &s.h, -lr * g);
        }
    }
    let step = -lr * inv_count;
    tables.add_doc(doc, &s.dh, step);
    if shared {
        for &w in context {
            tables.add_word(w as usize, &s.dh, step);
        }
    }
    loss
}

/// Window positions of a document and the context of each.
pub(crate) fn windows(
    tokens: &[TokenId],
    k: usize,
    edge_windows: bool,
) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
    // yields (target position, context start, context end exclusive)
    let n = tokens.len();
    let truncated = edge_windows && n < 2 * k + 1;
    let (lo, hi) = if truncated {
        (0, n)
    } else if n >= 2 * k + 1 {
        (k, n - k)
    } else {
        (0, 0)
    };
    (lo..hi).map(move |t| (t, t.saturating_sub(k), (t + k + 1).min(n)))
}

fn fill_context(tokens: &[TokenId], t: usize, start: usize, end: usize, out: &mut Vec<TokenId>) {
    out.clear();
    out.extend(
        tokens[start..end]
            .iter()
            .enumerate()
            .filter(|&(i, _)| start + i != t)
            .map(|(_, &w)| w),
    );
}

fn uniform_rows<T: Real>(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> Matrix<T> {
    let bound = 0.5 / dim as f64;
    let data = (0..rows * dim)
        .map(|_| T::of_f64(rng.random_range(-bound..bound)))
        .collect();
    Matrix::from_vec(rows, dim, data).expect("finite initialization")
}

/// Token frequencies over the training documents.
pub fn document_counts(docs: &[EntityDocument], vocab_size: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; vocab_size];
    for d in docs {
        for &t in &d.tokens {
            let slot = counts.get_mut(t as usize).ok_or_else(|| {
                Error::contract(alloc::format!("token {t} outside vocabulary of {vocab_size}"))
            })?;
            *slot += 1;
        }
    }
    Ok(counts)
}

fn schedule(lr: f64, done: u64, total: u64) -> f64 {
    let progress = if total == 0 { 0.0 } else { done as f64 / total as f64 };
    lr * (1.0 - (1.0 - FINAL_LR_FRACTION) * progress.min(1.0))
}

fn window_total(docs: &[EntityDocument], config: &PvdmConfig) -> u64 {
    docs.iter()
        .map(|d| windows(&d.tokens, config.window, config.edge_windows).count() as u64)
        .sum::<u64>()
}

impl<T: Real> PvdmModel<T> {
    /// Seeded initial state: uniform word and document vectors in
    /// `[−0.5/dim, 0.5/dim]`, zero inner nodes, and a Huffman tree built from
    /// token frequencies in `docs`.
    pub fn initialize(docs: &[EntityDocument], vocab_size: usize, config: PvdmConfig) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::contract("paragraph vectors need at least one document"));
        }
        if config.dim == 0 || config.window == 0 {
            return Err(Error::contract("dim and window must be at least 1"));
        }
        let tree = HuffmanTree::from_counts(&document_counts(docs, vocab_size)?)?;
        let mut doc_index = BTreeMap::new();
        let mut doc_ids = Vec::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if doc_index.insert(d.entity_id.clone(), i).is_some() {
                return Err(Error::contract(alloc::format!(
                    "duplicate document id `{}`",
                    d.entity_id
                )));
            }
            doc_ids.push(d.entity_id.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let word_vectors = uniform_rows(&mut rng, vocab_size, config.dim);
        let doc_vectors = uniform_rows(&mut rng, docs.len(), config.dim);
        Ok(Self {
            config,
            doc_ids,
            doc_index,
            doc_vectors,
            word_vectors,
            inner: Matrix::zeros(tree.inner_nodes(), config.dim),
            tree,
        })
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_position(&self, id: &str) -> Option<usize> {
        self.doc_index.get(id).copied()
    }

    pub fn doc_vector(&self, id: &str) -> Result<&[T]> {
        self.doc_position(id)
            .map(|i| self.doc_vectors.row(i))
            .ok_or_else(|| Error::Lookup {
                kind: "document",
                id: id.into(),
            })
    }

    /// Runs `epochs` passes of single-threaded SGD over `docs`, which must be
    /// the documents the model was initialized with.
    pub fn fit(&mut self, docs: &[EntityDocument]) -> Result<LossHistory> {
        if docs.len() != self.doc_ids.len() {
            return Err(Error::contract("documents differ from the initialized set"));
        }
        let config = self.config;
        let total = window_total(docs, &config) * config.epochs as u64;
        let mut done = 0u64;
        let mut history = Vec::with_capacity(config.epochs);
        let mut scratch = Scratch::new(config.dim);
        let tree = &self.tree;
        let mut tables = MatrixTables {
            docs: &mut self.doc_vectors,
            words: &mut self.word_vectors,
            inner: &mut self.inner,
        };
        for _ in 0..config.epochs {
            let (mut loss, mut count) = (0.0, 0u64);
            for (di, doc) in docs.iter().enumerate() {
                for (t, start, end) in windows(&doc.tokens, config.window, config.edge_windows) {
                    let lr = T::of_f64(schedule(config.learning_rate, done, total));
                    fill_context(&doc.tokens, t, start, end, &mut scratch.ctx);
                    let ctx = core::mem::take(&mut scratch.ctx);
                    loss += sgd_window(&mut tables, tree, di, &ctx, doc.tokens[t], lr, true, &mut scratch);
                    scratch.ctx = ctx;
                    count += 1;
                    done += 1;
                }
            }
            history.push(if count == 0 { 0.0 } else { loss / count as f64 });
        }
        Ok(history)
    }

    /// `p(target | doc, context)` as the product of branch probabilities
    /// along the target's Huffman path. Tokens without a leaf get zero.
    pub fn predict_word_prob(&self, doc_id: &str, context: &[TokenId], target: TokenId) -> Result<f64> {
        let doc = self.doc_vector(doc_id)?;
        Ok(self.word_prob_with(doc, context, target))
    }

    fn context_mean(&self, doc: &[T], context: &[TokenId]) -> Vec<T> {
        let mut h = doc.to_vec();
        for &w in context {
            axpy(&mut h, self.word_vectors.row(w as usize), T::one());
        }
        let inv = T::one() / T::of_f64((context.len() + 1) as f64);
        h.iter_mut().for_each(|v| *v = *v * inv);
        h
    }

    fn word_prob_with(&self, doc: &[T], context: &[TokenId], target: TokenId) -> f64 {
        if !self.tree.has_leaf(target) {
            return 0.0;
        }
        let h = self.context_mean(doc, context);
        self.tree
            .path(target)
            .iter()
            .zip(self.tree.code(target))
            .map(|(&node, &bit)| {
                let x = dot(&h, self.inner.row(node as usize)).as_f64();
                let p1 = sigmoid(x);
                if bit {
                    p1
                } else {
                    1.0 - p1
                }
            })
            .product()
    }

    /// Average log-probability of the document's words over its windows,
    /// normalized by the document length.
    pub fn doc_log_prob(&self, doc_id: &str, tokens: &[TokenId]) -> Result<f64> {
        let doc = self.doc_vector(doc_id)?;
        if tokens.is_empty() {
            return Ok(0.0);
        }
        let mut ctx = Vec::new();
        let mut total = 0.0;
        for (t, start, end) in windows(tokens, self.config.window, self.config.edge_windows) {
            fill_context(tokens, t, start, end, &mut ctx);
            total += libm::log(self.word_prob_with(doc, &ctx, tokens[t]).max(1e-300));
        }
        Ok(total / tokens.len() as f64)
    }

    /// Fits a fresh document vector for `tokens` with word vectors and tree
    /// parameters frozen.
    pub fn infer_doc_vector(&self, tokens: &[TokenId], steps: usize, seed: u64) -> Inference<T> {
        let dim = self.config.dim;
        let known = tokens
            .iter()
            .any(|&t| t != UNK && self.tree.has_leaf(t));
        if !known {
            log::warn!("no known tokens in document; inferred vector is zero");
            return Inference {
                vector: vec![T::zero(); dim],
                status: InferStatus::NoKnownTokens,
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut doc = uniform_rows::<T>(&mut rng, 1, dim);
        let mut words = self.word_vectors.clone();
        let mut inner = self.inner.clone();
        let mut tables = MatrixTables {
            docs: &mut doc,
            words: &mut words,
            inner: &mut inner,
        };
        // short inputs always use truncated windows so they still move
        let edge = tokens.len() < 2 * self.config.window + 1;
        let per_step = windows(tokens, self.config.window, edge)
            .filter(|&(t, _, _)| self.tree.has_leaf(tokens[t]))
            .count() as u64;
        let total = per_step * steps as u64;
        let mut done = 0;
        let mut scratch = Scratch::new(dim);
        for _ in 0..steps {
            for (t, start, end) in windows(tokens, self.config.window, edge) {
                if !self.tree.has_leaf(tokens[t]) {
                    continue;
                }
                let lr = T::of_f64(schedule(self.config.learning_rate, done, total));
                fill_context(tokens, t, start, end, &mut scratch.ctx);
                let ctx = core::mem::take(&mut scratch.ctx);
                sgd_window(&mut tables, &self.tree, 0, &ctx, tokens[t], lr, false, &mut scratch);
                scratch.ctx = ctx;
                done += 1;
            }
        }
        Inference {
            vector: doc.into_vec(),
            status: InferStatus::Ok,
        }
    }

    /// Document vectors keyed by document id.
    pub fn doc_table(&self) -> EmbeddingTable {
        let mut table = EmbeddingTable::new(self.config.dim);
        for (i, id) in self.doc_ids.iter().enumerate() {
            let row: Vec<f32> = self.doc_vectors.row(i).iter().map(|v| v.as_f64() as f32).collect();
            table.push(id.clone(), &row).expect("unique finite document rows");
        }
        table
    }
}

/// Initializes and trains a model on `docs` (single-threaded, deterministic).
pub fn train<T: Real>(
    docs: &[EntityDocument],
    vocab_size: usize,
    config: PvdmConfig,
) -> Result<(PvdmModel<T>, LossHistory)> {
    let mut model = PvdmModel::initialize(docs, vocab_size, config)?;
    let history = model.fit(docs)?;
    Ok((model, history))
}

/// Sparse gradient of one window's loss.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowGradient {
    pub loss: f64,
    pub doc: Vec<f64>,
    pub words: Vec<(TokenId, Vec<f64>)>,
    pub inner: Vec<(u32, Vec<f64>)>,
}

struct Recorder<'a> {
    model: &'a PvdmModel<f64>,
    grad: WindowGradient,
}

fn accumulate<K: PartialEq + Copy>(list: &mut Vec<(K, Vec<f64>)>, key: K, delta: &[f64], scale: f64) {
    let pos = match list.iter().position(|(k, _)| *k == key) {
        Some(p) => p,
        None => {
            list.push((key, vec![0.0; delta.len()]));
            list.len() - 1
        }
    };
    // the SGD step adds −lr·grad; with lr = 1 the gradient is the negation
    axpy(&mut list[pos].1, delta, -scale);
}

impl Tables<f64> for Recorder<'_> {
    fn read_doc(&self, doc: usize, out: &mut [f64]) {
        out.copy_from_slice(self.model.doc_vectors.row(doc));
    }
    fn read_word(&self, word: usize, out: &mut [f64]) {
        out.copy_from_slice(self.model.word_vectors.row(word));
    }
    fn read_inner(&self, node: usize, out: &mut [f64]) {
        out.copy_from_slice(self.model.inner.row(node));
    }
    fn add_doc(&mut self, _doc: usize, delta: &[f64], scale: f64) {
        axpy(&mut self.grad.doc, delta, -scale);
    }
    fn add_word(&mut self, word: usize, delta: &[f64], scale: f64) {
        accumulate(&mut self.grad.words, word as TokenId, delta, scale);
    }
    fn add_inner(&mut self, node: usize, delta: &[f64], scale: f64) {
        accumulate(&mut self.grad.inner, node as u32, delta, scale);
    }
}

impl PvdmModel<f64> {
    /// Analytic gradient of `−log p(target | doc, context)`, computed by the
    /// same routine the trainer uses for its SGD steps.
    pub fn window_gradient(&self, doc: usize, context: &[TokenId], target: TokenId) -> WindowGradient {
        let dim = self.config.dim;
        let mut rec = Recorder {
            model: self,
            grad: WindowGradient {
                loss: 0.0,
                doc: vec![0.0; dim],
                words: Vec::new(),
                inner: Vec::new(),
            },
        };
        let mut scratch = Scratch::new(dim);
        let loss = sgd_window(&mut rec, &self.tree, doc, context, target, 1.0, true, &mut scratch);
        rec.grad.loss = loss;
        rec.grad
    }

    /// Worst relative error of [`PvdmModel::window_gradient`] against
    /// central finite differences, over the document vector, every context
    /// word and every inner node on the target's path.
    pub fn window_gradient_error(&self, doc: usize, context: &[TokenId], target: TokenId) -> Result<f64> {
        let grad = self.window_gradient(doc, context, target);
        let mut probe = self.clone();
        let mut worst = grad_check(
            |x| {
                probe.doc_vectors.row_mut(doc).copy_from_slice(x);
                probe.window_loss(doc, context, target)
            },
            self.doc_vectors.row(doc),
            &grad.doc,
        )?;
        for (w, g) in &grad.words {
            let mut probe = self.clone();
            let err = grad_check(
                |x| {
                    probe.word_vectors.row_mut(*w as usize).copy_from_slice(x);
                    probe.window_loss(doc, context, target)
                },
                self.word_vectors.row(*w as usize),
                g,
            )?;
            worst = worst.max(err);
        }
        for (n, g) in &grad.inner {
            let mut probe = self.clone();
            let err = grad_check(
                |x| {
                    probe.inner.row_mut(*n as usize).copy_from_slice(x);
                    probe.window_loss(doc, context, target)
                },
                self.inner.row(*n as usize),
                g,
            )?;
            worst = worst.max(err);
        }
        Ok(worst)
    }

    /// `−log p(target | doc, context)`.
    pub fn window_loss(&self, doc: usize, context: &[TokenId], target: TokenId) -> f64 {
        -libm::log(self.word_prob_with(self.doc_vectors.row(doc), context, target))
    }
}
