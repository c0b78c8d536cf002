//! Lock-free multi-threaded training.
//!
//! Worker threads share the parameter tables and update them without
//! synchronization beyond relaxed atomic loads and stores, so concurrent
//! updates to the same row may overwrite each other. Results depend on thread
//! scheduling and are not reproducible.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::vec::Vec;

use super::{fill_context, schedule, sgd_window, window_total, windows, LossHistory, PvdmConfig, PvdmModel, Scratch, Tables};
use crate::corpus::EntityDocument;
use crate::numerics::Matrix;
use crate::Result;

struct SharedTable {
    dim: usize,
    cells: Vec<AtomicU32>,
}

impl SharedTable {
    fn from_matrix(m: &Matrix<f32>) -> Self {
        Self {
            dim: m.cols(),
            cells: m.as_slice().iter().map(|v| AtomicU32::new(v.to_bits())).collect(),
        }
    }

    fn into_matrix(self, rows: usize) -> Matrix<f32> {
        let data = self.cells.into_iter().map(|c| f32::from_bits(c.into_inner())).collect();
        Matrix::from_vec(rows, self.dim, data).expect("finite parameters")
    }

    fn read(&self, row: usize, out: &mut [f32]) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f32::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn add(&self, row: usize, delta: &[f32], scale: f32) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (c, &d) in cells.iter().zip(delta) {
            let v = f32::from_bits(c.load(Ordering::Relaxed)) + scale * d;
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }
}

struct Shared {
    docs: SharedTable,
    words: SharedTable,
    inner: SharedTable,
}

struct Handle<'a>(&'a Shared);

impl Tables<f32> for Handle<'_> {
    fn read_doc(&self, doc: usize, out: &mut [f32]) {
        self.0.docs.read(doc, out);
    }
    fn read_word(&self, word: usize, out: &mut [f32]) {
        self.0.words.read(word, out);
    }
    fn read_inner(&self, node: usize, out: &mut [f32]) {
        self.0.inner.read(node, out);
    }
    fn add_doc(&mut self, doc: usize, delta: &[f32], scale: f32) {
        self.0.docs.add(doc, delta, scale);
    }
    fn add_word(&mut self, word: usize, delta: &[f32], scale: f32) {
        self.0.words.add(word, delta, scale);
    }
    fn add_inner(&mut self, node: usize, delta: &[f32], scale: f32) {
        self.0.inner.add(node, delta, scale);
    }
}

/// Trains with `threads` workers; document `i` is handled by worker
/// `i mod threads`. With one thread this equals [`super::train`].
pub fn train_parallel(
    docs: &[EntityDocument],
    vocab_size: usize,
    config: PvdmConfig,
    threads: usize,
) -> Result<(PvdmModel<f32>, LossHistory)> {
    let threads = threads.max(1);
    let mut model = PvdmModel::<f32>::initialize(docs, vocab_size, config)?;
    if threads == 1 {
        let history = model.fit(docs)?;
        return Ok((model, history));
    }
    let shared = Shared {
        docs: SharedTable::from_matrix(&model.doc_vectors),
        words: SharedTable::from_matrix(&model.word_vectors),
        inner: SharedTable::from_matrix(&model.inner),
    };
    let total = window_total(docs, &config) * config.epochs as u64;
    let done = AtomicU64::new(0);
    let tree = &model.tree;
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let sums: Vec<(f64, u64)> = std::thread::scope(|scope| {
            let workers: Vec<_> = (0..threads)
                .map(|w| {
                    let shared = &shared;
                    let done = &done;
                    scope.spawn(move || {
                        let mut handle = Handle(shared);
                        let mut scratch = Scratch::new(config.dim);
                        let (mut loss, mut count) = (0.0, 0u64);
                        for (di, doc) in docs.iter().enumerate().filter(|(i, _)| i % threads == w) {
                            for (t, start, end) in windows(&doc.tokens, config.window, config.edge_windows) {
                                let step = done.fetch_add(1, Ordering::Relaxed);
                                let lr = schedule(config.learning_rate, step, total) as f32;
                                fill_context(&doc.tokens, t, start, end, &mut scratch.ctx);
                                let ctx = core::mem::take(&mut scratch.ctx);
                                loss += sgd_window(&mut handle, tree, di, &ctx, doc.tokens[t], lr, true, &mut scratch);
                                scratch.ctx = ctx;
                                count += 1;
                            }
                        }
                        (loss, count)
                    })
                })
                .collect();
            workers.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let (loss, count) = sums.iter().fold((0.0, 0), |(l, c), &(a, b)| (l + a, c + b));
        history.push(if count == 0 { 0.0 } else { loss / count as f64 });
    }
    let n_docs = model.doc_vectors.rows();
    let n_words = model.word_vectors.rows();
    let n_inner = model.inner.rows();
    let Shared { docs: d, words, inner } = shared;
    model.doc_vectors = d.into_matrix(n_docs);
    model.word_vectors = words.into_matrix(n_words);
    model.inner = inner.into_matrix(n_inner);
    Ok((model, history))
}
