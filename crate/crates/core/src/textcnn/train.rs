use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CnnModel, Head};
use crate::corpus::TokenId;
use crate::numerics::{AdamConfig, AdamState, Real};
use crate::{Error, Result};

/// Probabilities are clamped to this floor before taking logarithms.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Independent sigmoid outputs, natural-log cross-entropy summed over
    /// classes.
    BinaryCrossEntropy,
    /// Softmax outputs, cross-entropy in bits.
    CategoricalCrossEntropyBase2,
}

/// One training example: padded tokens, fixed side features, target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub tokens: Vec<TokenId>,
    pub extra: Vec<T>,
    pub target: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: Loss,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Non-improving holdout evaluations tolerated before stopping.
    pub patience: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Per-class loss weights, indexed by the target's arg-max class.
    pub class_weights: Option<Vec<f64>>,
}

impl TrainConfig {
    pub fn new(loss: Loss) -> Self {
        Self {
            loss,
            batch_size: 64,
            max_epochs: 50,
            patience: 12,
            holdout_fraction: 0.1,
            seed: 0,
            adam: AdamConfig::default(),
            class_weights: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub holdout_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// `−Σ y·log₂ max(p, floor)`.
pub fn categorical_cross_entropy_bits(predicted: &[f64], target: &[f64]) -> f64 {
    -predicted
        .iter()
        .zip(target)
        .map(|(&p, &y)| if y == 0.0 { 0.0 } else { y * libm::log2(p.max(PROBABILITY_FLOOR)) })
        .sum::<f64>()
}

/// Loss value and its gradient with respect to the logits.
pub fn loss_and_grad<T: Real>(loss: Loss, output: &[T], target: &[T]) -> (f64, Vec<T>) {
    match loss {
        Loss::BinaryCrossEntropy => {
            let mut total = 0.0;
            let grad = output
                .iter()
                .zip(target)
                .map(|(&p, &y)| {
                    let (pf, yf) = (p.as_f64(), y.as_f64());
                    total -= yf * libm::log(pf.max(PROBABILITY_FLOOR))
                        + (1.0 - yf) * libm::log((1.0 - pf).max(PROBABILITY_FLOOR));
                    p - y
                })
                .collect();
            (total, grad)
        }
        Loss::CategoricalCrossEntropyBase2 => {
            let pf: Vec<f64> = output.iter().map(|v| v.as_f64()).collect();
            let yf: Vec<f64> = target.iter().map(|v| v.as_f64()).collect();
            let total = categorical_cross_entropy_bits(&pf, &yf);
            let mass: T = target.iter().copied().sum();
            let inv_ln2 = T::of_f64(core::f64::consts::LOG2_E);
            let grad = output
                .iter()
                .zip(target)
                .map(|(&p, &y)| (p * mass - y) * inv_ln2)
                .collect();
            (total, grad)
        }
    }
}

fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of correct outputs for one example: arg-max match for softmax,
/// per-class 0.5 threshold match for sigmoid.
fn correctness<T: Real>(head: Head, output: &[T], target: &[T]) -> f64 {
    match head {
        Head::Softmax => (argmax(output) == argmax(target)) as u8 as f64,
        Head::Sigmoid => {
            let half = T::of_f64(0.5);
            let hits = output
                .iter()
                .zip(target)
                .filter(|&(&p, &y)| (p > half) == (y > half))
                .count();
            hits as f64 / output.len().max(1) as f64
        }
    }
}

/// Mean correctness over a dataset.
pub fn accuracy<T: Real>(model: &CnnModel<T>, data: &[Example<T>]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for ex in data {
        let f = model.forward(&ex.tokens, &ex.extra)?;
        total += correctness(model.config.head, &f.output, &ex.target);
    }
    Ok(total / data.len() as f64)
}

fn class_weight<T: Real>(weights: &Option<Vec<f64>>, target: &[T]) -> f64 {
    weights
        .as_ref()
        .and_then(|w| w.get(argmax(target)).copied())
        .unwrap_or(1.0)
}

fn mean_loss<T: Real>(model: &CnnModel<T>, data: &[&Example<T>], config: &TrainConfig) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for ex in data {
        let f = model.forward(&ex.tokens, &ex.extra)?;
        let (l, _) = loss_and_grad(config.loss, &f.output, &ex.target);
        total += l * class_weight(&config.class_weights, &ex.target);
    }
    Ok(total / data.len() as f64)
}

/// Mini-batch Adam with early stopping on a seeded holdout split.
///
/// Training stops once the holdout loss has failed to improve on its best
/// value for `patience` consecutive epochs (immediately on the first
/// non-improving epoch when `patience` is zero) or after `max_epochs`. The
/// parameters of the best holdout epoch are returned.
pub fn train_classifier<T: Real>(
    mut model: CnnModel<T>,
    data: &[Example<T>],
    config: &TrainConfig,
) -> Result<(CnnModel<T>, History)> {
    if data.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    if config.batch_size == 0 || data.len() < config.batch_size {
        return Err(Error::contract(alloc::format!(
            "dataset of {} examples is smaller than one batch of {}",
            data.len(),
            config.batch_size
        )));
    }
    if !(0.0..1.0).contains(&config.holdout_fraction) {
        return Err(Error::contract("holdout fraction must be in [0, 1)"));
    }
    let head = model.config.head;
    for ex in data {
        if ex.target.len() != model.config.classes {
            return Err(Error::contract("target width does not match the output head"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let mut n_hold = (config.holdout_fraction * data.len() as f64) as usize;
    if config.holdout_fraction > 0.0 && data.len() >= 2 {
        n_hold = n_hold.clamp(1, data.len() - 1);
    }
    let holdout: Vec<&Example<T>> = order[..n_hold].iter().map(|&i| &data[i]).collect();
    let mut train_idx: Vec<usize> = order[n_hold..].to_vec();

    let mut adam = AdamState::new(config.adam, model.param_shapes());
    let mut grads = model.zero_grads();
    let mut history = History::default();
    let mut best: Option<(f64, CnnModel<T>, usize)> = None;
    let mut bad_epochs = 0;

    for epoch in 0..config.max_epochs {
        train_idx.shuffle(&mut rng);
        let (mut loss_sum, mut correct_sum) = (0.0, 0.0);
        for batch in train_idx.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| g.fill(T::zero()));
            for &i in batch {
                let ex = &data[i];
                let f = model.forward(&ex.tokens, &ex.extra)?;
                let (l, mut dlogits) = loss_and_grad(config.loss, &f.output, &ex.target);
                let w = class_weight(&config.class_weights, &ex.target);
                if w != 1.0 {
                    let wt = T::of_f64(w);
                    dlogits.iter_mut().for_each(|g| *g = *g * wt);
                }
                loss_sum += l * w;
                correct_sum += correctness(head, &f.output, &ex.target);
                model.backward(&f, &dlogits, &mut grads)?;
            }
            let scale = T::one() / T::of_f64(batch.len() as f64);
            for g in grads.iter_mut() {
                g.as_mut_slice().iter_mut().for_each(|v| *v = *v * scale);
            }
            let mut params = model.params_mut();
            adam.step(&mut params, &grads)?;
        }
        let n = train_idx.len().max(1) as f64;
        let train_loss = loss_sum / n;
        let holdout_loss = if holdout.is_empty() {
            train_loss
        } else {
            mean_loss(&model, &holdout, config)?
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            holdout_loss,
            train_accuracy: correct_sum / n,
        });
        let improved = best.as_ref().is_none_or(|(b, _, _)| holdout_loss < *b);
        if improved {
            best = Some((holdout_loss, model.clone(), epoch));
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= config.patience.max(1) {
                history.stopped_early = true;
                break;
            }
        }
    }
    match best {
        Some((_, m, epoch)) => {
            history.best_epoch = epoch;
            Ok((m, history))
        }
        None => Ok((model, history)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base2_cross_entropy_reference_values() {
        assert_eq!(categorical_cross_entropy_bits(&[0.5, 0.5], &[1.0, 0.0]), 1.0);
        assert_eq!(categorical_cross_entropy_bits(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
        // a zero probability on the true class is clamped, not infinite
        let clamped = categorical_cross_entropy_bits(&[0.0, 1.0], &[1.0, 0.0]);
        assert!((clamped - -libm::log2(PROBABILITY_FLOOR)).abs() < 1e-9);
    }

    #[test]
    fn softmax_grad_is_scaled_residual() {
        let (l, g) = loss_and_grad(Loss::CategoricalCrossEntropyBase2, &[0.25f64, 0.75], &[0.0, 1.0]);
        assert!((l - -libm::log2(0.75)).abs() < 1e-15);
        assert!((g[0] - 0.25 / core::f64::consts::LN_2).abs() < 1e-15);
        assert!((g[1] + 0.25 / core::f64::consts::LN_2).abs() < 1e-15);
    }
}
