//! Mini-batch SGD with momentum and plateau early stopping.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{argmax, ClassifierModel, Example};
use super::scalar::Scalar;
use crate::seed::derive;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Upper bound on epochs.
    pub epochs: usize,
    /// Stop after this many epochs without the loss improving by more
    /// than `min_delta`. Zero disables plateau stopping.
    pub patience: usize,
    pub min_delta: f64,
    /// Seeds data order and dropout masks.
    pub seed: u64,
    /// Stop as soon as eval-mode training accuracy reaches this value.
    pub stop_at_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 16,
            epochs: 100,
            patience: 10,
            min_delta: 1e-4,
            seed: 0,
            stop_at_accuracy: None,
        }
    }
}

impl TrainConfig {
    /// `lr = 0` is allowed so that a run can be checked to leave weights
    /// untouched.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be finite and non-negative", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::invalid("min_delta must be non-negative"));
        }
        if let Some(a) = self.stop_at_accuracy {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::invalid(format!("stop accuracy {a} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub(crate) fn write_le(&self, out: &mut dyn Write) -> Result<()> {
        out.write_all(&self.learning_rate.to_le_bytes())?;
        out.write_all(&self.momentum.to_le_bytes())?;
        out.write_all(&(self.batch_size as u32).to_le_bytes())?;
        out.write_all(&(self.epochs as u32).to_le_bytes())?;
        out.write_all(&(self.patience as u32).to_le_bytes())?;
        out.write_all(&self.min_delta.to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        match self.stop_at_accuracy {
            None => out.write_all(&[0])?,
            Some(a) => {
                out.write_all(&[1])?;
                out.write_all(&a.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub(crate) fn read_le(input: &mut dyn Read) -> Result<Self> {
        let learning_rate = read_f64(input)?;
        let momentum = read_f64(input)?;
        let batch_size = read_u32(input)? as usize;
        let epochs = read_u32(input)? as usize;
        let patience = read_u32(input)? as usize;
        let min_delta = read_f64(input)?;
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag)?;
        let stop_at_accuracy = match flag[0] {
            0 => None,
            1 => Some(read_f64(input)?),
            other => return Err(Error::format("model file", format!("bad stop-accuracy flag {other}"))),
        };
        Ok(Self {
            learning_rate,
            momentum,
            batch_size,
            epochs,
            patience,
            min_delta,
            seed,
            stop_at_accuracy,
        })
    }
}

fn read_f64(input: &mut dyn Read) -> Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_u32(input: &mut dyn Read) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Sample-weighted mean of the batch losses, dropout active.
    pub loss: f64,
    /// Fraction of training samples predicted correctly during the epoch
    /// (dropout active).
    pub accuracy: f64,
    /// Dropout-free accuracy on the training set after the epoch; only
    /// computed when an accuracy stop is configured.
    pub eval_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopReason {
    EpochLimit,
    Plateau,
    AccuracyReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub stop: StopReason,
}

/// Every class in `0..classes` must appear at least once.
pub fn check_class_coverage(data: &[Example], classes: usize) -> Result<()> {
    let mut seen = vec![false; classes];
    for (i, ex) in data.iter().enumerate() {
        match seen.get_mut(ex.label) {
            Some(s) => *s = true,
            None => {
                return Err(Error::invalid(format!(
                    "example {i} has label {} outside 0..{classes}",
                    ex.label
                )))
            }
        }
    }
    let missing: Vec<String> = seen
        .iter()
        .enumerate()
        .filter(|(_, &s)| !s)
        .map(|(c, _)| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "training split is missing class(es) {}",
            missing.join(", ")
        )));
    }
    Ok(())
}

pub fn train<T: Scalar>(model: &mut ClassifierModel<T>, data: &[Example], cfg: &TrainConfig) -> Result<TrainLog> {
    train_with(model, data, cfg, |_| {})
}

/// As [`train`], calling `on_epoch` after every epoch.
pub fn train_with<T: Scalar>(
    model: &mut ClassifierModel<T>,
    data: &[Example],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainLog> {
    cfg.validate()?;
    check_class_coverage(data, model.topology().classes)?;
    model.set_hyperparameters(Some(cfg.clone()));
    let lr = T::from_f64(cfg.learning_rate);
    let mu = T::from_f64(cfg.momentum);
    let mut velocity = vec![T::zero(); model.num_params()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::new();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut stop = StopReason::EpochLimit;
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, &[epoch as u64]));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            batch.clear();
            batch.extend(idx.iter().map(|&i| &data[i]));
            let dropout_seed = derive(cfg.seed, &[epoch as u64, b as u64, 1]);
            let (loss, grad, preds) = model.batch_gradients(&batch, true, dropout_seed)?;
            loss_sum += loss * batch.len() as f64;
            correct += preds.iter().zip(&batch).filter(|(p, ex)| **p == ex.label).count();
            for ((w, v), &g) in model.params_mut().iter_mut().zip(&mut velocity).zip(&grad) {
                *v = mu * *v + g;
                *w -= lr * *v;
            }
        }
        let loss = loss_sum / data.len() as f64;
        let eval_accuracy = match cfg.stop_at_accuracy {
            Some(_) => Some(accuracy(model, data)?),
            None => None,
        };
        let entry = EpochLog {
            epoch,
            loss,
            accuracy: correct as f64 / data.len() as f64,
            eval_accuracy,
        };
        on_epoch(&entry);
        log.push(entry);

        if let (Some(target), Some(acc)) = (cfg.stop_at_accuracy, eval_accuracy) {
            if acc >= target {
                stop = StopReason::AccuracyReached;
                break;
            }
        }
        if loss < best - cfg.min_delta {
            best = loss;
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                stop = StopReason::Plateau;
                break;
            }
        }
    }
    Ok(TrainLog { epochs: log, stop })
}

/// Dropout-free accuracy of `model` on `data`.
pub fn accuracy<T: Scalar>(model: &ClassifierModel<T>, data: &[Example]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("empty data set"));
    }
    let preds = predict_all(model, data)?;
    let correct = preds.iter().zip(data).filter(|(p, ex)| **p == ex.label).count();
    Ok(correct as f64 / data.len() as f64)
}

/// Dropout-free predicted labels, in order.
pub fn predict_all<T: Scalar>(model: &ClassifierModel<T>, data: &[Example]) -> Result<Vec<usize>> {
    use rayon::prelude::*;
    data.par_iter()
        .map(|ex| Ok(argmax(&model.forward(&ex.image_refs(), false, 0)?)))
        .collect()
}
