use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::{InputShape, Network, Normalization};
use crate::dataset::{Dataset, PatchSample, SequenceSample, PATCH_CELLS};
use crate::error::{Error, Result};
use crate::motion::FrequencyBank;
use crate::seeds;

/// Sequences evaluated per parallel work item. Gradients are summed within
/// a chunk and then across chunks in order, so results do not depend on
/// the thread count.
const CHUNK: usize = 8;

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!("{} predictions for {} targets", pred.len(), target.len())));
    }
    if pred.is_empty() {
        return Err(Error::invalid("mse of empty vectors"));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// Training and validation sequences over a shared sample store.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub samples: &'a [PatchSample],
    pub train: &'a [SequenceSample],
    pub val: &'a [SequenceSample],
    pub input: InputShape,
    pub frequencies: &'a FrequencyBank,
}

impl<'a> TrainData<'a> {
    pub fn from_dataset(ds: &'a Dataset) -> Self {
        Self {
            samples: &ds.samples,
            train: &ds.split.train,
            val: &ds.split.val,
            input: input_shape(ds),
            frequencies: &ds.meta.frequencies,
        }
    }
}

pub fn input_shape(ds: &Dataset) -> InputShape {
    InputShape {
        channels: crate::dataset::channel_count(ds.meta.num_classes),
        cells: PATCH_CELLS,
        velocity_len: ds.meta.frequencies.feature_len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossCurve(pub Vec<EpochLoss>);

impl LossCurve {
    /// `epoch train_loss val_loss` per line.
    pub fn to_ascii(&self) -> String {
        let mut out = String::from("# epoch train_loss val_loss\n");
        for e in &self.0 {
            let _ = writeln!(out, "{} {} {}", e.epoch, e.train_loss, e.val_loss);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_ascii())?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub network: Network,
    pub curve: LossCurve,
    pub best_epoch: Option<usize>,
    pub best_val_loss: f64,
}

fn step_views<'a>(samples: &'a [PatchSample], s: &SequenceSample) -> (Vec<&'a [f32]>, Vec<&'a [f32]>) {
    let el = s.elements(samples);
    (el.iter().map(|e| e.patch.as_slice()).collect(), el.iter().map(|e| e.velocity.as_slice()).collect())
}

pub fn predict_sequences(net: &Network, samples: &[PatchSample], seqs: &[SequenceSample]) -> Result<Vec<f64>> {
    seqs.par_iter()
        .map(|s| {
            let (p, v) = step_views(samples, s);
            net.forward(&p, &v)
        })
        .collect()
}

pub fn evaluate_mse(net: &Network, samples: &[PatchSample], seqs: &[SequenceSample]) -> Result<f64> {
    let pred = predict_sequences(net, samples, seqs)?;
    let target: Vec<f64> = seqs.iter().map(|s| s.target(samples)).collect();
    mse_loss(&pred, &target)
}

/// Mean loss of `batch` and the gradient of that mean.
pub fn batch_gradient(net: &Network, samples: &[PatchSample], batch: &[SequenceSample]) -> Result<(f64, Vec<f64>)> {
    let weight = 1.0 / batch.len() as f64;
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; net.params.len()];
            let mut loss = 0.0;
            for s in chunk {
                let (p, v) = step_views(samples, s);
                loss += net.accumulate_gradient(&p, &v, s.target(samples), weight, &mut g)?;
            }
            Ok((loss, g))
        })
        .collect::<Result<_>>()?;
    let mut grad = vec![0.0; net.params.len()];
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((loss * weight, grad))
}

/// Adaptive moment estimation.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// Distinct samples referenced by `seqs`.
fn referenced<'a>(samples: &'a [PatchSample], seqs: &[SequenceSample]) -> Vec<&'a [f32]> {
    let mut used = vec![false; samples.len()];
    for s in seqs {
        used[s.start..s.start + s.len].fill(true);
    }
    samples.iter().zip(used).filter(|(_, u)| *u).map(|(s, _)| s.patch.as_slice()).collect()
}

pub fn train(data: &TrainData, config: &ModelConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(s) = data.train.iter().chain(data.val).find(|s| s.len != config.seq_len) {
        return Err(Error::Shape(format!("sequence of length {} for a model with seq_len {}", s.len, config.seq_len)));
    }
    let norm = Normalization::fit(referenced(data.samples, data.train), &data.input);
    let mut net = Network::new(config.clone(), data.input, data.frequencies.clone(), norm)?;
    let mut curve = LossCurve::default();
    if config.epochs == 0 {
        return Ok(TrainOutcome { network: net, curve, best_epoch: None, best_val_loss: f64::NAN });
    }

    let mut adam = Adam::new(net.params.len(), config.learning_rate);
    let mut best = (f64::INFINITY, None, net.params.clone());
    let mut order: Vec<SequenceSample> = data.train.to_vec();
    let mut step = 0;
    let mut stale = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seeds::derive_indexed(config.seed, "shuffle", epoch as u64)));
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, grad) = batch_gradient(&net, data.samples, batch)?;
            if !loss.is_finite() || !grad.iter().all(|g| g.is_finite()) {
                return Err(Error::Diverged { step, loss });
            }
            adam.step(&mut net.params, &grad);
            total += loss * batch.len() as f64;
            step += 1;
        }
        let train_loss = total / order.len() as f64;
        let val_loss = match evaluate_mse(&net, data.samples, data.val) {
            Ok(v) if v.is_finite() => v,
            Ok(v) => return Err(Error::Diverged { step, loss: v }),
            Err(Error::NonFinite(_)) => return Err(Error::Diverged { step, loss: f64::NAN }),
            Err(e) => return Err(e),
        };
        curve.0.push(EpochLoss { epoch, train_loss, val_loss });
        if val_loss < best.0 {
            best = (val_loss, Some(epoch), net.params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    net.params = best.2;
    Ok(TrainOutcome { network: net, curve, best_epoch: best.1, best_val_loss: best.0 })
}
