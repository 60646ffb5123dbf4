use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{loss, NetShape, SetNetwork, Variant, Workspace};
use crate::dataset::Sample;
use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Momentum { beta: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    /// Root of the init and shuffle streams.
    pub seed: u64,
    pub hidden_widths: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            batch_size: 32,
            epochs: 200,
            optimizer: OptimizerKind::Momentum { beta: 0.9 },
            seed: 0,
            hidden_widths: vec![128, 128],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// One-based.
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub test_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurves {
    pub epochs: Vec<EpochRecord>,
}

impl LearningCurves {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

enum OptimizerState {
    Sgd,
    Momentum { beta: f64, velocity: Vec<f64> },
    Adam { beta1: f64, beta2: f64, eps: f64, m: Vec<f64>, v: Vec<f64>, step: i32 },
}

impl OptimizerState {
    fn new(kind: OptimizerKind, n: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => OptimizerState::Sgd,
            OptimizerKind::Momentum { beta } => OptimizerState::Momentum {
                beta,
                velocity: vec![0.0; n],
            },
            OptimizerKind::Adam { beta1, beta2, eps } => OptimizerState::Adam {
                beta1,
                beta2,
                eps,
                m: vec![0.0; n],
                v: vec![0.0; n],
                step: 0,
            },
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        match self {
            OptimizerState::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            OptimizerState::Momentum { beta, velocity } => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
                    *v = *beta * *v + g;
                    *p -= lr * *v;
                }
            }
            OptimizerState::Adam { beta1, beta2, eps, m, v, step } => {
                *step += 1;
                let c1 = 1.0 - libm::pow(*beta1, f64::from(*step));
                let c2 = 1.0 - libm::pow(*beta2, f64::from(*step));
                for (((p, g), mi), vi) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *mi = *beta1 * *mi + (1.0 - *beta1) * g;
                    *vi = *beta2 * *vi + (1.0 - *beta2) * g * g;
                    *p -= lr * (*mi / c1) / (libm::sqrt(*vi / c2) + *eps);
                }
            }
        }
    }
}

/// Mean per-sample loss of `net` over `samples`.
pub fn evaluate_loss(net: &SetNetwork, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut ws = Workspace::default();
    let mut total = 0.0;
    for s in samples {
        let t = net.forward_with(&s.v, &mut ws)?;
        total += loss(&t, &s.target());
    }
    Ok(total / samples.len() as f64)
}

/// Mini-batch training. Deterministic in `cfg.seed`; `on_epoch` sees every
/// curve point as it is produced.
pub fn train(
    variant: Variant,
    shape: NetShape,
    train_set: &[Sample],
    test_set: &[Sample],
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<(SetNetwork, LearningCurves)> {
    cfg.validate()?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::NotEnoughSamples {
            needed: 1,
            got: train_set.len().min(test_set.len()),
        });
    }
    let mut net = SetNetwork::new(variant, shape, &cfg.hidden_widths, &mut stream_rng(cfg.seed, Stream::Init, 0))?;
    let targets: Vec<Vec<f64>> = train_set.iter().map(Sample::target).collect();
    let mut optimizer = OptimizerState::new(cfg.optimizer, net.num_params());
    let mut grads = vec![0.0; net.num_params()];
    let mut ws = Workspace::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut curves = LearningCurves::default();

    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut stream_rng(cfg.seed, Stream::Shuffle, epoch as u64));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                epoch_loss += net.accumulate_gradient(&train_set[i].v, &targets[i], scale, &mut grads, &mut ws)?;
            }
            optimizer.step(net.params_mut(), &grads, cfg.learning_rate);
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        if !train_loss.is_finite() || net.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch, loss: train_loss });
        }
        let test_loss = evaluate_loss(&net, test_set)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            test_loss,
        };
        on_epoch(&record);
        curves.epochs.push(record);
    }
    Ok((net, curves))
}
