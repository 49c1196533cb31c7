//! Mini-batch training of the GNN predictors.
//!
//! Mean cross-entropy of candidate-node predictions, optimized with
//! adaptive-moment gradient descent. Same data + same seed gives a
//! bit-identical model.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EgoGraph, GnnKind, GnnModel};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_learn_rate")]
    pub learn_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Diagnostic switch: skip updates to the first layer, leaving a convex
    /// last-layer problem. Off in normal operation.
    #[serde(default)]
    pub freeze_layer1: bool,
}

fn default_epochs() -> usize {
    200
}
fn default_batch() -> usize {
    100
}
fn default_learn_rate() -> f64 {
    0.01
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch: default_batch(),
            learn_rate: default_learn_rate(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            freeze_layer1: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 || self.learn_rate <= 0.0 || self.eps <= 0.0 {
            return Err(Error::InvalidParameter(
                "train config values must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Mean sample loss per epoch, in epoch order.
    pub epoch_losses: Vec<f64>,
    /// Mean loss over the training set after the last update.
    pub final_loss: f64,
}

pub fn gnn_train(
    kind: GnnKind,
    heads: usize,
    data: &[EgoGraph],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<GnnModel> {
    gnn_train_with_report(kind, heads, data, cfg, seed).map(|(m, _)| m)
}

pub fn gnn_train_with_report(
    kind: GnnKind,
    heads: usize,
    data: &[EgoGraph],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(GnnModel, TrainReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let labels: Vec<bool> = data
        .iter()
        .enumerate()
        .map(|(i, g)| g.label.ok_or(Error::UnlabeledSample(i)))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = GnnModel::init(kind, heads, &mut rng);
    let np = model.params().len();
    let mut grad = vec![0.0; np];
    let mut m1 = vec![0.0; np];
    let mut m2 = vec![0.0; np];
    let mut step = 0u32;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        // Fisher-Yates, driven by the training stream
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch) {
            grad.fill(0.0);
            let mut batch_loss = 0.0;
            for &i in chunk {
                batch_loss += model.loss_grad_into(&data[i], labels[i], &mut grad);
            }
            let scale = 1.0 / chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if cfg.freeze_layer1 {
                let r = model.layer1_range();
                grad[r].fill(0.0);
            }
            step += 1;
            adam_step(model.params_mut(), &grad, &mut m1, &mut m2, step, cfg);
            epoch_loss += batch_loss;
        }
        epoch_losses.push(epoch_loss / data.len() as f64);
    }

    let final_loss = data
        .iter()
        .zip(&labels)
        .map(|(g, &l)| model.loss(g, l))
        .sum::<f64>()
        / data.len() as f64;
    Ok((
        model,
        TrainReport {
            epoch_losses,
            final_loss,
        },
    ))
}

fn adam_step(
    params: &mut [f64],
    grad: &[f64],
    m1: &mut [f64],
    m2: &mut [f64],
    step: u32,
    cfg: &TrainConfig,
) {
    let b1c = 1.0 - cfg.beta1.powi(step as i32);
    let b2c = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..params.len() {
        m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * grad[i];
        m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        let mhat = m1[i] / b1c;
        let vhat = m2[i] / b2c;
        params[i] -= cfg.learn_rate * mhat / (vhat.sqrt() + cfg.eps);
    }
}
