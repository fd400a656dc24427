//! Terminal cost approximator: a small tanh network on normalized
//! (dry weight, time index) regressing rollout returns, trained with Adam,
//! minibatches, and early stopping on the validation split.

use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::nn::{
    load_weights, mse_loss, save_weights, Activation, AdamConfig, AdamState, Mlp,
};
use crate::nlp::TerminalCost;
use crate::terminal::ApproximatorDataset;

/// Fit hyperparameters. Defaults: 2 hidden tanh layers of 128, batch 1024,
/// Adam at 1e-3, early stop after 50 stale validation epochs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct TerminalFitConfig {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TerminalFitConfig {
    fn default() -> Self {
        TerminalFitConfig {
            hidden_layers: 2,
            hidden_width: 128,
            batch_size: 1024,
            learning_rate: 1e-3,
            max_epochs: 2000,
            patience: 50,
            seed: 0,
        }
    }
}

/// Affine maps between raw (x1, k, J) and the [-1, 1] training scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalNorm {
    pub x1_lo: f64,
    pub x1_hi: f64,
    pub k_max: f64,
    pub j_lo: f64,
    pub j_hi: f64,
}

impl TerminalNorm {
    fn from_dataset(ds: &ApproximatorDataset, k_max: f64) -> Self {
        let mut x1_lo = f64::INFINITY;
        let mut x1_hi = f64::NEG_INFINITY;
        let mut j_lo = f64::INFINITY;
        let mut j_hi = f64::NEG_INFINITY;
        for s in &ds.samples {
            x1_lo = x1_lo.min(s.state.dry_weight);
            x1_hi = x1_hi.max(s.state.dry_weight);
            j_lo = j_lo.min(s.cost);
            j_hi = j_hi.max(s.cost);
        }
        TerminalNorm {
            x1_lo,
            x1_hi,
            k_max,
            j_lo,
            j_hi,
        }
    }

    fn x1_span(&self) -> f64 {
        (self.x1_hi - self.x1_lo).max(1e-12)
    }

    fn j_span(&self) -> f64 {
        (self.j_hi - self.j_lo).max(1e-12)
    }

    fn norm_inputs(&self, x1: f64, k: f64) -> [f64; 2] {
        [
            2.0 * (x1 - self.x1_lo) / self.x1_span() - 1.0,
            2.0 * k / self.k_max.max(1.0) - 1.0,
        ]
    }

    fn norm_target(&self, j: f64) -> f64 {
        2.0 * (j - self.j_lo) / self.j_span() - 1.0
    }

    fn denorm_target(&self, y: f64) -> f64 {
        (y + 1.0) * 0.5 * self.j_span() + self.j_lo
    }

    pub fn to_flat(&self) -> [f64; 5] {
        [self.x1_lo, self.x1_hi, self.k_max, self.j_lo, self.j_hi]
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != 5 || flat.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::WeightFormat(format!(
                "terminal norm block has {} entries (want 5 finite)",
                flat.len()
            )));
        }
        Ok(TerminalNorm {
            x1_lo: flat[0],
            x1_hi: flat[1],
            k_max: flat[2],
            j_lo: flat[3],
            j_hi: flat[4],
        })
    }
}

/// Trained approximator plus its scaling and final losses (raw units).
#[derive(Debug, Clone)]
pub struct TerminalCostFn {
    net: Mlp,
    pub norm: TerminalNorm,
    pub train_loss: f64,
    pub val_loss: f64,
}

impl TerminalCostFn {
    /// Estimated cost-to-go at raw dry weight `x1` and time index `k`.
    pub fn predict(&self, x1: f64, k: f64) -> f64 {
        let z = self.norm.norm_inputs(x1, k);
        let x = Array2::from_shape_vec((1, 2), z.to_vec()).expect("fixed shape");
        let y = self.net.infer(&x).expect("finite weights");
        self.norm.denorm_target(y[[0, 0]])
    }

    /// Value and d(value)/d(x1) via one forward/backward pair and the
    /// normalization chain rule.
    pub fn predict_grad(&self, x1: f64, k: f64) -> (f64, f64) {
        let z = self.norm.norm_inputs(x1, k);
        let x = Array2::from_shape_vec((1, 2), z.to_vec()).expect("fixed shape");
        let tape = self.net.forward(&x).expect("finite weights");
        let value = self.norm.denorm_target(tape.output()[[0, 0]]);
        let seed = Array2::from_elem((1, 1), 1.0);
        let grads = self.net.backward(&tape, &seed).expect("finite weights");
        let dy_dz1 = grads.input[[0, 0]];
        let grad = dy_dz1 * (2.0 / self.norm.x1_span()) * (0.5 * self.norm.j_span());
        (value, grad)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut block = self.norm.to_flat().to_vec();
        block.push(self.train_loss);
        block.push(self.val_loss);
        save_weights(&self.net, &block, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (net, block) = load_weights(path)?;
        if block.len() != 7 {
            return Err(CoreError::WeightFormat(format!(
                "terminal checkpoint norm block has {} entries (want 7)",
                block.len()
            )));
        }
        if net.input_dim() != 2 || net.output_dim() != 1 {
            return Err(CoreError::WeightFormat(format!(
                "terminal network is {}->{} (want 2->1)",
                net.input_dim(),
                net.output_dim()
            )));
        }
        Ok(TerminalCostFn {
            net,
            norm: TerminalNorm::from_flat(&block[..5])?,
            train_loss: block[5],
            val_loss: block[6],
        })
    }
}

impl TerminalCost for TerminalCostFn {
    fn value_grad(&self, x1: f64, k: f64) -> (f64, f64) {
        self.predict_grad(x1, k)
    }
}

fn assemble(
    ds: &ApproximatorDataset,
    idx: &[usize],
    norm: &TerminalNorm,
) -> (Array2<f64>, Array2<f64>) {
    let mut x = Array2::zeros((idx.len(), 2));
    let mut y = Array2::zeros((idx.len(), 1));
    for (row, &i) in idx.iter().enumerate() {
        let s = &ds.samples[i];
        let z = norm.norm_inputs(s.state.dry_weight, s.k as f64);
        x[[row, 0]] = z[0];
        x[[row, 1]] = z[1];
        y[[row, 0]] = norm.norm_target(s.cost);
    }
    (x, y)
}

/// Minimizes minibatch MSE on the train split; keeps the weights with the
/// best validation loss; converts final losses back to raw units.
pub fn fit_terminal_cost(
    ds: &ApproximatorDataset,
    k_max: usize,
    cfg: &TerminalFitConfig,
) -> Result<TerminalCostFn> {
    if ds.train_idx.is_empty() || ds.val_idx.is_empty() {
        return Err(CoreError::Dataset("empty train or validation split".into()));
    }
    let norm = TerminalNorm::from_dataset(ds, k_max as f64);
    let (x_tr, y_tr) = assemble(ds, &ds.train_idx, &norm);
    let (x_va, y_va) = assemble(ds, &ds.val_idx, &norm);
    let n_tr = x_tr.nrows();

    let mut sizes = vec![2usize];
    let mut acts = Vec::new();
    for _ in 0..cfg.hidden_layers {
        sizes.push(cfg.hidden_width);
        acts.push(Activation::Tanh);
    }
    sizes.push(1);
    acts.push(Activation::Linear);
    let mut net = Mlp::new(&sizes, &acts, cfg.seed)?;
    let mut opt = AdamState::new(&net, AdamConfig::with_lr(cfg.learning_rate));
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(1));

    let batch = cfg.batch_size.min(n_tr).max(1);
    let mut order: Vec<usize> = (0..n_tr).collect();
    let mut best_net = net.clone();
    let mut best_val = f64::INFINITY;
    let mut stale = 0usize;

    for _epoch in 0..cfg.max_epochs {
        for i in (1..n_tr).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(batch) {
            let mut xb = Array2::zeros((chunk.len(), 2));
            let mut yb = Array2::zeros((chunk.len(), 1));
            for (row, &i) in chunk.iter().enumerate() {
                xb[[row, 0]] = x_tr[[i, 0]];
                xb[[row, 1]] = x_tr[[i, 1]];
                yb[[row, 0]] = y_tr[[i, 0]];
            }
            let tape = net.forward(&xb)?;
            let (loss, dpred) = mse_loss(tape.output(), &yb)?;
            if !loss.is_finite() {
                return Err(CoreError::Diverged("terminal fit train loss".into()));
            }
            let grads = net.backward(&tape, &dpred)?;
            opt.update(&mut net, &grads);
        }

        let pred_va = net.infer(&x_va)?;
        let (val, _) = mse_loss(&pred_va, &y_va)?;
        if !val.is_finite() {
            return Err(CoreError::Diverged("terminal fit validation loss".into()));
        }
        if val < best_val - 1e-12 {
            best_val = val;
            best_net = net.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    let net = best_net;
    let (train_loss_n, _) = mse_loss(&net.infer(&x_tr)?, &y_tr)?;
    let (val_loss_n, _) = mse_loss(&net.infer(&x_va)?, &y_va)?;
    // Normalized targets are J scaled by 2/span; invert that for raw MSE.
    let scale = (norm.j_span() * 0.5).powi(2);
    Ok(TerminalCostFn {
        net,
        norm,
        train_loss: train_loss_n * scale,
        val_loss: val_loss_n * scale,
    })
}
