//! Adam optimizer state for [`Mlp`] parameters and for single scalars.

use ndarray::{Array1, Array2};

use crate::nn::{Gradients, Mlp};

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second-moment estimates matching one network's parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    cfg: AdamConfig,
    step: u64,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl AdamState {
    pub fn new(net: &Mlp, cfg: AdamConfig) -> Self {
        AdamState {
            cfg,
            step: 0,
            m_w: net.layers.iter().map(|l| Array2::zeros(l.w.dim())).collect(),
            v_w: net.layers.iter().map(|l| Array2::zeros(l.w.dim())).collect(),
            m_b: net.layers.iter().map(|l| Array1::zeros(l.b.dim())).collect(),
            v_b: net.layers.iter().map(|l| Array1::zeros(l.b.dim())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `net` from parameter gradients.
    pub fn update(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step += 1;
        let t = self.step as f64;
        let c = &self.cfg;
        let bc1 = 1.0 - c.beta1.powf(t);
        let bc2 = 1.0 - c.beta2.powf(t);

        for (l, layer) in net.layers.iter_mut().enumerate() {
            update_array(
                layer.w.as_slice_mut().expect("contiguous"),
                grads.w[l].as_slice().expect("contiguous"),
                self.m_w[l].as_slice_mut().expect("contiguous"),
                self.v_w[l].as_slice_mut().expect("contiguous"),
                c,
                bc1,
                bc2,
            );
            update_array(
                layer.b.as_slice_mut().expect("contiguous"),
                grads.b[l].as_slice().expect("contiguous"),
                self.m_b[l].as_slice_mut().expect("contiguous"),
                self.v_b[l].as_slice_mut().expect("contiguous"),
                c,
                bc1,
                bc2,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update_array(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    c: &AdamConfig,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..p.len() {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
    }
}

/// Adam for a single scalar (the entropy temperature lives in log space).
#[derive(Debug, Clone)]
pub struct AdamScalar {
    cfg: AdamConfig,
    step: u64,
    m: f64,
    v: f64,
}

impl AdamScalar {
    pub fn new(cfg: AdamConfig) -> Self {
        AdamScalar {
            cfg,
            step: 0,
            m: 0.0,
            v: 0.0,
        }
    }

    pub fn update(&mut self, p: &mut f64, g: f64) {
        self.step += 1;
        let t = self.step as f64;
        let c = &self.cfg;
        self.m = c.beta1 * self.m + (1.0 - c.beta1) * g;
        self.v = c.beta2 * self.v + (1.0 - c.beta2) * g * g;
        let m_hat = self.m / (1.0 - c.beta1.powf(t));
        let v_hat = self.v / (1.0 - c.beta2.powf(t));
        *p -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
    }
}
