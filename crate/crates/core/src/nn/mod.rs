//! Small dense networks with explicit forward/backward passes.
//!
//! The backward pass returns parameter gradients and the gradient with
//! respect to the network input; the latter carries critic gradients into
//! the actor update and the terminal-cost slope into the optimizer.

pub mod adam;
pub mod io;

pub use adam::{AdamConfig, AdamScalar, AdamState};
pub use io::{load_weights, save_weights};

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Batched values, rows = samples.
pub type Tensor = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn deriv_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Weight matrix, shape (fan_in, fan_out).
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub act: Activation,
}

/// Fully connected network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Stored post-activations from one forward pass: `acts[0]` is the input,
/// `acts[l + 1]` the output of layer `l`.
#[derive(Debug, Clone)]
pub struct Tape {
    acts: Vec<Tensor>,
}

impl Tape {
    pub fn output(&self) -> &Tensor {
        self.acts.last().expect("tape holds at least the input")
    }
}

/// Parameter and input gradients from one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
    pub input: Tensor,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp, batch: usize) -> Self {
        let input_dim = net.layers[0].w.nrows();
        Gradients {
            w: net.layers.iter().map(|l| Array2::zeros(l.w.dim())).collect(),
            b: net.layers.iter().map(|l| Array1::zeros(l.b.dim())).collect(),
            input: Array2::zeros((batch, input_dim)),
        }
    }

    /// Accumulates parameter gradients (input gradients are left alone).
    pub fn add_params(&mut self, other: &Gradients) {
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            *a += b;
        }
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            *a += b;
        }
    }

    /// Scales parameter gradients in place.
    pub fn scale_params(&mut self, s: f64) {
        for a in self.w.iter_mut() {
            *a *= s;
        }
        for a in self.b.iter_mut() {
            *a *= s;
        }
    }
}

impl Mlp {
    /// Builds a network with the given layer sizes and activations
    /// (`sizes.len() == acts.len() + 1`). Weights are seeded uniform
    /// Kaiming/Xavier-style, biases zero.
    pub fn new(sizes: &[usize], acts: &[Activation], seed: u64) -> Result<Self> {
        if sizes.len() != acts.len() + 1 || sizes.len() < 2 {
            return Err(CoreError::Shape(format!(
                "mlp needs sizes.len() == acts.len() + 1 >= 2, got {} and {}",
                sizes.len(),
                acts.len()
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(CoreError::Shape("zero-width layer".to_string()));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(acts.len());
        for (l, &act) in acts.iter().enumerate() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = match act {
                Activation::Relu => (6.0 / fan_in as f64).sqrt(),
                _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            };
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
                rng.random::<f64>() * 2.0 * bound - bound
            });
            layers.push(Layer {
                w,
                b: Array1::zeros(fan_out),
                act,
            });
        }
        Ok(Mlp { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").w.ncols()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.w.ncols()));
        sizes
    }

    /// Forward pass retaining the tape for a later backward pass.
    pub fn forward(&self, x: &Tensor) -> Result<Tape> {
        if x.ncols() != self.input_dim() {
            return Err(CoreError::Shape(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for layer in &self.layers {
            let mut z = acts.last().expect("non-empty").dot(&layer.w);
            z += &layer.b;
            z.mapv_inplace(|v| layer.act.apply(v));
            acts.push(z);
        }
        Ok(Tape { acts })
    }

    /// Forward pass without tape retention.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let tape = self.forward(x)?;
        Ok(tape.acts.into_iter().last().expect("non-empty"))
    }

    /// Backward pass from output cotangent `dy` (same shape as the output).
    pub fn backward(&self, tape: &Tape, dy: &Tensor) -> Result<Gradients> {
        let out = tape.output();
        if dy.dim() != out.dim() {
            return Err(CoreError::Shape(format!(
                "cotangent shape {:?} does not match output {:?}",
                dy.dim(),
                out.dim()
            )));
        }
        let mut grads = Gradients::zeros_like(self, tape.acts[0].nrows());
        let mut grad_a = dy.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let a_out = &tape.acts[l + 1];
            let mut dz = grad_a;
            dz.zip_mut_with(a_out, |g, &a| *g *= layer.act.deriv_from_output(a));
            // Multiply into the preallocated buffer: `t().dot()` can hand back
            // column-major arrays, which the optimizer's contiguous-slice
            // access would reject.
            general_mat_mul(1.0, &tape.acts[l].t(), &dz, 0.0, &mut grads.w[l]);
            grads.b[l] = dz.sum_axis(Axis(0));
            grad_a = dz.dot(&layer.w.t());
        }
        grads.input = grad_a;
        Ok(grads)
    }

    /// Total parameter count.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// True when every weight and bias is finite.
    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().all(|v| v.is_finite()) && l.b.iter().all(|v| v.is_finite()))
    }
}

/// Mean-squared-error loss over all entries; returns the loss and the
/// cotangent `d loss / d pred`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.dim() != target.dim() {
        return Err(CoreError::Shape(format!(
            "mse shapes differ: {:?} vs {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = pred.len() as f64;
    let diff = pred - target;
    let loss = diff.iter().map(|v| v * v).sum::<f64>() / n;
    let grad = diff * (2.0 / n);
    Ok((loss, grad))
}

/// Polyak averaging `target <- (1 - tau) target + tau source`.
pub fn polyak_update(target: &mut Mlp, source: &Mlp, tau: f64) {
    for (tl, sl) in target.layers.iter_mut().zip(&source.layers) {
        tl.w.zip_mut_with(&sl.w, |t, &s| *t = (1.0 - tau) * *t + tau * s);
        tl.b.zip_mut_with(&sl.b, |t, &s| *t = (1.0 - tau) * *t + tau * s);
    }
}
