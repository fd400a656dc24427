//! Binary weight-file format for [`Mlp`] networks.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic       4 bytes  b"MLPW"
//! version     u32      currently 1; other versions are rejected
//! n_layers    u32
//! per layer:  fan_in u32, fan_out u32, activation u8 (0 relu, 1 tanh, 2 linear)
//! n_norm      u32      length of the normalization block
//! norm        n_norm f64 (LE), interpreted by the owning component
//! per layer:  weights fan_in*fan_out f64 (LE, row-major), biases fan_out f64
//! ```

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{CoreError, Result};
use crate::nn::{Activation, Layer, Mlp};

const MAGIC: &[u8; 4] = b"MLPW";
const VERSION: u32 = 1;

fn act_tag(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Tanh => 1,
        Activation::Linear => 2,
    }
}

fn tag_act(t: u8) -> Result<Activation> {
    match t {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Tanh),
        2 => Ok(Activation::Linear),
        other => Err(CoreError::WeightFormat(format!(
            "unknown activation tag {other}"
        ))),
    }
}

/// Serializes a network plus an opaque normalization block.
pub fn save_weights(net: &Mlp, norm: &[f64], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
    for layer in &net.layers {
        buf.extend_from_slice(&(layer.w.nrows() as u32).to_le_bytes());
        buf.extend_from_slice(&(layer.w.ncols() as u32).to_le_bytes());
        buf.push(act_tag(layer.act));
    }
    buf.extend_from_slice(&(norm.len() as u32).to_le_bytes());
    for v in norm {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for layer in &net.layers {
        for v in layer.w.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in layer.b.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(CoreError::WeightFormat("unexpected end of file".to_string()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(n * 8)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Loads a network and its normalization block, validating magic, version,
/// shape consistency, and finiteness.
pub fn load_weights(path: &Path) -> Result<(Mlp, Vec<f64>)> {
    let data = std::fs::read(path)?;
    let mut r = Reader {
        data: &data,
        pos: 0,
    };

    if r.take(4)? != MAGIC {
        return Err(CoreError::WeightFormat("bad magic".to_string()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CoreError::WeightFormat(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let n_layers = r.u32()? as usize;
    if n_layers == 0 || n_layers > 64 {
        return Err(CoreError::WeightFormat(format!(
            "implausible layer count {n_layers}"
        )));
    }

    let mut shapes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let fan_in = r.u32()? as usize;
        let fan_out = r.u32()? as usize;
        let act = tag_act(r.u8()?)?;
        if fan_in == 0 || fan_out == 0 {
            return Err(CoreError::WeightFormat("zero-width layer".to_string()));
        }
        shapes.push((fan_in, fan_out, act));
    }
    for w in shapes.windows(2) {
        if w[0].1 != w[1].0 {
            return Err(CoreError::WeightFormat(format!(
                "layer shapes do not chain: {} -> {}",
                w[0].1, w[1].0
            )));
        }
    }

    let n_norm = r.u32()? as usize;
    let norm = r.f64s(n_norm)?;

    let mut layers = Vec::with_capacity(n_layers);
    for &(fan_in, fan_out, act) in &shapes {
        let w_vals = r.f64s(fan_in * fan_out)?;
        let b_vals = r.f64s(fan_out)?;
        if w_vals.iter().chain(&b_vals).any(|v| !v.is_finite()) {
            return Err(CoreError::WeightFormat("non-finite parameter".to_string()));
        }
        let w = Array2::from_shape_vec((fan_in, fan_out), w_vals).expect("validated shape");
        layers.push(Layer {
            w,
            b: Array1::from_vec(b_vals),
            act,
        });
    }

    if r.pos != data.len() {
        return Err(CoreError::WeightFormat(format!(
            "{} trailing bytes",
            data.len() - r.pos
        )));
    }

    Ok((Mlp { layers }, norm))
}
