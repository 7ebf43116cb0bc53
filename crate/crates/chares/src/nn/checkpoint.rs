//! CHNN on-disk format for [`Mlp`] parameters.
//!
//! Little-endian layout:
//!
//! ```text
//! "CHNN"  u32 version  u32 layer_count
//! per layer: u32 in_dim, u32 out_dim, u8 activation_tag
//! per layer: f64 weights (row-major), f64 biases
//! ```
//!
//! Round trips are bit-exact. The decoder is total over arbitrary bytes.

use std::fs;
use std::path::Path;

use super::{Activation, Mlp};
use crate::error::{Error, Result};
use crate::iqfile::Reader;

pub const CHNN_MAGIC: &[u8; 4] = b"CHNN";
pub const CHNN_VERSION: u32 = 1;

const MAX_LAYERS: u32 = 1024;
const MAX_DIM: u32 = 1 << 20;

pub fn encode(net: &Mlp) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + net.param_count() * 8);
    out.extend_from_slice(CHNN_MAGIC);
    out.extend_from_slice(&CHNN_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        out.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
        out.push(layer.activation().tag());
    }
    for layer in net.layers() {
        for w in layer.weights() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for b in layer.biases() {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Mlp> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != CHNN_MAGIC {
        return Err(Error::Format("bad CHNN magic".into()));
    }
    let version = r.u32()?;
    if version != CHNN_VERSION {
        return Err(Error::Format(format!("unsupported CHNN version {version}")));
    }
    let layer_count = r.u32()?;
    if layer_count == 0 || layer_count > MAX_LAYERS {
        return Err(Error::Format(format!("implausible layer count {layer_count}")));
    }

    let mut dims: Vec<usize> = Vec::with_capacity(layer_count as usize + 1);
    let mut activations = Vec::with_capacity(layer_count as usize);
    let mut total_params: u64 = 0;
    for i in 0..layer_count {
        let in_dim = r.u32()?;
        let out_dim = r.u32()?;
        let act = Activation::from_tag(r.u8()?)?;
        if in_dim == 0 || out_dim == 0 || in_dim > MAX_DIM || out_dim > MAX_DIM {
            return Err(Error::Format(format!("implausible layer shape {in_dim}x{out_dim}")));
        }
        if i == 0 {
            dims.push(in_dim as usize);
        } else if dims[i as usize] != in_dim as usize {
            return Err(Error::Format(format!(
                "layer {i} input {in_dim} does not chain with previous output {}",
                dims[i as usize]
            )));
        }
        if act == Activation::Softmax && i != layer_count - 1 {
            return Err(Error::Format("softmax before the final layer".into()));
        }
        dims.push(out_dim as usize);
        activations.push(act);
        total_params = total_params
            .checked_add(in_dim as u64 * out_dim as u64 + out_dim as u64)
            .ok_or_else(|| Error::Format("parameter count overflows".into()))?;
    }
    let payload = total_params
        .checked_mul(8)
        .ok_or_else(|| Error::Format("parameter payload overflows".into()))?;
    if payload != r.remaining() as u64 {
        return Err(Error::Format(format!(
            "CHNN payload length mismatch: header says {payload} bytes, {} present",
            r.remaining()
        )));
    }

    let mut params = Vec::with_capacity(layer_count as usize);
    for i in 0..layer_count as usize {
        let (fan_in, fan_out) = (dims[i], dims[i + 1]);
        let mut weights = Vec::with_capacity(fan_in * fan_out);
        for _ in 0..fan_in * fan_out {
            weights.push(r.f64()?);
        }
        let mut biases = Vec::with_capacity(fan_out);
        for _ in 0..fan_out {
            biases.push(r.f64()?);
        }
        if weights.iter().chain(&biases).any(|p| !p.is_finite()) {
            return Err(Error::Format(format!("layer {i} holds non-finite parameters")));
        }
        params.push((weights, biases));
    }
    Mlp::from_params(&dims, &activations, params)
        .map_err(|e| Error::Format(format!("CHNN payload invalid: {e}")))
}

pub fn write(path: &Path, net: &Mlp) -> Result<()> {
    fs::write(path, encode(net))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Mlp> {
    decode(&fs::read(path).map_err(|e| {
        Error::MissingDependency(format!("checkpoint {}: {e}", path.display()))
    })?)
}
