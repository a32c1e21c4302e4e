//! Deterministic stand-ins for layer computation.
//!
//! Layer `index` maps an input buffer to an output whose byte `k` is
//! `(c + index + k) mod 256`, with `c` the byte sum of the input modulo 2^32.
//! Because every layer depends only on its input, running layers `1..=L` in one
//! process and running `1..=x1` then `x1+1..=L` elsewhere yield the same bytes.

use thiserror::Error;

use crate::hash::Fnv1a;
use crate::profile::{ModelProfile, TensorShape};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error(
        "buffer of {actual} bytes does not match {shape} x {dtype_bytes} B ({expected} bytes)"
    )]
    Length {
        shape: TensorShape,
        dtype_bytes: u64,
        expected: u64,
        actual: u64,
    },
    #[error("tensor shape {actual} where {expected} was expected")]
    Shape {
        expected: TensorShape,
        actual: TensorShape,
    },
    #[error("layer range {from}..={to} outside model of {layers} layers")]
    Range {
        from: usize,
        to: usize,
        layers: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticTensor {
    bytes: Vec<u8>,
    shape: TensorShape,
    dtype_bytes: u64,
}

fn byte_len(shape: TensorShape, dtype_bytes: u64) -> u64 {
    shape
        .elements()
        .and_then(|e| e.checked_mul(dtype_bytes))
        .unwrap_or(u64::MAX)
}

impl SyntheticTensor {
    pub fn new(bytes: Vec<u8>, shape: TensorShape, dtype_bytes: u64) -> Result<Self, SynthError> {
        let expected = byte_len(shape, dtype_bytes);
        if bytes.len() as u64 != expected {
            return Err(SynthError::Length {
                shape,
                dtype_bytes,
                expected,
                actual: bytes.len() as u64,
            });
        }
        Ok(Self {
            bytes,
            shape,
            dtype_bytes,
        })
    }

    /// Model input: byte `k` is `k mod 256`.
    pub fn input(shape: TensorShape, dtype_bytes: u64) -> Self {
        let n = byte_len(shape, dtype_bytes) as usize;
        Self {
            bytes: (0..n).map(|k| k as u8).collect(),
            shape,
            dtype_bytes,
        }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn shape(&self) -> TensorShape {
        self.shape
    }

    pub fn dtype_bytes(&self) -> u64 {
        self.dtype_bytes
    }

    /// First 8 bytes (little-endian) of the 64-bit FNV-1a hash of the buffer.
    pub fn digest(&self) -> [u8; 8] {
        digest_bytes(&self.bytes)
    }
}

pub fn digest_bytes(bytes: &[u8]) -> [u8; 8] {
    let mut h = Fnv1a::default();
    h.update(bytes);
    h.finish().to_le_bytes()
}

/// Applies synthetic layer `index` to `input`, producing a tensor of shape `out`.
pub fn synth_layer(index: usize, input: &SyntheticTensor, out: TensorShape) -> SyntheticTensor {
    let sum = input
        .bytes
        .iter()
        .fold(0u32, |acc, &b| acc.wrapping_add(u32::from(b)));
    // only the low byte of c + index matters modulo 256
    let base = (sum as usize).wrapping_add(index) as u8;
    let n = byte_len(out, input.dtype_bytes) as usize;
    let pattern: Vec<u8> = (0..=255u8).map(|k| base.wrapping_add(k)).collect();
    let mut bytes = Vec::with_capacity(n);
    while bytes.len() < n {
        let take = (n - bytes.len()).min(pattern.len());
        bytes.extend_from_slice(&pattern[..take]);
    }
    SyntheticTensor {
        bytes,
        shape: out,
        dtype_bytes: input.dtype_bytes,
    }
}

/// Runs layers `from..=to` (1-based) of `profile` on `input`.
pub fn run_layers(
    profile: &ModelProfile,
    from: usize,
    to: usize,
    input: SyntheticTensor,
    mut per_layer: impl FnMut(usize),
) -> Result<SyntheticTensor, SynthError> {
    let layers = profile.total_layers();
    if from == 0 || to > layers || from > to + 1 {
        return Err(SynthError::Range { from, to, layers });
    }
    let expected_in = profile.boundary_shape(from - 1);
    if input.shape != expected_in {
        return Err(SynthError::Shape {
            expected: expected_in,
            actual: input.shape,
        });
    }
    let mut t = input;
    for layer in &profile.layers[from - 1..to] {
        t = synth_layer(layer.index, &t, layer.out_shape);
        per_layer(layer.index);
    }
    Ok(t)
}

/// Digest of the full model applied in-process.
pub fn execute_monolithic(
    profile: &ModelProfile,
    input: &SyntheticTensor,
) -> Result<[u8; 8], SynthError> {
    let out = run_layers(profile, 1, profile.total_layers(), input.clone(), |_| {})?;
    Ok(out.digest())
}
