use super::{ModelProfile, ProfileError};
use crate::objective::Scenario;

/// Per-layer costs and per-split prefix aggregates.
///
/// Layer vectors are indexed from 1; slot 0 of `out_bytes` holds the input
/// buffer size so that the empty prefix still has a transmit size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostTable {
    dtype_bytes: u64,
    work: Vec<u64>,
    weight_bytes: Vec<u64>,
    out_bytes: Vec<u64>,
    prefix_work: Vec<u64>,
    prefix_mem: Vec<u64>,
}

/// Derives the cost table of `profile` under the scenario's element width.
pub fn derive_costs(
    profile: &ModelProfile,
    scenario: &Scenario,
) -> Result<CostTable, ProfileError> {
    CostTable::new(profile, scenario.dtype_bytes)
}

impl CostTable {
    pub fn new(profile: &ModelProfile, dtype_bytes: u64) -> Result<Self, ProfileError> {
        let n = profile.layers.len();
        let mut work = vec![0u64; n + 1];
        let mut weight_bytes = vec![0u64; n + 1];
        let mut out_bytes = vec![0u64; n + 1];

        out_bytes[0] = profile
            .input_shape
            .elements()
            .and_then(|e| e.checked_mul(dtype_bytes))
            .ok_or(ProfileError::Overflow(0))?;

        for layer in &profile.layers {
            let i = layer.index;
            let overflow = || ProfileError::Overflow(i);
            work[i] = layer
                .kind
                .work(layer.in_shape, layer.out_shape)
                .ok_or_else(overflow)?;
            weight_bytes[i] = layer
                .kind
                .weight_elements()
                .and_then(|e| e.checked_mul(dtype_bytes))
                .ok_or_else(overflow)?;
            out_bytes[i] = layer
                .out_shape
                .elements()
                .and_then(|e| e.checked_mul(dtype_bytes))
                .ok_or_else(overflow)?;
        }

        let mut prefix_work = vec![0u64; n + 1];
        let mut prefix_mem = vec![0u64; n + 1];
        let mut weights = 0u64;
        let mut peak = out_bytes[0];
        prefix_mem[0] = peak;
        for i in 1..=n {
            prefix_work[i] = prefix_work[i - 1]
                .checked_add(work[i])
                .ok_or(ProfileError::Overflow(i))?;
            weights = weights
                .checked_add(weight_bytes[i])
                .ok_or(ProfileError::Overflow(i))?;
            peak = peak.max(out_bytes[i]);
            prefix_mem[i] = weights.checked_add(peak).ok_or(ProfileError::Overflow(i))?;
        }

        Ok(Self {
            dtype_bytes,
            work,
            weight_bytes,
            out_bytes,
            prefix_work,
            prefix_mem,
        })
    }

    pub fn total_layers(&self) -> usize {
        self.work.len() - 1
    }

    pub fn dtype_bytes(&self) -> u64 {
        self.dtype_bytes
    }

    /// Work of layer `i` (1-based).
    pub fn layer_work(&self, i: usize) -> u64 {
        self.work[i]
    }

    /// Weight bytes of layer `i` (1-based).
    pub fn layer_weight_bytes(&self, i: usize) -> u64 {
        self.weight_bytes[i]
    }

    /// Output bytes of layer `i`; `0` is the input buffer.
    pub fn layer_out_bytes(&self, i: usize) -> u64 {
        self.out_bytes[i]
    }

    pub fn input_bytes(&self) -> u64 {
        self.out_bytes[0]
    }

    pub fn total_work(&self) -> u64 {
        self.prefix_work[self.total_layers()]
    }

    /// Work of the first `x1` layers.
    pub fn edge_work(&self, x1: usize) -> u64 {
        self.prefix_work[x1]
    }

    /// Work of the last `x2` layers.
    pub fn server_work(&self, x2: usize) -> u64 {
        let l = self.total_layers();
        self.total_work() - self.prefix_work[l - x2]
    }

    /// Bytes shipped after `x1` edge layers.
    pub fn tx_bytes(&self, x1: usize) -> u64 {
        self.out_bytes[x1]
    }

    /// Edge footprint: prefix weight bytes plus the peak activation so far.
    pub fn edge_mem(&self, x1: usize) -> u64 {
        self.prefix_mem[x1]
    }
}
