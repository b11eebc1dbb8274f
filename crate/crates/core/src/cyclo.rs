//! Decimated components (polyphase) decomposition.
//!
//! A scalar sequence `x[m]` with period `N0` maps to `N0` component sequences
//! `x_i[n] = x[n * N0 + i]`. A cyclostationary scalar process becomes a
//! stationary vector process under this map, which is what turns the LPTV
//! channel into a time-invariant MIMO channel.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PolyphaseFrame {
    components: Vec<Vec<f64>>,
}

impl PolyphaseFrame {
    /// Builds a frame from its components; all components must have the same length.
    pub fn new(components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("components", "a frame needs at least one component"));
        }
        let len = components[0].len();
        if let Some((i, c)) = components.iter().enumerate().find(|(_, c)| c.len() != len) {
            return Err(Error::LengthMismatch(format!(
                "component {i} has length {}, component 0 has length {len}",
                c.len()
            )));
        }
        Ok(Self { components })
    }

    pub fn period(&self) -> usize {
        self.components.len()
    }

    /// Length `B` shared by every component.
    pub fn block_count(&self) -> usize {
        self.components[0].len()
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i]
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }
}

/// Splits `x` into `period` components. The length of `x` must be a multiple
/// of `period`; callers that need padding must pad explicitly.
pub fn dcd_decompose(x: &[f64], period: usize) -> Result<PolyphaseFrame> {
    if period == 0 {
        return Err(Error::invalid("period", "must be at least 1"));
    }
    if !x.len().is_multiple_of(period) {
        return Err(Error::LengthMismatch(format!(
            "sequence length {} is not a multiple of the period {period}",
            x.len()
        )));
    }
    let blocks = x.len() / period;
    let components = (0..period)
        .map(|i| (0..blocks).map(|n| x[n * period + i]).collect())
        .collect();
    Ok(PolyphaseFrame { components })
}

/// Inverse of [`dcd_decompose`]: `out[m] = component[m % N0][m / N0]`.
pub fn dcd_reconstruct(frame: &PolyphaseFrame) -> Vec<f64> {
    let period = frame.period();
    let blocks = frame.block_count();
    let mut out = Vec::with_capacity(period * blocks);
    for n in 0..blocks {
        for c in &frame.components {
            out.push(c[n]);
        }
    }
    out
}
