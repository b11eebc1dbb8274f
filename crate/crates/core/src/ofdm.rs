//! Time-frequency OFDM baseline: the joint period is cut into `N_p` time
//! cells, each carrying one OFDM symbol of `N_sc` subcarriers plus `N_cp`
//! prefix samples, and power is waterfilled over the per-cell SNRs.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::ChannelInstance;
use crate::error::{Error, Result};
use crate::numerics::{log_gain_sum, waterfill};

pub const DEFAULT_TIME_CELLS: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct TfOfdmGrid {
    pub n_p: usize,
    pub n_sc: usize,
    pub n_cp: usize,
    pub n_sym: usize,
    /// Samples the cells are cut from: the smallest multiple of `N_lcm` whose
    /// cells fit the prefix and at least one subcarrier.
    pub frame_len: usize,
    /// `gamma[m][k]`, `N_p x N_sc`.
    pub gamma: Vec<Vec<f64>>,
}

impl TfOfdmGrid {
    /// CSV with header `m,k,gamma`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "m,k,gamma")?;
        for (m, row) in self.gamma.iter().enumerate() {
            for (k, g) in row.iter().enumerate() {
                writeln!(out, "{m},{k},{g:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Frame length (a multiple of `lcm`) and symbol length for `n_p` cells.
fn frame_layout(lcm: usize, n_p: usize, n_cp: usize) -> (usize, usize) {
    let need = n_cp + 2;
    let mut q = 1;
    while (q * lcm) / n_p < need {
        q += 1;
    }
    (q * lcm, q * lcm / n_p)
}

pub fn build_tf_grid(ch: &ChannelInstance, n_p: usize, n_cp: usize) -> Result<TfOfdmGrid> {
    if n_p == 0 {
        return Err(Error::invalid("n_p", "at least one time cell is required"));
    }
    let l_isi = ch.filter().memory();
    if n_cp + 1 < l_isi {
        return Err(Error::invalid(
            "n_cp",
            format!(
                "prefix {n_cp} is shorter than the channel memory minus one ({})",
                l_isi - 1
            ),
        ));
    }
    let (frame_len, n_sym) = frame_layout(ch.lcm(), n_p, n_cp);
    let n_sc = (n_sym - n_cp) / 2;
    let gamma = (0..n_p)
        .into_par_iter()
        .map(|m| cell_snr(ch, m * n_sym, n_sym, n_sc))
        .collect();
    Ok(TfOfdmGrid {
        n_p,
        n_sc,
        n_cp,
        n_sym,
        frame_len,
        gamma,
    })
}

/// Per-bin SNRs of the cell `[start, start + len)` at the bin centres
/// `w_k = pi (2k + 1) / (2 n_sc)`. Centred bins are genuinely complex, so the
/// `n_sc` subcarriers span exactly `2 n_sc` real dimensions; bins at `0` and
/// `pi` would each carry only one.
fn cell_snr(ch: &ChannelInstance, start: usize, len: usize, n_sc: usize) -> Vec<f64> {
    let filter = ch.filter();
    let noise = ch.noise();
    let memory = filter.memory();
    let support = noise.support().min(len);
    // Lag profile of the noise seen inside the cell; pairs leaving the cell
    // are dropped, which keeps the transform nonnegative.
    let lag_profile: Vec<f64> = (0..support)
        .map(|l| {
            (start..start + len - l)
                .map(|n| noise.get(n as i64, l as i64))
                .sum::<f64>()
                / len as f64
        })
        .collect();
    (0..n_sc)
        .map(|k| {
            let w = PI * (2 * k + 1) as f64 / (2 * n_sc) as f64;
            // Geometric mean of the magnitude over the cell: an arithmetic
            // mean overstates what a time-varying gain can carry.
            let log_gain = (start..start + len)
                .map(|n| {
                    (0..memory)
                        .map(|l| Complex64::from_polar(filter.tap(n as i64, l as i64), -w * l as f64))
                        .sum::<Complex64>()
                        .norm()
                        .ln()
                })
                .sum::<f64>()
                / len as f64;
            let gain = log_gain.exp();
            let power = lag_profile[0]
                + 2.0
                    * lag_profile[1..]
                        .iter()
                        .enumerate()
                        .map(|(i, c)| c * (w * (i + 1) as f64).cos())
                        .sum::<f64>();
            if gain == 0.0 || !(power > 0.0) {
                0.0
            } else {
                gain * gain / power
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfOfdmRate {
    /// Bits per channel use, averaged over the frame.
    pub rate: f64,
    pub waterlevel: f64,
}

/// Waterfills `rho` (mean power per cell) over the cell SNRs.
pub fn tf_ofdm_solution(grid: &TfOfdmGrid, rho: f64) -> Result<TfOfdmRate> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid("rho", "average power must be positive and finite"));
    }
    let cells: Vec<f64> = grid.gamma.iter().flatten().copied().collect();
    if cells.is_empty() {
        return Err(Error::invalid("gamma", "grid has no cells"));
    }
    let alloc = waterfill(&cells, rho * cells.len() as f64)?;
    Ok(TfOfdmRate {
        rate: log_gain_sum(&cells, alloc.waterlevel) / grid.frame_len as f64,
        waterlevel: alloc.waterlevel,
    })
}

pub fn tf_ofdm_rate(grid: &TfOfdmGrid, rho: f64) -> Result<f64> {
    Ok(tf_ofdm_solution(grid, rho)?.rate)
}
