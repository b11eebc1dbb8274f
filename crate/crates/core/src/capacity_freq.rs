//! Capacity as an integral over the block-DTFT spectrum.
//!
//! Stacking `N0 = K_min N_lcm` consecutive samples turns the channel into a
//! two-tap MIMO filter `H(w) = H[0] + H[1] e^{-jw}` and the noise into a
//! stationary vector process whose correlation vanishes beyond lag one, with
//! spectrum `S(w) = sum_{l=-1..1} C(l) e^{-jwl}`. Capacity waterfills the
//! eigenvalues of `Sigma(w) = H(w)^H S(w)^{-1} H(w)` jointly over `k` and `w`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::capacity_time::{CapacityResult, Method};
use crate::channel::{build_block_taps, ChannelInstance};
use crate::error::{Error, Result};
use crate::noise::CyclicAutocorrelation;
use crate::numerics::{self, clamp_eigenvalues, herm_eigenvalues, log_gain_sum, waterfill_spectral};

pub const DEFAULT_GRID: usize = 1024;

#[derive(Debug, Clone)]
pub struct SpectralGrid {
    /// `w_j = -pi + 2 pi j / J`.
    pub omega: Vec<f64>,
    /// `eigenvalues[j]` holds the `N0` eigenvalues of `Sigma(w_j)`, descending.
    pub eigenvalues: Vec<Vec<f64>>,
    pub block: usize,
    h0: DMatrix<f64>,
    h1: DMatrix<f64>,
    /// `C(-1), C(0), C(1)`.
    corr: [DMatrix<f64>; 3],
}

impl SpectralGrid {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// `H(w) = H[0] + H[1] e^{-jw}`.
    pub fn transfer(&self, w: f64) -> DMatrix<Complex64> {
        let z = Complex64::from_polar(1.0, -w);
        self.h0.map(Complex64::from) + self.h1.map(|v| z * v)
    }

    /// `S(w) = C(-1) e^{jw} + C(0) + C(1) e^{-jw}`.
    pub fn noise_spectrum(&self, w: f64) -> DMatrix<Complex64> {
        let z = Complex64::from_polar(1.0, -w);
        let [cm, c0, cp] = &self.corr;
        c0.map(Complex64::from) + cm.map(|v| z.conj() * v) + cp.map(|v| z * v)
    }

    /// Block noise correlation `C(l)` for `|l| <= 1`, zero otherwise.
    pub fn noise_correlation(&self, l: i64) -> DMatrix<f64> {
        match l {
            -1..=1 => self.corr[(l + 1) as usize].clone(),
            _ => DMatrix::zeros(self.block, self.block),
        }
    }

    /// Eigenvalues of `Sigma(w)` at an arbitrary frequency.
    pub fn sigma_eigenvalues(&self, w: f64) -> Result<Vec<f64>> {
        let s = self.noise_spectrum(w);
        numerics::check_positive_definite_herm(&s, &format!("noise spectrum at w = {w:.6}"))?;
        let chol = s
            .cholesky()
            .ok_or_else(|| Error::Degenerate(format!("noise spectrum at w = {w:.6} is not positive definite")))?;
        let b = chol
            .l()
            .solve_lower_triangular(&self.transfer(w))
            .ok_or_else(|| Error::Degenerate(format!("singular noise spectrum at w = {w:.6}")))?;
        herm_eigenvalues(&(b.adjoint() * b))
    }
}

/// `C(l)` for the stacked noise: entry `(u, v) = c(v, l N0 + u - v)`.
pub fn block_noise_correlation(noise: &CyclicAutocorrelation, n0: usize, l: i64) -> DMatrix<f64> {
    DMatrix::from_fn(n0, n0, |u, v| noise.get(v as i64, l * n0 as i64 + u as i64 - v as i64))
}

pub fn build_spectral_grid(ch: &ChannelInstance, j: usize) -> Result<SpectralGrid> {
    if j < 16 || !j.is_multiple_of(2) {
        return Err(Error::invalid("grid", format!("J = {j} must be even and at least 16")));
    }
    let n0 = ch.block();
    let (h0, h1) = build_block_taps(ch);
    let corr = [-1, 0, 1].map(|l| block_noise_correlation(ch.noise(), n0, l));
    let omega: Vec<f64> = (0..j).map(|i| -PI + 2.0 * PI * i as f64 / j as f64).collect();
    let mut grid = SpectralGrid {
        omega,
        eigenvalues: Vec::new(),
        block: n0,
        h0,
        h1,
        corr,
    };
    let mut eigenvalues = grid
        .omega
        .par_iter()
        .map(|&w| grid.sigma_eigenvalues(w))
        .collect::<Result<Vec<_>>>()?;
    // One floor for the whole grid so that isolated spectral nulls are zeros.
    let mut flat: Vec<f64> = eigenvalues.iter().flatten().copied().collect();
    clamp_eigenvalues(&mut flat);
    for (row, chunk) in eigenvalues.iter_mut().zip(flat.chunks(n0)) {
        row.copy_from_slice(chunk);
    }
    grid.eigenvalues = eigenvalues;
    Ok(grid)
}

/// Waterfilled rate over a spectral grid with power budget `rho` per sample.
pub fn capacity_from_grid(grid: &SpectralGrid, rho: f64) -> Result<CapacityResult> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid("rho", "average power must be positive and finite"));
    }
    let waterlevel = waterfill_spectral(&grid.eigenvalues, rho * grid.block as f64)?;
    let eigenvalues: Vec<f64> = grid.eigenvalues.iter().flatten().copied().collect();
    let rate = log_gain_sum(&eigenvalues, waterlevel) / (2 * eigenvalues.len()) as f64;
    Ok(CapacityResult {
        rate,
        raw_rate: rate,
        waterlevel,
        eigenvalues,
        method: Method::Thm2,
        block: grid.len(),
        converged: true,
    })
}

pub fn capacity_thm2(ch: &ChannelInstance, rho: f64, j: usize) -> Result<CapacityResult> {
    capacity_from_grid(&build_spectral_grid(ch, j)?, rho)
}
