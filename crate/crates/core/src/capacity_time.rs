//! Finite-block rates `R_K` of the equivalent MIMO channel and their limit in
//! `K`.
//!
//! A block of `N = K N_lcm` inputs produces `M = N - L + 1` outputs that do not
//! depend on the previous block. With the noise covariance `C = L L^T`
//! (Cholesky), the whitened channel `A = L^{-1} G` differs from
//! `C^{-1/2} G` by an orthogonal factor on the left, so `A^T A` is exactly
//! `Gamma = G_w^T G_w` and every log-determinant is unchanged.

use std::fmt;

use log::warn;
use nalgebra::DMatrix;

use crate::channel::{build_channel_matrix, ChannelInstance, LptvFilter};
use crate::error::{Error, Result};
use crate::noise::{assemble_noise_covariance, katayama_autocorrelation, KatayamaParams};
use crate::numerics::{self, clamp_eigenvalues, log_gain_sum, sym_eigenvalues, sym_evd, waterfill, PD_TOLERANCE};

/// Default stopping tolerance of [`capacity_thm1_converged`], bits per use.
pub const DEFAULT_TOL: f64 = 1e-4;

const ROMBERG_DEPTH: usize = 2;

/// Default truncation thresholds of [`katayama_capacity`].
pub const DEFAULT_THRESHOLDS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Two successive truncations closer than this are reported as stable.
pub const STABILITY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Finite-block MIMO rate.
    Thm1,
    /// Block-DTFT integral.
    Thm2,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Thm1 => "thm1",
            Method::Thm2 => "thm2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    /// Bits per real channel use. For [`capacity_thm1_converged`] this is
    /// the extrapolated limit; otherwise it equals `raw_rate`.
    pub rate: f64,
    /// `(1 / 2 len) sum_k (log2(waterlevel * lambda_k))^+` over `eigenvalues`.
    pub raw_rate: f64,
    pub waterlevel: f64,
    /// Spectrum of `Gamma` padded with zeros to `N` entries (time domain), or
    /// every sampled `lambda_k(w_j)` flattened frequency-major (spectral).
    pub eigenvalues: Vec<f64>,
    pub method: Method,
    /// `K` for the time-domain method, the grid size `J` for the spectral one.
    pub block: usize,
    pub converged: bool,
}

impl CapacityResult {
    /// Rate recomputed from the stored waterlevel and eigenvalues.
    pub fn recompute_rate(&self) -> f64 {
        if self.eigenvalues.is_empty() {
            return 0.0;
        }
        log_gain_sum(&self.eigenvalues, self.waterlevel) / (2 * self.eigenvalues.len()) as f64
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid("rho", "average power must be positive and finite"));
    }
    Ok(())
}

/// Whitened `M x N` block channel `A` with `A^T A = G^T C^{-1} G`.
pub fn whitened_channel(ch: &ChannelInstance, k: usize) -> Result<DMatrix<f64>> {
    let g = build_channel_matrix(ch, k)?;
    let c = assemble_noise_covariance(ch.noise(), g.nrows(), ch.memory() - 1);
    whiten(&c, g)
}

pub(crate) fn whiten(c: &DMatrix<f64>, g: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = c.diagonal().amax();
    let chol = c
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Degenerate("noise covariance is not positive definite".into()))?;
    // Every Cholesky pivot bounds the smallest eigenvalue from above.
    let smallest_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, d| m.min(d * d));
    if !(scale > 0.0) || smallest_pivot <= PD_TOLERANCE * scale {
        return Err(Error::Degenerate(format!(
            "noise covariance is not positive definite (pivot {smallest_pivot:e}, scale {scale:e})"
        )));
    }
    let l = chol.l();
    l.solve_lower_triangular(&g)
        .ok_or_else(|| Error::Degenerate("singular noise covariance factor".into()))
}

/// Nonzero part of the `Gamma` spectrum from the smaller Gram matrix
/// `A A^T`, padded with zeros to `A.ncols()` entries.
fn gamma_spectrum(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let gram = a * a.transpose();
    let mut values = sym_eigenvalues(&gram)?;
    values.resize(a.ncols(), 0.0);
    clamp_eigenvalues(&mut values);
    Ok(values)
}

/// Waterfilled rate over the block eigenvalues with budget `len * rho`.
fn block_rate(eigenvalues: Vec<f64>, rho: f64, method: Method, block: usize) -> Result<CapacityResult> {
    let n = eigenvalues.len();
    let alloc = waterfill(&eigenvalues, n as f64 * rho)?;
    let rate = log_gain_sum(&eigenvalues, alloc.waterlevel) / (2 * n) as f64;
    Ok(CapacityResult {
        rate,
        raw_rate: rate,
        waterlevel: alloc.waterlevel,
        eigenvalues,
        method,
        block,
        converged: true,
    })
}

/// `R_K` for a block of `K > K_min` joint periods.
pub fn capacity_thm1(ch: &ChannelInstance, rho: f64, k: usize) -> Result<CapacityResult> {
    check_rho(rho)?;
    let a = whitened_channel(ch, k)?;
    block_rate(gamma_spectrum(&a)?, rho, Method::Thm1, k)
}

/// Limit of `R_K` over the schedule `K = K0, 2 K0, 4 K0, ...` with
/// `K0 = K_min + 1`, stopping at `k_max`.
///
/// The edge loss of a block behaves like `a/N + b/N^2 + ...`, so the raw rates
/// are Romberg-extrapolated up to second order. The search stops once two raw
/// rates or two successive best estimates are within `tol`; `rate` is the last
/// best estimate and `raw_rate`, `waterlevel`, `eigenvalues`, `block`
/// describe the largest block evaluated.
pub fn capacity_thm1_converged(ch: &ChannelInstance, rho: f64, tol: f64, k_max: usize) -> Result<CapacityResult> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let k0 = ch.k_min() + 1;
    if k_max < k0 {
        return Err(Error::invalid("k_max", format!("must be at least K_min + 1 = {k0}")));
    }
    let mut current = capacity_thm1(ch, rho, k0)?;
    // Romberg row of the latest block size, levels 0..=ROMBERG_DEPTH.
    let mut row = vec![current.raw_rate];
    let mut estimate: Option<f64> = None;
    let mut converged = false;
    let mut k = k0;
    while 2 * k <= k_max {
        k *= 2;
        let next = capacity_thm1(ch, rho, k)?;
        let step = next.raw_rate - current.raw_rate;
        let mut next_row = vec![next.raw_rate];
        for m in 1..=row.len().min(ROMBERG_DEPTH) {
            let t = next_row[m - 1];
            next_row.push(t + (t - row[m - 1]) / ((1u64 << m) - 1) as f64);
        }
        let best = *next_row.last().expect("row is nonempty");
        let settled = estimate.is_some_and(|e| (best - e).abs() < tol);
        estimate = Some(best);
        row = next_row;
        current = next;
        if step.abs() < tol || settled {
            converged = true;
            break;
        }
    }
    current.rate = estimate.unwrap_or(current.raw_rate).max(0.0);
    current.converged = converged;
    Ok(current)
}

/// Optimal input covariance `V diag(p) V^T` of the `N x N` block, where `V`
/// diagonalizes `Gamma` and `p` is its waterfilling allocation.
pub fn optimal_input_covariance(ch: &ChannelInstance, rho: f64, k: usize) -> Result<DMatrix<f64>> {
    check_rho(rho)?;
    let a = whitened_channel(ch, k)?;
    let gamma = a.transpose() * &a;
    let evd = sym_evd(&gamma)?;
    let mut values = evd.values.clone();
    clamp_eigenvalues(&mut values);
    let alloc = waterfill(&values, values.len() as f64 * rho)?;
    let mut scaled = evd.vectors.clone();
    for (j, p) in alloc.powers.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*p);
    }
    let c = scaled * evd.vectors.transpose();
    Ok((&c + c.transpose()) * 0.5)
}

/// `(1 / 2N) log2 det(I + A C_xx A^T)` for a whitened block channel `A`.
pub fn log_det_rate(a: &DMatrix<f64>, cxx: &DMatrix<f64>) -> Result<f64> {
    let n = a.ncols();
    if cxx.nrows() != n || cxx.ncols() != n {
        return Err(Error::LengthMismatch(format!(
            "input covariance is {}x{}, expected {n}x{n}",
            cxx.nrows(),
            cxx.ncols()
        )));
    }
    let m = a.nrows();
    let inner = DMatrix::identity(m, m) + a * cxx * a.transpose();
    Ok(numerics::log2_det_spd((&inner + inner.transpose()) * 0.5)? / (2 * n) as f64)
}

/// One threshold of a Katayama truncation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationStep {
    pub threshold: f64,
    /// `L_corr` after truncation.
    pub support: usize,
    /// `Err` message when the truncated covariance was rejected.
    pub outcome: std::result::Result<CapacityResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KatayamaCapacity {
    pub steps: Vec<TruncationStep>,
    /// Result of the last accepted threshold.
    pub last: CapacityResult,
    /// The last two accepted thresholds differ by less than [`STABILITY_TOL`].
    pub stable: bool,
}

/// Katayama noise truncated at each relative threshold in turn (lags whose
/// envelope falls below the threshold are dropped), each evaluated with
/// [`capacity_thm1_converged`]. Thresholds whose truncated covariance is not
/// positive definite are recorded and skipped.
pub fn katayama_capacity(
    p: &KatayamaParams,
    filter: &LptvFilter,
    rho: f64,
    thresholds: &[f64],
    tol: f64,
    k_max: usize,
) -> Result<KatayamaCapacity> {
    p.validate()?;
    if thresholds.is_empty() {
        return Err(Error::invalid("thresholds", "at least one threshold is required"));
    }
    if thresholds.windows(2).any(|w| !(w[1] < w[0])) || thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::invalid(
            "thresholds",
            "must be strictly decreasing values in (0, 1)",
        ));
    }
    let mut steps = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let support = p.envelope_support(threshold);
        let noise = katayama_autocorrelation(p, support)?;
        let ch = ChannelInstance::new(filter.clone(), noise);
        let outcome = match capacity_thm1_converged(&ch, rho, tol, k_max) {
            Ok(r) => Ok(r),
            Err(e) if e.is_degeneracy() => {
                warn!("skipping truncation threshold {threshold:e}: {e}");
                Err(e.to_string())
            }
            Err(e) => return Err(e),
        };
        steps.push(TruncationStep {
            threshold,
            support,
            outcome,
        });
    }
    let accepted: Vec<&CapacityResult> = steps.iter().filter_map(|s| s.outcome.as_ref().ok()).collect();
    let last = (*accepted
        .last()
        .ok_or_else(|| Error::Degenerate("no truncation threshold gave a positive definite covariance".into()))?)
    .clone();
    let stable = accepted.len() >= 2
        && (accepted[accepted.len() - 1].rate - accepted[accepted.len() - 2].rate).abs() < STABILITY_TOL;
    Ok(KatayamaCapacity { steps, last, stable })
}
