//! Slow fading: the channel is drawn once per transmission from an ensemble
//! and the transmitter, lacking channel knowledge, uses a fixed input
//! covariance. Outage is the event that the realized rate does not exceed the
//! target.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::capacity_time::{log_det_rate, whitened_channel};
use crate::channel::{synth_lptv_channel, ChannelInstance, GeneratorSpec, LptvFilter};
use crate::error::{Error, Result};
use crate::noise::CyclicAutocorrelation;

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    /// Every trial sees the same filter.
    Fixed(LptvFilter),
    /// Jittered generator output truncated to a fixed number of taps, so the
    /// block geometry is the same for every realization.
    Generator { spec: GeneratorSpec, memory: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub source: ChannelSource,
    pub noise: CyclicAutocorrelation,
    /// Block count `K` of the evaluated MIMO channel.
    pub k: usize,
    pub seed: u64,
}

impl Ensemble {
    /// Seed of trial `i`, independent of evaluation order.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        // splitmix64 finalizer
        let mut z = self
            .seed
            .wrapping_add((trial as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn realization(&self, trial: usize) -> Result<LptvFilter> {
        match &self.source {
            ChannelSource::Fixed(f) => Ok(f.clone()),
            ChannelSource::Generator { spec, memory } => {
                Ok(synth_lptv_channel(spec, self.trial_seed(trial))?.truncated(*memory))
            }
        }
    }

    /// Input dimension `N = K N_lcm` shared by all realizations.
    pub fn block_len(&self) -> Result<usize> {
        let f = self.realization(0)?;
        Ok(self.k * ChannelInstance::new(f, self.noise.clone()).lcm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEstimate {
    pub probability: f64,
    pub trials: usize,
    pub outages: usize,
    /// 95% normal-approximation half-width, `1.96 sqrt(p (1 - p) / trials)`.
    pub half_width: f64,
    pub target_rate: f64,
}

impl OutageEstimate {
    pub fn from_counts(outages: usize, trials: usize, target_rate: f64) -> Self {
        let p = outages as f64 / trials as f64;
        Self {
            probability: p,
            trials,
            outages,
            half_width: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
            target_rate,
        }
    }
}

/// `(1 / 2N) log2 det(I + G_w C_xx G_w^T)` for one channel realization.
pub fn fading_rate(cxx: &DMatrix<f64>, filter: &LptvFilter, noise: &CyclicAutocorrelation, k: usize) -> Result<f64> {
    let ch = ChannelInstance::new(filter.clone(), noise.clone());
    let a = whitened_channel(&ch, k)?;
    log_det_rate(&a, cxx)
}

/// Realized rates of the first `trials` ensemble members, in trial order.
pub fn fading_rates(ensemble: &Ensemble, cxx: &DMatrix<f64>, trials: usize) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    (0..trials)
        .into_par_iter()
        .map(|t| fading_rate(cxx, &ensemble.realization(t)?, &ensemble.noise, ensemble.k))
        .collect()
}

/// Fraction of `rates` at or below `target`.
pub fn outage_from_rates(rates: &[f64], target: f64) -> OutageEstimate {
    let outages = rates.iter().filter(|&&r| r <= target).count();
    OutageEstimate::from_counts(outages, rates.len(), target)
}

pub fn outage_probability_mc(
    ensemble: &Ensemble,
    cxx: &DMatrix<f64>,
    target: f64,
    trials: usize,
) -> Result<OutageEstimate> {
    Ok(outage_from_rates(&fading_rates(ensemble, cxx, trials)?, target))
}

/// Outage of the isotropic input `rho I`, an upper bound on the outage
/// probability achievable without channel knowledge.
pub fn outage_upper_bound_mc(ensemble: &Ensemble, rho: f64, target: f64, trials: usize) -> Result<OutageEstimate> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid("rho", "average power must be positive and finite"));
    }
    let n = ensemble.block_len()?;
    outage_probability_mc(ensemble, &(DMatrix::identity(n, n) * rho), target, trials)
}

/// Outage estimates at each target over one shared set of realizations.
pub fn outage_curve(rates: &[f64], targets: &[f64]) -> Vec<OutageEstimate> {
    targets.iter().map(|&t| outage_from_rates(rates, t)).collect()
}

/// CSV with header `target_rate,probability,half_width`.
pub fn write_outage_csv<W: Write>(curve: &[OutageEstimate], mut out: W) -> std::io::Result<()> {
    writeln!(out, "target_rate,probability,half_width")?;
    for e in curve {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e}",
            e.target_rate, e.probability, e.half_width
        )?;
    }
    Ok(())
}
