//! Periodic autocorrelation of cyclostationary noise.
//!
//! `c(n, l) = E{w[n + l] w[n]}` is periodic in `n` with period `N_noise` and is
//! stored for non-negative lags `0 <= l < support` only. Negative lags follow
//! from the definition: `c(n, -l) = c(n - l, l)`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics;

/// One Katayama noise class: `A |sin(pi n / N + theta)|^kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseClass {
    pub magnitude: f64,
    pub exponent: f64,
    /// Radians.
    pub phase: f64,
}

impl NoiseClass {
    pub fn from_degrees(magnitude: f64, exponent: f64, phase_deg: f64) -> Self {
        Self {
            magnitude,
            exponent,
            phase: phase_deg.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KatayamaParams {
    pub classes: Vec<NoiseClass>,
    /// Lag decay constant `alpha_1`, seconds.
    pub decay: f64,
    /// Sampling interval, seconds.
    pub sample_interval: f64,
    /// Samples per noise cycle, `N_noise`.
    pub period: usize,
}

impl KatayamaParams {
    /// Three-class parameter set of a typical residential measurement
    /// (magnitudes 0.23 / 1.38 / 7.17).
    pub fn kata1(period: usize, sample_interval: f64) -> Self {
        Self {
            classes: vec![
                NoiseClass::from_degrees(0.23, 0.0, 0.0),
                NoiseClass::from_degrees(1.38, 1.91, -6.0),
                NoiseClass::from_degrees(7.17, 1.57e5, -35.0),
            ],
            decay: 1.2e-5,
            sample_interval,
            period,
        }
    }

    /// Second residential parameter set (magnitudes 0.13 / 2.8 / 16).
    pub fn kata2(period: usize, sample_interval: f64) -> Self {
        Self {
            classes: vec![
                NoiseClass::from_degrees(0.13, 0.0, 0.0),
                NoiseClass::from_degrees(2.8, 9.3, 128.0),
                NoiseClass::from_degrees(16.0, 5.3e3, 161.0),
            ],
            decay: 8.9e-6,
            sample_interval,
            period,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::invalid("classes", "at least one noise class is required"));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if !(c.magnitude >= 0.0 && c.magnitude.is_finite()) {
                return Err(Error::invalid(
                    format!("classes[{i}].magnitude"),
                    "must be finite and >= 0",
                ));
            }
            if !(c.exponent >= 0.0 && c.exponent.is_finite()) {
                return Err(Error::invalid(
                    format!("classes[{i}].exponent"),
                    "must be finite and >= 0",
                ));
            }
            if !c.phase.is_finite() {
                return Err(Error::invalid(format!("classes[{i}].phase"), "must be finite"));
            }
        }
        if self.classes.iter().all(|c| c.magnitude == 0.0) {
            return Err(Error::Degenerate("all Katayama class magnitudes are zero".into()));
        }
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(Error::invalid("decay", "must be > 0"));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(Error::invalid("sample_interval", "must be > 0"));
        }
        if self.period == 0 {
            return Err(Error::invalid("period", "must be at least 1"));
        }
        Ok(())
    }

    /// Instantaneous noise power profile at time index `n` (lag 0).
    pub fn power_profile(&self, n: usize) -> f64 {
        let x = PI * n as f64 / self.period as f64;
        self.classes
            .iter()
            .map(|c| {
                let s = (x + c.phase).sin().abs();
                // 0^0 := 1, so a zero-exponent class is a constant floor.
                let p = if c.exponent == 0.0 { 1.0 } else { s.powf(c.exponent) };
                c.magnitude * p
            })
            .sum()
    }

    /// Lag weighting `1 / (1 + (2 pi l T / alpha)^2)`.
    pub fn lag_envelope(&self, lag: usize) -> f64 {
        let x = 2.0 * PI * lag as f64 * self.sample_interval / self.decay;
        1.0 / (1.0 + x * x)
    }

    /// Smallest lag whose envelope is below `rel` (relative to lag 0).
    pub fn envelope_support(&self, rel: f64) -> usize {
        // 1 / (1 + (beta l)^2) < rel  <=>  l > sqrt(1/rel - 1) / beta
        let beta = 2.0 * PI * self.sample_interval / self.decay;
        let l = ((1.0 / rel - 1.0).max(0.0)).sqrt() / beta;
        let mut lag = l.floor() as usize;
        while self.lag_envelope(lag) >= rel {
            lag += 1;
        }
        lag.max(1)
    }
}

/// Nassar filter-bank model: the noise at time `n` is the output of filter
/// `I[n]`, where `I` selects a filter per interval of the noise period.
#[derive(Debug, Clone, PartialEq)]
pub struct NassarParams {
    filters: Vec<Vec<f64>>,
    boundaries: Vec<usize>,
    selector: Vec<usize>,
}

impl NassarParams {
    /// `boundaries` is `0 = n_0 < n_1 < ... < n_M = N_noise`; filter `i` is
    /// active for `n_i <= n % N_noise < n_{i+1}`.
    pub fn new(filters: Vec<Vec<f64>>, boundaries: Vec<usize>) -> Result<Self> {
        if filters.is_empty() {
            return Err(Error::invalid("filters", "at least one filter is required"));
        }
        for (i, h) in filters.iter().enumerate() {
            if h.is_empty() {
                return Err(Error::invalid(format!("filters[{i}]"), "filter is empty"));
            }
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("filters[{i}]"), "taps must be finite"));
            }
        }
        if boundaries.len() != filters.len() + 1 {
            return Err(Error::invalid(
                "boundaries",
                format!("expected {} entries for {} filters", filters.len() + 1, filters.len()),
            ));
        }
        if boundaries[0] != 0 {
            return Err(Error::invalid("boundaries", "first boundary must be 0"));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("boundaries", "must be strictly increasing"));
        }
        let period = *boundaries.last().unwrap();
        let mut selector = vec![0; period];
        for (i, w) in boundaries.windows(2).enumerate() {
            selector[w[0]..w[1]].fill(i);
        }
        Ok(Self {
            filters,
            boundaries,
            selector,
        })
    }

    /// White noise of the given variance with period 1.
    pub fn white(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid("variance", "must be > 0"));
        }
        Self::new(vec![vec![variance.sqrt()]], vec![0, 1])
    }

    pub fn period(&self) -> usize {
        self.selector.len()
    }

    pub fn filters(&self) -> &[Vec<f64>] {
        &self.filters
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// Index of the filter active at time `n`.
    pub fn filter_index(&self, n: i64) -> usize {
        self.selector[n.rem_euclid(self.period() as i64) as usize]
    }

    fn max_len(&self) -> usize {
        self.filters.iter().map(Vec::len).max().unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicAutocorrelation {
    period: usize,
    support: usize,
    /// Row-major `period x support`.
    table: Vec<f64>,
}

impl CyclicAutocorrelation {
    /// `rows[n][l] = c(n, l)`; all rows must have the same nonzero length.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("autocorrelation", "no rows"));
        }
        let support = rows[0].len();
        if support == 0 {
            return Err(Error::invalid("autocorrelation", "support must be at least 1"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != support) {
            return Err(Error::LengthMismatch(format!(
                "autocorrelation row {i} has length {}, expected {support}",
                rows[i].len()
            )));
        }
        let period = rows.len();
        let table: Vec<f64> = rows.into_iter().flatten().collect();
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("autocorrelation", "values must be finite"));
        }
        Ok(Self { period, support, table })
    }

    /// Stationary white noise `c(n, l) = variance * delta[l]`.
    pub fn white(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid("variance", "must be > 0"));
        }
        Self::from_rows(vec![vec![variance]])
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// Number of stored lags, `L_corr`.
    pub fn support(&self) -> usize {
        self.support
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.table[n * self.support..(n + 1) * self.support]
    }

    /// `c(n, l)` for any integer `n` and `l`; zero outside the support.
    pub fn get(&self, n: i64, l: i64) -> f64 {
        let (n, l) = if l < 0 { (n + l, -l) } else { (n, l) };
        if l as usize >= self.support {
            return 0.0;
        }
        let n = n.rem_euclid(self.period as i64) as usize;
        self.table[n * self.support + l as usize]
    }

    /// Time-averaged lag-0 power `(1/N) sum_n c(n, 0)`.
    pub fn mean_power(&self) -> f64 {
        (0..self.period).map(|n| self.row(n)[0]).sum::<f64>() / self.period as f64
    }

    pub fn peak(&self) -> f64 {
        self.table.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Keeps lags `0..support`; longer supports are zero-extended.
    pub fn truncated(&self, support: usize) -> Self {
        let support = support.max(1);
        let table = (0..self.period)
            .flat_map(|n| (0..support).map(move |l| self.get(n as i64, l as i64)))
            .collect();
        Self {
            period: self.period,
            support,
            table,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            period: self.period,
            support: self.support,
            table: self.table.iter().map(|v| v * factor).collect(),
        }
    }

    /// Re-expresses the table over a period that is a multiple of the own period.
    pub fn with_period(&self, period: usize) -> Result<Self> {
        if period == 0 || !period.is_multiple_of(self.period) {
            return Err(Error::invalid(
                "period",
                format!("{period} is not a multiple of {}", self.period),
            ));
        }
        let table = (0..period).flat_map(|n| self.row(n % self.period).to_vec()).collect();
        Ok(Self {
            period,
            support: self.support,
            table,
        })
    }

    /// CSV with header `n,l,c`, one row per stored entry.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,l,c")?;
        for n in 0..self.period {
            for (l, v) in self.row(n).iter().enumerate() {
                writeln!(out, "{n},{l},{v:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Katayama autocorrelation truncated to `support` lags.
pub fn katayama_autocorrelation(p: &KatayamaParams, support: usize) -> Result<CyclicAutocorrelation> {
    p.validate()?;
    if support == 0 {
        return Err(Error::invalid("support", "must be at least 1"));
    }
    let rows = (0..p.period)
        .map(|n| {
            let a = p.power_profile(n);
            (0..support).map(|l| a * p.lag_envelope(l)).collect()
        })
        .collect();
    CyclicAutocorrelation::from_rows(rows)
}

/// Exact autocorrelation of the Nassar model,
/// `c(n, l) = sum_m h_{I[n+l]}[m] h_{I[n]}[m - l]`, with support equal to the
/// longest filter.
pub fn nassar_autocorrelation(p: &NassarParams) -> CyclicAutocorrelation {
    let support = p.max_len();
    let rows = (0..p.period())
        .map(|n| {
            let h0 = &p.filters[p.filter_index(n as i64)];
            (0..support)
                .map(|l| {
                    let h1 = &p.filters[p.filter_index((n + l) as i64)];
                    h1.iter()
                        .enumerate()
                        .skip(l)
                        .filter_map(|(m, a)| h0.get(m - l).map(|b| a * b))
                        .sum()
                })
                .collect()
        })
        .collect();
    CyclicAutocorrelation::from_rows(rows).expect("validated filter bank")
}

/// Sample path `w[0..length)` of the Nassar model driven by unit white
/// Gaussian noise from a ChaCha8 stream seeded with `seed`.
pub fn nassar_sample_path(p: &NassarParams, length: usize, seed: u64) -> Vec<f64> {
    let memory = p.max_len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // drive[k] holds v[k - memory]
    let drive: Vec<f64> = (0..length + memory).map(|_| StandardNormal.sample(&mut rng)).collect();
    (0..length)
        .map(|n| {
            let h = &p.filters[p.filter_index(n as i64)];
            h.iter().enumerate().map(|(l, tap)| tap * drive[n + memory - l]).sum()
        })
        .collect()
}

/// Empirical cyclic autocorrelation of a sample path: for each `(n, l)`, the
/// mean of `w[kN + n + l] w[kN + n]` over all complete cycles `k`, and the
/// standard error of that mean.
#[derive(Debug, Clone)]
pub struct EmpiricalAutocorrelation {
    pub mean: CyclicAutocorrelation,
    pub std_error: CyclicAutocorrelation,
    pub cycles: usize,
}

pub fn empirical_autocorrelation(samples: &[f64], period: usize, support: usize) -> Result<EmpiricalAutocorrelation> {
    if period == 0 || support == 0 {
        return Err(Error::invalid("period", "period and support must be positive"));
    }
    let cycles = samples.len().saturating_sub(support - 1) / period;
    if cycles < 2 {
        return Err(Error::invalid("samples", "need at least two complete cycles"));
    }
    let mut mean = Vec::with_capacity(period);
    let mut se = Vec::with_capacity(period);
    for n in 0..period {
        let mut mrow = Vec::with_capacity(support);
        let mut srow = Vec::with_capacity(support);
        for l in 0..support {
            let (mut s, mut s2) = (0.0, 0.0);
            for k in 0..cycles {
                let i = k * period + n;
                let v = samples[i + l] * samples[i];
                s += v;
                s2 += v * v;
            }
            let c = cycles as f64;
            let m = s / c;
            let var = ((s2 - c * m * m) / (c - 1.0)).max(0.0);
            mrow.push(m);
            srow.push((var / c).sqrt());
        }
        mean.push(mrow);
        se.push(srow);
    }
    Ok(EmpiricalAutocorrelation {
        mean: CyclicAutocorrelation::from_rows(mean)?,
        std_error: CyclicAutocorrelation::from_rows(se)?,
        cycles,
    })
}

/// Smallest `L` such that `max_n |c(n, l)| < rel_threshold * peak` for every
/// `l >= L` (at least 1).
pub fn truncate_support(c: &CyclicAutocorrelation, rel_threshold: f64) -> usize {
    let limit = rel_threshold * c.peak();
    (0..c.support())
        .rev()
        .find(|&l| (0..c.period()).any(|n| c.row(n)[l].abs() >= limit))
        .map_or(1, |l| l + 1)
}

/// Covariance of `dim` consecutive noise samples starting at time `offset`:
/// entry `(u, v) = c(v + offset, u - v)`. Banded with bandwidth `support - 1`.
/// Fails with [`Error::Degenerate`] when the matrix is not positive definite
/// to the relative tolerance [`numerics::PD_TOLERANCE`].
pub fn build_noise_covariance(c: &CyclicAutocorrelation, dim: usize, offset: usize) -> Result<DMatrix<f64>> {
    let m = assemble_noise_covariance(c, dim, offset);
    numerics::check_positive_definite(&m, "noise covariance")?;
    Ok(m)
}

/// [`build_noise_covariance`] without the definiteness check, for callers
/// that factor the matrix afterwards and check there.
pub(crate) fn assemble_noise_covariance(c: &CyclicAutocorrelation, dim: usize, offset: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    let band = c.support();
    for v in 0..dim {
        for u in v..dim.min(v + band) {
            let value = c.get((v + offset) as i64, (u - v) as i64);
            m[(u, v)] = value;
            m[(v, u)] = value;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Brute-force Nassar autocorrelation straight from the defining double
    /// sum over the driving noise, independent of the closed form above.
    fn nassar_brute(p: &NassarParams, n: i64, l: i64) -> f64 {
        // w[t] = sum_k h_{I[t]}[t - k] v[k]; E{w[n+l] w[n]} = sum_k h_a[n+l-k] h_b[n-k]
        let ha = &p.filters()[p.filter_index(n + l)];
        let hb = &p.filters()[p.filter_index(n)];
        let tap = |h: &Vec<f64>, i: i64| {
            if i >= 0 {
                h.get(i as usize).copied().unwrap_or(0.0)
            } else {
                0.0
            }
        };
        (n - 20..=n + l + 1).map(|k| tap(ha, n + l - k) * tap(hb, n - k)).sum()
    }

    #[test]
    fn katayama_unit_class() {
        let p = KatayamaParams {
            classes: vec![NoiseClass::from_degrees(1.0, 0.0, 0.0)],
            decay: 1e-5,
            sample_interval: 1e-6,
            period: 8,
        };
        let c = katayama_autocorrelation(&p, 4).unwrap();
        for n in 0..8 {
            assert_eq!(c.get(n, 0), 1.0);
        }
        assert!(p.lag_envelope(1_000_000) < 1e-9);
    }

    #[test]
    fn katayama_kata1_lag0() {
        // independent scalar evaluation: 0.24847638940405964
        let p = KatayamaParams::kata1(6000, 1.0 / 300_000.0);
        let c = katayama_autocorrelation(&p, 2).unwrap();
        assert_relative_eq!(c.get(0, 0), 0.24847638940405964, max_relative = 1e-12);
        assert!((c.get(0, 0) - 0.2485).abs() < 1e-4);
    }

    #[test]
    fn katayama_zero_magnitudes_rejected() {
        let p = KatayamaParams {
            classes: vec![NoiseClass::from_degrees(0.0, 1.0, 0.0)],
            decay: 1e-5,
            sample_interval: 1e-6,
            period: 4,
        };
        assert!(matches!(katayama_autocorrelation(&p, 3), Err(Error::Degenerate(_))));
    }

    #[test]
    fn kata1_truncation_at_300khz() {
        // scan of 1/(1+(2 pi l T/alpha)^2): 1.012e-3 at l = 18, 9.085e-4 at l = 19
        let p = KatayamaParams::kata1(600, 1.0 / 300_000.0);
        let c = katayama_autocorrelation(&p, 64).unwrap();
        assert_eq!(truncate_support(&c, 1e-3), 19);
        assert_eq!(p.envelope_support(1e-3), 19);
    }

    #[test]
    fn nassar_examples() {
        let c = nassar_autocorrelation(&NassarParams::new(vec![vec![1.0]], vec![0, 1]).unwrap());
        assert_eq!(c.support(), 1);
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(0, 3), 0.0);

        let c = nassar_autocorrelation(&NassarParams::new(vec![vec![1.0, 1.0]], vec![0, 1]).unwrap());
        assert_eq!((c.get(0, 0), c.get(0, 1), c.get(0, 2)), (2.0, 1.0, 0.0));

        let p = NassarParams::new(vec![vec![1.0], vec![2.0]], vec![0, 1, 2]).unwrap();
        let c = nassar_autocorrelation(&p);
        assert_eq!((c.get(0, 0), c.get(1, 0)), (1.0, 4.0));
    }

    #[test]
    fn nassar_matches_brute_force() {
        let p = NassarParams::new(
            vec![vec![1.0, -0.5, 0.25], vec![0.3, 2.0], vec![-1.0]],
            vec![0, 2, 5, 7],
        )
        .unwrap();
        let c = nassar_autocorrelation(&p);
        for n in -7..14 {
            for l in -4..5 {
                assert_relative_eq!(c.get(n, l), nassar_brute(&p, n, l), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn nassar_params_validation() {
        assert!(NassarParams::new(vec![], vec![0]).is_err());
        assert!(NassarParams::new(vec![vec![]], vec![0, 1]).is_err());
        assert!(NassarParams::new(vec![vec![1.0], vec![1.0]], vec![0, 2, 2]).is_err());
        assert!(NassarParams::new(vec![vec![1.0]], vec![1, 2]).is_err());
    }

    #[test]
    fn sample_path_is_deterministic() {
        let p = NassarParams::new(vec![vec![1.0, 0.5], vec![2.0]], vec![0, 3, 4]).unwrap();
        assert_eq!(nassar_sample_path(&p, 1000, 42), nassar_sample_path(&p, 1000, 42));
        assert_ne!(nassar_sample_path(&p, 1000, 42), nassar_sample_path(&p, 1000, 43));
    }

    #[test]
    fn sample_path_unit_impulse_power() {
        let p = NassarParams::new(vec![vec![1.0]], vec![0, 1]).unwrap();
        let w = nassar_sample_path(&p, 1_000_000, 7);
        let ms = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((ms - 1.0).abs() < 0.01, "mean square {ms}");
    }

    #[test]
    fn sample_path_two_tap_lag_one() {
        let p = NassarParams::new(vec![vec![1.0, 1.0]], vec![0, 1]).unwrap();
        let w = nassar_sample_path(&p, 200_000, 3);
        let e = empirical_autocorrelation(&w, 1, 3).unwrap();
        let z = (e.mean.get(0, 1) - 1.0) / e.std_error.get(0, 1);
        assert!(z.abs() < 3.0, "z = {z}");
    }

    #[test]
    fn truncation_examples() {
        let delta = CyclicAutocorrelation::from_rows(vec![vec![1.0, 0.0, 0.0]; 3]).unwrap();
        assert_eq!(truncate_support(&delta, 1e-3), 1);
        assert_eq!(truncate_support(&delta, 0.5), 1);

        let geo = CyclicAutocorrelation::from_rows(vec![(0..30).map(|l| 2f64.powi(-l)).collect()]).unwrap();
        assert_eq!(truncate_support(&geo, 1e-3), 10);
    }

    #[test]
    fn negative_lags_and_periodicity() {
        let p = NassarParams::new(vec![vec![1.0, 0.5], vec![2.0, -1.0, 0.5]], vec![0, 2, 5]).unwrap();
        let c = nassar_autocorrelation(&p);
        for n in 0..5i64 {
            for l in 0..3i64 {
                assert_eq!(c.get(n + 5, l), c.get(n, l));
                assert_eq!(c.get(n, -l), c.get(n - l, l));
            }
        }
    }

    #[test]
    fn covariance_examples() {
        let white = CyclicAutocorrelation::white(2.0).unwrap();
        let m = build_noise_covariance(&white, 3, 0).unwrap();
        assert_eq!(m, DMatrix::identity(3, 3) * 2.0);

        let c = nassar_autocorrelation(&NassarParams::new(vec![vec![1.0, 1.0]], vec![0, 1]).unwrap());
        let m = build_noise_covariance(&c, 3, 0).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
        assert_eq!(m, expected);
    }

    #[test]
    fn covariance_is_symmetric_and_banded() {
        let p = NassarParams::new(vec![vec![1.0, 0.4, 0.1], vec![0.5, -0.2]], vec![0, 3, 7]).unwrap();
        let c = nassar_autocorrelation(&p);
        for offset in [0, 2, 9] {
            let m = build_noise_covariance(&c, 12, offset).unwrap();
            assert_eq!(m, m.transpose());
            for u in 0..12usize {
                for v in 0..12usize {
                    if u.abs_diff(v) >= c.support() {
                        assert_eq!(m[(u, v)], 0.0);
                    } else {
                        assert_eq!(m[(u, v)], c.get((v + offset) as i64, u as i64 - v as i64));
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_covariance_rejected() {
        // c(n, 1) = c(n, 0): perfectly correlated neighbours
        let c = CyclicAutocorrelation::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        assert!(matches!(build_noise_covariance(&c, 4, 0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn csv_export() {
        let c = CyclicAutocorrelation::from_rows(vec![vec![1.0, 0.5], vec![2.0, 0.25]]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "n,l,c");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("1,1,2.5"));
    }
}
