//! LPTV channel taps and the equivalent MIMO channel matrices.

mod io;
mod synth;

pub use io::{load_channel, read_channel, save_channel, write_channel};
pub use synth::{synth_lptv_channel, Branch, GeneratorSpec, Jitter, Modulation};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::noise::CyclicAutocorrelation;

/// Periodic FIR tap table `g[n][l]`, `n` in `[0, period)`, `l` in `[0, memory)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LptvFilter {
    period: usize,
    memory: usize,
    taps: Vec<f64>,
}

impl LptvFilter {
    /// One row of taps per time index in the period.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("taps", "no tap rows"));
        }
        let memory = rows[0].len();
        if memory == 0 {
            return Err(Error::invalid("taps", "rows must hold at least one tap"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != memory) {
            return Err(Error::LengthMismatch(format!(
                "tap row {i} has {} taps, expected {memory}",
                rows[i].len()
            )));
        }
        let period = rows.len();
        let taps: Vec<f64> = rows.into_iter().flatten().collect();
        if taps.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("taps", "values must be finite"));
        }
        Ok(Self { period, memory, taps })
    }

    /// Time-invariant filter with the given impulse response.
    pub fn time_invariant(taps: &[f64]) -> Result<Self> {
        Self::from_rows(vec![taps.to_vec()])
    }

    /// Memoryless constant gain.
    pub fn flat(gain: f64) -> Self {
        Self {
            period: 1,
            memory: 1,
            taps: vec![gain],
        }
    }

    /// `N_ch`.
    pub fn period(&self) -> usize {
        self.period
    }

    /// `L_isi`.
    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.taps[n * self.memory..(n + 1) * self.memory]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.taps.chunks(self.memory)
    }

    /// `g[n, l]` for any time index; zero for `l` outside `[0, memory)`.
    pub fn tap(&self, n: i64, l: i64) -> f64 {
        if l < 0 || l as usize >= self.memory {
            return 0.0;
        }
        let n = n.rem_euclid(self.period as i64) as usize;
        self.taps[n * self.memory + l as usize]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            period: self.period,
            memory: self.memory,
            taps: self.taps.iter().map(|v| v * factor).collect(),
        }
    }

    /// Keeps the first `memory` taps of every row (zero-extends if longer).
    pub fn truncated(&self, memory: usize) -> Self {
        let memory = memory.max(1);
        let taps = (0..self.period)
            .flat_map(|n| (0..memory).map(move |l| self.tap(n as i64, l as i64)))
            .collect();
        Self {
            period: self.period,
            memory,
            taps,
        }
    }

    /// Drops trailing taps that never exceed `rel_threshold` of the peak.
    pub fn truncate_memory(&self, rel_threshold: f64) -> Self {
        let rows: Vec<Vec<f64>> = self.rows().map(<[f64]>::to_vec).collect();
        self.truncated(truncate_channel_memory(&rows, rel_threshold))
    }

    /// Noise-free channel output `y[n] = sum_l g[n, l] x[n - l]` for
    /// `n = 0..x.len()`, with `x[m] = 0` for `m < 0`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|n| {
                (0..self.memory.min(n + 1))
                    .map(|l| self.tap(n as i64, l as i64) * x[n - l])
                    .sum()
            })
            .collect()
    }
}

/// Smallest `L` such that no tap at lag `l >= L` exceeds
/// `rel_threshold * max |g|` (at least 1). A tap equal to the threshold is
/// dropped.
pub fn truncate_channel_memory(impulse: &[Vec<f64>], rel_threshold: f64) -> usize {
    let peak = impulse.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let limit = rel_threshold * peak;
    let longest = impulse.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .rev()
        .find(|&l| impulse.iter().any(|row| row.get(l).is_some_and(|v| v.abs() > limit)))
        .map_or(1, |l| l + 1)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// A channel together with its noise and the block sizes derived from both.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelInstance {
    filter: LptvFilter,
    noise: CyclicAutocorrelation,
    lcm: usize,
    memory: usize,
    k_min: usize,
}

impl ChannelInstance {
    pub fn new(filter: LptvFilter, noise: CyclicAutocorrelation) -> Self {
        let lcm = filter.period() / gcd(filter.period(), noise.period()) * noise.period();
        let memory = filter.memory().max(noise.support());
        let k_min = memory.div_ceil(lcm);
        Self {
            filter,
            noise,
            lcm,
            memory,
            k_min,
        }
    }

    pub fn filter(&self) -> &LptvFilter {
        &self.filter
    }

    pub fn noise(&self) -> &CyclicAutocorrelation {
        &self.noise
    }

    /// `N_lcm`, the joint period of channel and noise.
    pub fn lcm(&self) -> usize {
        self.lcm
    }

    /// `L = max(L_corr, L_isi)`.
    pub fn memory(&self) -> usize {
        self.memory
    }

    /// `K_min = ceil(L / N_lcm)`.
    pub fn k_min(&self) -> usize {
        self.k_min
    }

    /// `N0 = K_min * N_lcm >= L`.
    pub fn block(&self) -> usize {
        self.k_min * self.lcm
    }

    /// Same instance with the taps scaled by `alpha` and the noise
    /// autocorrelation scaled by `alpha^2`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self::new(self.filter.scaled(alpha), self.noise.scaled(alpha * alpha))
    }
}

/// `M x N` matrix of the block channel with `N = K N_lcm` inputs and the last
/// `M = N - L + 1` outputs of each block:
/// `G[u, v] = g_{u+L-1}[L - 1 - v + u]` for `0 <= v - u < L`.
pub fn build_channel_matrix(ch: &ChannelInstance, k: usize) -> Result<DMatrix<f64>> {
    if k <= ch.k_min() {
        return Err(Error::invalid(
            "K",
            format!("block count {k} must exceed K_min = {}", ch.k_min()),
        ));
    }
    let n = k * ch.lcm();
    let l = ch.memory();
    let m = n - l + 1;
    let g = ch.filter();
    let mut out = DMatrix::zeros(m, n);
    for u in 0..m {
        for v in u..u + l {
            out[(u, v)] = g.tap((u + l - 1) as i64, (l - 1 + u) as i64 - v as i64);
        }
    }
    Ok(out)
}

/// Block taps `(H[0], H[1])` of size `N0 x N0` such that the channel acting on
/// polyphase frames of length `N0` is `r[n] = H[0] x[n] + H[1] x[n - 1]`.
pub fn build_block_taps(ch: &ChannelInstance) -> (DMatrix<f64>, DMatrix<f64>) {
    let n0 = ch.block() as i64;
    let l = ch.memory() as i64;
    let g = ch.filter();
    let h0 = DMatrix::from_fn(n0 as usize, n0 as usize, |u, v| {
        let d = u as i64 - v as i64;
        if (0..l).contains(&d) {
            g.tap(u as i64, d)
        } else {
            0.0
        }
    });
    let h1 = DMatrix::from_fn(n0 as usize, n0 as usize, |u, v| {
        let d = u as i64 - v as i64;
        if (1 - n0..l - n0).contains(&d) {
            g.tap(u as i64, n0 + d)
        } else {
            0.0
        }
    });
    (h0, h1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclo::{dcd_decompose, dcd_reconstruct, PolyphaseFrame};
    use crate::noise::{nassar_autocorrelation, NassarParams};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn white() -> CyclicAutocorrelation {
        CyclicAutocorrelation::white(1.0).unwrap()
    }

    /// Small integer-valued random instance so every product is exact.
    fn random_instance(rng: &mut impl Rng) -> ChannelInstance {
        let n_ch = rng.random_range(1..=4);
        let l_isi = rng.random_range(1..=4);
        let rows = (0..n_ch)
            .map(|_| (0..l_isi).map(|_| rng.random_range(-4..=4) as f64).collect())
            .collect();
        let n_noise = rng.random_range(1..=3);
        let l_corr = rng.random_range(1..=3);
        let h = (0..l_corr).map(|_| rng.random_range(1..=3) as f64).collect();
        let noise = nassar_autocorrelation(&NassarParams::new(vec![h], vec![0, n_noise]).unwrap());
        ChannelInstance::new(LptvFilter::from_rows(rows).unwrap(), noise)
    }

    #[test]
    fn derived_sizes() {
        let f = LptvFilter::from_rows(vec![vec![1.0, 0.5, 0.2]; 4]).unwrap();
        let noise = nassar_autocorrelation(&NassarParams::new(vec![vec![1.0; 5], vec![1.0]], vec![0, 3, 6]).unwrap());
        let ch = ChannelInstance::new(f, noise);
        assert_eq!(ch.lcm(), 12);
        assert_eq!(ch.memory(), 5);
        assert_eq!(ch.k_min(), 1);
        assert_eq!(ch.block(), 12);
    }

    #[test]
    fn identity_channel_matrix() {
        let ch = ChannelInstance::new(LptvFilter::flat(1.0), white());
        let g = build_channel_matrix(&ch, 5).unwrap();
        assert_eq!(g, DMatrix::identity(5, 5));
        assert!(build_channel_matrix(&ch, 1).is_err());
    }

    #[test]
    fn two_tap_channel_matrix() {
        let (a, b) = (3.0, 7.0);
        let ch = ChannelInstance::new(LptvFilter::time_invariant(&[a, b]).unwrap(), white());
        // L = 2, N_lcm = 1, K_min = 2; K = 4 gives N = 4
        let g = build_channel_matrix(&ch, 4).unwrap();
        let expected = DMatrix::from_row_slice(3, 4, &[b, a, 0.0, 0.0, 0.0, b, a, 0.0, 0.0, 0.0, b, a]);
        assert_eq!(g, expected);
    }

    #[test]
    fn block_tap_examples() {
        let ch = ChannelInstance::new(LptvFilter::flat(1.0), white().with_period(2).unwrap());
        let (h0, h1) = build_block_taps(&ch);
        assert_eq!(h0, DMatrix::identity(2, 2));
        assert_eq!(h1, DMatrix::zeros(2, 2));

        let (a, b) = (3.0, 7.0);
        let ch = ChannelInstance::new(LptvFilter::time_invariant(&[a, b]).unwrap(), white());
        assert_eq!(ch.block(), 2);
        let (h0, h1) = build_block_taps(&ch);
        assert_eq!(h0, DMatrix::from_row_slice(2, 2, &[a, 0.0, b, a]));
        assert_eq!(h1, DMatrix::from_row_slice(2, 2, &[0.0, b, 0.0, 0.0]));
    }

    #[test]
    fn channel_matrix_matches_scalar_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let ch = random_instance(&mut rng);
            let k = ch.k_min() + rng.random_range(1..=3);
            let g = build_channel_matrix(&ch, k).unwrap();
            let n = g.ncols();
            let l = ch.memory();
            // a few consecutive blocks of input
            let blocks = 3;
            let x: Vec<f64> = (0..blocks * n).map(|_| rng.random_range(-5..=5) as f64).collect();
            let y = ch.filter().apply(&x);
            for b in 1..blocks {
                let xb = DVector::from_column_slice(&x[b * n..(b + 1) * n]);
                let r = &g * xb;
                for i in 0..g.nrows() {
                    assert_eq!(r[i], y[b * n + l - 1 + i]);
                }
            }
            // the band
            for u in 0..g.nrows() {
                for v in 0..n {
                    if !(u <= v && v < u + l) {
                        assert_eq!(g[(u, v)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn block_taps_match_scalar_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let ch = random_instance(&mut rng);
            let n0 = ch.block();
            let (h0, h1) = build_block_taps(&ch);
            let blocks = 5;
            let x: Vec<f64> = (0..blocks * n0).map(|_| rng.random_range(-5..=5) as f64).collect();
            let frames = dcd_decompose(&x, n0).unwrap();
            let vec_at = |f: &PolyphaseFrame, n: usize| DVector::from_iterator(n0, f.components().iter().map(|c| c[n]));
            let mut out = vec![Vec::with_capacity(blocks); n0];
            for n in 0..blocks {
                let mut r = &h0 * vec_at(&frames, n);
                if n > 0 {
                    r += &h1 * vec_at(&frames, n - 1);
                }
                for (i, v) in r.iter().enumerate() {
                    out[i].push(*v);
                }
            }
            let y = dcd_reconstruct(&PolyphaseFrame::new(out).unwrap());
            assert_eq!(y, ch.filter().apply(&x));
        }
    }

    #[test]
    fn tap_periodicity() {
        let f = LptvFilter::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        for n in 0..3 {
            for l in 0..3 {
                assert_eq!(f.tap(n + 3, l), f.tap(n, l));
                assert_eq!(f.tap(n - 3, l), f.tap(n, l));
            }
        }
        assert_eq!(f.tap(0, 2), 0.0);
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncate_channel_memory(&[vec![1.0]], 0.01), 1);
        // 0.01 sits exactly on the threshold and is dropped; 0.1 is kept
        let rows = vec![vec![1.0, 0.1, 0.01, 0.001, 0.0001]];
        assert_eq!(truncate_channel_memory(&rows, 0.01), 2);
        let rows = vec![vec![1.0, 0.1, 0.0125, 0.001]];
        assert_eq!(truncate_channel_memory(&rows, 0.01), 3);
        let rows = vec![vec![0.5, 1.0, 0.9], vec![0.2, 0.3, 0.8]];
        assert_eq!(truncate_channel_memory(&rows, 1.0), 1);
    }

    #[test]
    fn truncate_uses_peak_over_all_rows() {
        let f = LptvFilter::from_rows(vec![vec![10.0, 0.05, 0.0], vec![1.0, 0.5, 0.2]]).unwrap();
        let t = f.truncate_memory(0.01);
        assert_eq!(t.memory(), 3);
        let t = f.truncate_memory(0.03);
        assert_eq!(t.memory(), 2);
        assert_eq!(t.row(1), &[1.0, 0.5]);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(LptvFilter::from_rows(vec![]).is_err());
        assert!(LptvFilter::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(LptvFilter::from_rows(vec![vec![f64::NAN]]).is_err());
    }
}
