//! Synthetic narrowband PLC channel generator.
//!
//! The network is a ladder between a resistive source and a resistive load.
//! Three appliance branches `Z1`, `Z2`, `Z3`, each a series RLC resonator, hang
//! in shunt across the line, separated by short line segments (series
//! `R + jwL`):
//!
//! ```text
//!  Vs --Rs--+--seg--+--seg--+--seg--+-- RL
//!           |       Z1      Z2      Z3
//! ```
//!
//! (the source node has no branch; `seg` separates every pair of nodes).
//! At every time index of the period the branch impedances are scaled by
//! their modulation, the voltage transfer `V_L / V_s` is sampled on a uniform
//! frequency grid, and an FIR response is obtained by an inverse real DFT with
//! a half-Hann taper over the kept taps.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::LptvFilter;
use crate::error::{Error, Result};

/// Time variation of a branch over the mains period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Modulation {
    Static,
    /// Impedance scaled by `1 + 0.5 sin(2 pi n / N_ch + phase)`.
    Harmonic {
        phase: f64,
    },
    /// Impedance doubled for the first `duty * N_ch` samples of the period,
    /// nominal afterwards.
    Commuted {
        duty: f64,
    },
}

impl Modulation {
    fn factor(&self, n: usize, period: usize) -> f64 {
        match *self {
            Modulation::Static => 1.0,
            Modulation::Harmonic { phase } => 1.0 + 0.5 * (2.0 * PI * n as f64 / period as f64 + phase).sin(),
            Modulation::Commuted { duty } => {
                if n < (duty * period as f64).round() as usize {
                    2.0
                } else {
                    1.0
                }
            }
        }
    }
}

/// Series RLC resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Ohms.
    pub resistance: f64,
    /// Henries.
    pub inductance: f64,
    /// Farads.
    pub capacitance: f64,
    pub modulation: Modulation,
}

impl Branch {
    fn admittance(&self, omega: f64, scale: f64) -> Complex64 {
        if omega == 0.0 {
            // series capacitor blocks DC
            return Complex64::new(0.0, 0.0);
        }
        let z = Complex64::new(
            self.resistance,
            omega * self.inductance - 1.0 / (omega * self.capacitance),
        );
        (z * scale).inv()
    }
}

/// Random perturbation of the branch components, for channel ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// Each of R, L and C is multiplied by a log-uniform factor in
    /// `[1/(1+x), 1+x]`.
    pub component: f64,
    /// Modulation phases are shifted uniformly within `+-phase` radians.
    pub phase: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            component: 0.2,
            phase: PI / 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub branches: Vec<Branch>,
    /// Source resistance, ohms.
    pub source_resistance: f64,
    /// Load resistance, ohms.
    pub load_resistance: f64,
    pub segment_resistance: f64,
    pub segment_inductance: f64,
    /// Time indices per period, `N_ch`.
    pub period: usize,
    /// Taps extracted per time index before any memory truncation.
    pub taps: usize,
    /// Hz.
    pub sample_rate: f64,
    /// Length of the frequency grid used for the inverse DFT.
    pub fft_len: usize,
    /// Scale the table so the period-averaged tap energy is 1.
    pub normalize: bool,
    pub jitter: Option<Jitter>,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self::nb_plc(64)
    }
}

impl GeneratorSpec {
    /// Resonators of 17/8/26 kOhm, 0.6/1/3.7 nF and 11/2.3/6 mH; `Z1` and `Z3`
    /// harmonic with phases pi/2 and pi/4, `Z2` commuted with duty cycle 1/8.
    pub fn nb_plc(period: usize) -> Self {
        Self {
            branches: vec![
                Branch {
                    resistance: 17e3,
                    inductance: 11e-3,
                    capacitance: 0.6e-9,
                    modulation: Modulation::Harmonic { phase: PI / 2.0 },
                },
                Branch {
                    resistance: 8e3,
                    inductance: 2.3e-3,
                    capacitance: 1e-9,
                    modulation: Modulation::Commuted { duty: 0.125 },
                },
                Branch {
                    resistance: 26e3,
                    inductance: 6e-3,
                    capacitance: 3.7e-9,
                    modulation: Modulation::Harmonic { phase: PI / 4.0 },
                },
            ],
            source_resistance: 500.0,
            load_resistance: 500.0,
            segment_resistance: 10.0,
            segment_inductance: 100e-6,
            period,
            taps: 64,
            sample_rate: 300e3,
            fft_len: 1024,
            normalize: true,
            jitter: None,
        }
    }

    /// Same network with every branch static.
    pub fn static_variant(&self) -> Self {
        let mut s = self.clone();
        for b in &mut s.branches {
            b.modulation = Modulation::Static;
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        for (i, b) in self.branches.iter().enumerate() {
            for (name, v) in [
                ("resistance", b.resistance),
                ("inductance", b.inductance),
                ("capacitance", b.capacitance),
            ] {
                if !positive(v) {
                    return Err(Error::invalid(format!("branches[{i}].{name}"), "must be > 0"));
                }
            }
            if let Modulation::Commuted { duty } = b.modulation {
                if !(0.0..=1.0).contains(&duty) {
                    return Err(Error::invalid(format!("branches[{i}].duty"), "must be in [0, 1]"));
                }
            }
        }
        for (name, v) in [
            ("source_resistance", self.source_resistance),
            ("load_resistance", self.load_resistance),
            ("sample_rate", self.sample_rate),
        ] {
            if !positive(v) {
                return Err(Error::invalid(name, "must be > 0"));
            }
        }
        if !(self.segment_resistance >= 0.0 && self.segment_inductance >= 0.0) {
            return Err(Error::invalid("segment", "segment impedance must be >= 0"));
        }
        if self.period == 0 {
            return Err(Error::invalid("period", "must be at least 1"));
        }
        if self.taps == 0 {
            return Err(Error::invalid("taps", "must be at least 1"));
        }
        if self.fft_len < 2 * self.taps || !self.fft_len.is_multiple_of(2) {
            return Err(Error::invalid(
                "fft_len",
                "must be even and at least twice the tap count",
            ));
        }
        Ok(())
    }

    fn jittered(&self, seed: u64) -> Self {
        let Some(jitter) = self.jitter else {
            return self.clone();
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = (1.0 + jitter.component).ln();
        let mut s = self.clone();
        for b in &mut s.branches {
            b.resistance *= rng.random_range(-span..=span).exp();
            b.inductance *= rng.random_range(-span..=span).exp();
            b.capacitance *= rng.random_range(-span..=span).exp();
            let shift = rng.random_range(-jitter.phase..=jitter.phase);
            if let Modulation::Harmonic { phase } = &mut b.modulation {
                *phase += shift;
            }
        }
        s
    }

    /// Voltage transfer `V_load / V_source` at angular frequency `omega` with
    /// branch impedances scaled by `scales`.
    fn transfer(&self, omega: f64, scales: &[f64]) -> Complex64 {
        let seg = Complex64::new(self.segment_resistance, omega * self.segment_inductance);
        // Walk from the load towards the source, tracking the input impedance
        // and the voltage ratio accumulated across each segment divider.
        let mut z_in = Complex64::new(self.load_resistance, 0.0);
        let mut gain = Complex64::new(1.0, 0.0);
        for (b, &s) in self.branches.iter().zip(scales).rev() {
            z_in = (z_in.inv() + b.admittance(omega, s)).inv();
            gain *= z_in / (z_in + seg);
            z_in += seg;
        }
        gain * z_in / (z_in + self.source_resistance)
    }
}

/// Generates the periodic tap table described by `spec`. With jitter
/// configured, `seed` selects the perturbed component values; otherwise the
/// output does not depend on it.
pub fn synth_lptv_channel(spec: &GeneratorSpec, seed: u64) -> Result<LptvFilter> {
    spec.validate()?;
    let spec = spec.jittered(seed);
    let nfft = spec.fft_len;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(nfft);
    let taper: Vec<f64> = (0..spec.taps)
        .map(|l| 0.5 * (1.0 + (PI * l as f64 / spec.taps as f64).cos()))
        .collect();

    let mut rows = Vec::with_capacity(spec.period);
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    for n in 0..spec.period {
        let scales: Vec<f64> = spec
            .branches
            .iter()
            .map(|b| b.modulation.factor(n, spec.period))
            .collect();
        for k in 0..=nfft / 2 {
            let omega = 2.0 * PI * spec.sample_rate * k as f64 / nfft as f64;
            let h = spec.transfer(omega, &scales);
            buf[k] = h;
            if k > 0 && k < nfft / 2 {
                buf[nfft - k] = h.conj();
            }
        }
        // real impulse response needs a real Nyquist bin
        buf[nfft / 2].im = 0.0;
        ifft.process(&mut buf);
        rows.push(
            (0..spec.taps)
                .map(|l| buf[l].re / nfft as f64 * taper[l])
                .collect::<Vec<f64>>(),
        );
    }

    if spec.normalize {
        let energy: f64 = rows.iter().flatten().map(|v| v * v).sum::<f64>() / spec.period as f64;
        if energy > 0.0 {
            let s = energy.sqrt().recip();
            rows.iter_mut().flatten().for_each(|v| *v *= s);
        }
    }
    LptvFilter::from_rows(rows)
}
