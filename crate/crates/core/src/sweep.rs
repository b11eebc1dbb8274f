//! Sweep configuration files and the SNR sweeps behind the command line tool.
//!
//! A configuration is a TOML document:
//!
//! ```toml
//! seed = 7
//! out = "rates.csv"
//! sample_rate = 300e3          # optional; adds a bits/s column
//! methods = ["thm1", "thm2", "ofdm"]
//!
//! [snr]                        # dB
//! start = 0.0
//! stop = 20.0
//! step = 5.0
//!
//! [channel]
//! kind = "generator"           # or "flat" (gain = ...) or "file" (path = ...)
//! truncation = 1e-2            # relative tap threshold for the memory
//! [channel.spec]               # generator fields, all optional
//! period = 64
//!
//! [noise]
//! kind = "katayama"            # or "nassar" (filters, boundaries) or "white" (variance)
//! preset = "kata1"
//! period = 64
//! sample_interval = 3.3333333333333333e-6
//! truncation = 1e-3
//!
//! [solver]
//! k_max = 64
//! tol = 1e-4
//! grid = 1024
//! time_cells = 14
//! # cyclic_prefix defaults to the channel memory minus one
//!
//! [outage]                     # only read by the outage command
//! snr_db = 10.0
//! trials = 1000
//! k = 4
//! targets = { start = 0.0, stop = 3.0, step = 0.1 }
//! ```
//!
//! Relative paths are resolved against the directory of the configuration
//! file. Katayama classes may be given explicitly as
//! `classes = [{ magnitude = .., exponent = .., phase_deg = .. }]` together
//! with `decay`, instead of a preset.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity_freq::{build_spectral_grid, capacity_from_grid, DEFAULT_GRID};
use crate::capacity_time::{capacity_thm1_converged, DEFAULT_TOL};
use crate::channel::{load_channel, save_channel, synth_lptv_channel, ChannelInstance, GeneratorSpec, LptvFilter};
use crate::error::{Error, Result};
use crate::noise::{
    katayama_autocorrelation, nassar_autocorrelation, CyclicAutocorrelation, KatayamaParams, NassarParams, NoiseClass,
};
use crate::ofdm::{build_tf_grid, tf_ofdm_solution, TfOfdmGrid, DEFAULT_TIME_CELLS};
use crate::outage::{fading_rates, outage_curve, ChannelSource, Ensemble, OutageEstimate};

pub const DEFAULT_K_MAX: usize = 64;
pub const DEFAULT_CHANNEL_TRUNCATION: f64 = 1e-2;
pub const DEFAULT_NOISE_TRUNCATION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMethod {
    Thm1,
    Thm2,
    Ofdm,
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepMethod::Thm1 => "thm1",
            SweepMethod::Thm2 => "thm2",
            SweepMethod::Ofdm => "ofdm",
        })
    }
}

impl std::str::FromStr for SweepMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thm1" => Ok(SweepMethod::Thm1),
            "thm2" => Ok(SweepMethod::Thm2),
            "ofdm" => Ok(SweepMethod::Ofdm),
            other => Err(Error::invalid("methods", format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChannelConfig {
    Flat {
        #[serde(default = "one")]
        gain: f64,
    },
    File {
        path: PathBuf,
    },
    Generator {
        #[serde(default)]
        spec: GeneratorSpec,
        truncation: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    pub magnitude: f64,
    pub exponent: f64,
    pub phase_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KatayamaPreset {
    Kata1,
    Kata2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseConfig {
    Katayama {
        preset: Option<KatayamaPreset>,
        classes: Option<Vec<ClassConfig>>,
        decay: Option<f64>,
        period: usize,
        sample_interval: f64,
        truncation: Option<f64>,
    },
    Nassar {
        filters: Vec<Vec<f64>>,
        boundaries: Vec<usize>,
    },
    White {
        #[serde(default = "one")]
        variance: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    fn validate(&self, field: &str) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid(format!("{field}.step"), "must be > 0"));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) || self.stop < self.start {
            return Err(Error::invalid(format!("{field}.stop"), "must be finite and >= start"));
        }
        Ok(())
    }

    /// `start, start + step, ...` up to `stop` (inclusive, with a small slack).
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub k_max: Option<usize>,
    pub tol: Option<f64>,
    pub grid: Option<usize>,
    pub time_cells: Option<usize>,
    pub cyclic_prefix: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutageConfig {
    pub snr_db: f64,
    pub trials: usize,
    /// Block count; defaults to `K_min + 1`.
    pub k: Option<usize>,
    pub targets: Range,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub sample_rate: Option<f64>,
    pub methods: Vec<SweepMethod>,
    pub snr: Option<Range>,
    pub channel: Option<ChannelConfig>,
    pub noise: Option<NoiseConfig>,
    pub solver: SolverConfig,
    pub outage: Option<OutageConfig>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl SweepConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text, path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn k_max(&self) -> usize {
        self.solver.k_max.unwrap_or(DEFAULT_K_MAX)
    }

    pub fn tol(&self) -> f64 {
        self.solver.tol.unwrap_or(DEFAULT_TOL)
    }

    pub fn grid(&self) -> usize {
        self.solver.grid.unwrap_or(DEFAULT_GRID)
    }

    pub fn time_cells(&self) -> usize {
        self.solver.time_cells.unwrap_or(DEFAULT_TIME_CELLS)
    }

    /// Checks everything a capacity sweep needs.
    pub fn validate(&self) -> Result<()> {
        self.channel_config()?;
        self.noise_config()?;
        self.snr_range()?;
        if self.methods.is_empty() {
            return Err(Error::invalid("methods", "select at least one of thm1, thm2, ofdm"));
        }
        if let Some(rate) = self.sample_rate {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::invalid("sample_rate", "must be > 0"));
            }
        }
        if !(self.tol() > 0.0 && self.tol().is_finite()) {
            return Err(Error::invalid("solver.tol", "must be > 0"));
        }
        if self.k_max() < 2 {
            return Err(Error::invalid("solver.k_max", "must be at least 2"));
        }
        let grid = self.grid();
        if grid < 16 || !grid.is_multiple_of(2) {
            return Err(Error::invalid("solver.grid", "must be even and at least 16"));
        }
        if self.time_cells() == 0 {
            return Err(Error::invalid("solver.time_cells", "must be at least 1"));
        }
        Ok(())
    }

    fn channel_config(&self) -> Result<&ChannelConfig> {
        self.channel
            .as_ref()
            .ok_or_else(|| Error::invalid("channel", "missing [channel] section"))
    }

    fn noise_config(&self) -> Result<&NoiseConfig> {
        self.noise
            .as_ref()
            .ok_or_else(|| Error::invalid("noise", "missing [noise] section"))
    }

    fn snr_range(&self) -> Result<Range> {
        let r = self.snr.ok_or_else(|| Error::invalid("snr", "missing [snr] section"))?;
        r.validate("snr")?;
        Ok(r)
    }

    /// The configured channel (generated with the config seed if synthetic).
    pub fn build_filter(&self) -> Result<LptvFilter> {
        match self.channel_config()? {
            ChannelConfig::Flat { gain } => {
                if !gain.is_finite() || *gain == 0.0 {
                    return Err(Error::invalid("channel.gain", "must be finite and nonzero"));
                }
                Ok(LptvFilter::flat(*gain))
            }
            ChannelConfig::File { path } => load_channel(&self.resolve(path)),
            ChannelConfig::Generator { spec, truncation } => {
                let t = truncation.unwrap_or(DEFAULT_CHANNEL_TRUNCATION);
                check_threshold("channel.truncation", t)?;
                Ok(synth_lptv_channel(spec, self.seed())?.truncate_memory(t))
            }
        }
    }

    pub fn build_noise(&self) -> Result<CyclicAutocorrelation> {
        match self.noise_config()? {
            NoiseConfig::White { variance } => CyclicAutocorrelation::white(*variance),
            NoiseConfig::Nassar { filters, boundaries } => Ok(nassar_autocorrelation(&NassarParams::new(
                filters.clone(),
                boundaries.clone(),
            )?)),
            NoiseConfig::Katayama {
                preset,
                classes,
                decay,
                period,
                sample_interval,
                truncation,
            } => {
                let mut p = match (preset, classes) {
                    (Some(_), Some(_)) => {
                        return Err(Error::invalid(
                            "noise.classes",
                            "give either a preset or classes, not both",
                        ))
                    }
                    (Some(KatayamaPreset::Kata1), None) => KatayamaParams::kata1(*period, *sample_interval),
                    (Some(KatayamaPreset::Kata2), None) => KatayamaParams::kata2(*period, *sample_interval),
                    (None, Some(cs)) => KatayamaParams {
                        classes: cs
                            .iter()
                            .map(|c| NoiseClass::from_degrees(c.magnitude, c.exponent, c.phase_deg))
                            .collect(),
                        decay: decay.ok_or_else(|| Error::invalid("noise.decay", "required with explicit classes"))?,
                        sample_interval: *sample_interval,
                        period: *period,
                    },
                    (None, None) => return Err(Error::invalid("noise.preset", "give a preset or classes")),
                };
                if let Some(d) = decay {
                    p.decay = *d;
                }
                p.validate()?;
                let t = truncation.unwrap_or(DEFAULT_NOISE_TRUNCATION);
                check_threshold("noise.truncation", t)?;
                katayama_autocorrelation(&p, p.envelope_support(t))
            }
        }
    }

    pub fn build_instance(&self) -> Result<ChannelInstance> {
        Ok(ChannelInstance::new(self.build_filter()?, self.build_noise()?))
    }

    /// Prefix length used by the OFDM baseline for `ch`.
    pub fn cyclic_prefix(&self, ch: &ChannelInstance) -> usize {
        self.solver.cyclic_prefix.unwrap_or(ch.filter().memory() - 1)
    }

    pub fn tf_grid(&self, ch: &ChannelInstance) -> Result<TfOfdmGrid> {
        build_tf_grid(ch, self.time_cells(), self.cyclic_prefix(ch))
    }
}

fn check_threshold(field: &str, t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(field, "must lie in (0, 1)"));
    }
    Ok(())
}

/// `rho = SNR_in * (time-averaged lag-0 noise power)`.
pub fn rho_from_snr_db(snr_db: f64, noise: &CyclicAutocorrelation) -> f64 {
    10f64.powf(snr_db / 10.0) * noise.mean_power()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub method: SweepMethod,
    /// `NaN` when the point failed.
    pub rate: f64,
    pub waterlevel: f64,
    /// `K` (thm1), `J` (thm2) or the frame length (ofdm).
    pub block_or_grid: usize,
    pub converged: bool,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(snr_db: f64, method: SweepMethod, e: &Error) -> Self {
        Self {
            snr_db,
            method,
            rate: f64::NAN,
            waterlevel: f64::NAN,
            block_or_grid: 0,
            converged: false,
            error: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub sample_rate: Option<f64>,
}

impl SweepTable {
    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(
            out,
            "snr_db,method,rate_bits_per_use,waterlevel,block_or_grid,converged"
        )?;
        if self.sample_rate.is_some() {
            write!(out, ",rate_bits_per_s")?;
        }
        writeln!(out)?;
        for r in &self.rows {
            write!(
                out,
                "{},{},{},{},{},{}",
                r.snr_db, r.method, r.rate, r.waterlevel, r.block_or_grid, r.converged
            )?;
            if let Some(fs) = self.sample_rate {
                write!(out, ",{}", r.rate * fs)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Evaluates every selected method at every SNR. Solver degeneracies become
/// failed rows; configuration errors abort the sweep.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    cfg.validate()?;
    let ch = cfg.build_instance()?;
    let snrs = cfg.snr_range()?.points();
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();

    // Spectral and OFDM grids do not depend on the SNR.
    let spectral = methods
        .contains(&SweepMethod::Thm2)
        .then(|| build_spectral_grid(&ch, cfg.grid()));
    let tf = methods.contains(&SweepMethod::Ofdm).then(|| cfg.tf_grid(&ch));
    for built in [
        spectral.as_ref().map(|r| r.as_ref().err()),
        tf.as_ref().map(|r| r.as_ref().err()),
    ]
    .into_iter()
    .flatten()
    .flatten()
    {
        if !built.is_degeneracy() {
            return Err(clone_error(built));
        }
    }

    let points: Vec<(f64, SweepMethod)> = snrs
        .iter()
        .flat_map(|&s| methods.iter().map(move |&m| (s, m)))
        .collect();
    let mut rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(snr_db, method)| {
            let rho = rho_from_snr_db(snr_db, ch.noise());
            let outcome = match method {
                SweepMethod::Thm1 => capacity_thm1_converged(&ch, rho, cfg.tol(), cfg.k_max())
                    .map(|r| (r.rate, r.waterlevel, r.block, r.converged)),
                SweepMethod::Thm2 => match spectral.as_ref().expect("grid built") {
                    Ok(grid) => capacity_from_grid(grid, rho).map(|r| (r.rate, r.waterlevel, r.block, r.converged)),
                    Err(e) => Err(clone_error(e)),
                },
                SweepMethod::Ofdm => match tf.as_ref().expect("grid built") {
                    Ok(grid) => tf_ofdm_solution(grid, rho).map(|r| (r.rate, r.waterlevel, grid.frame_len, true)),
                    Err(e) => Err(clone_error(e)),
                },
            };
            match outcome {
                Ok((rate, waterlevel, block_or_grid, converged)) => Ok(SweepRow {
                    snr_db,
                    method,
                    rate,
                    waterlevel,
                    block_or_grid,
                    converged,
                    error: None,
                }),
                Err(e) if e.is_degeneracy() => Ok(SweepRow::failed(snr_db, method, &e)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db).then(a.method.cmp(&b.method)));
    Ok(SweepTable {
        rows,
        sample_rate: cfg.sample_rate,
    })
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::Degenerate(m) => Error::Degenerate(m.clone()),
        Error::LengthMismatch(m) => Error::LengthMismatch(m.clone()),
        Error::InvalidParameter { field, reason } => Error::invalid(field.clone(), reason.clone()),
        other => Error::invalid("sweep", other.to_string()),
    }
}

/// Synthesizes a channel, optionally truncates its memory at the relative
/// threshold, and writes it to `out`.
pub fn gen_channel(spec: &GeneratorSpec, seed: u64, truncation: Option<f64>, out: &Path) -> Result<LptvFilter> {
    let mut f = synth_lptv_channel(spec, seed)?;
    if let Some(t) = truncation {
        check_threshold("truncation", t)?;
        f = f.truncate_memory(t);
    }
    save_channel(&f, out)?;
    Ok(f)
}

/// Outage curve of the isotropic input over the configured ensemble. A
/// generator channel is jittered per trial (default jitter when the spec has
/// none); file and flat channels give a single-realization ensemble.
pub fn run_outage(cfg: &SweepConfig) -> Result<Vec<OutageEstimate>> {
    let oc = cfg
        .outage
        .as_ref()
        .ok_or_else(|| Error::invalid("outage", "missing [outage] section"))?;
    oc.targets.validate("outage.targets")?;
    if oc.trials == 0 {
        return Err(Error::invalid("outage.trials", "must be at least 1"));
    }
    let noise = cfg.build_noise()?;
    let nominal = cfg.build_filter()?;
    let source = match cfg.channel_config()? {
        ChannelConfig::Generator { spec, .. } => {
            let mut spec = spec.clone();
            spec.jitter.get_or_insert_with(Default::default);
            ChannelSource::Generator {
                spec,
                memory: nominal.memory(),
            }
        }
        _ => ChannelSource::Fixed(nominal.clone()),
    };
    let k = match oc.k {
        Some(k) => k,
        None => ChannelInstance::new(nominal, noise.clone()).k_min() + 1,
    };
    let rho = rho_from_snr_db(oc.snr_db, &noise);
    let ensemble = Ensemble {
        source,
        noise,
        k,
        seed: cfg.seed(),
    };
    let n = ensemble.block_len()?;
    let rates = fading_rates(&ensemble, &(DMatrix::identity(n, n) * rho), oc.trials)?;
    Ok(outage_curve(&rates, &oc.targets.points()))
}
