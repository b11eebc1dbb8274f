use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use plc_capacity::channel::GeneratorSpec;
use plc_capacity::outage::write_outage_csv;
use plc_capacity::sweep::{gen_channel, run_outage, run_sweep, SweepConfig, SweepMethod};
use plc_capacity::Error;

/// Capacity of periodically time-varying channels with cyclostationary noise.
#[derive(Parser)]
#[command(name = "plc-capacity", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate sweep over SNR for the selected methods.
    Capacity(Overrides),
    /// Synthesize a channel and write it as CSV.
    GenChannel(GenArgs),
    /// Per-cell SNR grid of the TF-OFDM baseline (m,k,gamma).
    Ofdm(Overrides),
    /// Outage curve of the isotropic input over a jittered channel ensemble.
    Outage(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    snr_start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    snr_stop: Option<f64>,
    #[arg(long)]
    snr_step: Option<f64>,
    /// Comma-separated subset of thm1, thm2, ofdm.
    #[arg(long, value_delimiter = ',')]
    method: Vec<SweepMethod>,
    /// Output CSV; stdout when absent from both flags and config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Frequency grid size J.
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    /// TOML generator spec; the built-in network when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Time indices per period.
    #[arg(long)]
    period: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative tap threshold for truncating the memory.
    #[arg(long)]
    truncation: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(o: &Overrides) -> Result<SweepConfig, Error> {
    let mut cfg = SweepConfig::load(&o.config)?;
    if o.snr_start.is_some() || o.snr_stop.is_some() || o.snr_step.is_some() {
        let mut r = cfg.snr.unwrap_or(plc_capacity::sweep::Range {
            start: 0.0,
            stop: 0.0,
            step: 1.0,
        });
        r.start = o.snr_start.unwrap_or(r.start);
        r.stop = o.snr_stop.unwrap_or(r.stop);
        r.step = o.snr_step.unwrap_or(r.step);
        cfg.snr = Some(r);
    }
    if !o.method.is_empty() {
        cfg.methods = o.method.clone();
    }
    if let Some(out) = &o.out {
        // flags are relative to the working directory, not the config
        cfg.out = Some(std::path::absolute(out).unwrap_or_else(|_| out.clone()));
    }
    cfg.seed = o.seed.or(cfg.seed);
    cfg.solver.k_max = o.k_max.or(cfg.solver.k_max);
    cfg.solver.tol = o.tol.or(cfg.solver.tol);
    cfg.solver.grid = o.grid.or(cfg.solver.grid);
    Ok(cfg)
}

fn output(cfg: &SweepConfig) -> Result<Box<dyn Write>, Error> {
    match &cfg.out {
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) => {
            let p = match &cfg.base_dir {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p.clone(),
            };
            let f = File::create(&p).map_err(|source| Error::Io { path: p, source })?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs the command; `Ok(false)` means the output was written but some rows
/// failed numerically.
fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Capacity(o) => {
            let cfg = load_config(&o)?;
            let table = run_sweep(&cfg)?;
            let target = cfg.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
            let mut w = output(&cfg)?;
            table
                .write_csv(&mut w)
                .and_then(|_| w.flush())
                .map_err(io_err(&target))?;
            for r in table.rows.iter().filter(|r| r.error.is_some()) {
                eprintln!(
                    "snr {} dB, {}: {}",
                    r.snr_db,
                    r.method,
                    r.error.as_deref().unwrap_or("")
                );
            }
            Ok(!table.has_errors())
        }
        Command::GenChannel(g) => {
            let mut spec = match &g.config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
                    toml::from_str::<GeneratorSpec>(&text).map_err(|e| Error::Parse {
                        path: path.clone(),
                        line: e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1),
                        message: e.message().to_string(),
                    })?
                }
                None => GeneratorSpec::default(),
            };
            if let Some(p) = g.period {
                spec.period = p;
            }
            gen_channel(&spec, g.seed, g.truncation, &g.out)?;
            Ok(true)
        }
        Command::Ofdm(o) => {
            let cfg = load_config(&o)?;
            let ch = cfg.build_instance()?;
            let grid = cfg.tf_grid(&ch)?;
            let target = cfg.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
            let mut w = output(&cfg)?;
            grid.write_csv(&mut w)
                .and_then(|_| w.flush())
                .map_err(io_err(&target))?;
            Ok(true)
        }
        Command::Outage(o) => {
            let cfg = load_config(&o)?;
            let curve = run_outage(&cfg)?;
            let target = cfg.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
            let mut w = output(&cfg)?;
            write_outage_csv(&curve, &mut w)
                .and_then(|_| w.flush())
                .map_err(io_err(&target))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_degeneracy() { 2 } else { 1 })
        }
    }
}
