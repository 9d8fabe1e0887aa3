//! Command-line front end. Exit codes: 0 success, 1 usage or validation
//! error, 2 runtime or numerical error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, Config};
use crate::criteria::proof_internals;
use crate::cycle::CycleState;
use crate::error::{Error, Result};
use crate::linearize::{linearize, root_locus, root_locus_unfiltered};
use crate::params::PhaseMode;
use crate::sim::{comparison_waveforms, default_inits, simulate, waveform, Variant, WaveSample};
use crate::sweep::{sweep, Axis, GridSpec, SweepOptions};

#[derive(Debug, Parser)]
#[command(
    name = "lpfcm",
    version,
    about = "Continuity and stability analysis of constant off-time peak current-mode control with a low-pass filtered sense"
)]
struct Cli {
    /// Seed for randomized initial-condition spreads.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate both criteria and the small-gain quantities (JSON).
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate the loop cycle by cycle (CSV).
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of cycles; defaults to `sim.n_cycles`.
        #[arg(long)]
        cycles: Option<usize>,
        /// Initial previous-cycle peak current [A].
        #[arg(long)]
        ip0: Option<f64>,
        /// Also write dense waveform samples to this file.
        #[arg(long)]
        waveform: Option<PathBuf>,
        /// Waveform sample spacing [s].
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Sense waveforms with and without filter and interference (CSV).
    Waveforms {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 6)]
        cycles: usize,
        #[arg(long)]
        ip0: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Sweep the stability region over tau_hat, amplitude and frequency (CSV).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// tau_hat axis, start:stop:count.
        #[arg(long)]
        tau: Axis,
        /// Normalized interference amplitude axis.
        #[arg(long)]
        amp: Axis,
        /// Normalized interference frequency axis.
        #[arg(long)]
        freq: Axis,
        #[arg(long, default_value_t = 8)]
        phases: usize,
        #[arg(long, default_value_t = 5)]
        inits: usize,
        /// Cycles per trajectory; defaults to `sim.n_cycles`.
        #[arg(long)]
        cycles: Option<usize>,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value = "locked")]
        phase_mode: PhaseMode,
        /// Fail (exit 2) if a point passing the criterion is not simulated stable.
        #[arg(long)]
        strict: bool,
    },
    /// Closed-loop pole versus comparator feedback scale (CSV).
    Rootlocus {
        #[command(flatten)]
        common: Common,
        /// Feedback scale axis, start:stop:count.
        #[arg(long, default_value = "0:10:101")]
        kappa: Axis,
        /// Emit the unfiltered-sense branch instead.
        #[arg(long)]
        unfiltered: bool,
    },
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Check { common } => {
            let cfg = load_config(&common.config)?;
            let report = proof_internals(&cfg.converter, &cfg.filter, &cfg.interference)?;
            let mut out = open_out(common.out.as_deref())?;
            serde_json::to_writer_pretty(&mut out, &report).map_err(io_err)?;
            writeln!(out).map_err(io_err)?;
            out.flush().map_err(io_err)
        }
        Command::Simulate {
            common,
            cycles,
            ip0,
            waveform: wave_path,
            dt,
        } => {
            let cfg = load_config(&common.config)?;
            let lp = cfg.current_loop()?;
            let n = cycles.unwrap_or(cfg.sim.n_cycles);
            let init = initial_state(&cfg, ip0, cli.seed);
            let tr = simulate(&lp, init, n)?;
            let mut out = open_out(common.out.as_deref())?;
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["n", "t_abs", "t_on", "i_p", "i_v", "clamped"])
                .map_err(io_err)?;
            for r in &tr.records {
                w.write_record([
                    r.n.to_string(),
                    r.t_abs.to_string(),
                    r.t_on.to_string(),
                    r.i_p.to_string(),
                    r.i_v.to_string(),
                    (r.clamped as u8).to_string(),
                ])
                .map_err(io_err)?;
            }
            w.flush().map_err(io_err)?;
            drop(w);
            out.flush().map_err(io_err)?;
            if let Some(path) = wave_path {
                let dt = dt.unwrap_or_else(|| default_dt(&cfg));
                let samples = waveform(&lp, init, n, dt)?;
                let variant = if cfg.interference.is_empty() {
                    Variant::CleanFiltered
                } else {
                    Variant::InterferenceFiltered
                };
                write_waves(&mut open_out(Some(&path))?, &[(variant, samples)])?;
            }
            Ok(())
        }
        Command::Waveforms {
            common,
            cycles,
            ip0,
            dt,
        } => {
            let cfg = load_config(&common.config)?;
            let dt = dt.unwrap_or_else(|| default_dt(&cfg));
            let init = initial_state(&cfg, ip0, cli.seed);
            let waves = comparison_waveforms(
                &cfg.converter,
                &cfg.filter,
                &cfg.interference,
                init.i_p_prev,
                cycles,
                dt,
            )?;
            write_waves(&mut open_out(common.out.as_deref())?, &waves)
        }
        Command::Sweep {
            common,
            tau,
            amp,
            freq,
            phases,
            inits,
            cycles,
            eps,
            phase_mode,
            strict,
        } => {
            let cfg = load_config(&common.config)?;
            let grid = GridSpec {
                tau_hat: tau,
                a_hat: amp,
                omega_hat: freq,
            };
            let opts = SweepOptions {
                phases,
                inits,
                n_cycles: cycles.unwrap_or(cfg.sim.n_cycles),
                eps,
                seed: cli.seed,
                phase_mode,
            };
            let region = sweep(&cfg, &grid, &opts)?;
            let mut out = open_out(common.out.as_deref())?;
            region.write_csv(&mut out)?;
            out.flush().map_err(io_err)?;
            let c = region.containment;
            eprintln!(
                "points={} thm_pass={} sim_stable={} containment_violations={}",
                c.points, c.thm_pass, c.sim_stable, c.violations
            );
            if strict && c.violations > 0 {
                return Err(Error::Infeasible(format!(
                    "{} points pass the criterion but are not simulated stable",
                    c.violations
                )));
            }
            Ok(())
        }
        Command::Rootlocus {
            common,
            kappa,
            unfiltered,
        } => {
            let cfg = load_config(&common.config)?;
            let lp = cfg.current_loop()?;
            let op = lp.equilibrium(cfg.converter.i_c)?;
            let gains = kappa.values();
            let pts = if unfiltered {
                root_locus_unfiltered(&lp, &op, &gains)?
            } else {
                root_locus(&linearize(&lp, &op)?, &gains)
            };
            let mut out = open_out(common.out.as_deref())?;
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["kappa", "pole_re", "pole_im"])
                .map_err(io_err)?;
            for p in pts {
                w.write_record([
                    p.kappa.to_string(),
                    p.pole_re.to_string(),
                    p.pole_im.to_string(),
                ])
                .map_err(io_err)?;
            }
            w.flush().map_err(io_err)?;
            drop(w);
            out.flush().map_err(io_err)
        }
    }
}

fn default_dt(cfg: &Config) -> f64 {
    cfg.sim.dt_max.unwrap_or_else(|| {
        let c = &cfg.converter;
        (c.balanced_on_time().max(c.t_on_min) + c.t_off) / 200.0
    })
}

/// Initial state: explicit peak, a seeded draw from the default spread, or half the command.
fn initial_state(cfg: &Config, ip0: Option<f64>, seed: Option<u64>) -> CycleState {
    let c = &cfg.converter;
    match (ip0, seed) {
        (Some(ip), _) => CycleState::new(ip, c.i_c),
        (None, Some(_)) => default_inits(c, 1, seed)[0],
        (None, None) => CycleState::new(0.5 * c.i_c, c.i_c),
    }
}

fn write_waves(out: &mut dyn Write, waves: &[(Variant, Vec<WaveSample>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "i_L", "i_m", "y_filter", "variant_id"])
        .map_err(io_err)?;
    for (v, samples) in waves {
        let id = v.id().to_string();
        for s in samples {
            w.write_record([
                s.t.to_string(),
                s.i_l.to_string(),
                s.i_m.to_string(),
                s.y_filter.to_string(),
                id.clone(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}
