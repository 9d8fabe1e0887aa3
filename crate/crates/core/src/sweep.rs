//! Stability-region sweeps over normalized filter constant, interference
//! amplitude and interference frequency, comparing the second criterion with
//! the simulated verdict.

use std::f64::consts::TAU;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::criteria::{theorem1_margin, theorem2_margin};
use crate::cycle::CurrentLoop;
use crate::error::{Error, Result};
use crate::params::{normalize, FilterSpec, InterferenceSpec, PhaseMode};
use crate::sim::{
    classify_stability, default_inits, Classification, DivergenceReason, StabilityVerdict,
};

/// Version written in the `format_version` column of sweep CSV files.
pub const SWEEP_FORMAT_VERSION: u32 = 1;

pub const SWEEP_HEADER: [&str; 10] = [
    "tau_hat",
    "a_hat",
    "omega_hat",
    "thm1_lhs",
    "thm2_lhs_a",
    "thm2_lhs_b",
    "thm_pass",
    "sim_verdict",
    "cycles_to_converge",
    "format_version",
];

/// Inclusive linear axis written `start:stop:count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("axis", "count must be at least 1"));
        }
        if !(start.is_finite() && stop.is_finite()) {
            return Err(Error::invalid("axis", "endpoints must be finite"));
        }
        Ok(Self { start, stop, count })
    }

    pub fn single(v: f64) -> Self {
        Self {
            start: v,
            stop: v,
            count: 1,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / last
                }
            })
            .collect()
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::invalid("axis", format!("expected start:stop:count, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        Axis::new(start, stop, count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub tau_hat: Axis,
    pub a_hat: Axis,
    pub omega_hat: Axis,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.tau_hat.count * self.a_hat.count * self.omega_hat.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points in row-major order: `tau_hat` slowest, `omega_hat` fastest.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let taus = self.tau_hat.values();
        let amps = self.a_hat.values();
        let freqs = self.omega_hat.values();
        let mut out = Vec::with_capacity(self.len());
        for &t in &taus {
            for &a in &amps {
                for &w in &freqs {
                    out.push((t, a, w));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Equally spaced interference phases screened per point.
    pub phases: usize,
    pub inits: usize,
    pub n_cycles: usize,
    pub eps: f64,
    pub seed: Option<u64>,
    pub phase_mode: PhaseMode,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            phases: 8,
            inits: 5,
            n_cycles: 500,
            eps: 1e-3,
            seed: None,
            phase_mode: PhaseMode::Locked,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub tau_hat: f64,
    pub a_hat: f64,
    pub omega_hat: f64,
    pub thm1_lhs: f64,
    pub thm2_lhs_a: f64,
    pub thm2_lhs_b: f64,
    /// The stability criterion holds (both inequalities).
    pub thm_pass: bool,
    pub sim_verdict: Classification,
    pub cycles_to_converge: Option<usize>,
    pub reason: Option<DivergenceReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Containment {
    pub points: usize,
    pub thm_pass: usize,
    pub sim_stable: usize,
    /// Points where the criterion holds but the simulation is not stable.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionGrid {
    pub spec: GridSpec,
    pub points: Vec<GridPoint>,
    pub containment: Containment,
}

impl RegionGrid {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(SWEEP_HEADER).map_err(io)?;
        let version = SWEEP_FORMAT_VERSION.to_string();
        for p in &self.points {
            w.write_record([
                p.tau_hat.to_string(),
                p.a_hat.to_string(),
                p.omega_hat.to_string(),
                p.thm1_lhs.to_string(),
                p.thm2_lhs_a.to_string(),
                p.thm2_lhs_b.to_string(),
                p.thm_pass.to_string(),
                p.sim_verdict.to_string(),
                p.cycles_to_converge
                    .map(|c| c.to_string())
                    .unwrap_or_default(),
                version.clone(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Evaluates both criteria and the simulated verdict at every grid point.
///
/// Each hatted triple is mapped onto the base configuration with
/// `T_base = t_off`: `tau = tau_hat T_base`, a single tone of amplitude
/// `a_hat m1 T_base` and frequency `2pi omega_hat / T_base`. The verdict is
/// the worst over `phases` equally spaced phases.
pub fn sweep(base: &Config, grid: &GridSpec, opts: &SweepOptions) -> Result<RegionGrid> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "empty grid"));
    }
    if opts.phases == 0 || opts.inits == 0 {
        return Err(Error::invalid(
            "phases",
            "phases and inits must be at least 1",
        ));
    }
    base.converter.validate()?;
    let points: Vec<GridPoint> = grid
        .points()
        .into_par_iter()
        .map(|(t, a, w)| evaluate_point(base, t, a, w, opts))
        .collect::<Result<_>>()?;
    let mut c = Containment {
        points: points.len(),
        ..Containment::default()
    };
    for p in &points {
        let stable = p.sim_verdict == Classification::Stable;
        c.thm_pass += p.thm_pass as usize;
        c.sim_stable += stable as usize;
        c.violations += (p.thm_pass && !stable) as usize;
    }
    Ok(RegionGrid {
        spec: *grid,
        points,
        containment: c,
    })
}

fn evaluate_point(
    base: &Config,
    tau_hat: f64,
    a_hat: f64,
    omega_hat: f64,
    opts: &SweepOptions,
) -> Result<GridPoint> {
    let cp = base.converter;
    let t_base = cp.t_off;
    let fs = FilterSpec {
        tau: tau_hat * t_base,
    };
    let amp = a_hat * cp.m1 * t_base;
    let omega = TAU * omega_hat / t_base;
    let tone = |phase: f64| InterferenceSpec::single(amp, omega, phase, opts.phase_mode);
    let np = normalize(&cp, &fs, &tone(0.0))?;
    let t1 = theorem1_margin(&np);
    let t2 = theorem2_margin(&np);

    let inits = default_inits(&cp, opts.inits, opts.seed);
    let run = |is: InterferenceSpec| -> StabilityVerdict {
        let lp = CurrentLoop::new(cp, fs, is).map(|l| l.with_settings(base.sim.solver()));
        match lp.and_then(|lp| classify_stability(&lp, &inits, opts.n_cycles, opts.eps)) {
            Ok(v) => v,
            Err(_) => StabilityVerdict {
                classification: Classification::Inconclusive,
                cycles_to_converge: None,
                residual: f64::INFINITY,
                reason: None,
                multiple_crossings: false,
            },
        }
    };
    let verdict = if amp == 0.0 {
        run(InterferenceSpec::none())
    } else {
        (0..opts.phases)
            .map(|k| run(tone(TAU * k as f64 / opts.phases as f64)))
            .reduce(StabilityVerdict::worst)
            .expect("at least one phase")
    };
    Ok(GridPoint {
        tau_hat,
        a_hat,
        omega_hat,
        thm1_lhs: t1.lhs,
        thm2_lhs_a: t2.lhs_a,
        thm2_lhs_b: t2.lhs_b,
        thm_pass: t2.pass,
        sim_verdict: verdict.classification,
        cycles_to_converge: verdict.cycles_to_converge,
        reason: verdict.reason,
    })
}
