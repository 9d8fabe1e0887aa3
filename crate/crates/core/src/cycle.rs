//! Exact cycle-to-cycle map of the filtered peak-current loop.
//!
//! During the off interval the filter input is blanked, so the filter output
//! decays from its value at the previous switching instant for the whole
//! period. During the on interval the filter sees
//! `i_m(t) = i_v + m1 t + w(t)` with `i_v = i_p[n-1] - m2 t_off`, and the
//! comparator ends the interval when the output reaches the command `i_c`
//! (ignored before `t_on_min`).

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::ForcedResponse;
use crate::params::{ConverterParams, FilterSpec, InterferenceSpec, PhaseMode};

/// State at the start of an on interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleState {
    /// Peak current of the previous cycle [A].
    pub i_p_prev: f64,
    /// Filter output at the previous turn-off instant [A].
    pub y_prev: f64,
    /// Absolute time at the start of this on interval [s].
    pub t_abs: f64,
    pub n: u64,
}

impl CycleState {
    pub fn new(i_p_prev: f64, y_prev: f64) -> Self {
        Self {
            i_p_prev,
            y_prev,
            t_abs: 0.0,
            n: 0,
        }
    }
}

/// Periodic steady state of the loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub i_c: f64,
    pub i_p: f64,
    pub i_v: f64,
    pub t_on: f64,
    /// Switching period `t_on + t_off`.
    pub t_period: f64,
}

/// Result of the on-time search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t_on: f64,
    /// Output slope at `t_on` [A/s].
    pub slope: f64,
    /// The output was already above the command when blanking ended.
    pub clamped: bool,
    /// Slope stayed positive on every scanned point of `[t_on_min, t_on]`.
    pub monotone: bool,
    pub min_slope: f64,
    /// Number of level crossings seen; only counted with
    /// [`SolverSettings::detect_recrossing`], otherwise 1.
    pub crossings: usize,
}

/// Per-cycle summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub n: u64,
    pub t_abs: f64,
    pub t_on: f64,
    pub i_p: f64,
    pub i_v: f64,
    pub clamped: bool,
}

/// Numerical settings of the crossing solver. `None` selects the default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Bisection tolerance on `t_on` [s]; default `1e-10 * t_off`.
    pub tol: Option<f64>,
    /// Upper bound on the bracketing step [s].
    pub dt_max: Option<f64>,
    /// Longest on interval searched [s]; default `50 * max(tau, t_off)`.
    pub t_max: Option<f64>,
    /// Also count crossings inside the blanking window and shortly after the
    /// first crossing.
    #[serde(default)]
    pub detect_recrossing: bool,
}

/// What [`CurrentLoop::continuity_check`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContinuityProbe {
    /// Zero valley current, previous output at `i_max`, interference phase at `t = 0`.
    WorstCase,
    State(CycleState),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityReport {
    pub monotone: bool,
    pub min_slope: f64,
    pub t_at_min: f64,
    pub samples: usize,
}

/// Filter output over one on interval, in closed form.
#[derive(Debug, Clone)]
pub struct OnInterval {
    tau: f64,
    m1: f64,
    /// Output at the start of the on interval.
    y0: f64,
    i_v: f64,
    /// Interference seen from the start of this on interval.
    local: InterferenceSpec,
    forced: ForcedResponse,
}

impl OnInterval {
    pub fn valley(&self) -> f64 {
        self.i_v
    }

    pub fn forced(&self) -> &ForcedResponse {
        &self.forced
    }

    /// Output and its time derivative at local time `t >= 0`.
    #[inline]
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let em1 = (-t / self.tau).exp_m1();
        let e = 1.0 + em1;
        let (g, gp) = self.forced.g_and_prime(t);
        let g0 = self.forced.g0;
        let y = self.y0 * e - self.i_v * em1 + self.m1 * (t + em1 * self.tau) + g - g0 * e;
        let dy = (self.i_v - self.y0 + g0) * e / self.tau - self.m1 * em1 + gp;
        (y, dy)
    }

    pub fn output(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    /// Filter input `i_m(t)`.
    pub fn sense(&self, t: f64) -> f64 {
        self.i_v + self.m1 * t + self.local.value(t)
    }
}

/// The full loop: converter, sense filter and interference.
#[derive(Debug, Clone)]
pub struct CurrentLoop {
    cp: ConverterParams,
    fs: FilterSpec,
    is: InterferenceSpec,
    settings: SolverSettings,
    locked: ForcedResponse,
}

impl CurrentLoop {
    pub fn new(cp: ConverterParams, fs: FilterSpec, is: InterferenceSpec) -> Result<Self> {
        cp.validate()?;
        fs.validate()?;
        is.validate()?;
        let locked = ForcedResponse::new(&is, fs.tau);
        Ok(Self {
            cp,
            fs,
            is,
            settings: SolverSettings::default(),
            locked,
        })
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn converter(&self) -> &ConverterParams {
        &self.cp
    }

    pub fn filter(&self) -> &FilterSpec {
        &self.fs
    }

    pub fn interference(&self) -> &InterferenceSpec {
        &self.is
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn tau(&self) -> f64 {
        self.fs.tau
    }

    /// Forced interference response with the phase referenced to the start of
    /// an on interval (the locked-phase view).
    pub fn forced_response(&self) -> &ForcedResponse {
        &self.locked
    }

    pub fn tol(&self) -> f64 {
        self.settings.tol.unwrap_or(1e-10 * self.cp.t_off)
    }

    /// Bracketing step `min(tau, t_off, 2pi/w_max) / 50`, capped by `dt_max`.
    pub fn bracket_step(&self) -> f64 {
        let mut h = self.fs.tau.min(self.cp.t_off);
        let w = self.is.omega_max();
        if w > 0.0 {
            h = h.min(TAU / w);
        }
        h /= 50.0;
        match self.settings.dt_max {
            Some(cap) if cap > 0.0 => h.min(cap),
            _ => h,
        }
    }

    pub fn t_max(&self) -> f64 {
        let default = 50.0 * self.fs.tau.max(self.cp.t_off);
        self.settings
            .t_max
            .unwrap_or(default)
            .max(self.cp.t_on_min + self.bracket_step())
    }

    /// Same loop with a different peak-current command.
    pub fn with_command(&self, i_c: f64) -> Result<Self> {
        let cp = ConverterParams { i_c, ..self.cp };
        cp.validate()?;
        Ok(Self { cp, ..self.clone() })
    }

    /// Same loop with different interference.
    pub fn with_interference(&self, is: InterferenceSpec) -> Result<Self> {
        is.validate()?;
        let locked = ForcedResponse::new(&is, self.fs.tau);
        Ok(Self {
            is,
            locked,
            ..self.clone()
        })
    }

    pub fn on_interval(&self, cs: &CycleState) -> OnInterval {
        let i_v = cs.i_p_prev - self.cp.m2 * self.cp.t_off;
        match self.is.phase_mode {
            PhaseMode::Freerun if !self.is.is_empty() => {
                let local = self.is.shifted(cs.t_abs);
                let forced = ForcedResponse::new(&local, self.fs.tau);
                self.on_interval_with(i_v, cs.y_prev, local, forced)
            }
            _ => self.on_interval_with(i_v, cs.y_prev, self.is.clone(), self.locked.clone()),
        }
    }

    fn on_interval_with(
        &self,
        i_v: f64,
        y_prev: f64,
        local: InterferenceSpec,
        forced: ForcedResponse,
    ) -> OnInterval {
        OnInterval {
            tau: self.fs.tau,
            m1: self.cp.m1,
            y0: y_prev * (-self.cp.t_off / self.fs.tau).exp(),
            i_v,
            local,
            forced,
        }
    }

    /// Filter output at local time `t` of the on interval starting in state `cs`.
    pub fn filter_output(&self, cs: &CycleState, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
        }
        Ok(self.on_interval(cs).output(t))
    }

    /// Interference `w(t)` at local time `t` of the on interval starting at `t_abs`.
    pub fn interference_at(&self, t_abs: f64, t: f64) -> f64 {
        match self.is.phase_mode {
            PhaseMode::Locked => self.is.value(t),
            PhaseMode::Freerun => self.is.value(t_abs + t),
        }
    }

    /// First time `t >= t_on_min` at which the filter output reaches `i_c`.
    pub fn solve_on_time(&self, cs: &CycleState) -> Result<Crossing> {
        let iv = self.on_interval(cs);
        let mut c = first_crossing(
            |t| iv.eval(t),
            self.cp.i_c,
            self.cp.t_on_min,
            self.t_max(),
            self.bracket_step(),
            self.tol(),
        )?;
        if self.settings.detect_recrossing {
            c.crossings = self.count_crossings(&iv, &c);
            if c.crossings > 1 {
                c.monotone = false;
            }
        }
        Ok(c)
    }

    fn count_crossings(&self, iv: &OnInterval, c: &Crossing) -> usize {
        let h = self.bracket_step();
        let level = self.cp.i_c;
        let mut window = 2.0 * self.fs.tau;
        let wl = self.is.omega_l();
        if wl.is_finite() {
            window = window.max(2.0 * TAU / wl);
        }
        let end = (c.t_on + window).min(self.t_max());
        let mut count = 1;
        // Crossings hidden by blanking.
        let mut prev = iv.output(0.0) - level;
        let mut t = 0.0;
        while t < self.cp.t_on_min {
            t = (t + h).min(self.cp.t_on_min);
            let e = iv.output(t) - level;
            if (e >= 0.0) != (prev >= 0.0) {
                count += 1;
            }
            prev = e;
        }
        // Re-crossings after the first one.
        let mut t = c.t_on + h;
        let mut prev = iv.output(c.t_on + 0.5 * h) - level;
        while t <= end {
            let e = iv.output(t) - level;
            if (e >= 0.0) != (prev >= 0.0) {
                count += 1;
            }
            prev = e;
            t += h;
        }
        count
    }

    /// One cycle: returns the next state and the record of this cycle.
    pub fn step_cycle(&self, cs: &CycleState) -> Result<(CycleState, CycleRecord, Crossing)> {
        let iv = self.on_interval(cs);
        let c = first_crossing(
            |t| iv.eval(t),
            self.cp.i_c,
            self.cp.t_on_min,
            self.t_max(),
            self.bracket_step(),
            self.tol(),
        )
        .map_err(|e| e.at_cycle(cs.n))?;
        let i_v = iv.valley();
        let i_p = i_v + self.cp.m1 * c.t_on;
        // A clamped cycle turns off above the command; keep the true filter state.
        let y_prev = if c.clamped {
            iv.output(c.t_on)
        } else {
            self.cp.i_c
        };
        let record = CycleRecord {
            n: cs.n,
            t_abs: cs.t_abs,
            t_on: c.t_on,
            i_p,
            i_v,
            clamped: c.clamped,
        };
        let next = CycleState {
            i_p_prev: i_p,
            y_prev,
            t_abs: cs.t_abs + c.t_on + self.cp.t_off,
            n: cs.n + 1,
        };
        Ok((next, record, c))
    }

    pub fn advance_cycle(&self, cs: &CycleState) -> Result<CycleState> {
        self.step_cycle(cs).map(|(next, _, _)| next)
    }

    /// Periodic steady state for command `i_c` (locked phase or no interference).
    pub fn equilibrium(&self, i_c: f64) -> Result<OperatingPoint> {
        if !(i_c > 0.0 && i_c <= self.cp.i_max) {
            return Err(Error::invalid(
                "i_c",
                format!("command must lie in (0, {}], got {i_c}", self.cp.i_max),
            ));
        }
        let op = self.steady_state(i_c)?;
        let floor = 1e-9 * i_c.max(self.cp.m2 * self.cp.t_off);
        if op.i_v < -floor {
            return Err(Error::Infeasible(format!(
                "valley current {:.6e} A is negative",
                op.i_v
            )));
        }
        Ok(op)
    }

    /// Steady state without the valley-current feasibility check.
    pub fn steady_state(&self, i_c: f64) -> Result<OperatingPoint> {
        if self.is.phase_mode == PhaseMode::Freerun && !self.is.is_empty() {
            return Err(Error::Unsupported(
                "free-running interference has no periodic fixed point".into(),
            ));
        }
        let cp = &self.cp;
        let tau = self.fs.tau;
        let t_on = cp.balanced_on_time();
        if t_on < cp.t_on_min {
            return Err(Error::Infeasible(format!(
                "balanced on time {t_on:e} s is below t_on_min {:e} s",
                cp.t_on_min
            )));
        }
        let t_period = t_on + cp.t_off;
        let one_minus_b = -(-t_period / tau).exp_m1();
        let one_minus_d = -(-t_on / tau).exp_m1();
        let ramp = cp.m1 * (t_on - tau * one_minus_d);
        let i_v = (i_c * one_minus_b - ramp - self.locked.zero_state(t_on)) / one_minus_d;
        Ok(OperatingPoint {
            i_c,
            i_p: i_v + cp.m1 * t_on,
            i_v,
            t_on,
            t_period,
        })
    }

    /// Command reproduced by an operating point through the steady-state identity
    /// `I_c = [I_v (1 - e^{-T_on/tau}) + ramp(T_on) + z(T_on)] / (1 - e^{-T/tau})`.
    pub fn steady_state_command(&self, op: &OperatingPoint) -> f64 {
        let tau = self.fs.tau;
        let one_minus_d = -(-op.t_on / tau).exp_m1();
        let one_minus_b = -(-op.t_period / tau).exp_m1();
        let ramp = self.cp.m1 * (op.t_on - tau * one_minus_d);
        (op.i_v * one_minus_d + ramp + self.locked.zero_state(op.t_on)) / one_minus_b
    }

    /// Samples the output slope on `[t_on_min, t_on_min + horizon]` at step
    /// `(t_on_min + t_off) / 1e4`.
    pub fn continuity_check(&self, probe: ContinuityProbe) -> ContinuityReport {
        let step = (self.cp.t_on_min + self.cp.t_off) / 1e4;
        self.continuity_check_with(probe, step, self.continuity_horizon())
    }

    /// Default slope-sampling window: `20 max(tau, t_off)` plus two periods of
    /// the slowest tone.
    pub fn continuity_horizon(&self) -> f64 {
        let mut h = 20.0 * self.fs.tau.max(self.cp.t_off);
        let wl = self.is.omega_l();
        if wl.is_finite() {
            h += 2.0 * TAU / wl;
        }
        h
    }

    pub fn continuity_check_with(
        &self,
        probe: ContinuityProbe,
        step: f64,
        horizon: f64,
    ) -> ContinuityReport {
        let iv = match probe {
            ContinuityProbe::WorstCase => {
                self.on_interval_with(0.0, self.cp.i_max, self.is.clone(), self.locked.clone())
            }
            ContinuityProbe::State(cs) => self.on_interval(&cs),
        };
        let t0 = self.cp.t_on_min;
        let n = (horizon / step).ceil() as usize;
        let mut min_slope = f64::INFINITY;
        let mut t_at_min = t0;
        for i in 0..=n {
            let t = t0 + i as f64 * step;
            let s = iv.eval(t).1;
            if s < min_slope {
                min_slope = s;
                t_at_min = t;
            }
        }
        ContinuityReport {
            monotone: min_slope > 0.0,
            min_slope,
            t_at_min,
            samples: n + 1,
        }
    }
}

/// Scans `f` from `t_start` in steps of `step` for the first point where the
/// value reaches `level`, then bisects to `tol`. `f` returns value and slope.
pub(crate) fn first_crossing<F>(
    f: F,
    level: f64,
    t_start: f64,
    t_max: f64,
    step: f64,
    tol: f64,
) -> Result<Crossing>
where
    F: Fn(f64) -> (f64, f64),
{
    let (y0, s0) = f(t_start);
    if y0 >= level {
        return Ok(Crossing {
            t_on: t_start,
            slope: s0,
            clamped: true,
            monotone: s0 > 0.0,
            min_slope: s0,
            crossings: 1,
        });
    }
    let mut min_slope = s0;
    let mut lo = t_start;
    let mut k = 1u64;
    let hi = loop {
        let t = t_start + k as f64 * step;
        if t > t_max {
            return Err(Error::NoCrossing { t_max, cycle: None });
        }
        let (y, s) = f(t);
        if y >= level {
            break t;
        }
        min_slope = min_slope.min(s);
        lo = t;
        k += 1;
    };
    let mut hi = hi;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid).0 >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t_on = 0.5 * (lo + hi);
    let slope = f(t_on).1;
    min_slope = min_slope.min(slope);
    Ok(Crossing {
        t_on,
        slope,
        clamped: false,
        monotone: min_slope > 0.0,
        min_slope,
        crossings: 1,
    })
}
