//! Cycle-by-cycle simulation of the loop, empirical stability classification,
//! and the block-model quantities (`xi`, `i_e`) used by the small-gain argument.
//!
//! Waveforms are reconstructed from the closed-form filter solution; nothing
//! here integrates an ODE.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::criteria::{psi1, psi2};
use crate::cycle::{first_crossing, CurrentLoop, CycleRecord, CycleState, OperatingPoint};
use crate::error::{Error, Result};
use crate::params::{ConverterParams, FilterSpec, InterferenceSpec, PhaseMode};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<CycleRecord>,
    pub final_state: CycleState,
    /// At least one cycle showed a non-positive output slope before its crossing.
    pub non_monotone: bool,
}

impl Trajectory {
    pub fn peaks(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.i_p)
    }
}

pub fn simulate(lp: &CurrentLoop, init: CycleState, n_cycles: usize) -> Result<Trajectory> {
    if n_cycles == 0 {
        return Err(Error::invalid("n_cycles", "must be at least 1"));
    }
    let mut records = Vec::with_capacity(n_cycles);
    let mut state = init;
    let mut non_monotone = false;
    for _ in 0..n_cycles {
        let (next, rec, c) = lp.step_cycle(&state)?;
        non_monotone |= !c.monotone;
        records.push(rec);
        state = next;
    }
    Ok(Trajectory {
        records,
        final_state: state,
        non_monotone,
    })
}

/// One dense waveform sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaveSample {
    pub t: f64,
    /// Inductor current.
    pub i_l: f64,
    /// Sense signal fed to the filter (zero while blanked in the off interval).
    pub i_m: f64,
    /// Signal seen by the comparator.
    pub y_filter: f64,
}

#[allow(clippy::too_many_arguments)]
fn push_off_interval(
    out: &mut Vec<WaveSample>,
    t_start: f64,
    i_p: f64,
    m2: f64,
    t_off: f64,
    y_end: f64,
    tau: Option<f64>,
    dt: f64,
) {
    let n = (t_off / dt).ceil().max(1.0) as usize;
    for k in 1..=n {
        let s = t_off * k as f64 / n as f64;
        out.push(WaveSample {
            t: t_start + s,
            i_l: i_p - m2 * s,
            i_m: 0.0,
            y_filter: tau.map_or(0.0, |tau| y_end * (-s / tau).exp()),
        });
    }
}

/// Dense samples of `n_cycles` cycles of the filtered loop, spaced at most `dt`.
pub fn waveform(
    lp: &CurrentLoop,
    init: CycleState,
    n_cycles: usize,
    dt: f64,
) -> Result<Vec<WaveSample>> {
    check_dt(dt)?;
    let cp = *lp.converter();
    let mut out = Vec::new();
    let mut state = init;
    for _ in 0..n_cycles {
        let iv = lp.on_interval(&state);
        let (next, rec, _) = lp.step_cycle(&state)?;
        let n = (rec.t_on / dt).ceil().max(1.0) as usize;
        for k in 0..=n {
            let t = rec.t_on * k as f64 / n as f64;
            out.push(WaveSample {
                t: state.t_abs + t,
                i_l: rec.i_v + cp.m1 * t,
                i_m: iv.sense(t),
                y_filter: iv.output(t),
            });
        }
        let y_end = iv.output(rec.t_on);
        push_off_interval(
            &mut out,
            state.t_abs + rec.t_on,
            rec.i_p,
            cp.m2,
            cp.t_off,
            y_end,
            Some(lp.tau()),
            dt,
        );
        state = next;
    }
    Ok(out)
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("dt", "must be positive"))
    }
}

/// Same as [`waveform`] for a loop whose comparator sees the raw sense.
pub fn waveform_unfiltered(
    cp: &ConverterParams,
    is: &InterferenceSpec,
    init_peak: f64,
    n_cycles: usize,
    dt: f64,
) -> Result<Vec<WaveSample>> {
    check_dt(dt)?;
    cp.validate()?;
    is.validate()?;
    let step = {
        let mut h = cp.t_off;
        if is.omega_max() > 0.0 {
            h = h.min(std::f64::consts::TAU / is.omega_max());
        }
        h / 50.0
    };
    let t_max = 50.0 * cp.t_off;
    let tol = 1e-10 * cp.t_off;
    let mut out = Vec::new();
    let mut i_p_prev = init_peak;
    let mut t_abs = 0.0;
    for n in 0..n_cycles {
        let local = is.at_cycle_start(t_abs);
        let i_v = i_p_prev - cp.m2 * cp.t_off;
        let sense = |t: f64| i_v + cp.m1 * t + local.value(t);
        let c = first_crossing(
            |t| (sense(t), cp.m1 + local.derivative(t)),
            cp.i_c,
            cp.t_on_min,
            t_max,
            step,
            tol,
        )
        .map_err(|e| e.at_cycle(n as u64))?;
        let steps = (c.t_on / dt).ceil().max(1.0) as usize;
        for k in 0..=steps {
            let t = c.t_on * k as f64 / steps as f64;
            let m = sense(t);
            out.push(WaveSample {
                t: t_abs + t,
                i_l: i_v + cp.m1 * t,
                i_m: m,
                y_filter: m,
            });
        }
        let i_p = i_v + cp.m1 * c.t_on;
        push_off_interval(
            &mut out,
            t_abs + c.t_on,
            i_p,
            cp.m2,
            cp.t_off,
            0.0,
            None,
            dt,
        );
        i_p_prev = i_p;
        t_abs += c.t_on + cp.t_off;
    }
    Ok(out)
}

/// The four sense-signal variants: interference on/off times filter on/off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variant {
    InterferenceUnfiltered = 0,
    InterferenceFiltered = 1,
    CleanUnfiltered = 2,
    CleanFiltered = 3,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::InterferenceUnfiltered,
        Variant::InterferenceFiltered,
        Variant::CleanUnfiltered,
        Variant::CleanFiltered,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }
}

/// Runs all four variants from the same initial peak current, each with the
/// filter state (when present) starting at the command.
pub fn comparison_waveforms(
    cp: &ConverterParams,
    fs: &FilterSpec,
    is: &InterferenceSpec,
    init_peak: f64,
    n_cycles: usize,
    dt: f64,
) -> Result<Vec<(Variant, Vec<WaveSample>)>> {
    let clean = InterferenceSpec {
        components: Vec::new(),
        phase_mode: is.phase_mode,
    };
    let init = CycleState::new(init_peak, cp.i_c);
    Variant::ALL
        .iter()
        .map(|&v| {
            let wave = match v {
                Variant::InterferenceUnfiltered => {
                    waveform_unfiltered(cp, is, init_peak, n_cycles, dt)?
                }
                Variant::CleanUnfiltered => {
                    waveform_unfiltered(cp, &clean, init_peak, n_cycles, dt)?
                }
                Variant::InterferenceFiltered => {
                    waveform(&CurrentLoop::new(*cp, *fs, is.clone())?, init, n_cycles, dt)?
                }
                Variant::CleanFiltered => waveform(
                    &CurrentLoop::new(*cp, *fs, clean.clone())?,
                    init,
                    n_cycles,
                    dt,
                )?,
            };
            Ok((v, wave))
        })
        .collect()
}

/// Ordered worst to best so that `min` picks the worst verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Unstable,
    Inconclusive,
    Stable,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Stable => "stable",
            Classification::Unstable => "unstable",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceReason {
    NoCrossing,
    BoundExit,
    Oscillation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub classification: Classification,
    /// Largest number of cycles any trajectory needed to settle (stable only).
    pub cycles_to_converge: Option<usize>,
    /// Largest trailing-window spread or disagreement between trajectories [A].
    pub residual: f64,
    pub reason: Option<DivergenceReason>,
    /// Some cycle had a non-monotone filter output before its crossing.
    pub multiple_crossings: bool,
}

impl StabilityVerdict {
    /// Multiple initial conditions sample, rather than prove, global behavior.
    pub const SCOPE: &'static str = "empirical-global";

    fn unstable(reason: DivergenceReason, multiple_crossings: bool) -> Self {
        Self {
            classification: Classification::Unstable,
            cycles_to_converge: None,
            residual: f64::INFINITY,
            reason: Some(reason),
            multiple_crossings,
        }
    }

    /// Worst of two verdicts; convergence counts take the maximum.
    pub fn worst(self, other: Self) -> Self {
        let mut out = if other.classification < self.classification {
            other
        } else {
            self
        };
        out.multiple_crossings = self.multiple_crossings || other.multiple_crossings;
        if out.classification == Classification::Stable {
            out.cycles_to_converge = self.cycles_to_converge.max(other.cycles_to_converge);
            out.residual = self.residual.max(other.residual);
        }
        out
    }
}

/// `count` initial states with peaks spread over `[0.1 i_c, 1.5 i_c]` and the
/// filter state at the command. Evenly spaced unless a seed asks for random draws.
pub fn default_inits(cp: &ConverterParams, count: usize, seed: Option<u64>) -> Vec<CycleState> {
    let lo = 0.1 * cp.i_c;
    let hi = 1.5 * cp.i_c;
    match seed {
        None => (0..count)
            .map(|k| {
                let f = if count > 1 {
                    k as f64 / (count - 1) as f64
                } else {
                    0.5
                };
                CycleState::new(lo + f * (hi - lo), cp.i_c)
            })
            .collect(),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| CycleState::new(rng.random_range(lo..=hi), cp.i_c))
                .collect()
        }
    }
}

/// Classifies the loop from several initial states.
///
/// Stable when every trajectory's last 10% of peaks spreads by at most
/// `eps * max(i_c, 1e-6)` and all trajectories settle on the same value.
/// Unstable on a missing crossing, a peak leaving `[-S/2, 2S]` with
/// `S = max(i_max, |I_p|)` of the interference-free steady state, or a
/// period-k cycle (`k <= 8`) wider than both the tolerance and roundoff.
pub fn classify_stability(
    lp: &CurrentLoop,
    inits: &[CycleState],
    n_cycles: usize,
    eps: f64,
) -> Result<StabilityVerdict> {
    if inits.is_empty() {
        return Err(Error::invalid("inits", "need at least one initial state"));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::invalid("eps", "must be positive"));
    }
    if n_cycles == 0 {
        return Err(Error::invalid("n_cycles", "must be at least 1"));
    }
    let cp = lp.converter();
    let tol = eps * cp.i_c.max(1e-6);
    let envelope = peak_envelope(lp);
    let time_invariant =
        lp.interference().is_empty() || lp.interference().phase_mode == PhaseMode::Locked;
    let window = (n_cycles / 10).max(16).min(n_cycles);

    let mut multiple = false;
    let mut means = Vec::with_capacity(inits.len());
    let mut residual: f64 = 0.0;
    let mut settle = 0usize;
    let mut all_settled = true;
    let mut peaks = Vec::with_capacity(n_cycles);
    for init in inits {
        peaks.clear();
        let mut state = *init;
        for _ in 0..n_cycles {
            let (next, rec, c) = match lp.step_cycle(&state) {
                Ok(v) => v,
                Err(Error::NoCrossing { .. }) => {
                    return Ok(StabilityVerdict::unstable(
                        DivergenceReason::NoCrossing,
                        multiple,
                    ))
                }
                Err(e) => return Err(e),
            };
            multiple |= !c.monotone;
            if !(rec.i_p >= envelope.0 && rec.i_p <= envelope.1) {
                return Ok(StabilityVerdict::unstable(
                    DivergenceReason::BoundExit,
                    multiple,
                ));
            }
            peaks.push(rec.i_p);
            state = next;
        }
        let tail = &peaks[n_cycles - window..];
        let (lo, hi) = tail
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        let spread = hi - lo;
        residual = residual.max(spread);
        if spread <= tol {
            let mean = tail.iter().sum::<f64>() / window as f64;
            means.push(mean);
            let first_outside = peaks.iter().rposition(|&x| (x - mean).abs() > tol);
            settle = settle.max(first_outside.map_or(0, |i| i + 1));
        } else {
            all_settled = false;
            // Roundoff dither around a fixed point is not an oscillation.
            let noise = 1e-9 * envelope.1;
            if time_invariant && spread > noise && periodic(tail, tol) {
                return Ok(StabilityVerdict::unstable(
                    DivergenceReason::Oscillation,
                    multiple,
                ));
            }
        }
    }

    if all_settled {
        let (lo, hi) = means
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                (a.min(x), b.max(x))
            });
        residual = residual.max(hi - lo);
        if hi - lo <= tol {
            return Ok(StabilityVerdict {
                classification: Classification::Stable,
                cycles_to_converge: Some(settle),
                residual,
                reason: None,
                multiple_crossings: multiple,
            });
        }
    }
    Ok(StabilityVerdict {
        classification: Classification::Inconclusive,
        cycles_to_converge: None,
        residual,
        reason: None,
        multiple_crossings: multiple,
    })
}

/// True when the sequence repeats with some period `2 <= k <= 8` to within `tol`.
fn periodic(tail: &[f64], tol: f64) -> bool {
    (2..=8).any(|k| tail.len() > 2 * k && tail.windows(k + 1).all(|w| (w[k] - w[0]).abs() <= tol))
}

fn peak_envelope(lp: &CurrentLoop) -> (f64, f64) {
    let cp = lp.converter();
    let clean = lp
        .with_interference(InterferenceSpec::none())
        .and_then(|l| l.steady_state(cp.i_c));
    let scale = match clean {
        Ok(op) if op.i_p.is_finite() => cp.i_max.max(op.i_p.abs()),
        _ => cp.i_max,
    };
    (-0.5 * scale, 2.0 * scale)
}

/// Block-model nonlinearity: change of the filter output at the crossing when
/// the on time deviates by `t_dev` from the operating point, ramp excluded.
pub fn xi_eval(lp: &CurrentLoop, op: &OperatingPoint, t_dev: f64) -> Result<f64> {
    let t = op.t_on + t_dev;
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!(
            "on-time deviation {t_dev} makes the on time negative"
        )));
    }
    let tau = lp.tau();
    let k1 = (-lp.converter().t_off / tau).exp();
    let forced = lp.forced_response();
    Ok(
        (op.i_c * k1 - op.i_v) * ((-t / tau).exp() - (-op.t_on / tau).exp()) + forced.zero_state(t)
            - forced.zero_state(op.t_on),
    )
}

/// `d xi / d t_on` at absolute on time `t_on`: `psi1(t_on) + psi2(t_on)` with
/// the operating-point valley current and command.
pub fn xi_slope(lp: &CurrentLoop, op: &OperatingPoint, t_on: f64) -> f64 {
    let tau = lp.tau();
    psi1(lp.forced_response(), tau, t_on) + psi2(op.i_v, op.i_c, t_on, lp.converter().t_off, tau)
}

/// One step of the `F` subsystem, `i_e[n] = exp(-t_on/tau) i_e[n-1] + u[n]`,
/// where `t_on` is the full on time of cycle `n`.
pub fn ie_step(ie_prev: f64, t_on: f64, u: f64, tau: f64) -> f64 {
    (-t_on / tau).exp() * ie_prev + u
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> CurrentLoop {
        CurrentLoop::new(
            ConverterParams {
                m1: 1.0,
                m2: 1.0,
                t_off: 1.0,
                t_on_min: 0.2,
                i_max: 4.0,
                i_c: 2.0,
            },
            FilterSpec { tau: 1.0 },
            InterferenceSpec::none(),
        )
        .unwrap()
    }

    #[test]
    fn fixed_point_trajectory() {
        let lp = worked();
        let op = lp.equilibrium(2.0).unwrap();
        let tr = simulate(&lp, CycleState::new(op.i_p, 2.0), 20).unwrap();
        for r in &tr.records {
            assert!((r.i_p - op.i_p).abs() < 1e-9);
            assert!((r.i_p - r.i_v - r.t_on).abs() < 1e-12);
        }
        assert!(simulate(&lp, CycleState::new(op.i_p, 2.0), 0).is_err());
    }

    #[test]
    fn geometric_convergence_matches_pole() {
        let lp = worked();
        let op = lp.equilibrium(2.0).unwrap();
        let tr = simulate(&lp, CycleState::new(1.0, 2.0), 40).unwrap();
        let e: Vec<f64> = tr.peaks().map(|p| p - op.i_p).collect();
        let ratio = e[15] / e[14];
        assert!((ratio - 0.452_13).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn stable_verdict() {
        let lp = worked();
        let inits = default_inits(lp.converter(), 5, None);
        let v = classify_stability(&lp, &inits, 200, 1e-3).unwrap();
        assert_eq!(v.classification, Classification::Stable);
        assert!(v.residual <= 1e-3 * 2.0);
        assert!(v.cycles_to_converge.unwrap() < 30);
    }

    #[test]
    fn vanishing_eps_is_inconclusive() {
        let lp = worked();
        let inits = default_inits(lp.converter(), 2, None);
        let v = classify_stability(&lp, &inits, 50, 1e-300).unwrap();
        assert_eq!(v.classification, Classification::Inconclusive);
        assert!(classify_stability(&lp, &inits, 50, 0.0).is_err());
        assert!(classify_stability(&lp, &[], 50, 1e-3).is_err());
    }

    #[test]
    fn periodic_detection() {
        let seq: Vec<f64> = (0..40)
            .map(|i| if i % 2 == 0 { 1.0 } else { 2.0 })
            .collect();
        assert!(periodic(&seq, 1e-9));
        let seq: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        assert!(!periodic(&seq, 1e-9));
    }

    #[test]
    fn verdict_ordering() {
        let s = StabilityVerdict {
            classification: Classification::Stable,
            cycles_to_converge: Some(3),
            residual: 0.0,
            reason: None,
            multiple_crossings: false,
        };
        let u = StabilityVerdict::unstable(DivergenceReason::BoundExit, false);
        assert_eq!(s.worst(u).classification, Classification::Unstable);
        let s2 = StabilityVerdict {
            cycles_to_converge: Some(9),
            ..s
        };
        assert_eq!(s.worst(s2).cycles_to_converge, Some(9));
    }

    #[test]
    fn inits_spread_and_seed() {
        let cp = *worked().converter();
        let a = default_inits(&cp, 5, None);
        assert!((a[0].i_p_prev - 0.2).abs() < 1e-15 && (a[4].i_p_prev - 3.0).abs() < 1e-15);
        let b = default_inits(&cp, 5, Some(7));
        let c = default_inits(&cp, 5, Some(7));
        assert_eq!(b, c);
        assert!(b.iter().all(|s| s.i_p_prev >= 0.2 && s.i_p_prev <= 3.0));
    }

    #[test]
    fn xi_basics() {
        let lp = worked();
        let op = lp.equilibrium(2.0).unwrap();
        assert_eq!(xi_eval(&lp, &op, 0.0).unwrap(), 0.0);
        assert!(xi_eval(&lp, &op, -2.0).is_err());
        assert_eq!(ie_step(0.0, 1.0, 0.5, 1.0), 0.5);
        assert!((ie_step(1.0, 1.0, 0.0, 1.0) - (-1f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn filtered_trace_turns_off_later() {
        let lp = worked();
        let cp = *lp.converter();
        let waves = comparison_waveforms(
            &cp,
            lp.filter(),
            &InterferenceSpec::single(0.2, 9.0, 0.0, PhaseMode::Locked),
            2.0,
            1,
            1e-3,
        )
        .unwrap();
        assert_eq!(waves.len(), 4);
        let peak = |w: &Vec<WaveSample>| w.iter().map(|s| s.i_l).fold(f64::MIN, f64::max);
        assert!(peak(&waves[3].1) > peak(&waves[2].1));
    }
}
