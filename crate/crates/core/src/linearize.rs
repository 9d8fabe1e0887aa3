//! Small-signal model of the loop at an operating point.
//!
//! Perturbing the previous peak by `dip` moves the crossing by
//! `dt = -c1 dip / (c2 + m1 c1)`, so the one-cycle map has the single pole
//! `lambda = c2 / (c2 + m1 c1)` with `c1 = 1 - exp(-T_on/tau)` and
//! `c2 = -(b/tau) I_c + (d/tau) I_v + g'(T_on) + (d/tau) g(0)`.

use serde::Serialize;

use crate::criteria::{psi1, psi2};
use crate::cycle::{CurrentLoop, CycleState, OperatingPoint, SolverSettings};
use crate::error::{Error, Result};
use crate::params::PhaseMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearizedModel {
    pub c1: f64,
    pub c2: f64,
    /// `exp(-T/tau)`, also the zero of `P(z) = 1 - exp(-T/tau) z^-1`.
    pub b_pole: f64,
    /// `exp(-T_on/tau)`.
    pub d: f64,
    /// `K = 1 / (1 - exp(-T_on/tau))`.
    pub k_gain: f64,
    pub psi1: f64,
    pub psi2: f64,
    /// Filter output slope at the crossing, `c2 + m1 c1`.
    pub loop_slope: f64,
    pub lambda_cl: f64,
    pub m1: f64,
}

impl LinearizedModel {
    /// `P(z)` evaluated at a real `z`.
    pub fn p_of_z(&self, z: f64) -> f64 {
        1.0 - self.b_pole / z
    }
}

fn refuse_freerun(lp: &CurrentLoop) -> Result<()> {
    let is = lp.interference();
    if is.phase_mode == PhaseMode::Freerun && !is.is_empty() {
        return Err(Error::Unsupported(
            "linearization needs locked-phase or no interference".into(),
        ));
    }
    Ok(())
}

pub fn linearize(lp: &CurrentLoop, op: &OperatingPoint) -> Result<LinearizedModel> {
    refuse_freerun(lp)?;
    let tau = lp.tau();
    let cp = lp.converter();
    let d = (-op.t_on / tau).exp();
    let b_pole = (-op.t_period / tau).exp();
    let c1 = -(-op.t_on / tau).exp_m1();
    let p1 = psi1(lp.forced_response(), tau, op.t_on);
    let p2 = psi2(op.i_v, op.i_c, op.t_on, cp.t_off, tau);
    let c2 = p1 + p2;
    let loop_slope = c2 + cp.m1 * c1;
    if loop_slope <= 0.0 {
        return Err(Error::NonMonotone { slope: loop_slope });
    }
    Ok(LinearizedModel {
        c1,
        c2,
        b_pole,
        d,
        k_gain: 1.0 / c1,
        psi1: p1,
        psi2: p2,
        loop_slope,
        lambda_cl: c2 / loop_slope,
        m1: cp.m1,
    })
}

/// Central-difference derivative of the exact map `i_p[n-1] -> i_p[n]` at the
/// operating point, with the filter state pinned at the command.
pub fn fd_jacobian(lp: &CurrentLoop, op: &OperatingPoint, h_step: f64) -> Result<f64> {
    refuse_freerun(lp)?;
    if !(h_step > 0.0 && h_step.is_finite()) {
        return Err(Error::invalid("h_step", "must be positive"));
    }
    let t_off = lp.converter().t_off;
    let exact = lp.with_command(op.i_c)?.with_settings(SolverSettings {
        tol: Some(1e-15 * t_off),
        ..*lp.settings()
    });
    let map = |ip: f64| -> Result<f64> {
        let (_, rec, _) = exact.step_cycle(&CycleState::new(ip, op.i_c))?;
        Ok(rec.i_p)
    };
    Ok((map(op.i_p + h_step)? - map(op.i_p - h_step)?) / (2.0 * h_step))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocusPoint {
    pub kappa: f64,
    pub pole_re: f64,
    pub pole_im: f64,
}

/// Closed-loop pole as the comparator feedback is scaled by `kappa`:
/// `lambda(kappa) = c2 / (c2 + kappa m1 c1)`.
pub fn root_locus(model: &LinearizedModel, gains: &[f64]) -> Vec<LocusPoint> {
    locus(model.c2, model.m1 * model.c1, gains)
}

/// The same locus for an unfiltered sense (`tau -> 0`), where `c1 = 1` and
/// only the interference slope `w'(T_on)` remains in `c2`.
pub fn root_locus_unfiltered(
    lp: &CurrentLoop,
    op: &OperatingPoint,
    gains: &[f64],
) -> Result<Vec<LocusPoint>> {
    refuse_freerun(lp)?;
    let c2 = lp.interference().derivative(op.t_on);
    Ok(locus(c2, lp.converter().m1, gains))
}

fn locus(c2: f64, feedback: f64, gains: &[f64]) -> Vec<LocusPoint> {
    gains
        .iter()
        .map(|&kappa| {
            let pole = if kappa.is_infinite() {
                0.0
            } else {
                c2 / (c2 + kappa * feedback)
            };
            LocusPoint {
                kappa,
                pole_re: pole,
                pole_im: 0.0,
            }
        })
        .collect()
}
