//! Sufficient conditions for a continuous static map (first criterion) and
//! for global asymptotic stability (second criterion, small-gain argument),
//! together with every intermediate bound of the small-gain argument.

use serde::Serialize;

use crate::error::Result;
use crate::filter::ForcedResponse;
use crate::params::{normalize, ConverterParams, FilterSpec, InterferenceSpec, NormalizedParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem1 {
    pub lhs: f64,
    pub pass: bool,
    /// `1 - lhs`.
    pub margin: f64,
}

/// Continuity criterion:
/// `A/((1-d) tau) (1 + d att) + b I_max/((1-d) tau) < 1` in normalized units.
pub fn theorem1_margin(np: &NormalizedParams) -> Theorem1 {
    let one_minus_d = 1.0 - np.d;
    let scale = one_minus_d * np.tau_hat;
    let lhs = np.a_ub_hat / scale * (1.0 + np.d * np.attenuation()) + np.b * np.i_max_hat / scale;
    Theorem1 {
        lhs,
        pass: lhs < 1.0,
        margin: 1.0 - lhs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem2Coefficients {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

pub fn theorem2_coefficients(np: &NormalizedParams) -> Theorem2Coefficients {
    let d = np.d;
    let b = np.b;
    let one_minus_d = 1.0 - d;
    let sq = one_minus_d * one_minus_d;
    Theorem2Coefficients {
        k0: d * (np.t_on_min_hat + np.tau_hat * d - np.tau_hat) / sq,
        k1: 1.0 / one_minus_d,
        k2: 1.0 + (1.0 + d) * d / sq,
        k3: (d - b) / sq,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem2 {
    pub lhs_a: f64,
    pub lhs_b: f64,
    pub pass: bool,
    /// `1/2 - lhs_a`.
    pub margin_a: f64,
    /// `1/2 - lhs_b`.
    pub margin_b: f64,
}

impl Theorem2 {
    pub fn margin(&self) -> f64 {
        self.margin_a.min(self.margin_b)
    }
}

/// Stability criterion: both `lhs_a` and `lhs_b` below one half.
pub fn theorem2_margin(np: &NormalizedParams) -> Theorem2 {
    let k = theorem2_coefficients(np);
    let tau = np.tau_hat;
    let a = np.a_ub_hat;
    let att = np.attenuation();
    let lhs_a = k.k0 / tau + k.k1 * a / tau + k.k2 * a * att / tau;
    let lhs_b = k.k3 * np.i_max_hat / tau + a / tau + a * att / tau;
    Theorem2 {
        lhs_a,
        lhs_b,
        pass: lhs_a < 0.5 && lhs_b < 0.5,
        margin_a: 0.5 - lhs_a,
        margin_b: 0.5 - lhs_b,
    }
}

/// Interference part of the loop slope,
/// `psi1(t) = g'(t) + exp(-t/tau) g(0) / tau`.
pub fn psi1(forced: &ForcedResponse, tau: f64, t_on: f64) -> f64 {
    forced.g_prime(t_on) + (-t_on / tau).exp() * forced.g0 / tau
}

/// Current part of the loop slope,
/// `psi2(t) = i_v exp(-t/tau)/tau - i_c exp(-(t + t_off)/tau)/tau`.
pub fn psi2(i_v: f64, i_c: f64, t_on: f64, t_off: f64, tau: f64) -> f64 {
    (i_v * (-t_on / tau).exp() - i_c * (-(t_on + t_off) / tau).exp()) / tau
}

/// `psi2` with the valley current eliminated through the steady-state
/// relation between command, on time and valley current.
pub fn psi2_transition(
    i_c: f64,
    t_on: f64,
    m1: f64,
    t_off: f64,
    tau: f64,
    forced: &ForcedResponse,
) -> f64 {
    let dp = (-t_on / tau).exp();
    let bp = (-(t_on + t_off) / tau).exp();
    let one_minus_dp = 1.0 - dp;
    (dp - bp) / (one_minus_dp * tau) * i_c
        - dp / (one_minus_dp * tau) * (1.0 + (dp - 1.0) / (t_on / tau)) * m1 * t_on
        - dp / (one_minus_dp * tau) * forced.zero_state(t_on)
}

/// Both criteria plus the quantities of the small-gain argument, in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub thm1_lhs: f64,
    pub thm1_pass: bool,
    pub thm1_margin: f64,
    pub thm2_lhs_a: f64,
    pub thm2_lhs_b: f64,
    pub thm2_pass: bool,
    pub thm2_margin_a: f64,
    pub thm2_margin_b: f64,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// `exp(-t_off/tau)`.
    #[serde(rename = "K1")]
    pub big_k1: f64,
    /// `exp(-t_off/tau) - 1`.
    #[serde(rename = "K2")]
    pub big_k2: f64,
    pub psi1_max: f64,
    pub psi2_min: f64,
    pub psi2_max: f64,
    pub b_xi: f64,
    #[serde(rename = "gain_G")]
    pub gain_g: f64,
    #[serde(rename = "gain_F")]
    pub gain_f: f64,
    pub small_gain_product: f64,
    /// `|psi2_min - psi1_max| / (m1 (1 - d))`.
    pub proof_lhs_a: f64,
    /// `|psi2_max + psi1_max| / (m1 (1 - d))`.
    pub proof_lhs_b: f64,
    pub normalized: NormalizedParams,
}

pub fn proof_internals(
    cp: &ConverterParams,
    fs: &FilterSpec,
    is: &InterferenceSpec,
) -> Result<StabilityReport> {
    let np = normalize(cp, fs, is)?;
    let t1 = theorem1_margin(&np);
    let t2 = theorem2_margin(&np);
    let k = theorem2_coefficients(&np);

    let tau = fs.tau;
    let a_ub = is.a_ub();
    let wl = is.omega_l();
    let att = if wl.is_finite() {
        1.0 / (1.0 + (wl * tau).powi(2)).sqrt()
    } else {
        0.0
    };
    let d = (-cp.t_on_min / tau).exp();
    let b = (-(cp.t_on_min + cp.t_off) / tau).exp();
    let one_minus_d = 1.0 - d;

    let psi1_max = a_ub / tau + att * a_ub / tau;
    let psi2_min =
        -d / (one_minus_d * tau) * (1.0 + (d - 1.0) / (cp.t_on_min / tau)) * cp.m1 * cp.t_on_min
            - (1.0 + d) / one_minus_d * d / tau * a_ub * att;
    let psi2_max = (d - b) / (one_minus_d * tau) * cp.i_max;
    let low = (psi2_min - psi1_max).abs();
    let high = (psi2_max + psi1_max).abs();
    let b_xi = low.max(high);
    let gain_g = 2.0 / cp.m1;
    let gain_f = 1.0 / one_minus_d;
    let big_k1 = (-cp.t_off / tau).exp();

    Ok(StabilityReport {
        thm1_lhs: t1.lhs,
        thm1_pass: t1.pass,
        thm1_margin: t1.margin,
        thm2_lhs_a: t2.lhs_a,
        thm2_lhs_b: t2.lhs_b,
        thm2_pass: t2.pass,
        thm2_margin_a: t2.margin_a,
        thm2_margin_b: t2.margin_b,
        k0: k.k0,
        k1: k.k1,
        k2: k.k2,
        k3: k.k3,
        big_k1,
        big_k2: big_k1 - 1.0,
        psi1_max,
        psi2_min,
        psi2_max,
        b_xi,
        gain_g,
        gain_f,
        small_gain_product: gain_g * gain_f * b_xi,
        proof_lhs_a: low / (cp.m1 * one_minus_d),
        proof_lhs_b: high / (cp.m1 * one_minus_d),
        normalized: np,
    })
}
