//! Closed-form responses of the first-order low-pass filter
//! `h(t) = exp(-t/tau)/tau`, `q(t) = exp(-t/tau)`.
//!
//! Transforms follow the convention `g(t) = integral W(w) H(jw) exp(jwt) dw`
//! without a `1/2pi` factor, so a tone of amplitude `A` contributes exactly `A`
//! to the spectral mass `A_ub`.

use crate::error::{Error, Result};
use crate::params::{InterferenceSpec, NormalizedParams};

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        Err(Error::Domain(format!("time must be nonnegative, got {t}")))
    } else {
        Ok(())
    }
}

/// Kernels of a first-order low-pass filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterKernels {
    tau: f64,
}

impl FilterKernels {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid(
                "tau",
                format!("must be positive, got {tau}"),
            ));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Impulse response.
    pub fn h(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok((-t / self.tau).exp() / self.tau)
    }

    /// Zero-input response from unit initial state.
    pub fn q(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok((-t / self.tau).exp())
    }

    /// `|H(jw)|`.
    pub fn freq_response_mag(&self, omega: f64) -> f64 {
        let x = omega * self.tau;
        1.0 / (1.0 + x * x).sqrt()
    }

    /// Zero-state response to the unit step.
    pub fn step_response(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(-(-t / self.tau).exp_m1())
    }

    /// Zero-state response to the ramp `m1 * t`.
    pub fn ramp_response(&self, m1: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(m1 * (t + (-t / self.tau).exp_m1() * self.tau))
    }
}

/// Forced (steady-state) response `g(t) = (w * h)(t)` of the filter to the
/// interference tones, with per-tone gain and phase lag.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcedResponse {
    tau: f64,
    tones: Vec<Tone>,
    /// `g(0)`.
    pub g0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tone {
    gain: f64,
    omega: f64,
    /// `phase - atan(omega * tau)`.
    shifted_phase: f64,
    lag: f64,
}

impl ForcedResponse {
    pub fn new(is: &InterferenceSpec, tau: f64) -> Self {
        let tones: Vec<Tone> = is
            .components
            .iter()
            .map(|c| {
                let x = c.omega * tau;
                let lag = x.atan();
                Tone {
                    gain: c.amp / (1.0 + x * x).sqrt(),
                    omega: c.omega,
                    shifted_phase: c.phase - lag,
                    lag,
                }
            })
            .collect();
        let g0 = tones.iter().map(|t| t.gain * t.shifted_phase.sin()).sum();
        Self { tau, tones, g0 }
    }

    /// Per-tone amplitude `A_i / sqrt(1 + (w_i tau)^2)`.
    pub fn gains(&self) -> impl Iterator<Item = f64> + '_ {
        self.tones.iter().map(|t| t.gain)
    }

    /// Per-tone phase lag `atan(w_i tau)`.
    pub fn lags(&self) -> impl Iterator<Item = f64> + '_ {
        self.tones.iter().map(|t| t.lag)
    }

    pub fn is_empty(&self) -> bool {
        self.tones.is_empty()
    }

    pub fn g(&self, t: f64) -> f64 {
        self.tones
            .iter()
            .map(|k| k.gain * (k.omega * t + k.shifted_phase).sin())
            .sum()
    }

    pub fn g_prime(&self, t: f64) -> f64 {
        self.tones
            .iter()
            .map(|k| k.gain * k.omega * (k.omega * t + k.shifted_phase).cos())
            .sum()
    }

    /// `g(t)` and `g'(t)` in one pass.
    #[inline]
    pub fn g_and_prime(&self, t: f64) -> (f64, f64) {
        let mut g = 0.0;
        let mut gp = 0.0;
        for k in &self.tones {
            let (s, c) = (k.omega * t + k.shifted_phase).sin_cos();
            g += k.gain * s;
            gp += k.gain * k.omega * c;
        }
        (g, gp)
    }

    /// Zero-state response to `w(t) u(t)`: `g(t) - g(0) q(t)`.
    pub fn zero_state(&self, t: f64) -> f64 {
        self.g(t) - self.g0 * (-t / self.tau).exp()
    }

    /// Time derivative of [`ForcedResponse::zero_state`].
    pub fn zero_state_slope(&self, t: f64) -> f64 {
        self.g_prime(t) + self.g0 * (-t / self.tau).exp() / self.tau
    }
}

/// Zero-state filter response to the interference switched on at `t = 0`.
pub fn interference_zero_state(is: &InterferenceSpec, tau: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(ForcedResponse::new(is, tau).zero_state(t))
}

/// Derivative of the forced response `g'(t)`.
pub fn g_prime(is: &InterferenceSpec, tau: f64, t: f64) -> f64 {
    ForcedResponse::new(is, tau).g_prime(t)
}

/// Bounds `(sup |g|, sup |g'|)` in physical units:
/// `A_ub / sqrt(1 + (w_l tau)^2)` and `A_ub / tau`.
pub fn g_bounds(np: &NormalizedParams) -> (f64, f64) {
    let p = np.denormalize();
    (p.a_ub * np.attenuation(), p.a_ub / p.tau)
}

/// `integral W(w) / (jw) dw`, i.e. the value at zero of the zero-mean
/// antiderivative of `w`: `sum(-A_i cos(phi_i) / w_i)`.
pub fn spectral_moment(is: &InterferenceSpec) -> f64 {
    is.components
        .iter()
        .map(|c| -c.amp * c.phase.cos() / c.omega)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{PhaseMode, Sinusoid};
    use std::f64::consts::{FRAC_PI_2, PI};

    const E1: f64 = 0.367_879_441_171_442_33;

    #[test]
    fn kernels() {
        let k = FilterKernels::new(1.0).unwrap();
        assert_eq!(k.h(0.0).unwrap(), 1.0);
        assert_eq!(k.q(0.0).unwrap(), 1.0);
        let k2 = FilterKernels::new(2.0).unwrap();
        assert!((k2.h(2.0).unwrap() - E1 / 2.0).abs() < 1e-15);
        assert!((k2.q(2.0).unwrap() - E1).abs() < 1e-15);
        assert!(k.h(1e3).unwrap() < 1e-300);
        assert!(k.q(-1.0).is_err());
        assert!(k.step_response(-1e-9).is_err());
        assert!(k.ramp_response(1.0, f64::NAN).is_err());
        assert!(FilterKernels::new(0.0).is_err());
    }

    #[test]
    fn magnitude() {
        let k = FilterKernels::new(0.5).unwrap();
        assert_eq!(k.freq_response_mag(0.0), 1.0);
        assert!((k.freq_response_mag(2.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((k.freq_response_mag(20.0) - 1.0 / 101f64.sqrt()).abs() < 1e-15);
        assert!((k.freq_response_mag(20.0) - 0.099_504).abs() < 1e-6);
    }

    #[test]
    fn step_and_ramp() {
        let k = FilterKernels::new(1.0).unwrap();
        assert_eq!(k.step_response(0.0).unwrap(), 0.0);
        assert!((k.step_response(1.0).unwrap() - (1.0 - E1)).abs() < 1e-15);
        assert_eq!(k.ramp_response(1.0, 0.0).unwrap(), 0.0);
        assert!((k.ramp_response(1.0, 1.0).unwrap() - E1).abs() < 1e-15);
    }

    #[test]
    fn interference_example() {
        let is = InterferenceSpec::single(1.0, 1.0, 0.0, PhaseMode::Locked);
        let f = ForcedResponse::new(&is, 1.0);
        assert!((f.g0 + 0.5).abs() < 1e-15);
        assert_eq!(interference_zero_state(&is, 1.0, 0.0).unwrap(), 0.0);
        let v = interference_zero_state(&is, 1.0, PI).unwrap();
        assert!((v - (0.5 + 0.5 * (-PI).exp())).abs() < 1e-14);
        assert!((v - 0.521_60).abs() < 1e-5);
        assert!(interference_zero_state(&is, 1.0, -1.0).is_err());
        let (g, gp) = f.g_and_prime(0.3);
        assert!((g - f.g(0.3)).abs() < 1e-15 && (gp - f.g_prime(0.3)).abs() < 1e-15);
    }

    #[test]
    fn forced_gains_and_lags() {
        let is = InterferenceSpec {
            components: vec![
                Sinusoid {
                    amp: 1.0,
                    omega: 1.0,
                    phase: 0.0,
                },
                Sinusoid {
                    amp: 1.0,
                    omega: 4.0,
                    phase: 0.0,
                },
            ],
            phase_mode: PhaseMode::Locked,
        };
        let f = ForcedResponse::new(&is, 1.0);
        let gains: Vec<f64> = f.gains().collect();
        assert!(gains[0] <= 1.0 && gains[1] < gains[0]);
        let lags: Vec<f64> = f.lags().collect();
        assert!((lags[0] - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn bounds() {
        let np = NormalizedParams::from_hatted(1.0, 0.0, 1.0, f64::INFINITY, 1.0).unwrap();
        assert_eq!(g_bounds(&np), (0.0, 0.0));
        // A = 1, w = 1, tau = 1 with unit base: omega_l_hat = 1/2pi.
        let np = NormalizedParams::from_hatted(1.0, 1.0, 1.0, 1.0 / (2.0 * PI), 1.0).unwrap();
        let (gm, gpm) = g_bounds(&np);
        assert!((gm - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((gpm - 1.0).abs() < 1e-15);
        let is = InterferenceSpec::single(1.0, 1.0, 0.3, PhaseMode::Locked);
        let f = ForcedResponse::new(&is, 1.0);
        let peak = (0..10_000)
            .map(|i| f.g(i as f64 * 2.0 * PI / 10_000.0).abs())
            .fold(0.0, f64::max);
        assert!((peak - gm).abs() < 1e-6 && peak <= gm + 1e-15);
    }

    #[test]
    fn moment() {
        let is = InterferenceSpec::single(1.0, 3.0, FRAC_PI_2, PhaseMode::Locked);
        assert!(spectral_moment(&is).abs() < 1e-16);
        let is = InterferenceSpec::single(1.0, 2.0, 0.0, PhaseMode::Locked);
        assert_eq!(spectral_moment(&is), -0.5);
        let two = InterferenceSpec {
            components: vec![
                Sinusoid {
                    amp: 1.0,
                    omega: 2.0,
                    phase: 0.0,
                },
                Sinusoid {
                    amp: 3.0,
                    omega: 5.0,
                    phase: 1.0,
                },
            ],
            phase_mode: PhaseMode::Locked,
        };
        let expect = -0.5 - 3.0 * 1f64.cos() / 5.0;
        assert!((spectral_moment(&two) - expect).abs() < 1e-15);
        assert_eq!(spectral_moment(&InterferenceSpec::none()), 0.0);
    }
}
