//! Physical and normalized parameter records.
//!
//! Normalization uses the off time as the time base: every time is divided by
//! `t_off`, every current by `m1 * t_off`, and frequencies become cycles per
//! time base (`omega * t_off / 2pi`).

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn positive(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::invalid(field, format!("must be finite, got {v}")));
    }
    if v <= 0.0 {
        return Err(Error::invalid(field, format!("must be positive, got {v}")));
    }
    Ok(())
}

fn nonnegative(field: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::invalid(field, format!("must be finite, got {v}")));
    }
    if v < 0.0 {
        return Err(Error::invalid(
            field,
            format!("must be nonnegative, got {v}"),
        ));
    }
    Ok(())
}

/// Converter constants of the constant off-time current loop (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterParams {
    /// Inductor current slope during the on interval [A/s].
    pub m1: f64,
    /// Magnitude of the inductor current slope during the off interval [A/s].
    pub m2: f64,
    /// Fixed off time [s].
    pub t_off: f64,
    /// Minimum on time; the comparator is blanked before it [s].
    pub t_on_min: f64,
    /// Largest admissible peak-current command [A].
    pub i_max: f64,
    /// Peak-current command used by simulation and linearization [A].
    pub i_c: f64,
}

impl ConverterParams {
    pub fn validate(&self) -> Result<()> {
        positive("m1", self.m1)?;
        positive("m2", self.m2)?;
        positive("t_off", self.t_off)?;
        positive("t_on_min", self.t_on_min)?;
        positive("i_max", self.i_max)?;
        nonnegative("i_c", self.i_c)?;
        if self.i_c > self.i_max {
            return Err(Error::invalid(
                "i_c",
                format!("command {} exceeds i_max {}", self.i_c, self.i_max),
            ));
        }
        Ok(())
    }

    /// Equilibrium on time implied by period balance, `m1 * T_on = m2 * t_off`.
    pub fn balanced_on_time(&self) -> f64 {
        self.m2 * self.t_off / self.m1
    }
}

/// First-order low-pass filter on the current sense.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    /// Time constant [s].
    pub tau: f64,
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        positive("tau", self.tau)
    }
}

/// One interference tone `amp * sin(omega * t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sinusoid {
    pub amp: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

/// How the interference phase relates to the switching instants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    /// Phase restarts at the beginning of every on interval.
    Locked,
    /// Phase evolves in absolute time.
    #[default]
    Freerun,
}

impl std::str::FromStr for PhaseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "locked" => Ok(PhaseMode::Locked),
            "freerun" => Ok(PhaseMode::Freerun),
            other => Err(Error::invalid(
                "phase",
                format!("expected \"locked\" or \"freerun\", got {other:?}"),
            )),
        }
    }
}

/// Amplitude- and bandwidth-limited interference as a finite sum of tones.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InterferenceSpec {
    pub components: Vec<Sinusoid>,
    pub phase_mode: PhaseMode,
}

impl InterferenceSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn single(amp: f64, omega: f64, phase: f64, phase_mode: PhaseMode) -> Self {
        Self {
            components: vec![Sinusoid { amp, omega, phase }],
            phase_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.components.iter().enumerate() {
            nonnegative(&format!("interference[{i}].amp"), c.amp)?;
            positive(&format!("interference[{i}].omega"), c.omega)?;
            if !c.phase.is_finite() {
                return Err(Error::invalid(
                    format!("interference[{i}].phase"),
                    "must be finite",
                ));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Upper bound on the spectral mass, the sum of amplitudes.
    pub fn a_ub(&self) -> f64 {
        self.components.iter().map(|c| c.amp).sum()
    }

    /// Lowest interference frequency; `+inf` when there is no interference.
    pub fn omega_l(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.omega)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn omega_max(&self) -> f64 {
        self.components.iter().map(|c| c.omega).fold(0.0, f64::max)
    }

    /// `w(t)`.
    pub fn value(&self, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.amp * (c.omega * t + c.phase).sin())
            .sum()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.amp * c.omega * (c.omega * t + c.phase).cos())
            .sum()
    }

    /// The same tones seen from a local time origin shifted by `dt`.
    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| Sinusoid {
                    phase: (c.phase + c.omega * dt).rem_euclid(TAU),
                    ..*c
                })
                .collect(),
            phase_mode: self.phase_mode,
        }
    }

    /// Interference as seen by the on interval that starts at absolute time `t_abs`.
    pub fn at_cycle_start(&self, t_abs: f64) -> Self {
        match self.phase_mode {
            PhaseMode::Locked => self.clone(),
            PhaseMode::Freerun => self.shifted(t_abs),
        }
    }
}

/// Dimensionless quantities of the stability criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedParams {
    /// Time base used for normalization [s].
    pub t_base: f64,
    /// On slope used for current normalization [A/s].
    pub m1: f64,
    pub tau_hat: f64,
    pub a_ub_hat: f64,
    pub i_max_hat: f64,
    /// `+inf` without interference.
    pub omega_l_hat: f64,
    pub t_on_min_hat: f64,
    pub t_min_hat: f64,
    /// Decay over the minimum period, `exp(-t_min_hat / tau_hat)`.
    pub b: f64,
    /// Decay over the minimum on time, `exp(-t_on_min_hat / tau_hat)`.
    pub d: f64,
}

/// Physical values recovered from a [`NormalizedParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalBounds {
    pub tau: f64,
    pub a_ub: f64,
    pub i_max: f64,
    pub omega_l: f64,
    pub t_on_min: f64,
    pub t_off: f64,
}

impl NormalizedParams {
    /// Builds a record directly from hatted values with a unit time base and slope.
    pub fn from_hatted(
        tau_hat: f64,
        a_ub_hat: f64,
        i_max_hat: f64,
        omega_l_hat: f64,
        t_on_min_hat: f64,
    ) -> Result<Self> {
        positive("tau_hat", tau_hat)?;
        nonnegative("a_ub_hat", a_ub_hat)?;
        nonnegative("i_max_hat", i_max_hat)?;
        positive("t_on_min_hat", t_on_min_hat)?;
        if omega_l_hat.is_nan() || omega_l_hat <= 0.0 {
            return Err(Error::invalid("omega_l_hat", "must be positive"));
        }
        Ok(Self::assemble(
            1.0,
            1.0,
            tau_hat,
            a_ub_hat,
            i_max_hat,
            omega_l_hat,
            t_on_min_hat,
        ))
    }

    fn assemble(
        t_base: f64,
        m1: f64,
        tau_hat: f64,
        a_ub_hat: f64,
        i_max_hat: f64,
        omega_l_hat: f64,
        t_on_min_hat: f64,
    ) -> Self {
        let t_min_hat = t_on_min_hat + 1.0;
        Self {
            t_base,
            m1,
            tau_hat,
            a_ub_hat,
            i_max_hat,
            omega_l_hat,
            t_on_min_hat,
            t_min_hat,
            b: (-t_min_hat / tau_hat).exp(),
            d: (-t_on_min_hat / tau_hat).exp(),
        }
    }

    /// Interference attenuation `1 / sqrt(1 + (2pi omega_l_hat tau_hat)^2)`; zero without interference.
    pub fn attenuation(&self) -> f64 {
        let x = TAU * self.omega_l_hat * self.tau_hat;
        if x.is_infinite() {
            0.0
        } else {
            1.0 / (1.0 + x * x).sqrt()
        }
    }

    pub fn denormalize(&self) -> PhysicalBounds {
        let current = self.m1 * self.t_base;
        PhysicalBounds {
            tau: self.tau_hat * self.t_base,
            a_ub: self.a_ub_hat * current,
            i_max: self.i_max_hat * current,
            omega_l: self.omega_l_hat * TAU / self.t_base,
            t_on_min: self.t_on_min_hat * self.t_base,
            t_off: self.t_base,
        }
    }
}

/// Normalizes the physical parameters with `t_off` as the time base.
pub fn normalize(
    cp: &ConverterParams,
    fs: &FilterSpec,
    is: &InterferenceSpec,
) -> Result<NormalizedParams> {
    cp.validate()?;
    fs.validate()?;
    is.validate()?;
    let t_base = cp.t_off;
    let current = cp.m1 * t_base;
    Ok(NormalizedParams::assemble(
        t_base,
        cp.m1,
        fs.tau / t_base,
        is.a_ub() / current,
        cp.i_max / current,
        is.omega_l() * t_base / TAU,
        cp.t_on_min / t_base,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ConverterParams {
        ConverterParams {
            m1: 1.0,
            m2: 1.0,
            t_off: 1.0,
            t_on_min: 1.0,
            i_max: 1.0,
            i_c: 1.0,
        }
    }

    #[test]
    fn unit_parameters() {
        let np = normalize(&unit(), &FilterSpec { tau: 1.0 }, &InterferenceSpec::none()).unwrap();
        assert_eq!(np.tau_hat, 1.0);
        assert_eq!(np.t_on_min_hat, 1.0);
        assert_eq!(np.t_min_hat, 2.0);
        assert!((np.d - 0.367_879_441).abs() < 1e-9);
        assert!((np.b - 0.135_335_283).abs() < 1e-9);
        assert_eq!(np.a_ub_hat, 0.0);
        assert!(np.omega_l_hat.is_infinite());
        assert_eq!(np.attenuation(), 0.0);
    }

    #[test]
    fn tiny_tau_kills_decays() {
        let np = normalize(
            &unit(),
            &FilterSpec { tau: 1e-4 },
            &InterferenceSpec::none(),
        )
        .unwrap();
        assert!(np.d < 1e-100 && np.b < 1e-100);
    }

    #[test]
    fn scaled_example() {
        let cp = ConverterParams {
            m1: 2.0,
            t_off: 0.5,
            ..unit()
        };
        let is = InterferenceSpec::single(0.3, 20.0, 0.0, PhaseMode::Locked);
        let np = normalize(&cp, &FilterSpec { tau: 1.5 }, &is).unwrap();
        assert!((np.tau_hat - 3.0).abs() < 1e-15);
        assert!((np.a_ub_hat - 0.3).abs() < 1e-15);
        assert!((np.omega_l_hat - 1.591_549_430_918_953).abs() < 1e-12);
    }

    #[test]
    fn validation_names_field() {
        let err = normalize(
            &unit(),
            &FilterSpec { tau: -1.0 },
            &InterferenceSpec::none(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Invalid { ref field, .. } if field == "tau"));
        let cp = ConverterParams {
            m2: f64::NAN,
            ..unit()
        };
        let err = cp.validate().unwrap_err();
        assert!(matches!(err, Error::Invalid { ref field, .. } if field == "m2"));
        let cp = ConverterParams { i_c: 2.0, ..unit() };
        assert!(cp.validate().is_err());
    }

    #[test]
    fn derived_quantities() {
        let is = InterferenceSpec {
            components: vec![
                Sinusoid {
                    amp: 0.2,
                    omega: 5.0,
                    phase: 0.0,
                },
                Sinusoid {
                    amp: 0.3,
                    omega: 2.0,
                    phase: 1.0,
                },
            ],
            phase_mode: PhaseMode::Freerun,
        };
        assert!((is.a_ub() - 0.5).abs() < 1e-15);
        assert_eq!(is.omega_l(), 2.0);
        assert_eq!(is.omega_max(), 5.0);
        let sh = is.shifted(0.7);
        assert!((sh.value(0.3) - is.value(1.0)).abs() < 1e-12);
        let locked = InterferenceSpec {
            phase_mode: PhaseMode::Locked,
            ..is.clone()
        };
        assert_eq!(locked.at_cycle_start(3.0), locked);
    }
}
