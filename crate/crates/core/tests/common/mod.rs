//! Independent numerical oracles shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::TAU;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    // Start from a few panels so oscillatory integrands are not undersampled.
    let panels = 16;
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * w;
            let hi = lo + w;
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_rec(f, lo, hi, fa, fm, fb, whole, tol / panels as f64, 60)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Zero-state response of `tau y' = u - y` by quadrature of `int_0^t u(s) h(t - s) ds`.
pub fn convolve<U: Fn(f64) -> f64>(u: U, tau: f64, t: f64, tol: f64) -> f64 {
    let integrand = |s: f64| u(s) * (-(t - s) / tau).exp() / tau;
    simpson(&integrand, 0.0, t, tol)
}

/// Classical RK4 on `tau y' = u(t) - y` from `y0` over `[0, t]` with `n` steps.
pub fn rk4<U: Fn(f64) -> f64>(u: U, tau: f64, y0: f64, t: f64, n: usize) -> f64 {
    let h = t / n as f64;
    let rhs = |s: f64, y: f64| (u(s) - y) / tau;
    let mut y = y0;
    for i in 0..n {
        let s = i as f64 * h;
        let k1 = rhs(s, y);
        let k2 = rhs(s + h / 2.0, y + h / 2.0 * k1);
        let k3 = rhs(s + h / 2.0, y + h / 2.0 * k2);
        let k4 = rhs(s + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

/// Single tone `amp sin(omega t + phase)`.
#[derive(Debug, Clone, Copy)]
pub struct Tone {
    pub amp: f64,
    pub omega: f64,
    pub phase: f64,
}

impl Tone {
    pub fn none() -> Self {
        Self {
            amp: 0.0,
            omega: 1.0,
            phase: 0.0,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.amp * (self.omega * t + self.phase).sin()
    }
}

/// Plain model of the loop used as an oracle: the filter is fed the sense
/// `i_v + m1 t + w(t)` during the on interval and nothing during the off
/// interval; the on interval ends when the output first reaches `i_c`
/// after `t_on_min`. Output is computed by quadrature, crossing by bisection.
#[derive(Debug, Clone, Copy)]
pub struct OracleLoop {
    pub m1: f64,
    pub m2: f64,
    pub t_off: f64,
    pub t_on_min: f64,
    pub tau: f64,
    pub i_c: f64,
    pub tone: Tone,
}

impl OracleLoop {
    pub fn output(&self, ip_prev: f64, y_prev: f64, t: f64) -> f64 {
        let iv = ip_prev - self.m2 * self.t_off;
        let sense = |s: f64| iv + self.m1 * s + self.tone.at(s);
        y_prev * (-(self.t_off + t) / self.tau).exp() + convolve(sense, self.tau, t, 1e-14)
    }

    /// Peak current after one cycle, with the filter state at `i_c`.
    pub fn map(&self, ip_prev: f64) -> f64 {
        let iv = ip_prev - self.m2 * self.t_off;
        let f = |t: f64| self.output(ip_prev, self.i_c, t) - self.i_c;
        let mut lo = self.t_on_min;
        assert!(f(lo) < 0.0, "oracle map starts above the command");
        let step = self.tau.min(self.t_off) / 20.0;
        let mut hi = lo + step;
        while f(hi) < 0.0 {
            lo = hi;
            hi += step;
            assert!(hi < 1e3 * self.tau.max(self.t_off), "no crossing");
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        iv + self.m1 * 0.5 * (lo + hi)
    }
}

pub fn omega_from_hat(omega_hat: f64, t_base: f64) -> f64 {
    TAU * omega_hat / t_base
}
