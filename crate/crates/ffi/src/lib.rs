//! C ABI over the `lpfcm` analysis library.
//!
//! Every function returns an [`LpfcmStatus`]. On failure a description is kept
//! per thread and can be fetched with [`lpfcm_last_error_message`]. Loops are
//! opaque handles created by `lpfcm_loop_new` or `lpfcm_loop_from_config` and
//! released with `lpfcm_loop_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use lpfcm::criteria::proof_internals;
use lpfcm::cycle::{ContinuityProbe, CurrentLoop, CycleState};
use lpfcm::params::{ConverterParams, FilterSpec, InterferenceSpec, PhaseMode, Sinusoid};
use lpfcm::sim::{classify_stability, default_inits, simulate, Classification, DivergenceReason};
use lpfcm::{linearize, load_config, theorem1_margin, theorem2_margin, Error, NormalizedParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpfcmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Domain = 5,
    NoCrossing = 6,
    Infeasible = 7,
    NonMonotone = 8,
    Unsupported = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpfcmPhaseMode {
    Locked = 0,
    Freerun = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpfcmClassification {
    Unstable = 0,
    Inconclusive = 1,
    Stable = 2,
}

/// Divergence reason of an unstable verdict; `None` otherwise.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpfcmReason {
    None = 0,
    NoCrossing = 1,
    BoundExit = 2,
    Oscillation = 3,
}

/// Converter constants in SI units.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LpfcmConverter {
    pub m1: f64,
    pub m2: f64,
    pub t_off: f64,
    pub t_on_min: f64,
    pub i_max: f64,
    pub i_c: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LpfcmReport {
    pub thm1_lhs: f64,
    pub thm1_pass: bool,
    pub thm2_lhs_a: f64,
    pub thm2_lhs_b: f64,
    pub thm2_pass: bool,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub psi1_max: f64,
    pub psi2_min: f64,
    pub psi2_max: f64,
    pub b_xi: f64,
    pub gain_g: f64,
    pub gain_f: f64,
    pub small_gain_product: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LpfcmOperatingPoint {
    pub i_c: f64,
    pub i_p: f64,
    pub i_v: f64,
    pub t_on: f64,
    pub t_period: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LpfcmLinearModel {
    pub c1: f64,
    pub c2: f64,
    pub b_pole: f64,
    pub k_gain: f64,
    pub lambda_cl: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LpfcmVerdict {
    pub classification: LpfcmClassification,
    pub reason: LpfcmReason,
    /// `-1` unless the verdict is stable.
    pub cycles_to_converge: i64,
    pub residual: f64,
    pub multiple_crossings: bool,
}

/// Opaque loop handle.
pub struct LpfcmLoop {
    inner: CurrentLoop,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> LpfcmStatus {
    match e {
        Error::Invalid { .. } => LpfcmStatus::InvalidArgument,
        Error::Domain(_) => LpfcmStatus::Domain,
        Error::Parse(_) => LpfcmStatus::Parse,
        Error::Io(_) => LpfcmStatus::Io,
        Error::NoCrossing { .. } => LpfcmStatus::NoCrossing,
        Error::Infeasible(_) => LpfcmStatus::Infeasible,
        Error::NonMonotone { .. } => LpfcmStatus::NonMonotone,
        Error::Unsupported(_) => LpfcmStatus::Unsupported,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), (LpfcmStatus, String)>>(f: F) -> LpfcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LpfcmStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LpfcmStatus::Panic
        }
    }
}

fn lib<T>(r: lpfcm::Result<T>) -> Result<T, (LpfcmStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (LpfcmStatus, String) {
    (LpfcmStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn handle<'a>(h: *const LpfcmLoop) -> Result<&'a LpfcmLoop, (LpfcmStatus, String)> {
    h.as_ref().ok_or_else(|| null("loop"))
}

unsafe fn handle_mut<'a>(h: *mut LpfcmLoop) -> Result<&'a mut LpfcmLoop, (LpfcmStatus, String)> {
    h.as_mut().ok_or_else(|| null("loop"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (LpfcmStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies the calling thread's last error message into `buf` (NUL terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lpfcm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a loop without interference.
///
/// # Safety
/// `converter` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lpfcm_loop_new(
    converter: *const LpfcmConverter,
    tau: f64,
    out: *mut *mut LpfcmLoop,
) -> LpfcmStatus {
    guard(|| {
        let c = converter.as_ref().ok_or_else(|| null("converter"))?;
        let out = out_ref(out, "out")?;
        let cp = ConverterParams {
            m1: c.m1,
            m2: c.m2,
            t_off: c.t_off,
            t_on_min: c.t_on_min,
            i_max: c.i_max,
            i_c: c.i_c,
        };
        let inner = lib(CurrentLoop::new(
            cp,
            FilterSpec { tau },
            InterferenceSpec::none(),
        ))?;
        *out = Box::into_raw(Box::new(LpfcmLoop { inner }));
        Ok(())
    })
}

/// Creates a loop from a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lpfcm_loop_from_config(
    path: *const c_char,
    out: *mut *mut LpfcmLoop,
) -> LpfcmStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let out = out_ref(out, "out")?;
        let path = CStr::from_ptr(path).to_str().map_err(|_| {
            (
                LpfcmStatus::InvalidArgument,
                "path is not UTF-8".to_string(),
            )
        })?;
        let inner = lib(load_config(path).and_then(|c| c.current_loop()))?;
        *out = Box::into_raw(Box::new(LpfcmLoop { inner }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `h` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lpfcm_loop_free(h: *mut LpfcmLoop) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Adds the tone `amp sin(omega t + phase)` to the interference.
///
/// # Safety
/// `h` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn lpfcm_loop_add_interference(
    h: *mut LpfcmLoop,
    amp: f64,
    omega: f64,
    phase: f64,
) -> LpfcmStatus {
    guard(|| {
        let h = handle_mut(h)?;
        let mut is = h.inner.interference().clone();
        is.components.push(Sinusoid { amp, omega, phase });
        h.inner = lib(h.inner.with_interference(is))?;
        Ok(())
    })
}

/// # Safety
/// `h` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn lpfcm_loop_set_phase_mode(
    h: *mut LpfcmLoop,
    mode: LpfcmPhaseMode,
) -> LpfcmStatus {
    guard(|| {
        let h = handle_mut(h)?;
        let mut is = h.inner.interference().clone();
        is.phase_mode = match mode {
            LpfcmPhaseMode::Locked => PhaseMode::Locked,
            LpfcmPhaseMode::Freerun => PhaseMode::Freerun,
        };
        h.inner = lib(h.inner.with_interference(is))?;
        Ok(())
    })
}

/// Evaluates both criteria and the small-gain quantities.
///
/// # Safety
/// `h` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lpfcm_loop_check(
    h: *const LpfcmLoop,
    out: *mut LpfcmReport,
) -> LpfcmStatus {
    guard(|| {
        let lp = &handle(h)?.inner;
        let out = out_ref(out, "out")?;
        let r = lib(proof_internals(
            lp.converter(),
            lp.filter(),
            lp.interference(),
        ))?;
        *out = LpfcmReport {
            thm1_lhs: r.thm1_lhs,
            thm1_pass: r.thm1_pass,
            thm2_lhs_a: r.thm2_lhs_a,
            thm2_lhs_b: r.thm2_lhs_b,
            thm2_pass: r.thm2_pass,
            k0: r.k0,
            k1: r.k1,
            k2: r.k2,
            k3: r.k3,
            psi1_max: r.psi1_max,
            psi2_min: r.psi2_min,
            psi2_max: r.psi2_max,
            b_xi: r.b_xi,
            gain_g: r.gain_g,
            gain_f: r.gain_f,
            small_gain_product: r.small_gain_product,
        };
        Ok(())
    })
}

/// Worst-case continuity check: whether the filtered sense stays increasing,
/// and its smallest slope.
///
/// # Safety
/// `h` must be a valid handle; `monotone` and `min_slope` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lpfcm_loop_continuity(
    h: *const LpfcmLoop,
    monotone: *mut bool,
    min_slope: *mut f64,
) -> LpfcmStatus {
    guard(|| {
        let lp = &handle(h)?.inner;
        let monotone = out_ref(monotone, "monotone")?;
        let min_slope = out_ref(min_slope, "min_slope")?;
        let r = lp.continuity_check(ContinuityProbe::WorstCase);
        *monotone = r.monotone;
        *min_slope = r.min_slope;
        Ok(())
    })
}

/// Periodic steady state at the configured command.
///
/// # Safety
/// `h` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lpfcm_loop_equilibrium(
    h: *const LpfcmLoop,
    out: *mut LpfcmOperatingPoint,
) -> LpfcmStatus {
    guard(|| {
        let lp = &handle(h)?.inner;
        let out = out_ref(out, "out")?;
        let op = lib(lp.equilibrium(lp.converter().i_c))?;
        *out = LpfcmOperatingPoint {
            i_c: op.i_c,
            i_p: op.i_p,
            i_v: op.i_v,
            t_on: op.t_on,
            t_period: op.t_period,
        };
        Ok(())
    })
}

/// Small-signal model at the equilibrium.
///
/// # Safety
/// `h` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lpfcm_loop_linearize(
    h: *const LpfcmLoop,
    out: *mut LpfcmLinearModel,
) -> LpfcmStatus {
    guard(|| {
        let lp = &handle(h)?.inner;
        let out = out_ref(out, "out")?;
        let op = lib(lp.equilibrium(lp.converter().i_c))?;
        let m = lib(linearize(lp, &op))?;
        *out = LpfcmLinearModel {
            c1: m.c1,
            c2: m.c2,
            b_pole: m.b_pole,
            k_gain: m.k_gain,
            lambda_cl: m.lambda_cl,
        };
        Ok(())
    })
}

/// Simulates `n_cycles` from previous peak `ip0` (filter state at the
/// command), writing the peak current and on time of each cycle.
/// `peaks` and `t_on` may be null; otherwise they must hold `n_cycles` values.
///
/// # Safety
/// `h` must be a valid handle; non-null buffers must hold `n_cycles` doubles.
#[no_mangle]
pub unsafe extern "C" fn lpfcm_loop_simulate(
    h: *const LpfcmLoop,
    ip0: f64,
    n_cycles: usize,
    peaks: *mut f64,
    t_on: *mut f64,
) -> LpfcmStatus {
    guard(|| {
        let lp = &handle(h)?.inner;
        let tr = lib(simulate(
            lp,
            CycleState::new(ip0, lp.converter().i_c),
            n_cycles,
        ))?;
        for (i, r) in tr.records.iter().enumerate() {
            if !peaks.is_null() {
                *peaks.add(i) = r.i_p;
            }
            if !t_on.is_null() {
                *t_on.add(i) = r.t_on;
            }
        }
        Ok(())
    })
}

/// Empirical stability verdict from `n_inits` initial peaks spread over
/// `[0.1 I_c, 1.5 I_c]`, or drawn uniformly when `use_seed` is set.
///
/// # Safety
/// `h` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lpfcm_loop_classify(
    h: *const LpfcmLoop,
    n_inits: usize,
    n_cycles: usize,
    eps: f64,
    use_seed: bool,
    seed: u64,
    out: *mut LpfcmVerdict,
) -> LpfcmStatus {
    guard(|| {
        let lp = &handle(h)?.inner;
        let out = out_ref(out, "out")?;
        if n_inits == 0 {
            return Err((
                LpfcmStatus::InvalidArgument,
                "n_inits must be at least 1".into(),
            ));
        }
        let inits = default_inits(lp.converter(), n_inits, use_seed.then_some(seed));
        let v = lib(classify_stability(lp, &inits, n_cycles, eps))?;
        *out = LpfcmVerdict {
            classification: match v.classification {
                Classification::Unstable => LpfcmClassification::Unstable,
                Classification::Inconclusive => LpfcmClassification::Inconclusive,
                Classification::Stable => LpfcmClassification::Stable,
            },
            reason: match v.reason {
                None => LpfcmReason::None,
                Some(DivergenceReason::NoCrossing) => LpfcmReason::NoCrossing,
                Some(DivergenceReason::BoundExit) => LpfcmReason::BoundExit,
                Some(DivergenceReason::Oscillation) => LpfcmReason::Oscillation,
            },
            cycles_to_converge: v.cycles_to_converge.map_or(-1, |c| c as i64),
            residual: v.residual,
            multiple_crossings: v.multiple_crossings,
        };
        Ok(())
    })
}

/// Continuity criterion from normalized values. Pass `INFINITY` for
/// `omega_l_hat` when there is no interference.
///
/// # Safety
/// `lhs` and `pass` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn lpfcm_theorem1(
    tau_hat: f64,
    a_ub_hat: f64,
    i_max_hat: f64,
    omega_l_hat: f64,
    t_on_min_hat: f64,
    lhs: *mut f64,
    pass: *mut bool,
) -> LpfcmStatus {
    guard(|| {
        let lhs = out_ref(lhs, "lhs")?;
        let pass = out_ref(pass, "pass")?;
        let np = lib(NormalizedParams::from_hatted(
            tau_hat,
            a_ub_hat,
            i_max_hat,
            omega_l_hat,
            t_on_min_hat,
        ))?;
        let t = theorem1_margin(&np);
        *lhs = t.lhs;
        *pass = t.pass;
        Ok(())
    })
}

/// Stability criterion from normalized values.
///
/// # Safety
/// `lhs_a`, `lhs_b` and `pass` must be valid pointers.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn lpfcm_theorem2(
    tau_hat: f64,
    a_ub_hat: f64,
    i_max_hat: f64,
    omega_l_hat: f64,
    t_on_min_hat: f64,
    lhs_a: *mut f64,
    lhs_b: *mut f64,
    pass: *mut bool,
) -> LpfcmStatus {
    guard(|| {
        let lhs_a = out_ref(lhs_a, "lhs_a")?;
        let lhs_b = out_ref(lhs_b, "lhs_b")?;
        let pass = out_ref(pass, "pass")?;
        let np = lib(NormalizedParams::from_hatted(
            tau_hat,
            a_ub_hat,
            i_max_hat,
            omega_l_hat,
            t_on_min_hat,
        ))?;
        let t = theorem2_margin(&np);
        *lhs_a = t.lhs_a;
        *lhs_b = t.lhs_b;
        *pass = t.pass;
        Ok(())
    })
}
