//! C ABI over the chiralpoint model.
//!
//! Parameter sets live behind an opaque `CpParams` handle. Every call returns a
//! status code; on failure the message and the model's short error code are
//! kept per thread until the next call. Output arrays are caller-allocated and
//! must hold `n` doubles. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use chiralpoint::config::{self, FitQuantity, FreeParam};
use chiralpoint::dynamics::{self, DynamicsMethod};
use chiralpoint::fit::{self, FitProblem};
use chiralpoint::params::{DriveTarget, SystemParams};
use chiralpoint::quantum_yield::{self, YieldOptions};
use chiralpoint::scatter::{self, Mechanism, Route};
use chiralpoint::spectrum::ComplexSpectrum;
use chiralpoint::{response, Error};

pub const CP_OK: c_int = 0;
pub const CP_ERR_IO: c_int = 1;
/// Invalid configuration, parameters or input data.
pub const CP_ERR_INPUT: c_int = 2;
/// The model could not produce a result (singular, defective, non-convergent…).
pub const CP_ERR_NUMERICAL: c_int = 3;
/// Null pointer, bad UTF-8 or an out-of-range enum argument.
pub const CP_ERR_ARGUMENT: c_int = 4;
pub const CP_ERR_BUFFER_TOO_SMALL: c_int = 5;
pub const CP_ERR_PANIC: c_int = 6;

pub const CP_METHOD_SPECTRAL_FT: c_int = 0;
pub const CP_METHOD_DIRECT_ODE: c_int = 1;

pub const CP_DRIVE_EMITTER: c_int = 0;
pub const CP_DRIVE_PLASMON: c_int = 1;

pub const CP_ROUTE_EIGEN: c_int = 0;
pub const CP_ROUTE_DIRECT: c_int = 1;

pub const CP_MECHANISM_SUPERSCATTERING: c_int = 0;
pub const CP_MECHANISM_EIT_INTERMEDIATE: c_int = 1;
pub const CP_MECHANISM_OTHER: c_int = 2;

pub const CP_QUANTITY_PURCELL: c_int = 0;
pub const CP_QUANTITY_DENSITY: c_int = 1;

pub const CP_FREE_G1: u32 = 1;
pub const CP_FREE_GC: u32 = 2;
pub const CP_FREE_PHI: u32 = 4;

/// Opaque parameter set.
pub struct CpParams {
    inner: SystemParams,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CpYieldOptions {
    /// Nonzero counts γ_nr as absorption.
    pub include_gamma_nr: c_int,
    /// 1 on, 0 off, −1 when κ_i > 0.
    pub include_kappa_i: c_int,
    pub target: c_int,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CpYield {
    pub eta: f64,
    pub eta0: f64,
    pub eta_r: f64,
    pub eta_d: f64,
    pub delta_at_max: f64,
    pub phi_r_gain_at_max: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CpScatterSummary {
    pub sigma0: f64,
    pub sigma_sup: f64,
    pub sigma_so: f64,
    pub mechanism: c_int,
    pub condition: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CpEnhancement {
    pub fp_ratio: f64,
    pub width_ratio: f64,
    pub omega_peak: f64,
    pub fwhm: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CpFit {
    pub g1: f64,
    pub gc: f64,
    pub phi: f64,
    /// Standard errors; NaN for parameters held fixed.
    pub g1_err: f64,
    pub gc_err: f64,
    pub phi_err: f64,
    pub condition: f64,
    pub normalized_residual: f64,
}

enum Fail {
    Argument(String),
    Buffer(usize),
    Model(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Model(e)
    }
}

type FfiResult<T> = std::result::Result<T, Fail>;

struct LastError {
    message: CString,
    code: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn c_string(s: &str) -> CString {
    CString::new(s.replace('\0', " ")).expect("interior NULs removed")
}

fn record(message: &str, code: &str) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(LastError { message: c_string(message), code: c_string(code) }));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> c_int {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CP_OK,
        Ok(Err(Fail::Argument(m))) => {
            record(&m, "argument");
            CP_ERR_ARGUMENT
        }
        Ok(Err(Fail::Buffer(need))) => {
            record(&format!("buffer too small: {need} bytes needed"), "buffer_too_small");
            CP_ERR_BUFFER_TOO_SMALL
        }
        Ok(Err(Fail::Model(e))) => {
            record(&e.to_string(), e.code());
            match e.exit_code() {
                1 => CP_ERR_IO,
                2 => CP_ERR_INPUT,
                _ => CP_ERR_NUMERICAL,
            }
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            record(&format!("internal panic: {msg}"), "panic");
            CP_ERR_PANIC
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Fail::Argument(format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Argument(format!("{what} is not UTF-8")))
}

unsafe fn params<'a>(p: *const CpParams) -> FfiResult<&'a SystemParams> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| Fail::Argument("params handle is null".into()))
}

unsafe fn input<'a>(p: *const f64, n: usize, what: &str) -> FfiResult<&'a [f64]> {
    if p.is_null() {
        return Err(Fail::Argument(format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn output<'a>(p: *mut f64, n: usize, what: &str) -> FfiResult<&'a mut [f64]> {
    if p.is_null() {
        return Err(Fail::Argument(format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(Fail::Argument(format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn hand_out(out: *mut *mut CpParams, p: SystemParams) -> FfiResult<()> {
    put(out, Box::into_raw(Box::new(CpParams { inner: p })), "out")
}

fn copy_into(dst: &mut [f64], src: &[f64]) {
    dst.copy_from_slice(src);
}

// snprintf-style: writes what fits (NUL-terminated) and returns the full length
unsafe fn write_text(s: &CStr, buf: *mut c_char, cap: usize) -> usize {
    let bytes = s.to_bytes();
    if !buf.is_null() && cap > 0 {
        let n = bytes.len().min(cap - 1);
        std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
        *buf.add(n) = 0;
    }
    bytes.len()
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message of this thread into `buf` (truncated to
/// `cap` − 1 bytes) and returns its full length; 0 when the last call succeeded.
#[no_mangle]
pub unsafe extern "C" fn cp_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |e| write_text(&e.message, buf, cap)))
}

/// Short identifier of the last error of this thread, e.g. "defective_matrix";
/// NULL when the last call succeeded. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn cp_last_error_code() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |e| e.code.as_ptr()))
}

/// Parses a JSON config (same schema as the CLI; a "preset" key is honoured).
#[no_mangle]
pub unsafe extern "C" fn cp_params_from_json(json: *const c_char, out: *mut *mut CpParams) -> c_int {
    guard(|| {
        let cfg = config::load_str(text(json, "json")?)?;
        hand_out(out, cfg.params)
    })
}

#[no_mangle]
pub unsafe extern "C" fn cp_params_from_preset(name: *const c_char, out: *mut *mut CpParams) -> c_int {
    guard(|| {
        let cfg = config::load_preset(text(name, "name")?)?;
        hand_out(out, cfg.params)
    })
}

#[no_mangle]
pub unsafe extern "C" fn cp_params_clone(p: *const CpParams, out: *mut *mut CpParams) -> c_int {
    guard(|| hand_out(out, *params(p)?))
}

/// Copy of `p` with the mirror removed.
#[no_mangle]
pub unsafe extern "C" fn cp_params_baseline(p: *const CpParams, out: *mut *mut CpParams) -> c_int {
    guard(|| hand_out(out, params(p)?.baseline()))
}

/// Releases a handle; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cp_params_free(p: *mut CpParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Sets a dotted parameter path such as "couplings.g1" or "photon.q_c". The
/// handle is unchanged when the result would be invalid.
#[no_mangle]
pub unsafe extern "C" fn cp_params_set(p: *mut CpParams, path: *const c_char, value: f64) -> c_int {
    guard(|| {
        let h = p.as_mut().ok_or_else(|| Fail::Argument("params handle is null".into()))?;
        let mut next = h.inner;
        next.set_path(text(path, "path")?, value)?;
        h.inner = next.validated()?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn cp_params_get(p: *const CpParams, path: *const c_char, out: *mut f64) -> c_int {
    guard(|| put(out, params(p)?.get_path(text(path, "path")?)?, "out"))
}

/// Writes the resolved parameters as JSON. Needs `*needed` + 1 bytes; returns
/// CP_ERR_BUFFER_TOO_SMALL (with `*needed` set) when `cap` is short.
#[no_mangle]
pub unsafe extern "C" fn cp_params_to_json(p: *const CpParams, buf: *mut c_char, cap: usize, needed: *mut usize) -> c_int {
    guard(|| {
        let json = serde_json::to_string(params(p)?).map_err(|e| Fail::Argument(e.to_string()))?;
        let s = c_string(&json);
        if !needed.is_null() {
            *needed = json.len();
        }
        if buf.is_null() || cap <= json.len() {
            return Err(Fail::Buffer(json.len() + 1));
        }
        write_text(&s, buf, cap);
        Ok(())
    })
}

/// J(ω) in eV on `n` frequencies (eV, strictly increasing).
#[no_mangle]
pub unsafe extern "C" fn cp_spectral_density(p: *const CpParams, omega: *const f64, n: usize, out: *mut f64) -> c_int {
    guard(|| {
        let j = response::spectral_density(params(p)?, input(omega, n, "omega")?)?.re();
        copy_into(output(out, n, "out")?, &j);
        Ok(())
    })
}

/// Purcell factor J(ω)/J₀(ω); needs the emitter dipole moment.
#[no_mangle]
pub unsafe extern "C" fn cp_purcell(p: *const CpParams, omega: *const f64, n: usize, out: *mut f64) -> c_int {
    guard(|| {
        let f = response::purcell_spectrum(params(p)?, input(omega, n, "omega")?)?.re();
        copy_into(output(out, n, "out")?, &f);
        Ok(())
    })
}

/// F_p/F_p⁰ and Γ/Γ⁰ of the cavity peak against the mirror-free cavity.
#[no_mangle]
pub unsafe extern "C" fn cp_enhancement(p: *const CpParams, out: *mut CpEnhancement) -> c_int {
    guard(|| {
        let e = response::enhancement(params(p)?)?;
        let v = CpEnhancement { fp_ratio: e.fp_ratio, width_ratio: e.width_ratio, omega_peak: e.cep.omega_peak, fwhm: e.cep.fwhm };
        put(out, v, "out")
    })
}

/// g₁ᵒᵖᵗ = −√(3 Δ_ac κ_c)/2 in eV.
#[no_mangle]
pub unsafe extern "C" fn cp_optimal_g1(delta_ac: f64, kappa_c: f64, out: *mut f64) -> c_int {
    guard(|| put(out, response::optimal_g1(delta_ac, kappa_c)?.g1, "out"))
}

/// Emission spectrum S(ω) (eV⁻¹), Γ(ω) and Δ(ω) (eV). Any output may be NULL.
#[no_mangle]
pub unsafe extern "C" fn cp_emission(
    p: *const CpParams,
    omega: *const f64,
    n: usize,
    spectrum: *mut f64,
    gamma: *mut f64,
    shift: *mut f64,
) -> c_int {
    guard(|| {
        let r = dynamics::emission_spectrum(params(p)?, input(omega, n, "omega")?)?;
        for (dst, src) in [(spectrum, &r.spectrum), (gamma, &r.local_coupling), (shift, &r.lamb_shift)] {
            if !dst.is_null() {
                copy_into(output(dst, n, "out")?, &src.re());
            }
        }
        Ok(())
    })
}

/// Emitter population on a uniform time grid starting at 0 (fs).
#[no_mangle]
pub unsafe extern "C" fn cp_dynamics(p: *const CpParams, t_fs: *const f64, n: usize, method: c_int, out: *mut f64) -> c_int {
    guard(|| {
        let method = match method {
            CP_METHOD_SPECTRAL_FT => DynamicsMethod::SpectralFt,
            CP_METHOD_DIRECT_ODE => DynamicsMethod::DirectOde,
            m => return Err(Fail::Argument(format!("unknown dynamics method {m}"))),
        };
        let t: Vec<f64> = input(t_fs, n, "t_fs")?.iter().map(|&t| chiralpoint::units::fs_to_natural(t)).collect();
        let pop = dynamics::qe_dynamics(params(p)?, &t, method)?;
        copy_into(output(out, n, "out")?, &pop);
        Ok(())
    })
}

fn yield_options(o: Option<&CpYieldOptions>) -> FfiResult<(YieldOptions, DriveTarget)> {
    let Some(o) = o else { return Ok((YieldOptions::default(), DriveTarget::Emitter)) };
    let include_kappa_i = match o.include_kappa_i {
        -1 => None,
        0 => Some(false),
        1 => Some(true),
        v => return Err(Fail::Argument(format!("include_kappa_i must be -1, 0 or 1 (got {v})"))),
    };
    let target = match o.target {
        CP_DRIVE_EMITTER => DriveTarget::Emitter,
        CP_DRIVE_PLASMON => DriveTarget::Plasmon,
        t => return Err(Fail::Argument(format!("unknown drive target {t}"))),
    };
    Ok((YieldOptions { include_gamma_nr: o.include_gamma_nr != 0, include_kappa_i }, target))
}

/// Maximum quantum yield with and without the mirror. `opts` may be NULL for
/// the defaults (γ_nr counted, κ_i counted when nonzero, emitter drive).
#[no_mangle]
pub unsafe extern "C" fn cp_yield(p: *const CpParams, opts: *const CpYieldOptions, out: *mut CpYield) -> c_int {
    guard(|| {
        let (o, target) = yield_options(opts.as_ref())?;
        let c = quantum_yield::yield_cell(params(p)?, target, &o)?;
        let v = CpYield {
            eta: c.eta,
            eta0: c.eta0,
            eta_r: c.eta_r,
            eta_d: c.eta_d,
            delta_at_max: c.delta_at_max,
            phi_r_gain_at_max: c.phi_r_gain_at_max,
        };
        put(out, v, "out")
    })
}

/// η, Φ_r and Φ_d (unit drive) at detunings Δ_L = ω_c − ω_L. Any output may be NULL.
#[no_mangle]
pub unsafe extern "C" fn cp_yield_spectrum(
    p: *const CpParams,
    opts: *const CpYieldOptions,
    detuning: *const f64,
    n: usize,
    eta: *mut f64,
    phi_r: *mut f64,
    phi_d: *mut f64,
) -> c_int {
    guard(|| {
        let (o, target) = yield_options(opts.as_ref())?;
        let b = quantum_yield::yield_spectrum(params(p)?, input(detuning, n, "detuning")?, target, &o)?;
        let cols: [(*mut f64, fn(&quantum_yield::PowerBudget) -> f64); 3] =
            [(eta, |b| b.eta), (phi_r, |b| b.phi_r), (phi_d, |b| b.phi_d)];
        for (dst, f) in cols {
            if !dst.is_null() {
                let v: Vec<f64> = b.iter().map(f).collect();
                copy_into(output(dst, n, "out")?, &v);
            }
        }
        Ok(())
    })
}

/// Scattering σ(Δ) under plasmon drive, by eigenmode expansion or direct solve.
#[no_mangle]
pub unsafe extern "C" fn cp_scatter(p: *const CpParams, delta: *const f64, n: usize, route: c_int, out: *mut f64) -> c_int {
    guard(|| {
        let route = match route {
            CP_ROUTE_EIGEN => Route::Eigen,
            CP_ROUTE_DIRECT => Route::Direct,
            r => return Err(Fail::Argument(format!("unknown route {r}"))),
        };
        let s = scatter::scatter_spectrum(params(p)?, input(delta, n, "delta")?, route)?.re();
        copy_into(output(out, n, "out")?, &s);
        Ok(())
    })
}

/// σ(0) split into the superradiant self term and the rest, with the mechanism label.
#[no_mangle]
pub unsafe extern "C" fn cp_scatter_decompose(p: *const CpParams, out: *mut CpScatterSummary) -> c_int {
    guard(|| {
        let d = scatter::decompose_sigma0(params(p)?)?;
        let mechanism = match d.mechanism {
            Mechanism::Superscattering => CP_MECHANISM_SUPERSCATTERING,
            Mechanism::EITIntermediate => CP_MECHANISM_EIT_INTERMEDIATE,
            Mechanism::Other => CP_MECHANISM_OTHER,
        };
        let v = CpScatterSummary {
            sigma0: d.sigma_total,
            sigma_sup: d.sigma_sup,
            sigma_so: d.sigma_so,
            mechanism,
            condition: d.eigen.condition,
        };
        put(out, v, "out")
    })
}

/// Least-squares fit of the parameters selected by `free` (CP_FREE_* bits) to
/// `n` samples; the handle supplies everything else. Weights may be NULL (relative residuals).
#[no_mangle]
pub unsafe extern "C" fn cp_fit(
    p: *const CpParams,
    omega: *const f64,
    data: *const f64,
    weights: *const f64,
    n: usize,
    free: u32,
    quantity: c_int,
    out: *mut CpFit,
) -> c_int {
    guard(|| {
        let quantity = match quantity {
            CP_QUANTITY_PURCELL => FitQuantity::Purcell,
            CP_QUANTITY_DENSITY => FitQuantity::Density,
            q => return Err(Fail::Argument(format!("unknown fit quantity {q}"))),
        };
        if free == 0 || free & !(CP_FREE_G1 | CP_FREE_GC | CP_FREE_PHI) != 0 {
            return Err(Fail::Argument(format!("invalid free-parameter mask {free:#x}")));
        }
        let free_set: Vec<FreeParam> = [(CP_FREE_G1, FreeParam::G1), (CP_FREE_GC, FreeParam::Gc), (CP_FREE_PHI, FreeParam::Phi)]
            .into_iter()
            .filter(|(bit, _)| free & bit != 0)
            .map(|(_, f)| f)
            .collect();
        let spectrum = ComplexSpectrum::from_real(input(omega, n, "omega")?.to_vec(), input(data, n, "data")?.to_vec())?;
        let weights = if weights.is_null() { None } else { Some(input(weights, n, "weights")?.to_vec()) };
        let r = fit::fit_g1(&FitProblem { data: spectrum, fixed: *params(p)?, free: free_set, weights, quantity })?;
        let err = |f: FreeParam| r.estimates.iter().find(|e| e.param == f).map_or(f64::NAN, |e| e.std_error);
        let v = CpFit {
            g1: r.params.couplings.g1,
            gc: r.params.couplings.gc,
            phi: r.params.phi(),
            g1_err: err(FreeParam::G1),
            gc_err: err(FreeParam::Gc),
            phi_err: err(FreeParam::Phi),
            condition: r.condition,
            normalized_residual: r.normalized_residual,
        };
        put(out, v, "out")
    })
}
