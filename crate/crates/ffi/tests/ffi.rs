use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use chiralpoint::config;
use chiralpoint::dynamics::{self, DynamicsMethod};
use chiralpoint::quantum_yield::{yield_cell, YieldOptions};
use chiralpoint::params::DriveTarget;
use chiralpoint::response;
use chiralpoint::scatter::{decompose_sigma0, scatter_spectrum, Route};
use chiralpoint::spectrum::linspace;
use chiralpoint_ffi::*;

struct Handle(*mut CpParams);

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { cp_params_free(self.0) };
    }
}

fn preset(name: &str) -> Handle {
    let name = CString::new(name).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { cp_params_from_preset(name.as_ptr(), &mut h) }, CP_OK);
    assert!(!h.is_null());
    Handle(h)
}

fn last_message() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { cp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n < buf.len());
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn last_code() -> Option<String> {
    let p = cp_last_error_code();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

#[test]
fn version_matches_core() {
    let v = unsafe { CStr::from_ptr(cp_version()) }.to_str().unwrap();
    assert_eq!(v, chiralpoint::export::VERSION);
}

#[test]
fn spectra_match_the_library() {
    let h = preset("fig2");
    let p = config::load_preset("fig2").unwrap().params;
    let grid = linspace(1.49, 1.51, 301);
    let mut j = vec![0.0; grid.len()];
    let mut f = vec![0.0; grid.len()];
    unsafe {
        assert_eq!(cp_spectral_density(h.0, grid.as_ptr(), grid.len(), j.as_mut_ptr()), CP_OK);
        assert_eq!(cp_purcell(h.0, grid.as_ptr(), grid.len(), f.as_mut_ptr()), CP_OK);
    }
    assert_eq!(j, response::spectral_density(&p, &grid).unwrap().re());
    assert_eq!(f, response::purcell_spectrum(&p, &grid).unwrap().re());

    let mut s = vec![0.0; grid.len()];
    let mut g = vec![0.0; grid.len()];
    unsafe {
        assert_eq!(cp_emission(h.0, grid.as_ptr(), grid.len(), s.as_mut_ptr(), g.as_mut_ptr(), ptr::null_mut()), CP_OK);
    }
    for (gw, jw) in g.iter().zip(&j) {
        assert!((gw - 2.0 * jw).abs() <= 1e-10 * jw.abs());
    }

    let mut e = CpEnhancement::default();
    assert_eq!(unsafe { cp_enhancement(h.0, &mut e) }, CP_OK);
    assert_eq!(e.fp_ratio, response::enhancement(&p).unwrap().fp_ratio);
}

#[test]
fn dynamics_and_yield_match_the_library() {
    let h = preset("fig4bd");
    let p = config::load_preset("fig4bd").unwrap().params;
    let t_fs = linspace(0.0, 2000.0, 201);
    let mut pop = vec![0.0; t_fs.len()];
    assert_eq!(unsafe { cp_dynamics(h.0, t_fs.as_ptr(), t_fs.len(), CP_METHOD_DIRECT_ODE, pop.as_mut_ptr()) }, CP_OK);
    let t: Vec<f64> = t_fs.iter().map(|&x| chiralpoint::units::fs_to_natural(x)).collect();
    assert_eq!(pop, dynamics::qe_dynamics(&p, &t, DynamicsMethod::DirectOde).unwrap());
    assert_eq!(unsafe { cp_dynamics(h.0, t_fs.as_ptr(), t_fs.len(), 7, pop.as_mut_ptr()) }, CP_ERR_ARGUMENT);

    let h = preset("fig7f");
    let p = config::load_preset("fig7f").unwrap().params;
    let mut y = CpYield::default();
    assert_eq!(unsafe { cp_yield(h.0, ptr::null(), &mut y) }, CP_OK);
    let c = yield_cell(&p, DriveTarget::Emitter, &YieldOptions::default()).unwrap();
    assert_eq!((y.eta, y.eta0), (c.eta, c.eta0));

    let opts = CpYieldOptions { include_gamma_nr: 0, include_kappa_i: -1, target: CP_DRIVE_EMITTER };
    assert_eq!(unsafe { cp_yield(h.0, &opts, &mut y) }, CP_OK);
    let off = YieldOptions { include_gamma_nr: false, include_kappa_i: None };
    assert_eq!(y.eta, yield_cell(&p, DriveTarget::Emitter, &off).unwrap().eta);

    let d = [-1e-4, 0.0, 1e-4];
    let mut eta = [0.0; 3];
    assert_eq!(unsafe { cp_yield_spectrum(h.0, ptr::null(), d.as_ptr(), 3, eta.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) }, CP_OK);
    assert!(eta.iter().all(|e| (0.0..=1.0).contains(e)));
}

#[test]
fn scattering_and_decomposition() {
    let h = preset("fig7b");
    let p = config::load_preset("fig7b").unwrap().params;
    let d = linspace(-1e-3, 1e-3, 101);
    let mut a = vec![0.0; d.len()];
    let mut b = vec![0.0; d.len()];
    unsafe {
        assert_eq!(cp_scatter(h.0, d.as_ptr(), d.len(), CP_ROUTE_EIGEN, a.as_mut_ptr()), CP_OK);
        assert_eq!(cp_scatter(h.0, d.as_ptr(), d.len(), CP_ROUTE_DIRECT, b.as_mut_ptr()), CP_OK);
    }
    assert_eq!(b, scatter_spectrum(&p, &d, Route::Direct).unwrap().re());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-9 * y);
    }
    let mut s = CpScatterSummary::default();
    assert_eq!(unsafe { cp_scatter_decompose(h.0, &mut s) }, CP_OK);
    assert_eq!(s.mechanism, CP_MECHANISM_SUPERSCATTERING);
    assert_eq!(s.sigma_so, decompose_sigma0(&p).unwrap().sigma_so);
}

#[test]
fn handles_are_edited_by_path() {
    let h = preset("fig7b");
    let path = CString::new("mirror.phi_over_pi").unwrap();
    let mut s = CpScatterSummary::default();
    unsafe {
        assert_eq!(cp_params_set(h.0, path.as_ptr(), 1.5), CP_OK);
        assert_eq!(cp_scatter_decompose(h.0, &mut s), CP_OK);
    }
    assert_eq!(s.mechanism, CP_MECHANISM_EIT_INTERMEDIATE);

    let mut copy = ptr::null_mut();
    let mut base = ptr::null_mut();
    let mut x = 0.0;
    unsafe {
        assert_eq!(cp_params_clone(h.0, &mut copy), CP_OK);
        let copy = Handle(copy);
        assert_eq!(cp_params_get(copy.0, path.as_ptr(), &mut x), CP_OK);
        assert!((x - 1.5).abs() < 1e-15);
        assert_eq!(cp_params_baseline(h.0, &mut base), CP_OK);
        let base = Handle(base);
        let g1 = CString::new("couplings.g1").unwrap();
        assert_eq!(cp_params_set(base.0, g1.as_ptr(), 0.0), CP_OK);
        assert_eq!(cp_scatter_decompose(base.0, &mut s), CP_ERR_NUMERICAL);
        assert_eq!(last_code().as_deref(), Some("defective_matrix"));
    }

    // an invalid value leaves the handle untouched
    let kappa = CString::new("plasmon.kappa_o").unwrap();
    unsafe {
        assert_eq!(cp_params_set(h.0, kappa.as_ptr(), -1.0), CP_ERR_INPUT);
        assert_eq!(last_code().as_deref(), Some("validation"));
        assert_eq!(cp_params_get(h.0, kappa.as_ptr(), &mut x), CP_OK);
    }
    assert!(x > 0.0);
    let unknown = CString::new("couplings.g9").unwrap();
    assert_eq!(unsafe { cp_params_set(h.0, unknown.as_ptr(), 1.0) }, CP_ERR_INPUT);
    assert_eq!(last_code().as_deref(), Some("unknown_parameter"));
}

#[test]
fn json_round_trip_and_buffer_protocol() {
    let h = preset("fig5");
    let mut need = 0usize;
    let mut tiny = [0 as c_char; 4];
    unsafe {
        assert_eq!(cp_params_to_json(h.0, tiny.as_mut_ptr(), tiny.len(), &mut need), CP_ERR_BUFFER_TOO_SMALL);
    }
    assert!(need > 4);
    let mut buf = vec![0 as c_char; need + 1];
    unsafe {
        assert_eq!(cp_params_to_json(h.0, buf.as_mut_ptr(), buf.len(), &mut need), CP_OK);
    }
    let json = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["couplings"]["g1"], -2.9e-3);

    let cfg = CString::new(r#"{"preset": "fig5", "couplings": {"g1": -4e-3}}"#).unwrap();
    let mut h2 = ptr::null_mut();
    assert_eq!(unsafe { cp_params_from_json(cfg.as_ptr(), &mut h2) }, CP_OK);
    let h2 = Handle(h2);
    let g1 = CString::new("couplings.g1").unwrap();
    let mut x = 0.0;
    assert_eq!(unsafe { cp_params_get(h2.0, g1.as_ptr(), &mut x) }, CP_OK);
    assert_eq!(x, -4e-3);
}

#[test]
fn errors_are_reported_not_raised() {
    let mut h = ptr::null_mut();
    let bad = CString::new("{\n \"plasmon\": 3\n}").unwrap();
    assert_eq!(unsafe { cp_params_from_json(bad.as_ptr(), &mut h) }, CP_ERR_INPUT);
    assert!(h.is_null());
    assert_eq!(last_code().as_deref(), Some("parse"));
    assert!(!last_message().is_empty());

    assert_eq!(unsafe { cp_params_from_json(ptr::null(), &mut h) }, CP_ERR_ARGUMENT);
    assert_eq!(unsafe { cp_params_from_preset(c"fig2".as_ptr(), ptr::null_mut()) }, CP_ERR_ARGUMENT);
    assert_eq!(unsafe { cp_params_from_preset(c"fig99".as_ptr(), &mut h) }, CP_ERR_INPUT);
    assert_eq!(last_code().as_deref(), Some("unknown_preset"));

    let mut out = 0.0;
    assert_eq!(unsafe { cp_spectral_density(ptr::null(), &1.5, 1, &mut out) }, CP_ERR_ARGUMENT);
    let hp = preset("fig2");
    let descending = [1.6, 1.5];
    let mut o2 = [0.0; 2];
    assert_eq!(unsafe { cp_spectral_density(hp.0, descending.as_ptr(), 2, o2.as_mut_ptr()) }, CP_ERR_INPUT);
    assert_eq!(unsafe { cp_optimal_g1(-1.0, 1e-3, &mut out) }, CP_ERR_INPUT);

    assert_eq!(unsafe { cp_optimal_g1(1.0, 0.75e-3, &mut out) }, CP_OK);
    assert!(last_code().is_none());
    assert_eq!(unsafe { cp_last_error_message(ptr::null_mut(), 0) }, 0);
    unsafe { cp_params_free(ptr::null_mut()) };
}

#[test]
fn fit_through_the_abi() {
    let h = preset("fig8");
    let p = config::load_preset("fig8").unwrap().params;
    let grid = chiralpoint::fit::default_fit_grid(&p);
    let data = response::purcell_spectrum(&p, &grid).unwrap().re();
    let g1 = c"couplings.g1";
    let mut r = CpFit::default();
    unsafe {
        assert_eq!(cp_params_set(h.0, g1.as_ptr(), -3e-3), CP_OK);
        let status = cp_fit(h.0, grid.as_ptr(), data.as_ptr(), ptr::null(), grid.len(), CP_FREE_G1 | CP_FREE_GC, CP_QUANTITY_PURCELL, &mut r);
        assert_eq!(status, CP_OK, "{}", last_message());
    }
    assert!((r.g1 / -11e-3 - 1.0).abs() < 1e-6);
    assert!(r.phi_err.is_nan());
    let status = unsafe { cp_fit(h.0, grid.as_ptr(), data.as_ptr(), ptr::null(), grid.len(), 8, CP_QUANTITY_PURCELL, &mut r) };
    assert_eq!(status, CP_ERR_ARGUMENT);
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/chiralpoint.h")
}

#[test]
fn header_is_valid_c() {
    let out = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", "-std=c99"]).arg(header()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(header()).unwrap();
    for sym in ["cp_params_from_preset", "cp_spectral_density", "cp_scatter_decompose", "cp_fit", "typedef struct CpParams CpParams"] {
        assert!(text.contains(sym), "{sym}");
    }
}

// target/<profile>/deps/ffi-<hash> → target/<profile>/libchiralpoint_ffi.a
fn static_lib() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().join("libchiralpoint_ffi.a")
}

#[test]
fn c_program_links_and_runs() {
    let lib = static_lib();
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "chiralpoint.h"
int main(void) {
    CpParams *p = NULL;
    if (cp_params_from_preset("fig7c", &p) != CP_OK) return 10;
    CpScatterSummary s;
    if (cp_scatter_decompose(p, &s) != CP_OK) return 11;
    double g1 = 0.0;
    if (cp_params_set(p, "couplings.g9", 1.0) != CP_ERR_INPUT) return 12;
    char msg[256];
    cp_last_error_message(msg, sizeof msg);
    if (cp_optimal_g1(1.0, 0.75e-3, &g1) != CP_OK) return 13;
    printf("%s %d %.6e %s\n", cp_version(), s.mechanism, g1, msg);
    cp_params_free(p);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("demo");
    let build = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let line = String::from_utf8(run.stdout).unwrap();
    assert!(line.starts_with(&format!("{} {} ", chiralpoint::export::VERSION, CP_MECHANISM_EIT_INTERMEDIATE)), "{line}");
    assert!(line.contains("-2.371708e-02"), "{line}");
    assert!(line.contains("couplings.g9"), "{line}");
}
