//! Single-excitation generators, the cavity polarizability χ_sys, the emitter's
//! emission spectrum and its population dynamics.
//!
//! Two independent routes give the population: the inverse Fourier transform of
//! the emitter correlation spectrum, and direct integration of the amplitude
//! equations in the traveling-wave basis.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Matrix3, Vector3};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::params::SystemParams;
use crate::response::{self, cavity_window, refine_peak};
use crate::spectrum::{check_grid, linspace, ComplexSpectrum, C64};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// (σ, a, c_ccw, c_cw) with the chiral ccw → cw mirror coupling.
    Traveling4,
    /// (σ, a, c₁, c₂) standing-wave combinations c₁,₂ = (c_ccw ± c_cw)/√2.
    Standing4,
    /// (a, c₁, c₂): the cavity block without the emitter.
    CavityBlock3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    pub basis: Basis,
    pub entries: CMatrix,
    pub detuned_by: Option<f64>,
}

impl GeneratorMatrix {
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        linalg::eigenvalues(&self.entries)
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Dense generator M of dp/dt = −iMp. With `detuned_by = Some(ω_L)` every
/// diagonal frequency is measured from ω_L.
pub fn build_generator(p: &SystemParams, basis: Basis, detuned_by: Option<f64>) -> GeneratorMatrix {
    let shift = detuned_by.unwrap_or(0.0);
    let g = p.couplings;
    let w0 = C64::new(p.emitter.omega_0 - shift, -p.gamma() / 2.0);
    let wa = C64::new(p.plasmon.omega_a - shift, -p.kappa_a() / 2.0);
    let wc = C64::new(p.photon.omega_c - shift, -p.kappa() / 2.0);
    let fb = response::feedback(p);
    let entries = match basis {
        Basis::Traveling4 => CMatrix::from_row_slice(
            4,
            4,
            &[
                w0, c(g.ga), c(g.gc), c(g.gc),
                c(g.ga), wa, c(g.g1), c(g.g1),
                c(g.gc), c(g.g1), wc, c(0.0),
                c(g.gc), c(g.g1), -I * fb, wc,
            ],
        ),
        Basis::Standing4 | Basis::CavityBlock3 => {
            let (c1, c2, up, down) = standing_block(p, shift, fb);
            let s2 = SQRT_2;
            let full = CMatrix::from_row_slice(
                4,
                4,
                &[
                    w0, c(g.ga), c(s2 * g.gc), c(0.0),
                    c(g.ga), wa, c(s2 * g.g1), c(0.0),
                    c(s2 * g.gc), c(s2 * g.g1), c1, up,
                    c(0.0), c(0.0), down, c2,
                ],
            );
            if basis == Basis::Standing4 {
                full
            } else {
                full.view((1, 1), (3, 3)).into_owned()
            }
        }
    };
    GeneratorMatrix { basis, entries, detuned_by }
}

// diagonal entries ω_c − iκ_±/2 and the mirror off-diagonals ±iκ_c e^{iφ}/2
fn standing_block(p: &SystemParams, shift: f64, fb: C64) -> (C64, C64, C64, C64) {
    let ki = p.photon.kappa_i;
    let kc = p.photon.kappa_c;
    let k_plus = ki + kc + fb;
    let k_minus = ki + kc - fb;
    let wc = p.photon.omega_c - shift;
    (wc - I * k_plus / 2.0, wc - I * k_minus / 2.0, I * fb / 2.0, -I * fb / 2.0)
}

fn cavity_block(p: &SystemParams) -> Matrix3<C64> {
    let g = p.couplings;
    let fb = response::feedback(p);
    let (c1, c2, up, down) = standing_block(p, 0.0, fb);
    let wa = C64::new(p.plasmon.omega_a, -p.kappa_a() / 2.0);
    let s2 = SQRT_2;
    Matrix3::new(wa, c(s2 * g.g1), c(0.0), c(s2 * g.g1), c1, up, c(0.0), down, c2)
}

/// Resolvent (ωI − M_s)⁻¹ applied to the emitter coupling vector v = (g_a, √2 g_c, 0).
fn resolvent_on_coupling(m: &Matrix3<C64>, p: &SystemParams, omega: f64) -> Result<(Vector3<C64>, Vector3<C64>)> {
    let v = Vector3::new(c(p.couplings.ga), c(SQRT_2 * p.couplings.gc), c(0.0));
    let a = Matrix3::from_diagonal_element(c(omega)) - m;
    let x = a.lu().solve(&v).ok_or(Error::SingularResolvent { omega })?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularResolvent { omega });
    }
    Ok((v, x))
}

/// χ_sys(ω) = vᵀ(ωI − M_s)⁻¹v, the polarizability the emitter sees.
pub fn chi_sys(p: &SystemParams, omega: f64) -> Result<C64> {
    let m = cavity_block(p);
    let (v, x) = resolvent_on_coupling(&m, p, omega)?;
    Ok(v[0] * x[0] + v[1] * x[1] + v[2] * x[2])
}

fn chi_sys_many(p: &SystemParams, omegas: impl Iterator<Item = f64>) -> Result<Vec<C64>> {
    let m = cavity_block(p);
    omegas
        .map(|w| {
            let (v, x) = resolvent_on_coupling(&m, p, w)?;
            Ok(v[0] * x[0] + v[1] * x[1] + v[2] * x[2])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionResult {
    /// S(ω) in eV⁻¹, unit area.
    pub spectrum: ComplexSpectrum,
    /// Δ(ω) = Re χ_sys.
    pub lamb_shift: ComplexSpectrum,
    /// Γ(ω) = −2 Im χ_sys.
    pub local_coupling: ComplexSpectrum,
}

/// Emitter emission spectrum
/// S(ω) = (1/2π)(γ+Γ)/{[ω−ω₀−Δ]² + [(γ+Γ)/2]²}.
pub fn emission_spectrum(p: &SystemParams, grid: &[f64]) -> Result<EmissionResult> {
    check_grid(grid)?;
    let chi = chi_sys_many(p, grid.iter().copied())?;
    let gamma = p.gamma();
    let delta: Vec<f64> = chi.iter().map(|z| z.re).collect();
    let big_gamma: Vec<f64> = chi.iter().map(|z| -2.0 * z.im).collect();
    if gamma <= 0.0 && big_gamma.iter().all(|&g| g <= 0.0) {
        return Err(Error::DegenerateSpectrum);
    }
    let s: Vec<f64> = grid
        .iter()
        .zip(delta.iter().zip(&big_gamma))
        .map(|(&w, (&d, &g))| {
            let width = (gamma + g).max(0.0);
            let det = w - p.emitter.omega_0 - d;
            width / (2.0 * PI) / (det * det + width * width / 4.0)
        })
        .collect();
    Ok(EmissionResult {
        spectrum: ComplexSpectrum::from_real(grid.to_vec(), s)?,
        lamb_shift: ComplexSpectrum::from_real(grid.to_vec(), delta)?,
        local_coupling: ComplexSpectrum::from_real(grid.to_vec(), big_gamma)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsMethod {
    SpectralFt,
    DirectOde,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DynamicsOptions {
    /// Width (eV) of the frequency grid for the spectral route; default is
    /// chosen from the widest linewidth and the mode spread.
    pub spectral_span: Option<f64>,
    /// RK4 step (ħ/eV) for the direct route; default half the stability limit.
    pub ode_step: Option<f64>,
}

/// Largest mode linewidth entering the emitter correlation spectrum.
pub fn widest_linewidth(p: &SystemParams) -> f64 {
    let k_plus_max = p.photon.kappa_i + 2.0 * p.photon.kappa_c;
    p.kappa_a().max(k_plus_max).max(p.gamma()).max(p.kappa())
}

fn check_time_grid(t: &[f64]) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::InvalidTimeGrid("empty".into()));
    }
    if t[0] != 0.0 {
        return Err(Error::InvalidTimeGrid("must start at t = 0".into()));
    }
    if t.len() == 1 {
        return Ok(0.0);
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeGrid("must be increasing".into()));
    }
    for (k, &tk) in t.iter().enumerate() {
        if (tk - dt * k as f64).abs() > 1e-9 * dt * (k as f64).max(1.0) {
            return Err(Error::InvalidTimeGrid("must be uniformly spaced".into()));
        }
    }
    Ok(dt)
}

pub fn qe_dynamics(p: &SystemParams, t_grid: &[f64], method: DynamicsMethod) -> Result<Vec<f64>> {
    qe_dynamics_with(p, t_grid, method, &DynamicsOptions::default())
}

/// Emitter population |c_e(t)|² after starting fully excited, on a uniform grid
/// starting at 0 (times in ħ/eV).
pub fn qe_dynamics_with(
    p: &SystemParams,
    t_grid: &[f64],
    method: DynamicsMethod,
    opts: &DynamicsOptions,
) -> Result<Vec<f64>> {
    let dt = check_time_grid(t_grid)?;
    if t_grid.len() == 1 {
        return Ok(vec![1.0]);
    }
    match method {
        DynamicsMethod::SpectralFt => spectral_route(p, t_grid.len(), dt, opts),
        DynamicsMethod::DirectOde => ode_route(p, t_grid.len(), dt, opts),
    }
}

const MAX_FFT_LEN: usize = 1 << 23;

// Slowest decay rate (population) among eigenmodes that carry emitter weight.
fn slowest_relevant_decay(p: &SystemParams) -> f64 {
    let m = build_generator(p, Basis::Traveling4, None).entries;
    let floor = 1e-12;
    match linalg::eig(&m) {
        Ok((lambda, r)) => {
            let l = r.clone().try_inverse();
            lambda
                .iter()
                .enumerate()
                .filter(|(i, _)| match &l {
                    Some(l) => (r[(0, *i)] * l[(*i, 0)]).norm() > 1e-10,
                    None => true,
                })
                .map(|(_, z)| -2.0 * z.im)
                .fold(f64::INFINITY, f64::min)
                .max(floor)
        }
        Err(_) => lambda_floor(&m).max(floor),
    }
}

fn lambda_floor(m: &CMatrix) -> f64 {
    (0..m.nrows()).map(|i| -2.0 * m[(i, i)].im).fold(f64::INFINITY, f64::min)
}

fn spectral_route(p: &SystemParams, n_out: usize, dt: f64, opts: &DynamicsOptions) -> Result<Vec<f64>> {
    let w0 = p.emitter.omega_0;
    let gamma = p.gamma();
    let widest = widest_linewidth(p);
    let required = 50.0 * widest;
    let spread = [p.plasmon.omega_a, p.photon.omega_c].iter().map(|w| (w - w0).abs()).fold(0.0, f64::max);
    let span = match opts.spectral_span {
        Some(s) if s < required => return Err(Error::Alias { span: s, required }),
        Some(s) => s,
        None => required + 2.0 * spread,
    };

    // fine time step so that the frequency grid spans at least `span`
    let sub = ((dt * span / (2.0 * PI)).ceil() as usize).max(1);
    let dt_f = dt / sub as f64;
    let t_max = dt * (n_out - 1) as f64;
    let t_period = (2.0 * t_max).max(t_max + 40.0 / slowest_relevant_decay(p));
    let blocks = (t_period / dt).ceil() as usize + 1;
    let n = sub * blocks;
    if n > MAX_FFT_LEN {
        return Err(Error::Alias { span: 2.0 * PI / (n as f64 * dt_f) * MAX_FFT_LEN as f64, required: span });
    }
    let dnu = 2.0 * PI / (n as f64 * dt_f);

    // Subtracting a reference with the same i/ν + γ/(2ν²) tail leaves an O(ν⁻³)
    // remainder, so the truncated sum converges to c(0) = 1.
    let gr = widest.max(gamma);
    let a_ref = (gamma - gr) / 2.0;
    let m = cavity_block(p);
    let mut buf = Vec::with_capacity(n);
    for k in 0..n {
        let nu = if k < n / 2 { k as f64 } else { k as f64 - n as f64 } * dnu;
        let (v, x) = resolvent_on_coupling(&m, p, w0 + nu)?;
        let chi = v[0] * x[0] + v[1] * x[1] + v[2] * x[2];
        let g = I / (C64::new(nu, gamma / 2.0) - chi);
        let pole = C64::new(nu, gr / 2.0);
        let g_ref = I / pole + a_ref / (pole * pole);
        buf.push(g - g_ref);
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    fft.process(&mut buf);
    let scale = dnu / (2.0 * PI);
    Ok((0..n_out)
        .map(|k| {
            let t = dt * k as f64;
            let reference = (-gr * t / 2.0).exp() * (1.0 - a_ref * t);
            let amp = buf[k * sub] * scale + reference;
            amp.norm_sqr()
        })
        .collect())
}

/// Stability limit for the RK4 step, 0.01/‖M‖ with M the traveling-wave generator
/// in the frame rotating at ω₀ (Frobenius norm).
pub fn ode_step_limit(p: &SystemParams) -> f64 {
    let m = build_generator(p, Basis::Traveling4, Some(p.emitter.omega_0)).entries;
    0.01 / linalg::frobenius_norm(&m)
}

fn ode_route(p: &SystemParams, n_out: usize, dt: f64, opts: &DynamicsOptions) -> Result<Vec<f64>> {
    let limit = ode_step_limit(p);
    let h_req = match opts.ode_step {
        Some(h) if h > limit => return Err(Error::Step { step: h, limit }),
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(Error::Step { step: h, limit }),
        None => limit / 2.0,
    };
    let sub = (dt / h_req).ceil().max(1.0) as usize;
    let h = dt / sub as f64;
    let m = build_generator(p, Basis::Traveling4, Some(p.emitter.omega_0)).entries;
    let mut a = [[C64::new(0.0, 0.0); 4]; 4];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = -I * m[(i, j)];
        }
    }
    let f = |y: &[C64; 4]| -> [C64; 4] {
        let mut out = [C64::new(0.0, 0.0); 4];
        for i in 0..4 {
            out[i] = a[i][0] * y[0] + a[i][1] * y[1] + a[i][2] * y[2] + a[i][3] * y[3];
        }
        out
    };
    let axpy = |y: &[C64; 4], k: &[C64; 4], s: f64| -> [C64; 4] {
        [y[0] + k[0] * s, y[1] + k[1] * s, y[2] + k[2] * s, y[3] + k[3] * s]
    };
    let mut y = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    let mut out = Vec::with_capacity(n_out);
    out.push(y[0].norm_sqr());
    for _ in 1..n_out {
        for _ in 0..sub {
            let k1 = f(&y);
            let k2 = f(&axpy(&y, &k1, h / 2.0));
            let k3 = f(&axpy(&y, &k2, h / 2.0));
            let k4 = f(&axpy(&y, &k3, h));
            for i in 0..4 {
                y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
            }
        }
        out.push(y[0].norm_sqr());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitterTuning {
    /// ω₀ at the maximum of the cavity-like peak of J(ω).
    CavityPeak,
    /// ω₀ such that the emission doublet has two peaks of equal height.
    EqualSplitting,
}

/// Peak of J(ω) of the cavity-like resonance.
pub fn density_peak(p: &SystemParams) -> Result<response::PeakMetrics> {
    let (lo, hi) = cavity_window(p);
    refine_peak(&|w| response::spectral_density_at(p, w), &linspace(lo, hi, response::CAVITY_WINDOW_POINTS))
}

// (upper − lower)/(upper + lower) emission heights on either side of `split`
fn doublet_imbalance(p: &SystemParams, grid: &[f64], split: f64) -> Result<f64> {
    let s = emission_spectrum(p, grid)?.spectrum.re();
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for (w, v) in grid.iter().zip(&s) {
        if *w < split {
            lo = lo.max(*v);
        } else {
            hi = hi.max(*v);
        }
    }
    Ok((hi - lo) / (hi + lo))
}

pub fn tune_emitter(p: &SystemParams, tuning: EmitterTuning) -> Result<SystemParams> {
    let peak = density_peak(p)?;
    let mut out = *p;
    out.emitter.omega_0 = peak.omega_peak;
    if tuning == EmitterTuning::CavityPeak {
        return Ok(out);
    }
    let w = peak.fwhm.max(p.gamma());
    let grid = linspace(peak.omega_peak - 30.0 * w, peak.omega_peak + 30.0 * w, 6001);
    let f = |w0: f64| {
        let mut q = *p;
        q.emitter.omega_0 = w0;
        doublet_imbalance(&q, &grid, peak.omega_peak)
    };
    let (mut a, mut b) = (peak.omega_peak - 10.0 * w, peak.omega_peak + 10.0 * w);
    let (fa, fb) = (f(a)?, f(b)?);
    if fa.signum() == fb.signum() {
        return Err(Error::Domain("equal-height doublet not bracketed around the cavity peak".into()));
    }
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if f(mid)?.signum() == fa.signum() {
            a = mid;
        } else {
            b = mid;
        }
    }
    out.emitter.omega_0 = 0.5 * (a + b);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    pub omega: f64,
    pub height: f64,
    pub fwhm: f64,
}

/// The two strongest local maxima of a sampled spectrum, each with its own
/// half-maximum width; `None` if fewer than two maxima exist or a width is unresolved.
pub fn two_strongest_lines(grid: &[f64], y: &[f64]) -> Option<[SpectralLine; 2]> {
    let n = y.len();
    let mut maxima: Vec<usize> = (1..n - 1).filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1]).collect();
    if maxima.len() < 2 {
        return None;
    }
    maxima.sort_by(|&i, &j| y[j].total_cmp(&y[i]));
    let mut top = [maxima[0], maxima[1]];
    top.sort();
    let line = |k: usize| -> Option<SpectralLine> {
        let half = y[k] / 2.0;
        let cross = |i: usize, j: usize| grid[i] + (half - y[i]) * (grid[j] - grid[i]) / (y[j] - y[i]);
        let left = (1..=k).rev().find(|&i| y[i - 1] < half).map(|i| cross(i - 1, i))?;
        let right = (k..n - 1).find(|&i| y[i + 1] < half).map(|i| cross(i, i + 1))?;
        Some(SpectralLine { omega: grid[k], height: y[k], fwhm: right - left })
    };
    Some([line(top[0])?, line(top[1])?])
}

/// Number of local maxima above `rel` × the global maximum.
pub fn count_lines(y: &[f64], rel: f64) -> usize {
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (1..y.len() - 1).filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1] && y[i] >= rel * max).count()
}
