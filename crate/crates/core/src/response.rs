//! Closed-form linear response: bare polarizabilities, the emitter's spectral
//! density J(ω), Purcell factor, peak metrics and CEP enhancement maps.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::spectrum::{check_grid, linspace, ComplexSpectrum, C64};
use crate::units;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Susceptibilities {
    pub chi_a: C64,
    pub chi_c: C64,
    pub chi_ep: C64,
}

/// Mirror feedback amplitude κ_c e^{iφ}; zero without the mirror.
pub fn feedback(p: &SystemParams) -> C64 {
    if p.mirror.present {
        C64::from_polar(p.photon.kappa_c, p.phi())
    } else {
        C64::new(0.0, 0.0)
    }
}

fn susceptibilities_with(p: &SystemParams, omega: f64, fb: C64) -> Susceptibilities {
    let chi_a = 1.0 / C64::new(omega - p.plasmon.omega_a, p.kappa_a() / 2.0);
    let chi_c = 1.0 / C64::new(omega - p.photon.omega_c, p.kappa() / 2.0);
    let chi_ep = 2.0 * chi_c - I * fb * chi_c * chi_c;
    Susceptibilities { chi_a, chi_c, chi_ep }
}

pub fn bare_susceptibilities(p: &SystemParams, omega: f64) -> Susceptibilities {
    susceptibilities_with(p, omega, feedback(p))
}

fn complete_response(p: &SystemParams, omega: f64, fb: C64) -> C64 {
    let Susceptibilities { chi_a, chi_c, chi_ep } = susceptibilities_with(p, omega, fb);
    let g = &p.couplings;
    let denom = 1.0 - g.g1 * g.g1 * chi_a * chi_ep;
    // plasmon channel, cavity channel (c1 couples with √2 g_c) and their interference
    let cavity = 2.0 * g.gc * chi_c * (1.0 - I * fb / 2.0 * chi_c) * (g.gc + 2.0 * g.ga * g.g1 * chi_a);
    (g.ga * g.ga * chi_a + cavity) / denom
}

/// J(ω) including the direct emitter–cavity coupling g_c.
pub fn spectral_density_at(p: &SystemParams, omega: f64) -> f64 {
    -complete_response(p, omega, feedback(p)).im
}

/// J(ω) through the plasmon channel only, −g_a² Im[χ_a / (1 − g₁²χ_aχ_EP)].
/// Coincides with [`spectral_density_at`] when g_c = 0.
pub fn plasmon_channel_density(p: &SystemParams, omega: f64) -> f64 {
    let s = bare_susceptibilities(p, omega);
    let g = &p.couplings;
    -(g.ga * g.ga * s.chi_a / (1.0 - g.g1 * g.g1 * s.chi_a * s.chi_ep)).im
}

/// Same as [`spectral_density_at`] with the mirror feedback amplitude supplied explicitly.
pub fn spectral_density_with_feedback(p: &SystemParams, omega: f64, fb: C64) -> f64 {
    -complete_response(p, omega, fb).im
}

pub fn spectral_density(p: &SystemParams, grid: &[f64]) -> Result<ComplexSpectrum> {
    check_grid(grid)?;
    let j: Vec<f64> = grid.iter().map(|&w| spectral_density_at(p, w)).collect();
    let jmax = j.iter().cloned().fold(0.0f64, f64::max);
    if let Some((i, &v)) = j.iter().enumerate().find(|(_, &v)| v < -1e-10 * jmax.max(f64::MIN_POSITIVE)) {
        return Err(Error::NonPositiveLdos { omega: grid[i], value: v });
    }
    ComplexSpectrum::from_real(grid.to_vec(), j)
}

/// J₀(ω) of the emitter in vacuum, in eV.
pub fn free_space_density(p: &SystemParams, omega: f64) -> Result<f64> {
    match p.emitter.mu {
        Some(mu) if mu > 0.0 => Ok(units::free_space_density(omega, mu)),
        _ => Err(Error::MissingDipoleMoment),
    }
}

pub fn purcell_at(p: &SystemParams, omega: f64) -> Result<f64> {
    Ok(spectral_density_at(p, omega) / free_space_density(p, omega)?)
}

pub fn purcell_spectrum(p: &SystemParams, grid: &[f64]) -> Result<ComplexSpectrum> {
    free_space_density(p, 1.0)?;
    let j = spectral_density(p, grid)?;
    let vals: Vec<f64> = grid
        .iter()
        .zip(j.re())
        .map(|(&w, jw)| jw / units::free_space_density(w, p.emitter.mu.unwrap_or(0.0)))
        .collect();
    ComplexSpectrum::from_real(grid.to_vec(), vals)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakMetrics {
    pub f_p: f64,
    pub omega_peak: f64,
    pub fwhm: f64,
    /// Local maxima above 5% of the global maximum.
    pub peak_count: usize,
}

fn count_peaks(y: &[f64]) -> usize {
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = y.len();
    (1..n.saturating_sub(1))
        .filter(|&i| {
            // plateaus count once, at their left edge
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            y[i] > y[i - 1] && j + 1 < n && y[i] > y[j + 1] && y[i] >= 0.05 * max
        })
        .count()
}

fn argmax(y: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in y.iter().enumerate() {
        if *v > y[best] {
            best = i;
        }
    }
    best
}

/// Peak height, position and width of a sampled real spectrum.
///
/// The maximum is refined by a parabola through the top sample and its
/// neighbours; the width uses linear interpolation of the half-maximum crossings.
pub fn peak_metrics(spectrum: &ComplexSpectrum) -> Result<PeakMetrics> {
    let x = spectrum.grid();
    let y = spectrum.re();
    let n = y.len();
    let k = argmax(&y);
    if k == 0 || k == n - 1 {
        return Err(Error::NoPeak);
    }
    let (x0, x1, x2) = (x[k - 1], x[k], x[k + 1]);
    let (y0, y1, y2) = (y[k - 1], y[k], y[k + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    let (omega_peak, f_p) = if a < 0.0 {
        let b = d01 - a * (x0 + x1);
        let xv = (-b / (2.0 * a)).clamp(x0, x2);
        (xv, y1 + d01 * (xv - x1) + a * (xv - x1) * (xv - x0))
    } else {
        (x1, y1)
    };
    let half = f_p / 2.0;
    let cross = |i: usize, j: usize| x[i] + (half - y[i]) * (x[j] - x[i]) / (y[j] - y[i]);
    let left = (1..=k).rev().find(|&i| y[i - 1] < half).map(|i| cross(i - 1, i));
    let right = (k..n - 1).find(|&i| y[i + 1] < half).map(|i| cross(i, i + 1));
    match (left, right) {
        (Some(l), Some(r)) if r > l => Ok(PeakMetrics { f_p, omega_peak, fwhm: r - l, peak_count: count_peaks(&y) }),
        _ => Err(Error::UnresolvedWidth),
    }
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= 1e-15 * mid.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Maximum of a smooth scalar function on a sampled window, refined to machine
/// precision, with the half-maximum width found by bisection on the function itself.
pub fn refine_peak(f: &dyn Fn(f64) -> f64, grid: &[f64]) -> Result<PeakMetrics> {
    let y: Vec<f64> = grid.iter().map(|&w| f(w)).collect();
    let n = y.len();
    let k = argmax(&y);
    if k == 0 || k == n - 1 {
        return Err(Error::NoPeak);
    }
    let (omega_peak, f_p) = golden_max(f, grid[k - 1], grid[k + 1], 1e-13 * grid[k].abs());
    let half = f_p / 2.0;
    let g = |w: f64| f(w) - half;
    let left = (1..=k).rev().find(|&i| y[i - 1] < half).map(|i| bisect(&g, grid[i - 1], if i == k { omega_peak } else { grid[i] }));
    let right = (k..n - 1).find(|&i| y[i + 1] < half).map(|i| bisect(&g, if i == k { omega_peak } else { grid[i] }, grid[i + 1]));
    match (left, right) {
        (Some(l), Some(r)) => Ok(PeakMetrics { f_p, omega_peak, fwhm: r - l, peak_count: count_peaks(&y) }),
        _ => Err(Error::UnresolvedWidth),
    }
}

/// Window around the cavity-like hybrid resonance: the bare cavity frequency
/// pulled by the plasmon's dispersive shift 2g₁²Re χ_a(ω_c), padded by 20 linewidths.
/// It excludes the broad plasmon resonance.
pub fn cavity_window(p: &SystemParams) -> (f64, f64) {
    let wc = p.photon.omega_c;
    let chi_a = 1.0 / C64::new(wc - p.plasmon.omega_a, p.kappa_a() / 2.0);
    let g1sq = p.couplings.g1 * p.couplings.g1;
    let shift = 2.0 * g1sq * chi_a.re;
    let width = p.kappa() + 2.0 * g1sq * chi_a.im.abs();
    let lo = wc.min(wc + shift) - 20.0 * width;
    let hi = wc.max(wc + shift) + 20.0 * width;
    (lo.max(1e-9), hi)
}

pub const CAVITY_WINDOW_POINTS: usize = 4001;

/// Purcell peak of the cavity-like resonance (J when no dipole moment is set).
pub fn cavity_peak(p: &SystemParams) -> Result<PeakMetrics> {
    let (lo, hi) = cavity_window(p);
    let grid = linspace(lo, hi, CAVITY_WINDOW_POINTS);
    match p.emitter.mu {
        Some(mu) if mu > 0.0 => {
            refine_peak(&|w| spectral_density_at(p, w) / units::free_space_density(w, mu), &grid)
        }
        _ => refine_peak(&|w| spectral_density_at(p, w), &grid),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Enhancement {
    pub fp_ratio: f64,
    pub width_ratio: f64,
    pub cep: PeakMetrics,
    pub baseline: PeakMetrics,
}

/// F_p/F_p⁰ and Γ_EP/Γ_EP⁰ against the mirror-free cavity.
pub fn enhancement(p: &SystemParams) -> Result<Enhancement> {
    let cep = cavity_peak(p)?;
    let baseline = cavity_peak(&p.baseline())?;
    Ok(Enhancement { fp_ratio: cep.f_p / baseline.f_p, width_ratio: cep.fwhm / baseline.fwhm, cep, baseline })
}

/// The mirror phase in [0, 2π) maximising F_p: a uniform scan of `n_phi`
/// points followed by a golden-section refinement around the best sample.
pub fn optimal_phi(p: &SystemParams, n_phi: usize) -> Result<(f64, PeakMetrics)> {
    let n = n_phi.max(4);
    let step = 2.0 * PI / n as f64;
    let scan: Vec<f64> = (0..n).map(|k| step * k as f64).collect();
    let vals: Vec<f64> = scan
        .iter()
        .map(|&phi| cavity_peak(&p.with_phi(phi)).map(|m| m.f_p).unwrap_or(f64::NEG_INFINITY))
        .collect();
    let k = argmax(&vals);
    if !vals[k].is_finite() {
        return Err(Error::NoPeak);
    }
    let f = |phi: f64| cavity_peak(&p.with_phi(phi)).map(|m| m.f_p).unwrap_or(f64::NEG_INFINITY);
    let centre = scan[k];
    let (phi, _) = golden_max(&f, centre - step, centre + step, 1e-10);
    let best = p.with_phi(phi);
    Ok((best.phi(), cavity_peak(&best)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PhiMode {
    /// Use the configured mirror phase.
    Fixed,
    /// Maximise F_p over the phase at every cell.
    Optimize { points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SecondAxis {
    G1(Vec<f64>),
    Phi(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnhancementCell {
    pub q_c: f64,
    pub g1: f64,
    pub phi: f64,
    pub fp_ratio: f64,
    pub width_ratio: f64,
}

/// Enhancement ratios on a Q_c × (g₁ or φ) grid, outer axis Q_c. The baseline is
/// recomputed per cell with the mirror removed.
pub fn enhancement_map(
    p: &SystemParams,
    qc_grid: &[f64],
    second: &SecondAxis,
    phi_mode: PhiMode,
) -> Result<Vec<EnhancementCell>> {
    if qc_grid.is_empty() {
        return Err(Error::Domain("empty Q_c grid".into()));
    }
    let cells: Vec<SystemParams> = match second {
        SecondAxis::G1(g) if !g.is_empty() => {
            qc_grid.iter().flat_map(|&q| g.iter().map(move |&g1| p.with_qc(q).with_g1(g1))).collect()
        }
        SecondAxis::Phi(f) if !f.is_empty() => {
            qc_grid.iter().flat_map(|&q| f.iter().map(move |&phi| p.with_qc(q).with_phi(phi))).collect()
        }
        _ => return Err(Error::Domain("empty second axis".into())),
    };
    let tune = matches!(second, SecondAxis::G1(_));
    cells
        .par_iter()
        .map(|c| {
            let cell = match (phi_mode, tune) {
                (PhiMode::Optimize { points }, true) if c.mirror.present => c.with_phi(optimal_phi(c, points)?.0),
                _ => *c,
            };
            let e = enhancement(&cell)?;
            Ok(EnhancementCell {
                q_c: cell.q_c(),
                g1: cell.couplings.g1,
                phi: cell.phi(),
                fp_ratio: e.fp_ratio,
                width_ratio: e.width_ratio,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalCoupling {
    pub g1: f64,
    /// Set when Δ_ac = 0, where the detuned-limit formula no longer applies.
    pub degenerate: bool,
}

/// g₁ᵒᵖᵗ = −√(3 Δ_ac κ_c)/2.
pub fn optimal_g1(delta_ac: f64, kappa_c: f64) -> Result<OptimalCoupling> {
    if !(delta_ac >= 0.0) || !(kappa_c > 0.0) {
        return Err(Error::Domain(format!("optimal g1 needs delta_ac >= 0 and kappa_c > 0 (got {delta_ac}, {kappa_c})")));
    }
    if delta_ac == 0.0 {
        log::warn!("optimal g1 formula assumes a detuned plasmon; returning 0 at resonance");
        return Ok(OptimalCoupling { g1: 0.0, degenerate: true });
    }
    Ok(OptimalCoupling { g1: -(3.0 * delta_ac * kappa_c).sqrt() / 2.0, degenerate: false })
}

/// Numerical argmax of F_p/F_p⁰ over g₁ for the given parameters: a scan over
/// `g_scan` followed by golden-section refinement.
pub fn argmax_g1(p: &SystemParams, g_scan: &[f64], phi_mode: PhiMode) -> Result<(f64, Enhancement)> {
    let eval = |g1: f64| -> Result<(f64, Enhancement)> {
        let mut c = p.with_g1(g1);
        if let PhiMode::Optimize { points } = phi_mode {
            c = c.with_phi(optimal_phi(&c, points)?.0);
        }
        Ok((c.phi(), enhancement(&c)?))
    };
    let ratios: Vec<f64> = g_scan
        .par_iter()
        .map(|&g| eval(g).map(|(_, e)| e.fp_ratio).unwrap_or(f64::NEG_INFINITY))
        .collect();
    let k = argmax(&ratios);
    if !ratios[k].is_finite() {
        return Err(Error::NoPeak);
    }
    let lo = g_scan[k.saturating_sub(1)];
    let hi = g_scan[(k + 1).min(g_scan.len() - 1)];
    let f = |g: f64| eval(g).map(|(_, e)| e.fp_ratio).unwrap_or(f64::NEG_INFINITY);
    let (g, _) = golden_max(&f, lo.min(hi), lo.max(hi), 1e-9 * g_scan[k].abs().max(1e-12));
    let (_, e) = eval(g)?;
    Ok((g, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::fixtures::{fig2, fig5};
    use crate::spectrum::default_ldos_grid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn plasmon_on_resonance() {
        let p = fig2();
        let s = bare_susceptibilities(&p, p.plasmon.omega_a);
        assert_relative_eq!(s.chi_a.re, 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.chi_a.im, -2.0 / p.kappa_a(), max_relative = 1e-14);
    }

    #[test]
    fn cep_susceptibility_special_phases() {
        let mut p = fig2();
        p.mirror.set_phi(0.0);
        let s = bare_susceptibilities(&p, p.photon.omega_c);
        assert!(s.chi_ep.norm() < 1e-9 * (4.0 / p.photon.kappa_c));
        p.mirror.set_phi(PI);
        let s = bare_susceptibilities(&p, p.photon.omega_c);
        assert_relative_eq!(s.chi_ep.im, -8.0 / p.photon.kappa_c, max_relative = 1e-12);
        assert!(s.chi_ep.re.abs() < 1e-9);
        let b = bare_susceptibilities(&p.baseline(), p.photon.omega_c);
        assert_relative_eq!(b.chi_ep.im * 2.0, s.chi_ep.im, max_relative = 1e-12);
    }

    #[test]
    fn decoupled_lorentzian() {
        let mut p = fig2();
        p.couplings.g1 = 0.0;
        let ka = p.kappa_a();
        for w in linspace(2.0, 3.0, 101) {
            let expect = p.couplings.ga.powi(2) * (ka / 2.0) / ((w - 2.5).powi(2) + (ka / 2.0).powi(2));
            assert_relative_eq!(spectral_density_at(&p, w), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn baseline_equals_zeroed_feedback() {
        let p = fig2();
        for w in default_ldos_grid(&p).iter().step_by(37) {
            let a = spectral_density_at(&p.baseline(), *w);
            let b = spectral_density_with_feedback(&p, *w, C64::new(0.0, 0.0));
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn eightfold_enhancement() {
        let p = fig2();
        let (phi, _) = optimal_phi(&p, 64).unwrap();
        let e = enhancement(&p.with_phi(phi)).unwrap();
        assert!(e.fp_ratio > 7.2 && e.fp_ratio < 8.8, "ratio {}", e.fp_ratio);
        assert!(phi > 0.6 * PI && phi < 0.9 * PI, "phi {}", phi / PI);
        assert!(e.width_ratio > 0.07 && e.width_ratio < 0.2, "width ratio {}", e.width_ratio);
        let at_3pi4 = enhancement(&p.with_phi(0.75 * PI)).unwrap();
        assert!(at_3pi4.fp_ratio > 6.0, "{}", at_3pi4.fp_ratio);
    }

    #[test]
    fn purcell_scales_with_dipole() {
        let p = fig2();
        let mut q = p;
        q.emitter.mu = Some(96.0);
        let grid = linspace(1.49, 1.51, 11);
        let a = purcell_spectrum(&p, &grid).unwrap().re();
        let b = purcell_spectrum(&q, &grid).unwrap().re();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(*x, 4.0 * y, max_relative = 1e-12);
        }
        q.emitter.mu = None;
        assert!(matches!(purcell_spectrum(&q, &grid), Err(Error::MissingDipoleMoment)));
    }

    #[test]
    fn purcell_is_pointwise() {
        let p = fig2();
        let coarse = linspace(1.49, 1.51, 11);
        let fine = linspace(1.49, 1.51, 101);
        let a = purcell_spectrum(&p, &coarse).unwrap().re();
        let b = purcell_spectrum(&p, &fine).unwrap().re();
        for (i, v) in a.iter().enumerate() {
            assert_relative_eq!(*v, b[10 * i], max_relative = 1e-12);
        }
    }

    #[test]
    fn lorentzian_width() {
        let k: f64 = 0.01;
        let grid = linspace(-0.1, 0.1, 401);
        let y: Vec<f64> = grid.iter().map(|w| (k / 2.0).powi(2) / (w * w + (k / 2.0).powi(2))).collect();
        let m = peak_metrics(&ComplexSpectrum::from_real(grid, y).unwrap()).unwrap();
        assert_relative_eq!(m.fwhm, k, max_relative = 1e-2);
        assert_relative_eq!(m.f_p, 1.0, max_relative = 1e-3);
        assert_eq!(m.peak_count, 1);
    }

    #[test]
    fn monotone_has_no_peak() {
        let grid = linspace(0.0, 1.0, 11);
        let s = ComplexSpectrum::from_real(grid.clone(), grid.clone()).unwrap();
        assert!(matches!(peak_metrics(&s), Err(Error::NoPeak)));
        let y: Vec<f64> = grid.iter().map(|x| 1.0 - (x - 0.5f64).powi(2)).collect();
        let s = ComplexSpectrum::from_real(grid, y).unwrap();
        assert!(matches!(peak_metrics(&s), Err(Error::UnresolvedWidth)));
    }

    #[test]
    fn two_peaks_near_zero_phase() {
        let p = fig2().with_phi(0.0);
        let m = cavity_peak(&p).unwrap();
        assert_eq!(m.peak_count, 2);
    }

    #[test]
    fn optimal_g1_values() {
        let o = optimal_g1(1.0, 0.75e-3).unwrap();
        assert_relative_eq!(o.g1, -0.023_717_082_451_262_844, max_relative = 1e-14);
        assert_relative_eq!(optimal_g1(1.0, 3e-3).unwrap().g1, 2.0 * o.g1, max_relative = 1e-14);
        let d = optimal_g1(0.0, 1e-3).unwrap();
        assert!(d.degenerate && d.g1 == 0.0);
        assert!(optimal_g1(-1.0, 1e-3).is_err());
        assert!(optimal_g1(1.0, 0.0).is_err());
    }

    #[test]
    fn peak_location_at_optimal_coupling() {
        let mut p = fig2();
        p.couplings.g1 = optimal_g1(p.delta_ac(), p.photon.kappa_c).unwrap().g1;
        let (_, m) = optimal_phi(&p, 64).unwrap();
        let offset = m.omega_peak - p.photon.omega_c;
        // offset measured from the bare cavity frequency
        eprintln!("peak offset at g1_opt: {:.3} kappa_c", offset / p.photon.kappa_c);
        assert!((offset + 1.5 * p.photon.kappa_c).abs() < p.photon.kappa_c);
    }

    #[test]
    fn self_ratio_without_mirror() {
        let p = fig2().baseline();
        let cells = enhancement_map(&p, &[2e3], &SecondAxis::G1(vec![-0.02, -0.01]), PhiMode::Fixed).unwrap();
        for c in cells {
            assert_relative_eq!(c.fp_ratio, 1.0, max_relative = 1e-14);
            assert_relative_eq!(c.width_ratio, 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn gc_terms_positive() {
        let p = fig5(1e5, 0.0);
        let s = spectral_density(&p, &linspace(1.99, 2.01, 2001)).unwrap();
        assert!(s.re().iter().all(|&v| v > 0.0));
    }

    proptest! {
        #[test]
        fn channel_forms_agree_without_gc(g1 in -0.05f64..0.05, ga in -0.05f64..0.05, phi in 0.0f64..6.3, w in 1.3f64..2.7) {
            let mut p = fig2();
            p.couplings = crate::params::Couplings { g1, ga, gc: 0.0 };
            p.mirror.set_phi(phi);
            let a = spectral_density_at(&p, w);
            let b = plasmon_channel_density(&p, w);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }

        #[test]
        fn periodic_in_phase(phi in 0.0f64..6.28, w in 1.49f64..1.51) {
            let p = fig2();
            let a = spectral_density_at(&p.with_phi(phi), w);
            let b = spectral_density_at(&p.with_phi(phi + 2.0 * PI), w);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }

        #[test]
        fn passive(g1 in -0.05f64..0.05, ga in -0.05f64..0.05, gc in -0.01f64..0.01, phi in 0.0f64..6.3, w in 1.0f64..3.0) {
            let mut p = fig2();
            p.couplings = crate::params::Couplings { g1, ga, gc };
            p.mirror.set_phi(phi);
            let j = spectral_density_at(&p, w);
            let scale = (ga * ga + 2.0 * gc * gc) / p.kappa().min(p.kappa_a());
            prop_assert!(j >= -1e-10 * scale);
        }
    }
}
