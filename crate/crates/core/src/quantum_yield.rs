//! Weak-drive steady state, radiated/absorbed power and quantum yield.
//!
//! Detunings are Δ_L = ω_c − ω_L, i.e. measured from the bare cavity frequency;
//! every mode keeps its own offset from ω_c.

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{build_generator, Basis};
use crate::error::{Error, Result};
use crate::linalg;
use crate::params::{Drive, DriveTarget, SystemParams};
use crate::spectrum::{linspace, merge_grids, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldOptions {
    /// Count γ_nr|⟨σ⟩|² as absorbed power.
    pub include_gamma_nr: bool,
    /// Count κ_i(|⟨c_ccw⟩|² + |⟨c_cw⟩|²) as absorbed power; `None` means "when κ_i > 0".
    pub include_kappa_i: Option<bool>,
}

impl Default for YieldOptions {
    fn default() -> Self {
        YieldOptions { include_gamma_nr: true, include_kappa_i: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// (⟨σ⟩, ⟨a⟩, ⟨c_ccw⟩, ⟨c_cw⟩) per unit drive amplitude.
    pub response: [C64; 4],
    pub amplitude: f64,
    /// Δ_L = ω_c − ω_L.
    pub detuning: f64,
    pub target: DriveTarget,
}

impl SteadyState {
    pub fn amplitudes(&self) -> [C64; 4] {
        self.response.map(|z| z * self.amplitude)
    }
}

fn detuned_matrix(p: &SystemParams, omega_l: f64) -> Matrix4<C64> {
    let m = build_generator(p, Basis::Traveling4, Some(omega_l)).entries;
    Matrix4::from_fn(|i, j| m[(i, j)])
}

fn solve_unit(m: &Matrix4<C64>, target: DriveTarget, detuning: f64) -> Result<[C64; 4]> {
    let mut rhs = Vector4::zeros();
    rhs[match target {
        DriveTarget::Emitter => 0,
        DriveTarget::Plasmon => 1,
    }] = C64::new(-1.0, 0.0);
    let x = m.lu().solve(&rhs).ok_or(Error::SingularAtDetuning { detuning })?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularAtDetuning { detuning });
    }
    Ok([x[0], x[1], x[2], x[3]])
}

/// Solves 0 = −iM(Δ_L)p − iΩ, i.e. p = −M(Δ_L)⁻¹Ω.
pub fn steady_state(p: &SystemParams, drive: &Drive) -> Result<SteadyState> {
    let detuning = p.photon.omega_c - drive.omega_l;
    let response = solve_unit(&detuned_matrix(p, drive.omega_l), drive.target, detuning)?;
    Ok(SteadyState { response, amplitude: drive.amplitude, detuning, target: drive.target })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub phi_r: f64,
    pub phi_d: f64,
    pub eta: f64,
}

impl PowerBudget {
    fn new(phi_r: f64, phi_d: f64) -> Self {
        let total = phi_r + phi_d;
        let eta = if total > 0.0 { phi_r / total } else { 0.0 };
        PowerBudget { phi_r, phi_d, eta }
    }
}

/// Power budget of the given mode amplitudes (σ, a, c_ccw, c_cw).
pub fn budget_from_amplitudes(x: &[C64; 4], p: &SystemParams, opts: &YieldOptions) -> PowerBudget {
    let [s, a, ccw, cw] = *x;
    let cav = ccw.norm_sqr() + cw.norm_sqr();
    let phi_r = (p.plasmon.kappa_r.sqrt() * a + p.emitter.gamma_0.sqrt() * s).norm_sqr() + p.photon.kappa_c * cav;
    let mut phi_d = p.plasmon.kappa_o * a.norm_sqr() + p.emitter.gamma_m * s.norm_sqr();
    if opts.include_gamma_nr {
        phi_d += p.emitter.gamma_nr * s.norm_sqr();
    }
    if opts.include_kappa_i.unwrap_or(p.photon.kappa_i > 0.0) {
        phi_d += p.photon.kappa_i * cav;
    }
    PowerBudget::new(phi_r, phi_d)
}

/// Budget per unit drive amplitude (|amp|² = 1).
pub fn power_budget(state: &SteadyState, p: &SystemParams, opts: &YieldOptions) -> PowerBudget {
    budget_from_amplitudes(&state.response, p, opts)
}

/// Unit-drive budget at Δ_L.
pub fn budget_at(p: &SystemParams, detuning: f64, target: DriveTarget, opts: &YieldOptions) -> Result<PowerBudget> {
    let omega_l = p.photon.omega_c - detuning;
    let x = solve_unit(&detuned_matrix(p, omega_l), target, detuning)?;
    Ok(budget_from_amplitudes(&x, p, opts))
}

pub fn yield_spectrum(
    p: &SystemParams,
    detunings: &[f64],
    target: DriveTarget,
    opts: &YieldOptions,
) -> Result<Vec<PowerBudget>> {
    detunings.iter().map(|&d| budget_at(p, d, target, opts)).collect()
}

/// Detuning grid resolving every resonance of the driven system: a coarse
/// background, a band of ±50κ at step κ/20 around the cavity, and a window of
/// ±40 linewidths around each eigenfrequency.
pub fn detuning_grid(p: &SystemParams) -> Result<Vec<f64>> {
    let a = build_generator(p, Basis::Traveling4, Some(p.photon.omega_c)).entries;
    let lambda = linalg::eigenvalues(&a)?;
    let reach = lambda.iter().map(|z| z.re.abs()).fold(0.0, f64::max) + 5.0 * p.kappa_a().max(p.kappa());
    let mut grid = linspace(-reach, reach, 4001);
    let k = p.kappa();
    grid = merge_grids(&grid, &linspace(-50.0 * k, 50.0 * k, 2001));
    for z in &lambda {
        let w = (40.0 * z.im.abs()).max(1e-9);
        grid = merge_grids(&grid, &linspace(-z.re - w, -z.re + w, 801));
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldScan {
    pub eta_max: f64,
    pub delta_at_eta_max: f64,
    pub phi_r_at_eta_max: f64,
    pub phi_d_at_eta_max: f64,
    pub phi_r_max: f64,
    pub delta_at_phi_r_max: f64,
    /// Deepest interior valley of Φ_d (global minimum if there is no valley).
    pub phi_d_min: f64,
    pub delta_at_phi_d_min: f64,
    /// Local grid spacing at the η maximum.
    pub step_at_eta_max: f64,
}

fn golden(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, maximize: bool) -> (f64, f64) {
    let sgn = if maximize { 1.0 } else { -1.0 };
    let g = |x: f64| sgn * f(x);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..120 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1e-12) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d);
        }
    }
    if fc > fd {
        (c, sgn * fc)
    } else {
        (d, sgn * fd)
    }
}

pub fn yield_scan(p: &SystemParams, target: DriveTarget, opts: &YieldOptions) -> Result<YieldScan> {
    let grid = detuning_grid(p)?;
    let budgets = yield_spectrum(p, &grid, target, opts)?;
    let n = grid.len();
    let pick = |f: &dyn Fn(&PowerBudget) -> f64| -> usize {
        let mut best = 0;
        for i in 1..n {
            if f(&budgets[i]) > f(&budgets[best]) {
                best = i;
            }
        }
        best
    };
    let bracket = |k: usize| (grid[k.saturating_sub(1)], grid[(k + 1).min(n - 1)]);
    let eval = |d: f64| budget_at(p, d, target, opts).unwrap_or(PowerBudget { phi_r: f64::NAN, phi_d: f64::NAN, eta: f64::NAN });

    let k_eta = pick(&|b| b.eta);
    let (lo, hi) = bracket(k_eta);
    let (d_eta, _) = golden(&|d| eval(d).eta, lo, hi, true);
    let at_max = eval(d_eta);

    let k_r = pick(&|b| b.phi_r);
    let (lo, hi) = bracket(k_r);
    let (d_r, phi_r_max) = golden(&|d| eval(d).phi_r, lo, hi, true);

    let valleys = (1..n - 1).filter(|&i| budgets[i].phi_d < budgets[i - 1].phi_d && budgets[i].phi_d <= budgets[i + 1].phi_d);
    let k_d = valleys
        .min_by(|&i, &j| budgets[i].phi_d.total_cmp(&budgets[j].phi_d))
        .unwrap_or_else(|| pick(&|b| -b.phi_d));
    let (lo, hi) = bracket(k_d);
    let (d_d, phi_d_min) = golden(&|d| eval(d).phi_d, lo, hi, false);

    let step = (grid[(k_eta + 1).min(n - 1)] - grid[k_eta]).max(grid[k_eta] - grid[k_eta.saturating_sub(1)]);
    Ok(YieldScan {
        eta_max: at_max.eta,
        delta_at_eta_max: d_eta,
        phi_r_at_eta_max: at_max.phi_r,
        phi_d_at_eta_max: at_max.phi_d,
        phi_r_max,
        delta_at_phi_r_max: d_r,
        phi_d_min,
        delta_at_phi_d_min: d_d,
        step_at_eta_max: step,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldCell {
    pub q_c: f64,
    pub phi: f64,
    pub eta: f64,
    pub eta0: f64,
    /// max Φ_r / max Φ_r⁰.
    pub eta_r: f64,
    /// min Φ_d⁰ / min Φ_d.
    pub eta_d: f64,
    pub delta_at_max: f64,
    /// Φ_r / Φ_r⁰ evaluated at the η-maximising detuning.
    pub phi_r_gain_at_max: f64,
    pub scan: YieldScan,
}

fn cell_from_scans(p: &SystemParams, scan: YieldScan, base: &YieldScan, target: DriveTarget, opts: &YieldOptions) -> Result<YieldCell> {
    let base_at = budget_at(&p.baseline(), scan.delta_at_eta_max, target, opts)?;
    Ok(YieldCell {
        q_c: p.q_c(),
        phi: p.phi(),
        eta: scan.eta_max,
        eta0: base.eta_max,
        eta_r: scan.phi_r_max / base.phi_r_max,
        eta_d: base.phi_d_min / scan.phi_d_min,
        delta_at_max: scan.delta_at_eta_max,
        phi_r_gain_at_max: scan.phi_r_at_eta_max / base_at.phi_r,
        scan,
    })
}

/// η, η₀ and the η_r/η_d diagnostics for one parameter set.
pub fn yield_cell(p: &SystemParams, target: DriveTarget, opts: &YieldOptions) -> Result<YieldCell> {
    let base = yield_scan(&p.baseline(), target, opts)?;
    let scan = if p.mirror.present { yield_scan(p, target, opts)? } else { base };
    cell_from_scans(p, scan, &base, target, opts)
}

/// Yield map over Q_c (outer) × φ (inner); the baseline is scanned once per Q_c.
pub fn yield_map(
    p: &SystemParams,
    qc_grid: &[f64],
    phi_grid: &[f64],
    target: DriveTarget,
    opts: &YieldOptions,
) -> Result<Vec<YieldCell>> {
    let bases: Vec<YieldScan> = qc_grid
        .par_iter()
        .map(|&q| yield_scan(&p.with_qc(q).baseline(), target, opts))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, SystemParams)> = qc_grid
        .iter()
        .enumerate()
        .flat_map(|(i, &q)| phi_grid.iter().map(move |&phi| (i, p.with_qc(q).with_phi(phi))))
        .collect();
    cells
        .par_iter()
        .map(|(i, c)| {
            let scan = if c.mirror.present { yield_scan(c, target, opts)? } else { bases[*i] };
            cell_from_scans(c, scan, &bases[*i], target, opts)
        })
        .collect()
}
