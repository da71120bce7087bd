//! Weighted least-squares extraction of g₁ (and optionally g_c, φ) from a
//! measured or simulated Purcell / spectral-density spectrum.
//!
//! g₁ and g_c are fitted on a signed linear scale in meV; φ on the circle as
//! (cos φ, sin φ) with a soft unit-norm penalty. Every start of a fixed,
//! sign-symmetric bracket is run through Levenberg–Marquardt and the lowest
//! cost wins; the 1σ errors come from the Gauss–Newton covariance at the optimum.
//! The spectrum fixes only the relative sign of g₁ and g_c; see `canonical`.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt, TerminationReason};
use nalgebra::{storage::Owned, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::config::{FitQuantity, FreeParam};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::response::spectral_density_at;
use crate::spectrum::{check_grid, ComplexSpectrum};
use crate::units;

/// Couplings are optimised in meV.
const COUPLING_SCALE: f64 = 1e-3;
/// Magnitudes (meV) of the g₁ starting points; each is tried with both signs.
pub const G1_BRACKET_MEV: [f64; 4] = [5.0, 10.0, 20.0, 40.0];
pub const PHI_STARTS: [f64; 4] = [0.0, 0.5 * std::f64::consts::PI, std::f64::consts::PI, 1.5 * std::f64::consts::PI];
/// Evaluation cap per start is PATIENCE·(n_params + 1).
pub const PATIENCE: usize = 200;
pub const CONDITION_LIMIT: f64 = 1e10;
const PHI_PENALTY: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    /// Real-valued data on a strictly increasing ω grid (eV).
    pub data: ComplexSpectrum,
    /// Starting / fixed parameters; the free ones are overwritten.
    pub fixed: SystemParams,
    pub free: Vec<FreeParam>,
    /// Per-point weights; default 1/|data| (relative residuals).
    pub weights: Option<Vec<f64>>,
    pub quantity: FitQuantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub param: FreeParam,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: SystemParams,
    pub estimates: Vec<Estimate>,
    /// Covariance in (g₁ [eV], g_c [eV], φ [rad]) order restricted to the free set.
    pub covariance: DMatrix<f64>,
    /// Condition number of the diagonally scaled normal matrix.
    pub condition: f64,
    /// ‖w ⊙ (model − data)‖₂.
    pub residual_norm: f64,
    /// √(RSS / n): the rms weighted residual (a relative rms for default weights).
    pub normalized_residual: f64,
    pub evaluations: usize,
    pub starts: usize,
}

#[derive(Clone)]
struct Model<'a> {
    grid: &'a [f64],
    y: &'a [f64],
    w: &'a [f64],
    base: SystemParams,
    free: &'a [FreeParam],
    j0: Option<Vec<f64>>,
    x: DVector<f64>,
}

fn layout_len(free: &[FreeParam]) -> usize {
    free.iter().map(|f| if *f == FreeParam::Phi { 2 } else { 1 }).sum()
}

impl Model<'_> {
    fn params_at(&self, x: &DVector<f64>) -> SystemParams {
        let mut p = self.base;
        let mut k = 0;
        for f in self.free {
            match f {
                FreeParam::G1 => p.couplings.g1 = x[k] * COUPLING_SCALE,
                FreeParam::Gc => p.couplings.gc = x[k] * COUPLING_SCALE,
                FreeParam::Phi => {
                    p.mirror.set_phi(x[k + 1].atan2(x[k]));
                    k += 1;
                }
            }
            k += 1;
        }
        p
    }

    fn data_residuals(&self, p: &SystemParams, out: &mut [f64]) {
        for (i, &w) in self.grid.iter().enumerate() {
            let mut m = spectral_density_at(p, w);
            if let Some(j0) = &self.j0 {
                m /= j0[i];
            }
            out[i] = self.w[i] * (m - self.y[i]);
        }
    }

    fn residual_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.grid.len();
        let extra = usize::from(self.free.contains(&FreeParam::Phi));
        let mut r = DVector::zeros(n + extra);
        self.data_residuals(&self.params_at(x), &mut r.as_mut_slice()[..n]);
        if extra == 1 {
            let k = phi_slot(self.free);
            r[n] = PHI_PENALTY * (x[k] * x[k] + x[k + 1] * x[k + 1] - 1.0);
        }
        r
    }
}

fn phi_slot(free: &[FreeParam]) -> usize {
    let mut k = 0;
    for f in free {
        if *f == FreeParam::Phi {
            return k;
        }
        k += 1;
    }
    k
}

fn central_jacobian(f: &dyn Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, m: usize) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(m, x.len());
    for j in 0..x.len() {
        let h = 1e-6 * x[j].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let d = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(j, &d);
    }
    jac
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Model<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.x.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let r = self.residual_vec(&self.x);
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let m = self.grid.len() + usize::from(self.free.contains(&FreeParam::Phi));
        let jac = central_jacobian(&|x| self.residual_vec(x), &self.x, m);
        jac.iter().all(|v| v.is_finite()).then_some(jac)
    }
}

fn check(problem: &FitProblem) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let free = &problem.free;
    if free.is_empty() {
        return Err(Error::Config("fit needs at least one free parameter".into()));
    }
    if (1..free.len()).any(|i| free[..i].contains(&free[i])) {
        return Err(Error::Config("free parameters must be distinct".into()));
    }
    if free.contains(&FreeParam::Phi) && !problem.fixed.mirror.present {
        return Err(Error::Config("phi is free but the mirror is absent".into()));
    }
    let grid = problem.data.grid();
    check_grid(grid)?;
    if grid[0] <= 0.0 {
        return Err(Error::InvalidSpectrum("fit grid must be at positive frequencies".into()));
    }
    let n = grid.len();
    if n < 5 * free.len() {
        return Err(Error::InsufficientData { points: n, params: free.len() });
    }
    let y = problem.data.re();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpectrum("non-finite data".into()));
    }
    let w = match &problem.weights {
        Some(w) if w.len() != n => return Err(Error::InvalidSpectrum("weights and data differ in length".into())),
        Some(w) if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) => {
            return Err(Error::InvalidSpectrum("weights must be finite and non-negative".into()))
        }
        Some(w) => w.clone(),
        None => {
            if y.iter().any(|v| *v <= 0.0) {
                return Err(Error::InvalidSpectrum("default 1/data weights need positive data".into()));
            }
            y.iter().map(|v| 1.0 / v).collect()
        }
    };
    let j0 = match problem.quantity {
        FitQuantity::Density => None,
        FitQuantity::Purcell => {
            let mu = problem.fixed.emitter.mu.filter(|m| *m > 0.0).ok_or(Error::MissingDipoleMoment)?;
            Some(grid.iter().map(|&w| units::free_space_density(w, mu)).collect())
        }
    };
    Ok((w, j0))
}

fn starts(problem: &FitProblem) -> Vec<DVector<f64>> {
    let p = &problem.fixed;
    let g1s: Vec<f64> = if problem.free.contains(&FreeParam::G1) {
        G1_BRACKET_MEV.iter().flat_map(|&g| [-g, g]).collect()
    } else {
        vec![f64::NAN]
    };
    let phis: Vec<f64> = if problem.free.contains(&FreeParam::Phi) { PHI_STARTS.to_vec() } else { vec![f64::NAN] };
    let gc0 = if p.couplings.gc != 0.0 { p.couplings.gc / COUPLING_SCALE } else { 0.1 };
    let mut out = Vec::new();
    for &g1 in &g1s {
        for &phi in &phis {
            let mut x = Vec::new();
            for f in &problem.free {
                match f {
                    FreeParam::G1 => x.push(g1),
                    FreeParam::Gc => x.push(gc0),
                    FreeParam::Phi => {
                        x.push(phi.cos());
                        x.push(phi.sin());
                    }
                }
            }
            out.push(DVector::from_vec(x));
        }
    }
    out
}

fn converged(t: &TerminationReason) -> bool {
    t.was_successful() || matches!(t, TerminationReason::NoImprovementPossible(_))
}

/// Fit the free parameters; see the module docs for the procedure.
pub fn fit_g1(problem: &FitProblem) -> Result<FitResult> {
    let (w, j0) = check(problem)?;
    let grid = problem.data.grid();
    let y = problem.data.re();
    let model = Model {
        grid,
        y: &y,
        w: &w,
        base: problem.fixed,
        free: &problem.free,
        j0,
        x: DVector::zeros(layout_len(&problem.free)),
    };
    let lm = LevenbergMarquardt::new().with_patience(PATIENCE);
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut evaluations = 0;
    let all = starts(problem);
    for x0 in &all {
        let mut m = model.clone();
        m.x = x0.clone();
        let (m, report) = lm.minimize(m);
        evaluations += report.number_of_evaluations;
        if !converged(&report.termination) {
            log::debug!("fit start {x0:?} stopped: {:?}", report.termination);
            continue;
        }
        let cost = report.objective_function;
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, m.x));
        }
    }
    let (_, x) = best.ok_or(Error::NonConvergence { evaluations })?;
    let fitted = canonical(model.params_at(&x), &problem.free);
    summarize(&model, fitted, &problem.free, evaluations, all.len())
}

/// J is invariant under (g₁, g_c) → (−g₁, −g_c), and under g₁ → −g₁ when g_c = 0;
/// report the representative with g_c ≥ 0, or g₁ ≤ 0 when g_c vanishes.
fn canonical(mut p: SystemParams, free: &[FreeParam]) -> SystemParams {
    let c = &mut p.couplings;
    if free.contains(&FreeParam::G1) {
        if free.contains(&FreeParam::Gc) && c.gc < 0.0 {
            c.gc = -c.gc;
            c.g1 = -c.g1;
        } else if c.gc == 0.0 {
            c.g1 = -c.g1.abs();
        }
    }
    p
}

fn physical(p: &SystemParams, f: FreeParam) -> f64 {
    match f {
        FreeParam::G1 => p.couplings.g1,
        FreeParam::Gc => p.couplings.gc,
        FreeParam::Phi => p.phi(),
    }
}

fn summarize(model: &Model, fitted: SystemParams, free: &[FreeParam], evaluations: usize, starts: usize) -> Result<FitResult> {
    let n = model.grid.len();
    let theta = DVector::from_iterator(free.len(), free.iter().map(|&f| physical(&fitted, f)));
    let at = |t: &DVector<f64>| {
        let mut p = fitted;
        for (k, f) in free.iter().enumerate() {
            match f {
                FreeParam::G1 => p.couplings.g1 = t[k],
                FreeParam::Gc => p.couplings.gc = t[k],
                FreeParam::Phi => p.mirror.set_phi(t[k]),
            }
        }
        let mut r = DVector::zeros(n);
        model.data_residuals(&p, r.as_mut_slice());
        r
    };
    let r = at(&theta);
    let rss = r.norm_squared();
    // steps in physical units: couplings in eV, phase in rad
    let mut jac = DMatrix::zeros(n, free.len());
    for (j, f) in free.iter().enumerate() {
        let h = match f {
            FreeParam::Phi => 1e-6,
            _ => 1e-6 * theta[j].abs().max(COUPLING_SCALE),
        };
        let (mut tp, mut tm) = (theta.clone(), theta.clone());
        tp[j] += h;
        tm[j] -= h;
        jac.set_column(j, &((at(&tp) - at(&tm)) / (2.0 * h)));
    }
    let normal = jac.transpose() * &jac;
    let d: Vec<f64> = normal.diagonal().iter().map(|v| v.sqrt()).collect();
    let condition = if d.iter().any(|v| !(*v > 0.0)) {
        f64::INFINITY
    } else {
        let scaled = DMatrix::from_fn(free.len(), free.len(), |i, j| normal[(i, j)] / (d[i] * d[j]));
        let ev = scaled.symmetric_eigenvalues();
        let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    };
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::IllConditionedFit { condition });
    }
    let dof = (n - free.len()).max(1) as f64;
    let inv = normal.clone().try_inverse().ok_or(Error::IllConditionedFit { condition })?;
    let covariance = inv * (rss / dof);
    let estimates = free
        .iter()
        .enumerate()
        .map(|(k, &param)| Estimate { param, value: theta[k], std_error: covariance[(k, k)].max(0.0).sqrt() })
        .collect();
    Ok(FitResult {
        params: fitted,
        estimates,
        covariance,
        condition,
        residual_norm: rss.sqrt(),
        normalized_residual: (rss / n as f64).sqrt(),
        evaluations,
        starts,
    })
}

/// Sample the model on `grid` (Purcell factor or J) for synthetic data.
pub fn model_spectrum(p: &SystemParams, grid: &[f64], quantity: FitQuantity) -> Result<ComplexSpectrum> {
    let y: Result<Vec<f64>> = grid
        .iter()
        .map(|&w| {
            let j = spectral_density_at(p, w);
            match quantity {
                FitQuantity::Density => Ok(j),
                FitQuantity::Purcell => {
                    let mu = p.emitter.mu.filter(|m| *m > 0.0).ok_or(Error::MissingDipoleMoment)?;
                    Ok(j / units::free_space_density(w, mu))
                }
            }
        })
        .collect();
    ComplexSpectrum::from_real(grid.to_vec(), y?)
}

/// Fitting grid for a parameter set: the cavity-like resonance at high density
/// plus a coarse sweep across the plasmon.
pub fn default_fit_grid(p: &SystemParams) -> Vec<f64> {
    let (lo, hi) = crate::response::cavity_window(p);
    let wa = p.plasmon.omega_a;
    let ka = p.kappa_a();
    crate::spectrum::merge_grids(&crate::spectrum::linspace(lo, hi, 401), &crate::spectrum::linspace((wa - 3.0 * ka).max(0.05), wa + 3.0 * ka, 200))
}
