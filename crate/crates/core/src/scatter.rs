//! Eigenmode decomposition of the cavity block under plasmon drive.
//!
//! With left eigenvectors V (rows, V A = Λ V) of the detuned cavity block A,
//! c(Δ) = −V⁻¹(Δ + Λ)⁻¹V s_p, and writing V⁻¹ = adj(V)/det V,
//!
//!   σ(Δ) = |det V|⁻² Σᵢⱼ (CᵢLᵢ)* Wᵢⱼ CⱼLⱼ,  C = V s_p,  W = adj(V)†Γ adj(V),
//!
//! with Lᵢ = 1/(Δ + λᵢ). Every term is invariant under rescaling the rows of V.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{build_generator, Basis};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::params::SystemParams;
use crate::spectrum::{check_grid, ComplexSpectrum, C64};

pub const DEFAULT_CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    pub condition_limit: f64,
    /// Skip the defectiveness checks (results near an exceptional point are then unreliable).
    pub allow_defective: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { condition_limit: DEFAULT_CONDITION_LIMIT, allow_defective: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    /// λᵢ = ωᵢ − iγᵢ, sorted by decreasing γᵢ.
    pub eigenvalues: [C64; 3],
    /// Rows are unit-norm left eigenvectors.
    pub v_matrix: CMatrix,
    pub condition: f64,
}

impl EigenSystem {
    pub fn gammas(&self) -> [f64; 3] {
        self.eigenvalues.map(|z| -z.im)
    }
}

/// Cavity block (a, c₁, c₂) with frequencies measured from ω_c.
pub fn cavity_matrix(p: &SystemParams) -> CMatrix {
    build_generator(p, Basis::CavityBlock3, Some(p.photon.omega_c)).entries
}

pub fn eigendecompose_cavity(p: &SystemParams) -> Result<EigenSystem> {
    eigendecompose_cavity_with(p, &EigenOptions::default())
}

pub fn eigendecompose_cavity_with(p: &SystemParams, opts: &EigenOptions) -> Result<EigenSystem> {
    let a = cavity_matrix(p);
    let (lambda, v) = match linalg::left_eig(&a) {
        Err(Error::DefectiveMatrix { .. }) if !opts.allow_defective => {
            return Err(Error::DefectiveMatrix { condition: f64::INFINITY })
        }
        r => r?,
    };
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| (-lambda[j].im).total_cmp(&-lambda[i].im).then(lambda[i].re.total_cmp(&lambda[j].re)));
    let mut rows = CMatrix::zeros(3, 3);
    for (r, &k) in order.iter().enumerate() {
        // fix the phase: largest component real and positive
        let row = v.row(k);
        let big = row.iter().copied().max_by(|x, y| x.norm().total_cmp(&y.norm())).unwrap();
        let phase = big.conj() / big.norm();
        for j in 0..3 {
            rows[(r, j)] = row[j] * phase;
        }
    }
    let eigenvalues = [lambda[order[0]], lambda[order[1]], lambda[order[2]]];
    let condition = linalg::condition_number(&rows);
    if !opts.allow_defective {
        let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let gap = (0..3)
            .flat_map(|i| ((i + 1)..3).map(move |j| (i, j)))
            .map(|(i, j)| (eigenvalues[i] - eigenvalues[j]).norm())
            .fold(f64::INFINITY, f64::min);
        if gap < 1e-7 * scale || !(condition <= opts.condition_limit) {
            return Err(Error::DefectiveMatrix { condition });
        }
    }
    Ok(EigenSystem { eigenvalues, v_matrix: rows, condition })
}

/// Channel coupling Γ = diag(κ_a, κ_c, κ_c) in the (a, c₁, c₂) basis.
fn channel_weights(p: &SystemParams) -> [f64; 3] {
    [p.kappa_a(), p.photon.kappa_c, p.photon.kappa_c]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeWeights {
    /// Radiation amplitudes Cᵢ = (V s_p)ᵢ.
    pub c: [C64; 3],
    /// W = adj(V)†Γ adj(V).
    pub w: CMatrix,
    /// |det V|⁻².
    pub p: f64,
    /// hᵢⱼ = Wᵢⱼ γ_aγ_bγ_c/(γᵢγⱼ); Hermitian.
    pub h: CMatrix,
    pub gammas: [f64; 3],
}

/// Weights for an arbitrary row scaling of the left-eigenvector matrix.
pub fn mode_weights(v: &CMatrix, eigenvalues: &[C64; 3], params: &SystemParams) -> ModeWeights {
    let c = [v[(0, 0)], v[(1, 0)], v[(2, 0)]];
    let adj = linalg::adjugate3(v);
    let gamma = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(3, channel_weights(params).iter().map(|&g| C64::new(g, 0.0))));
    let w = adj.adjoint() * gamma * &adj;
    let p = 1.0 / linalg::det3(v).norm_sqr();
    let gammas = eigenvalues.map(|z| -z.im);
    let prod = gammas[0] * gammas[1] * gammas[2];
    let h = CMatrix::from_fn(3, 3, |i, j| w[(i, j)] * prod / (gammas[i] * gammas[j]));
    ModeWeights { c, w, p, h, gammas }
}

/// Matrix of terms Tᵢⱼ = p (CᵢLᵢ)* Wᵢⱼ CⱼLⱼ at detuning Δ; σ(Δ) = Re Σ Tᵢⱼ.
pub fn sigma_terms(mw: &ModeWeights, eigenvalues: &[C64; 3], delta: f64) -> CMatrix {
    let amp: Vec<C64> = (0..3).map(|i| mw.c[i] / (delta + eigenvalues[i])).collect();
    CMatrix::from_fn(3, 3, |i, j| amp[i].conj() * mw.w[(i, j)] * amp[j] * mw.p)
}

/// Direct σ(Δ) = c†Γc with c = −(Δ + A)⁻¹ s_p.
pub fn sigma_direct(p: &SystemParams, delta: f64) -> Result<f64> {
    let a = cavity_matrix(p);
    let m = Matrix3::from_fn(|i, j| a[(i, j)] + if i == j { C64::new(delta, 0.0) } else { C64::new(0.0, 0.0) });
    let s = Vector3::new(C64::new(-1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    let c = m.lu().solve(&s).ok_or(Error::SingularAtDetuning { detuning: delta })?;
    let g = channel_weights(p);
    Ok((0..3).map(|i| g[i] * c[i].norm_sqr()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Eigen,
    Direct,
}

pub fn scatter_spectrum(p: &SystemParams, grid: &[f64], route: Route) -> Result<ComplexSpectrum> {
    check_grid(grid)?;
    let values: Vec<f64> = match route {
        Route::Direct => grid.iter().map(|&d| sigma_direct(p, d)).collect::<Result<_>>()?,
        Route::Eigen => {
            let es = eigendecompose_cavity(p)?;
            let mw = mode_weights(&es.v_matrix, &es.eigenvalues, p);
            grid.iter().map(|&d| sigma_terms(&mw, &es.eigenvalues, d).iter().sum::<C64>().re).collect()
        }
    };
    ComplexSpectrum::from_real(grid.to_vec(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mechanism {
    Superscattering,
    EITIntermediate,
    Other,
}

impl Mechanism {
    pub fn classify(sigma_sup: f64, sigma_so: f64) -> Self {
        if sigma_sup > 0.0 && sigma_so > 0.0 {
            Mechanism::Superscattering
        } else if sigma_sup > 0.0 && sigma_so < 0.0 {
            Mechanism::EITIntermediate
        } else {
            Mechanism::Other
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mechanism::Superscattering => "superscattering",
            Mechanism::EITIntermediate => "eit_intermediate",
            Mechanism::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterDecomposition {
    /// Direct-route σ(0).
    pub sigma_total: f64,
    /// Superradiant-mode self term.
    pub sigma_sup: f64,
    /// The remaining two self terms and all cross terms.
    pub sigma_so: f64,
    pub mechanism: Mechanism,
    pub eigen: EigenSystem,
    pub weights: ModeWeights,
}

pub fn decompose_sigma0(p: &SystemParams) -> Result<ScatterDecomposition> {
    let eigen = eigendecompose_cavity(p)?;
    decompose_with(p, eigen)
}

pub fn decompose_with(p: &SystemParams, eigen: EigenSystem) -> Result<ScatterDecomposition> {
    let weights = mode_weights(&eigen.v_matrix, &eigen.eigenvalues, p);
    let t = sigma_terms(&weights, &eigen.eigenvalues, 0.0);
    let sigma_sup = t[(0, 0)].re;
    let sigma_so = t.iter().sum::<C64>().re - sigma_sup;
    Ok(ScatterDecomposition {
        sigma_total: sigma_direct(p, 0.0)?,
        sigma_sup,
        sigma_so,
        mechanism: Mechanism::classify(sigma_sup, sigma_so),
        eigen,
        weights,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Colocation {
    pub delta_sigma_peak: f64,
    pub delta_phi_r_peak: f64,
    pub grid_step: f64,
}

impl Colocation {
    pub fn within_one_step(&self) -> bool {
        (self.delta_sigma_peak - self.delta_phi_r_peak).abs() <= self.grid_step * (1.0 + 1e-9)
    }
}

/// Positions of the σ maximum (plasmon drive) and the Φ_r maximum (emitter drive)
/// on a uniform detuning grid.
pub fn peak_colocation(p: &SystemParams, grid: &[f64]) -> Result<Colocation> {
    use crate::params::DriveTarget;
    use crate::quantum_yield::{budget_at, YieldOptions};
    check_grid(grid)?;
    let sigma = scatter_spectrum(p, grid, Route::Direct)?.re();
    let opts = YieldOptions::default();
    let phi_r: Vec<f64> = grid.iter().map(|&d| budget_at(p, d, DriveTarget::Emitter, &opts).map(|b| b.phi_r)).collect::<Result<_>>()?;
    let arg = |y: &[f64]| (0..y.len()).max_by(|&i, &j| y[i].total_cmp(&y[j])).unwrap();
    Ok(Colocation {
        delta_sigma_peak: grid[arg(&sigma)],
        delta_phi_r_peak: grid[arg(&phi_r)],
        grid_step: (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64,
    })
}
