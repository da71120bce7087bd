//! The CLI subcommands as library calls: each turns a resolved config into a
//! result table plus an optional summary.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Config, FitSpec};
use crate::dynamics::{self, DynamicsMethod, EmitterTuning};
use crate::error::{Error, Result};
use crate::export::{read_numeric_csv, Cell, Table};
use crate::fit::{fit_g1, FitProblem};
use crate::params::SystemParams;
use crate::quantum_yield::{detuning_grid, yield_map, yield_spectrum};
use crate::response::{self, cavity_peak, cavity_window, optimal_phi};
use crate::scatter::{self, decompose_sigma0, Route};
use crate::spectrum::{default_ldos_grid, linspace, merge_grids, ComplexSpectrum};
use crate::sweep::{run_sweep, SweepOptions};
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Ldos,
    Emission,
    Dynamics,
    Yield,
    Scatter,
    Sweep,
    Fit,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ldos => "ldos",
            Command::Emission => "emission",
            Command::Dynamics => "dynamics",
            Command::Yield => "yield",
            Command::Scatter => "scatter",
            Command::Sweep => "sweep",
            Command::Fit => "fit",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub table: Table,
    /// Extra results for the structured record.
    pub summary: Option<Value>,
    /// One-row table written next to the main CSV.
    pub summary_table: Option<Table>,
}

impl Output {
    fn plain(table: Table) -> Self {
        Output { table, summary: None, summary_table: None }
    }
}

pub const DEFAULT_T_MAX_FS: f64 = 10_000.0;
pub const DEFAULT_TIME_POINTS: usize = 2001;

/// Parameters after the run block's phase and emitter tuning.
pub fn prepared_params(cfg: &Config) -> Result<SystemParams> {
    let mut p = cfg.params;
    if let Some(n) = cfg.run().tune_phi {
        if p.mirror.present {
            p = p.with_phi(optimal_phi(&p, n)?.0);
        }
    }
    Ok(p)
}

fn tuned(p: &SystemParams, tuning: Option<EmitterTuning>) -> Result<SystemParams> {
    match tuning {
        None => Ok(*p),
        Some(t) => dynamics::tune_emitter(p, t),
    }
}

// the mirror-free comparison has no doublet to balance; it sits at its own peak
fn tuned_baseline(p: &SystemParams, tuning: Option<EmitterTuning>) -> Result<SystemParams> {
    let b = p.baseline();
    match tuning {
        None => Ok(b),
        Some(_) => dynamics::tune_emitter(&b, EmitterTuning::CavityPeak),
    }
}

fn purcell_or_missing(p: &SystemParams, omega: f64, j: f64) -> Cell {
    match p.emitter.mu {
        Some(mu) if mu > 0.0 => Cell::Num(j / units::free_space_density(omega, mu)),
        _ => Cell::Missing,
    }
}

fn ldos(cfg: &Config, p: &SystemParams) -> Result<Output> {
    let grid = match &cfg.run().omega {
        Some(a) => a.resolve("run.omega")?,
        None => default_ldos_grid(p),
    };
    let base = p.baseline();
    let j = response::spectral_density(p, &grid)?.re();
    let j0 = response::spectral_density(&base, &grid)?.re();
    let mut t = Table::new(&["omega_eV", "J_eV", "P", "J_baseline_eV", "P_baseline"]);
    for (i, &w) in grid.iter().enumerate() {
        t.push(vec![w.into(), j[i].into(), purcell_or_missing(p, w, j[i]), j0[i].into(), purcell_or_missing(&base, w, j0[i])]);
    }
    let summary = match (cavity_peak(p), cavity_peak(&base)) {
        (Ok(c), Ok(b)) => json!({
            "peak": c, "peak_baseline": b,
            "fp_ratio": c.f_p / b.f_p, "width_ratio": c.fwhm / b.fwhm,
            "phi_over_pi": p.phi() / PI,
        }),
        (c, b) => json!({ "peak_error": c.err().map(|e| e.to_string()), "baseline_error": b.err().map(|e| e.to_string()) }),
    };
    Ok(Output { table: t, summary: Some(summary), summary_table: None })
}

pub fn emission_grid(p: &SystemParams) -> Vec<f64> {
    let (lo, hi) = cavity_window(p);
    let w0 = p.emitter.omega_0;
    let k = p.kappa().max(p.gamma());
    merge_grids(&linspace(lo, hi, 4001), &linspace((w0 - 20.0 * k).max(1e-6), w0 + 20.0 * k, 2001))
}

fn emission(cfg: &Config, p: &SystemParams) -> Result<Output> {
    let p = tuned(p, cfg.run().emitter_tuning)?;
    let grid = match &cfg.run().omega {
        Some(a) => a.resolve("run.omega")?,
        None => emission_grid(&p),
    };
    let e = dynamics::emission_spectrum(&p, &grid)?;
    let shift = cfg.run().emission_shift.unwrap_or(0.0);
    let shifted: Vec<f64> = grid.iter().map(|w| w + shift).collect();
    let (s, g, d) = (e.spectrum.re(), e.local_coupling.re(), e.lamb_shift.re());
    let table = Table::from_columns(&["omega_eV", "S_per_eV", "Gamma_eV", "Delta_eV"], &[&shifted, &s, &g, &d])?;
    let lines = dynamics::two_strongest_lines(&grid, &s);
    let summary = json!({
        "omega_0_eV": p.emitter.omega_0,
        "phi_over_pi": p.phi() / PI,
        "shift_eV": shift,
        "lines": lines.map(|l| l.iter().map(|x| json!({"omega_eV": x.omega + shift, "height": x.height, "fwhm_eV": x.fwhm})).collect::<Vec<_>>()),
    });
    Ok(Output { table, summary: Some(summary), summary_table: None })
}

fn dynamics_cmd(cfg: &Config, p: &SystemParams) -> Result<Output> {
    let run = cfg.run();
    let (t_max, n) = run.time.map_or((DEFAULT_T_MAX_FS, DEFAULT_TIME_POINTS), |t| (t.t_max_fs, t.points));
    if !(t_max > 0.0) || n < 2 {
        return Err(Error::InvalidTimeGrid("need t_max_fs > 0 and at least two points".into()));
    }
    let t_fs = linspace(0.0, t_max, n);
    let t: Vec<f64> = t_fs.iter().map(|&x| units::fs_to_natural(x)).collect();
    let method = run.method.unwrap_or(DynamicsMethod::SpectralFt);
    let cep = tuned(p, run.emitter_tuning)?;
    let base = tuned_baseline(p, run.emitter_tuning)?;
    let pop = dynamics::qe_dynamics(&cep, &t, method)?;
    let pop0 = dynamics::qe_dynamics(&base, &t, method)?;
    let table = Table::from_columns(&["t_fs", "population", "population_baseline"], &[&t_fs, &pop, &pop0])?;
    let summary = json!({ "method": method, "omega_0_eV": cep.emitter.omega_0, "omega_0_baseline_eV": base.emitter.omega_0 });
    Ok(Output { table, summary: Some(summary), summary_table: None })
}

fn yield_cmd(cfg: &Config, p: &SystemParams) -> Result<Output> {
    let spec = cfg.run().yield_spec.clone().unwrap_or_default();
    let opts = spec.options();
    let target = spec.target();
    if spec.spectrum.unwrap_or(false) {
        let grid = match &cfg.run().detuning {
            Some(a) => a.resolve("run.detuning")?,
            None => detuning_grid(p)?,
        };
        let cep = yield_spectrum(p, &grid, target, &opts)?;
        let base = yield_spectrum(&p.baseline(), &grid, target, &opts)?;
        let mut t = Table::new(&["deltaL_eV", "eta", "phi_r", "phi_d", "eta_baseline", "phi_r_baseline", "phi_d_baseline"]);
        for (i, &d) in grid.iter().enumerate() {
            let (c, b) = (cep[i], base[i]);
            t.push(vec![d.into(), c.eta.into(), c.phi_r.into(), c.phi_d.into(), b.eta.into(), b.phi_r.into(), b.phi_d.into()]);
        }
        let cell = crate::quantum_yield::yield_cell(p, target, &opts)?;
        let summary = json!({ "eta": cell.eta, "eta0": cell.eta0, "eta_r": cell.eta_r, "eta_d": cell.eta_d,
            "deltaL_at_max_eV": cell.delta_at_max, "phi_r_gain_at_max": cell.phi_r_gain_at_max, "options": opts });
        return Ok(Output { table: t, summary: Some(summary), summary_table: None });
    }
    let qc = match &spec.q_c {
        Some(a) => a.resolve("run.yield.q_c")?,
        None => vec![p.q_c()],
    };
    let phi: Vec<f64> = match &spec.phi_over_pi {
        Some(a) => a.resolve("run.yield.phi_over_pi")?.iter().map(|x| x * PI).collect(),
        None => vec![p.phi()],
    };
    let cells = yield_map(p, &qc, &phi, target, &opts)?;
    let mut t = Table::new(&["Qc", "phi_over_pi", "eta", "eta0", "eta_r", "eta_d", "deltaL_at_max_eV"]);
    for c in &cells {
        t.push(vec![c.q_c.into(), (c.phi / PI).into(), c.eta.into(), c.eta0.into(), c.eta_r.into(), c.eta_d.into(), c.delta_at_max.into()]);
    }
    Ok(Output { table: t, summary: Some(json!({ "options": opts, "target": target })), summary_table: None })
}

/// Default Δ_L grid for scattering: ±50κ densely, ±3κ_a coarsely.
pub fn scatter_grid(p: &SystemParams) -> Vec<f64> {
    let k = p.kappa();
    let ka = p.kappa_a();
    merge_grids(&linspace(-50.0 * k, 50.0 * k, 2001), &linspace(-3.0 * ka, 3.0 * ka, 1001))
}

fn scatter_cmd(cfg: &Config, p: &SystemParams) -> Result<Output> {
    let grid = match &cfg.run().detuning {
        Some(a) => a.resolve("run.detuning")?,
        None => scatter_grid(p),
    };
    let s = scatter::scatter_spectrum(p, &grid, Route::Direct)?.re();
    let s0 = scatter::scatter_spectrum(&p.baseline(), &grid, Route::Direct)?.re();
    let table = Table::from_columns(&["deltaL_eV", "sigma", "sigma_baseline"], &[&grid, &s, &s0])?;
    let mut row = Table::new(&["sigma0", "sigma_sup", "sigma_so", "mechanism"]);
    let summary = match decompose_sigma0(p) {
        Ok(d) => {
            row.push(vec![d.sigma_total.into(), d.sigma_sup.into(), d.sigma_so.into(), d.mechanism.as_str().into()]);
            let g = d.eigen.gammas();
            json!({ "sigma0": d.sigma_total, "sigma_sup": d.sigma_sup, "sigma_so": d.sigma_so, "mechanism": d.mechanism.as_str(),
                    "eigen_gammas_eV": g, "condition": d.eigen.condition })
        }
        Err(e) => {
            let s0 = scatter::sigma_direct(p, 0.0)?;
            row.push(vec![s0.into(), Cell::Missing, Cell::Missing, e.code().into()]);
            json!({ "sigma0": s0, "decomposition_error": e.to_string() })
        }
    };
    let mut summary = summary;
    if let Ok(c) = scatter::peak_colocation(p, &linspace(grid[0], grid[grid.len() - 1], grid.len())) {
        summary["colocation"] = json!({ "deltaL_sigma_peak_eV": c.delta_sigma_peak, "deltaL_phi_r_peak_eV": c.delta_phi_r_peak,
                                        "grid_step_eV": c.grid_step, "within_one_step": c.within_one_step() });
    }
    Ok(Output { table, summary: Some(summary), summary_table: Some(row) })
}

fn sweep_cmd(cfg: &Config, p: &SystemParams, opts: &RunOptions) -> Result<Output> {
    let spec = cfg.run().sweep.as_ref().ok_or_else(|| Error::Config("run.sweep is required for `sweep`".into()))?;
    let yield_options = cfg.run().yield_spec.clone().unwrap_or_default().options();
    let table = run_sweep(spec, p, &SweepOptions { jobs: opts.jobs, cache_dir: opts.cache_dir.clone(), yield_options })?;
    Ok(Output::plain(table))
}

/// Read fit data `omega_eV,value[,weight]`.
pub fn read_fit_data(path: &Path) -> Result<(ComplexSpectrum, Option<Vec<f64>>)> {
    let rows = read_numeric_csv(&std::fs::read_to_string(path)?)?;
    let width = rows.first().map_or(0, Vec::len);
    if !(2..=3).contains(&width) || rows.iter().any(|r| r.len() != width) {
        return Err(Error::InvalidSpectrum("fit data needs 2 or 3 numeric columns on every row".into()));
    }
    let grid = rows.iter().map(|r| r[0]).collect();
    let y = rows.iter().map(|r| r[1]).collect();
    let w = (width == 3).then(|| rows.iter().map(|r| r[2]).collect());
    Ok((ComplexSpectrum::from_real(grid, y)?, w))
}

fn fit_cmd(cfg: &Config, p: &SystemParams) -> Result<Output> {
    let spec: &FitSpec = cfg.run().fit.as_ref().ok_or_else(|| Error::Config("run.fit is required for `fit`".into()))?;
    let rel = spec.data.as_ref().ok_or_else(|| Error::Config("run.fit.data must name a CSV file".into()))?;
    let path = match &cfg.base_dir {
        Some(d) if Path::new(rel).is_relative() => d.join(rel),
        _ => PathBuf::from(rel),
    };
    let (data, weights) = read_fit_data(&path)?;
    let r = fit_g1(&FitProblem { data, fixed: *p, free: spec.free.clone(), weights, quantity: spec.quantity })?;
    let mut t = Table::new(&["parameter", "estimate", "std_error"]);
    for e in &r.estimates {
        let name = serde_json::to_value(e.param).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        t.push(vec![Cell::Text(name), e.value.into(), e.std_error.into()]);
    }
    let summary = json!({
        "residual_norm": r.residual_norm, "normalized_residual": r.normalized_residual,
        "condition": r.condition, "evaluations": r.evaluations, "starts": r.starts,
        "covariance": r.covariance.row_iter().map(|row| row.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
    });
    Ok(Output { table: t, summary: Some(summary), summary_table: None })
}

pub fn execute(cmd: Command, cfg: &Config, opts: &RunOptions) -> Result<Output> {
    let go = || -> Result<Output> {
        let p = prepared_params(cfg)?;
        match cmd {
            Command::Ldos => ldos(cfg, &p),
            Command::Emission => emission(cfg, &p),
            Command::Dynamics => dynamics_cmd(cfg, &p),
            Command::Yield => yield_cmd(cfg, &p),
            Command::Scatter => scatter_cmd(cfg, &p),
            Command::Sweep => sweep_cmd(cfg, &p, opts),
            Command::Fit => fit_cmd(cfg, &p),
        }
    };
    match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(go),
        None => go(),
    }
}
