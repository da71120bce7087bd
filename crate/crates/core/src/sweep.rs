//! Parameter sweeps over one or two named axes.
//!
//! Rows come out outer-axis-major regardless of how many threads ran. A failing
//! cell records its error code in the `error` column and leaves its observables
//! empty. With a cache directory, finished rows are appended to a file named by
//! the content hash of (version, spec, params) so an interrupted sweep resumes.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Observable, SweepSpec};
use crate::error::{Error, Result};
use crate::export::{Cell, Table, VERSION};
use crate::params::{DriveTarget, SystemParams};
use crate::quantum_yield::{yield_cell, yield_spectrum, YieldOptions};
use crate::response::{self, cavity_peak, optimal_phi, refine_peak, PeakMetrics};
use crate::scatter::decompose_sigma0;
use crate::units;

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub yield_options: YieldOptions,
}

pub fn observable_columns(obs: Observable) -> &'static [&'static str] {
    match obs {
        Observable::PurcellMax => &["F_p", "omega_peak_eV", "phi_over_pi"],
        Observable::Linewidth => &["fwhm_eV", "omega_peak_eV", "phi_over_pi"],
        Observable::Eta => &["eta", "eta0", "eta_r", "eta_d", "deltaL_at_max_eV"],
        Observable::Sigma0 => &["sigma0", "sigma_sup", "sigma_so", "mechanism"],
        Observable::EnhancementPair => &["fp_ratio", "width_ratio", "phi_over_pi"],
    }
}

/// Content hash identifying a sweep's results.
pub fn sweep_hash(spec: &SweepSpec, params: &SystemParams, opts: &YieldOptions) -> String {
    let doc = serde_json::json!({ "version": VERSION, "spec": spec, "params": params, "yield": opts });
    hex::encode(Sha256::digest(doc.to_string().as_bytes()))
}

fn peak_on(p: &SystemParams, scan: Option<&[f64]>) -> Result<PeakMetrics> {
    match scan {
        None => cavity_peak(p),
        Some(grid) => match p.emitter.mu {
            Some(mu) if mu > 0.0 => {
                refine_peak(&|w| response::spectral_density_at(p, w) / units::free_space_density(w, mu), grid)
            }
            _ => refine_peak(&|w| response::spectral_density_at(p, w), grid),
        },
    }
}

fn tuned(p: &SystemParams, spec: &SweepSpec) -> Result<SystemParams> {
    match spec.optimize_phi {
        Some(n) if p.mirror.present => Ok(p.with_phi(optimal_phi(p, n)?.0)),
        _ => Ok(*p),
    }
}

fn max_on(p: &SystemParams, grid: &[f64], opts: &YieldOptions) -> Result<(f64, f64)> {
    let s = yield_spectrum(p, grid, DriveTarget::Emitter, opts)?;
    let k = (0..s.len()).max_by(|&i, &j| s[i].eta.total_cmp(&s[j].eta)).ok_or(Error::NoPeak)?;
    Ok((s[k].eta, grid[k]))
}

/// Observables of one cell, in the order of `observable_columns`.
pub fn evaluate(p: &SystemParams, spec: &SweepSpec, scan: Option<&[f64]>, opts: &YieldOptions) -> Result<Vec<Cell>> {
    let pi = std::f64::consts::PI;
    Ok(match spec.observable {
        Observable::PurcellMax => {
            let q = tuned(p, spec)?;
            let m = peak_on(&q, scan)?;
            vec![m.f_p.into(), m.omega_peak.into(), (q.phi() / pi).into()]
        }
        Observable::Linewidth => {
            let q = tuned(p, spec)?;
            let m = peak_on(&q, scan)?;
            vec![m.fwhm.into(), m.omega_peak.into(), (q.phi() / pi).into()]
        }
        Observable::EnhancementPair => {
            let q = tuned(p, spec)?;
            let cep = peak_on(&q, scan)?;
            let base = peak_on(&q.baseline(), scan)?;
            vec![(cep.f_p / base.f_p).into(), (cep.fwhm / base.fwhm).into(), (q.phi() / pi).into()]
        }
        Observable::Eta => match scan {
            None => {
                let c = yield_cell(p, DriveTarget::Emitter, opts)?;
                vec![c.eta.into(), c.eta0.into(), c.eta_r.into(), c.eta_d.into(), c.delta_at_max.into()]
            }
            Some(grid) => {
                let (eta, at) = max_on(p, grid, opts)?;
                let (eta0, _) = max_on(&p.baseline(), grid, opts)?;
                vec![eta.into(), eta0.into(), Cell::Missing, Cell::Missing, at.into()]
            }
        },
        Observable::Sigma0 => {
            let d = decompose_sigma0(p)?;
            vec![d.sigma_total.into(), d.sigma_sup.into(), d.sigma_so.into(), d.mechanism.as_str().into()]
        }
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CachedRow {
    index: usize,
    row: Vec<Cell>,
}

fn read_cache(path: &Path, n: usize, width: usize) -> BTreeMap<usize, Vec<Cell>> {
    let mut done = BTreeMap::new();
    if let Ok(f) = std::fs::File::open(path) {
        for line in BufReader::new(f).lines().map_while(std::result::Result::ok) {
            // a torn final line from an interrupted run is simply recomputed
            if let Ok(r) = serde_json::from_str::<CachedRow>(&line) {
                if r.index < n && r.row.len() == width {
                    done.insert(r.index, r.row);
                }
            }
        }
    }
    done
}

pub fn cache_path(dir: &Path, hash: &str) -> PathBuf {
    dir.join(format!("sweep-{hash}.jsonl"))
}

pub fn run_sweep(spec: &SweepSpec, params: &SystemParams, opts: &SweepOptions) -> Result<Table> {
    if spec.axes.is_empty() || spec.axes.len() > 2 {
        return Err(Error::Config("a sweep needs one or two axes".into()));
    }
    let mut axes = Vec::new();
    for a in &spec.axes {
        params.get_path(&a.path)?;
        let v = a.axis().resolve(&a.path)?;
        axes.push(v);
    }
    let scan = spec.scan.as_ref().map(|s| s.resolve("scan")).transpose()?;
    if let Some(g) = &scan {
        crate::spectrum::check_grid(g)?;
    }

    let cells: Vec<Vec<f64>> = match axes.as_slice() {
        [a] => a.iter().map(|&x| vec![x]).collect(),
        [a, b] => a.iter().flat_map(|&x| b.iter().map(move |&y| vec![x, y])).collect(),
        _ => unreachable!(),
    };
    let obs_cols = observable_columns(spec.observable);
    let mut columns: Vec<String> = spec.axes.iter().map(|a| a.path.clone()).collect();
    columns.extend(obs_cols.iter().map(|c| c.to_string()));
    columns.push("error".into());
    let width = columns.len();

    let hash = sweep_hash(spec, params, &opts.yield_options);
    let cache = opts.cache_dir.as_ref().map(|d| cache_path(d, &hash));
    let done = cache.as_ref().map(|p| read_cache(p, cells.len(), width)).unwrap_or_default();
    let writer = match &cache {
        Some(path) => {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            let torn = std::fs::read(path).map(|b| b.last().is_some_and(|&c| c != b'\n')).unwrap_or(false);
            if torn {
                writeln!(f)?;
            }
            Some(Mutex::new(f))
        }
        None => None,
    };

    let compute = |i: usize, values: &Vec<f64>| -> Result<Vec<Cell>> {
        if let Some(row) = done.get(&i) {
            return Ok(row.clone());
        }
        let mut row: Vec<Cell> = values.iter().map(|&v| Cell::Num(v)).collect();
        let mut p = *params;
        let outcome = values
            .iter()
            .zip(&spec.axes)
            .try_for_each(|(&v, a)| p.set_path(&a.path, v))
            .and_then(|_| p.validated())
            .and_then(|p| evaluate(&p, spec, scan.as_deref(), &opts.yield_options));
        match outcome {
            Ok(obs) => {
                row.extend(obs);
                row.push(Cell::Text(String::new()));
            }
            Err(e) => {
                log::warn!("sweep cell {i} failed: {e}");
                row.extend(obs_cols.iter().map(|_| Cell::Missing));
                row.push(Cell::Text(e.code().into()));
            }
        }
        if let Some(w) = &writer {
            let line = serde_json::to_string(&CachedRow { index: i, row: row.clone() }).expect("row serialises");
            let mut f = w.lock().expect("cache lock");
            writeln!(f, "{line}")?;
        }
        Ok(row)
    };

    let run = || cells.par_iter().enumerate().map(|(i, v)| compute(i, v)).collect::<Result<Vec<_>>>();
    let rows = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    Ok(Table { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AxisSpec, Scale, SweepAxis};
    use crate::params::fixtures::{fig2, fig5};

    fn spec(axes: Vec<SweepAxis>, observable: Observable) -> SweepSpec {
        SweepSpec { axes, observable, scan: None, optimize_phi: None }
    }

    #[test]
    fn single_cell_matches_direct_call() {
        let p = fig5(1e5, 0.0);
        let s = spec(vec![SweepAxis::new("photon.q_c", AxisSpec::list(vec![1e5]))], Observable::Sigma0);
        let t = run_sweep(&s, &p, &SweepOptions::default()).unwrap();
        assert_eq!(t.rows.len(), 1);
        let d = decompose_sigma0(&p.with_qc(1e5)).unwrap();
        assert_eq!(t.rows[0][1], Cell::Num(d.sigma_total));
        assert_eq!(t.rows[0][2], Cell::Num(d.sigma_sup));
        assert_eq!(t.rows[0][4], Cell::Text("superscattering".into()));
    }

    #[test]
    fn order_is_outer_major_for_any_job_count() {
        let p = fig2();
        let s = spec(
            vec![
                SweepAxis::new("photon.q_c", AxisSpec::range(1e3, 1e4, 3, Scale::Log)),
                SweepAxis::new("mirror.phi_over_pi", AxisSpec::range(0.0, 1.5, 4, Scale::Linear)),
            ],
            Observable::PurcellMax,
        );
        let a = run_sweep(&s, &p, &SweepOptions { jobs: Some(1), ..Default::default() }).unwrap();
        let b = run_sweep(&s, &p, &SweepOptions { jobs: Some(4), ..Default::default() }).unwrap();
        assert_eq!(a, b);
        let q: Vec<f64> = a.column("photon.q_c").unwrap().into_iter().map(Option::unwrap).collect();
        assert!(q[0] == q[3] && q[4] > q[3]);
    }

    #[test]
    fn failing_cells_keep_their_row() {
        let p = fig5(1e5, 0.0);
        let s = spec(vec![SweepAxis::new("couplings.g1", AxisSpec::list(vec![-2.9e-3, 0.0]))], Observable::Sigma0);
        let t = run_sweep(&s, &p, &SweepOptions::default()).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0][5], Cell::Text(String::new()));
        assert_eq!(t.rows[1][5], Cell::Text("defective_matrix".into()));
        assert_eq!(t.rows[1][1], Cell::Missing);
    }

    #[test]
    fn invalid_cells_are_validation_rows() {
        let p = fig5(1e5, 0.0);
        let s = spec(vec![SweepAxis::new("plasmon.kappa_o", AxisSpec::list(vec![-1.0]))], Observable::Sigma0);
        let t = run_sweep(&s, &p, &SweepOptions::default()).unwrap();
        assert_eq!(t.rows[0][5], Cell::Text("validation".into()));
    }

    #[test]
    fn unknown_axis_is_rejected() {
        let s = spec(vec![SweepAxis::new("couplings.g2", AxisSpec::list(vec![1.0]))], Observable::Sigma0);
        assert!(matches!(run_sweep(&s, &fig2(), &SweepOptions::default()), Err(Error::UnknownParameter(_))));
    }

    #[test]
    fn resumes_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let p = fig5(1e5, 0.0);
        let s = spec(vec![SweepAxis::new("mirror.phi_over_pi", AxisSpec::range(0.0, 1.5, 4, Scale::Linear))], Observable::Sigma0);
        let opts = SweepOptions { cache_dir: Some(dir.path().to_path_buf()), ..Default::default() };
        let full = run_sweep(&s, &p, &opts).unwrap();
        let path = cache_path(dir.path(), &sweep_hash(&s, &p, &opts.yield_options));
        // keep two rows, plant a sentinel to prove they are reused, and tear the tail
        let text = std::fs::read_to_string(&path).unwrap();
        let mut kept: Vec<String> = text.lines().filter(|l| l.contains("\"index\":0") || l.contains("\"index\":2")).map(String::from).collect();
        kept[0] = kept[0].replace("superscattering", "cached").replace("eit_intermediate", "cached");
        std::fs::write(&path, kept.join("\n") + "\n{\"index\":3,\"ro").unwrap();
        let resumed = run_sweep(&s, &p, &opts).unwrap();
        let label = |t: &Table, i: usize| t.rows[i][4].clone();
        assert!(label(&resumed, 0) == Cell::Text("cached".into()) || label(&resumed, 2) == Cell::Text("cached".into()));
        assert_eq!(label(&resumed, 1), label(&full, 1));
        assert_eq!(label(&resumed, 3), label(&full, 3));
    }
}
