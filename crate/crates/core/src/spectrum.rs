use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParams;

pub type C64 = Complex64;

/// Frequency grid with complex response values.
///
/// Real quantities (J, P, S, η, σ) are stored with zero imaginary part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSpectrum {
    grid: Vec<f64>,
    values: Vec<C64>,
}

impl ComplexSpectrum {
    pub fn new(grid: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidSpectrum(format!(
                "grid has {} points but {} values",
                grid.len(),
                values.len()
            )));
        }
        check_grid(&grid)?;
        Ok(ComplexSpectrum { grid, values })
    }

    pub fn from_real(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values.into_iter().map(|v| C64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

pub fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidSpectrum("grid needs at least two points".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidSpectrum("grid contains non-finite values".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpectrum("grid must be strictly increasing".into()));
    }
    Ok(())
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
        }
    }
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

/// Sorted union of two grids with near-duplicates removed.
pub fn merge_grids(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let scale = all.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        if out.last().is_none_or(|&l| x - l > 1e-14 * scale) {
            out.push(x);
        }
    }
    out
}

/// Default spectral-density grid: ω_c ± 20κ for the cavity features merged with
/// ω_a ± 3κ_a for the plasmon background, 4001 points in total.
pub fn default_ldos_grid(p: &SystemParams) -> Vec<f64> {
    let wc = p.photon.omega_c;
    let k = p.kappa();
    let wa = p.plasmon.omega_a;
    let ka = p.kappa_a();
    let cavity = linspace((wc - 20.0 * k).max(1e-6), wc + 20.0 * k, 2001);
    let plasmon = linspace((wa - 3.0 * ka).max(1e-6), wa + 3.0 * ka, 2000);
    merge_grids(&cavity, &plasmon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(ComplexSpectrum::from_real(vec![0.0], vec![1.0]).is_err());
        assert!(ComplexSpectrum::from_real(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(ComplexSpectrum::from_real(vec![1.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(ComplexSpectrum::from_real(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(ComplexSpectrum::from_real(vec![0.0, 1.0], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn grids() {
        let g = linspace(1.0, 2.0, 11);
        assert_eq!(g.len(), 11);
        assert_eq!(g[10], 2.0);
        let l = logspace(1e3, 1e5, 3);
        assert!((l[1] - 1e4).abs() < 1e-8);
        let m = merge_grids(&[0.0, 1.0, 2.0], &[1.0, 1.5]);
        assert_eq!(m, vec![0.0, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn default_grid_is_monotone() {
        let p = crate::params::fixtures::fig2();
        let g = default_ldos_grid(&p);
        assert!(check_grid(&g).is_ok());
        assert!(g.len() > 3900);
    }
}
