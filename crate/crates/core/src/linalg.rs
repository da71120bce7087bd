//! Small dense complex linear algebra: eigenpairs via complex Schur form,
//! conditioning, and solves.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectrum::C64;

pub type CMatrix = DMatrix<C64>;

/// Eigenvalues and right eigenvectors (columns, unit 2-norm) of a square matrix.
///
/// Uses the complex Schur form A = Q T Q† and back-substitution on T. Returns
/// `DefectiveMatrix` when two diagonal entries of T are too close for the
/// back-substitution to be meaningful.
pub fn eig(a: &CMatrix) -> Result<(Vec<C64>, CMatrix)> {
    let n = a.nrows();
    let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
    let schur = a
        .clone()
        .try_schur(1e-15 * scale, 10_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let lambda: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let tiny = 1e-13 * scale;

    let mut vecs = CMatrix::zeros(n, n);
    for k in 0..n {
        let mut y = vec![C64::new(0.0, 0.0); n];
        y[k] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for m in (j + 1)..=k {
                s += t[(j, m)] * y[m];
            }
            let d = t[(j, j)] - lambda[k];
            if d.norm() < tiny {
                // repeated eigenvalue: fine only if this component decouples
                if s.norm() < tiny {
                    y[j] = C64::new(0.0, 0.0);
                    continue;
                }
                return Err(Error::DefectiveMatrix { condition: f64::INFINITY });
            }
            y[j] = -s / d;
        }
        let mut x = CMatrix::zeros(n, 1);
        for i in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for (m, ym) in y.iter().enumerate().take(k + 1) {
                s += q[(i, m)] * ym;
            }
            x[(i, 0)] = s;
        }
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            vecs[(i, k)] = x[(i, 0)] / norm;
        }
    }
    Ok((lambda, vecs))
}

/// Eigenvalues only (diagonal of the complex Schur form).
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
    let t = a
        .clone()
        .try_schur(1e-15 * scale, 10_000)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?
        .unpack()
        .1;
    Ok((0..a.nrows()).map(|i| t[(i, i)]).collect())
}

/// Left eigenpairs: rows `v_i` with `v_i A = λ_i v_i`, unit 2-norm.
pub fn left_eig(a: &CMatrix) -> Result<(Vec<C64>, CMatrix)> {
    let (lambda, right_of_transpose) = eig(&a.transpose())?;
    Ok((lambda, right_of_transpose.transpose()))
}

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &CMatrix) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Adjugate (classical adjoint) of a 3×3 matrix, adj(A) = det(A)·A⁻¹.
pub fn adjugate3(a: &CMatrix) -> CMatrix {
    assert_eq!((a.nrows(), a.ncols()), (3, 3));
    let m = |i: usize, j: usize| a[(i, j)];
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0);
    CMatrix::from_row_slice(
        3,
        3,
        &[
            cof(1, 2, 1, 2),
            -cof(0, 2, 1, 2),
            cof(0, 1, 1, 2),
            -cof(1, 2, 0, 2),
            cof(0, 2, 0, 2),
            -cof(0, 1, 0, 2),
            cof(1, 2, 0, 1),
            -cof(0, 2, 0, 1),
            cof(0, 1, 0, 1),
        ],
    )
}

pub fn det3(a: &CMatrix) -> C64 {
    let m = |i: usize, j: usize| a[(i, j)];
    m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
        + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
}

/// Solve A x = b by LU with partial pivoting; `None` if A is numerically singular.
pub fn solve(a: &CMatrix, b: &[C64]) -> Option<Vec<C64>> {
    let n = a.nrows();
    let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let lu = a.clone().lu();
    let u_min = (0..n).map(|i| lu.u()[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if !(u_min > 1e-15 * scale) {
        return None;
    }
    let rhs = nalgebra::DVector::from_column_slice(b);
    lu.solve(&rhs).map(|x| x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn diagonal_eigenvalues() {
        let a = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, -0.1), c(2.0, -0.5), c(3.0, 0.0)]));
        let (l, _) = eig(&a).unwrap();
        let mut re: Vec<f64> = l.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert_eq!(re, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn left_and_right_eigenvectors() {
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[c(1.0, -0.3), c(0.2, 0.1), c(0.0, 0.5), c(-0.4, 0.0), c(2.0, -0.01), c(0.3, 0.0), c(0.1, 0.1), c(0.0, -0.2), c(0.5, -1.0)],
        );
        let (l, r) = eig(&a).unwrap();
        let (ll, v) = left_eig(&a).unwrap();
        for k in 0..3 {
            let res = &a * r.column(k) - r.column(k) * l[k];
            assert!(res.norm() < 1e-12);
            let vk = v.row(k).into_owned();
            let res = &vk * &a - &vk * ll[k];
            assert!(res.norm() < 1e-12);
        }
    }

    #[test]
    fn jordan_block_is_defective() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1.0, -0.5), c(1.0, 0.0), c(0.0, 0.0), c(1.0, -0.5)]);
        assert!(matches!(eig(&a), Err(Error::DefectiveMatrix { .. })));
    }

    #[test]
    fn adjugate_identity() {
        let a = CMatrix::from_row_slice(
            3,
            3,
            &[c(1.0, 2.0), c(0.5, 0.0), c(0.0, -1.0), c(2.0, 0.0), c(1.0, 1.0), c(0.3, 0.0), c(0.0, 0.2), c(-1.0, 0.0), c(0.7, 0.7)],
        );
        let prod = &a * adjugate3(&a);
        let d = det3(&a);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { d } else { c(0.0, 0.0) };
                assert!((prod[(i, j)] - expect).norm() < 1e-13);
            }
        }
        let lu_det = a.clone().lu().determinant();
        assert!((lu_det - d).norm() < 1e-13);
    }

    #[test]
    fn solve_and_singular() {
        let a = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(3.0, 0.0)]);
        let x = solve(&a, &[c(3.0, 0.0), c(5.0, 0.0)]).unwrap();
        assert!((x[0] - c(0.8, 0.0)).norm() < 1e-14 && (x[1] - c(1.4, 0.0)).norm() < 1e-14);
        let s = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(solve(&s, &[c(1.0, 0.0), c(1.0, 0.0)]).is_none());
    }

    #[test]
    fn condition_of_identity() {
        assert!((condition_number(&CMatrix::identity(3, 3)) - 1.0).abs() < 1e-14);
    }
}
