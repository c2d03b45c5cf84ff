//! Small dense linear-algebra helpers shared by every estimator.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_REPAIR_TOL: f64 = 1e-10;
const JITTER_START: f64 = 1e-12;
const JITTER_STOP: f64 = 1e-6;

pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.tr_mul(x)
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Smallest eigenvalue of a symmetric matrix.
///
/// Tiny negative values produced by round-off (within `1e-10 * ||m||_op`) are
/// clamped to zero.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    let scale = m.amax().max(1.0);
    let asym = max_asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Asymmetric(asym));
    }
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let op_norm = eig.amax();
    let lo = eig.min();
    if lo < 0.0 && lo > -PSD_REPAIR_TOL * op_norm {
        Ok(0.0)
    } else {
        Ok(lo)
    }
}

/// Solves `h x = rhs` for a symmetric positive (semi)definite `h`.
///
/// Tries a plain Cholesky factorization, then escalates a diagonal jitter by
/// factors of ten from `1e-12 * tr(h)/d` up to `1e-6 * tr(h)/d`.
pub fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = Cholesky::new(h.clone()) {
        return Ok(ch.solve(rhs));
    }
    let d = h.nrows();
    let base = (h.trace() / d as f64).abs().max(f64::MIN_POSITIVE);
    let mut rel = JITTER_START;
    while rel <= JITTER_STOP * (1.0 + 1e-9) {
        let mut jittered = h.clone();
        for i in 0..d {
            jittered[(i, i)] += rel * base;
        }
        if let Some(ch) = Cholesky::new(jittered) {
            return Ok(ch.solve(rhs));
        }
        rel *= 10.0;
    }
    Err(Error::NotPositiveDefinite)
}

/// Minimum-norm least-squares solution of `a x ≈ b`.
pub fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DVector::zeros(a.ncols());
    }
    svd.solve(b, RANK_TOL * smax)
        .expect("SVD computed with both factors")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_eig_identity_and_diag() {
        assert!((min_eigenvalue(&DMatrix::identity(3, 3)).unwrap() - 1.0).abs() < 1e-14);
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert!((min_eigenvalue(&m).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn min_eig_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(min_eigenvalue(&m), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn min_eig_repairs_roundoff() {
        // rank-one Gram: exact min eigenvalue is 0
        let v = DVector::from_vec(vec![0.3, 0.1, 0.7]);
        let m = &v * v.transpose();
        let lo = min_eigenvalue(&m).unwrap();
        assert!(lo >= 0.0 && lo < 1e-14);
    }

    #[test]
    fn spd_solve_with_jitter_on_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let x = solve_spd(&m, &DVector::from_vec(vec![1.0, 1.0]));
        // either jitter rescues it or we get the explicit failure; never a panic
        match x {
            Ok(x) => assert!(x.iter().all(|v| v.is_finite())),
            Err(e) => assert!(e.is_solver_failure()),
        }
    }

    #[test]
    fn spd_solve_fails_on_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            solve_spd(&m, &DVector::from_vec(vec![1.0, 1.0])),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn min_norm_on_rank_deficient() {
        // duplicated column: minimum-norm solution splits the weight evenly
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let b = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let x = min_norm_lstsq(&a, &b);
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 1.0).abs() < 1e-10);
    }
}
