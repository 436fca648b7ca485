//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor applied when taking square roots of
/// near-singular symmetric matrices.
pub const EIGEN_FLOOR: f64 = 1e-14;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Square root of a symmetric PSD matrix. `floored` reports whether any
/// eigenvalue was lifted to the floor.
#[derive(Debug, Clone)]
pub struct SymmetricSqrt {
    pub root: DMatrix<f64>,
    pub floored: bool,
}

pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<SymmetricSqrt> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let max = eig.eigenvalues.max();
    if !max.is_finite() || max < 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "largest eigenvalue {max:e}"
        )));
    }
    if max == 0.0 {
        return Ok(SymmetricSqrt {
            root: DMatrix::zeros(m.nrows(), m.ncols()),
            floored: false,
        });
    }
    // Negative eigenvalues beyond rounding noise mean the input is not PSD.
    if eig.eigenvalues.min() < -1e-10 * max {
        return Err(Error::NotPositiveDefinite(format!(
            "eigenvalue {:e}",
            eig.eigenvalues.min()
        )));
    }
    let floor = EIGEN_FLOOR * max;
    let mut floored = false;
    let roots = eig.eigenvalues.map(|l| {
        if l < floor {
            floored = true;
            floor.sqrt()
        } else {
            l.sqrt()
        }
    });
    let v = &eig.eigenvectors;
    let root = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok(SymmetricSqrt {
        root: symmetrize(&root),
        floored,
    })
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// Spectral condition number of a symmetric positive definite matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let ev = SymmetricEigen::new(symmetrize(m)).eigenvalues;
    let lo = ev.min();
    let hi = ev.max();
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("cholesky failed".into()))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Largest real part among the eigenvalues of a general square matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves `A S + S Aᵀ + Q = 0` for symmetric `S` through the Kronecker
/// form. Intended for the small systems used here (n ≤ 4).
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(a) + a.kronecker(&eye);
    // Column-major vec(Q) matches nalgebra storage order.
    let rhs = DVector::from_iterator(n * n, q.iter().map(|x| -x));
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidParameter("singular Lyapunov operator".into()))?;
    let s = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok(symmetrize(&s))
}

/// `tr(AB)` without forming the product.
pub fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m - m.transpose()).amax() <= rel_tol * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let r = sym_sqrt(&m).unwrap();
        assert!(!r.floored);
        assert_relative_eq!(&r.root * &r.root, m, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_reports_floor() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let r = sym_sqrt(&m).unwrap();
        assert!(r.floored);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(sym_sqrt(&m).is_err());
    }

    #[test]
    fn lyapunov_residual() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -0.5, -3.0]);
        let q = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0]);
        let s = solve_lyapunov(&a, &q).unwrap();
        let res = &a * &s + &s * a.transpose() + &q;
        assert!(res.amax() < 1e-12);
    }

    #[test]
    fn trace_product_matches() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.25]);
        assert_relative_eq!(trace_of_product(&a, &b), (&a * &b).trace());
    }
}
