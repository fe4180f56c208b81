//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;

/// Spectral norm `sqrt(λ_max(AᵀA))`. Empty matrices have norm zero.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = a.transpose() * a;
    let eig = gram.symmetric_eigenvalues();
    eig.max().max(0.0).sqrt()
}

/// Smallest eigenvalue of the symmetric part `(A + Aᵀ)/2`.
pub fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return f64::INFINITY;
    }
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// All eigenvalues have strictly negative real part.
pub fn is_hurwitz(q: &DMatrix<f64>) -> bool {
    if q.is_empty() {
        return true;
    }
    q.clone()
        .complex_eigenvalues()
        .iter()
        .all(|z| z.re < 0.0 && z.re.is_finite())
}

/// Solves `QᵀX + XQ = -I` through the Kronecker form. Returns `None` when the
/// linear system is singular.
pub fn lyapunov_identity(q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let l = q.nrows();
    let n = l * l;
    // vec(QᵀX) = (I ⊗ Qᵀ) vec(X), vec(XQ) = (Qᵀ ⊗ I) vec(X), column-major vec
    let qt = q.transpose();
    let eye = DMatrix::<f64>::identity(l, l);
    let op = eye.kronecker(&qt) + qt.kronecker(&eye);
    let rhs = -DMatrix::<f64>::identity(l, l);
    let rhs = nalgebra::DVector::from_column_slice(rhs.as_slice());
    let sol = op.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(l, l, sol.as_slice());
    debug_assert_eq!(x.len(), n);
    // symmetrize away rounding
    Some((&x + x.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::dvector![2.0, -3.0]);
        assert!((spectral_norm(&a) - 3.0).abs() < 1e-12);
        assert!((min_symmetric_eigenvalue(&a) + 3.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&DMatrix::zeros(0, 0)), 0.0);
    }

    #[test]
    fn lyapunov_residual() {
        let q = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, -0.5, -1.5, 0.3, 0.0, 0.1, -0.7]);
        assert!(is_hurwitz(&q));
        let x = lyapunov_identity(&q).unwrap();
        let residual = q.transpose() * &x + &x * &q + DMatrix::identity(3, 3);
        assert!(residual.norm() < 1e-12);
        assert!(x.clone().symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn hurwitz_detection() {
        let unstable = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(!is_hurwitz(&unstable));
        assert!(is_hurwitz(&(-DMatrix::<f64>::identity(2, 2))));
    }
}
