//! Dense symmetric positive-definite factorization and small vector kernels.
//!
//! The Laplacian `A C Aᵀ` is SPD for every strictly positive point, but it
//! degenerates as the point approaches the boundary of the orthant. The
//! factorization therefore retries once with a tiny diagonal shift before
//! giving up.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative asymmetry accepted by [`spd_factorize`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// A pivot below this fraction of the largest diagonal entry triggers regularization.
pub const PIVOT_TOLERANCE: f64 = 1e-14;
/// Diagonal shift (relative to the largest diagonal entry) used on retry.
pub const REGULARIZATION: f64 = 1e-12;

/// Lower-triangular Cholesky factor `G` with `G Gᵀ = M + δ I`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactorization {
    pub factor: DMatrix<f64>,
    pub dimension: usize,
    /// `δ`, zero when the first attempt succeeded.
    pub regularization_applied: f64,
}

impl SpdFactorization {
    /// Rebuilds `G Gᵀ` (which equals the input plus the regularization shift).
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.factor * self.factor.transpose()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        spd_solve(self, rhs)
    }
}

/// Cholesky factorization of a symmetric matrix, with one regularized retry.
pub fn spd_factorize(m: &DMatrix<f64>) -> Result<SpdFactorization> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "spd_factorize (square matrix)",
            expected: n,
            found: m.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spd_factorize input"));
    }

    let scale = m.amax();
    let mut max_asymmetry = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asymmetry = max_asymmetry.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if max_asymmetry > SYMMETRY_TOLERANCE * scale {
        return Err(Error::AsymmetricInput { max_asymmetry });
    }

    let max_diag = (0..n).map(|i| m[(i, i)]).fold(0.0f64, f64::max);
    let threshold = PIVOT_TOLERANCE * max_diag;

    match cholesky(m, 0.0, threshold) {
        Ok(factor) => Ok(SpdFactorization { factor, dimension: n, regularization_applied: 0.0 }),
        Err(_) => {
            let delta = REGULARIZATION * max_diag;
            if delta <= 0.0 {
                return Err(Error::NotPositiveDefinite { pivot: 0 });
            }
            let factor = cholesky(m, delta, threshold).map_err(|pivot| Error::NotPositiveDefinite { pivot })?;
            Ok(SpdFactorization { factor, dimension: n, regularization_applied: delta })
        }
    }
}

// Reads only the lower triangle of `m`. Returns the failing pivot index on error.
fn cholesky(m: &DMatrix<f64>, shift: f64, threshold: f64) -> std::result::Result<DMatrix<f64>, usize> {
    let n = m.nrows();
    let mut g = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)] + shift;
        for k in 0..j {
            d -= g[(j, k)] * g[(j, k)];
        }
        if !(d > threshold) {
            return Err(j);
        }
        let pivot = d.sqrt();
        g[(j, j)] = pivot;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= g[(i, k)] * g[(j, k)];
            }
            g[(i, j)] = s / pivot;
        }
    }
    Ok(g)
}

/// Solves `G Gᵀ p = rhs` by forward and back substitution.
pub fn spd_solve(f: &SpdFactorization, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let n = f.dimension;
    if rhs.len() != n {
        return Err(Error::DimensionMismatch { context: "spd_solve right-hand side", expected: n, found: rhs.len() });
    }
    let g = &f.factor;
    let mut z = rhs.clone();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= g[(i, k)] * z[k];
        }
        z[i] = s / g[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= g[(k, i)] * z[k];
        }
        z[i] = s / g[(i, i)];
    }
    Ok(z)
}

/// `A diag(d) Aᵀ`, symmetrized.
pub fn weighted_gram(a: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    let mut out = DMatrix::<f64>::zeros(rows, rows);
    for i in 0..rows {
        for k in i..rows {
            let mut s = 0.0;
            for j in 0..cols {
                s += a[(i, j)] * d[j] * a[(k, j)];
            }
            out[(i, k)] = s;
            out[(k, i)] = s;
        }
    }
    out
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_factor_is_identity() {
        let f = spd_factorize(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(f.factor, DMatrix::identity(3, 3));
        assert_eq!(f.regularization_applied, 0.0);
    }

    #[test]
    fn two_by_two_hand_cholesky() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let f = spd_factorize(&m).unwrap();
        assert_relative_eq!(f.factor[(0, 0)], 2.0, epsilon = 1e-15);
        assert_relative_eq!(f.factor[(1, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(f.factor[(1, 1)], 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(f.factor[(0, 1)], 0.0);
    }

    #[test]
    fn indefinite_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(spd_factorize(&m), Err(Error::NotPositiveDefinite { pivot: 1 })));
    }

    #[test]
    fn asymmetric_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 2.0]);
        assert!(matches!(spd_factorize(&m), Err(Error::AsymmetricInput { .. })));
    }

    #[test]
    fn semidefinite_gets_regularized() {
        // rank one: [[1,1],[1,1]]
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = spd_factorize(&m).unwrap();
        assert_relative_eq!(f.regularization_applied, 1e-12);
        let mut shifted = m.clone();
        shifted[(0, 0)] += 1e-12;
        shifted[(1, 1)] += 1e-12;
        assert!((f.reconstruct() - shifted).amax() <= 1e-10);
    }

    #[test]
    fn diagonal_and_identity_solves() {
        let f = spd_factorize(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(spd_solve(&f, &DVector::from_vec(vec![3.0, 5.0])).unwrap().as_slice(), &[3.0, 5.0]);

        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let f = spd_factorize(&d).unwrap();
        let p = spd_solve(&f, &DVector::from_vec(vec![2.0, 4.0])).unwrap();
        assert_relative_eq!(p[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(p[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn solve_dimension_mismatch() {
        let f = spd_factorize(&DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            spd_solve(&f, &DVector::zeros(3)),
            Err(Error::DimensionMismatch { expected: 2, found: 3, .. })
        ));
    }

    #[test]
    fn weighted_gram_matches_product() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, -1.0, 1.0, 0.0]);
        let d = DVector::from_vec(vec![0.5, 2.0, 3.0]);
        let direct = &a * DMatrix::from_diagonal(&d) * a.transpose();
        assert!((weighted_gram(&a, &d) - direct).amax() < 1e-15);
    }
}
