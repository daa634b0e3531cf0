//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Largest eigenvalue of `FᵀF` by power iteration.
pub fn gram_spectral_radius(f: &DMatrix<f64>) -> f64 {
    let n = f.ncols();
    // Deterministic, non-degenerate start vector.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i * 7919 % 13) as f64));
    let norm = v.norm();
    v /= norm;
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let w = f.tr_mul(&(f * &v));
        let next = w.norm();
        if next == 0.0 {
            return 0.0;
        }
        v = w / next;
        let converged = (next - lambda).abs() <= 1e-12 * next;
        lambda = next;
        if converged {
            break;
        }
    }
    lambda
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

/// Smallest singular value of a tall or square matrix (`min(m, n)` values).
pub fn smallest_singular_value(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.min()
}

/// Moore–Penrose pseudo-inverse with relative cutoff `1e-12 · σ_max`.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let cutoff = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.pseudo_inverse(cutoff).unwrap_or_else(|_| DMatrix::zeros(a.ncols(), a.nrows()))
}

/// Minimum-norm least-squares solution of `Fx ≈ y` and its residual norm.
pub fn least_squares(f: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, f64) {
    let x = pseudo_inverse(f) * y;
    let r = (f * &x - y).norm();
    (x, r)
}

/// Orthogonal projection onto the affine set `{x : Fx = b}` (or onto the
/// least-squares solutions when `b` is outside the range of `F`).
#[derive(Debug, Clone)]
pub struct AffineProjector {
    f: DMatrix<f64>,
    pinv: DMatrix<f64>,
    b: DVector<f64>,
}

impl AffineProjector {
    pub fn new(f: &DMatrix<f64>, b: &DVector<f64>) -> Self {
        Self { f: f.clone(), pinv: pseudo_inverse(f), b: b.clone() }
    }

    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        let r = &self.f * z - &self.b;
        z - &self.pinv * r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_matches_svd() {
        let f = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -0.5, 0.3, 2.0, 1.0]);
        let s = spectral_norm(&f);
        assert!((gram_spectral_radius(&f) - s * s).abs() < 1e-9 * s * s);
    }

    #[test]
    fn least_squares_min_norm() {
        let f = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let (x, r) = least_squares(&f, &DVector::from_column_slice(&[2.0]));
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn affine_projection_lands_on_set() {
        let f = DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5]);
        let b = DVector::from_column_slice(&[3.0]);
        let proj = AffineProjector::new(&f, &b);
        let x = proj.project(&DVector::from_column_slice(&[0.3, 0.1, -4.0]));
        assert!(((&f * &x)[0] - 3.0).abs() < 1e-12);
    }
}
