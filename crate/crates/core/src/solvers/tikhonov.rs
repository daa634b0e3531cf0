//! Penalized (Tikhonov) problem `‖Fx − y‖² + α R_p(x)`.

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use super::prox::prox_scalar;
use super::SolverOptions;
use crate::error::{invalid, Error, Result};
use crate::linalg::gram_spectral_radius;
use crate::problem::{check_exponent, lp_power_sum};

/// Result of a Tikhonov minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct TikhonovReport {
    pub x: DVector<f64>,
    pub alpha: f64,
    /// `‖Fx − y‖² + α R_p(x)`.
    pub functional: f64,
    /// `R_p(x)`.
    pub objective: f64,
    /// `‖Fx − y‖`.
    pub discrepancy: f64,
    pub iterations: usize,
    /// False when the iteration cap was reached before the relative change
    /// dropped below the inner tolerance; `x` is then the last iterate.
    pub converged: bool,
}

/// Minimizes the Tikhonov functional from `x = 0`.
///
/// For `p ≥ 1` this is accelerated proximal gradient with adaptive restart and
/// converges to the global minimum. For `p < 1` it is plain proximal descent
/// and only a stationary point is returned.
pub fn tikhonov_min(
    f: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: f64,
    p: f64,
    opts: &SolverOptions,
) -> Result<TikhonovReport> {
    check_exponent(p)?;
    opts.validate()?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(invalid("alpha must be positive and finite"));
    }
    if y.len() != f.nrows() {
        return Err(Error::DimensionMismatch { expected: f.nrows(), found: y.len() });
    }
    let inner = InnerSolver::new(f, y, p, opts);
    let start = DVector::zeros(f.ncols());
    let run = inner.solve(alpha, &start);
    Ok(inner.report(alpha, run))
}

pub(crate) struct InnerRun {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Proximal-gradient engine shared by the Morozov search.
pub(crate) struct InnerSolver<'a> {
    f: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    p: f64,
    /// Lipschitz constant of the gradient of the misfit term, `2 λ_max(FᵀF)`.
    lipschitz: f64,
    max_iterations: usize,
    tolerance: f64,
    accelerated: bool,
    /// Coordinates allowed to be nonzero; `None` means all.
    support: Option<alloc::vec::Vec<bool>>,
}

impl<'a> InnerSolver<'a> {
    pub fn new(f: &'a DMatrix<f64>, y: &'a DVector<f64>, p: f64, opts: &SolverOptions) -> Self {
        // Power iteration converges from below; the margin keeps 1/L a valid step.
        let lipschitz = 2.0 * gram_spectral_radius(f) * (1.0 + 1e-6) + f64::MIN_POSITIVE;
        Self {
            f,
            y,
            p,
            lipschitz,
            max_iterations: opts.max_inner_iterations,
            tolerance: opts.inner_tolerance,
            accelerated: p >= 1.0,
            support: None,
        }
    }

    pub fn restricted_to(mut self, support: alloc::vec::Vec<bool>) -> Self {
        self.support = Some(support);
        self
    }

    pub fn report(&self, alpha: f64, run: InnerRun) -> TikhonovReport {
        let discrepancy = (self.f * &run.x - self.y).norm();
        let objective = lp_power_sum(run.x.as_slice(), self.p);
        TikhonovReport {
            functional: discrepancy * discrepancy + alpha * objective,
            x: run.x,
            alpha,
            objective,
            discrepancy,
            iterations: run.iterations,
            converged: run.converged,
        }
    }

    pub fn discrepancy(&self, x: &DVector<f64>) -> f64 {
        (self.f * x - self.y).norm()
    }

    fn prox_into(&self, v: &DVector<f64>, t: f64, out: &mut DVector<f64>) {
        for i in 0..v.len() {
            let allowed = self.support.as_ref().is_none_or(|s| s[i]);
            out[i] = if allowed { prox_scalar(v[i], t, self.p) } else { 0.0 };
        }
    }

    pub fn solve(&self, alpha: f64, start: &DVector<f64>) -> InnerRun {
        let (m, n) = self.f.shape();
        let step = 1.0 / self.lipschitz;
        let threshold = alpha * step;

        let mut x = start.clone();
        if let Some(s) = &self.support {
            for i in 0..n {
                if !s[i] {
                    x[i] = 0.0;
                }
            }
        }
        let mut x_prev = x.clone();
        let mut z = x.clone();
        let mut residual = DVector::zeros(m);
        let mut grad = DVector::zeros(n);
        let mut trial = DVector::zeros(n);
        let mut momentum = 1.0_f64;

        for iter in 1..=self.max_iterations {
            // gradient of ‖Fz − y‖² at the extrapolated point
            residual.copy_from(self.y);
            residual.gemv(1.0, self.f, &z, -1.0);
            grad.gemv_tr(2.0, self.f, &residual, 0.0);
            trial.copy_from(&z);
            trial.axpy(-step, &grad, 1.0);
            x_prev.copy_from(&x);
            self.prox_into(&trial, threshold, &mut x);

            let mut change = 0.0;
            let mut size = 0.0;
            let mut restart_test = 0.0;
            for i in 0..n {
                let d = x[i] - x_prev[i];
                change += d * d;
                size += x[i] * x[i];
                // gradient-mapping restart test: (z − x)·(x − x_prev) > 0
                restart_test += (z[i] - x[i]) * d;
            }
            if change <= self.tolerance * self.tolerance * size.max(f64::MIN_POSITIVE) {
                return InnerRun { x, iterations: iter, converged: true };
            }

            if self.accelerated {
                if restart_test > 0.0 {
                    momentum = 1.0;
                    z.copy_from(&x);
                } else {
                    let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
                    let weight = (momentum - 1.0) / next;
                    momentum = next;
                    for i in 0..n {
                        z[i] = x[i] + weight * (x[i] - x_prev[i]);
                    }
                }
            } else {
                z.copy_from(&x);
            }
        }
        InnerRun { x, iterations: self.max_iterations, converged: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn scalar(y: f64) -> (DMatrix<f64>, DVector<f64>) {
        (DMatrix::identity(1, 1), DVector::from_vec(vec![y]))
    }

    #[test]
    fn quadratic_closed_form() {
        let (f, y) = scalar(2.0);
        let r = tikhonov_min(&f, &y, 1.0, 2.0, &SolverOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-9);
        assert!(r.converged);
    }

    #[test]
    fn soft_threshold_against_grid() {
        // (x − 2)² + 2|x| minimized by grid scan.
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=800_000 {
            let x = -4.0 + 1e-5 * i as f64;
            let v = (x - 2.0) * (x - 2.0) + 2.0 * x.abs();
            if v < best.0 {
                best = (v, x);
            }
        }
        assert!((best.1 - 1.0).abs() < 1e-4);
        let (f, y) = scalar(2.0);
        let r = tikhonov_min(&f, &y, 2.0, 1.0, &SolverOptions::default()).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn huge_alpha_gives_zero() {
        let f = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.5, -1.0, 0.3, 2.0]);
        let y = DVector::from_vec(vec![1.0, -2.0]);
        for p in [0.5, 1.0, 1.5, 2.0] {
            let r = tikhonov_min(&f, &y, 1e12, p, &SolverOptions::default()).unwrap();
            assert!(r.x.amax() < 1e-9, "p = {p}: {}", r.x);
        }
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        let (f, y) = scalar(1.0);
        assert!(tikhonov_min(&f, &y, 0.0, 1.0, &SolverOptions::default()).is_err());
    }

    #[test]
    fn iteration_cap_is_reported() {
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 0.999, 0.999, 1.0]);
        let y = DVector::from_vec(vec![1.0, -1.0]);
        let opts = SolverOptions { max_inner_iterations: 2, ..SolverOptions::default() };
        let r = tikhonov_min(&f, &y, 1e-6, 1.5, &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
    }
}
