//! Solvers for the constrained `ℓ^p` problem.
//!
//! Convex exponents (`p ≥ 1`) follow the Tikhonov path: the penalty weight
//! `α` is searched until the Tikhonov minimizer has discrepancy `β`
//! (Morozov's discrepancy principle). Non-convex exponents run the same
//! search from several starting points and keep the best feasible result.

mod morozov;
mod nonconvex;
mod prox;
mod tikhonov;

pub use morozov::{residual_method_solve, residual_method_solve_traced, MorozovStep};
pub use nonconvex::nonconvex_solve;
pub use prox::{prox_lp, prox_scalar};
pub use tikhonov::{tikhonov_min, TikhonovReport};

use crate::error::{invalid, Result};

/// Iteration budgets and tolerances for the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_outer_bisections: usize,
    pub max_inner_iterations: usize,
    /// Relative change of the iterate below which the inner loop stops.
    pub inner_tolerance: f64,
    /// Relative (to `β`) tolerance on `|‖Fx − y‖ − β|` for the Morozov match.
    pub discrepancy_match_tolerance: f64,
    /// Number of starting points for `p < 1`.
    pub restarts: usize,
    pub rng_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_outer_bisections: 60,
            max_inner_iterations: 5000,
            inner_tolerance: 1e-10,
            discrepancy_match_tolerance: 1e-6,
            restarts: 16,
            rng_seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_bisections == 0 || self.max_inner_iterations == 0 || self.restarts == 0 {
            return Err(invalid("solver iteration counts must be at least 1"));
        }
        let positive = |t: f64| t.is_finite() && t > 0.0;
        if !positive(self.inner_tolerance) || !positive(self.discrepancy_match_tolerance) {
            return Err(invalid("solver tolerances must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_options_are_valid() {
        let o = SolverOptions::default();
        assert!(o.validate().is_ok());
        assert_eq!(o.max_outer_bisections, 60);
        assert_eq!(o.restarts, 16);
    }

    #[test]
    fn invalid_options_rejected() {
        let o = SolverOptions { restarts: 0, ..SolverOptions::default() };
        assert!(o.validate().is_err());
        let o = SolverOptions { inner_tolerance: 0.0, ..SolverOptions::default() };
        assert!(o.validate().is_err());
    }
}
