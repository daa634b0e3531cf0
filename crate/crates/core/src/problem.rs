//! Problem model for the residual method
//!
//! An instance is the constrained problem
//!
//! ```text
//!   minimize  R_p(x) = Σ |x_λ|^p   subject to  ‖Fx − y‖ ≤ β
//! ```
//!
//! over a finite index set. The discrepancy is always the plain Euclidean
//! norm of the residual; a squared radius must be converted with a square
//! root before it reaches this module.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::solvers::{residual_method_solve, SolverOptions};

/// Largest row or column count accepted for a dense operator.
pub const MAX_DIMENSION: usize = 2048;

/// Returns `Err` unless `p` lies in `(0, 2]`.
pub fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 0.0 && p <= 2.0 {
        Ok(())
    } else {
        Err(Error::UnsupportedExponent(p))
    }
}

/// A finite-dimensional instance of the constrained problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    operator: DMatrix<f64>,
    data: DVector<f64>,
    beta: f64,
    p: f64,
}

impl Problem {
    pub fn new(operator: DMatrix<f64>, data: DVector<f64>, beta: f64, p: f64) -> Result<Self> {
        let (m, n) = operator.shape();
        if m == 0 || n == 0 {
            return Err(invalid("operator must have at least one row and one column"));
        }
        if m > MAX_DIMENSION || n > MAX_DIMENSION {
            return Err(Error::SizeLimit(alloc::format!(
                "operator is {m}x{n}, dense cap is {MAX_DIMENSION}"
            )));
        }
        if operator.iter().any(|v| !v.is_finite()) {
            return Err(invalid("operator has non-finite entries"));
        }
        if data.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("data has non-finite entries"));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(invalid("beta must be finite and nonnegative"));
        }
        check_exponent(p)?;
        Ok(Self { operator, data, beta, p })
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Number of rows of the operator.
    pub fn rows(&self) -> usize {
        self.operator.nrows()
    }

    /// Number of unknowns.
    pub fn cols(&self) -> usize {
        self.operator.ncols()
    }

    /// Same operator, data and exponent with a different radius.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.operator.clone(), self.data.clone(), beta, self.p)
    }

    pub fn with_exponent(&self, p: f64) -> Result<Self> {
        Self::new(self.operator.clone(), self.data.clone(), self.beta, p)
    }

    pub fn with_data(&self, data: DVector<f64>) -> Result<Self> {
        Self::new(self.operator.clone(), data, self.beta, self.p)
    }

    pub fn with_operator(&self, operator: DMatrix<f64>) -> Result<Self> {
        Self::new(operator, self.data.clone(), self.beta, self.p)
    }

    /// Default feasibility slack, `1e-9 · max(1, ‖y‖)`.
    pub fn feasibility_tolerance(&self) -> f64 {
        1e-9 * self.data.norm().max(1.0)
    }

    /// `‖Fx − y‖` for a vector of matching length.
    pub fn discrepancy(&self, x: &DVector<f64>) -> Result<f64> {
        discrepancy(self, x)
    }

    pub fn objective(&self, x: &DVector<f64>) -> Result<f64> {
        regularizer_value(x.as_slice(), self.p)
    }
}

/// Outcome classification of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    /// The minimizer sits on the boundary `‖Fx − y‖ = β`.
    ConstraintActive,
    /// The unconstrained minimizer of the regularizer is feasible.
    InteriorMinimum,
    /// `‖y‖ ≤ β`, so `x = 0` is feasible and optimal.
    ZeroFeasible,
    /// No point satisfies the discrepancy bound.
    Infeasible,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::ConstraintActive => "ConstraintActive",
            Status::InteriorMinimum => "InteriorMinimum",
            Status::ZeroFeasible => "ZeroFeasible",
            Status::Infeasible => "Infeasible",
        }
    }
}

impl core::fmt::Display for Status {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Result of a solve: the iterate together with the quantities that witness
/// its feasibility and optimality.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: DVector<f64>,
    pub objective: f64,
    pub discrepancy: f64,
    /// Tikhonov parameter at which the Morozov match was found, if any.
    pub alpha: Option<f64>,
    pub status: Status,
    pub iterations: usize,
    pub restarts_used: usize,
}

impl SolveReport {
    /// Builds a report for `x`, recomputing objective and discrepancy.
    pub fn evaluate(
        problem: &Problem,
        x: DVector<f64>,
        alpha: Option<f64>,
        status: Status,
        iterations: usize,
    ) -> Self {
        let objective = lp_power_sum(x.as_slice(), problem.p());
        let discrepancy = residual_norm(problem.operator(), problem.data(), &x);
        Self { x, objective, discrepancy, alpha, status, iterations, restarts_used: 0 }
    }

    pub fn infeasible(problem: &Problem, x: DVector<f64>, iterations: usize) -> Self {
        Self::evaluate(problem, x, None, Status::Infeasible, iterations)
    }

    pub fn is_feasible(&self) -> bool {
        self.status != Status::Infeasible
    }
}

pub(crate) fn lp_power_sum(x: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        x.iter().map(|v| v * v).sum()
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum()
    }
}

pub(crate) fn residual_norm(f: &DMatrix<f64>, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
    (f * x - y).norm()
}

/// `R_p(x) = Σ |x_λ|^p`.
pub fn regularizer_value(x: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("vector has non-finite entries"));
    }
    Ok(lp_power_sum(x, p))
}

/// `‖x‖_p = R_p(x)^{1/p}`; a quasi-norm for `p < 1`.
pub fn lp_norm(x: &[f64], p: f64) -> Result<f64> {
    Ok(regularizer_value(x, p)?.powf(1.0 / p))
}

/// Euclidean norm of `Fx − y`.
pub fn discrepancy(problem: &Problem, x: &DVector<f64>) -> Result<f64> {
    if x.len() != problem.cols() {
        return Err(Error::DimensionMismatch { expected: problem.cols(), found: x.len() });
    }
    Ok(residual_norm(problem.operator(), problem.data(), x))
}

/// Membership in the feasible set with slack `tol`. A vector of the wrong
/// length is never feasible.
pub fn feasible(problem: &Problem, x: &DVector<f64>, tol: f64) -> bool {
    match discrepancy(problem, x) {
        Ok(d) => d <= problem.beta() + tol,
        Err(_) => false,
    }
}

/// One sample of the value function.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePoint {
    pub beta: f64,
    /// Infimum of `R_p` over the feasible set; `+∞` for an infeasible cell.
    pub value: f64,
    pub status: Status,
}

/// Evaluates `v(F, y, β)` on an ascending grid of radii. The `beta` stored in
/// `problem` is ignored.
pub fn value_function(
    problem: &Problem,
    beta_grid: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<ValuePoint>> {
    if beta_grid.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(invalid("beta grid entries must be finite and nonnegative"));
    }
    if beta_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("beta grid must be ascending"));
    }
    let points = beta_grid
        .iter()
        .map(|&beta| {
            let report = problem
                .with_beta(beta)
                .and_then(|instance| residual_method_solve(&instance, opts));
            match report {
                Ok(r) if r.is_feasible() => ValuePoint { beta, value: r.objective, status: r.status },
                Ok(r) => ValuePoint { beta, value: f64::INFINITY, status: r.status },
                Err(_) => ValuePoint { beta, value: f64::INFINITY, status: Status::Infeasible },
            }
        })
        .collect();
    Ok(points)
}
