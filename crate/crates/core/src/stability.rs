//! Stability experiments: perturbed data, radius and operator, right
//! continuity of the value function, and a one-dimensional nonlinear example
//! whose solution map jumps.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, precondition, Result};
use crate::linalg::spectral_norm;
use crate::problem::{lp_power_sum, Problem, SolveReport, Status};
use crate::solvers::{residual_method_solve, SolverOptions};

/// One perturbed solve compared against the reference solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRow {
    pub k: usize,
    pub perturbation_size: f64,
    /// `‖x_k − x_ref‖₂`; infinite when the perturbed problem is infeasible.
    pub norm_gap: f64,
    /// `|R_p(x_k) − R_p(x_ref)|`.
    pub r_gap: f64,
    /// `|v_k − v_ref|`.
    pub value_gap: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub reference: SolveReport,
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    /// Row with the largest `k`.
    pub fn finest(&self) -> Option<&StabilityRow> {
        self.rows.iter().max_by_key(|r| r.k)
    }
}

/// `k = 1, 2, 4, …` up to and including `max_k` when it is a power of two.
pub fn geometric_schedule(max_k: usize) -> Vec<usize> {
    core::iter::successors(Some(1usize), |k| k.checked_mul(2)).take_while(|k| *k <= max_k).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPerturbation {
    pub k: usize,
    pub data: DVector<f64>,
    pub beta: f64,
}

fn check_nonincreasing(sizes: &[f64]) -> Result<()> {
    for w in sizes.windows(2) {
        // relative slack so that equal sizes computed with rounding still pass
        if w[1] > w[0] * (1.0 + 1e-12) + 1e-15 {
            return Err(precondition(alloc::format!(
                "perturbation sizes must be nonincreasing along the schedule, found {:e} after {:e}",
                w[1],
                w[0]
            )));
        }
    }
    Ok(())
}

fn compare(reference: &SolveReport, k: usize, size: f64, report: &SolveReport) -> StabilityRow {
    if !report.is_feasible() {
        return StabilityRow {
            k,
            perturbation_size: size,
            norm_gap: f64::INFINITY,
            r_gap: f64::INFINITY,
            value_gap: f64::INFINITY,
            status: report.status,
        };
    }
    let r_gap = (report.objective - reference.objective).abs();
    StabilityRow {
        k,
        perturbation_size: size,
        norm_gap: (&report.x - &reference.x).norm(),
        r_gap,
        // the solver reports a minimizer, so its objective is the value
        value_gap: r_gap,
        status: report.status,
    }
}

fn require_unique(problem: &Problem) -> Result<()> {
    if problem.p() <= 1.0 {
        return Err(precondition("stability experiments need p > 1 for unique minimizers"));
    }
    if problem.beta() <= 0.0 {
        return Err(precondition("stability experiments need beta > 0"));
    }
    Ok(())
}

/// `y_k = y + (scale/k)·d` for `k` in `schedule`, with `d` a seeded unit
/// vector; the radius is left unchanged.
pub fn data_schedule(problem: &Problem, schedule: &[usize], scale: f64, seed: u64) -> Result<Vec<DataPerturbation>> {
    check_scale(schedule, scale)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = loop {
        let d = DVector::from_fn(problem.rows(), |_, _| rng.sample::<f64, _>(StandardNormal));
        if d.norm() > 0.0 {
            break d.normalize();
        }
    };
    Ok(schedule
        .iter()
        .map(|&k| DataPerturbation { k, data: problem.data() + &d * (scale / k as f64), beta: problem.beta() })
        .collect())
}

/// `F_k = F + (scale/k)·E` with `E` a seeded Gaussian matrix of spectral norm 1.
pub fn operator_schedule(
    f: &DMatrix<f64>,
    schedule: &[usize],
    scale: f64,
    seed: u64,
) -> Result<Vec<(usize, DMatrix<f64>)>> {
    check_scale(schedule, scale)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = loop {
        let e = DMatrix::from_fn(f.nrows(), f.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let s = spectral_norm(&e);
        if s > 0.0 {
            break e / s;
        }
    };
    Ok(schedule.iter().map(|&k| (k, f + &e * (scale / k as f64))).collect())
}

fn check_scale(schedule: &[usize], scale: f64) -> Result<()> {
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(invalid("perturbation scale must be finite and nonnegative"));
    }
    if schedule.contains(&0) {
        return Err(invalid("schedule indices must be at least 1"));
    }
    Ok(())
}

/// Solves the reference problem and every `(y_k, β_k)` in the schedule.
///
/// The perturbation size of a cell is `‖y_k − y‖ + |β_k − β|`.
pub fn run_data_stability(
    problem: &Problem,
    schedule: &[DataPerturbation],
    opts: &SolverOptions,
) -> Result<StabilityReport> {
    require_unique(problem)?;
    let sizes: Vec<f64> = schedule
        .iter()
        .map(|c| {
            if c.data.len() != problem.rows() {
                return Err(crate::Error::DimensionMismatch { expected: problem.rows(), found: c.data.len() });
            }
            Ok((&c.data - problem.data()).norm() + (c.beta - problem.beta()).abs())
        })
        .collect::<Result<_>>()?;
    check_nonincreasing(&sizes)?;
    let reference = residual_method_solve(problem, opts)?;
    let mut rows = Vec::with_capacity(schedule.len());
    for (cell, size) in schedule.iter().zip(sizes) {
        let perturbed = Problem::new(problem.operator().clone(), cell.data.clone(), cell.beta, problem.p())?;
        let report = residual_method_solve(&perturbed, opts)?;
        rows.push(compare(&reference, cell.k, size, &report));
    }
    Ok(StabilityReport { reference, rows })
}

/// Solves the reference problem and the same problem with each `F_k`.
///
/// The perturbation size is the spectral norm `‖F_k − F‖`, which must be
/// nonincreasing along the schedule.
pub fn run_operator_stability(
    problem: &Problem,
    schedule: &[(usize, DMatrix<f64>)],
    opts: &SolverOptions,
) -> Result<StabilityReport> {
    require_unique(problem)?;
    let f = problem.operator();
    let sizes: Vec<f64> = schedule
        .iter()
        .map(|(_, fk)| {
            if fk.shape() != f.shape() {
                return Err(invalid("perturbed operator has a different shape"));
            }
            Ok(spectral_norm(&(fk - f)))
        })
        .collect::<Result<_>>()?;
    check_nonincreasing(&sizes)?;
    let reference = residual_method_solve(problem, opts)?;
    let mut rows = Vec::with_capacity(schedule.len());
    for ((k, fk), size) in schedule.iter().zip(sizes) {
        let report = residual_method_solve(&problem.with_operator(fk.clone())?, opts)?;
        rows.push(compare(&reference, *k, size, &report));
    }
    Ok(StabilityReport { reference, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueContinuityReport {
    pub beta: f64,
    pub value: f64,
    /// `(ε, v(β + ε))` in the order of the grid.
    pub shifted: Vec<(f64, f64)>,
    /// `v(β) − v(β + ε_min)`.
    pub sup_gap: f64,
    /// `max_ε v(β + ε) − v(β)`; positive values break monotonicity.
    pub max_increase: f64,
}

/// Evaluates `v(β)` and `v(β + ε)` over a decreasing grid of `ε > 0`.
pub fn check_value_right_continuity(
    f: &DMatrix<f64>,
    y: &DVector<f64>,
    p: f64,
    beta: f64,
    eps_grid: &[f64],
    opts: &SolverOptions,
) -> Result<ValueContinuityReport> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(precondition("beta must be positive"));
    }
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(precondition("epsilon grid must be nonempty and positive"));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(precondition("epsilon grid must be strictly decreasing"));
    }
    let base = Problem::new(f.clone(), y.clone(), beta, p)?;
    let value_at = |problem: &Problem| -> Result<f64> {
        let r = residual_method_solve(problem, opts)?;
        Ok(if r.is_feasible() { r.objective } else { f64::INFINITY })
    };
    let value = value_at(&base)?;
    let mut shifted = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        shifted.push((eps, value_at(&base.with_beta(beta + eps)?)?));
    }
    let last = shifted[shifted.len() - 1].1;
    let sup_gap = if value == last { 0.0 } else { value - last };
    let max_increase = shifted.iter().map(|(_, v)| v - value).fold(f64::NEG_INFINITY, f64::max);
    Ok(ValueContinuityReport { beta, value, shifted, sup_gap, max_increase })
}

/// Minimizes a function of one variable over `{x ∈ [lo, hi] : feasible(x)}`
/// by exhaustive grid search.
///
/// After the coarse pass, each refinement scans one old cell on either side
/// of the incumbent at `1/factor` of the previous step. Ties keep the
/// smaller `x`. Returns `None` when no grid point is feasible.
pub fn grid_minimize_1d(
    objective: impl Fn(f64) -> f64,
    feasible: impl Fn(f64) -> bool,
    lo: f64,
    hi: f64,
    resolution: f64,
    refinements: usize,
    factor: usize,
) -> Option<(f64, f64)> {
    let scan = |a: f64, b: f64, step: f64, best: &mut Option<(f64, f64)>| {
        let count = ((b - a) / step).round() as i64;
        for i in 0..=count {
            let x = a + step * i as f64;
            if x < lo || x > hi || !feasible(x) {
                continue;
            }
            let v = objective(x);
            let better = match best {
                None => true,
                Some((bx, bv)) => v < *bv || (v == *bv && x < *bx),
            };
            if better {
                *best = Some((x, v));
            }
        }
    };
    let mut best = None;
    scan(lo, hi, resolution, &mut best);
    let mut step = resolution;
    for _ in 0..refinements {
        let (x0, _) = best?;
        let fine = step / factor as f64;
        scan(x0 - step, x0 + step, fine, &mut best);
        step = fine;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstabilityRow {
    pub delta: f64,
    /// Minimizer of `x²` subject to `|x³ − x² − (y + δ)| ≤ y`; `None` if the
    /// grid found no feasible point.
    pub x: Option<f64>,
    /// `|x(δ(1 + 10⁻²)) − x(δ)|`, a local sensitivity probe.
    pub local_variation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstabilityReport {
    pub y: f64,
    pub beta: f64,
    pub unperturbed: Option<f64>,
    pub rows: Vec<InstabilityRow>,
    /// `|x(δ_last) − x(0)|` for the smallest `δ` in the list.
    pub jump: f64,
}

/// Coarse grid step for [`instability_demo`].
pub const INSTABILITY_GRID: f64 = 1e-3;
/// Search interval for [`instability_demo`].
pub const INSTABILITY_DOMAIN: (f64, f64) = (-3.0, 3.0);

/// Solves `min x²` subject to `|x³ − x² − y_δ| ≤ y` with `y_δ = y + δ` for
/// each `δ` and for `δ = 0`, by grid search with two ×100 refinements.
///
/// With `δ = 0` the origin is feasible; for any `δ > 0` the feasible set
/// lies to the right of `x = 1`, so the solution map jumps.
pub fn instability_demo(y: f64, deltas: &[f64], resolution: f64) -> Result<InstabilityReport> {
    if !(y.is_finite() && y > 0.0) {
        return Err(precondition("y must be positive"));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(precondition("grid resolution must be positive"));
    }
    if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(precondition("deltas must be positive"));
    }
    let beta = y;
    let solve = |delta: f64| {
        let target = y + delta;
        grid_minimize_1d(
            |x| x * x,
            |x| (x * x * x - x * x - target).abs() <= beta,
            INSTABILITY_DOMAIN.0,
            INSTABILITY_DOMAIN.1,
            resolution,
            2,
            100,
        )
        .map(|(x, _)| x)
    };
    let unperturbed = solve(0.0);
    let rows: Vec<InstabilityRow> = deltas
        .iter()
        .map(|&delta| {
            let x = solve(delta);
            let local_variation = match (x, solve(delta * 1.01)) {
                (Some(a), Some(b)) => (a - b).abs(),
                _ => f64::INFINITY,
            };
            InstabilityRow { delta, x, local_variation }
        })
        .collect();
    let last = deltas
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| rows[i].x);
    let jump = match (last, unperturbed) {
        (Some(Some(a)), Some(b)) => (a - b).abs(),
        _ => 0.0,
    };
    Ok(InstabilityReport { y, beta, unperturbed, rows, jump })
}

/// Root of `x³ − x² = c` for `c > 0`, by bisection on `[1, 1 + c + 1]`.
pub fn cubic_root_oracle(c: f64) -> f64 {
    let g = |x: f64| x * x * x - x * x - c;
    let (mut lo, mut hi) = (1.0, 2.0 + c);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `R_p(x_k) − R_p(x_ref)` helper for callers building their own schedules.
pub fn regularizer_gap(a: &DVector<f64>, b: &DVector<f64>, p: f64) -> f64 {
    (lp_power_sum(a.as_slice(), p) - lp_power_sum(b.as_slice(), p)).abs()
}
