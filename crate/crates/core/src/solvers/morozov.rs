//! Residual method via the Tikhonov path and Morozov's discrepancy principle.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use super::nonconvex::nonconvex_solve;
use super::prox::prox_scalar;
use super::tikhonov::InnerSolver;
use super::SolverOptions;
use crate::error::Result;
use crate::linalg::{least_squares, AffineProjector};
use crate::problem::{Problem, SolveReport, Status};

/// Number of ×10 / ÷10 steps tried when bracketing `α`.
pub(crate) const BRACKET_STEPS: usize = 40;

/// One visited point of the Morozov search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorozovStep {
    pub alpha: f64,
    pub discrepancy: f64,
}

pub(crate) struct SearchOutcome {
    pub x: DVector<f64>,
    pub alpha: f64,
    pub matched: bool,
    pub iterations: usize,
    pub trace: Vec<MorozovStep>,
    /// Every visited iterate with discrepancy at most `β`.
    pub feasible: Vec<(f64, DVector<f64>)>,
}

struct Visit {
    log_alpha: f64,
    x: DVector<f64>,
    discrepancy: f64,
}

/// Searches `α` so that the penalized minimizer has discrepancy `β`.
///
/// Each inner solve is warm-started from the visited iterate whose `α` is
/// closest on a log scale, or from `start` for the first one. Returns `None`
/// when no `α` down to `10^{-40}` brings the discrepancy below `β`.
pub(crate) fn morozov_search(
    inner: &InnerSolver<'_>,
    beta: f64,
    slack: f64,
    start: &DVector<f64>,
    opts: &SolverOptions,
) -> Option<SearchOutcome> {
    let tol = opts.discrepancy_match_tolerance * beta;
    // A match must also be feasible up to `slack`.
    let accept = |d: f64| d >= beta - tol && d <= beta + tol.min(slack);
    let mut visits: Vec<Visit> = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0usize;

    let mut evaluate = |log_alpha: f64, visits: &mut Vec<Visit>| -> usize {
        let warm = visits
            .iter()
            .min_by(|a, b| {
                (a.log_alpha - log_alpha).abs().total_cmp(&(b.log_alpha - log_alpha).abs())
            })
            .map_or(start, |v| &v.x);
        let run = inner.solve(log_alpha.exp(), warm);
        iterations += run.iterations;
        let discrepancy = inner.discrepancy(&run.x);
        trace.push(MorozovStep { alpha: log_alpha.exp(), discrepancy });
        visits.push(Visit { log_alpha, x: run.x, discrepancy });
        visits.len() - 1
    };

    let ten = 10.0f64.ln();
    let first = evaluate(0.0, &mut visits);
    let mut lo = None;
    let mut hi = None;
    let mut matched = None;
    if accept(visits[first].discrepancy) {
        matched = Some(first);
    } else if visits[first].discrepancy < beta {
        lo = Some(first);
        let mut s = 0.0;
        for _ in 0..BRACKET_STEPS {
            s += ten;
            let k = evaluate(s, &mut visits);
            if accept(visits[k].discrepancy) {
                matched = Some(k);
                break;
            }
            if visits[k].discrepancy > beta {
                hi = Some(k);
                break;
            }
            lo = Some(k);
        }
    } else {
        hi = Some(first);
        let mut s = 0.0;
        for _ in 0..BRACKET_STEPS {
            s -= ten;
            let k = evaluate(s, &mut visits);
            if accept(visits[k].discrepancy) {
                matched = Some(k);
                break;
            }
            if visits[k].discrepancy < beta {
                lo = Some(k);
                break;
            }
            hi = Some(k);
        }
    }

    if matched.is_none() {
        if let (Some(mut l), Some(mut h)) = (lo, hi) {
            // Illinois-modified regula falsi on g(log α) = d/β − 1, with
            // bisection whenever the interpolated point crowds an endpoint.
            let g = |v: &Visit| v.discrepancy / beta - 1.0;
            let mut g_lo = g(&visits[l]);
            let mut g_hi = g(&visits[h]);
            let mut side = 0i8;
            // Bracket widths of the last rounds; bisect when three steps fail to halve it.
            let mut widths: Vec<f64> = Vec::new();
            for _ in 0..opts.max_outer_bisections {
                let (s_lo, s_hi) = (visits[l].log_alpha, visits[h].log_alpha);
                let width = s_hi - s_lo;
                if width.abs() <= 1e-13 * (1.0 + s_lo.abs()) {
                    break;
                }
                widths.push(width);
                let stalled = widths.len() > 3 && width > 0.5 * widths[widths.len() - 4];
                let mut s = s_hi - g_hi * (s_hi - s_lo) / (g_hi - g_lo);
                if !s.is_finite() || stalled {
                    s = 0.5 * (s_lo + s_hi);
                    widths.clear();
                } else {
                    s = s.clamp(s_lo + 1e-3 * width, s_hi - 1e-3 * width);
                }
                let k = evaluate(s, &mut visits);
                let gk = g(&visits[k]);
                if accept(visits[k].discrepancy) {
                    matched = Some(k);
                    break;
                }
                if gk < 0.0 {
                    l = k;
                    g_lo = gk;
                    if side == -1 {
                        g_hi *= 0.5;
                    }
                    side = -1;
                } else {
                    h = k;
                    g_hi = gk;
                    if side == 1 {
                        g_lo *= 0.5;
                    }
                    side = 1;
                }
            }
            lo = Some(l);
        }
    }

    let feasible = visits
        .iter()
        .filter(|v| v.discrepancy <= beta + slack)
        .map(|v| (v.log_alpha.exp(), v.x.clone()))
        .collect();

    let chosen = matched.or(lo)?;
    let v = &visits[chosen];
    Some(SearchOutcome {
        x: v.x.clone(),
        alpha: v.log_alpha.exp(),
        matched: matched.is_some(),
        iterations,
        trace,
        feasible,
    })
}

/// Shrinks a feasible `x` toward zero until the discrepancy reaches `β`.
/// `R_p(t x) = t^p R_p(x)`, so the objective never increases.
pub(crate) fn scale_to_boundary(
    f: &DMatrix<f64>,
    y: &DVector<f64>,
    x: &DVector<f64>,
    beta: f64,
) -> DVector<f64> {
    let fx = f * x;
    let d = |t: f64| (&fx * t - y).norm();
    if d(1.0) >= beta || y.norm() <= beta {
        return x.clone();
    }
    // d(0) = ‖y‖ > β ≥ d(1); keep the feasible end.
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d(mid) > beta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    x * hi
}

/// Minimizes `R_p` over the least-squares solutions of `Fx ≈ y` by
/// Douglas–Rachford splitting. Exact for convex `p`, a heuristic below 1.
pub(crate) fn affine_minimize(
    f: &DMatrix<f64>,
    y: &DVector<f64>,
    p: f64,
    start: &DVector<f64>,
    opts: &SolverOptions,
) -> (DVector<f64>, usize) {
    let projector = AffineProjector::new(f, y);
    let scale = start.amax().max(1.0);
    let gamma = 0.1 * scale.powf(2.0 - p);
    let mut z = start.clone();
    let mut x = projector.project(&z);
    for iter in 1..=opts.max_inner_iterations {
        let reflected = &x * 2.0 - &z;
        let w = reflected.map(|v| prox_scalar(v, gamma, p));
        let step = &w - &x;
        z += &step;
        let next = projector.project(&z);
        let change = (&next - &x).norm();
        x = next;
        if change <= opts.inner_tolerance * x.norm().max(f64::MIN_POSITIVE)
            && step.norm() <= opts.inner_tolerance * scale
        {
            return (x, iter);
        }
    }
    (x, opts.max_inner_iterations)
}

/// Solves `min R_p(x)` subject to `‖Fx − y‖ ≤ β`.
///
/// Convex exponents give a global solution up to the tolerances; `p < 1`
/// is delegated to [`nonconvex_solve`](super::nonconvex_solve).
pub fn residual_method_solve(problem: &Problem, opts: &SolverOptions) -> Result<SolveReport> {
    residual_method_solve_traced(problem, opts).map(|(report, _)| report)
}

/// As [`residual_method_solve`], also returning the visited `(α, discrepancy)`
/// pairs in evaluation order.
pub fn residual_method_solve_traced(
    problem: &Problem,
    opts: &SolverOptions,
) -> Result<(SolveReport, Vec<MorozovStep>)> {
    opts.validate()?;
    if problem.p() < 1.0 {
        return nonconvex_solve(problem, opts).map(|r| (r, Vec::new()));
    }
    let f = problem.operator();
    let y = problem.data();
    let beta = problem.beta();
    let n = problem.cols();

    if y.norm() <= beta {
        let x = DVector::zeros(n);
        return Ok((SolveReport::evaluate(problem, x, None, Status::ZeroFeasible, 0), Vec::new()));
    }
    let (x_ls, r_ls) = least_squares(f, y);
    let tol = problem.feasibility_tolerance();
    if r_ls > beta + tol {
        return Ok((SolveReport::infeasible(problem, x_ls, 0), Vec::new()));
    }
    if beta <= r_ls + tol {
        let (x, iterations) = affine_minimize(f, y, problem.p(), &x_ls, opts);
        let report = SolveReport::evaluate(problem, x, None, Status::ConstraintActive, iterations);
        return Ok((report, Vec::new()));
    }

    let inner = InnerSolver::new(f, y, problem.p(), opts);
    let start = DVector::zeros(n);
    match morozov_search(&inner, beta, tol, &start, opts) {
        Some(outcome) => {
            let x = if outcome.matched {
                outcome.x
            } else {
                scale_to_boundary(f, y, &outcome.x, beta)
            };
            let report = SolveReport::evaluate(
                problem,
                x,
                Some(outcome.alpha),
                Status::ConstraintActive,
                outcome.iterations,
            );
            Ok((report, outcome.trace))
        }
        None => {
            // β is within reach of the least-squares residual only.
            let (x, iterations) = affine_minimize(f, y, problem.p(), &x_ls, opts);
            let report = SolveReport::evaluate(problem, x, None, Status::ConstraintActive, iterations);
            Ok((report, Vec::new()))
        }
    }
}
