//! Proximal map of `u ↦ t·|u|^p`.

use nalgebra::DVector;
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::problem::check_exponent;

/// Componentwise `argmin_u ½(u − v)² + t|u|^p`.
///
/// For `p < 1` the minimizer is the larger stationary point when it beats
/// `u = 0` strictly; ties go to zero.
pub fn prox_lp(v: &DVector<f64>, t: f64, p: f64) -> Result<DVector<f64>> {
    check_exponent(p)?;
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidInput(alloc::format!("prox weight must be positive, got {t}")));
    }
    Ok(v.map(|vi| prox_scalar(vi, t, p)))
}

/// Scalar proximal map; inputs are assumed validated.
pub fn prox_scalar(v: f64, t: f64, p: f64) -> f64 {
    let a = v.abs();
    if a == 0.0 {
        return 0.0;
    }
    let u = if p == 1.0 {
        (a - t).max(0.0)
    } else if p == 2.0 {
        a / (1.0 + 2.0 * t)
    } else if p > 1.0 {
        root_convex(a, t, p)
    } else {
        root_nonconvex(a, t, p)
    };
    u.copysign(v)
}

/// Unique root of `u + t·p·u^{p−1} = a` on `(0, a)` for `p ∈ (1, 2)`.
fn root_convex(a: f64, t: f64, p: f64) -> f64 {
    let h = |u: f64| u + t * p * u.powf(p - 1.0) - a;
    let dh = |u: f64| 1.0 + t * p * (p - 1.0) * u.powf(p - 2.0);
    safeguarded_newton(h, dh, 0.0, a, a)
}

/// Global minimizer over `u ≥ 0` for `p ∈ (0, 1)`.
fn root_nonconvex(a: f64, t: f64, p: f64) -> f64 {
    // g(u) = u + t p u^{p−1} is convex on (0, ∞) with its minimum at u_min;
    // the local minimizer of the prox objective is the root of g = a right of u_min.
    let u_min = (t * p * (1.0 - p)).powf(1.0 / (2.0 - p));
    let g_min = u_min + t * p * u_min.powf(p - 1.0);
    if a <= g_min {
        return 0.0;
    }
    let h = |u: f64| u + t * p * u.powf(p - 1.0) - a;
    let dh = |u: f64| 1.0 + t * p * (p - 1.0) * u.powf(p - 2.0);
    let u = safeguarded_newton(h, dh, u_min, a, a);
    let objective = |w: f64| 0.5 * (w - a) * (w - a) + t * w.powf(p);
    if objective(u) < 0.5 * a * a {
        u
    } else {
        0.0
    }
}

/// Newton iteration kept inside the bracket `[lo, hi]` with `h(lo) < 0 < h(hi)`
/// (up to rounding), falling back to bisection when a step leaves it.
fn safeguarded_newton(
    h: impl Fn(f64) -> f64,
    dh: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    start: f64,
) -> f64 {
    let mut u = start;
    for _ in 0..200 {
        let value = h(u);
        if value == 0.0 {
            return u;
        }
        if value > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let step = value / dh(u);
        let mut next = u - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 4.0 * f64::EPSILON * next.abs().max(f64::MIN_POSITIVE)
            || hi - lo <= 4.0 * f64::EPSILON * hi
        {
            return next;
        }
        u = next;
    }
    u
}
