//! Subgradients of `R_p`, Bregman distances and source certificates.
//!
//! A source certificate represents a subgradient `ξ ∈ ∂R_p(x†)` as `ξ = Fᵀω`.
//! With such an `ω` the source inequality
//!
//! ```text
//!   ⟨ξ, x† − x⟩ ≤ γ₁ D_ξ(x, x†) + γ₂ ‖Fx − Fx†‖
//! ```
//!
//! holds with `γ₁ = 0`, `γ₂ = ‖ω‖` by Cauchy–Schwarz.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent f64 methods when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::linalg::pseudo_inverse;
use crate::problem::lp_power_sum;

/// Residual below which a certificate counts as an exact representation.
pub const EXACT_FIT: f64 = 1e-8;

/// Alternating-projection rounds used to choose free subgradient entries.
const FREE_ENTRY_ROUNDS: usize = 100;

fn check_convex_exponent(p: f64) -> Result<()> {
    if p.is_finite() && (1.0..=2.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::UnsupportedExponent(p))
    }
}

fn check_same_len(a: &DVector<f64>, b: &DVector<f64>) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: a.len(), found: b.len() })
    }
}

/// An element of `∂R_p(x)`. Coordinates flagged in `free` may take any value
/// in `[−1, 1]` (only for `p = 1`, where `x_λ = 0`); `xi` holds 0 there.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgradient {
    pub xi: DVector<f64>,
    pub free: Vec<bool>,
}

impl Subgradient {
    pub fn has_free(&self) -> bool {
        self.free.iter().any(|f| *f)
    }
}

/// Subgradient of `R_p` at `x` for `p ∈ [1, 2]`.
pub fn subgradient_lp(x: &DVector<f64>, p: f64) -> Result<Subgradient> {
    check_convex_exponent(p)?;
    if p == 1.0 {
        let xi = x.map(|v| if v == 0.0 { 0.0 } else { v.signum() });
        let free = x.iter().map(|v| *v == 0.0).collect();
        return Ok(Subgradient { xi, free });
    }
    let xi = x.map(|v| if v == 0.0 { 0.0 } else { p * v.signum() * v.abs().powf(p - 1.0) });
    Ok(Subgradient { xi, free: alloc::vec![false; x.len()] })
}

/// Constants of the source inequality in both parametrizations.
///
/// `(γ₁, γ₂)` bound `⟨ξ, x† − x⟩` by `γ₁ D + γ₂ ‖F(x − x†)‖`; `(η₁, η₂)` bound it
/// by `η₁ (R(x) − R(x†)) + η₂ ‖F(x − x†)‖`. The two are equivalent via
/// `γ₁ = η₁/(1+η₁)`, `γ₂ = η₂/(1+η₁)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConstants {
    pub gamma1: f64,
    pub gamma2: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl SourceConstants {
    pub fn from_eta(eta1: f64, eta2: f64) -> Result<Self> {
        if !(eta1 >= 0.0 && eta2 >= 0.0 && eta1.is_finite() && eta2.is_finite()) {
            return Err(invalid("eta constants must be finite and nonnegative"));
        }
        Ok(Self { gamma1: eta1 / (1.0 + eta1), gamma2: eta2 / (1.0 + eta1), eta1, eta2 })
    }

    pub fn from_gamma(gamma1: f64, gamma2: f64) -> Result<Self> {
        if !((0.0..1.0).contains(&gamma1) && gamma2 >= 0.0 && gamma2.is_finite()) {
            return Err(invalid("gamma1 must lie in [0, 1) and gamma2 must be nonnegative"));
        }
        Ok(Self {
            gamma1,
            gamma2,
            eta1: gamma1 / (1.0 - gamma1),
            eta2: gamma2 / (1.0 - gamma1),
        })
    }
}

/// Representation `ξ ≈ Fᵀω` of a subgradient at `x†`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceCertificate {
    pub p: f64,
    pub xi: DVector<f64>,
    pub omega: DVector<f64>,
    /// `‖Fᵀω − ξ‖`.
    pub fit_residual: f64,
    pub constants: SourceConstants,
}

impl SourceCertificate {
    pub fn gamma1(&self) -> f64 {
        self.constants.gamma1
    }

    pub fn gamma2(&self) -> f64 {
        self.constants.gamma2
    }

    pub fn is_exact(&self) -> bool {
        self.fit_residual <= EXACT_FIT
    }
}

/// Fits `ω` to a subgradient of `R_p` at `x†` by least squares.
///
/// For `p = 1` the entries of `ξ` at zero coordinates are free in `[−1, 1]`;
/// they start at `free_values` (or 0) and are chosen by alternating between
/// the least-squares fit and clipping to the box. Constants follow the linear
/// case: `η₁ = 0`, `η₂ = ‖ω‖`.
pub fn source_certificate(
    f: &DMatrix<f64>,
    x_dagger: &DVector<f64>,
    p: f64,
    free_values: Option<&[f64]>,
) -> Result<SourceCertificate> {
    if x_dagger.len() != f.ncols() {
        return Err(Error::DimensionMismatch { expected: f.ncols(), found: x_dagger.len() });
    }
    let Subgradient { mut xi, free } = subgradient_lp(x_dagger, p)?;
    if let Some(values) = free_values {
        if values.len() != xi.len() {
            return Err(Error::DimensionMismatch { expected: xi.len(), found: values.len() });
        }
        for (i, v) in values.iter().enumerate() {
            if free[i] {
                xi[i] = v.clamp(-1.0, 1.0);
            }
        }
    }
    let ft_pinv = pseudo_inverse(&f.transpose());
    let mut omega = &ft_pinv * &xi;
    if free.iter().any(|v| *v) {
        for _ in 0..FREE_ENTRY_ROUNDS {
            let fitted = f.tr_mul(&omega);
            if (&fitted - &xi).norm() <= EXACT_FIT * 1e-3 {
                break;
            }
            for i in 0..xi.len() {
                if free[i] {
                    xi[i] = fitted[i].clamp(-1.0, 1.0);
                }
            }
            omega = &ft_pinv * &xi;
        }
    }
    let fit_residual = (f.tr_mul(&omega) - &xi).norm();
    let constants = SourceConstants::from_eta(0.0, omega.norm())?;
    Ok(SourceCertificate { p, xi, omega, fit_residual, constants })
}

/// Classical Bregman distance `R_p(x) − R_p(x†) − ⟨ξ, x − x†⟩`.
pub fn bregman_distance(
    x: &DVector<f64>,
    x_dagger: &DVector<f64>,
    xi: &DVector<f64>,
    p: f64,
) -> Result<f64> {
    check_convex_exponent(p)?;
    check_same_len(x, x_dagger)?;
    check_same_len(x, xi)?;
    Ok(lp_power_sum(x.as_slice(), p)
        - lp_power_sum(x_dagger.as_slice(), p)
        - xi.dot(&(x - x_dagger)))
}

/// Generalized Bregman distance `R_p(x) − R_p(x†) − w(x) + w(x†)`.
pub fn generalized_bregman(
    x: &DVector<f64>,
    x_dagger: &DVector<f64>,
    p: f64,
    w: impl Fn(&DVector<f64>) -> f64,
) -> Result<f64> {
    check_same_len(x, x_dagger)?;
    crate::problem::check_exponent(p)?;
    Ok(lp_power_sum(x.as_slice(), p) - lp_power_sum(x_dagger.as_slice(), p) - w(x) + w(x_dagger))
}

/// The family `w(x) = −c ‖x − center‖₂^p`.
pub fn power_distance_family(
    center: DVector<f64>,
    c: f64,
    p: f64,
) -> impl Fn(&DVector<f64>) -> f64 {
    move |x| -c * (x - &center).norm().powf(p)
}

/// Outcome of checking the source inequality on sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceInequalityReport {
    /// Largest `lhs − rhs` over checked samples, floored at 0.
    pub max_violation: f64,
    /// Index (into the sample list) of the sample attaining `max_violation`.
    pub worst_point: Option<usize>,
    pub checked: usize,
    /// Samples outside `{R_p(x) ≤ R_p(x†)}`.
    pub skipped: usize,
}

/// Checks `⟨ξ, x† − x⟩ ≤ γ₁ D_ξ(x, x†) + γ₂ ‖Fx − Fx†‖` at each sample with
/// `R_p(x) ≤ R_p(x†)`.
pub fn verify_source_inequality(
    f: &DMatrix<f64>,
    x_dagger: &DVector<f64>,
    certificate: &SourceCertificate,
    samples: &[DVector<f64>],
) -> Result<SourceInequalityReport> {
    let p = certificate.p;
    let r_dagger = lp_power_sum(x_dagger.as_slice(), p);
    let f_dagger = f * x_dagger;
    let mut report =
        SourceInequalityReport { max_violation: 0.0, worst_point: None, checked: 0, skipped: 0 };
    for (i, x) in samples.iter().enumerate() {
        check_same_len(x_dagger, x)?;
        if lp_power_sum(x.as_slice(), p) > r_dagger * (1.0 + 1e-12) {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        let lhs = certificate.xi.dot(&(x_dagger - x));
        let d = bregman_distance(x, x_dagger, &certificate.xi, p)?;
        let rhs = certificate.gamma1() * d + certificate.gamma2() * (f * x - &f_dagger).norm();
        let violation = lhs - rhs;
        if violation > report.max_violation {
            report.max_violation = violation;
            report.worst_point = Some(i);
        }
    }
    Ok(report)
}

/// Checks `D_ξ(x, x†) ≥ (K/r) ‖x − x†‖_p^r` with `r = 2` and `ξ` the
/// subgradient of `R_p` at `x†`, for `p ∈ (1, 2]`.
pub fn r_coercivity_check(
    x: &DVector<f64>,
    x_dagger: &DVector<f64>,
    p: f64,
    k: f64,
) -> Result<bool> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::UnsupportedExponent(p));
    }
    let r = 2.0;
    let xi = subgradient_lp(x_dagger, p)?.xi;
    let d = bregman_distance(x, x_dagger, &xi, p)?;
    let dist = lp_power_sum((x - x_dagger).as_slice(), p).powf(1.0 / p);
    Ok(d >= k / r * dist.powf(r) - 1e-15)
}
