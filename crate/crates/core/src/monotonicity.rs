//! Hazard-rate conditions for the busy-origin mean and variance to be
//! non-decreasing in time.
//!
//! Differentiating the moment formulas gives
//!
//! ```text
//! dμ/dt = (1 − G)(λ − h)
//! dV/dt = (1 − G)(h(1 − 2G) + λ)
//! ```
//!
//! so `h ≤ λ` suffices for the mean and, where `G > 1/2`, `h ≤ λ/(2G − 1)`
//! suffices for the variance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{finite_difference, integrate, QuadratureSpec};
use crate::service_models::ServiceModel;
use crate::transient::MomentKind;

/// Relative slack when comparing a hazard to its threshold, so that
/// families meeting the condition with equality are not flagged.
pub const CONDITION_SLACK: f64 = 1e-12;

/// Slack used when testing sampled curves for monotonicity.
pub const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    pub hazard: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub kind: MomentKind,
    /// False when the hazard does not exist for this model (e.g. a
    /// deterministic law); no claim is made in that case.
    pub applicable: bool,
    /// True when `G(t) = 1` at every grid point, so the moment is constant.
    pub trivial: bool,
    /// `applicable` and no violations.
    pub condition_holds_everywhere: bool,
    pub violations: Vec<Violation>,
    /// Grid points where the condition holds without comparing hazards:
    /// `G(t) = 1`, or `G(t) ≤ 1/2` for the variance.
    pub auto_satisfied: Vec<f64>,
    /// Minimum of the analytic derivative over the grid.
    pub derivative_min: f64,
    pub note: Option<String>,
}

/// `β(t) = h(t) − λ`.
pub fn beta_of(model: &ServiceModel, lambda: f64, t: f64) -> Result<f64> {
    Ok(model.hazard(t)? - lambda)
}

/// The `β(t)` for which `G` solves the Riccati equation below:
/// `h(t) − λG(t)`. It differs from [`beta_of`] except as `G → 1`; for the
/// beta-constant family it is exactly the family's β.
pub fn riccati_beta(model: &ServiceModel, lambda: f64, t: f64) -> Result<f64> {
    Ok(model.hazard(t)? - lambda * model.cdf(t))
}

/// `dμ(1′,t)/dt = (1 − G(t))(λ − h(t))`; zero where `G(t) = 1`.
pub fn mean_derivative(model: &ServiceModel, lambda: f64, t: f64) -> Result<f64> {
    let s = model.survival(t);
    if s == 0.0 {
        return Ok(0.0);
    }
    Ok(s * (lambda - model.hazard(t)?))
}

/// `dV(1′,t)/dt = (1 − G(t))(h(t)(1 − 2G(t)) + λ)`; zero where `G(t) = 1`.
pub fn variance_derivative(model: &ServiceModel, lambda: f64, t: f64) -> Result<f64> {
    let s = model.survival(t);
    if s == 0.0 {
        return Ok(0.0);
    }
    let g = model.cdf(t);
    Ok(s * (model.hazard(t)? * (1.0 - 2.0 * g) + lambda))
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if let Some(&t) = grid.iter().find(|&&t| !(t.is_finite() && t > 0.0)) {
        return Err(Error::domain("monotonicity grid must hold positive times", format!("{t}")));
    }
    Ok(())
}

fn within(h: f64, threshold: f64) -> bool {
    h <= threshold + CONDITION_SLACK * threshold.abs().max(1.0)
}

fn inapplicable(kind: MomentKind, err: &Error) -> MonotonicityReport {
    MonotonicityReport {
        kind,
        applicable: false,
        trivial: false,
        condition_holds_everywhere: false,
        violations: Vec::new(),
        auto_satisfied: Vec::new(),
        derivative_min: f64::NAN,
        note: Some(format!("hazard unavailable: {err}")),
    }
}

/// Checks `h(t) ≤ λ` at every grid point.
pub fn check_mean_monotone(model: &ServiceModel, lambda: f64, grid: &[f64]) -> Result<MonotonicityReport> {
    check_grid(grid)?;
    let kind = MomentKind::Mean;
    let mut violations = Vec::new();
    let mut auto = Vec::new();
    let mut dmin = f64::INFINITY;
    for &t in grid {
        if model.survival(t) == 0.0 {
            auto.push(t);
            dmin = dmin.min(0.0);
            continue;
        }
        let h = match model.hazard(t) {
            Ok(h) => h,
            Err(e @ (Error::Capability { .. } | Error::UndefinedHazard { .. })) => {
                return Ok(inapplicable(kind, &e))
            }
            Err(e) => return Err(e),
        };
        if !within(h, lambda) {
            violations.push(Violation {
                t,
                hazard: h,
                threshold: lambda,
            });
        }
        dmin = dmin.min(mean_derivative(model, lambda, t)?);
    }
    Ok(finish(kind, grid, violations, auto, dmin, None))
}

/// Checks `h(t) ≤ λ/(2G(t) − 1)` where `1/2 < G(t) < 1`.
///
/// Points with `G(t) ≤ 1/2` are recorded as auto-satisfied: there
/// `h(1 − 2G) + λ > 0` for any non-negative hazard. This extends the
/// hypothesis `1/2 < G < 1` to atomless laws near the origin.
pub fn check_variance_monotone(
    model: &ServiceModel,
    lambda: f64,
    grid: &[f64],
) -> Result<MonotonicityReport> {
    check_grid(grid)?;
    let kind = MomentKind::Variance;
    let mut violations = Vec::new();
    let mut auto = Vec::new();
    let mut dmin = f64::INFINITY;
    let mut below_half = false;
    for &t in grid {
        let s = model.survival(t);
        if s == 0.0 {
            auto.push(t);
            dmin = dmin.min(0.0);
            continue;
        }
        let h = match model.hazard(t) {
            Ok(h) => h,
            Err(e @ (Error::Capability { .. } | Error::UndefinedHazard { .. })) => {
                return Ok(inapplicable(kind, &e))
            }
            Err(e) => return Err(e),
        };
        let g = model.cdf(t);
        if g <= 0.5 {
            auto.push(t);
            below_half = true;
        } else {
            let threshold = lambda / (1.0 - 2.0 * s);
            if !within(h, threshold) {
                violations.push(Violation {
                    t,
                    hazard: h,
                    threshold,
                });
            }
        }
        dmin = dmin.min(variance_derivative(model, lambda, t)?);
    }
    let note = below_half
        .then(|| "points with G(t) <= 1/2 treated as satisfied (derivative is non-negative there)".to_string());
    Ok(finish(kind, grid, violations, auto, dmin, note))
}

fn finish(
    kind: MomentKind,
    grid: &[f64],
    violations: Vec<Violation>,
    auto_satisfied: Vec<f64>,
    dmin: f64,
    note: Option<String>,
) -> MonotonicityReport {
    let trivial = !grid.is_empty() && auto_satisfied.len() == grid.len() && dmin == 0.0;
    MonotonicityReport {
        kind,
        applicable: true,
        trivial,
        condition_holds_everywhere: violations.is_empty(),
        violations,
        auto_satisfied,
        derivative_min: if dmin.is_finite() { dmin } else { 0.0 },
        note: if trivial {
            Some("G(t) = 1 on the whole grid: the moment is identically zero".to_string())
        } else {
            note
        },
    }
}

/// Residual of the Riccati equation `G′ = −λG² − (β(t) − λ)G + β(t)`, with
/// `G′` taken by central differences.
pub fn riccati_residual<B: Fn(f64) -> f64>(
    model: &ServiceModel,
    lambda: f64,
    beta: B,
    t: f64,
    h_step: f64,
) -> f64 {
    let dg = finite_difference(|x| model.cdf(x), t, h_step);
    let g = model.cdf(t);
    let b = beta(t);
    dg - (-lambda * g * g - (b - lambda) * g + b)
}

/// `1 − (1 − G(0)) exp(−λt − ∫₀ᵗ β(u) du)` with `β = h − λ` recovered from
/// the model's hazard. Reproduces `G(t)` for any law with a finite, positive
/// hazard on `(0, t]`.
pub fn cdf_from_hazard(model: &ServiceModel, lambda: f64, t: f64, spec: &QuadratureSpec) -> Result<f64> {
    let beta_int = integrate(
        |u| model.hazard(u).map(|h| h - lambda).unwrap_or(f64::NAN),
        0.0,
        t,
        spec,
    )?;
    Ok(1.0 - (1.0 - model.atom_at_zero()) * (-lambda * t - beta_int).exp())
}

/// True when `values` never drops by more than [`MONOTONE_SLACK`].
pub fn is_non_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - MONOTONE_SLACK)
}
