//! Service-time laws.
//!
//! Every family is a mixed law: an optional atom at the origin plus an
//! absolutely continuous part (or, for the deterministic law, a single atom
//! at `α`). Density and hazard are therefore partial operations.
//!
//! The hazard-defined families are parameterised by the arrival rate `λ` of
//! the queue they are designed for:
//!
//! | family | survival `1 − G(t)` | hazard |
//! |---|---|---|
//! | zero-beta | `(1 − g₀) e^{−λt}` | `λ` |
//! | beta-constant | `c / (1 + e^{−ρ}(e^{(λ+β)t} − 1))`, `c = (1 − e^{−ρ})(λ+β)/λ` | `→ λ + β` |
//! | implicit constant-variance | root of `(1−G)e^{2(G−g₀)} = (1−g₀)e^{−λt}` | `λ/(2G − 1)` |
//! | implicit variance | root of the separable solution with constant `β` | `β + λ/(2G − 1)` |
//! | beta-lambda variance | `(1 − √(1 − e^{−2λt}))/2` | `λ + λ/√(1 − e^{−2λt})` |
//!
//! Implicit CDFs are solved in the log-survival variable `u = ln(1 − G)`,
//! where the defining relation is strictly monotone on a bracket known in
//! closed form. Their inverse CDFs are explicit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{find_root_with, integrate_to_infinity, QuadratureSpec, RootOptions};

/// Parameters of the constant-β Riccati family, with `−λ ≤ β ≤ λ/(e^ρ − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaConstantFamilyParams {
    pub lambda: f64,
    pub rho: f64,
    pub beta: f64,
}

impl BetaConstantFamilyParams {
    /// Upper end of the admissible β band, `λ/(e^ρ − 1)`.
    pub fn beta_max(&self) -> f64 {
        self.lambda / self.rho.exp_m1()
    }

    pub fn validate(&self) -> Result<()> {
        positive("lambda > 0", self.lambda)?;
        positive("rho > 0", self.rho)?;
        let hi = self.beta_max();
        let slack = 1e-12 * self.lambda.max(hi.abs());
        if !self.beta.is_finite() || self.beta < -self.lambda - slack || self.beta > hi + slack {
            return Err(Error::domain(
                "-lambda <= beta <= lambda/(e^rho - 1)",
                format!(
                    "beta={} outside [{}, {}]",
                    self.beta, -self.lambda, hi
                ),
            ));
        }
        Ok(())
    }
}

/// Parameters of the implicit variance family (constant β in the variance
/// threshold sense, `β = h − λ/(2G − 1)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImplicitVarianceParams {
    pub lambda: f64,
    pub g0: f64,
    pub beta: f64,
}

/// Declarative description of a service law, as it appears in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case")]
pub enum ModelSpec {
    Deterministic { alpha: f64 },
    Exponential { alpha: f64 },
    BetaConstant(BetaConstantFamilyParams),
    ZeroBeta { lambda: f64, g0: f64 },
    ImplicitConstantVariance { lambda: f64, g0: f64 },
    BetaLambdaVariance { lambda: f64 },
    ImplicitVariance(ImplicitVarianceParams),
}

impl ModelSpec {
    pub fn build(&self) -> Result<ServiceModel> {
        match *self {
            ModelSpec::Deterministic { alpha } => make_deterministic(alpha),
            ModelSpec::Exponential { alpha } => make_exponential(alpha),
            ModelSpec::BetaConstant(p) => make_beta_constant_family(p),
            ModelSpec::ZeroBeta { lambda, g0 } => make_zero_beta_model(lambda, g0),
            ModelSpec::ImplicitConstantVariance { lambda, g0 } => {
                make_implicit_constant_variance(lambda, g0)
            }
            ModelSpec::BetaLambdaVariance { lambda } => make_beta_lambda_variance_model(lambda),
            ModelSpec::ImplicitVariance(p) => make_implicit_variance_family(p),
        }
    }

    /// The arrival rate the family was built for, if it has one.
    pub fn lambda(&self) -> Option<f64> {
        match *self {
            ModelSpec::Deterministic { .. } | ModelSpec::Exponential { .. } => None,
            ModelSpec::BetaConstant(p) => Some(p.lambda),
            ModelSpec::ZeroBeta { lambda, .. }
            | ModelSpec::ImplicitConstantVariance { lambda, .. }
            | ModelSpec::BetaLambdaVariance { lambda } => Some(lambda),
            ModelSpec::ImplicitVariance(p) => Some(p.lambda),
        }
    }
}

/// A validated service-time law.
///
/// Immutable after construction; every method is a pure function of `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceModel {
    spec: ModelSpec,
    mean: f64,
    label: String,
}

fn positive(constraint: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(constraint, format!("{x}")))
    }
}

const ROOT: RootOptions = RootOptions {
    xtol: 1e-15,
    ftol: 0.0,
    max_iter: 300,
};

pub fn make_deterministic(alpha: f64) -> Result<ServiceModel> {
    positive("alpha > 0", alpha)?;
    Ok(ServiceModel {
        spec: ModelSpec::Deterministic { alpha },
        mean: alpha,
        label: format!("deterministic(alpha={alpha})"),
    })
}

pub fn make_exponential(alpha: f64) -> Result<ServiceModel> {
    positive("alpha > 0", alpha)?;
    Ok(ServiceModel {
        spec: ModelSpec::Exponential { alpha },
        mean: alpha,
        label: format!("exponential(alpha={alpha})"),
    })
}

/// The constant-β member of the Riccati family. Its mean is always `ρ/λ`,
/// except at `β = −λ` where the law collapses to `G ≡ 1`.
pub fn make_beta_constant_family(p: BetaConstantFamilyParams) -> Result<ServiceModel> {
    p.validate()?;
    let a = p.lambda + p.beta;
    let mean = if a <= 0.0 { 0.0 } else { p.rho / p.lambda };
    Ok(ServiceModel {
        spec: ModelSpec::BetaConstant(p),
        mean,
        label: format!(
            "beta-constant(lambda={}, rho={}, beta={})",
            p.lambda, p.rho, p.beta
        ),
    })
}

/// `G(t) = 1 − (1 − g₀)e^{−λt}`: hazard identically `λ`.
pub fn make_zero_beta_model(lambda: f64, g0: f64) -> Result<ServiceModel> {
    positive("lambda > 0", lambda)?;
    if !(0.0..1.0).contains(&g0) {
        return Err(Error::domain("0 <= g0 < 1", format!("g0={g0}")));
    }
    Ok(ServiceModel {
        spec: ModelSpec::ZeroBeta { lambda, g0 },
        mean: (1.0 - g0) / lambda,
        label: format!("zero-beta(lambda={lambda}, g0={g0})"),
    })
}

/// Implicit law whose busy-origin variance is constant in time.
pub fn make_implicit_constant_variance(lambda: f64, g0: f64) -> Result<ServiceModel> {
    positive("lambda > 0", lambda)?;
    if !(g0 > 0.5 && g0 < 1.0) {
        return Err(Error::domain("1/2 < g0 < 1", format!("g0={g0}")));
    }
    let mut model = ServiceModel {
        spec: ModelSpec::ImplicitConstantVariance { lambda, g0 },
        mean: 0.0,
        label: format!("implicit-constant-variance(lambda={lambda}, g0={g0})"),
    };
    model.mean = model.tail_integral_mean()?;
    Ok(model)
}

/// `G(t) = (1 + √(1 − e^{−2λt}))/2`, with `G(0) = 1/2`.
pub fn make_beta_lambda_variance_model(lambda: f64) -> Result<ServiceModel> {
    positive("lambda > 0", lambda)?;
    Ok(ServiceModel {
        spec: ModelSpec::BetaLambdaVariance { lambda },
        mean: (1.0 - std::f64::consts::LN_2) / (2.0 * lambda),
        label: format!("beta-lambda-variance(lambda={lambda})"),
    })
}

/// Implicit law with constant `β = h(t) − λ/(2G(t) − 1)`, `β ∉ {0, −λ}`.
pub fn make_implicit_variance_family(p: ImplicitVarianceParams) -> Result<ServiceModel> {
    positive("lambda > 0", p.lambda)?;
    if !(p.g0 >= 0.5 && p.g0 < 1.0) {
        return Err(Error::domain("1/2 <= g0 < 1", format!("g0={}", p.g0)));
    }
    if !p.beta.is_finite() || p.beta == 0.0 || p.beta == -p.lambda {
        return Err(Error::domain(
            "beta not in {0, -lambda} (use the implicit-constant-variance or trivial model)",
            format!("beta={}", p.beta),
        ));
    }
    // β(2G − 1) + λ must stay positive on [g₀, 1]; it is linear in G, so the
    // endpoints decide. At G = 1 it equals β + λ.
    let d0 = p.beta * (2.0 * p.g0 - 1.0) + p.lambda;
    if d0 <= 0.0 || p.beta + p.lambda <= 0.0 {
        return Err(Error::domain(
            "beta*(2G - 1) + lambda > 0 on [g0, 1] (requires beta > -lambda)",
            format!("beta={}, lambda={}, g0={}", p.beta, p.lambda, p.g0),
        ));
    }
    let mut model = ServiceModel {
        spec: ModelSpec::ImplicitVariance(p),
        mean: 0.0,
        label: format!(
            "implicit-variance(lambda={}, g0={}, beta={})",
            p.lambda, p.g0, p.beta
        ),
    };
    model.verify_implicit_monotone()?;
    model.mean = model.tail_integral_mean()?;
    Ok(model)
}

/// Bounds `(lower, upper)` on `E[Sⁿ]` for the implicit constant-variance law:
/// `(1−g₀)n!e^{−2(1−g₀)}/λⁿ ≤ E[Sⁿ] ≤ (1−g₀)n!/((2g₀−1)λⁿ)`.
pub fn moment_bounds(g0: f64, lambda: f64, n: u32) -> Result<(f64, f64)> {
    if !(g0 > 0.5 && g0 < 1.0) {
        return Err(Error::domain("1/2 < g0 < 1", format!("g0={g0}")));
    }
    positive("lambda > 0", lambda)?;
    if n == 0 {
        return Err(Error::domain("moment order n >= 1", "n=0"));
    }
    let fact: f64 = (1..=n).map(f64::from).product();
    let base = (1.0 - g0) * fact / lambda.powi(n as i32);
    Ok((base * (-2.0 * (1.0 - g0)).exp(), base / (2.0 * g0 - 1.0)))
}

impl ServiceModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `α = ∫₀^∞ (1 − G(v)) dv`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Mass of the atom at the origin, `G(0)`.
    pub fn atom_at_zero(&self) -> f64 {
        self.cdf(0.0)
    }

    /// Discontinuities of `G` on `t > 0`.
    pub fn jump_points(&self) -> Vec<f64> {
        match self.spec {
            ModelSpec::Deterministic { alpha } => vec![alpha],
            _ => Vec::new(),
        }
    }

    pub fn has_density(&self) -> bool {
        !matches!(self.spec, ModelSpec::Deterministic { .. })
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        1.0 - self.survival(t)
    }

    /// `1 − G(t)`, computed directly so the tail keeps relative precision.
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        match self.spec {
            ModelSpec::Deterministic { alpha } => {
                if t < alpha {
                    1.0
                } else {
                    0.0
                }
            }
            ModelSpec::Exponential { alpha } => (-t / alpha).exp(),
            ModelSpec::BetaConstant(p) => {
                let a = p.lambda + p.beta;
                if a <= 0.0 {
                    return 0.0;
                }
                let c = beta_constant_scale(&p);
                c / (1.0 + (-p.rho).exp() * (a * t).exp_m1())
            }
            ModelSpec::ZeroBeta { lambda, g0 } => (1.0 - g0) * (-lambda * t).exp(),
            ModelSpec::BetaLambdaVariance { lambda } => {
                let x = (-2.0 * lambda * t).exp();
                let r = (-(-2.0 * lambda * t).exp_m1()).sqrt();
                x / (2.0 * (1.0 + r))
            }
            ModelSpec::ImplicitConstantVariance { lambda, g0 } => {
                constant_variance_log_survival(lambda, g0, t).exp()
            }
            ModelSpec::ImplicitVariance(p) => implicit_variance_log_survival(&p, t).exp(),
        }
    }

    /// Density of the absolutely continuous part; `None` where it does not
    /// exist (deterministic law, or an infinite right limit at 0).
    pub fn density(&self, t: f64) -> Option<f64> {
        if t < 0.0 {
            return Some(0.0);
        }
        if !self.has_density() {
            return None;
        }
        let s = self.survival(t);
        if s == 0.0 {
            return Some(0.0);
        }
        let g = self.raw_hazard(t, s) * s;
        g.is_finite().then_some(g)
    }

    /// `h(t) = g(t)/(1 − G(t))`.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        if !self.has_density() {
            return Err(Error::Capability {
                model: self.label.clone(),
                what: "a density (hazard undefined)",
            });
        }
        let s = self.survival(t);
        if s <= 0.0 {
            return Err(Error::UndefinedHazard { t });
        }
        let h = self.raw_hazard(t, s);
        if !h.is_finite() {
            return Err(Error::Capability {
                model: self.label.clone(),
                what: "a finite density at this time",
            });
        }
        Ok(h)
    }

    /// Closed-form hazard given the survival value `s = 1 − G(t) > 0`.
    fn raw_hazard(&self, t: f64, s: f64) -> f64 {
        match self.spec {
            ModelSpec::Deterministic { .. } => f64::NAN,
            ModelSpec::Exponential { alpha } => 1.0 / alpha,
            ModelSpec::ZeroBeta { lambda, .. } => lambda,
            ModelSpec::BetaConstant(p) => {
                let a = p.lambda + p.beta;
                a / (1.0 + p.rho.exp_m1() * (-a * t).exp())
            }
            ModelSpec::ImplicitConstantVariance { lambda, .. } => lambda / (1.0 - 2.0 * s),
            ModelSpec::BetaLambdaVariance { lambda } => {
                let r = (-(-2.0 * lambda * t).exp_m1()).sqrt();
                lambda + lambda / r
            }
            ModelSpec::ImplicitVariance(p) => p.beta + p.lambda / (1.0 - 2.0 * s),
        }
    }

    /// `E[Sⁿ] = ∫₀^∞ n tⁿ⁻¹ (1 − G(t)) dt`.
    pub fn moment(&self, n: u32, spec: &QuadratureSpec) -> Result<f64> {
        if n == 0 {
            return Err(Error::domain("moment order n >= 1", "n=0"));
        }
        let nf = f64::from(n);
        let f = |t: f64| nf * t.powi(n as i32 - 1) * self.survival(t);
        let decay = |t: f64| nf * t.powi(n as i32) * self.survival(t);
        integrate_to_infinity(f, decay, self.mean.max(1e-3), &self.jump_points(), spec)
    }

    /// Inverse-CDF sample for a uniform variate `u ∈ [0, 1)`.
    pub fn sample(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::domain("uniform variate in [0, 1)", format!("u={u}")));
        }
        if u < self.atom_at_zero() {
            return Ok(0.0);
        }
        let t = match self.spec {
            ModelSpec::Deterministic { alpha } => alpha,
            ModelSpec::Exponential { alpha } => -alpha * (-u).ln_1p(),
            ModelSpec::ZeroBeta { lambda, g0 } => ((1.0 - g0) / (1.0 - u)).ln() / lambda,
            ModelSpec::BetaConstant(p) => {
                let a = p.lambda + p.beta;
                let c = beta_constant_scale(&p);
                let x = (c / (1.0 - u) - 1.0) * p.rho.exp();
                x.ln_1p() / a
            }
            ModelSpec::BetaLambdaVariance { lambda } => {
                let r = 2.0 * u - 1.0;
                -(-r * r).ln_1p() / (2.0 * lambda)
            }
            ModelSpec::ImplicitConstantVariance { lambda, g0 } => {
                -(((1.0 - u) / (1.0 - g0)).ln() + 2.0 * (u - g0)) / lambda
            }
            ModelSpec::ImplicitVariance(p) => implicit_variance_time(&p, u),
        };
        Ok(t.max(0.0))
    }

    fn tail_integral_mean(&self) -> Result<f64> {
        let spec = QuadratureSpec {
            abs_tol: 1e-12,
            ..QuadratureSpec::default()
        };
        integrate_to_infinity(
            |t| self.survival(t),
            |t| t * self.survival(t),
            1.0,
            &[],
            &spec,
        )
    }

    /// Samples the defining relation on a G-grid and rejects the model if it
    /// is not strictly monotone there.
    fn verify_implicit_monotone(&self) -> Result<()> {
        let ModelSpec::ImplicitVariance(p) = self.spec else {
            return Ok(());
        };
        let n = 64;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..n {
            let g = p.g0 + (1.0 - p.g0) * (i as f64) / (n as f64);
            let t = implicit_variance_time(&p, g);
            if !t.is_finite() || t < prev {
                return Err(Error::Numeric(format!(
                    "implicit relation not monotone on [{}, 1): t({g}) = {t} after {prev}",
                    p.g0
                )));
            }
            prev = t;
        }
        Ok(())
    }
}

/// `(1 − e^{−ρ})(λ + β)/λ`, the continuous mass of the beta-constant law.
fn beta_constant_scale(p: &BetaConstantFamilyParams) -> f64 {
    let c = -(-p.rho).exp_m1() * (p.lambda + p.beta) / p.lambda;
    c.min(1.0)
}

/// `ln(1 − G(t))` for the constant-variance law.
///
/// With `u = ln(1 − G)` the relation reads `u − 2eᵘ = c(t)`,
/// `c(t) = ln(1−g₀) − 2(1−g₀) − λt`, whose left side is increasing for
/// `eᵘ < 1/2`. The root lies in `[c(t), ln(1 − g₀)]`.
fn constant_variance_log_survival(lambda: f64, g0: f64, t: f64) -> f64 {
    let u0 = (1.0 - g0).ln();
    if t == 0.0 {
        return u0;
    }
    let c = u0 - 2.0 * (1.0 - g0) - lambda * t;
    let f = |u: f64| u - 2.0 * u.exp() - c;
    // The bracket is valid by construction; fall back to the asymptote if
    // the solver reports otherwise.
    find_root_with(f, c, u0, &ROOT).unwrap_or(c)
}

/// Elapsed time at which the implicit variance law reaches `G = g`.
fn implicit_variance_time(p: &ImplicitVarianceParams, g: f64) -> f64 {
    let (l, b) = (p.lambda, p.beta);
    let d = |g: f64| b * (2.0 * g - 1.0) + l;
    -((1.0 - g) / (1.0 - p.g0)).ln() / (b + l) - l / (b * (b + l)) * (d(g) / d(p.g0)).ln()
}

/// `ln(1 − G(t))` for the implicit variance law with constant `β ≠ 0`.
///
/// The separable solution, written in `u = ln(1 − G)`, is
/// `ψ(u) = (u − u₀)/(β+λ) + λ/(β(β+λ))·ln(D(u)/D₀) + t = 0` with
/// `D(u) = β(1 − 2eᵘ) + λ`. `ψ' = (1 − 2eᵘ)/D(u) ≥ 0` on `u ≤ ln(1/2)`.
fn implicit_variance_log_survival(p: &ImplicitVarianceParams, t: f64) -> f64 {
    let u0 = (1.0 - p.g0).ln();
    if t == 0.0 {
        return u0;
    }
    let (l, b) = (p.lambda, p.beta);
    let d0 = b * (2.0 * p.g0 - 1.0) + l;
    let psi = |u: f64| {
        let d = b * (1.0 - 2.0 * u.exp()) + l;
        (u - u0) / (b + l) + l / (b * (b + l)) * (d / d0).ln() + t
    };
    let mut step = (b + l) * t + 1.0;
    let mut lo = u0 - step;
    while psi(lo) > 0.0 && step < 1e6 {
        step *= 2.0;
        lo = u0 - step;
    }
    find_root_with(psi, lo, u0, &ROOT).unwrap_or(lo)
}
