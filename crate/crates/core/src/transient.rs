//! State distribution, mean and variance of the M|G|∞ queue.
//!
//! With `Λ̃(t) = ∫₀ᵗ (1 − G(v)) dv`, the number of busy servers seen from an
//! empty origin is Poisson with mean `λΛ̃(t)`. Seen from the start of a busy
//! period it is that Poisson count plus an independent indicator that the
//! initiating customer is still in service, which has probability `1 − G(t)`.

use serde::Serialize;
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::numerics::{check_time_grid, cumulative_tail_integral, QuadratureSpec};
use crate::service_models::ServiceModel;

/// Largest truncation mass a pmf may carry before it is rejected.
pub const TRUNCATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Empty,
    BusyPeriodStart,
}

/// `P[N(t) = n]` for `n = 0..=n_max` at a single time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransientPmf {
    pub t: f64,
    pub origin: Origin,
    pub probs: Vec<f64>,
    /// `P[N(t) > n_max]`, evaluated from the regularised incomplete gamma
    /// function rather than as `1 − Σ probs`.
    pub truncation_mass: f64,
}

impl TransientPmf {
    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// `Σ n pₙ` over the retained states.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// `Σ n² pₙ − (Σ n pₙ)²` over the retained states.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let m2: f64 = self
            .probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n * n) as f64 * p)
            .sum();
        m2 - m * m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentKind {
    Mean,
    Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: MomentKind,
}

/// Default truncation level `⌈ρ + 12√ρ⌉ + 20`.
pub fn default_n_max(rho: f64) -> usize {
    (rho + 12.0 * rho.sqrt()).ceil() as usize + 20
}

/// Poisson(`mean`) probabilities for `0..=n_max` and `P[X > n_max]`.
///
/// Terms use the recurrence `ln pₙ₊₁ = ln pₙ + ln(mean) − ln(n + 1)`, so no
/// factorial or power is ever formed.
fn poisson(mean: f64, n_max: usize) -> (Vec<f64>, f64) {
    let mut probs = Vec::with_capacity(n_max + 1);
    if mean == 0.0 {
        probs.push(1.0);
        probs.resize(n_max + 1, 0.0);
        return (probs, 0.0);
    }
    let ln_mean = mean.ln();
    let mut lp = -mean;
    for n in 0..=n_max {
        if n > 0 {
            lp += ln_mean - (n as f64).ln();
        }
        probs.push(lp.exp());
    }
    (probs, poisson_tail(mean, n_max))
}

/// `P[X > k]` for `X ~ Poisson(mean)`, i.e. `P(k + 1, mean)`.
fn poisson_tail(mean: f64, k: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    gamma_lr(k as f64 + 1.0, mean).clamp(0.0, 1.0)
}

fn check_inputs(lambda: f64, t: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::domain("lambda > 0", format!("{lambda}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain("t >= 0", format!("{t}")));
    }
    Ok(())
}

fn check_truncation(pmf: TransientPmf) -> Result<TransientPmf> {
    if pmf.truncation_mass > TRUNCATION_TOLERANCE {
        return Err(Error::Truncation {
            mass: pmf.truncation_mass,
            n_max: pmf.n_max(),
            tolerance: TRUNCATION_TOLERANCE,
        });
    }
    Ok(pmf)
}

/// `λΛ̃(t)` at a single time.
fn poisson_mean(model: &ServiceModel, lambda: f64, t: f64, spec: &QuadratureSpec) -> Result<f64> {
    Ok(lambda * cumulative_tail_integral(model, &[t], spec)?.values[0])
}

/// `p₀ₙ(t)`: the system starts empty at time 0.
pub fn empty_origin_pmf(
    model: &ServiceModel,
    lambda: f64,
    t: f64,
    n_max: usize,
) -> Result<TransientPmf> {
    check_inputs(lambda, t)?;
    let mean = poisson_mean(model, lambda, t, &QuadratureSpec::default())?;
    let (probs, truncation_mass) = poisson(mean, n_max);
    check_truncation(TransientPmf {
        t,
        origin: Origin::Empty,
        probs,
        truncation_mass,
    })
}

/// `p₁′ₙ(t)`: a customer arrives to an empty system at time 0.
///
/// `p₁′₀ = p₀₀G(t)` and `p₁′ₙ = p₀ₙG(t) + p₀,ₙ₋₁(1 − G(t))`.
pub fn busy_origin_pmf(
    model: &ServiceModel,
    lambda: f64,
    t: f64,
    n_max: usize,
) -> Result<TransientPmf> {
    check_inputs(lambda, t)?;
    let mean = poisson_mean(model, lambda, t, &QuadratureSpec::default())?;
    Ok(busy_origin_from_parts(model, mean, t, n_max)).and_then(check_truncation)
}

fn busy_origin_from_parts(model: &ServiceModel, mean: f64, t: f64, n_max: usize) -> TransientPmf {
    let (p0, tail) = poisson(mean, n_max);
    let g = model.cdf(t);
    let s = model.survival(t);
    let probs = (0..=n_max)
        .map(|n| {
            let stay = if n == 0 { 0.0 } else { p0[n - 1] };
            p0[n] * g + stay * s
        })
        .collect();
    // P[N > n_max] = G·P[X > n_max] + (1 − G)·P[X > n_max − 1].
    let truncation_mass = g * tail + s * (tail + p0[n_max]);
    TransientPmf {
        t,
        origin: Origin::BusyPeriodStart,
        probs,
        truncation_mass,
    }
}

/// `p₁′ₙ` at every point of a grid, sharing one cumulative integral.
pub fn busy_origin_pmfs(
    model: &ServiceModel,
    lambda: f64,
    grid: &[f64],
    n_max: usize,
) -> Result<Vec<TransientPmf>> {
    check_inputs(lambda, 0.0)?;
    let tail = cumulative_tail_integral(model, grid, &QuadratureSpec::default())?;
    grid.iter()
        .zip(&tail.values)
        .map(|(&t, &v)| check_truncation(busy_origin_from_parts(model, lambda * v, t, n_max)))
        .collect()
}

/// Mean and variance of the busy-origin occupancy on a grid.
///
/// `μ(1′,t) = 1 − G(t) + λΛ̃(t)` and `V(1′,t) = λΛ̃(t) + G(t)(1 − G(t))`.
pub fn busy_origin_moments(
    model: &ServiceModel,
    lambda: f64,
    grid: &[f64],
    spec: &QuadratureSpec,
) -> Result<(MomentCurve, MomentCurve)> {
    check_inputs(lambda, 0.0)?;
    check_time_grid(grid)?;
    let tail = cumulative_tail_integral(model, grid, spec)?;
    let mut mean = Vec::with_capacity(grid.len());
    let mut var = Vec::with_capacity(grid.len());
    for (&t, &v) in grid.iter().zip(&tail.values) {
        let s = model.survival(t);
        let g = model.cdf(t);
        mean.push(s + lambda * v);
        var.push(lambda * v + g * s);
    }
    Ok((
        MomentCurve {
            grid: grid.to_vec(),
            values: mean,
            kind: MomentKind::Mean,
        },
        MomentCurve {
            grid: grid.to_vec(),
            values: var,
            kind: MomentKind::Variance,
        },
    ))
}

pub fn mean_busy_origin(model: &ServiceModel, lambda: f64, grid: &[f64]) -> Result<MomentCurve> {
    Ok(busy_origin_moments(model, lambda, grid, &QuadratureSpec::default())?.0)
}

pub fn variance_busy_origin(model: &ServiceModel, lambda: f64, grid: &[f64]) -> Result<MomentCurve> {
    Ok(busy_origin_moments(model, lambda, grid, &QuadratureSpec::default())?.1)
}

/// The `t → ∞` law: Poisson(ρ).
pub fn limit_pmf(rho: f64, n_max: usize) -> Result<TransientPmf> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::domain("rho > 0", format!("{rho}")));
    }
    let (probs, truncation_mass) = poisson(rho, n_max);
    Ok(TransientPmf {
        t: f64::INFINITY,
        origin: Origin::BusyPeriodStart,
        probs,
        truncation_mass,
    })
}
