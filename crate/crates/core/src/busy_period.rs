//! Busy-period length distribution.
//!
//! For the constant-β Riccati family the busy period is exponential with an
//! atom at the origin:
//!
//! ```text
//! B(t) = 1 − ((λ+β)/λ)(1 − e^{−ρ}) e^{−e^{−ρ}(λ+β)t}
//! ```
//!
//! For a general `β(t)` it is the convolution series
//!
//! ```text
//! B = F * Σₙ (λ(1 − G(0)))ⁿ k^{*n},   k(t) = e^{−λt − ∫₀ᵗ β},
//! F(t) = 1 − (1 − G(0))(k(t) + λ∫₀ᵗ k),
//! ```
//!
//! evaluated here on a uniform grid, with `k^{*0}` the unit point mass.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    convolve, integrate, integrate_to_infinity, uniform_grid, GridFunction, QuadratureSpec,
};
use crate::service_models::{BetaConstantFamilyParams, ServiceModel};

/// Newest-term size below which the series stops early.
pub const SERIES_STOP: f64 = 1e-8;

/// Tail mass `1 − B(horizon)` tolerated when integrating a gridded law.
pub const GRID_TAIL_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BusyPeriodSource {
    ClosedForm,
    ConvolutionSeries,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    ClosedForm(BetaConstantFamilyParams),
    Series(GridFunction),
}

/// A busy-period CDF, either in closed form or tabulated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BusyPeriodLaw {
    repr: Repr,
    /// Number of series terms actually summed (0 for the closed form).
    pub series_terms: usize,
    /// Sup-norm of the last series term included (0 for the closed form).
    pub last_term: f64,
}

/// Options for [`busy_cdf_series`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    /// Maximum number of convolution powers (`n ≥ 1`) to sum.
    pub n_terms: usize,
    /// Error out if the series is cut off with its last term above this.
    pub max_last_term: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            n_terms: 200,
            max_last_term: 1e-3,
        }
    }
}

/// Grid step `min(mean/200, horizon/2000)`.
pub fn default_step(mean: f64, horizon: f64) -> f64 {
    let by_horizon = horizon / 2000.0;
    if mean > 0.0 {
        (mean / 200.0).min(by_horizon)
    } else {
        by_horizon
    }
}

fn closed_form_cdf(p: &BetaConstantFamilyParams, t: f64) -> f64 {
    let a = p.lambda + p.beta;
    let mass = (a / p.lambda) * -(-p.rho).exp_m1();
    1.0 - mass.min(1.0) * (-(-p.rho).exp() * a * t).exp()
}

/// `B^β(t)` for constant β.
pub fn busy_cdf_constant_beta(lambda: f64, rho: f64, beta: f64, t: f64) -> Result<f64> {
    let p = BetaConstantFamilyParams { lambda, rho, beta };
    p.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain("t >= 0", format!("{t}")));
    }
    Ok(closed_form_cdf(&p, t))
}

/// The closed-form law for constant β.
pub fn closed_form_law(lambda: f64, rho: f64, beta: f64) -> Result<BusyPeriodLaw> {
    let p = BetaConstantFamilyParams { lambda, rho, beta };
    p.validate()?;
    Ok(BusyPeriodLaw {
        repr: Repr::ClosedForm(p),
        series_terms: 0,
        last_term: 0.0,
    })
}

/// Busy-period CDF from the convolution series, on the uniform `grid`.
///
/// `beta` must keep `∫₀ᵗ β / t` inside `[−λ, λ/(e^ρ − 1)]`, with `ρ = λ·mean`
/// taken from `model`. Only `G(0)` is read from the model otherwise.
pub fn busy_cdf_series<B: Fn(f64) -> f64>(
    model: &ServiceModel,
    lambda: f64,
    beta: B,
    grid: &[f64],
    opts: &SeriesOptions,
) -> Result<BusyPeriodLaw> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::domain("lambda > 0", format!("{lambda}")));
    }
    if opts.n_terms == 0 {
        return Err(Error::domain("n_terms >= 1", "0"));
    }
    let probe = GridFunction::new(grid.to_vec(), vec![0.0; grid.len()])?;
    let h = probe.uniform_step()?;
    let n = grid.len();

    // ∫₀ᵗ β on the grid, one adaptive cell at a time.
    let spec = QuadratureSpec {
        abs_tol: 1e-12,
        ..QuadratureSpec::default()
    };
    let mut beta_int = vec![0.0; n];
    for i in 1..n {
        beta_int[i] = beta_int[i - 1] + integrate(&beta, grid[i - 1], grid[i], &spec)?;
    }
    let rho = lambda * model.mean();
    let hi = if rho > 0.0 { lambda / rho.exp_m1() } else { f64::INFINITY };
    for i in 1..n {
        let avg = beta_int[i] / grid[i];
        let slack = 1e-9 * lambda.max(hi.min(1e300));
        if avg < -lambda - slack || avg > hi + slack {
            return Err(Error::domain(
                "-lambda <= (1/t)∫β <= lambda/(e^rho - 1)",
                format!("average beta {avg} at t = {}", grid[i]),
            ));
        }
    }

    let c = 1.0 - model.atom_at_zero();
    let kernel = GridFunction::new(
        grid.to_vec(),
        grid.iter()
            .zip(&beta_int)
            .map(|(&t, &b)| (-lambda * t - b).exp())
            .collect(),
    )?;
    // Trapezoid cumulative integral of k.
    let mut k_int = vec![0.0; n];
    for i in 1..n {
        k_int[i] = k_int[i - 1] + 0.5 * h * (kernel.values[i - 1] + kernel.values[i]);
    }
    let prefactor = GridFunction::new(
        grid.to_vec(),
        kernel
            .values
            .iter()
            .zip(&k_int)
            .map(|(&k, &ki)| 1.0 - c * (k + lambda * ki))
            .collect(),
    )?;

    // Σ (λc)ⁿ k^{*n}, starting from the identity.
    let ratio = lambda * c;
    let mut sum = GridFunction::delta(h, n);
    let mut power = GridFunction::delta(h, n);
    let mut terms = 0;
    let mut last_term = 0.0;
    if ratio > 0.0 {
        for _ in 0..opts.n_terms {
            power = convolve(&power, &kernel)?;
            power.scale(ratio);
            terms += 1;
            last_term = power.sup_norm();
            sum.add_scaled(1.0, &power)?;
            if last_term < SERIES_STOP {
                break;
            }
        }
        if last_term >= SERIES_STOP && last_term > opts.max_last_term {
            return Err(Error::SeriesTruncation {
                terms,
                last_term,
                tolerance: opts.max_last_term,
            });
        }
    }
    let cdf = convolve(&prefactor, &sum)?;
    Ok(BusyPeriodLaw {
        repr: Repr::Series(cdf),
        series_terms: terms,
        last_term,
    })
}

/// Uniform grid `0, h, …` covering `[0, horizon]`.
pub fn series_grid(horizon: f64, step: f64) -> Vec<f64> {
    let n = (horizon / step).round() as usize + 1;
    uniform_grid(step, n)
}

impl BusyPeriodLaw {
    pub fn source(&self) -> BusyPeriodSource {
        match self.repr {
            Repr::ClosedForm(_) => BusyPeriodSource::ClosedForm,
            Repr::Series(_) => BusyPeriodSource::ConvolutionSeries,
        }
    }

    pub fn atom_at_zero(&self) -> f64 {
        self.cdf(0.0)
    }

    /// `B(t)`. Gridded laws interpolate linearly and hold their last value
    /// beyond the horizon.
    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match &self.repr {
            Repr::ClosedForm(p) => closed_form_cdf(p, t),
            Repr::Series(g) => {
                let h = g.grid[1] - g.grid[0];
                let x = t / h;
                let i = x.floor() as usize;
                if i + 1 >= g.len() {
                    return *g.values.last().unwrap_or(&1.0);
                }
                let w = x - i as f64;
                g.values[i] * (1.0 - w) + g.values[i + 1] * w
            }
        }
    }

    /// The tabulated values for a series law.
    pub fn grid_values(&self) -> Option<&GridFunction> {
        match &self.repr {
            Repr::Series(g) => Some(g),
            Repr::ClosedForm(_) => None,
        }
    }

    pub fn horizon(&self) -> f64 {
        match &self.repr {
            Repr::ClosedForm(_) => f64::INFINITY,
            Repr::Series(g) => *g.grid.last().unwrap_or(&0.0),
        }
    }
}

/// Mean busy period `∫₀^∞ (1 − B(t)) dt`.
pub fn busy_mean(law: &BusyPeriodLaw, spec: &QuadratureSpec) -> Result<f64> {
    match &law.repr {
        Repr::ClosedForm(p) => {
            if p.lambda + p.beta <= 0.0 {
                return Ok(0.0);
            }
            let tail = |t: f64| 1.0 - closed_form_cdf(p, t);
            let scale = 1.0 / ((-p.rho).exp() * (p.lambda + p.beta));
            integrate_to_infinity(tail, |t| t * tail(t), scale, &[], spec)
        }
        Repr::Series(g) => {
            let h = g.uniform_step()?;
            let end = 1.0 - *g.values.last().unwrap_or(&1.0);
            if end > GRID_TAIL_TOLERANCE {
                return Err(Error::Numeric(format!(
                    "busy-period horizon {} too short: 1 - B = {end:e}",
                    law.horizon()
                )));
            }
            let tail: Vec<f64> = g.values.iter().map(|v| 1.0 - v).collect();
            let inner: f64 = tail[1..tail.len() - 1].iter().sum();
            Ok(h * (0.5 * (tail[0] + tail[tail.len() - 1]) + inner))
        }
    }
}
