//! One function per subcommand. Each returns the primary output, an optional
//! JSON sidecar, and whether the run should exit with status 1.

use mginf_core::busy_period::{
    busy_cdf_series, busy_mean, closed_form_law, default_step, series_grid, BusyPeriodLaw,
    SeriesOptions,
};
use mginf_core::monotonicity::{
    check_mean_monotone, check_variance_monotone, riccati_beta, MonotonicityReport,
};
use mginf_core::numerics::QuadratureSpec;
use mginf_core::simulator::{
    compare_busy_period, compare_curve, simulate_busy_period, simulate_state, z_score,
    BusyPeriodComparison, CurveComparison, SimConfig, SimEstimate, StateEstimates,
};
use mginf_core::transient::{busy_origin_moments, busy_origin_pmfs};
use mginf_core::ModelSpec;
use serde::Serialize;

use crate::output::{Cell, Table};
use crate::scenario::{BusyMethod, Kind, Resolved};
use crate::CliError;

pub enum Body {
    Table(Table),
    Json(String),
}

pub struct Outcome {
    pub body: Body,
    pub sidecar: Option<String>,
    /// Condition violated or comparison failed.
    pub failed: bool,
}

impl Outcome {
    fn table(t: Table) -> Self {
        Outcome {
            body: Body::Table(t),
            sidecar: None,
            failed: false,
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn dist(r: &Resolved) -> Result<Outcome, CliError> {
    let m = &r.model;
    let mut table = Table::new(&["t", "G", "g", "h"]);
    for &t in &r.grid {
        let g = if m.has_density() { m.density(t) } else { None };
        let h = m.hazard(t).ok().filter(|h| h.is_finite());
        table.push(vec![t.into(), m.cdf(t).into(), g.into(), h.into()]);
    }
    Ok(Outcome::table(table))
}

pub fn transient(r: &Resolved) -> Result<Outcome, CliError> {
    let pmfs = busy_origin_pmfs(&r.model, r.lambda, &r.grid, r.n_max())?;
    let mut table = Table::new(&["t", "n", "p"]);
    for pmf in &pmfs {
        for (n, &p) in pmf.probs.iter().enumerate() {
            table.push(vec![pmf.t.into(), Cell::Int(n as u64), p.into()]);
        }
        table.push(vec![pmf.t.into(), "truncation_mass".into(), pmf.truncation_mass.into()]);
    }
    Ok(Outcome::table(table))
}

pub fn moments(r: &Resolved) -> Result<Outcome, CliError> {
    let (mean, var) = busy_origin_moments(&r.model, r.lambda, &r.grid, &QuadratureSpec::default())?;
    let mut table = Table::new(&["t", "mean", "variance"]);
    for ((&t, &m), &v) in r.grid.iter().zip(&mean.values).zip(&var.values) {
        table.push(vec![t.into(), m.into(), v.into()]);
    }
    Ok(Outcome::table(table))
}

pub fn check_monotone(r: &Resolved, kind: Kind) -> Result<Outcome, CliError> {
    // The conditions are stated for t > 0.
    let grid: Vec<f64> = r.grid.iter().copied().filter(|&t| t > 0.0).collect();
    if grid.is_empty() {
        return Err(CliError::Validation("check-monotone needs grid points with t > 0".into()));
    }
    let report: MonotonicityReport = match kind {
        Kind::Mean => check_mean_monotone(&r.model, r.lambda, &grid)?,
        Kind::Variance => check_variance_monotone(&r.model, r.lambda, &grid)?,
    };
    Ok(Outcome {
        failed: !report.condition_holds_everywhere,
        body: Body::Json(to_json(&report)),
        sidecar: None,
    })
}

#[derive(Serialize)]
struct BusyPeriodMeta {
    source: mginf_core::busy_period::BusyPeriodSource,
    atom: f64,
    mean: Option<f64>,
    series_terms: usize,
    last_term: f64,
    step: Option<f64>,
    horizon: Option<f64>,
}

fn busy_law(r: &Resolved) -> Result<(BusyPeriodLaw, Option<f64>), CliError> {
    let settings = &r.scenario.busy_period;
    let beta_constant = match r.model.spec() {
        ModelSpec::BetaConstant(p) => Some(*p),
        _ => None,
    };
    let method = settings.method.unwrap_or(if beta_constant.is_some() {
        BusyMethod::ClosedForm
    } else {
        BusyMethod::Series
    });
    match method {
        BusyMethod::ClosedForm => {
            let p = beta_constant.ok_or_else(|| {
                CliError::Validation(
                    "the closed-form busy period needs a beta-constant model".into(),
                )
            })?;
            if p.lambda != r.lambda {
                return Err(CliError::Validation(format!(
                    "closed-form busy period: scenario lambda {} differs from the model's {}",
                    r.lambda, p.lambda
                )));
            }
            Ok((closed_form_law(p.lambda, p.rho, p.beta)?, None))
        }
        BusyMethod::Series => {
            let t_max = r.grid.last().copied().unwrap_or(0.0);
            let horizon = settings.horizon.unwrap_or(t_max).max(t_max);
            if horizon.is_nan() || horizon <= 0.0 {
                return Err(CliError::Validation("series busy period needs a horizon > 0".into()));
            }
            let step = settings.step.unwrap_or_else(|| default_step(r.model.mean(), horizon));
            if !(step > 0.0 && step.is_finite()) {
                return Err(CliError::Validation(format!("step > 0 violated (got {step})")));
            }
            let grid = series_grid(horizon, step);
            let mut opts = SeriesOptions::default();
            if let Some(n) = settings.n_terms {
                opts.n_terms = n;
            }
            let law = match settings.beta {
                Some(b) => busy_cdf_series(&r.model, r.lambda, |_| b, &grid, &opts)?,
                None => {
                    for &t in &grid {
                        r.model.hazard(t)?;
                    }
                    let beta = |t: f64| riccati_beta(&r.model, r.lambda, t).unwrap_or(f64::NAN);
                    busy_cdf_series(&r.model, r.lambda, beta, &grid, &opts)?
                }
            };
            Ok((law, Some(step)))
        }
    }
}

pub fn busy_period(r: &Resolved) -> Result<Outcome, CliError> {
    let (law, step) = busy_law(r)?;
    let mut table = Table::new(&["t", "B"]);
    for &t in &r.grid {
        table.push(vec![t.into(), law.cdf(t).into()]);
    }
    let meta = BusyPeriodMeta {
        source: law.source(),
        atom: law.atom_at_zero(),
        mean: busy_mean(&law, &QuadratureSpec::default()).ok(),
        series_terms: law.series_terms,
        last_term: law.last_term,
        step,
        horizon: step.map(|_| law.horizon()),
    };
    Ok(Outcome {
        body: Body::Table(table),
        sidecar: Some(to_json(&meta)),
        failed: false,
    })
}

fn sim_config(r: &Resolved) -> Result<SimConfig, CliError> {
    Ok(SimConfig {
        lambda: r.lambda,
        replications: r.replications(),
        seed: r.seed()?,
        horizon: r.horizon(),
        t_grid: r.grid.clone(),
    })
}

fn push_estimate(table: &mut Table, t: f64, statistic: &str, e: &SimEstimate) {
    table.push(vec![
        t.into(),
        statistic.into(),
        e.value.into(),
        e.std_error.into(),
        Cell::Int(e.replications),
    ]);
}

pub fn simulate(r: &Resolved) -> Result<Outcome, CliError> {
    let config = sim_config(r)?;
    let est: StateEstimates = simulate_state(&config, &r.model)?;
    let mut table = Table::new(&["t", "statistic", "value", "std_error", "replications"]);
    for p in &est.points {
        push_estimate(&mut table, p.t, "mean", &p.mean);
        push_estimate(&mut table, p.t, "variance", &p.variance);
        for (n, e) in p.pmf.iter().enumerate() {
            push_estimate(&mut table, p.t, &format!("p{n}"), e);
        }
    }
    Ok(Outcome::table(table))
}

/// A misprinted closed form, scored against simulation.
#[derive(Serialize)]
struct FormulaCheck {
    name: &'static str,
    formula: &'static str,
    note: &'static str,
    points: Vec<FormulaPoint>,
    max_abs_z: f64,
}

#[derive(Serialize)]
struct FormulaPoint {
    t: f64,
    formula_value: f64,
    engine_value: f64,
    estimate: f64,
    std_error: f64,
    z: f64,
}

#[derive(Serialize)]
struct BusyPeriodSection {
    #[serde(flatten)]
    comparison: BusyPeriodComparison,
    ks_level: f64,
    ks_critical: f64,
    passed: bool,
}

#[derive(Serialize)]
struct CompareReport {
    model: String,
    lambda: f64,
    seed: u64,
    replications: u64,
    z_threshold: f64,
    mean: CurveComparison,
    variance: CurveComparison,
    busy_period: Option<BusyPeriodSection>,
    formula_checks: Vec<FormulaCheck>,
    passed: bool,
}

/// Variance of the M|M|∞ occupancy as it is commonly misprinted:
/// `ρ(1 − e^{−t/α}) + e^{−t/λ} + e^{−2t/α}`. Equals 2 at t = 0.
pub fn misprinted_mm_variance(lambda: f64, alpha: f64, t: f64) -> f64 {
    let rho = lambda * alpha;
    rho * -(-t / alpha).exp_m1() + (-t / lambda).exp() + (-2.0 * t / alpha).exp()
}

/// Beta-constant variance with the survival term squared added rather than
/// subtracted, as it is commonly misprinted.
pub fn misprinted_beta_constant_variance(lambda: f64, rho: f64, beta: f64, t: f64) -> f64 {
    let a = lambda + beta;
    let s = -(-rho).exp_m1() * a / (lambda * (-rho).exp() * (a * t).exp_m1() + lambda);
    rho - ((rho.exp() - 1.0) * (-a * t).exp()).ln_1p() + s + s * s
}

fn formula_checks(r: &Resolved, variance: &CurveComparison) -> Vec<FormulaCheck> {
    let check = |name, formula, note, f: &dyn Fn(f64) -> f64| {
        let points: Vec<FormulaPoint> = variance
            .points
            .iter()
            .map(|p| {
                let v = f(p.t);
                let e = SimEstimate {
                    value: p.estimate,
                    std_error: p.std_error,
                    replications: 0,
                };
                FormulaPoint {
                    t: p.t,
                    formula_value: v,
                    engine_value: p.analytic,
                    estimate: p.estimate,
                    std_error: p.std_error,
                    z: z_score(v, &e),
                }
            })
            .collect();
        let max_abs_z = points.iter().fold(0.0_f64, |m, p| m.max(p.z.abs()));
        FormulaCheck {
            name,
            formula,
            note,
            points,
            max_abs_z,
        }
    };
    let lambda = r.lambda;
    match *r.model.spec() {
        ModelSpec::Exponential { alpha } => vec![check(
            "mm-inf-variance-as-printed",
            "rho(1 - exp(-t/alpha)) + exp(-t/lambda) + exp(-2t/alpha)",
            "gives V(0) = 2 although V(0) = G(0)(1 - G(0)) = 0; the engine uses \
             rho(1 - exp(-t/alpha)) + exp(-t/alpha) - exp(-2t/alpha)",
            &|t| misprinted_mm_variance(lambda, alpha, t),
        )],
        ModelSpec::BetaConstant(p) if p.lambda == lambda => vec![check(
            "beta-constant-variance-as-printed",
            "rho - ln(1 + (e^rho - 1)e^{-(lambda+beta)t}) + S(t) + S(t)^2",
            "the survival term squared must be subtracted; the engine's value \
             corresponds to rho - ln(1 + (e^rho - 1)e^{-(lambda+beta)t}) + S(t) - S(t)^2",
            &|t| misprinted_beta_constant_variance(p.lambda, p.rho, p.beta, t),
        )],
        _ => Vec::new(),
    }
}

pub fn compare(r: &Resolved) -> Result<Outcome, CliError> {
    let settings = &r.scenario.compare;
    let z_threshold = settings.z_threshold.unwrap_or(4.0);
    let ks_level = settings.ks_level.unwrap_or(0.01);
    if z_threshold.is_nan() || z_threshold <= 0.0 {
        return Err(CliError::Validation(format!("z_threshold > 0 violated (got {z_threshold})")));
    }
    if !(ks_level > 0.0 && ks_level < 1.0) {
        return Err(CliError::Validation(format!("0 < ks_level < 1 violated (got {ks_level})")));
    }
    let config = sim_config(r)?;
    config.validate()?;
    let want_busy = settings
        .busy_period
        .unwrap_or(matches!(r.model.spec(), ModelSpec::BetaConstant(p) if p.lambda == r.lambda));
    // Validate the busy-period setup before spending time on simulation.
    let law = if want_busy { Some(busy_law(r)?.0) } else { None };

    let (mean, var) = busy_origin_moments(&r.model, r.lambda, &r.grid, &QuadratureSpec::default())?;
    let est = simulate_state(&config, &r.model)?;
    let mean = compare_curve(&mean, &est.means())?;
    let variance = compare_curve(&var, &est.variances())?;

    let busy_period = match law {
        Some(law) => {
            let sample = simulate_busy_period(&config, &r.model)?;
            let comparison = compare_busy_period(&law, &sample, &QuadratureSpec::default())?;
            let ks_critical = comparison.ks_critical(ks_level);
            let passed = comparison.atom.z.abs() <= z_threshold
                && comparison.mean.z.abs() <= z_threshold
                && comparison.ks_statistic <= ks_critical;
            Some(BusyPeriodSection {
                comparison,
                ks_level,
                ks_critical,
                passed,
            })
        }
        None => None,
    };
    let passed = mean.max_abs_z <= z_threshold
        && variance.max_abs_z <= z_threshold
        && busy_period.as_ref().is_none_or(|b| b.passed);
    let report = CompareReport {
        model: r.model.label().to_string(),
        lambda: r.lambda,
        seed: config.seed,
        replications: config.replications,
        z_threshold,
        formula_checks: formula_checks(r, &variance),
        mean,
        variance,
        busy_period,
        passed,
    };
    Ok(Outcome {
        body: Body::Json(to_json(&report)),
        sidecar: None,
        failed: !passed,
    })
}
