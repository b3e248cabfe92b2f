//! Scenario files and flag overrides.

use std::path::Path;

use mginf_core::numerics::linspace;
use mginf_core::transient::default_n_max;
use mginf_core::{ModelSpec, ServiceModel};
use serde::Deserialize;

use crate::CliError;

/// A time grid written as `start:stop:points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, points] = parts[..] else {
            return Err(format!("grid must be start:stop:points, got {s:?}"));
        };
        let num = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad grid bound {x:?}: {e}"))
        };
        let points = points
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("bad grid point count {points:?}: {e}"))?;
        let grid = GridSpec {
            start: num(start)?,
            stop: num(stop)?,
            points,
        };
        grid.validate()?;
        Ok(grid)
    }
}

impl<'de> Deserialize<'de> for GridSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl GridSpec {
    fn validate(&self) -> Result<(), String> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err("grid bounds must be finite".into());
        }
        if self.start < 0.0 {
            return Err(format!("grid start must be >= 0, got {}", self.start));
        }
        if self.stop < self.start {
            return Err(format!("grid stop {} is before start {}", self.stop, self.start));
        }
        if self.points == 0 {
            return Err("grid needs at least one point".into());
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Mean,
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BusyMethod {
    ClosedForm,
    Series,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    pub replications: Option<u64>,
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusyPeriodSettings {
    pub method: Option<BusyMethod>,
    /// Series only: grid horizon and step.
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub n_terms: Option<usize>,
    /// Series only: a constant β instead of the model's own `h − λG`.
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSettings {
    pub z_threshold: Option<f64>,
    pub ks_level: Option<f64>,
    /// Also simulate busy periods; on by default for the beta-constant family.
    pub busy_period: Option<bool>,
}

/// One experiment record. Every field may also come from a flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: Option<ModelSpec>,
    pub lambda: Option<f64>,
    pub grid: Option<GridSpec>,
    pub n_max: Option<usize>,
    pub kind: Option<Kind>,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub busy_period: BusyPeriodSettings,
    #[serde(default)]
    pub compare: CompareSettings,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("bad scenario {}: {e}", path.display())))
    }
}

/// A scenario with its model built and its grid expanded.
pub struct Resolved {
    pub scenario: Scenario,
    pub model: ServiceModel,
    pub lambda: f64,
    pub grid: Vec<f64>,
}

impl Resolved {
    pub fn new(scenario: Scenario) -> Result<Self, CliError> {
        let spec = scenario
            .model
            .ok_or_else(|| CliError::Validation("scenario has no model".into()))?;
        let model = spec.build()?;
        let lambda = scenario
            .lambda
            .or(spec.lambda())
            .ok_or_else(|| CliError::Validation("lambda is required for this model".into()))?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(CliError::Validation(format!("lambda > 0 violated (got {lambda})")));
        }
        let grid = scenario
            .grid
            .ok_or_else(|| CliError::Validation("a time grid is required (--grid start:stop:points)".into()))?
            .times();
        Ok(Resolved {
            scenario,
            model,
            lambda,
            grid,
        })
    }

    pub fn rho(&self) -> f64 {
        self.lambda * self.model.mean()
    }

    pub fn n_max(&self) -> usize {
        self.scenario.n_max.unwrap_or_else(|| default_n_max(self.rho()))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.scenario.sim.seed.ok_or_else(|| {
            CliError::Validation("a seed is required (--seed N or sim.seed)".into())
        })
    }

    pub fn replications(&self) -> u64 {
        self.scenario.sim.replications.unwrap_or(10_000)
    }

    pub fn horizon(&self) -> f64 {
        let t_max = self.grid.last().copied().unwrap_or(0.0);
        self.scenario.sim.horizon.unwrap_or(t_max)
    }
}
