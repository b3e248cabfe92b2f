//! Monte Carlo oracle for the M|G|∞ queue started by an arrival at time 0.
//!
//! The simulator only shares the inverse-CDF sampler with the analytic code;
//! occupancy is counted directly from sampled arrival and departure epochs.
//!
//! Replication `r` draws from a ChaCha8 stream keyed by `(seed, r)`, and all
//! aggregation is done with exact integer sums, so results are bit-identical
//! regardless of how replications are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::busy_period::{busy_mean, BusyPeriodLaw};
use crate::error::{Error, Result};
use crate::numerics::QuadratureSpec;
use crate::service_models::ServiceModel;
use crate::transient::MomentCurve;

/// Simulated busy periods shorter than this count as the atom at 0.
pub const ATOM_THRESHOLD: f64 = 1e-9;

const CHUNK: u64 = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub lambda: f64,
    pub replications: u64,
    pub seed: u64,
    pub horizon: f64,
    pub t_grid: Vec<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::domain("lambda > 0", format!("{}", self.lambda)));
        }
        if self.replications == 0 {
            return Err(Error::domain("replications >= 1", "0"));
        }
        crate::numerics::check_time_grid(&self.t_grid)?;
        let t_max = self.t_grid.last().copied().unwrap_or(0.0);
        if self.horizon.is_nan() || self.horizon < t_max {
            return Err(Error::domain(
                "horizon >= max(t_grid)",
                format!("horizon={}, max t={t_max}", self.horizon),
            ));
        }
        Ok(())
    }

    fn rng(&self, replication: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replication);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replications: u64,
}

/// Estimates at one grid time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointEstimate {
    pub t: f64,
    /// `P[N(t) = n]` for `n = 0..=max observed`.
    pub pmf: Vec<SimEstimate>,
    pub mean: SimEstimate,
    pub variance: SimEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateEstimates {
    pub points: Vec<PointEstimate>,
}

impl StateEstimates {
    pub fn means(&self) -> Vec<SimEstimate> {
        self.points.iter().map(|p| p.mean).collect()
    }

    pub fn variances(&self) -> Vec<SimEstimate> {
        self.points.iter().map(|p| p.variance).collect()
    }
}

/// Exact per-grid-point accumulators.
#[derive(Clone, Default)]
struct Tally {
    hist: Vec<u64>,
    // Σ N^k for k = 1..4.
    powers: [u128; 4],
}

impl Tally {
    fn add(&mut self, n: u32) {
        let n = n as usize;
        if self.hist.len() <= n {
            self.hist.resize(n + 1, 0);
        }
        self.hist[n] += 1;
        let x = n as u128;
        self.powers[0] += x;
        self.powers[1] += x * x;
        self.powers[2] += x * x * x;
        self.powers[3] += x * x * x * x;
    }

    fn merge(mut self, other: Tally) -> Tally {
        if self.hist.len() < other.hist.len() {
            self.hist.resize(other.hist.len(), 0);
        }
        for (a, b) in self.hist.iter_mut().zip(&other.hist) {
            *a += b;
        }
        for k in 0..4 {
            self.powers[k] += other.powers[k];
        }
        self
    }
}

fn exponential_gap<R: Rng>(rng: &mut R, lambda: f64) -> f64 {
    let u: f64 = rng.random();
    -(-u).ln_1p() / lambda
}

fn service<R: Rng>(rng: &mut R, model: &ServiceModel) -> Result<f64> {
    model.sample(rng.random())
}

/// Occupancy `N(t)` at each grid time for one sample path.
fn occupancy_path(config: &SimConfig, model: &ServiceModel, replication: u64) -> Result<Vec<u32>> {
    let grid = &config.t_grid;
    let mut counts = vec![0u32; grid.len()];
    let mut rng = config.rng(replication);
    let t_end = grid.last().copied().unwrap_or(0.0);
    let mut mark = |arrival: f64, departure: f64| {
        let start = grid.partition_point(|&t| t < arrival);
        for (j, &t) in grid.iter().enumerate().skip(start) {
            if t >= departure {
                break;
            }
            counts[j] += 1;
        }
    };
    let s0 = service(&mut rng, model)?;
    mark(0.0, s0);
    let mut arrival = 0.0;
    loop {
        arrival += exponential_gap(&mut rng, config.lambda);
        if arrival > t_end {
            break;
        }
        let s = service(&mut rng, model)?;
        mark(arrival, arrival + s);
    }
    Ok(counts)
}

fn estimate_mean(sum: f64, sum_sq: f64, r: f64) -> SimEstimate {
    let mean = sum / r;
    let var = if r > 1.0 {
        ((sum_sq - r * mean * mean) / (r - 1.0)).max(0.0)
    } else {
        0.0
    };
    SimEstimate {
        value: mean,
        std_error: (var / r).sqrt(),
        replications: r as u64,
    }
}

fn summarise(t: f64, tally: &Tally, r: u64) -> PointEstimate {
    let rf = r as f64;
    let pmf = tally
        .hist
        .iter()
        .map(|&k| estimate_mean(k as f64, k as f64, rf))
        .collect();
    let [s1, s2, s3, s4] = tally.powers.map(|x| x as f64);
    let mean = estimate_mean(s1, s2, rf);
    let m = s1 / rf;
    // Central moments from raw power sums.
    let m2 = s2 / rf - m * m;
    let m4 = s4 / rf - 4.0 * m * s3 / rf + 6.0 * m * m * s2 / rf - 3.0 * m.powi(4);
    let (var, var_se) = if r > 1 {
        let s2u = (m2 * rf / (rf - 1.0)).max(0.0);
        (s2u, ((m4 - m2 * m2).max(0.0) / rf).sqrt())
    } else {
        (0.0, 0.0)
    };
    PointEstimate {
        t,
        pmf,
        mean,
        variance: SimEstimate {
            value: var,
            std_error: var_se,
            replications: r,
        },
    }
}

/// Replicated estimates of the occupancy distribution, its mean and its
/// variance at each grid time.
pub fn simulate_state(config: &SimConfig, model: &ServiceModel) -> Result<StateEstimates> {
    config.validate()?;
    let n_chunks = config.replications.div_ceil(CHUNK);
    let width = config.t_grid.len();
    let tallies = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut tallies = vec![Tally::default(); width];
            let end = ((c + 1) * CHUNK).min(config.replications);
            for r in c * CHUNK..end {
                let counts = occupancy_path(config, model, r)?;
                for (tally, &n) in tallies.iter_mut().zip(&counts) {
                    tally.add(n);
                }
            }
            Ok(tallies)
        })
        .try_reduce(
            || vec![Tally::default(); width],
            |a, b| Ok(a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()),
        )?;
    Ok(StateEstimates {
        points: config
            .t_grid
            .iter()
            .zip(&tallies)
            .map(|(&t, tally)| summarise(t, tally, config.replications))
            .collect(),
    })
}

/// Busy-period lengths, one per replication, in replication order.
#[derive(Debug, Clone, PartialEq)]
pub struct BusyPeriodSample {
    pub lengths: Vec<f64>,
}

impl BusyPeriodSample {
    pub fn mean(&self) -> SimEstimate {
        let (s, ss) = self
            .lengths
            .iter()
            .fold((0.0, 0.0), |(s, ss), &x| (s + x, ss + x * x));
        estimate_mean(s, ss, self.lengths.len() as f64)
    }

    /// Fraction of lengths below [`ATOM_THRESHOLD`].
    pub fn atom(&self) -> SimEstimate {
        let k = self.lengths.iter().filter(|&&x| x < ATOM_THRESHOLD).count() as f64;
        estimate_mean(k, k, self.lengths.len() as f64)
    }

    /// Empirical `P[length ≤ t]`.
    pub fn cdf(&self, t: f64) -> SimEstimate {
        let k = self.lengths.iter().filter(|&&x| x <= t).count() as f64;
        estimate_mean(k, k, self.lengths.len() as f64)
    }
}

fn busy_period_length(
    model: &ServiceModel,
    config: &SimConfig,
    replication: u64,
    safety: f64,
) -> Result<f64> {
    let mut rng = config.rng(replication);
    let mut end = service(&mut rng, model)?;
    let mut arrival = 0.0;
    loop {
        arrival += exponential_gap(&mut rng, config.lambda);
        if arrival > end {
            return Ok(end);
        }
        end = end.max(arrival + service(&mut rng, model)?);
        if end > safety {
            return Err(Error::Runaway {
                horizon: safety,
                replication,
            });
        }
    }
}

/// Simulates busy periods started by an arrival to an empty system. Paths
/// longer than `10⁶/λ` abort with [`Error::Runaway`].
pub fn simulate_busy_period(config: &SimConfig, model: &ServiceModel) -> Result<BusyPeriodSample> {
    config.validate()?;
    let safety = 1e6 / config.lambda;
    let lengths = (0..config.replications)
        .into_par_iter()
        .map(|r| busy_period_length(model, config, r, safety))
        .collect::<Result<Vec<_>>>()?;
    Ok(BusyPeriodSample { lengths })
}

/// `(analytic − estimate)/std_error`, defined as 0 when both vanish.
pub fn z_score(analytic: f64, estimate: &SimEstimate) -> f64 {
    let diff = analytic - estimate.value;
    if diff == 0.0 {
        0.0
    } else if estimate.std_error == 0.0 {
        diff.signum() * f64::INFINITY
    } else {
        diff / estimate.std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZPoint {
    pub t: f64,
    pub analytic: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveComparison {
    pub points: Vec<ZPoint>,
    pub max_abs_z: f64,
}

/// Per-point z-scores of an analytic curve against simulated estimates.
pub fn compare_curve(analytic: &MomentCurve, simulated: &[SimEstimate]) -> Result<CurveComparison> {
    if analytic.values.len() != simulated.len() {
        return Err(Error::Shape(format!(
            "analytic curve has {} points, simulation {}",
            analytic.values.len(),
            simulated.len()
        )));
    }
    let points: Vec<ZPoint> = analytic
        .grid
        .iter()
        .zip(&analytic.values)
        .zip(simulated)
        .map(|((&t, &a), e)| ZPoint {
            t,
            analytic: a,
            estimate: e.value,
            std_error: e.std_error,
            z: z_score(a, e),
        })
        .collect();
    let max_abs_z = points.iter().fold(0.0_f64, |m, p| m.max(p.z.abs()));
    Ok(CurveComparison { points, max_abs_z })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarComparison {
    pub analytic: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
}

impl ScalarComparison {
    fn new(analytic: f64, e: SimEstimate) -> Self {
        ScalarComparison {
            analytic,
            estimate: e.value,
            std_error: e.std_error,
            z: z_score(analytic, &e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusyPeriodComparison {
    pub atom: ScalarComparison,
    pub mean: ScalarComparison,
    /// Kolmogorov–Smirnov statistic of the lengths above the atom threshold
    /// against `(B(t) − B(0))/(1 − B(0))`.
    pub ks_statistic: f64,
    pub ks_sample_size: usize,
}

impl BusyPeriodComparison {
    /// Asymptotic KS critical value `√(−ln(level/2)/2)/√n`.
    pub fn ks_critical(&self, level: f64) -> f64 {
        ks_critical(level, self.ks_sample_size)
    }

    pub fn ks_passes(&self, level: f64) -> bool {
        self.ks_statistic <= self.ks_critical(level)
    }
}

pub fn ks_critical(level: f64, n: usize) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Compares simulated busy periods with an analytic law: the atom and the
/// mean by z-score, the continuous part by a KS statistic.
pub fn compare_busy_period(
    law: &BusyPeriodLaw,
    sample: &BusyPeriodSample,
    spec: &QuadratureSpec,
) -> Result<BusyPeriodComparison> {
    if sample.lengths.is_empty() {
        return Err(Error::Shape("empty busy-period sample".into()));
    }
    let atom = law.atom_at_zero();
    let mean = busy_mean(law, spec)?;
    let mut cont: Vec<f64> = sample
        .lengths
        .iter()
        .copied()
        .filter(|&x| x >= ATOM_THRESHOLD)
        .collect();
    cont.sort_by(f64::total_cmp);
    let n = cont.len();
    let mut d: f64 = 0.0;
    if n > 0 && atom < 1.0 {
        let nf = n as f64;
        for (i, &x) in cont.iter().enumerate() {
            let f = (law.cdf(x) - atom) / (1.0 - atom);
            d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
        }
    }
    Ok(BusyPeriodComparison {
        atom: ScalarComparison::new(atom, sample.atom()),
        mean: ScalarComparison::new(mean, sample.mean()),
        ks_statistic: d,
        ks_sample_size: n,
    })
}
