//! Numerical kernels shared by the analytic engine.
//!
//! Everything here is a pure function of its inputs: no caches, no global
//! state, and results are bit-reproducible for fixed arguments.

use crate::error::{Error, Result};
use crate::service_models::ServiceModel;

/// Tolerances for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
    /// Upper limit used in place of ∞. `None` searches for one by doubling
    /// until the integrand falls below `abs_tol`.
    pub tail_cutoff: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_depth: 60,
            tail_cutoff: None,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::domain(
                "quadrature tolerances must be positive",
                format!("abs_tol={}, rel_tol={}", self.abs_tol, self.rel_tol),
            ));
        }
        Ok(())
    }
}

struct Panel {
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

#[derive(Default)]
struct Worst {
    a: f64,
    b: f64,
    estimate: f64,
    failed: bool,
    // Sum of error estimates over panels accepted at the depth limit.
    exhausted: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) * (fa + 4.0 * fm + fb) / 6.0
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    p: Panel,
    eps: f64,
    depth: u32,
    spec: &QuadratureSpec,
    worst: &mut Worst,
) -> f64 {
    let lm = 0.5 * (p.a + p.m);
    let rm = 0.5 * (p.m + p.b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(p.a, p.m, p.fa, flm, p.fm);
    let right = simpson(p.m, p.b, p.fm, frm, p.fb);
    let both = left + right;
    let delta = both - p.whole;
    let tol = eps.max(spec.rel_tol * both.abs());

    // Panels that can no longer be split in floating point are accepted.
    let unsplittable = lm <= p.a || rm >= p.b || lm >= p.m || rm <= p.m;
    if delta.abs() <= 15.0 * tol || unsplittable {
        return both + delta / 15.0;
    }
    if depth >= spec.max_depth {
        worst.exhausted += delta.abs() / 15.0;
        if !worst.failed || delta.abs() > worst.estimate {
            worst.a = p.a;
            worst.b = p.b;
            worst.estimate = delta.abs();
            worst.failed = true;
        }
        return both + delta / 15.0;
    }
    let l = Panel {
        a: p.a,
        m: lm,
        b: p.m,
        fa: p.fa,
        fm: flm,
        fb: p.fm,
        whole: left,
    };
    let r = Panel {
        a: p.m,
        m: rm,
        b: p.b,
        fa: p.fm,
        fm: frm,
        fb: p.fb,
        whole: right,
    };
    adaptive(f, l, 0.5 * eps, depth + 1, spec, worst)
        + adaptive(f, r, 0.5 * eps, depth + 1, spec, worst)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
///
/// `f` must be bounded; jumps are tolerated but converge slowly, so callers
/// that know their discontinuities should use [`integrate_piecewise`].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate_piecewise(f, a, b, &[], spec)
}

/// Adaptive Simpson quadrature, split at the points in `breaks`.
///
/// At each break the integrand is evaluated one ulp inside the adjacent
/// panel, so a right-continuous step contributes its one-sided limits.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::domain(
            "integration limits must be finite with a <= b",
            format!("a={a}, b={b}"),
        ));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut nodes = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    nodes.extend(inner);
    nodes.push(b);

    let mut worst = Worst::default();
    let mut total = 0.0;
    let pieces = (nodes.len() - 1) as f64;
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let is_break = |x: f64| breaks.contains(&x);
        let flo = if is_break(lo) { f(lo.next_up()) } else { f(lo) };
        let fhi = if is_break(hi) { f(hi.next_down()) } else { f(hi) };
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        let p = Panel {
            a: lo,
            m: mid,
            b: hi,
            fa: flo,
            fm,
            fb: fhi,
            whole: simpson(lo, hi, flo, fm, fhi),
        };
        total += adaptive(&f, p, spec.abs_tol / pieces, 0, spec, &mut worst);
    }
    if worst.failed && worst.exhausted > spec.abs_tol.max(spec.rel_tol * total.abs()) {
        return Err(Error::Quadrature {
            a: worst.a,
            b: worst.b,
            estimate: worst.estimate,
        });
    }
    if !total.is_finite() {
        return Err(Error::Numeric(format!(
            "integral over [{a}, {b}] is not finite"
        )));
    }
    Ok(total)
}

/// Smallest `start·2ᵏ` at which `decay(t) < tol`, giving up after `t_max`.
pub fn tail_cutoff<F: Fn(f64) -> f64>(decay: F, start: f64, tol: f64, t_max: f64) -> Result<f64> {
    let mut t = start.max(f64::MIN_POSITIVE);
    while t <= t_max {
        if decay(t) < tol {
            return Ok(t);
        }
        t *= 2.0;
    }
    Err(Error::Numeric(format!(
        "tail did not fall below {tol:e} before t = {t_max}"
    )))
}

/// ∫₀^∞ f over the given breaks, with the upper limit taken from
/// `spec.tail_cutoff` or found by doubling on `decay`.
pub fn integrate_to_infinity<F, D>(
    f: F,
    decay: D,
    scale: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let cutoff = match spec.tail_cutoff {
        Some(t) => t,
        None => {
            let start = breaks.iter().copied().fold(scale.max(1e-3), f64::max);
            tail_cutoff(decay, start, spec.abs_tol, 1e9 * start.max(1.0))?
        }
    };
    integrate_piecewise(f, 0.0, cutoff, breaks, spec)
}

/// Values of a function on a grid, plus an optional point mass at the origin.
///
/// Used as the discretisation substrate for convolution series. `atom`
/// represents `atom·δ₀`, which keeps the convolution identity exact on the
/// grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub atom: f64,
}

impl GridFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Shape(format!(
                "grid has {} points but {} values",
                grid.len(),
                values.len()
            )));
        }
        Ok(GridFunction {
            grid,
            values,
            atom: 0.0,
        })
    }

    /// Samples `f` on `n` points `0, h, 2h, …`.
    pub fn sample<F: Fn(f64) -> f64>(step: f64, n: usize, f: F) -> Self {
        let grid = uniform_grid(step, n);
        let values = grid.iter().map(|&t| f(t)).collect();
        GridFunction {
            grid,
            values,
            atom: 0.0,
        }
    }

    /// Unit point mass at the origin: the identity for [`convolve`].
    pub fn delta(step: f64, n: usize) -> Self {
        GridFunction {
            grid: uniform_grid(step, n),
            values: vec![0.0; n],
            atom: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Step of a uniform grid starting at 0.
    pub fn uniform_step(&self) -> Result<f64> {
        if self.grid.len() < 2 {
            return Err(Error::Shape("grid needs at least two points".into()));
        }
        if self.grid[0] != 0.0 {
            return Err(Error::Shape(format!(
                "grid starts at {} instead of 0",
                self.grid[0]
            )));
        }
        let h = self.grid[1] - self.grid[0];
        if h <= 0.0 {
            return Err(Error::Shape("grid is not increasing".into()));
        }
        for (i, &t) in self.grid.iter().enumerate() {
            let expected = i as f64 * h;
            if (t - expected).abs() > 1e-12 * expected.max(h) * (i as f64).max(1.0) {
                return Err(Error::Shape(format!(
                    "grid point {i} is {t}, expected {expected} for a uniform step"
                )));
            }
        }
        Ok(h)
    }

    /// Largest absolute value over the grid, ignoring the atom.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, c: f64) {
        self.atom *= c;
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// Pointwise `self += c·other` (atoms included). Grids must match.
    pub fn add_scaled(&mut self, c: f64, other: &GridFunction) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!(
                "cannot add grids of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        self.atom += c * other.atom;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }
}

/// `n` points `0, h, …, (n−1)h`.
pub fn uniform_grid(step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * step).collect()
}

/// Discrete convolution `(a*b)(t) = ∫₀ᵗ a(t−s) b(s) ds` on a shared uniform grid.
///
/// The absolutely continuous parts are combined with the trapezoid-weighted
/// Cauchy product; point masses at the origin combine exactly. The shorter
/// input is zero-padded and the result lives on the longer grid.
pub fn convolve(a: &GridFunction, b: &GridFunction) -> Result<GridFunction> {
    let ha = a.uniform_step()?;
    let hb = b.uniform_step()?;
    if (ha - hb).abs() > 1e-12 * ha.max(hb) {
        return Err(Error::Shape(format!(
            "grid steps differ: {ha} vs {hb}"
        )));
    }
    let n = a.len().max(b.len());
    let at = |i: usize| a.values.get(i).copied().unwrap_or(0.0);
    let bt = |i: usize| b.values.get(i).copied().unwrap_or(0.0);
    let grid = if a.len() >= b.len() {
        a.grid.clone()
    } else {
        b.grid.clone()
    };

    let mut values = vec![0.0; n];
    for (i, out) in values.iter_mut().enumerate() {
        let mut acc = 0.0;
        if i > 0 {
            acc = 0.5 * (at(0) * bt(i) + at(i) * bt(0));
            for j in 1..i {
                acc += at(j) * bt(i - j);
            }
            acc *= ha;
        }
        *out = acc + a.atom * bt(i) + b.atom * at(i);
    }
    Ok(GridFunction {
        grid,
        values,
        atom: a.atom * b.atom,
    })
}

/// Central difference `(f(t+h) − f(t−h)) / 2h`; second-order forward
/// stencil when `t − h < 0`.
pub fn finite_difference<F: Fn(f64) -> f64>(f: F, t: f64, h: f64) -> f64 {
    if t - h < 0.0 {
        (-3.0 * f(t) + 4.0 * f(t + h) - f(t + 2.0 * h)) / (2.0 * h)
    } else {
        (f(t + h) - f(t - h)) / (2.0 * h)
    }
}

/// Tolerances for [`find_root_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// Stop once the bracket is narrower than this.
    pub xtol: f64,
    /// Stop once `|f(x)|` is at most this.
    pub ftol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            xtol: 1e-12,
            ftol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Bracketed root of `f` on `[lo, hi]`, converged to `tol` in `x` or `|f|`.
pub fn find_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    find_root_with(
        f,
        lo,
        hi,
        &RootOptions {
            xtol: tol,
            ftol: tol,
            ..RootOptions::default()
        },
    )
}

/// Brent's method: bisection safeguarding secant and inverse quadratic
/// steps, so the iterate never leaves the current bracket.
pub fn find_root_with<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, opts: &RootOptions) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite bracket values f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..opts.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * opts.xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb.abs() <= opts.ftol {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::Numeric(format!("f({b}) = {fb} inside bracket [{lo}, {hi}]")));
        }
    }
    Err(Error::Numeric(format!(
        "root finder did not converge in {} iterations on [{lo}, {hi}]",
        opts.max_iter
    )))
}

/// `Λ̃(t) = ∫₀ᵗ (1 − G(v)) dv` at each grid point.
///
/// Each cell integrates only its own subinterval, split at the model's jump
/// points, and the running sum is carried forward. The grid must be
/// non-decreasing and non-negative.
pub fn cumulative_tail_integral(
    model: &ServiceModel,
    grid: &[f64],
    spec: &QuadratureSpec,
) -> Result<GridFunction> {
    check_time_grid(grid)?;
    let breaks = model.jump_points();
    let mut values = Vec::with_capacity(grid.len());
    let mut prev = 0.0;
    let mut acc = 0.0;
    for &t in grid {
        if t > prev {
            let cell = integrate_piecewise(|v| model.survival(v), prev, t, &breaks, spec)?;
            acc += cell.max(0.0);
            prev = t;
        }
        values.push(acc);
    }
    GridFunction::new(grid.to_vec(), values)
}

pub(crate) fn check_time_grid(grid: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &t in grid {
        if !t.is_finite() || t < prev {
            return Err(Error::domain(
                "time grid must be finite, non-negative and non-decreasing",
                format!("{t} after {prev}"),
            ));
        }
        prev = t;
    }
    Ok(())
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (points - 1) as f64;
            (0..points)
                .map(|i| {
                    if i == points - 1 {
                        stop
                    } else {
                        start + i as f64 * step
                    }
                })
                .collect()
        }
    }
}
