//! Adaptive quadrature for one to three dimensions and randomly shifted
//! Sobol integration above that.
//!
//! Every axis is pulled back to `(0, 1)` through [`map_axis`]; the
//! optional [`Taper`] substitution removes `x^{-1/2}` endpoint
//! singularities before the Kronrod rule sees them.

mod kronrod;
pub mod sobol;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use kronrod::{adapt, Node};

/// Integration interval: `[0,1]`, `[1,∞)` or `[0,∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalKind {
    Unit,
    Tail,
    Full,
}

impl IntervalKind {
    pub const ALL: [IntervalKind; 3] = [IntervalKind::Unit, IntervalKind::Tail, IntervalKind::Full];

    /// Factor applied per FULL axis in the bridge identities.
    pub fn bridge_factor(self) -> f64 {
        match self {
            IntervalKind::Full => 0.5,
            _ => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IntervalKind::Unit => "unit",
            IntervalKind::Tail => "tail",
            IntervalKind::Full => "full",
        }
    }
}

impl std::str::FromStr for IntervalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unit" | "[0,1]" => Ok(IntervalKind::Unit),
            "tail" | "[1,inf]" | "[1,inf)" => Ok(IntervalKind::Tail),
            "full" | "[0,inf]" | "[0,inf)" => Ok(IntervalKind::Full),
            other => Err(Error::Domain(format!("unknown interval '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Adaptive,
    LowDiscrepancy,
}

/// Endpoint substitution on the unit parameter `s ↦ t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Taper {
    #[default]
    None,
    /// `t = s²`
    Left,
    /// `t = 1 - (1-s)²`
    Right,
    /// `t = s²(3 - 2s)`
    Both,
}

impl Taper {
    fn apply(self, s: f64) -> (f64, f64) {
        match self {
            Taper::None => (s, 1.0),
            Taper::Left => (s * s, 2.0 * s),
            Taper::Right => {
                let r = 1.0 - s;
                (1.0 - r * r, 2.0 * r)
            }
            Taper::Both => (s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Axis {
    pub kind: IntervalKind,
    pub taper: Taper,
}

impl Axis {
    pub const fn new(kind: IntervalKind) -> Self {
        Self { kind, taper: Taper::None }
    }

    pub const fn tapered(kind: IntervalKind, taper: Taper) -> Self {
        Self { kind, taper }
    }

    /// `(x, dx/ds)`, or `None` when the node rounds onto an endpoint.
    fn pull_back(self, s: f64) -> Option<(f64, f64)> {
        let (t, jt) = self.taper.apply(s);
        if !(t > 0.0 && t < 1.0) {
            return None;
        }
        let (x, jx) = map_axis_unchecked(t, self.kind);
        Some((x, jt * jx))
    }
}

impl From<IntervalKind> for Axis {
    fn from(kind: IntervalKind) -> Self {
        Axis::new(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: u64,
    pub method: Method,
    pub seed: u64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol: 1e-8,
            max_evals: 10_000_000,
            method: Method::Adaptive,
            seed: 0,
        }
    }
}

impl QuadratureConfig {
    /// Defaults for a `dim`-dimensional problem: `rel_tol = 1e-8` and
    /// adaptive rules up to three dimensions, `1e-4` with Sobol above.
    pub fn for_dim(dim: usize) -> Self {
        if dim <= 3 {
            Self::default()
        } else {
            Self {
                rel_tol: 1e-4,
                method: Method::LowDiscrepancy,
                ..Self::default()
            }
        }
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_evals(mut self, max_evals: u64) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.abs_tol) || !ok(self.rel_tol) {
            return Err(Error::Config("tolerances must be finite and nonnegative".into()));
        }
        if self.abs_tol == 0.0 && self.rel_tol == 0.0 {
            return Err(Error::Config("abs_tol or rel_tol must be positive".into()));
        }
        if self.max_evals < 100 {
            return Err(Error::Config(format!(
                "max_evals must be at least 100, got {}",
                self.max_evals
            )));
        }
        Ok(())
    }

    pub fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub value: f64,
    pub error_estimate: f64,
    pub n_evals: u64,
    pub converged: bool,
}

impl EvalResult {
    /// Exact value, used for closed forms that share a report with
    /// quadrature results.
    pub fn exact(value: f64) -> Self {
        Self { value, error_estimate: 0.0, n_evals: 0, converged: true }
    }

    pub fn scale(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            error_estimate: self.error_estimate * factor.abs(),
            ..self
        }
    }

    /// Sum of independent results; errors add linearly.
    pub fn sum<'a>(items: impl IntoIterator<Item = &'a EvalResult>) -> EvalResult {
        items.into_iter().fold(
            EvalResult { value: 0.0, error_estimate: 0.0, n_evals: 0, converged: true },
            |acc, r| EvalResult {
                value: acc.value + r.value,
                error_estimate: acc.error_estimate + r.error_estimate,
                n_evals: acc.n_evals + r.n_evals,
                converged: acc.converged && r.converged,
            },
        )
    }
}

fn map_axis_unchecked(t: f64, interval: IntervalKind) -> (f64, f64) {
    match interval {
        IntervalKind::Unit => (t, 1.0),
        IntervalKind::Tail => (1.0 / t, 1.0 / (t * t)),
        IntervalKind::Full => {
            let r = 1.0 - t;
            (t / r, 1.0 / (r * r))
        }
    }
}

/// Maps `t ∈ (0,1)` onto the interval, returning `(x, dx/dt)`.
pub fn map_axis(t: f64, interval: IntervalKind) -> Result<(f64, f64)> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("map_axis needs 0 < t < 1, got {t}")));
    }
    Ok(map_axis_unchecked(t, interval))
}

fn checked(value: f64, x: &[f64]) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Evaluation { abscissa: x.to_vec(), value })
    }
}

pub fn integrate_1d<F>(f: F, interval: IntervalKind, config: &QuadratureConfig) -> Result<EvalResult>
where
    F: Fn(f64) -> f64 + Sync,
{
    integrate_nd(|x: &[f64]| f(x[0]), &[interval], config)
}

pub fn integrate_nd<F>(f: F, intervals: &[IntervalKind], config: &QuadratureConfig) -> Result<EvalResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let axes: Vec<Axis> = intervals.iter().map(|&k| Axis::new(k)).collect();
    integrate_axes(f, &axes, config)
}

/// Like [`integrate_nd`] with per-axis endpoint substitutions.
pub fn integrate_axes<F>(f: F, axes: &[Axis], config: &QuadratureConfig) -> Result<EvalResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    if axes.is_empty() {
        return Err(Error::Contract("integration needs at least one axis".into()));
    }
    if axes.len() > 3 || config.method == Method::LowDiscrepancy {
        return qmc(&f, axes, config);
    }
    let out = nested(&f, axes, 0, [0.0; 3], config.abs_tol, config.rel_tol, config.max_evals)?;
    Ok(EvalResult {
        value: out.value,
        error_estimate: out.err,
        n_evals: out.evals,
        converged: out.converged,
    })
}

struct Level {
    value: f64,
    err: f64,
    evals: u64,
    converged: bool,
}

fn nested<F>(
    f: &F,
    axes: &[Axis],
    depth: usize,
    prefix: [f64; 3],
    abs_tol: f64,
    rel_tol: f64,
    budget: u64,
) -> Result<Level>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = axes.len();
    let axis = axes[depth];
    let last = depth + 1 == dim;
    let inner_budget = (budget / 64).max(1000);

    let node = |s: f64| -> Result<Node> {
        let Some((x, jac)) = axis.pull_back(s) else {
            return Ok(Node { value: 0.0, err: 0.0, evals: 0 });
        };
        let mut p = prefix;
        p[depth] = x;
        if last {
            let v = checked(f(&p[..dim]), &p[..dim])?;
            let value = if jac == 0.0 { 0.0 } else { v * jac };
            Ok(Node { value, err: 0.0, evals: 1 })
        } else {
            // Inner errors are folded into the outer estimate, so a
            // non-converged inner integral only matters through its error.
            let inner = nested(f, axes, depth + 1, p, 0.1 * abs_tol, 0.1 * rel_tol, inner_budget)?;
            Ok(Node { value: inner.value * jac, err: inner.err * jac, evals: inner.evals })
        }
    };
    let out = adapt(&node, abs_tol, rel_tol, budget, depth == 0)?;
    Ok(Level { value: out.value, err: out.err, evals: out.evals, converged: out.converged })
}

/// Sum with `O(log n)` error growth and an order fixed by the slice.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

const QMC_SHIFTS: u64 = 8;
const QMC_START: u64 = 1 << 12;
const QMC_CHUNK: u64 = 1 << 10;
const QMC_EDGE: f64 = 1.0 / 9_007_199_254_740_992.0;

fn qmc<F>(f: &F, axes: &[Axis], config: &QuadratureConfig) -> Result<EvalResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dim = axes.len();
    if dim > sobol::MAX_DIM {
        return Err(Error::Contract(format!(
            "low-discrepancy integration supports at most {} dimensions, got {dim}",
            sobol::MAX_DIM
        )));
    }
    let seq = sobol::Sobol::new(dim);
    let shifts: Vec<Vec<f64>> = (0..QMC_SHIFTS).map(|k| sobol::shift(config.seed, k, dim)).collect();

    let eval_chunk = |shift: &[f64], lo: u64, hi: u64| -> Result<f64> {
        let mut u = vec![0.0; dim];
        let mut x = vec![0.0; dim];
        let mut vals = Vec::with_capacity((hi - lo) as usize);
        for i in lo..hi {
            seq.point(i as u32, &mut u);
            let mut jac = 1.0;
            let mut inside = true;
            for j in 0..dim {
                let t = (u[j] + shift[j]).fract().clamp(QMC_EDGE, 1.0 - QMC_EDGE);
                match axes[j].pull_back(t) {
                    Some((xj, jj)) => {
                        x[j] = xj;
                        jac *= jj;
                    }
                    None => inside = false,
                }
            }
            if !inside || jac == 0.0 {
                vals.push(0.0);
                continue;
            }
            let v = checked(f(&x), &x)?;
            vals.push(v * jac);
        }
        Ok(pairwise_sum(&vals))
    };

    let mut sums = vec![0.0; QMC_SHIFTS as usize];
    let mut done = 0u64;
    let mut n = QMC_START.min((config.max_evals / QMC_SHIFTS).max(1));
    loop {
        let chunks: Vec<(usize, u64, u64)> = (0..QMC_SHIFTS as usize)
            .flat_map(|k| {
                let mut v = Vec::new();
                let mut lo = done;
                while lo < n {
                    let hi = (lo + QMC_CHUNK).min(n);
                    v.push((k, lo, hi));
                    lo = hi;
                }
                v
            })
            .collect();
        let partial: Vec<f64> = chunks
            .par_iter()
            .map(|&(k, lo, hi)| eval_chunk(&shifts[k], lo, hi))
            .collect::<Result<_>>()?;
        for (k, sum) in sums.iter_mut().enumerate() {
            let mine: Vec<f64> = chunks
                .iter()
                .zip(&partial)
                .filter(|((c, _, _), _)| *c == k)
                .map(|(_, p)| *p)
                .collect();
            *sum += pairwise_sum(&mine);
        }
        done = n;

        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        let s = QMC_SHIFTS as f64;
        let mean = pairwise_sum(&means) / s;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (s - 1.0);
        let se = (var / s).sqrt();
        let n_evals = n * QMC_SHIFTS;
        let converged = se <= config.tolerance(mean);
        if converged || 2 * n_evals > config.max_evals || n >= 1 << 31 {
            return Ok(EvalResult { value: mean, error_estimate: se, n_evals, converged });
        }
        n *= 2;
    }
}
