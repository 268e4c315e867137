//! Fully integrated two- and three-orbital transition amplitudes.
//!
//! Every three-dimensional shell integral depends only on `|x₂|`, so
//! `∫d³x₂` is taken as `4π∫x₂² dx₂` throughout.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_1d, integrate_axes, integrate_nd, Axis, EvalResult, IntervalKind, QuadratureConfig};
use crate::representations::LN_UNDERFLOW;
use crate::specfun::{ln_k, BesselOrder};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Decay constants `(η₁, η₁₂, η₁₃)`; `η₁₃` is also written `η₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleEtas {
    pub eta1: f64,
    pub eta12: f64,
    #[serde(alias = "eta2")]
    pub eta13: f64,
}

impl TripleEtas {
    pub fn new(eta1: f64, eta12: f64, eta13: f64) -> Result<Self> {
        positive("eta1", eta1)?;
        positive("eta12", eta12)?;
        positive("eta13", eta13)?;
        Ok(Self { eta1, eta12, eta13 })
    }

    fn check(&self) -> Result<()> {
        Self::new(self.eta1, self.eta12, self.eta13).map(|_| ())
    }
}

/// `sinh(y)/y`, accurate through `y = 0`.
fn sinhc(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        1.0 + y * y / 6.0
    } else {
        y.sinh() / y
    }
}

/// `4π(e^{-η₁₂x} - e^{-η₁x}) / (x(η₁² - η₁₂²))`, written as
/// `(2π e^{-ηx}/η)·sinh(δx)/(δx)` with `η, δ` the half sum and half
/// difference, which is exact through `η₁ = η₁₂`.
pub fn s2_closed(eta1: f64, eta12: f64, x2: f64) -> Result<f64> {
    positive("eta1", eta1)?;
    positive("eta12", eta12)?;
    positive("x2", x2)?;
    let eta = 0.5 * (eta1 + eta12);
    let delta = 0.5 * (eta1 - eta12);
    let base = 2.0 * PI * (-eta * x2).exp() / eta;
    if (eta1 * eta1 - eta12 * eta12).abs() < 1e-8 * (eta1 * eta1 + eta12 * eta12) {
        return Ok(base * (1.0 + (delta * x2).powi(2) / 6.0));
    }
    Ok(base * sinhc(delta * x2))
}

/// `∫₀¹ dα 2π e^{-x₂√D}/√D` with `D = (1-α)η₁² + αη₁₂²`.
pub fn s2_via_rep(eta1: f64, eta12: f64, x2: f64, config: &QuadratureConfig) -> Result<EvalResult> {
    positive("eta1", eta1)?;
    positive("eta12", eta12)?;
    positive("x2", x2)?;
    let f = |al: f64| {
        let d = ((1.0 - al) * eta1 * eta1 + al * eta12 * eta12).sqrt();
        2.0 * PI * (-x2 * d).exp() / d
    };
    integrate_1d(f, IntervalKind::Unit, config)
}

/// `16π² / ((η₁+η₁₃)(η₁+η₁₂)(η₁₂+η₁₃))`.
pub fn s3_closed(etas: &TripleEtas) -> Result<f64> {
    etas.check()?;
    let TripleEtas { eta1, eta12, eta13 } = *etas;
    Ok(16.0 * PI * PI / ((eta1 + eta13) * (eta1 + eta12) * (eta12 + eta13)))
}

/// `∫∫ 4π²α₁ / (α₁(η₁₂²(1-σ₂) + η₁₃²σ₂ - η₁²) + η₁²)^{3/2}` over the unit
/// square.
pub fn s3_sigma_2d(etas: &TripleEtas, config: &QuadratureConfig) -> Result<EvalResult> {
    etas.check()?;
    let (e1, e12, e13) = (etas.eta1.powi(2), etas.eta12.powi(2), etas.eta13.powi(2));
    let f = |p: &[f64]| {
        let (a1, s2) = (p[0], p[1]);
        let d = a1 * (e12 * (1.0 - s2) + e13 * s2 - e1) + e1;
        4.0 * PI * PI * a1 / d.powf(1.5)
    };
    integrate_nd(f, &[IntervalKind::Unit, IntervalKind::Unit], config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeTable {
    pub terms: Vec<EvalResult>,
    pub total: EvalResult,
}

impl BridgeTable {
    fn from_terms(terms: Vec<EvalResult>) -> Self {
        let total = EvalResult::sum(&terms);
        Self { terms, total }
    }

    pub fn values(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.value).collect()
    }
}

/// Integrand of bridge term `term` (0-based) at `(σ₁, σ₂, x₂)`, including
/// the `x₂²` of the radial measure but not its `4π`. Assembled in log
/// space: near the axes the prefactor overflows while `K₀` underflows.
fn bridge_kernel(etas: &TripleEtas, term: usize, s1: f64, s2: f64, x2: f64) -> f64 {
    let (e1, e12, e13) = (etas.eta1.powi(2), etas.eta12.powi(2), etas.eta13.powi(2));
    let p1 = s1 + 1.0;
    let (z, s2_power) = match term {
        0 | 1 => {
            let d = if term == 0 { s1 * e1 + e12 + e13 * s2 } else { e1 + e12 * s1 + e13 * s2 };
            // √(σ₁+σ₂+1)/√σ₂ = √((σ₁+1)/σ₂ + 1)
            (x2 * d.sqrt() * (p1 / s2 + 1.0).sqrt() / p1.sqrt(), 1.5)
        }
        _ => {
            let d = if term == 2 { s1 * s2 * e1 + e13 + e12 * s2 } else { s2 * e1 + e13 + e12 * s1 * s2 };
            (x2 * d.sqrt() * (p1 + 1.0 / s2).sqrt() / p1.sqrt(), 0.5)
        }
    };
    let Ok(ln_k0) = ln_k(BesselOrder::integer(0), z) else {
        return 0.0;
    };
    let ln = std::f64::consts::LN_2 + ln_k0 - 1.5 * p1.ln() - s2_power * s2.ln() + 2.0 * x2.ln();
    if ln < LN_UNDERFLOW {
        0.0
    } else {
        ln.exp()
    }
}

/// The four `K₀` bridge terms of the three-orbital amplitude. Each is a
/// three-dimensional integral over `σ₁`, `σ₂` on the chosen intervals and
/// `x₂ ∈ [0, ∞)` with measure `4πx₂²`, times ½ per FULL `σ` axis.
pub fn s3_bridge_terms(
    etas: &TripleEtas,
    sigma1: IntervalKind,
    sigma2: IntervalKind,
    config: &QuadratureConfig,
) -> Result<BridgeTable> {
    etas.check()?;
    let factor = sigma1.bridge_factor() * sigma2.bridge_factor();
    let axes = [Axis::new(sigma1), Axis::new(sigma2), Axis::new(IntervalKind::Full)];
    let terms = (0..4)
        .map(|term| {
            let f = |p: &[f64]| 4.0 * PI * bridge_kernel(etas, term, p[0], p[1], p[2]);
            integrate_axes(f, &axes, config).map(|r| r.scale(factor))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BridgeTable::from_terms(terms))
}

/// Coefficients `(a, c)` and `b` of `(ax² + bx + c)/x` after the `σ₂`
/// integral, per unit `x₂²`. Pair 1 serves terms 1 and 3, pair 2 terms 2
/// and 4.
fn reduced_abc(etas: &TripleEtas, pair: usize, s1: f64) -> (f64, f64, f64) {
    let (e1, e12, e13) = (etas.eta1.powi(2), etas.eta12.powi(2), etas.eta13.powi(2));
    let p1 = s1 + 1.0;
    let a = e13 / (4.0 * p1);
    if pair == 0 {
        let b = (e1 * s1 + e13 * p1 + e12) / (4.0 * p1);
        let c = (e1 * s1 + e12) / 4.0;
        (a, b, c)
    } else {
        let b = (e12 * s1 + e13 * p1 + e1) / (4.0 * p1);
        let c = (e1 + e12 * s1) / 4.0;
        (a, b, c)
    }
}

/// Exponent `2√(2√(ac) + b)` per unit `x₂`, either as printed or through
/// the perfect square `b = a(σ₁+1) + c/(σ₁+1)` that these maps satisfy.
fn reduced_exponent(a: f64, b: f64, c: f64, s1: f64, fast: bool) -> f64 {
    if fast {
        let p1 = s1 + 1.0;
        2.0 * ((a * p1).sqrt() + (c / p1).sqrt())
    } else {
        2.0 * (2.0 * (a * c).sqrt() + b).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedTable {
    pub table: BridgeTable,
    /// Largest relative gap between the printed and simplified exponents
    /// over the sampled `σ₁` grid.
    pub fast_path_gap: f64,
}

/// The bridge terms with the `σ₂` integral done analytically: a
/// two-dimensional integral over `σ₁` on `interval` and `x₂ ∈ [0, ∞)` of
/// `½·4πx₂²(σ₁+1)^{-3/2} π e^{-2√(2√(ac)+b)}/√c`, with ½ more on FULL.
pub fn s3_bridge_reduced(
    etas: &TripleEtas,
    interval: IntervalKind,
    config: &QuadratureConfig,
) -> Result<ReducedTable> {
    etas.check()?;
    let factor = 0.5 * interval.bridge_factor();
    let axes = [Axis::new(interval), Axis::new(IntervalKind::Full)];
    let mut pairs = Vec::with_capacity(2);
    for pair in 0..2 {
        let f = |p: &[f64]| {
            let (s1, x) = (p[0], p[1]);
            let (a, b, c) = reduced_abc(etas, pair, s1);
            let e = x * reduced_exponent(a, b, c, s1, false);
            4.0 * PI * x * x * (s1 + 1.0).powf(-1.5) * PI * (-e).exp() / (x * c.sqrt())
        };
        pairs.push(integrate_axes(f, &axes, config)?.scale(factor));
    }
    let mut gap: f64 = 0.0;
    for i in 1..200 {
        let t = i as f64 / 200.0;
        let s1 = match interval {
            IntervalKind::Unit => t,
            IntervalKind::Tail => 1.0 / t,
            IntervalKind::Full => t / (1.0 - t),
        };
        for pair in 0..2 {
            let (a, b, c) = reduced_abc(etas, pair, s1);
            let slow = reduced_exponent(a, b, c, s1, false);
            let fast = reduced_exponent(a, b, c, s1, true);
            gap = gap.max(((slow - fast) / slow).abs());
        }
    }
    let terms = vec![pairs[0], pairs[1], pairs[0], pairs[1]];
    Ok(ReducedTable { table: BridgeTable::from_terms(terms), fast_path_gap: gap })
}

/// The reduced pair integrals with `x₂` done analytically too,
/// `∫4πx² e^{-2κx}/(x√c) dx = π/(√c κ²)`; a one-dimensional check on
/// [`s3_bridge_reduced`].
pub fn s3_bridge_reduced_radial(
    etas: &TripleEtas,
    interval: IntervalKind,
    config: &QuadratureConfig,
) -> Result<[EvalResult; 2]> {
    etas.check()?;
    let factor = 0.5 * interval.bridge_factor();
    let one = |pair: usize| {
        let f = |s1: f64| {
            let (a, b, c) = reduced_abc(etas, pair, s1);
            let kappa = 0.5 * reduced_exponent(a, b, c, s1, true);
            (s1 + 1.0).powf(-1.5) * PI * PI / (c.sqrt() * kappa * kappa)
        };
        integrate_1d(f, interval, config).map(|r| r.scale(factor))
    };
    Ok([one(0)?, one(1)?])
}
