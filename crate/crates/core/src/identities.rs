//! Numerical checks of the denominator parametrisations and the
//! `K₀(2√((ax²+bx+c)/x))` integral identities.
//!
//! The Meijer function `G^{2,0}_{0,2}(z | 0,0)` only ever appears as
//! `2K₀(2√z)`, so it is evaluated that way.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_1d, integrate_nd, EvalResult, IntervalKind, QuadratureConfig};
use crate::representations::LN_UNDERFLOW;
use crate::specfun::{ln_k, BesselOrder};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbcTriple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AbcTriple {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        positive("a", a)?;
        positive("b", b)?;
        positive("c", c)?;
        Ok(Self { a, b, c })
    }

    /// `(c, b, a)`, the image under `x → 1/x`.
    pub fn reversed(self) -> Self {
        Self { a: self.c, b: self.b, c: self.a }
    }

    fn check(&self) -> Result<()> {
        Self::new(self.a, self.b, self.c).map(|_| ())
    }

    /// `e^{-2√(2√(ac) + b)}`, the factor shared by every closed form here.
    pub fn decay(&self) -> f64 {
        (-2.0 * (2.0 * (self.a * self.c).sqrt() + self.b).sqrt()).exp()
    }
}

/// A quadrature left side next to its closed-form right side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: EvalResult,
    pub rhs: f64,
    /// Separate pieces of the left side, when it has more than one.
    pub terms: Vec<EvalResult>,
}

impl IdentityCheck {
    pub fn abs_diff(&self) -> f64 {
        (self.lhs.value - self.rhs).abs()
    }

    pub fn rel_diff(&self) -> f64 {
        self.abs_diff() / self.rhs.abs()
    }
}

/// `1/(a₁a₂) = ∫₀¹ [1/(a₁+a₂σ)² + 1/(a₁σ+a₂)²] dσ`; returns the right side.
pub fn feynman_pair(a1: f64, a2: f64, config: &QuadratureConfig) -> Result<EvalResult> {
    positive("a1", a1)?;
    positive("a2", a2)?;
    let f = |s: f64| 1.0 / (a1 + a2 * s).powi(2) + 1.0 / (a1 * s + a2).powi(2);
    integrate_1d(f, IntervalKind::Unit, config)
}

/// The pair formula iterated once: a four-term integral over the unit
/// square equal to `1/(a₁a₂a₃)`.
pub fn feynman_triple(a1: f64, a2: f64, a3: f64, config: &QuadratureConfig) -> Result<EvalResult> {
    positive("a1", a1)?;
    positive("a2", a2)?;
    positive("a3", a3)?;
    let f = |p: &[f64]| {
        let (s1, s2) = (p[0], p[1]);
        let t1 = (a1 * s1 + a3 * s2 + a2).powi(-3);
        let t2 = (a2 * s1 + a3 * s2 + a1).powi(-3);
        let t3 = s2 * (s2 * (a1 * s1 + a2) + a3).powi(-3);
        let t4 = s2 * (s2 * (a2 * s1 + a1) + a3).powi(-3);
        2.0 * (t1 + t2 + t3 + t4)
    };
    integrate_nd(f, &[IntervalKind::Unit, IntervalKind::Unit], config)
}

/// `x^{-p} K₀(2√((ax²+bx+c)/x))`, zero once it underflows.
fn k0_integrand(t: &AbcTriple, power: f64, x: f64) -> f64 {
    let z = 2.0 * ((t.a * x * x + t.b * x + t.c) / x).sqrt();
    match ln_k(BesselOrder::integer(0), z) {
        Ok(ln) => {
            let v = ln - power * x.ln();
            if v < LN_UNDERFLOW {
                0.0
            } else {
                v.exp()
            }
        }
        // z = ∞ when x underflows the quotient: the integrand vanishes.
        Err(_) => 0.0,
    }
}

/// `∫₀^∞ x^{-3/2} K₀(2√((ax²+bx+c)/x)) dx = π e^{-2√(2√(ac)+b)} / (2√c)`.
pub fn identity_k0_x32(abc: &AbcTriple, config: &QuadratureConfig) -> Result<IdentityCheck> {
    abc.check()?;
    let lhs = integrate_1d(|x| k0_integrand(abc, 1.5, x), IntervalKind::Full, config)?;
    let rhs = PI * abc.decay() / (2.0 * abc.c.sqrt());
    Ok(IdentityCheck { lhs, rhs, terms: vec![lhs] })
}

/// `∫₀^∞ x^{-1/2} K₀(2√((ax²+bx+c)/x)) dx = π e^{-2√(2√(ac)+b)} / (2√a)`.
pub fn identity_k0_x12(abc: &AbcTriple, config: &QuadratureConfig) -> Result<IdentityCheck> {
    abc.check()?;
    let lhs = integrate_1d(|x| k0_integrand(abc, 0.5, x), IntervalKind::Full, config)?;
    let rhs = PI * abc.decay() / (2.0 * abc.a.sqrt());
    Ok(IdentityCheck { lhs, rhs, terms: vec![lhs] })
}

/// `∫_I [2x^{-3/2}K₀(2√((ax²+bx+c)/x)) + 2x^{-1/2}K₀(2√((cx²+bx+a)/x))] dx
/// = (π/√c) e^{-2√(2√(ac)+b)}` for `I = [0,1]` or `[1,∞)`, and for
/// `[0,∞)` with a factor ½. The two terms are returned separately.
pub fn identity_pair_unit(abc: &AbcTriple, interval: IntervalKind, config: &QuadratureConfig) -> Result<IdentityCheck> {
    abc.check()?;
    let flipped = abc.reversed();
    let factor = interval.bridge_factor();
    let first = integrate_1d(|x| 2.0 * k0_integrand(abc, 1.5, x), interval, config)?.scale(factor);
    let second = integrate_1d(|x| 2.0 * k0_integrand(&flipped, 0.5, x), interval, config)?.scale(factor);
    let terms = vec![first, second];
    let lhs = EvalResult::sum(&terms);
    let rhs = PI * abc.decay() / abc.c.sqrt();
    Ok(IdentityCheck { lhs, rhs, terms })
}
