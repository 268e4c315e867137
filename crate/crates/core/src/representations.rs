//! Integral representations of `∏ e^{-η_i R_i}/R_i`.
//!
//! All simplex forms share one kernel,
//!
//! ```text
//! kern(w) = 2^{1-M/2} π^{-M/2} (∏w)^{-3/2} (B/A)^{M/4} K_{M/2}(√(AB)),
//! A = Σ R_i²/w_i,  B = Σ η_i² w_i,
//! ```
//!
//! and differ only in how the weights `w` (with `Σw = 1`) are
//! parametrised. The ρ-forms keep the Gaussian integral
//! `exp(-ρB - A/(4ρ))` that produces the Macdonald function; the bridge
//! forms use several kernels with coefficient vectors that do not sum to 1.

use std::f64::consts::{LN_2, PI};
use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_axes, Axis, EvalResult, IntervalKind, Method, QuadratureConfig, Taper};
use crate::specfun::{ln_k_scaled, BesselOrder};

/// Below this, `exp` underflows to zero.
pub(crate) const LN_UNDERFLOW: f64 = -745.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlaterFactor {
    pub eta: f64,
    pub r: f64,
}

impl SlaterFactor {
    pub fn new(eta: f64, r: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(eta) || !ok(r) {
            return Err(Error::Domain(format!("Slater factor needs eta, r > 0, got ({eta}, {r})")));
        }
        Ok(Self { eta, r })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaterProduct {
    factors: Vec<SlaterFactor>,
}

impl SlaterProduct {
    pub fn new(factors: Vec<SlaterFactor>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::Contract(format!("a product needs M >= 2 factors, got {}", factors.len())));
        }
        for f in &factors {
            SlaterFactor::new(f.eta, f.r)?;
        }
        Ok(Self { factors })
    }

    pub fn from_slices(etas: &[f64], rs: &[f64]) -> Result<Self> {
        if etas.len() != rs.len() {
            return Err(Error::Contract("eta and R lists differ in length".into()));
        }
        let factors = etas
            .iter()
            .zip(rs)
            .map(|(&e, &r)| SlaterFactor::new(e, r))
            .collect::<Result<_>>()?;
        Self::new(factors)
    }

    /// Draw number `index` with η and R uniform on `[lo, hi]`. Each
    /// `(seed, m, index)` has its own ChaCha stream.
    pub fn random(m: usize, seed: u64, index: u64, lo: f64, hi: f64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((m as u64) << 40) | index);
        let factors = (0..m)
            .map(|_| {
                let eta = rng.gen_range(lo..=hi);
                let r = rng.gen_range(lo..=hi);
                SlaterFactor::new(eta, r)
            })
            .collect::<Result<_>>()?;
        Self::new(factors)
    }

    pub fn m(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[SlaterFactor] {
        &self.factors
    }

    /// Factors reordered so that factor `i` of the result is `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.m()];
        let mut factors = Vec::with_capacity(self.m());
        for &i in order {
            if i >= self.m() || seen[i] {
                return Err(Error::Contract(format!("{order:?} is not a permutation")));
            }
            seen[i] = true;
            factors.push(self.factors[i]);
        }
        Self::new(factors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepKind {
    SigmaUnit,
    SigmaRho,
    Schweber2,
    Schweber2Rho,
    Schweber3,
    InfinitePrior,
    Bridge,
}

impl RepKind {
    pub const ALL: [RepKind; 7] = [
        RepKind::SigmaUnit,
        RepKind::SigmaRho,
        RepKind::Schweber2,
        RepKind::Schweber2Rho,
        RepKind::Schweber3,
        RepKind::InfinitePrior,
        RepKind::Bridge,
    ];

    /// Number of integration variables for an `m`-factor product.
    pub fn dim(self, m: usize) -> usize {
        match self {
            RepKind::SigmaRho | RepKind::Schweber2Rho => m,
            _ => m - 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RepKind::SigmaUnit => "sigma",
            RepKind::SigmaRho => "sigma-rho",
            RepKind::Schweber2 => "schweber2",
            RepKind::Schweber2Rho => "schweber2-rho",
            RepKind::Schweber3 => "schweber3",
            RepKind::InfinitePrior => "infinite-prior",
            RepKind::Bridge => "bridge",
        }
    }

    fn has_rho(self) -> bool {
        matches!(self, RepKind::SigmaRho | RepKind::Schweber2Rho)
    }

    fn check_m(self, m: usize) -> Result<()> {
        if m < 2 {
            return Err(Error::Contract(format!("M must be at least 2, got {m}")));
        }
        if self == RepKind::Bridge && m > 3 {
            return Err(Error::Contract(format!("the bridge form exists only for M = 2, 3, got {m}")));
        }
        Ok(())
    }
}

impl std::fmt::Display for RepKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        match key.as_str() {
            "sigma" | "sigma-unit" => Ok(RepKind::SigmaUnit),
            "sigma-rho" => Ok(RepKind::SigmaRho),
            "schweber2" => Ok(RepKind::Schweber2),
            "schweber2-rho" => Ok(RepKind::Schweber2Rho),
            "schweber3" => Ok(RepKind::Schweber3),
            "infinite-prior" | "prior" => Ok(RepKind::InfinitePrior),
            "bridge" => Ok(RepKind::Bridge),
            _ => Err(Error::Domain(format!("unknown representation '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub w: Vec<f64>,
}

impl WeightVector {
    pub fn sum(&self) -> f64 {
        self.w.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }
}

fn check_len(m: usize, u: &[f64]) -> Result<()> {
    if m < 2 {
        return Err(Error::Contract(format!("M must be at least 2, got {m}")));
    }
    if u.len() != m - 1 {
        return Err(Error::Contract(format!("expected {} coordinates, got {}", m - 1, u.len())));
    }
    Ok(())
}

fn check_open_unit(u: &[f64]) -> Result<()> {
    match u.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
        Some(x) => Err(Error::Domain(format!("coordinate {x} is not inside (0, 1)"))),
        None => Ok(()),
    }
}

/// `(1-α₁, α₁(1-σ₂), α₁σ₂(1-σ₃), …, α₁σ₂⋯σ_{M-1})` for `u = (α₁, σ₂, …)`.
pub fn weights_sigma(m: usize, u: &[f64]) -> Result<WeightVector> {
    check_len(m, u)?;
    check_open_unit(u)?;
    let mut w = Vec::with_capacity(m);
    w.push(1.0 - u[0]);
    let mut p = u[0];
    for &s in &u[1..] {
        w.push(p * (1.0 - s));
        p *= s;
    }
    w.push(p);
    Ok(WeightVector { w })
}

/// `(1-α₁, α₁-α₂, …, α_{M-2}-α_{M-1}, α_{M-1})` for `1 > α₁ > … > 0`.
pub fn weights_schweber2(m: usize, alphas: &[f64]) -> Result<WeightVector> {
    check_len(m, alphas)?;
    check_open_unit(alphas)?;
    if let Some(pair) = alphas.windows(2).find(|p| p[1] >= p[0]) {
        return Err(Error::Domain(format!("alphas must decrease strictly, got {} then {}", pair[0], pair[1])));
    }
    let mut w = Vec::with_capacity(m);
    w.push(1.0 - alphas[0]);
    for p in alphas.windows(2) {
        w.push(p[0] - p[1]);
    }
    w.push(alphas[m - 2]);
    Ok(WeightVector { w })
}

/// `(α₁⋯α_{M-1}, α₁⋯α_{M-2}(1-α_{M-1}), …, α₁(1-α₂), 1-α₁)`.
pub fn weights_schweber3(m: usize, alphas: &[f64]) -> Result<WeightVector> {
    check_len(m, alphas)?;
    check_open_unit(alphas)?;
    let mut w = vec![0.0; m];
    w[m - 1] = 1.0 - alphas[0];
    let mut p = alphas[0];
    for (j, &a) in alphas.iter().enumerate().skip(1) {
        w[m - 1 - j] = p * (1.0 - a);
        p *= a;
    }
    w[0] = p;
    Ok(WeightVector { w })
}

/// `A = Σ R_i²/w_i` and `B = Σ η_i² w_i`.
pub fn quad_forms(product: &SlaterProduct, w: &WeightVector) -> Result<(f64, f64)> {
    if w.w.len() != product.m() {
        return Err(Error::Contract(format!("{} weights for {} factors", w.w.len(), product.m())));
    }
    if let Some(x) = w.w.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Domain(format!("weight {x} is not positive")));
    }
    Ok(forms(product, &w.w))
}

fn forms(product: &SlaterProduct, c: &[f64]) -> (f64, f64) {
    let mut a = 0.0;
    let mut b = 0.0;
    for (f, &ci) in product.factors.iter().zip(c) {
        a += f.r * f.r / ci;
        b += f.eta * f.eta * ci;
    }
    (a, b)
}

/// Log of the common Macdonald kernel for coefficients `c`.
fn ln_kernel(product: &SlaterProduct, c: &[f64]) -> f64 {
    let m = product.m();
    let ln_prod: f64 = c.iter().map(|x| x.ln()).sum();
    if !ln_prod.is_finite() {
        return f64::NEG_INFINITY;
    }
    let (a, b) = forms(product, c);
    let z = (a * b).sqrt();
    if !z.is_finite() {
        return f64::NEG_INFINITY;
    }
    let half_m = m as f64 / 2.0;
    let ln_k = match ln_k_scaled(BesselOrder::new(m as u32), z) {
        Ok(v) => v - z,
        Err(_) => return f64::NEG_INFINITY,
    };
    (1.0 - half_m) * LN_2 - half_m * PI.ln() - 1.5 * ln_prod + 0.25 * m as f64 * (b.ln() - a.ln()) + ln_k
}

/// Log of the ρ-form integrand for coefficients `c` at `ρ`.
fn ln_rho_kernel(product: &SlaterProduct, c: &[f64], rho: f64) -> f64 {
    let m = product.m() as f64;
    let ln_prod: f64 = c.iter().map(|x| x.ln()).sum();
    let (a, b) = forms(product, c);
    let e = rho * b + a / (4.0 * rho);
    if !ln_prod.is_finite() || !e.is_finite() {
        return f64::NEG_INFINITY;
    }
    -m * LN_2 - 0.5 * m * PI.ln() - 0.5 * (m + 2.0) * rho.ln() - 1.5 * ln_prod - e
}

/// `ln J` of the σ unit-cube map: `α₁^{M-2} σ₂^{M-3} ⋯ σ_{M-2}`.
fn ln_jac_sigma(u: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut ln_p = 0.0;
    for &x in &u[..u.len() - 1] {
        ln_p += x.ln();
        acc += ln_p;
    }
    acc
}

/// Nested Schweber-2 alphas from unit-cube σ coordinates, `α_j = α_{j-1}σ_j`.
fn sigma_to_alphas(u: &[f64]) -> Vec<f64> {
    let mut p = 1.0;
    u.iter()
        .map(|&s| {
            p *= s;
            p
        })
        .collect()
}

/// Splits `u` into simplex coordinates and, for ρ-forms, `ρ`.
fn split_rho(rep: RepKind, m: usize, u: &[f64]) -> Result<(&[f64], Option<f64>)> {
    let dim = rep.dim(m);
    if u.len() != dim {
        return Err(Error::Contract(format!("{rep} with M = {m} takes {dim} coordinates, got {}", u.len())));
    }
    if rep.has_rho() {
        let rho = u[dim - 1];
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("rho must be positive and finite, got {rho}")));
        }
        Ok((&u[..dim - 1], Some(rho)))
    } else {
        Ok((u, None))
    }
}

fn ln_integrand(rep: RepKind, product: &SlaterProduct, u: &[f64]) -> Result<f64> {
    let m = product.m();
    rep.check_m(m)?;
    let (simplex, rho) = split_rho(rep, m, u)?;
    let value = match rep {
        RepKind::SigmaUnit | RepKind::SigmaRho => {
            let w = weights_sigma(m, simplex)?;
            let ln_j = ln_jac_sigma(simplex);
            match rho {
                Some(r) => ln_j + ln_rho_kernel(product, &w.w, r),
                None => ln_j + ln_kernel(product, &w.w),
            }
        }
        RepKind::Schweber2 | RepKind::Schweber2Rho => {
            let w = weights_schweber2(m, simplex)?;
            match rho {
                Some(r) => ln_rho_kernel(product, &w.w, r),
                None => ln_kernel(product, &w.w),
            }
        }
        RepKind::Schweber3 => {
            // Same Jacobian as the σ map with the factor order reversed.
            let w = weights_schweber3(m, simplex)?;
            ln_jac_sigma(simplex) + ln_kernel(product, &w.w)
        }
        RepKind::InfinitePrior => {
            if let Some(z) = simplex.iter().find(|&&z| !(z > 0.0 && z.is_finite())) {
                return Err(Error::Domain(format!("zeta must be positive and finite, got {z}")));
            }
            let mut c = Vec::with_capacity(m);
            c.push(1.0);
            c.extend_from_slice(simplex);
            ln_kernel(product, &c)
        }
        RepKind::Bridge => {
            if let Some(s) = simplex.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
                return Err(Error::Domain(format!("bridge coordinate must be positive, got {s}")));
            }
            let terms: Vec<f64> = bridge_ln_terms(product, simplex);
            let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if top == f64::NEG_INFINITY {
                top
            } else {
                top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
            }
        }
    };
    Ok(value)
}

/// Pointwise integrand of a representation. `u` holds the representation's
/// own coordinates: the σ unit cube for SIGMA_UNIT, the nested simplex
/// `1 > α₁ > … > 0` for SCHWEBER2, the unit cube for SCHWEBER3, the
/// positive orthant for INFINITE_PRIOR and BRIDGE (the sum of its terms),
/// with a trailing `ρ > 0` for the ρ-forms.
pub fn integrand(rep: RepKind, product: &SlaterProduct, u: &[f64]) -> Result<f64> {
    let ln = ln_integrand(rep, product, u)?;
    Ok(if ln < LN_UNDERFLOW { 0.0 } else { ln.exp() })
}

pub fn direct_product(product: &SlaterProduct) -> f64 {
    product.factors.iter().map(|f| (-f.eta * f.r).exp() / f.r).product()
}

/// Coefficient vectors and numerators of the bridge terms.
fn bridge_coefficients(m: usize, s: &[f64]) -> Vec<(Vec<f64>, f64)> {
    match m {
        2 => vec![(vec![s[0], 1.0], 1.0), (vec![1.0, s[0]], 1.0)],
        3 => {
            let (s1, s2) = (s[0], s[1]);
            vec![
                (vec![s1, 1.0, s2], 1.0),
                (vec![1.0, s1, s2], 1.0),
                (vec![s1 * s2, s2, 1.0], s2),
                (vec![s2, s1 * s2, 1.0], s2),
            ]
        }
        _ => Vec::new(),
    }
}

fn bridge_ln_terms(product: &SlaterProduct, s: &[f64]) -> Vec<f64> {
    bridge_coefficients(product.m(), s)
        .into_iter()
        .map(|(c, n)| n.ln() + ln_kernel(product, &c))
        .collect()
}

/// Each bridge term integrated over the chosen per-axis intervals, with a
/// factor ½ per FULL axis. The terms always sum to the direct product.
pub fn bridge_terms(
    product: &SlaterProduct,
    intervals: &[IntervalKind],
    config: &QuadratureConfig,
) -> Result<Vec<EvalResult>> {
    let m = product.m();
    RepKind::Bridge.check_m(m)?;
    if intervals.len() != m - 1 {
        return Err(Error::Contract(format!("M = {m} needs {} intervals, got {}", m - 1, intervals.len())));
    }
    let factor: f64 = intervals.iter().map(|k| k.bridge_factor()).product();
    let axes: Vec<Axis> = intervals.iter().map(|&k| Axis::new(k)).collect();
    let n_terms = if m == 2 { 2 } else { 4 };
    (0..n_terms)
        .map(|t| {
            let f = |s: &[f64]| {
                let (c, n) = bridge_coefficients(m, s).swap_remove(t);
                let ln = n.ln() + ln_kernel(product, &c);
                if ln < LN_UNDERFLOW {
                    0.0
                } else {
                    ln.exp()
                }
            };
            integrate_axes(f, &axes, config).map(|r| r.scale(factor))
        })
        .collect()
}

/// Integrates a representation; the result should equal
/// [`direct_product`].
///
/// Up to three variables with the ADAPTIVE method the integral runs in the
/// representation's own coordinates. Otherwise it runs on Sobol points
/// pushed through a Laplace chart: log-weight coordinates centred on the
/// integrand's mode and scaled by its Hessian.
pub fn evaluate_rep(rep: RepKind, product: &SlaterProduct, config: &QuadratureConfig) -> Result<EvalResult> {
    let m = product.m();
    rep.check_m(m)?;
    config.validate()?;
    let dim = rep.dim(m);
    let adaptive = config.method == Method::Adaptive && dim <= 3;
    if rep == RepKind::Bridge {
        let unit = vec![IntervalKind::Unit; m - 1];
        let terms = bridge_terms(product, &unit, config)?;
        return Ok(EvalResult::sum(&terms));
    }
    if adaptive {
        evaluate_native(rep, product, config)
    } else {
        evaluate_chart(rep, product, config)
    }
}

fn evaluate_native(rep: RepKind, product: &SlaterProduct, config: &QuadratureConfig) -> Result<EvalResult> {
    let m = product.m();
    let cube = Axis::tapered(IntervalKind::Unit, Taper::Both);
    let mut axes = match rep {
        RepKind::InfinitePrior => vec![Axis::new(IntervalKind::Full); m - 1],
        _ => vec![cube; m - 1],
    };
    if rep.has_rho() {
        axes.push(Axis::new(IntervalKind::Full));
    }
    let nested = matches!(rep, RepKind::Schweber2 | RepKind::Schweber2Rho);
    let f = |x: &[f64]| -> f64 {
        let r = if nested {
            // Nested simplex through α_j = α_{j-1}σ_j, Jacobian ∏ α_j.
            let (sig, rho) = x.split_at(m - 1);
            let mut u = sigma_to_alphas(sig);
            u.extend_from_slice(rho);
            let ln_j = ln_jac_sigma(sig);
            ln_integrand(rep, product, &u).map(|v| v + ln_j)
        } else {
            ln_integrand(rep, product, x)
        };
        match r {
            Ok(ln) if ln < LN_UNDERFLOW => 0.0,
            Ok(ln) => ln.exp(),
            // Nodes that round onto the boundary carry no weight.
            Err(Error::Domain(_)) => 0.0,
            Err(_) => f64::NAN,
        }
    };
    integrate_axes(f, &axes, config)
}

/// Representation coordinates for a weight vector, with `ln J_rep`, or
/// `None` if rounding puts them on the boundary.
fn coords_from_weights(rep: RepKind, w: &[f64]) -> Option<(Vec<f64>, f64)> {
    let m = w.len();
    // tail[k] = w_{k+1} + … + w_M (0-based: sum of w[k..]).
    let mut tail = vec![0.0; m + 1];
    for k in (0..m).rev() {
        tail[k] = tail[k + 1] + w[k];
    }
    let total = tail[0];
    let u = match rep {
        RepKind::SigmaUnit | RepKind::SigmaRho => {
            let mut u = Vec::with_capacity(m - 1);
            u.push(tail[1] / total);
            for k in 2..m {
                u.push(tail[k] / tail[k - 1]);
            }
            u
        }
        RepKind::Schweber2 | RepKind::Schweber2Rho => (1..m).map(|k| tail[k] / total).collect(),
        RepKind::Schweber3 => {
            // α_j = S_{M-j} / S_{M-j+1} with prefix sums S.
            let mut head = vec![0.0; m + 1];
            for k in 0..m {
                head[k + 1] = head[k] + w[k];
            }
            (1..m).map(|j| head[m - j] / head[m - j + 1]).collect()
        }
        RepKind::InfinitePrior => (1..m).map(|k| w[k] / w[0]).collect(),
        RepKind::Bridge => return None,
    };
    let inside = match rep {
        RepKind::InfinitePrior => u.iter().all(|&z| z > 0.0 && z.is_finite()),
        RepKind::Schweber2 | RepKind::Schweber2Rho => {
            u.iter().all(|&x| x > 0.0 && x < 1.0) && u.windows(2).all(|p| p[1] < p[0])
        }
        _ => u.iter().all(|&x| x > 0.0 && x < 1.0),
    };
    if !inside {
        return None;
    }
    let ln_j = match rep {
        RepKind::SigmaUnit | RepKind::SigmaRho | RepKind::Schweber3 => ln_jac_sigma(&u),
        RepKind::Schweber2 | RepKind::Schweber2Rho => 0.0,
        // dw = ∏w dy and dζ = ∏ζ dy give J = ∏ζ / ∏w.
        _ => u.iter().map(|z| z.ln()).sum::<f64>() - w.iter().map(|x| x.ln()).sum::<f64>(),
    };
    Some((u, ln_j))
}

/// Softmax weights `(1, e^{y_1}, …)/Σ` and their logs.
fn softmax_weights(y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let top = y.iter().copied().fold(0.0, f64::max);
    let norm = (-top).exp() + y.iter().map(|v| (v - top).exp()).sum::<f64>();
    let ln_norm = top + norm.ln();
    let mut ln_w = Vec::with_capacity(y.len() + 1);
    ln_w.push(-ln_norm);
    ln_w.extend(y.iter().map(|v| v - ln_norm));
    let w = ln_w.iter().map(|v| v.exp()).collect();
    (w, ln_w)
}

/// Log density of the simplex kernel in log-weight coordinates.
fn ln_chart_density(product: &SlaterProduct, y: &[f64]) -> f64 {
    let (w, ln_w) = softmax_weights(y);
    if w.contains(&0.0) {
        return f64::NEG_INFINITY;
    }
    ln_kernel(product, &w) + ln_w.iter().sum::<f64>()
}

struct Chart {
    center: DVector<f64>,
    chol: DMatrix<f64>,
    ln_det: f64,
}

const LOGISTIC_SCALE: f64 = 0.551_328_895_421_792_1; // √3/π

fn gradient_hessian(f: &dyn Fn(&[f64]) -> f64, y: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let d = y.len();
    let h = 1e-4;
    let f0 = f(y);
    let mut g = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    let mut p = y.to_vec();
    let eval = |p: &mut Vec<f64>, i: usize, di: f64, j: usize, dj: f64| {
        p[i] += di;
        p[j] += dj;
        let v = f(p);
        p[i] -= di;
        p[j] -= dj;
        v
    };
    for i in 0..d {
        let fp = eval(&mut p, i, h, i, 0.0);
        let fm = eval(&mut p, i, -h, i, 0.0);
        g[i] = (fp - fm) / (2.0 * h);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let pp = eval(&mut p, i, h, j, h);
            let pm = eval(&mut p, i, h, j, -h);
            let mp = eval(&mut p, i, -h, j, h);
            let mm = eval(&mut p, i, -h, j, -h);
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    (g, hess)
}

/// Newton ascent to the mode of `f`, then a Cholesky factor of the
/// inverse negative Hessian there.
fn laplace_chart(f: &dyn Fn(&[f64]) -> f64, start: Vec<f64>) -> Chart {
    let d = start.len();
    let mut y = start;
    let mut fy = f(&y);
    for _ in 0..60 {
        let (g, hess) = gradient_hessian(f, &y);
        let neg = -hess;
        let step = match neg.clone().cholesky() {
            Some(c) => c.solve(&g),
            None => g.clone() * 0.5,
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let cand: Vec<f64> = y.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let fc = f(&cand);
            if fc > fy {
                y = cand;
                fy = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || t * step.norm() < 1e-10 {
            break;
        }
    }
    let (_, hess) = gradient_hessian(f, &y);
    let neg = -hess;
    let chol = neg
        .clone()
        .try_inverse()
        .and_then(|cov| cov.cholesky())
        .map(|c| c.l())
        .unwrap_or_else(|| {
            DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 / neg[(i, i)].abs().max(1e-6).sqrt() } else { 0.0 })
        });
    let ln_det = (0..d).map(|i| chol[(i, i)].ln()).sum();
    Chart { center: DVector::from_vec(y), chol, ln_det }
}

fn evaluate_chart(rep: RepKind, product: &SlaterProduct, config: &QuadratureConfig) -> Result<EvalResult> {
    let m = product.m();
    let d = m - 1;
    let density = |y: &[f64]| ln_chart_density(product, y);
    let start: Vec<f64> = {
        let ratio: Vec<f64> = product.factors.iter().map(|f| f.r / f.eta).collect();
        ratio[1..].iter().map(|x| (x / ratio[0]).ln()).collect()
    };
    let chart = laplace_chart(&density, start);
    let dim = rep.dim(m);
    let axes = vec![Axis::new(IntervalKind::Unit); dim];
    let ln_s = LOGISTIC_SCALE.ln();

    let f = |t: &[f64]| -> f64 {
        let mut ln_jac = chart.ln_det;
        let z = DVector::from_iterator(
            d,
            t[..d].iter().map(|&ti| {
                ln_jac += ln_s - ti.ln() - (1.0 - ti).ln();
                LOGISTIC_SCALE * (ti / (1.0 - ti)).ln()
            }),
        );
        let y = &chart.center + &chart.chol * z;
        let (w, ln_w) = softmax_weights(y.as_slice());
        if w.contains(&0.0) {
            return 0.0;
        }
        let Some((mut u, ln_j)) = coords_from_weights(rep, &w) else {
            return 0.0;
        };
        // |∂u/∂y| = ∏w / J_rep(u).
        ln_jac += ln_w.iter().sum::<f64>() - ln_j;
        if rep.has_rho() {
            let (a, b) = forms(product, &w);
            let zab = (a * b).sqrt();
            let half_m = m as f64 / 2.0;
            let tau_mode = -(half_m / zab).asinh();
            let width = LOGISTIC_SCALE / (zab * zab + half_m * half_m).sqrt().sqrt();
            let tr = t[d];
            let tau = tau_mode + width * (tr / (1.0 - tr)).ln();
            let rho = (a / (4.0 * b)).sqrt() * tau.exp();
            ln_jac += width.ln() - tr.ln() - (1.0 - tr).ln() + rho.ln();
            u.push(rho);
        }
        match ln_integrand(rep, product, &u) {
            Ok(ln) => {
                let total = ln + ln_jac;
                if total < LN_UNDERFLOW {
                    0.0
                } else {
                    total.exp()
                }
            }
            Err(Error::Domain(_)) => 0.0,
            Err(_) => f64::NAN,
        }
    };
    let cfg = config.with_method(Method::LowDiscrepancy);
    integrate_axes(f, &axes, &cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub index: u64,
    pub product: SlaterProduct,
    pub value: f64,
    pub error_estimate: f64,
    pub oracle: f64,
    pub rel_err: f64,
    pub converged: bool,
    pub passed: bool,
    pub n_evals: u64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub m: usize,
    pub n_samples: u64,
    pub n_passed: u64,
    pub max_rel_err: f64,
    pub samples: Vec<SampleOutcome>,
}

impl StabilityRow {
    pub fn pass_rate(&self) -> f64 {
        if self.n_samples == 0 {
            1.0
        } else {
            self.n_passed as f64 / self.n_samples as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rep: RepKind,
    pub tol: f64,
    pub seed: u64,
    pub rows: Vec<StabilityRow>,
}

pub const SWEEP_RANGE: (f64, f64) = (0.2, 3.0);

/// Compares [`evaluate_rep`] with [`direct_product`] on random products.
/// A sample passes when it converged and its relative error is at most
/// `tol`; failures, including evaluation errors, are recorded as data.
pub fn stability_sweep(
    rep: RepKind,
    m_range: RangeInclusive<usize>,
    n_samples: u64,
    seed: u64,
    config: &QuadratureConfig,
    tol: f64,
) -> Result<StabilityReport> {
    if *m_range.start() < 2 || *m_range.end() > 8 {
        return Err(Error::Contract(format!("M range must lie within [2, 8], got {m_range:?}")));
    }
    let mut rows = Vec::new();
    for m in m_range {
        let mut samples = Vec::new();
        for index in 0..n_samples {
            let product = SlaterProduct::random(m, seed, index, SWEEP_RANGE.0, SWEEP_RANGE.1)?;
            let oracle = direct_product(&product);
            let cfg = config.with_seed(config.seed.wrapping_add(index));
            let outcome = match evaluate_rep(rep, &product, &cfg) {
                Ok(r) => {
                    let rel_err = ((r.value - oracle) / oracle).abs();
                    SampleOutcome {
                        index,
                        product,
                        value: r.value,
                        error_estimate: r.error_estimate,
                        oracle,
                        rel_err,
                        converged: r.converged,
                        passed: r.converged && rel_err <= tol,
                        n_evals: r.n_evals,
                        failure: None,
                    }
                }
                Err(e) => SampleOutcome {
                    index,
                    product,
                    value: f64::NAN,
                    error_estimate: f64::NAN,
                    oracle,
                    rel_err: f64::INFINITY,
                    converged: false,
                    passed: false,
                    n_evals: 0,
                    failure: Some(e.to_string()),
                },
            };
            samples.push(outcome);
        }
        let n_passed = samples.iter().filter(|s| s.passed).count() as u64;
        let max_rel_err = samples.iter().map(|s| s.rel_err).fold(0.0, f64::max);
        rows.push(StabilityRow { m, n_samples, n_passed, max_rel_err, samples });
    }
    Ok(StabilityReport { rep, tol, seed, rows })
}
