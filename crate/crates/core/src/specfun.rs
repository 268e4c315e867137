//! Modified Bessel functions of the second kind, `K_ν(z)`, for integer and
//! half-integer order.
//!
//! `K_0` and `K_1` use the power series for `z ≤ 2` and Steed's continued
//! fraction (Temme's CF2) above. Higher orders come from the upward
//! recurrence `K_{ν+1} = K_{ν-1} + (2ν/z) K_ν`, which is stable for `K`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 2.0;
const RESCALE_AT: f64 = 1e100;

/// Order `ν = twice_nu / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BesselOrder {
    twice_nu: u32,
}

impl BesselOrder {
    pub const fn new(twice_nu: u32) -> Self {
        Self { twice_nu }
    }

    pub const fn integer(nu: u32) -> Self {
        Self { twice_nu: 2 * nu }
    }

    pub const fn twice_nu(self) -> u32 {
        self.twice_nu
    }

    pub fn nu(self) -> f64 {
        f64::from(self.twice_nu) / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.twice_nu.is_multiple_of(2)
    }
}

fn check_arg(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() || z == f64::INFINITY {
        Ok(())
    } else {
        Err(Error::Domain(format!("Bessel K needs z > 0, got {z}")))
    }
}

/// `(e^z K_0(z), e^z K_1(z))` from the ascending series.
fn k01_series(z: f64) -> (f64, f64) {
    let q = 0.25 * z * z;
    let ln_half = (0.5 * z).ln();

    // K0 = -(ln(z/2) + γ) I0 + Σ H_k q^k / (k!)²
    // K1 = 1/z + ln(z/2) I1 - (z/4) Σ (ψ(k+1) + ψ(k+2)) q^k / (k!(k+1)!)
    let mut t0 = 1.0;
    let mut t1 = 1.0;
    let mut i0 = 1.0;
    let mut i1s = 1.0;
    let mut h = 0.0;
    let mut s0 = 0.0;
    let mut s1 = -2.0 * EULER_GAMMA + 1.0;
    for k in 1..60 {
        let kf = k as f64;
        t0 *= q / (kf * kf);
        t1 *= q / (kf * (kf + 1.0));
        h += 1.0 / kf;
        i0 += t0;
        i1s += t1;
        s0 += h * t0;
        let psi_sum = 2.0 * h + 1.0 / (kf + 1.0) - 2.0 * EULER_GAMMA;
        let d1 = psi_sum * t1;
        s1 += d1;
        if t0 < 1e-17 * i0 && d1.abs() < 1e-17 * s1.abs() {
            break;
        }
    }
    let k0 = -(ln_half + EULER_GAMMA) * i0 + s0;
    let i1 = 0.5 * z * i1s;
    let k1 = 1.0 / z + ln_half * i1 - 0.25 * z * s1;
    let ez = z.exp();
    (k0 * ez, k1 * ez)
}

/// `(e^z K_0(z), e^z K_1(z))` from Steed's algorithm for the continued
/// fraction CF2; converges quickly for `z ≳ 1`.
fn k01_cf2(z: f64) -> (f64, f64) {
    const NU: f64 = 0.0;
    let mut b = 2.0 * (1.0 + z);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - NU * NU;
    let mut a = -a1;
    let mut c = a1;
    let mut q = c;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        a -= 2.0 * (i - 1) as f64;
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * z)).sqrt() / s;
    let k1 = k0 * (NU + z + 0.5 - h) / z;
    (k0, k1)
}

fn k01_scaled(z: f64) -> (f64, f64) {
    if z <= SERIES_LIMIT {
        k01_series(z)
    } else {
        k01_cf2(z)
    }
}

/// `e^z K_ν(z)` as `mantissa · e^{log_scale}`; the recurrence is
/// renormalised whenever the running value grows large.
fn scaled_parts(order: BesselOrder, z: f64) -> (f64, f64) {
    let twice = order.twice_nu();
    let (mut lo, mut hi, mut nu) = if order.is_integer() {
        let (k0, k1) = k01_scaled(z);
        (k0, k1, 1.0)
    } else {
        let k = (PI / (2.0 * z)).sqrt();
        (k, k * (1.0 + 1.0 / z), 1.5)
    };
    let base = if order.is_integer() { 0 } else { 1 };
    if twice == base {
        return (lo, 0.0);
    }
    let mut log_scale = 0.0;
    if hi > RESCALE_AT {
        log_scale = hi.ln();
        lo /= hi;
        hi = 1.0;
    }
    let mut current = base + 2;
    while current < twice {
        let next = lo + 2.0 * nu / z * hi;
        lo = hi;
        hi = next;
        nu += 1.0;
        current += 2;
        if hi > RESCALE_AT {
            log_scale += hi.ln();
            lo /= hi;
            hi = 1.0;
        }
    }
    (hi, log_scale)
}

/// Natural log of `e^z K_ν(z)`; finite for every positive finite `z`.
pub fn ln_k_scaled(order: BesselOrder, z: f64) -> Result<f64> {
    check_arg(z)?;
    if z == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let (m, log_scale) = scaled_parts(order, z);
    Ok(m.ln() + log_scale)
}

/// Natural log of `K_ν(z)`; `-∞` at `z = ∞`.
pub fn ln_k(order: BesselOrder, z: f64) -> Result<f64> {
    Ok(ln_k_scaled(order, z)? - z)
}

/// `e^z K_ν(z)`. Overflows to `+∞` only where the true value exceeds the
/// double range (order ≥ 1 and `z` far below `1e-150`).
pub fn k_scaled(order: BesselOrder, z: f64) -> Result<f64> {
    check_arg(z)?;
    if z == f64::INFINITY {
        return Ok(0.0);
    }
    let (m, log_scale) = scaled_parts(order, z);
    Ok(m * log_scale.exp())
}

/// `K_ν(z)` for integer `ν`.
pub fn k_int(nu: u32, z: f64) -> Result<f64> {
    k(BesselOrder::integer(nu), z)
}

/// `K_{twice_nu/2}(z)` for odd `twice_nu`.
pub fn k_half(twice_nu: u32, z: f64) -> Result<f64> {
    if twice_nu.is_multiple_of(2) {
        return Err(Error::Contract(format!(
            "k_half expects an odd twice_nu, got {twice_nu}"
        )));
    }
    k(BesselOrder::new(twice_nu), z)
}

/// `K_ν(z)` for any supported order.
pub fn k(order: BesselOrder, z: f64) -> Result<f64> {
    check_arg(z)?;
    if z == f64::INFINITY {
        return Ok(0.0);
    }
    let (m, log_scale) = scaled_parts(order, z);
    Ok(if log_scale == 0.0 { m * (-z).exp() } else { m * (log_scale - z).exp() })
}
