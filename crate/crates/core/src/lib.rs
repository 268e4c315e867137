//! Integral representations of products of Slater orbitals `e^{-ηR}/R`.
//!
//! Every representation reduces to a weight vector, a pair of quadratic
//! forms `A = Σ R²/w` and `B = Σ η²w`, and a Macdonald kernel
//! `K_{M/2}(√(AB))`. The crate evaluates these forms with adaptive and
//! quasi-Monte Carlo quadrature and checks them against closed forms.

pub mod amplitudes;
pub mod error;
pub mod identities;
pub mod quadrature;
pub mod representations;
pub mod specfun;

pub use error::{Error, Result};
pub use quadrature::{EvalResult, IntervalKind, Method, QuadratureConfig};
