use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use slater_kernels::representations::{
    bridge_terms, direct_product, evaluate_rep, integrand, quad_forms, stability_sweep, weights_schweber2,
    weights_schweber3, weights_sigma, RepKind, SlaterProduct, WeightVector,
};
use slater_kernels::specfun::{k_half, k_int};
use slater_kernels::{Error, IntervalKind, Method, QuadratureConfig};

fn paper_product() -> SlaterProduct {
    SlaterProduct::from_slices(&[0.3, 0.5, 0.9], &[1.0, 1.0, 1.0]).unwrap()
}

fn pair() -> SlaterProduct {
    SlaterProduct::from_slices(&[1.0, 2.0], &[1.0, 1.0]).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
    }
}

#[test]
fn weight_examples() {
    close(&weights_sigma(2, &[0.3]).unwrap().w, &[0.7, 0.3], 1e-15);
    close(&weights_sigma(3, &[0.5, 0.4]).unwrap().w, &[0.5, 0.3, 0.2], 1e-15);
    close(&weights_schweber2(2, &[0.3]).unwrap().w, &[0.7, 0.3], 1e-15);
    close(&weights_schweber2(3, &[0.5, 0.2]).unwrap().w, &[0.5, 0.3, 0.2], 1e-15);
    let w = weights_schweber2(4, &[0.9, 0.5, 0.1]).unwrap();
    close(&w.w, &[0.1, 0.4, 0.4, 0.1], 1e-15);
    assert!((w.sum() - 1.0).abs() < 1e-15);
    close(&weights_schweber3(2, &[0.3]).unwrap().w, &[0.3, 0.7], 1e-15);
    close(&weights_schweber3(3, &[0.5, 0.4]).unwrap().w, &[0.2, 0.3, 0.5], 1e-15);
}

#[test]
fn weight_errors() {
    assert!(matches!(weights_sigma(3, &[0.0, 0.5]), Err(Error::Domain(_))));
    assert!(matches!(weights_sigma(3, &[0.5, 1.0]), Err(Error::Domain(_))));
    assert!(matches!(weights_schweber2(3, &[0.2, 0.5]), Err(Error::Domain(_))));
    assert!(matches!(weights_schweber2(3, &[0.4, 0.4]), Err(Error::Domain(_))));
    assert!(matches!(weights_schweber3(3, &[0.4, f64::NAN]), Err(Error::Domain(_))));
    assert!(matches!(weights_sigma(4, &[0.5, 0.5]), Err(Error::Contract(_))));
}

#[test]
fn quad_form_examples() {
    let w = WeightVector { w: vec![0.5, 0.5] };
    let (a, b) = quad_forms(&pair(), &w).unwrap();
    assert_relative_eq!(a, 4.0, max_relative = 1e-15);
    assert_relative_eq!(b, 2.5, max_relative = 1e-15);

    let w = WeightVector { w: vec![0.5, 0.3, 0.2] };
    let (a, b) = quad_forms(&paper_product(), &w).unwrap();
    assert_relative_eq!(a, 1.0 / 0.5 + 1.0 / 0.3 + 1.0 / 0.2, max_relative = 1e-15);
    assert_relative_eq!(b, 0.09 * 0.5 + 0.25 * 0.3 + 0.81 * 0.2, max_relative = 1e-15);
    assert_relative_eq!(b, 0.045 + 0.075 + 0.162, max_relative = 1e-14);

    let zero = WeightVector { w: vec![0.0, 0.5, 0.5] };
    assert!(matches!(quad_forms(&paper_product(), &zero), Err(Error::Domain(_))));
}

#[test]
fn direct_product_examples() {
    assert_relative_eq!(direct_product(&pair()), (-3.0f64).exp(), max_relative = 1e-15);
    assert_relative_eq!(direct_product(&pair()), 0.049_787_068, max_relative = 1e-8);
    assert_relative_eq!(direct_product(&paper_product()), 0.182_683_524, max_relative = 1e-8);
}

#[test]
fn two_factor_integrand_matches_transcription() {
    // Hand transcription of the one-parameter pair representation.
    let (e1, e12, x1, x12) = (0.7, 1.9, 0.8, 1.6);
    let p = SlaterProduct::from_slices(&[e1, e12], &[x1, x12]).unwrap();
    for i in 1..40 {
        let al = i as f64 / 40.0;
        let b = (1.0 - al) * e1 * e1 + al * e12 * e12;
        let a = x1 * x1 / (1.0 - al) + x12 * x12 / al;
        let want = b.sqrt() * k_int(1, a.sqrt() * b.sqrt()).unwrap()
            / (PI * (1.0 - al).powf(1.5) * al.powf(1.5) * a.sqrt());
        let got = integrand(RepKind::SigmaUnit, &p, &[al]).unwrap();
        assert_relative_eq!(got, want, max_relative = 1e-13);
        // The two-factor Schweber form is the same integrand.
        let s2 = integrand(RepKind::Schweber2, &p, &[al]).unwrap();
        assert_relative_eq!(s2, want, max_relative = 1e-13);
    }
}

#[test]
fn three_factor_integrand_matches_transcription() {
    let p = paper_product();
    let (e1, e12, e13) = (0.3, 0.5, 0.9);
    let (x1, x12, x13) = (1.0f64, 1.0f64, 1.0f64);
    for &(a1, s2) in &[(0.5, 0.4), (0.1, 0.9), (0.95, 0.05), (0.33, 0.66)] {
        let b = (1.0 - a1) * e1 * e1 + e12 * e12 * a1 * (1.0 - s2) + e13 * e13 * a1 * s2;
        let a = x1.powi(2) / (1.0 - a1) + x12.powi(2) / (a1 * (1.0 - s2)) + x13.powi(2) / (a1 * s2);
        let want = a1 * b.powf(0.75) * a.powf(-0.75) * k_half(3, a.sqrt() * b.sqrt()).unwrap()
            / (2f64.sqrt() * PI.powf(1.5) * ((1.0 - a1) * a1 * a1 * (1.0 - s2) * s2).powf(1.5));
        let got = integrand(RepKind::SigmaUnit, &p, &[a1, s2]).unwrap();
        assert!(got > 0.0 && got.is_finite());
        assert_relative_eq!(got, want, max_relative = 1e-13);
    }
}

#[test]
fn integrand_survives_extreme_corners() {
    let p = paper_product();
    for u in [[1e-300, 0.5], [1.0 - 1e-16, 1e-200], [0.5, 1.0 - 1e-16]] {
        let v = integrand(RepKind::SigmaUnit, &p, &u).unwrap();
        assert!(v.is_finite() && v >= 0.0, "{u:?} -> {v}");
    }
    assert!(integrand(RepKind::SigmaUnit, &p, &[0.0, 0.5]).is_err());
    assert!(integrand(RepKind::SigmaRho, &p, &[0.5, 0.5, -1.0]).is_err());
    assert!(integrand(RepKind::InfinitePrior, &p, &[1e300, 1e-300]).unwrap().is_finite());
}

#[test]
fn rho_form_reduces_to_kernel() {
    // ∫₀^∞ ρ^{-(M+2)/2} e^{-ρB-A/(4ρ)} dρ = 2 (4B/A)^{M/4} K_{M/2}(√(AB)),
    // so the σ and σ-ρ forms agree after the ρ integral.
    let p = paper_product();
    let u = [0.4, 0.7];
    let cfg = QuadratureConfig::default().with_rel_tol(1e-11);
    let r = slater_kernels::quadrature::integrate_1d(
        |rho| integrand(RepKind::SigmaRho, &p, &[u[0], u[1], rho]).unwrap(),
        IntervalKind::Full,
        &cfg,
    )
    .unwrap();
    let want = integrand(RepKind::SigmaUnit, &p, &u).unwrap();
    assert_relative_eq!(r.value, want, max_relative = 1e-9);
}

#[test]
fn evaluate_examples() {
    let cfg = QuadratureConfig::default();
    let r = evaluate_rep(RepKind::SigmaUnit, &pair(), &cfg).unwrap();
    assert!(r.converged);
    assert_relative_eq!(r.value, direct_product(&pair()), max_relative = 1e-6);

    let r = evaluate_rep(RepKind::SigmaUnit, &paper_product(), &cfg).unwrap();
    assert!(r.converged);
    assert_relative_eq!(r.value, direct_product(&paper_product()), max_relative = 1e-6);

    let p5 = SlaterProduct::random(5, 42, 0, 0.3, 3.0).unwrap();
    let cfg5 = QuadratureConfig::for_dim(4).with_method(Method::LowDiscrepancy).with_seed(42);
    let r = evaluate_rep(RepKind::SigmaUnit, &p5, &cfg5).unwrap();
    assert!(r.converged);
    assert_relative_eq!(r.value, direct_product(&p5), max_relative = 1e-3);
}

#[test]
fn master_equivalence() {
    let cfg = QuadratureConfig::default().with_rel_tol(1e-8);
    for p in [pair(), paper_product()] {
        let want = direct_product(&p);
        for rep in [RepKind::SigmaUnit, RepKind::Schweber2, RepKind::InfinitePrior] {
            let r = evaluate_rep(rep, &p, &cfg).unwrap();
            assert!(r.converged, "{rep}");
            assert_relative_eq!(r.value, want, max_relative = 1e-6);
        }
    }
}

#[test]
fn rho_forms_integrate_to_product() {
    let cfg = QuadratureConfig::default().with_rel_tol(1e-6);
    for rep in [RepKind::SigmaRho, RepKind::Schweber2Rho] {
        let r = evaluate_rep(rep, &pair(), &cfg).unwrap();
        assert_relative_eq!(r.value, direct_product(&pair()), max_relative = 1e-5);
    }
    let r = evaluate_rep(RepKind::Schweber2Rho, &paper_product(), &cfg).unwrap();
    assert_relative_eq!(r.value, direct_product(&paper_product()), max_relative = 1e-4);
}

#[test]
fn permutation_leaves_integral_unchanged() {
    let p = SlaterProduct::from_slices(&[0.4, 1.3, 2.2], &[1.7, 0.6, 1.1]).unwrap();
    let cfg = QuadratureConfig::default().with_rel_tol(1e-8);
    let base = evaluate_rep(RepKind::SigmaUnit, &p, &cfg).unwrap().value;
    for order in [[1, 0, 2], [2, 1, 0], [1, 2, 0]] {
        let q = p.permuted(&order).unwrap();
        let v = evaluate_rep(RepKind::SigmaUnit, &q, &cfg).unwrap().value;
        assert_relative_eq!(v, base, max_relative = 1e-6);
    }
    assert!(p.permuted(&[0, 0, 1]).is_err());
}

#[test]
fn bridge_sums_match_for_every_interval() {
    let cfg = QuadratureConfig::default().with_rel_tol(1e-8);
    let two = bridge_terms(&pair(), &[IntervalKind::Unit], &cfg).unwrap();
    assert_eq!(two.len(), 2);
    let sum: f64 = two.iter().map(|t| t.value).sum();
    assert_relative_eq!(sum, (-3.0f64).exp(), max_relative = 1e-6);

    let p = paper_product();
    let want = direct_product(&p);
    let mixes = [
        [IntervalKind::Unit, IntervalKind::Unit],
        [IntervalKind::Tail, IntervalKind::Tail],
        [IntervalKind::Full, IntervalKind::Full],
        [IntervalKind::Unit, IntervalKind::Full],
        [IntervalKind::Tail, IntervalKind::Unit],
    ];
    for iv in mixes {
        let terms = bridge_terms(&p, &iv, &cfg).unwrap();
        assert_eq!(terms.len(), 4);
        let sum: f64 = terms.iter().map(|t| t.value).sum();
        assert_relative_eq!(sum, want, max_relative = 1e-6);
        if iv == [IntervalKind::Full, IntervalKind::Full] {
            assert_relative_eq!(terms[0].value, terms[2].value, max_relative = 1e-7);
            assert_relative_eq!(terms[1].value, terms[3].value, max_relative = 1e-7);
        }
    }
    let four = SlaterProduct::random(4, 1, 0, 0.2, 3.0).unwrap();
    let iv = [IntervalKind::Unit; 3];
    assert!(matches!(bridge_terms(&four, &iv, &cfg), Err(Error::Contract(_))));
}

#[test]
fn sweep_records_every_sample() {
    let cfg = QuadratureConfig::for_dim(2).with_rel_tol(1e-6);
    let rep = stability_sweep(RepKind::SigmaUnit, 2..=3, 3, 7, &cfg, 1e-3).unwrap();
    assert_eq!(rep.rows.len(), 2);
    for row in &rep.rows {
        assert_eq!(row.samples.len(), 3);
        assert_eq!(row.n_passed, 3, "{row:?}");
    }
    assert!(stability_sweep(RepKind::SigmaUnit, 1..=3, 1, 0, &cfg, 1e-3).is_err());
}

#[test]
fn random_products_are_reproducible() {
    let a = SlaterProduct::random(5, 42, 3, 0.2, 3.0).unwrap();
    assert_eq!(a, SlaterProduct::random(5, 42, 3, 0.2, 3.0).unwrap());
    assert_ne!(a, SlaterProduct::random(5, 42, 4, 0.2, 3.0).unwrap());
    assert!(a.factors().iter().all(|f| (0.2..=3.0).contains(&f.eta) && (0.2..=3.0).contains(&f.r)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn weights_partition_unity(m in 2usize..9, raw in prop::collection::vec(1e-6f64..(1.0 - 1e-6), 8)) {
        let u = &raw[..m - 1];
        let s = weights_sigma(m, u).unwrap();
        prop_assert!((s.sum() - 1.0).abs() <= 1e-15);
        let s3 = weights_schweber3(m, u).unwrap();
        prop_assert!((s3.sum() - 1.0).abs() <= 1e-15);
        let mut nested = u.to_vec();
        nested.sort_by(|a, b| b.total_cmp(a));
        nested.dedup();
        if nested.len() == m - 1 {
            let s2 = weights_schweber2(m, &nested).unwrap();
            prop_assert!((s2.sum() - 1.0).abs() <= 1e-15);
        }
    }
}

proptest! {
    #[test]
    fn integrand_is_nonnegative(
        m in 2usize..7,
        u in prop::collection::vec(1e-9f64..(1.0 - 1e-9), 6),
        seed in 0u64..1000,
    ) {
        let p = SlaterProduct::random(m, seed, 0, 0.2, 3.0).unwrap();
        for rep in [RepKind::SigmaUnit, RepKind::Schweber3] {
            let v = integrand(rep, &p, &u[..m - 1]).unwrap();
            prop_assert!(v >= 0.0 && v.is_finite());
        }
    }
}
