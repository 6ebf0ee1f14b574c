use levicore::annulus::{self, AnnulusProblem};
use proptest::prelude::*;
use std::f64::consts::PI;

/// `2β δρ / tan(π/m)`, derived by hand from the cell constraints.
fn closed_form(beta: f64, width: f64, m: usize) -> f64 {
    2.0 * beta * (width / m as f64) / (PI / m as f64).tan()
}

#[test]
fn frozen_worm_values() {
    let prob = AnnulusProblem::worm(1.0, 1.0, 64).unwrap();
    let rows = annulus::oracle_convergence(&prob, &[32, 64, 128]);
    let frozen = [0.634573, 0.636108, 0.636492];
    for (r, f) in rows.iter().zip(frozen) {
        assert!((r.value - f).abs() < 1e-6, "m={}: {}", r.m, r.value);
        assert!(r.bracket.0 <= r.value && r.value <= r.bracket.1 + 1e-15);
    }
    assert!((annulus::continuum_value(&prob) - 2.0 / PI).abs() < 1e-15);
}

#[test]
fn sweep_matches_closed_form() {
    for (beta, t0, m) in [(1.0, 1.0, 16), (0.5, 2.0, 40), (2.0, 0.5, 100), (1.0, 3.0, 256)] {
        let prob = AnnulusProblem::worm(beta, t0, m).unwrap();
        let v = annulus::annulus_norm_oracle(&prob).value;
        let c = closed_form(beta, prob.width(), m);
        assert!((v - c).abs() <= 1e-10 * c, "{beta} {t0} {m}: {v} vs {c}");
    }
}

#[test]
fn zero_winding_and_mesh_convergence() {
    let zero = AnnulusProblem::worm(0.0, 1.0, 64).unwrap();
    assert_eq!(annulus::annulus_norm_oracle(&zero).value, 0.0);
    let a = annulus::annulus_norm_oracle(&AnnulusProblem::worm(1.0, 1.0, 64).unwrap()).value;
    let b = annulus::annulus_norm_oracle(&AnnulusProblem::worm(1.0, 1.0, 128).unwrap()).value;
    assert!((a - b).abs() / b <= 0.005);
}

#[test]
fn feasibility_is_monotone_around_the_value() {
    let prob = AnnulusProblem::worm(1.0, 1.0, 64).unwrap();
    let v = annulus::annulus_norm_oracle(&prob).value;
    assert!(annulus::oracle_feasible(&prob, v * 1.001));
    assert!(!annulus::oracle_feasible(&prob, v * 0.999));
}

#[test]
fn appendix_norms_order_and_refinement() {
    let prob = AnnulusProblem::worm(1.0, 1.0, 64).unwrap();
    let n_a = annulus::annulus_norm_oracle(&prob).value;
    let a8 = annulus::appendix_norms(&prob, 8, n_a, 8, 2000, 1);
    let a12 = annulus::appendix_norms(&prob, 12, n_a, 8, 2000, 1);
    for a in [&a8, &a12] {
        assert!(a.n_l1 <= a.n_linf);
        let (m1, s1) = annulus::appendix_residuals(&prob, a.degree, &a.coefficients_l1);
        let (mi, si) = annulus::appendix_residuals(&prob, a.degree, &a.coefficients_linf);
        assert!(m1 <= s1 && mi <= si);
        assert!((m1 - a.n_l1).abs() < 1e-12 && (si - a.n_linf).abs() < 1e-12);
    }
    assert!((a12.ratio - a8.ratio).abs() / a8.ratio <= 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn value_is_linear_in_winding(beta in 0.05..4.0f64, t0 in 0.2..3.0f64, m in 16usize..200) {
        let p1 = AnnulusProblem::worm(beta, t0, m).unwrap();
        let p2 = AnnulusProblem::worm(2.0 * beta, t0, m).unwrap();
        let v1 = annulus::annulus_norm_oracle(&p1).value;
        let v2 = annulus::annulus_norm_oracle(&p2).value;
        prop_assert!(v1 > 0.0);
        prop_assert!((v2 / v1 - 2.0).abs() <= 1e-8);
    }

    #[test]
    fn value_grows_with_width(beta in 0.05..4.0f64, t0 in 0.2..3.0f64, extra in 0.01..1.0f64) {
        let a = annulus::annulus_norm_oracle(&AnnulusProblem::worm(beta, t0, 64).unwrap()).value;
        let b = annulus::annulus_norm_oracle(&AnnulusProblem::worm(beta, t0 + extra, 64).unwrap()).value;
        prop_assert!(b > a);
    }
}
