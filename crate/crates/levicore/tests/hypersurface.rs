use levicore::calc;
use levicore::examples::{self, make_domain};
use levicore::hypersurface::{self, DefiningFunction, Strategy};
use proptest::prelude::*;
use std::collections::BTreeMap;

#[test]
fn registry_domains_build_with_defaults() {
    for e in examples::registry() {
        let d = make_domain(&e.name, &BTreeMap::new()).unwrap();
        assert_eq!(d.name, e.name);
        for p in &e.params {
            assert_eq!(d.params[&p.name], p.default);
        }
    }
}

#[test]
fn strongly_pseudoconvex_baselines() {
    for f in [DefiningFunction::ball(2), DefiningFunction::ellipsoid(&[1.0, 2.0])] {
        let s = hypersurface::sample_boundary(&f, Strategy::Random, 500, 3);
        let rep = hypersurface::pseudoconvexity_report(&s.points, 1e-6);
        assert!(rep.ok());
        assert!(rep.min_eigenvalue >= 0.1, "{}: {}", f.id, rep.min_eigenvalue);
    }
}

#[test]
fn quartic_minimum_is_attained_on_the_circle() {
    let f = DefiningFunction::quartic();
    let s = hypersurface::sample_boundary(&f, Strategy::Param, 200, 1);
    let rep = hypersurface::pseudoconvexity_report(&s.points, 1e-6);
    assert!(rep.ok());
    assert!(rep.min_eigenvalue.abs() < 1e-8);
}

#[test]
fn saddle_reports_violations() {
    let f = DefiningFunction::saddle();
    let s = hypersurface::sample_boundary(&f, Strategy::Random, 300, 2);
    let rep = hypersurface::pseudoconvexity_report(&s.points, 1e-6);
    assert!(!rep.ok());
    assert!(rep.min_eigenvalue < 0.0);
}

#[test]
fn sampling_is_deterministic() {
    let f = DefiningFunction::worm(1.0, 1.0, 1.0);
    for strategy in [Strategy::Grid, Strategy::Random, Strategy::Param] {
        let a = hypersurface::sample_boundary(&f, strategy, 300, 9);
        let b = hypersurface::sample_boundary(&f, strategy, 300, 9);
        let pa: Vec<Vec<f64>> = a.points.iter().map(|p| p.real()).collect();
        let pb: Vec<Vec<f64>> = b.points.iter().map(|p| p.real()).collect();
        assert_eq!(pa, pb);
    }
}

#[test]
fn worm_projection_lands_on_boundary() {
    let f = DefiningFunction::worm(1.0, 1.0, 1.0);
    let bp = hypersurface::project_to_boundary(&f, &[0.9, 0.2, 0.1, -0.05], 1e-12).unwrap();
    assert!(calc::value(&f, &bp.real()).unwrap().abs() <= 1e-10);
    assert!(bp.frame_defect() < hypersurface::FRAME_TOL);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_is_orthonormal_and_tangential(x in prop::collection::vec(-1.0..1.0f64, 4)) {
        prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 0.01);
        let f = DefiningFunction::ellipsoid(&[1.0, 2.0]);
        let bp = hypersurface::project_to_boundary(&f, &x, 1e-12).unwrap();
        prop_assert!(bp.frame_defect() < 1e-12);
        for v in &bp.frame {
            prop_assert!(bp.dr.apply(v).norm() < 1e-12);
        }
    }

    // Scaling r by a positive constant scales the Levi form and leaves the
    // null directions alone.
    #[test]
    fn levi_form_is_homogeneous_in_r(t in 0.0..6.3f64, s in 0.1..10.0f64) {
        let x = [0.0, 0.0, t.cos(), t.sin()];
        let f = DefiningFunction::quartic();
        let bp = hypersurface::BoundaryPoint::at(&f, &x).unwrap();
        let jet = calc::jet2(&f, &x, calc::Backend::Dual).unwrap();
        let scaled = calc::Jet2 { value: s * jet.value, grad: jet.grad.iter().map(|v| s * v).collect(), hess: jet.hess.iter().map(|v| s * v).collect() };
        let l1 = hypersurface::levi_form(&bp);
        let l2 = scaled.levi_matrix().restrict(&bp.frame);
        prop_assert!(l2.dist(&l1.scaled(s)) < 1e-12);
    }
}
