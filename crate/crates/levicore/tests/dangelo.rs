use levicore::annulus::{self, AnnulusProblem};
use levicore::calc::C64;
use levicore::dangelo::{self, Budget, DAngeloForm};
use levicore::distributions::{self, SampledDistribution};
use levicore::examples::{make_domain, ExampleDomain};
use levicore::gauge::{Gauge, GaugeBasis};
use levicore::hypersurface::{self, BoundaryPoint, Strategy};
use proptest::prelude::*;
use std::collections::BTreeMap;
use std::sync::OnceLock;

fn worm() -> ExampleDomain {
    make_domain("worm", &BTreeMap::new()).unwrap()
}

fn worm_null(count: usize) -> SampledDistribution {
    let d = worm();
    let s = hypersurface::sample_boundary(&d.function, Strategy::Param, count, 1);
    let pts: Vec<BoundaryPoint> = s.points.into_iter().filter(|b| d.in_patch(&b.real())).collect();
    distributions::levi_null(&pts, 1e-6).unwrap()
}

fn small_null() -> &'static SampledDistribution {
    static D: OnceLock<SampledDistribution> = OnceLock::new();
    D.get_or_init(|| worm_null(1000))
}

fn radial_gauge(coeffs: &[f64]) -> Gauge {
    let basis = GaugeBasis::radial_small(2, -0.5, 0.5);
    let mut c = vec![0.0; basis.len()];
    c[..coeffs.len()].copy_from_slice(coeffs);
    Gauge { basis, coeffs: c }
}

#[test]
fn worm_alpha_on_annulus_matches_symbolic_value() {
    // At (z, 0): N = −e^{ih}∂w and r_{z w̄} = −iβ e^{ih}/z, so α(∂z) = iβ/z.
    let d = worm();
    let a = DAngeloForm::canonical(&d.function);
    for k in 0..10 {
        let z = C64::from_polar(0.75 + 0.05 * k as f64, 0.9 * k as f64);
        let bp = BoundaryPoint::at(&d.function, &[z.re, z.im, 0.0, 0.0]).unwrap();
        let v = dangelo::alpha_eval(&a, &bp, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        let expect = C64::new(0.0, 1.0) / z;
        assert!((v - expect).norm() < 1e-6, "{v} vs {expect}");
    }
}

#[test]
fn worm_support_is_the_annulus() {
    let null = small_null();
    let d = worm();
    assert!(null.support_size() > 100);
    for i in null.support() {
        assert!(d.locus_distance(&null.points[i]).unwrap() < 1e-6);
    }
}

#[test]
fn pluriharmonic_gauge_gives_infinite_norm() {
    let a = DAngeloForm::canonical(&worm().function);
    assert_eq!(dangelo::n_of_form(&a, small_null()).unwrap(), f64::INFINITY);
}

#[test]
fn optimized_radial_gauge_matches_oracle() {
    let d = worm();
    let null = worm_null(4000);
    let est = dangelo::optimize_n(&d.function, &null, &d.gauge_basis(4), f64::INFINITY, &Budget::default()).unwrap();
    let oracle = annulus::annulus_norm_oracle(&AnnulusProblem::worm(1.0, 1.0, 128).unwrap()).value;
    assert!((est.value - oracle).abs() / oracle <= 0.05, "{} vs {oracle}", est.value);
    let g = Gauge { basis: est.basis.clone(), coeffs: est.coefficients.clone() };
    let a = DAngeloForm::with_gauge(&d.function, g).unwrap();
    let direct = dangelo::n_of_form(&a, &null).unwrap();
    assert!((direct - est.value).abs() <= 1e-6 * est.value);
    for i in null.support().into_iter().step_by(97) {
        let bp = BoundaryPoint::at(&d.function, &null.points[i]).unwrap();
        let dbar = dangelo::dbar_alpha(&a, &bp, &null.fibers[i]).unwrap();
        assert!(dbar.get(0, 0).re > 0.0);
    }
}

#[test]
fn norm_is_monotone_in_k() {
    let d = worm();
    let basis = GaugeBasis::radial_small(2, -0.5, 0.5);
    let model = dangelo::AffineModel::build(&d.function, small_null(), &basis).unwrap();
    let budget = Budget { starts: 2, evaluations: 600, ..Budget::default() };
    let vals: Vec<f64> = [2.0, 4.0, 8.0, f64::INFINITY]
        .iter()
        .map(|&k| dangelo::optimize_model(&model, k, &budget, None).value)
        .collect();
    for w in vals.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 2.0 * budget.bisection_rtol), "{vals:?}");
    }
}

#[test]
fn worm_consistency_suite_passes_with_a_gauge() {
    let d = worm();
    let a = DAngeloForm::with_gauge(&d.function, radial_gauge(&[0.3, -0.2, 0.1])).unwrap();
    let null = small_null();
    let support = null.support();
    let keep: Vec<usize> = support.iter().copied().step_by(support.len() / 50).take(50).collect();
    let rep = dangelo::consistency_suite(&a, &null.restricted(&keep)).unwrap();
    assert_eq!(rep.points, 50);
    assert!(rep.pass, "{rep:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // The norm of a fixed form is a sup over points, so it can only drop on
    // a subdistribution.
    #[test]
    fn norm_is_monotone_in_the_distribution(
        c0 in -1.0..1.0f64, c1 in -1.0..1.0f64, c2 in -1.0..1.0f64, stride in 2usize..9,
    ) {
        let null = small_null();
        let a = DAngeloForm::with_gauge(&worm().function, radial_gauge(&[c0, c1, c2])).unwrap();
        let keep: Vec<usize> = null.support().into_iter().step_by(stride).collect();
        let sub = dangelo::n_of_form(&a, &null.restricted(&keep)).unwrap();
        let full = dangelo::n_of_form(&a, null).unwrap();
        prop_assert!(sub <= full);
    }
}
