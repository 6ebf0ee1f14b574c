use levicore::distributions::{self, DerivedOpts, SampledDistribution};
use levicore::examples::{self, make_domain};
use levicore::hypersurface::{self, Strategy};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn grid_index(n: usize, i: usize, j: usize) -> usize {
    i * n + j
}

#[test]
fn cross_example_with_numerical_tangents() {
    let n = 101;
    let d0 = examples::cross_distribution(n);
    let opts = DerivedOpts::default();
    let d1 = distributions::derived(&d0, &opts).unwrap();
    let d2 = distributions::derived(&d1, &opts).unwrap();
    let origin = grid_index(n, 50, 50);
    assert_eq!(d1.support(), vec![origin]);
    assert_eq!(d1.fibers[origin].len(), 2);
    assert_eq!(d2.support_size(), 0);
    let core = distributions::iterate_to_core(&d0, 8, &opts).unwrap();
    assert!(core.stabilized);
    assert_eq!(core.k, 2);
    assert_eq!(core.support_sizes[..3], [2 * n - 1, 1, 0]);
}

#[test]
fn cross_example_with_exact_tangents() {
    let n = 101;
    let d0 = examples::cross_distribution(n);
    let tol = 5f64.to_radians();
    let step = |d: &SampledDistribution| {
        let origin_only = d.support_size() == 1;
        distributions::derived_with(d, |i| Ok(examples::cross_tangent(origin_only, &d.points[i])), tol)
    };
    let core = distributions::iterate_with(&d0, 8, tol, step).unwrap();
    assert_eq!(core.k, 2);
    assert_eq!(core.core.support_size(), 0);
}

#[test]
fn quartic_null_distribution_lies_on_circle() {
    let d = make_domain("quartic", &BTreeMap::new()).unwrap();
    let s = hypersurface::sample_boundary(&d.function, Strategy::Param, 600, 1);
    let null = distributions::levi_null(&s.points, 1e-6).unwrap();
    assert!(null.support_size() > 0);
    for i in null.support() {
        let x = &null.points[i];
        assert!(d.locus_distance(x).unwrap() < 1e-6, "{x:?}");
        assert_eq!(null.fibers[i].len(), 1);
        let v = &null.fibers[i][0];
        assert!(v[1].norm() < 1e-8 && (v[0].norm() - 1.0).abs() < 1e-8);
    }
    let core = distributions::iterate_to_core(&null, 8, &DerivedOpts::default()).unwrap();
    assert_eq!(core.k, 1);
    assert_eq!(core.core.support_size(), 0);
}

#[test]
fn circle_tangent_is_the_rotation_direction() {
    let d = make_domain("quartic", &BTreeMap::new()).unwrap();
    let cloud = d.locus_samples(400);
    let p = &cloud[37];
    let t = distributions::tangent_estimate(&cloud, p, 0.05, distributions::GAP_RATIO, 2).unwrap();
    assert_eq!(t.basis.len(), 1);
    let exact = &d.exact_tangent(p)[0];
    let cos: f64 = t.basis[0].iter().zip(exact).map(|(a, b)| a * b).sum::<f64>().abs();
    assert!(cos.min(1.0).acos() <= 2f64.to_radians());
}

#[test]
fn json_round_trip_of_a_null_distribution() {
    let d = make_domain("quartic", &BTreeMap::new()).unwrap();
    let s = hypersurface::sample_boundary(&d.function, Strategy::Param, 200, 1);
    let null = distributions::levi_null(&s.points, 1e-6).unwrap();
    let back = SampledDistribution::from_json(&null.to_json()).unwrap();
    assert_eq!(back, null);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Derived distributions only shrink: supports are nested and fibers
    // never gain dimension.
    #[test]
    fn derived_step_is_monotone(n in 9usize..31, a in 0.2..3.0f64, b in 0.2..3.0f64) {
        let pts: Vec<Vec<f64>> = (0..n)
            .flat_map(|i| (0..n).map(move |j| {
                let s = |k: usize| -1.0 + 2.0 * k as f64 / (n - 1) as f64;
                vec![s(i), s(j)]
            }))
            .collect();
        let d0 = distributions::real_form_distribution(pts, 2, |p| vec![a * p[0], 0.0, 0.0, b * p[1]], 1e-9);
        let d1 = distributions::derived(&d0, &DerivedOpts::default()).unwrap();
        for (f0, f1) in d0.fibers.iter().zip(&d1.fibers) {
            prop_assert!(f1.len() <= f0.len());
        }
    }
}
