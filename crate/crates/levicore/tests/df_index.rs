use levicore::calc::C64;
use levicore::dangelo::Budget;
use levicore::df_index::{self, CollarGrid, GaugeSearch, ScanOpts};
use levicore::distributions;
use levicore::examples::make_domain;
use levicore::gauge::GaugeBasis;
use levicore::hypersurface::{self, BoundaryPoint, DefiningFunction, Strategy};
use proptest::prelude::*;
use std::collections::BTreeMap;
use std::sync::OnceLock;

fn quartic_grid() -> &'static CollarGrid {
    static G: OnceLock<CollarGrid> = OnceLock::new();
    G.get_or_init(|| {
        let r = DefiningFunction::quartic();
        let base = hypersurface::param_points(&r, 200).unwrap();
        CollarGrid::from_boundary(&r, &base, &df_index::default_depths(1.0)).unwrap()
    })
}

#[test]
fn collar_points_sit_at_their_depths() {
    let r = DefiningFunction::quartic();
    let g = quartic_grid();
    g.validate(&r).unwrap();
    for (x, d) in g.points.iter().zip(&g.depths) {
        let v = levicore::calc::value(&r, x).unwrap();
        assert!((v + d).abs() < 1e-10, "{v} vs -{d}");
    }
}

#[test]
fn quartic_scan_with_degree_four_gauge() {
    let r = DefiningFunction::quartic();
    let search = GaugeSearch { basis: GaugeBasis::polynomial(2, 4), warm: vec![] };
    let a = df_index::df_scan(&r, quartic_grid(), &ScanOpts::default(), Some(&search)).unwrap();
    assert!(a.delta >= 0.95, "{}", a.delta);
}

#[test]
fn quartic_norm_route_gives_one() {
    let d = make_domain("quartic", &BTreeMap::new()).unwrap();
    let s = hypersurface::sample_boundary(&d.function, Strategy::Param, 600, 1);
    let null = distributions::levi_null(&s.points, 1e-6).unwrap();
    let b = df_index::df_via_norm(&d.function, &null, &d.gauge_basis(4), f64::INFINITY, &Budget::default()).unwrap();
    assert_eq!(b.n_estimate.value, 0.0);
    assert_eq!(b.df, 1.0);
}

#[test]
fn key_lemma_on_quartic_circle() {
    // Both sides vanish at (0, 1) for Z = ∂z1: α ≡ 0 and b1 = O(|z1|⁴).
    let r = DefiningFunction::quartic();
    let bp = BoundaryPoint::at(&r, &[0.0, 0.0, 1.0, 0.0]).unwrap();
    let k = df_index::key_lemma_check(&r, &bp, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
    assert!(k.lhs.norm() < 1e-5 && k.rhs.norm() < 1e-5);
    assert!(k.residual <= 1e-5);
}

#[test]
fn key_lemma_on_worm_annulus() {
    let d = make_domain("worm", &BTreeMap::new()).unwrap();
    for p in d.locus_samples(20) {
        let bp = BoundaryPoint::at(&d.function, &p).unwrap();
        let k = df_index::key_lemma_check(&d.function, &bp, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        assert!(k.residual <= 1e-4, "{p:?}: {k:?}");
        assert!(k.rhs.norm() > 1e-3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // Raising δ removes part of a positive rank-one term.
    #[test]
    fn defect_is_non_increasing_in_delta(a in 0.01..0.99f64, b in 0.01..0.99f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let r = DefiningFunction::quartic();
        let g = quartic_grid();
        let d_lo = df_index::psh_defect(&r, lo, g).unwrap();
        let d_hi = df_index::psh_defect(&r, hi, g).unwrap();
        prop_assert!(d_hi <= d_lo + 1e-12);
    }
}
