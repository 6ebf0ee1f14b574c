//! Acceptance criteria, one line per criterion. Runs without the libtest
//! harness so that the lines are always printed; exits nonzero if any
//! criterion fails.

use levicore::annulus::{self, AnnulusProblem};
use levicore::calc::{self, Backend, ComplexPoint};
use levicore::distributions::{self, DerivedOpts};
use levicore::examples;
use levicore::hypersurface::{self, Strategy};
use levicore_cli::config::RunConfig;
use levicore_cli::pipeline::{self, AnalysisReport};
use std::process::Command;
use std::time::{Duration, Instant};

// Criterion 1.
const BASELINE_SAMPLES: usize = 500;
const BASELINE_MIN_LEVI: f64 = 0.1;
const BASELINE_DELTA: f64 = 0.999;
const BASELINE_TIME: Duration = Duration::from_secs(10);
// Criterion 2.
const CROSS_GRID: usize = 101;
// Criterion 3.
const HAUSDORFF_SPACINGS: f64 = 2.0;
const QUARTIC_DELTA: f64 = 0.95;
const QUARTIC_TIME: Duration = Duration::from_secs(60);
// Criterion 4.
const FIBER_ANGLE_DEG: f64 = 5.0;
const REDUCTION_REL: f64 = 0.10;
const ORACLE_REL: f64 = 0.05;
const ORACLE_MESH: usize = 128;
const ROUTE_AGREEMENT: f64 = 0.10;
const WORM_TIME: Duration = Duration::from_secs(600);
// Criterion 5.
const HOMOGENEITY_REL: f64 = 0.005;
const MESH_REL: f64 = 0.005;
// Criterion 6.
const CHECK_POINTS: usize = 50;
const GAUGE_TOL: f64 = 1e-5;
const CLOSEDNESS_TOL: f64 = 1e-4;
const SYMMETRY_TOL: f64 = 1e-6;
const LEMMA_POINTS: usize = 20;
const LEMMA_TOL: f64 = 1e-4;
const BACKEND_POINTS: usize = 100;
const BACKEND_TOL: f64 = 1e-5;
// Criterion 7.
const APPENDIX_DEGREES: (usize, usize) = (8, 12);
const APPENDIX_REL: f64 = 0.10;
// Criterion 8.
const DETERMINISM_SAMPLES: &str = "1000";

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(failures: Vec<String>, detail: String) -> Outcome {
    if failures.is_empty() {
        Outcome { pass: true, detail }
    } else {
        Outcome { pass: false, detail: format!("{detail}; failed: {}", failures.join(", ")) }
    }
}

fn config(domain: &str, params: &[(&str, f64)]) -> RunConfig {
    let mut c = RunConfig { domain: domain.into(), normalized: true, ..RunConfig::default() };
    for (k, v) in params {
        c.params.insert((*k).into(), *v);
    }
    c
}

fn timed(cfg: &RunConfig) -> (AnalysisReport, Duration) {
    let t = Instant::now();
    let r = pipeline::analyze(cfg).expect("analyze");
    (r, t.elapsed())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn check(failures: &mut Vec<String>, ok: bool, what: impl Into<String>) {
    if !ok {
        failures.push(what.into());
    }
}

fn strongly_pseudoconvex() -> Outcome {
    let mut failures = vec![];
    let mut parts = vec![];
    for (name, params) in [("ball", vec![]), ("ellipsoid", vec![("a1", 1.0), ("a2", 2.0)])] {
        let mut cfg = config(name, &params);
        cfg.sample.count = BASELINE_SAMPLES;
        let (r, dt) = timed(&cfg);
        let df = r.df.as_ref().expect("df section");
        check(&mut failures, r.pseudoconvexity.points == BASELINE_SAMPLES, format!("{name} sample size"));
        check(&mut failures, r.pseudoconvexity.min_eigenvalue >= BASELINE_MIN_LEVI, format!("{name} min Levi eigenvalue"));
        check(&mut failures, r.null_distribution.support_size == 0, format!("{name} null support"));
        check(&mut failures, r.core.support_size == 0, format!("{name} core"));
        check(&mut failures, df.route_b.df == 1.0, format!("{name} df_via_norm"));
        check(&mut failures, df.route_a.delta >= BASELINE_DELTA, format!("{name} df_scan"));
        check(&mut failures, dt <= BASELINE_TIME, format!("{name} runtime"));
        parts.push(format!(
            "{name}: min eig {:.3}, null {}, DF_B {}, δ_A {}, {:.1}s",
            r.pseudoconvexity.min_eigenvalue,
            r.null_distribution.support_size,
            df.route_b.df,
            df.route_a.delta,
            dt.as_secs_f64()
        ));
    }
    outcome(failures, parts.join("; "))
}

fn cross_example() -> Outcome {
    let mut failures = vec![];
    let n = CROSS_GRID;
    let d0 = examples::cross_distribution(n);
    let opts = DerivedOpts::default();
    let d1 = distributions::derived(&d0, &opts).expect("derived");
    let d2 = distributions::derived(&d1, &opts).expect("derived");
    let origin = (n / 2) * n + n / 2;
    let dims1 = d1.fiber_dims();
    check(&mut failures, dims1[origin] == 2, "D′ at origin");
    check(&mut failures, dims1.iter().enumerate().all(|(i, d)| i == origin || *d == 0), "D′ off origin");
    check(&mut failures, d2.fiber_dims().iter().all(|d| *d == 0), "D′′ zero");
    let core = distributions::iterate_to_core(&d0, 8, &opts).expect("core");
    check(&mut failures, core.stabilized && core.k == 2, "k = 2");
    outcome(
        failures,
        format!(
            "{n}×{n} grid: D′ dim {} at origin, D′ support {}, D′′ support {}, k = {}",
            dims1[origin],
            d1.support_size(),
            d2.support_size(),
            core.k
        ),
    )
}

fn quartic(r: &AnalysisReport, dt: Duration) -> Outcome {
    let mut failures = vec![];
    let (h_fwd, h_bwd) = r.core.null_hausdorff.unwrap_or((f64::INFINITY, f64::INFINITY));
    let h = h_fwd.max(h_bwd);
    check(&mut failures, h <= HAUSDORFF_SPACINGS * r.core.spacing, "Hausdorff");
    check(&mut failures, r.core.stabilized && r.core.k == 1 && r.core.support_size == 0, "one derived step empties");
    let norm = r.norm.as_ref().expect("norm section");
    let n_zero = norm.reduction.levels.iter().all(|l| l.null_value == 0.0 && l.core_value == 0.0);
    check(&mut failures, n_zero, "n = 0");
    let df = r.df.as_ref().expect("df section");
    check(&mut failures, df.route_b.df == 1.0, "df_via_norm");
    check(&mut failures, df.route_a.delta >= QUARTIC_DELTA, "df_scan");
    check(&mut failures, df.route_a.basis_id.as_deref().is_some_and(|b| b.contains('4')), "degree-4 gauge");
    check(&mut failures, dt <= QUARTIC_TIME, "runtime");
    outcome(
        failures,
        format!(
            "Hausdorff {:.2e} vs spacing {:.2e}, k {}, n {}, DF_B {}, δ_A {:.4} ({}), {:.1}s",
            h,
            r.core.spacing,
            r.core.k,
            norm.reduction.levels.last().map_or(f64::NAN, |l| l.null_value),
            df.route_b.df,
            df.route_a.delta,
            df.route_a.basis_id.clone().unwrap_or_default(),
            dt.as_secs_f64()
        ),
    )
}

fn worm(r: &AnalysisReport, dt: Duration) -> Outcome {
    let mut failures = vec![];
    let (h_fwd, h_bwd) = r.core.hausdorff.unwrap_or((f64::INFINITY, f64::INFINITY));
    let h = h_fwd.max(h_bwd);
    check(&mut failures, r.core.support_size > 0 && h <= HAUSDORFF_SPACINGS * r.core.spacing, "core is the annulus");
    let angle = r.core.max_fiber_angle_deg.unwrap_or(90.0);
    check(&mut failures, angle <= FIBER_ANGLE_DEG, "fiber angle");
    let norm = r.norm.as_ref().expect("norm section");
    check(&mut failures, norm.canonical == f64::INFINITY, "f = 0 gives +∞");
    let big = norm.reduction.levels.last().expect("levels");
    let gap = rel(big.core_value, big.null_value);
    check(&mut failures, gap <= REDUCTION_REL, "null vs core");
    check(&mut failures, norm.reduction.levels.len() >= 2 && norm.reduction.gap_non_increasing, "gap non-increasing over two bases");
    let prob = AnnulusProblem::worm(r.config.params.get("beta").copied().unwrap_or(1.0), 1.0, ORACLE_MESH).expect("annulus");
    let oracle = annulus::annulus_norm_oracle(&prob).value;
    check(&mut failures, rel(big.null_value, oracle) <= ORACLE_REL, "null vs oracle");
    check(&mut failures, rel(big.core_value, oracle) <= ORACLE_REL, "core vs oracle");
    let df = r.df.as_ref().expect("df section");
    check(&mut failures, df.agreement_gap <= ROUTE_AGREEMENT, "route agreement");
    check(&mut failures, dt <= WORM_TIME, "runtime");
    let values: Vec<String> = norm
        .reduction
        .levels
        .iter()
        .map(|l| format!("{}: {:.4}/{:.4}", l.basis_size, l.null_value, l.core_value))
        .collect();
    outcome(
        failures,
        format!(
            "Hausdorff {:.2e}, angle {:.2}°, n(null/core) [{}], oracle {:.4}, δ_A {:.4}, DF_B {:.4}, gap {:.1}%, {:.1}s",
            h,
            angle,
            values.join(", "),
            oracle,
            df.route_a.delta,
            df.route_b.df,
            100.0 * df.agreement_gap,
            dt.as_secs_f64()
        ),
    )
}

fn oracle_properties() -> Outcome {
    let mut failures = vec![];
    let value = |beta: f64, m: usize| annulus::annulus_norm_oracle(&AnnulusProblem::worm(beta, 1.0, m).unwrap()).value;
    let zero = value(0.0, 64);
    check(&mut failures, zero == 0.0, "β = 0");
    let mut worst_ratio: f64 = 0.0;
    for beta in [0.25, 0.5, 1.0, 2.0] {
        let (a, b) = (value(beta, 64), value(2.0 * beta, 64));
        check(&mut failures, a > 0.0, format!("positive at β = {beta}"));
        worst_ratio = worst_ratio.max(rel(b / a, 2.0));
    }
    check(&mut failures, worst_ratio <= HOMOGENEITY_REL, "homogeneity");
    let (m64, m128) = (value(1.0, 64), value(1.0, 128));
    let mesh = rel(m64, m128);
    check(&mut failures, mesh <= MESH_REL, "mesh convergence");
    outcome(
        failures,
        format!("β=0 → {zero}, |ratio − 2|/2 ≤ {worst_ratio:.1e}, m64 {m64:.6} vs m128 {m128:.6} ({:.3}%)", 100.0 * mesh),
    )
}

fn identity_suites(q: &AnalysisReport, w: &AnalysisReport) -> Outcome {
    let mut failures = vec![];
    let mut parts = vec![];
    for (name, r) in [("quartic", q), ("worm", w)] {
        match &r.checks.consistency {
            Some(c) => {
                check(&mut failures, c.points == CHECK_POINTS, format!("{name} point count"));
                check(&mut failures, c.gauge_residual < GAUGE_TOL, format!("{name} gauge residual"));
                check(&mut failures, c.closedness_residual < CLOSEDNESS_TOL, format!("{name} closedness residual"));
                check(&mut failures, c.symmetry_residual < SYMMETRY_TOL, format!("{name} symmetry residual"));
                parts.push(format!(
                    "{name} consistency {:.1e}/{:.1e}/{:.1e}",
                    c.gauge_residual, c.closedness_residual, c.symmetry_residual
                ));
            }
            None => failures.push(format!("{name} consistency missing")),
        }
    }
    match &w.checks.key_lemma {
        Some(k) => {
            check(&mut failures, k.points == LEMMA_POINTS && k.max_residual <= LEMMA_TOL, "key lemma");
            parts.push(format!("key lemma {:.1e} on {}", k.max_residual, k.points));
        }
        None => failures.push("key lemma missing".into()),
    }
    let mut worst: f64 = 0.0;
    for e in examples::registry() {
        let d = examples::make_domain(&e.name, &Default::default()).unwrap();
        let s = hypersurface::sample_boundary(&d.function, Strategy::Random, BACKEND_POINTS, 11);
        check(&mut failures, s.points.len() == BACKEND_POINTS, format!("{} sample", e.name));
        for bp in &s.points {
            let p = ComplexPoint::from_real(&bp.real());
            let a = calc::hess_mixed(&d.function, &p, Backend::Dual).unwrap();
            let b = calc::hess_mixed(&d.function, &p, Backend::FiniteDiff).unwrap();
            let ga = calc::grad10(&d.function, &p, Backend::Dual).unwrap();
            let gb = calc::grad10(&d.function, &p, Backend::FiniteDiff).unwrap();
            let gd = ga.0.iter().zip(&gb.0).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            worst = worst.max(a.dist(&b) / (1.0 + a.norm())).max(gd / (1.0 + ga.norm()));
        }
    }
    check(&mut failures, worst <= BACKEND_TOL, "AD vs FD");
    parts.push(format!("AD vs FD {worst:.1e}"));
    outcome(failures, parts.join(", "))
}

fn appendix() -> Outcome {
    let mut failures = vec![];
    let run = |d: usize| {
        let mut cfg = config("worm", &[]);
        cfg.oracle.appendix_degree = d;
        pipeline::oracle(&cfg).expect("oracle").appendix
    };
    let (a, b) = (run(APPENDIX_DEGREES.0), run(APPENDIX_DEGREES.1));
    let prob = AnnulusProblem::worm(1.0, 1.0, 64).unwrap();
    for n in [&a, &b] {
        check(&mut failures, n.n_l1 <= n.n_linf, format!("d={} reported norms", n.degree));
        for c in [&n.coefficients_l1, &n.coefficients_linf] {
            let (mean, sup) = annulus::appendix_residuals(&prob, n.degree, c);
            check(&mut failures, mean <= sup, format!("d={} candidate", n.degree));
        }
    }
    let drift = rel(b.ratio, a.ratio);
    check(&mut failures, drift <= APPENDIX_REL, "ratio stability");
    outcome(
        failures,
        format!(
            "d={}: nL1 {:.4} nL∞ {:.4} ratio {:.4}; d={}: nL1 {:.4} nL∞ {:.4} ratio {:.4}; drift {:.2}% (report only, constant unknown)",
            a.degree, a.n_l1, a.n_linf, a.ratio, b.degree, b.n_l1, b.n_linf, b.ratio, 100.0 * drift
        ),
    )
}

fn determinism() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_levicore"))
            .args(["analyze", "--domain", "worm", "--samples", DETERMINISM_SAMPLES, "--normalized"])
            .output()
            .expect("run levicore")
    };
    let (a, b) = (run(), run());
    let mut failures = vec![];
    check(&mut failures, a.status.success() && b.status.success(), "exit status");
    check(&mut failures, !a.stdout.is_empty() && a.stdout == b.stdout, "byte-identical reports");
    outcome(failures, format!("two worm analyze runs, {} bytes each", a.stdout.len()))
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = vec![];
    let mut report = |id: usize, name: &'static str, o: Outcome| {
        println!("criterion {id} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    report(1, "strongly pseudoconvex baseline", strongly_pseudoconvex());
    report(2, "cross distribution example", cross_example());
    let (q, qt) = timed(&config("quartic", &[]));
    report(3, "quartic", quartic(&q, qt));
    let (w, wt) = timed(&config("worm", &[("beta", 1.0)]));
    report(4, "worm", worm(&w, wt));
    report(5, "oracle properties", oracle_properties());
    report(6, "identity suites", identity_suites(&q, &w));
    report(7, "appendix norms", appendix());
    report(8, "determinism", determinism());
    let failed = results.iter().filter(|(_, _, o)| !o.pass).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
