//! Stages shared by the subcommands and the report types they produce.

use crate::config::{ConfigError, RunConfig};
use levicore::annulus::{self, AppendixNorms, OracleResult};
use levicore::calc::C64;
use levicore::dangelo::{self, ConsistencyReport, DAngeloForm, NormEstimate};
use levicore::df_index::{self, CollarGrid, DFReport, GaugeSearch, ReductionReport, ScanOpts};
use levicore::distributions::{self, SampledDistribution};
use levicore::calc::Smooth;
use levicore::examples::{self, ExampleDomain, Metadata};
use levicore::gauge::{Gauge, GaugeBasis};
use levicore::hypersurface::{self, BoundaryPoint, PseudoconvexityReport, Strategy};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

pub const SCHEMA_VERSION: &str = "levicore.analysis/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_PSEUDOCONVEX: i32 = 2;
pub const EXIT_NOT_STABILIZED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Example(#[from] examples::ExampleError),
    #[error(transparent)]
    Dist(#[from] distributions::DistError),
    #[error(transparent)]
    DAngelo(#[from] dangelo::DAngeloError),
    #[error(transparent)]
    Df(#[from] df_index::DfError),
    #[error(transparent)]
    Annulus(#[from] annulus::AnnulusError),
    #[error("{0}")]
    Other(String),
}

impl RunError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Example(_) => "domain",
            Self::Dist(_) => "distribution",
            Self::DAngelo(_) => "dangelo",
            Self::Df(_) => "df-index",
            Self::Annulus(_) => "oracle",
            Self::Other(_) => "other",
        }
    }
}

pub type Result<T> = std::result::Result<T, RunError>;

/// Wall-clock milliseconds per stage, in pipeline order.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
pub struct Timings(pub Vec<(String, f64)>);

struct Clock {
    start: Instant,
    timings: Timings,
}

impl Clock {
    fn new() -> Self {
        Self { start: Instant::now(), timings: Timings::default() }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.0.push((stage.into(), (now - self.start).as_secs_f64() * 1e3));
        self.start = now;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DistributionSummary {
    pub points: usize,
    pub support_size: usize,
    pub max_fiber_dim: usize,
    /// Number of points per fiber dimension.
    pub fiber_dims: BTreeMap<usize, usize>,
}

impl DistributionSummary {
    pub fn of(d: &SampledDistribution) -> Self {
        let mut fiber_dims = BTreeMap::new();
        for k in d.fiber_dims() {
            *fiber_dims.entry(k).or_insert(0) += 1;
        }
        Self { points: d.points.len(), support_size: d.support_size(), max_fiber_dim: d.max_fiber_dim(), fiber_dims }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoreSummary {
    pub support_size: usize,
    pub fiber_dims: BTreeMap<usize, usize>,
    /// Stabilization index.
    pub k: usize,
    pub stabilized: bool,
    pub support_sizes: Vec<usize>,
    /// Hausdorff distances support→locus and locus→support, when the
    /// domain has an exact locus and the support is nonempty.
    pub hausdorff: Option<(f64, f64)>,
    /// The same for the support of the null distribution.
    pub null_hausdorff: Option<(f64, f64)>,
    /// Median nearest-neighbour spacing of the null support.
    pub spacing: f64,
    /// Largest principal angle (degrees) between a core fiber and the exact
    /// null fiber.
    pub max_fiber_angle_deg: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyLemmaSummary {
    pub points: usize,
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Checks {
    pub consistency: Option<ConsistencyReport>,
    pub key_lemma: Option<KeyLemmaSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormSection {
    /// `𝔫` of the canonical form (zero gauge) on the null distribution.
    #[serde(with = "levicore::extreal")]
    pub canonical: f64,
    pub reduction: ReductionReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisReport {
    pub schema_version: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub metadata: Metadata,
    pub sample_warning: Option<String>,
    pub pseudoconvexity: PseudoconvexityReport,
    pub null_distribution: DistributionSummary,
    pub core: CoreSummary,
    pub norm: Option<NormSection>,
    pub df: Option<DFReport>,
    pub checks: Checks,
    pub status: String,
    pub exit_code: i32,
    pub timings: Option<Timings>,
}

/// Boundary sample, null distribution restricted to the domain's patch and
/// its core.
pub struct Geometry {
    pub domain: ExampleDomain,
    pub sample: Vec<BoundaryPoint>,
    pub sample_warning: Option<String>,
    pub pseudoconvexity: PseudoconvexityReport,
    pub null: SampledDistribution,
    pub core: distributions::CoreResult,
}

pub fn domain(cfg: &RunConfig) -> Result<ExampleDomain> {
    cfg.validate()?;
    Ok(examples::make_domain(&cfg.domain, &cfg.params)?)
}

fn geometry(cfg: &RunConfig, clock: &mut Clock) -> Result<Geometry> {
    let domain = domain(cfg)?;
    let s = hypersurface::sample_boundary(&domain.function, cfg.sample.strategy, cfg.sample.count, cfg.sample.seed);
    let sample_warning = s.warning();
    clock.lap("sample");
    let pseudoconvexity = hypersurface::pseudoconvexity_report(&s.points, cfg.tolerances.levi_rel_tol);
    clock.lap("pseudoconvexity");
    // Violating points are reported and left out of the null distribution.
    let bad: std::collections::BTreeSet<usize> = pseudoconvexity.violations.iter().map(|v| v.index).collect();
    let clean: Vec<BoundaryPoint> =
        s.points.iter().enumerate().filter(|(i, _)| !bad.contains(i)).map(|(_, p)| p.clone()).collect();
    let null = distributions::levi_null(&clean, cfg.tolerances.levi_rel_tol)?;
    let keep: Vec<usize> = null.support().into_iter().filter(|&i| domain.in_patch(&null.points[i])).collect();
    let null = null.restricted(&keep);
    clock.lap("null");
    let core = distributions::iterate_to_core(&null, cfg.tolerances.max_core_iter, &cfg.tolerances.derived)?;
    clock.lap("core");
    Ok(Geometry { domain, sample: s.points, sample_warning, pseudoconvexity, null, core })
}

fn core_summary(g: &Geometry) -> CoreSummary {
    let c = &g.core.core;
    let support: Vec<Vec<f64>> = c.support().into_iter().map(|i| c.points[i].clone()).collect();
    let null_support: Vec<Vec<f64>> = g.null.support().into_iter().map(|i| g.null.points[i].clone()).collect();
    let to_locus = |pts: &[Vec<f64>]| {
        (!pts.is_empty() && g.domain.locus_distance(&pts[0]).is_some())
            .then(|| examples::hausdorff_to_locus(&g.domain, pts, 400))
    };
    let hausdorff = to_locus(&support);
    let null_hausdorff = to_locus(&null_support);
    let max_fiber_angle_deg = (!support.is_empty()).then(|| {
        c.support()
            .into_iter()
            .map(|i| {
                let exact = g.domain.exact_null_fiber(&c.points[i]);
                let fiber = levicore::calc::orthonormalize(&c.fibers[i], 1e-12);
                let exact = levicore::calc::orthonormalize(&exact, 1e-12);
                if exact.is_empty() {
                    return 90.0;
                }
                levicore::calc::principal_angles(&fiber, &exact)
                    .last()
                    .map_or(90.0, |(a, _)| a.to_degrees())
            })
            .fold(0.0, f64::max)
    });
    let sum = DistributionSummary::of(c);
    CoreSummary {
        support_size: sum.support_size,
        fiber_dims: sum.fiber_dims,
        k: g.core.k,
        stabilized: g.core.stabilized,
        support_sizes: g.core.support_sizes.clone(),
        hausdorff,
        null_hausdorff,
        spacing: if null_support.len() > 1 { distributions::median_spacing(&null_support) } else { 0.0 },
        max_fiber_angle_deg,
    }
}

/// Evenly spaced subset of the support with at most `count` points.
fn spread_subset(d: &SampledDistribution, count: usize) -> SampledDistribution {
    let support = d.support();
    if support.len() <= count {
        return d.clone();
    }
    let keep: Vec<usize> = (0..count).map(|i| support[i * support.len() / count]).collect();
    d.restricted(&keep)
}

/// Fixed quadratic gauge so that the gauge shift check is not vacuous.
fn test_gauge(n: usize) -> Gauge {
    let basis = GaugeBasis::polynomial(n, 2);
    let coeffs = (0..basis.len()).map(|i| 0.1 * (1.7 * (i + 1) as f64).sin()).collect();
    Gauge { basis, coeffs }
}

fn checks(cfg: &RunConfig, g: &Geometry) -> Result<Checks> {
    if g.null.support_size() == 0 {
        return Ok(Checks { consistency: None, key_lemma: None });
    }
    let form = DAngeloForm::with_gauge(&g.domain.function, test_gauge(g.domain.function.n()))?;
    let consistency = dangelo::consistency_suite(&form, &spread_subset(&g.null, cfg.tolerances.check_points))?;
    let lemma_dist = spread_subset(&g.null, cfg.tolerances.key_lemma_points);
    let mut max_residual: f64 = 0.0;
    let mut points = 0;
    for i in lemma_dist.support() {
        let bp = BoundaryPoint::at(&g.domain.function, &lemma_dist.points[i]).map_err(|e| RunError::Other(e.to_string()))?;
        let z: Vec<C64> = lemma_dist.fibers[i][0].clone();
        let res = df_index::key_lemma_check(&g.domain.function, &bp, &z)?;
        max_residual = max_residual.max(res.residual);
        points += 1;
    }
    let tol = 1e-4;
    Ok(Checks { consistency: Some(consistency), key_lemma: Some(KeyLemmaSummary { points, max_residual, tol, pass: max_residual <= tol }) })
}

fn budget(cfg: &RunConfig) -> dangelo::Budget {
    dangelo::Budget { seed: cfg.sample.seed, ..cfg.budget.clone() }
}

fn norm_section(cfg: &RunConfig, g: &Geometry) -> Result<NormSection> {
    let (small, big) = cfg.bases(&g.domain)?;
    let bases = if small == big { vec![big] } else { vec![small, big] };
    let canonical = dangelo::n_of_form(&DAngeloForm::canonical(&g.domain.function), &g.null)?;
    let reduction = df_index::reduction_check(&g.domain.function, &g.null, &g.core.core, &bases, cfg.k, &budget(cfg))?;
    Ok(NormSection { canonical, reduction })
}

pub fn collar(cfg: &RunConfig, domain: &ExampleDomain) -> Result<CollarGrid> {
    let s = hypersurface::sample_boundary(&domain.function, Strategy::Param, cfg.collar.base_points, cfg.sample.seed);
    let base: Vec<Vec<f64>> = s.points.iter().map(|b| b.real()).filter(|x| domain.in_patch(x)).collect();
    Ok(CollarGrid::from_boundary(&domain.function, &base, &cfg.collar.depths(domain.function.scale()))?)
}

fn scan_opts(cfg: &RunConfig) -> ScanOpts {
    let defaults = ScanOpts::default();
    ScanOpts {
        delta_grid: cfg.delta_grid.clone(),
        defect_tol: cfg.tolerances.defect_tol,
        resolution: cfg.tolerances.delta_resolution,
        budget: dangelo::Budget { seed: cfg.sample.seed, ..defaults.budget },
    }
}

/// Both index routes. Route A searches the gauge family of the largest
/// basis, warm-started from the route B certificate.
fn df_report(cfg: &RunConfig, g: &Geometry, norm: &NormSection) -> Result<DFReport> {
    let level = norm.reduction.levels.last().ok_or_else(|| RunError::Other("no gauge basis".into()))?;
    let est: NormEstimate = level.null_estimate.clone();
    let grid = collar(cfg, &g.domain)?;
    let opts = scan_opts(cfg);
    let search = GaugeSearch { basis: est.basis.clone(), warm: vec![est.coefficients.clone()] };
    let a = df_index::df_scan(&g.domain.function, &grid, &opts, Some(&search))?;
    let b = df_index::route_b(est);
    Ok(DFReport::new(&g.domain.name, g.domain.params.clone(), &grid, &opts, a, b))
}

fn finish_timings(cfg: &RunConfig, clock: Clock) -> Option<Timings> {
    (!cfg.normalized).then_some(clock.timings)
}

/// Full pipeline: sample, null distribution, core, norms, both index
/// routes and the identity checks.
pub fn analyze(cfg: &RunConfig) -> Result<AnalysisReport> {
    let mut clock = Clock::new();
    let g = geometry(cfg, &mut clock)?;
    let core = core_summary(&g);
    let pseudoconvex = g.pseudoconvexity.ok();
    let (norm, df) = if pseudoconvex {
        let norm = norm_section(cfg, &g)?;
        clock.lap("norm");
        let df = df_report(cfg, &g, &norm)?;
        clock.lap("df");
        (Some(norm), Some(df))
    } else {
        (None, None)
    };
    let checks = if pseudoconvex { checks(cfg, &g)? } else { Checks { consistency: None, key_lemma: None } };
    clock.lap("checks");
    let (status, exit_code) = if !pseudoconvex {
        ("pseudoconvexity-violation", EXIT_NOT_PSEUDOCONVEX)
    } else if !g.core.stabilized {
        ("core-not-stabilized", EXIT_NOT_STABILIZED)
    } else {
        ("ok", EXIT_OK)
    };
    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION.into(),
        tool_version: TOOL_VERSION.into(),
        config: cfg.clone(),
        metadata: g.domain.metadata.clone(),
        sample_warning: g.sample_warning.clone(),
        pseudoconvexity: g.pseudoconvexity.clone(),
        null_distribution: DistributionSummary::of(&g.null),
        core,
        norm,
        df,
        checks,
        status: status.into(),
        exit_code,
        timings: finish_timings(cfg, clock),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoreReport {
    pub schema_version: String,
    pub config: RunConfig,
    pub pseudoconvexity: PseudoconvexityReport,
    pub null_distribution: DistributionSummary,
    pub core: CoreSummary,
    pub exit_code: i32,
    pub timings: Option<Timings>,
}

pub fn core(cfg: &RunConfig) -> Result<CoreReport> {
    let mut clock = Clock::new();
    let g = geometry(cfg, &mut clock)?;
    let exit_code = exit_code(&g);
    Ok(CoreReport {
        schema_version: SCHEMA_VERSION.into(),
        config: cfg.clone(),
        pseudoconvexity: g.pseudoconvexity.clone(),
        null_distribution: DistributionSummary::of(&g.null),
        core: core_summary(&g),
        exit_code,
        timings: finish_timings(cfg, clock),
    })
}

fn exit_code(g: &Geometry) -> i32 {
    if !g.pseudoconvexity.ok() {
        EXIT_NOT_PSEUDOCONVEX
    } else if !g.core.stabilized {
        EXIT_NOT_STABILIZED
    } else {
        EXIT_OK
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormReport {
    pub schema_version: String,
    pub config: RunConfig,
    pub null_distribution: DistributionSummary,
    pub norm: NormSection,
    pub exit_code: i32,
    pub timings: Option<Timings>,
}

pub fn norm(cfg: &RunConfig) -> Result<NormReport> {
    let mut clock = Clock::new();
    let g = geometry(cfg, &mut clock)?;
    let norm = norm_section(cfg, &g)?;
    clock.lap("norm");
    Ok(NormReport {
        schema_version: SCHEMA_VERSION.into(),
        config: cfg.clone(),
        null_distribution: DistributionSummary::of(&g.null),
        norm,
        exit_code: exit_code(&g),
        timings: finish_timings(cfg, clock),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DfScanReport {
    pub schema_version: String,
    pub config: RunConfig,
    pub df: DFReport,
    pub exit_code: i32,
    pub timings: Option<Timings>,
}

pub fn df_scan(cfg: &RunConfig) -> Result<DfScanReport> {
    let mut clock = Clock::new();
    let g = geometry(cfg, &mut clock)?;
    let norm = norm_section(cfg, &g)?;
    clock.lap("norm");
    let df = df_report(cfg, &g, &norm)?;
    clock.lap("df");
    Ok(DfScanReport {
        schema_version: SCHEMA_VERSION.into(),
        config: cfg.clone(),
        df,
        exit_code: exit_code(&g),
        timings: finish_timings(cfg, clock),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleReport {
    pub schema_version: String,
    pub config: RunConfig,
    pub beta: f64,
    pub width: f64,
    pub oracle: OracleResult,
    pub convergence: Vec<OracleResult>,
    pub continuum: f64,
    pub appendix: AppendixNorms,
    pub timings: Option<Timings>,
}

pub fn oracle(cfg: &RunConfig) -> Result<OracleReport> {
    let mut clock = Clock::new();
    let d = domain(cfg)?;
    let prob = d
        .annulus(cfg.oracle.m)
        .ok_or_else(|| RunError::Other(format!("domain '{}' carries no annulus; use the worm", d.name)))?;
    let oracle = annulus::annulus_norm_oracle(&prob);
    let convergence = annulus::oracle_convergence(&prob, &cfg.oracle.convergence);
    clock.lap("oracle");
    let appendix = annulus::appendix_norms(
        &prob,
        cfg.oracle.appendix_degree,
        oracle.value,
        cfg.budget.starts,
        cfg.budget.evaluations,
        cfg.sample.seed,
    );
    clock.lap("appendix");
    Ok(OracleReport {
        schema_version: SCHEMA_VERSION.into(),
        config: cfg.clone(),
        beta: prob.beta,
        width: prob.width(),
        continuum: annulus::continuum_value(&prob),
        oracle,
        convergence,
        appendix,
        timings: finish_timings(cfg, clock),
    })
}
