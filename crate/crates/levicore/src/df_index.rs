//! Diederich–Fornæss index estimates.
//!
//! Route A scans `δ` and checks plurisubharmonicity of `−(−r)^δ` on a sampled
//! interior collar through
//! `∂∂̄(−(−r)^δ) = δ(−r)^{δ−1} (∂∂̄r + (1−δ) ∂r∧∂̄r/(−r))`.
//! Route B evaluates `1/(1+𝔫)` with the norm estimate of [`crate::dangelo`].

use crate::calc::{self, Backend, CalcError, HermitianForm, Smooth, C64};
use crate::dangelo::{self, Budget, DAngeloError, DAngeloForm, NormEstimate};
use crate::distributions::SampledDistribution;
use crate::gauge::{Gauge, GaugeBasis};
use crate::hypersurface::{BoundaryPoint, DefiningFunction};
use crate::{optim, par};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DfError {
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    DAngelo(#[from] DAngeloError),
    #[error("collar point {point:?} has r = {r}, not inside the domain")]
    InvalidGrid { point: Vec<f64>, r: f64 },
    #[error("collar grid is empty")]
    EmptyGrid,
    #[error("δ = {0} is outside (0, 1]")]
    BadDelta(f64),
}

pub type Result<T> = std::result::Result<T, DfError>;

/// Interior points with `−ε₀ < r < 0`, stratified by depth `|r|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CollarGrid {
    pub points: Vec<Vec<f64>>,
    pub depths: Vec<f64>,
    /// Median nearest-neighbour distance of the boundary base points.
    pub spacing: f64,
    pub depth_range: (f64, f64),
}

/// Default collar depths `ε₀·{1/8, 1/4, 1/2, 1}` with `ε₀ = 0.1·scale`.
pub fn default_depths(scale: f64) -> Vec<f64> {
    let eps0 = 0.1 * scale;
    [0.125, 0.25, 0.5, 1.0].iter().map(|f| f * eps0).collect()
}

impl CollarGrid {
    /// Pushes every base point inward to each level set `r = −d` by Newton
    /// steps along the gradient.
    pub fn from_boundary<F: Smooth + ?Sized>(r: &F, base: &[Vec<f64>], depths: &[f64]) -> Result<Self> {
        let mut points = Vec::with_capacity(base.len() * depths.len());
        let mut levels = Vec::with_capacity(points.capacity());
        for &d in depths {
            for x in base {
                let y = to_level(r, x, -d)?;
                points.push(y);
                levels.push(d);
            }
        }
        let lo = levels.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = levels.iter().cloned().fold(0.0, f64::max);
        let grid = Self { points, depths: levels, spacing: crate::distributions::median_spacing(base), depth_range: (lo, hi) };
        grid.validate(r)?;
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Every point must satisfy `r < 0`.
    pub fn validate<F: Smooth + ?Sized>(&self, r: &F) -> Result<()> {
        if self.is_empty() {
            return Err(DfError::EmptyGrid);
        }
        for x in &self.points {
            let v = calc::value(r, x)?;
            if !(v < 0.0) {
                return Err(DfError::InvalidGrid { point: x.clone(), r: v });
            }
        }
        Ok(())
    }
}

fn to_level<F: Smooth + ?Sized>(r: &F, x0: &[f64], level: f64) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    for _ in 0..40 {
        let (v, g) = calc::grad_real(r, &x)?;
        let err = v - level;
        if err.abs() <= 1e-13 * (1.0 + level.abs()) {
            break;
        }
        let g2: f64 = g.iter().map(|t| t * t).sum();
        if g2 < 1e-20 {
            break;
        }
        x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= err * gi / g2);
    }
    Ok(x)
}

/// `M_δ = ∂∂̄r + (1−δ)(∂r)(∂r)*/(−r)` at an interior point.
pub fn psh_matrix<F: Smooth + ?Sized>(r: &F, delta: f64, x: &[f64]) -> Result<HermitianForm> {
    let jet = calc::jet2(r, x, Backend::Dual)?;
    if !(jet.value < 0.0) {
        return Err(DfError::InvalidGrid { point: x.to_vec(), r: jet.value });
    }
    let rank_one = HermitianForm::half_rank_one(&jet.dz().0).scaled(2.0 * (1.0 - delta) / -jet.value);
    Ok(jet.levi_matrix().add(&rank_one))
}

/// Smallest eigenvalue of `M_δ` over the grid.
pub fn psh_defect<F: Smooth + Sync + ?Sized>(r: &F, delta: f64, grid: &CollarGrid) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(DfError::BadDelta(delta));
    }
    if grid.is_empty() {
        return Err(DfError::EmptyGrid);
    }
    let mins = par::map(&grid.points, |x| psh_matrix(r, delta, x).map(|m| calc::eig_herm(&m).min()));
    let mut worst = f64::INFINITY;
    for m in mins {
        worst = worst.min(m?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanOpts {
    /// Sorted values in `(0, 1]`.
    pub delta_grid: Vec<f64>,
    pub defect_tol: f64,
    pub resolution: f64,
    /// Budget of the gauge search at each tested `δ`.
    pub budget: Budget,
}

impl Default for ScanOpts {
    fn default() -> Self {
        let mut delta_grid: Vec<f64> = (1..20).map(|i| i as f64 * 0.05).collect();
        delta_grid.push(0.999);
        Self { delta_grid, defect_tol: 1e-8, resolution: 1e-3, budget: Budget { starts: 1, evaluations: 600, ..Budget::default() } }
    }
}

/// Gauge family `r_c = e^{f_c} r` for route A.
#[derive(Debug, Clone)]
pub struct GaugeSearch {
    pub basis: GaugeBasis,
    /// Starting coefficients, tried before the zero gauge.
    pub warm: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DefectPoint {
    pub delta: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RouteA {
    pub delta: f64,
    /// Defect of the final defining function on the `δ` grid.
    pub defect_curve: Vec<DefectPoint>,
    pub basis_id: Option<String>,
    pub coefficients: Vec<f64>,
    pub bisection: Vec<DefectPoint>,
    pub evaluations: usize,
    pub diagnostics: Vec<String>,
}

fn gauged(r: &DefiningFunction, basis: &GaugeBasis, c: &[f64]) -> DefiningFunction {
    DefiningFunction::conformal(r, Gauge { basis: basis.clone(), coeffs: c.to_vec() })
}

/// Largest `δ` with `psh_defect ≥ −defect_tol` on the grid, optionally over
/// a gauge family, refined by bisection to `opts.resolution`.
pub fn df_scan(r: &DefiningFunction, grid: &CollarGrid, opts: &ScanOpts, gauge: Option<&GaugeSearch>) -> Result<RouteA> {
    grid.validate(r)?;
    if let Some(&d) = opts.delta_grid.iter().find(|d| !(**d > 0.0 && **d <= 1.0)) {
        return Err(DfError::BadDelta(d));
    }
    let mut evaluations = 0usize;
    let mut current: Vec<f64> = gauge.map_or(vec![], |g| g.warm.first().cloned().unwrap_or_else(|| vec![0.0; g.basis.len()]));
    let mut bisection = Vec::new();
    let defect_of = |c: &[f64], delta: f64, evals: &mut usize| -> f64 {
        *evals += 1;
        let res = match gauge {
            Some(g) => psh_defect(&gauged(r, &g.basis, c), delta, grid),
            None => psh_defect(r, delta, grid),
        };
        res.unwrap_or(f64::NEG_INFINITY)
    };
    // Feasibility at one δ: the current coefficients, then the warm starts
    // and zero, then a simplex search from the best of them.
    let feasible = |delta: f64, current: &mut Vec<f64>, evals: &mut usize| -> (bool, f64) {
        let mut best = (defect_of(current, delta, evals), current.clone());
        if best.0 >= -opts.defect_tol {
            return (true, best.0);
        }
        let Some(g) = gauge else { return (false, best.0) };
        let mut starts = g.warm.clone();
        starts.push(vec![0.0; g.basis.len()]);
        for s in starts {
            let v = defect_of(&s, delta, evals);
            if v > best.0 {
                best = (v, s);
            }
        }
        if best.0 < -opts.defect_tol {
            let run = optim::nelder_mead_to(
                |c| -defect_of(c, delta, &mut 0),
                &best.1,
                opts.budget.step,
                opts.budget.evaluations,
                1e-10,
                opts.defect_tol,
            );
            *evals += run.evaluations;
            if -run.f > best.0 {
                best = (-run.f, run.x);
            }
        }
        let ok = best.0 >= -opts.defect_tol;
        if ok {
            *current = best.1;
        }
        (ok, best.0)
    };

    let mut lo = 0.0;
    let mut hi = None;
    for &d in &opts.delta_grid {
        let (ok, v) = feasible(d, &mut current, &mut evaluations);
        bisection.push(DefectPoint { delta: d, defect: v });
        if ok {
            lo = d;
        } else {
            hi = Some(d);
            break;
        }
    }
    let mut diagnostics = Vec::new();
    if let Some(mut hi) = hi {
        while hi - lo > opts.resolution {
            let mid = 0.5 * (lo + hi);
            let (ok, v) = feasible(mid, &mut current, &mut evaluations);
            bisection.push(DefectPoint { delta: mid, defect: v });
            if ok {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    if lo == 0.0 {
        diagnostics.push("no tested δ gives a plurisubharmonic −(−r)^δ on the collar".into());
    }
    let defect_curve = opts
        .delta_grid
        .iter()
        .map(|&d| DefectPoint { delta: d, defect: defect_of(&current, d, &mut evaluations) })
        .collect();
    Ok(RouteA {
        delta: lo,
        defect_curve,
        basis_id: gauge.map(|g| g.basis.id()),
        coefficients: current,
        bisection,
        evaluations,
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RouteB {
    pub n_estimate: NormEstimate,
    pub df: f64,
    pub bound: String,
    pub note: String,
}

/// `1/(1+𝔫)` from a norm estimate.
pub fn route_b(n_estimate: NormEstimate) -> RouteB {
    let df = if n_estimate.value.is_finite() { 1.0 / (1.0 + n_estimate.value) } else { 0.0 };
    RouteB {
        n_estimate,
        df,
        bound: "lower".into(),
        note: "the norm estimate is attained by a gauge, so 1/(1+n) bounds the index from below up to sampling error".into(),
    }
}

/// `1/(1 + optimize_n(...))`.
pub fn df_via_norm(r: &DefiningFunction, dist: &SampledDistribution, basis: &GaugeBasis, k: f64, budget: &Budget) -> Result<RouteB> {
    Ok(route_b(dangelo::optimize_n(r, dist, basis, k, budget)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReductionLevel {
    pub basis_id: String,
    pub basis_size: usize,
    #[serde(with = "crate::extreal")]
    pub null_value: f64,
    #[serde(with = "crate::extreal")]
    pub core_value: f64,
    #[serde(with = "crate::extreal")]
    pub gap: f64,
    pub null_estimate: NormEstimate,
    pub core_estimate: NormEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReductionReport {
    pub null_support: usize,
    pub core_support: usize,
    pub levels: Vec<ReductionLevel>,
    /// `value(core) ≤ value(𝒩) + 1e−9` at every level.
    pub monotone: bool,
    pub gap_non_increasing: bool,
}

const EXACT_SLACK: f64 = 1e-9;

/// Compares the norm on `null` and on its `core` with identical budgets at
/// each basis in `bases` (smallest first). The core search is warm-started
/// from the certificate on `null`, which is admissible on the smaller
/// support, so monotonicity holds exactly. Identical distributions share
/// one search.
pub fn reduction_check(
    r: &DefiningFunction,
    null: &SampledDistribution,
    core: &SampledDistribution,
    bases: &[GaugeBasis],
    k: f64,
    budget: &Budget,
) -> Result<ReductionReport> {
    let mut levels = Vec::new();
    for basis in bases {
        let on_null = dangelo::AffineModel::build(r, null, basis)?;
        let on_core = dangelo::AffineModel::build(r, core, basis)?;
        let a = dangelo::optimize_model(&on_null, k, budget, None);
        let b = if null == core { a.clone() } else { dangelo::optimize_model(&on_core, k, budget, Some(&a.coefficients)) };
        let gap = if a.value == b.value { 0.0 } else { a.value - b.value };
        levels.push(ReductionLevel {
            basis_id: basis.id(),
            basis_size: basis.len(),
            null_value: a.value,
            core_value: b.value,
            gap,
            null_estimate: a,
            core_estimate: b,
        });
    }
    let monotone = levels.iter().all(|l| l.core_value <= l.null_value + EXACT_SLACK);
    // Both gaps carry the bisection resolution of the optimizer.
    let gap_non_increasing = levels
        .windows(2)
        .all(|w| w[1].gap <= w[0].gap + EXACT_SLACK + budget.bisection_rtol * w[1].null_value.abs());
    Ok(ReductionReport {
        null_support: null.support_size(),
        core_support: core.support_size(),
        levels,
        monotone,
        gap_non_increasing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyLemma {
    /// `N(½ ∂∂̄r(Z_q, Z̄_q))`.
    pub lhs: C64,
    /// `∂α(Z, Z̄) − ½|α(Z)|²`.
    pub rhs: C64,
    pub residual: f64,
}

/// Checks `N(½ ∂∂̄r(Z_q, Z̄_q)) = ∂α(Z, Z̄) − ½|α(Z)|²` for a Levi null `Z`
/// at `bp`, where `Z_q` is the projection of the constant vector `Z` to
/// `ker ∂r(q)` and the derivative along `N` is taken by finite differences.
pub fn key_lemma_check(r: &DefiningFunction, bp: &BoundaryPoint, z: &[C64]) -> Result<KeyLemma> {
    dangelo::check_fiber(bp, std::slice::from_ref(&z.to_vec()))?;
    let x = bp.real();
    let levi_along = |q: &[f64]| -> Vec<f64> {
        let Ok(jet) = calc::jet2(r, q, Backend::Dual) else { return vec![f64::NAN] };
        let dr = jet.dz();
        let n2 = dr.norm().powi(2);
        let s: C64 = dr.0.iter().zip(z).map(|(a, b)| a * b).sum();
        let zq: Vec<C64> = z.iter().zip(&dr.0).map(|(zi, di)| zi - s / n2 * di.conj()).collect();
        vec![0.5 * jet.levi_matrix().quad(&zq)]
    };
    let h = calc::fd_step(&x);
    let mut lhs = C64::new(0.0, 0.0);
    for (j, nj) in bp.n_vec.iter().enumerate() {
        let mut e = vec![0.0; x.len()];
        e[2 * j] = 1.0;
        let gx = calc::central_diff(levi_along, &x, &e, h)[0];
        e[2 * j] = 0.0;
        e[2 * j + 1] = 1.0;
        let gy = calc::central_diff(levi_along, &x, &e, h)[0];
        lhs += nj * C64::new(0.5 * gx, -0.5 * gy);
    }
    if !(lhs.re.is_finite() && lhs.im.is_finite()) {
        return Err(CalcError::Evaluation { point: x }.into());
    }
    let g = dangelo::dbar_b(r, &x)?;
    let mut d_alpha = C64::new(0.0, 0.0);
    for (j, row) in g.iter().enumerate() {
        for (k, gjk) in row.iter().enumerate() {
            d_alpha += 0.5 * gjk.conj() * z[k] * z[j].conj();
        }
    }
    let a = dangelo::alpha_eval(&DAngeloForm::canonical(r), bp, z)?;
    let rhs = d_alpha - 0.5 * a.norm_sqr();
    Ok(KeyLemma { lhs, rhs, residual: (lhs - rhs).norm() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GridSpec {
    pub collar_depths: Vec<f64>,
    pub collar_points: usize,
    pub collar_spacing: f64,
    pub delta_grid: Vec<f64>,
    pub defect_tol: f64,
    pub resolution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DFReport {
    pub domain: String,
    pub params: BTreeMap<String, f64>,
    #[serde(rename = "routeA")]
    pub route_a: RouteA,
    #[serde(rename = "routeB")]
    pub route_b: RouteB,
    /// `|δ_A − DF_B| / DF_B`.
    pub agreement_gap: f64,
    pub seeds: Vec<u64>,
    pub grid_spec: GridSpec,
}

impl DFReport {
    pub fn new(domain: &str, params: BTreeMap<String, f64>, grid: &CollarGrid, opts: &ScanOpts, route_a: RouteA, route_b: RouteB) -> Self {
        let agreement_gap = if route_b.df > 0.0 { (route_a.delta - route_b.df).abs() / route_b.df } else { f64::INFINITY };
        let mut collar_depths: Vec<f64> = grid.depths.clone();
        collar_depths.sort_by(f64::total_cmp);
        collar_depths.dedup();
        Self {
            domain: domain.into(),
            params,
            seeds: route_b.n_estimate.seeds.clone(),
            grid_spec: GridSpec {
                collar_depths,
                collar_points: grid.len(),
                collar_spacing: grid.spacing,
                delta_grid: opts.delta_grid.clone(),
                defect_tol: opts.defect_tol,
                resolution: opts.resolution,
            },
            route_a,
            route_b,
            agreement_gap,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypersurface::{sample_boundary, Strategy};

    fn collar(r: &DefiningFunction, count: usize) -> CollarGrid {
        let base: Vec<Vec<f64>> = sample_boundary(r, Strategy::Grid, count, 1).points.iter().map(|b| b.real()).collect();
        CollarGrid::from_boundary(r, &base, &default_depths(r.scale())).unwrap()
    }

    #[test]
    fn ball_defect_values() {
        let r = DefiningFunction::ball(2);
        let g = collar(&r, 50);
        assert!(g.points.iter().all(|x| calc::value(&r, x).unwrap() < 0.0));
        assert!((psh_defect(&r, 1.0, &g).unwrap() - 1.0).abs() < 1e-12);
        assert!(psh_defect(&r, 0.5, &g).unwrap() >= 1.0 - 1e-12);
    }

    #[test]
    fn boundary_point_rejected() {
        let r = DefiningFunction::ball(2);
        let mut g = collar(&r, 10);
        g.points.push(vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(psh_defect(&r, 0.5, &g), Err(DfError::InvalidGrid { .. })));
    }

    #[test]
    fn ball_scan_reaches_top_of_grid() {
        let r = DefiningFunction::ball(2);
        let a = df_scan(&r, &collar(&r, 50), &ScanOpts::default(), None).unwrap();
        assert_eq!(a.delta, 0.999);
    }

    #[test]
    fn rank_one_term_matches_closed_form() {
        // For |z|² − 1 at depth d the radial eigenvalue is 1 + (1−δ)|z|²/d.
        let r = DefiningFunction::ball(2);
        let x = [0.9, 0.0, 0.0, 0.0];
        let m = psh_matrix(&r, 0.25, &x).unwrap();
        let e = calc::eig_herm(&m);
        let d = 1.0 - 0.81;
        assert!((e.max() - (1.0 + 0.75 * 0.81 / d)).abs() < 1e-12);
        assert!((e.min() - 1.0).abs() < 1e-12);
    }
}
