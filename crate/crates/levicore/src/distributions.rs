//! Sampled distributions, numerical tangent spaces, derived distributions
//! and iteration to the core.
//!
//! A distribution is a finite list of points, each carrying an orthonormal
//! fiber basis (possibly empty). Complex distributions live in `T^{1,0}ℂⁿ`
//! and their fibers are compared with real tangent spaces after
//! complexification; real distributions live in `ℝ^m`.

use crate::calc::{self, CalcError, C64};
use crate::hypersurface::{levi_form, BoundaryPoint};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error("insufficient sampling: {found} neighbours within radius {radius}")]
    InsufficientSampling { radius: f64, found: usize },
    #[error("pseudoconvexity violation at sample {index}: {source}")]
    Pseudoconvexity { index: usize, source: CalcError },
    #[error("empty distribution")]
    Empty,
    #[error("malformed distribution: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Kind {
    Real,
    Complex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledDistribution {
    pub kind: Kind,
    /// Real dimension of the point space (`2n` for complex distributions).
    pub point_dim: usize,
    /// Dimension of the fiber space (`n` for complex, `m` for real).
    pub fiber_dim: usize,
    pub points: Vec<Vec<f64>>,
    pub fibers: Vec<Vec<Vec<C64>>>,
    pub source_tol: f64,
    pub iteration: usize,
}

impl SampledDistribution {
    pub fn support(&self) -> Vec<usize> {
        (0..self.points.len()).filter(|&i| !self.fibers[i].is_empty()).collect()
    }

    pub fn support_size(&self) -> usize {
        self.fibers.iter().filter(|f| !f.is_empty()).count()
    }

    pub fn fiber_dims(&self) -> Vec<usize> {
        self.fibers.iter().map(|f| f.len()).collect()
    }

    pub fn max_fiber_dim(&self) -> usize {
        self.fibers.iter().map(|f| f.len()).max().unwrap_or(0)
    }

    /// Same points, fibers restricted to the listed indices.
    pub fn restricted(&self, keep: &[usize]) -> Self {
        let mut out = self.clone();
        for (i, f) in out.fibers.iter_mut().enumerate() {
            if !keep.contains(&i) {
                f.clear();
            }
        }
        out
    }

    /// Fiber vectors as vectors in the complexified point space.
    fn fiber_in_point_space(&self, i: usize) -> Vec<Vec<C64>> {
        match self.kind {
            Kind::Real => self.fibers[i].clone(),
            Kind::Complex => self.fibers[i]
                .iter()
                .map(|z| calc::complexify10(z).into_iter().map(|c| c * 2f64.sqrt()).collect())
                .collect(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let dto = DistributionJson {
            schema: SCHEMA_ID.into(),
            kind: self.kind,
            point_dim: self.point_dim,
            fiber_dim: self.fiber_dim,
            source_tol: self.source_tol,
            iteration: self.iteration,
            samples: self
                .points
                .iter()
                .zip(&self.fibers)
                .map(|(p, f)| SampleJson {
                    point: p.clone(),
                    fiber: MatrixJson {
                        rows: f.len(),
                        cols: self.fiber_dim,
                        data: f.iter().flatten().flat_map(|c| [c.re, c.im]).collect(),
                    },
                })
                .collect(),
        };
        serde_json::to_value(dto).expect("distribution serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, DistError> {
        let dto: DistributionJson =
            serde_json::from_value(v.clone()).map_err(|e| DistError::Malformed(e.to_string()))?;
        if dto.schema != SCHEMA_ID {
            return Err(DistError::Malformed(format!("unknown schema {}", dto.schema)));
        }
        let mut points = Vec::new();
        let mut fibers = Vec::new();
        for s in dto.samples {
            let m = s.fiber;
            if m.data.len() != 2 * m.rows * m.cols || (m.rows > 0 && m.cols != dto.fiber_dim) {
                return Err(DistError::Malformed("fiber matrix size".into()));
            }
            let fiber = (0..m.rows)
                .map(|r| {
                    (0..m.cols)
                        .map(|c| C64::new(m.data[2 * (r * m.cols + c)], m.data[2 * (r * m.cols + c) + 1]))
                        .collect()
                })
                .collect();
            points.push(s.point);
            fibers.push(fiber);
        }
        Ok(Self {
            kind: dto.kind,
            point_dim: dto.point_dim,
            fiber_dim: dto.fiber_dim,
            points,
            fibers,
            source_tol: dto.source_tol,
            iteration: dto.iteration,
        })
    }
}

pub const SCHEMA_ID: &str = "sampled-distribution/1";

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct DistributionJson {
    schema: String,
    kind: Kind,
    point_dim: usize,
    fiber_dim: usize,
    source_tol: f64,
    iteration: usize,
    samples: Vec<SampleJson>,
}

#[derive(Serialize, Deserialize)]
struct SampleJson {
    point: Vec<f64>,
    fiber: MatrixJson,
}

/// Row-major complex matrix with interleaved real and imaginary parts.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Levi null distribution: fiberwise kernel of the Levi form.
///
/// The kernel threshold is `rel_tol` times the larger of the Levi form's
/// top eigenvalue and the norm of the ambient complex Hessian, so that a
/// 1×1 Levi form is judged against the size of the second derivatives.
pub fn levi_null(sample: &[BoundaryPoint], rel_tol: f64) -> Result<SampledDistribution, DistError> {
    let n = sample.first().map_or(0, |b| b.p.n());
    let fibers: Vec<Result<Vec<Vec<C64>>, DistError>> = crate::par::map_range(sample.len(), |i| {
        let bp = &sample[i];
        let l = levi_form(bp);
        let k = calc::kernel_basis(&l, rel_tol, bp.hess.norm())
            .map_err(|e| DistError::Pseudoconvexity { index: i, source: e })?;
        Ok(k.iter().map(|v| calc::combine(v, &bp.frame)).collect())
    });
    Ok(SampledDistribution {
        kind: Kind::Complex,
        point_dim: 2 * n,
        fiber_dim: n,
        points: sample.iter().map(|b| b.real()).collect(),
        fibers: fibers.into_iter().collect::<Result<_, _>>()?,
        source_tol: rel_tol,
        iteration: 0,
    })
}

/// Real distribution given pointwise as the null space of a symmetric form.
pub fn real_form_distribution<F>(points: Vec<Vec<f64>>, dim: usize, form: F, rel_tol: f64) -> SampledDistribution
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let fibers = crate::par::map(&points, |p| {
        calc::sym_null_space(&form(p), dim, rel_tol)
            .into_iter()
            .map(|v| v.into_iter().map(|x| C64::new(x, 0.0)).collect())
            .collect()
    });
    SampledDistribution {
        kind: Kind::Real,
        point_dim: dim,
        fiber_dim: dim,
        points,
        fibers,
        source_tol: rel_tol,
        iteration: 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TangentEstimate {
    pub point: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    /// Smallest retained over largest discarded singular value
    /// (infinite when nothing is discarded).
    pub spectrum_gap: f64,
    pub scale: f64,
    pub neighbours: usize,
}

pub const GAP_RATIO: f64 = 0.2;

/// Weighted local PCA of `q − p` over the cloud points `q` with
/// `0 < |q − p| ≤ scale`, Gaussian weights of width `scale/2`. The
/// retained dimension is the number of singular values at least
/// `gap_ratio · σ1`. No neighbours gives the zero subspace.
pub fn tangent_estimate(
    cloud: &[Vec<f64>],
    p: &[f64],
    scale: f64,
    gap_ratio: f64,
    min_neighbours: usize,
) -> Result<TangentEstimate, DistError> {
    let d = p.len();
    let sigma2 = (0.5 * scale).powi(2);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut found = 0;
    for q in cloud {
        let diff: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
        let r2: f64 = diff.iter().map(|v| v * v).sum();
        if r2 == 0.0 || r2 > scale * scale * (1.0 + 1e-12) {
            continue;
        }
        found += 1;
        let w = (-0.5 * r2 / sigma2).exp();
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += w * diff[a] * diff[b];
            }
        }
    }
    if found == 0 {
        return Ok(TangentEstimate {
            point: p.to_vec(),
            basis: vec![],
            spectrum_gap: f64::INFINITY,
            scale,
            neighbours: 0,
        });
    }
    if found < min_neighbours {
        return Err(DistError::InsufficientSampling { radius: scale, found });
    }
    let se = cov.symmetric_eigen();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
    let sv: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i].max(0.0).sqrt()).collect();
    let k = sv.iter().filter(|s| **s >= gap_ratio * sv[0]).count();
    let spectrum_gap = if k < d && sv[k] > 0.0 { sv[k - 1] / sv[k] } else { f64::INFINITY };
    Ok(TangentEstimate {
        point: p.to_vec(),
        basis: idx[..k].iter().map(|&i| se.eigenvectors.column(i).iter().copied().collect()).collect(),
        spectrum_gap,
        scale,
        neighbours: found,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DerivedOpts {
    /// Upper bound on the neighbourhood radius; `None` means 3× the median
    /// nearest-neighbour spacing of the support.
    pub scale: Option<f64>,
    /// Each point uses the neighbours within `shell` times its own
    /// nearest-neighbour distance (capped by `scale`).
    pub shell: f64,
    pub gap_ratio: f64,
    /// Radians.
    pub angle_tol: f64,
}

impl Default for DerivedOpts {
    fn default() -> Self {
        Self { scale: None, shell: 1.3, gap_ratio: GAP_RATIO, angle_tol: 5f64.to_radians() }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Nearest-neighbour distance of each point within the set (∞ if alone).
pub fn nearest_distances(pts: &[Vec<f64>]) -> Vec<f64> {
    crate::par::map_range(pts.len(), |i| {
        pts.iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| dist2(&pts[i], q))
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    })
}

pub fn median_spacing(pts: &[Vec<f64>]) -> f64 {
    let mut d: Vec<f64> = nearest_distances(pts).into_iter().filter(|v| v.is_finite()).collect();
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

/// Tangent estimate at `p` within the set `cloud` using the nearest-shell
/// radius rule of [`DerivedOpts`]. `nn` is the nearest-neighbour distance
/// of `p` inside `cloud`.
pub fn shell_tangent(cloud: &[Vec<f64>], p: &[f64], nn: f64, cap: f64, opts: &DerivedOpts) -> Result<TangentEstimate, DistError> {
    if !nn.is_finite() || nn > cap {
        return tangent_estimate(&[], p, cap, opts.gap_ratio, 2);
    }
    let mut radius = (opts.shell * nn).min(cap);
    loop {
        match tangent_estimate(cloud, p, radius, opts.gap_ratio, 2) {
            Err(DistError::InsufficientSampling { .. }) if radius < cap => {
                radius = (2.0 * radius).min(cap);
            }
            Err(DistError::InsufficientSampling { .. }) => {
                return tangent_estimate(cloud, p, radius, opts.gap_ratio, 1);
            }
            other => return other,
        }
    }
}

/// Keep the part of each fiber within `angle_tol` of the complexified
/// tangent space of the support at that point.
pub fn derived(dist: &SampledDistribution, opts: &DerivedOpts) -> Result<SampledDistribution, DistError> {
    let support = dist.support();
    let cloud: Vec<Vec<f64>> = support.iter().map(|&i| dist.points[i].clone()).collect();
    let nn = nearest_distances(&cloud);
    let cap = opts.scale.unwrap_or_else(|| {
        let mut d: Vec<f64> = nn.iter().copied().filter(|v| v.is_finite()).collect();
        d.sort_by(f64::total_cmp);
        d.get(d.len() / 2).map_or(0.0, |m| 3.0 * m)
    });
    let tangents: Vec<Result<Vec<Vec<f64>>, DistError>> = crate::par::map_range(support.len(), |s| {
        shell_tangent(&cloud, &cloud[s], nn[s], cap, opts).map(|t| t.basis)
    });
    let mut tang = vec![None; dist.points.len()];
    for (s, t) in support.iter().zip(tangents) {
        tang[*s] = Some(t?);
    }
    derived_with(dist, |i| Ok(tang[i].clone().unwrap_or_default()), opts.angle_tol)
}

/// Derived distribution with tangent spaces supplied by `tangent` (used for
/// analytic plug-ins).
pub fn derived_with<T>(dist: &SampledDistribution, tangent: T, angle_tol: f64) -> Result<SampledDistribution, DistError>
where
    T: Fn(usize) -> Result<Vec<Vec<f64>>, DistError>,
{
    let mut out = dist.clone();
    out.iteration = dist.iteration + 1;
    for i in dist.support() {
        let t: Vec<Vec<C64>> = tangent(i)?
            .into_iter()
            .map(|v| v.into_iter().map(|x| C64::new(x, 0.0)).collect())
            .collect();
        out.fibers[i] = intersect_fiber(dist, i, &t, angle_tol);
    }
    Ok(out)
}

fn intersect_fiber(dist: &SampledDistribution, i: usize, t: &[Vec<C64>], angle_tol: f64) -> Vec<Vec<C64>> {
    if t.is_empty() {
        return vec![];
    }
    let embedded = dist.fiber_in_point_space(i);
    let kept: Vec<Vec<C64>> = calc::principal_angles(&embedded, t)
        .into_iter()
        .filter(|(a, _)| *a <= angle_tol)
        .map(|(_, c)| calc::combine(&c, &dist.fibers[i]))
        .collect();
    let kept = calc::orthonormalize(&kept, 1e-12);
    match dist.kind {
        Kind::Complex => kept,
        Kind::Real => kept.into_iter().map(real_phase).collect(),
    }
}

// A real subspace direction computed in complex arithmetic: remove the
// global phase.
fn real_phase(v: Vec<C64>) -> Vec<C64> {
    let big = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or_default();
    if big.norm() == 0.0 {
        return v;
    }
    let ph = big.conj() / big.norm();
    let w: Vec<C64> = v.iter().map(|x| C64::new((x * ph).re, 0.0)).collect();
    let n = calc::cnorm(&w);
    w.into_iter().map(|x| x / n).collect()
}

/// Same support and, pointwise, equal fiber dimension with all principal
/// angles at most `angle_tol`.
pub fn same_distribution(a: &SampledDistribution, b: &SampledDistribution, angle_tol: f64) -> bool {
    a.points.len() == b.points.len()
        && a.fibers.iter().zip(&b.fibers).all(|(fa, fb)| {
            fa.len() == fb.len()
                && (fa.is_empty()
                    || calc::principal_angles(fa, fb).iter().all(|(ang, _)| *ang <= angle_tol))
        })
}

#[derive(Debug, Clone)]
pub struct CoreResult {
    pub core: SampledDistribution,
    /// `max(1, min{j : D^(j) = D^(j+1)})`.
    pub k: usize,
    pub stabilized: bool,
    /// Support sizes of `D^(0), D^(1), …` as computed.
    pub support_sizes: Vec<usize>,
}

/// Iterates [`derived`] until two consecutive distributions agree.
pub fn iterate_to_core(dist: &SampledDistribution, max_iter: usize, opts: &DerivedOpts) -> Result<CoreResult, DistError> {
    iterate_with(dist, max_iter, opts.angle_tol, |d| derived(d, opts))
}

pub fn iterate_with<D>(dist: &SampledDistribution, max_iter: usize, angle_tol: f64, step: D) -> Result<CoreResult, DistError>
where
    D: Fn(&SampledDistribution) -> Result<SampledDistribution, DistError>,
{
    let mut cur = dist.clone();
    let mut sizes = vec![cur.support_size()];
    for j in 0..max_iter {
        let next = step(&cur)?;
        sizes.push(next.support_size());
        if same_distribution(&cur, &next, angle_tol) {
            return Ok(CoreResult { core: cur, k: j.max(1), stabilized: true, support_sizes: sizes });
        }
        cur = next;
    }
    Ok(CoreResult { core: cur, k: max_iter, stabilized: false, support_sizes: sizes })
}

/// True iff every principal angle between the complexified tangent space of
/// `a` at `p` and the null fiber exceeds `angle_tol`.
pub fn zero_holo_dim_check(a: &[Vec<f64>], p: &[f64], null_fiber: &[Vec<C64>], opts: &DerivedOpts) -> Result<bool, DistError> {
    if null_fiber.is_empty() {
        return Ok(true);
    }
    let nn = a
        .iter()
        .map(|q| dist2(p, q))
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min)
        .sqrt();
    let cap = opts.scale.unwrap_or_else(|| 3.0 * median_spacing(a));
    let t = shell_tangent(a, p, nn, cap.max(if nn.is_finite() { nn } else { 0.0 }), opts)?;
    if t.basis.is_empty() {
        return Ok(true);
    }
    let tc: Vec<Vec<C64>> = t.basis.iter().map(|v| v.iter().map(|x| C64::new(*x, 0.0)).collect()).collect();
    let emb: Vec<Vec<C64>> = null_fiber
        .iter()
        .map(|z| calc::complexify10(z).into_iter().map(|c| c * 2f64.sqrt()).collect())
        .collect();
    Ok(calc::principal_angles(&emb, &tc).iter().all(|(ang, _)| *ang > opts.angle_tol))
}
