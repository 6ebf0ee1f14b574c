//! D'Angelo forms on sub-distributions of the Levi null distribution, the
//! Hermitian forms `∂̄α` and `ᾱ∧α` built from them, and the norm `𝔫`.
//!
//! With `N = conj(∂r)/‖∂r‖²` the form is `α(Z) = Σ r_{jk̄} Zj N̄k + ∂f(Z)`,
//! which is `2∂∂̄r(Z, N̄) + df(Z)` under the ½ wedge convention of
//! [`crate::calc`]. Off the boundary the same formula with `N(q)` gives the
//! ambient (1,0) part `β = Σ bj dzj` and the real form `α̃ = β + β̄`.
//! For vectors `Z` in a fiber, `∂̄α(Z, Z̄) = −½ Σ (∂bj/∂z̄k) Zj Z̄k` and
//! `(ᾱ∧α)(Z, Z̄) = ½|α(Z)|²`.

use crate::calc::{self, Backend, CalcError, HermitianForm, Jet2, RatioTol, Smooth, C64};
use crate::distributions::SampledDistribution;
use crate::gauge::{Gauge, GaugeBasis};
use crate::hypersurface::{BoundaryPoint, DefiningFunction, HypersurfaceError};
use crate::{optim, par};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DAngeloError {
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    Hypersurface(#[from] HypersurfaceError),
    #[error("fiber is {angle:.4} rad away from the Levi null space at {point:?}")]
    IllPosedFiber { point: Vec<f64>, angle: f64 },
    #[error("r2/r1 is not positive on the collar near {point:?}")]
    InvalidPair { point: Vec<f64> },
    #[error("gauge basis lives in dimension {basis}, domain in {domain}")]
    DimensionMismatch { basis: usize, domain: usize },
}

type Result<T> = std::result::Result<T, DAngeloError>;

/// Largest principal angle allowed between a fiber and the numerical Levi
/// kernel (5°).
pub const ANGLE_TOL: f64 = 5.0 * std::f64::consts::PI / 180.0;
/// Relative kernel threshold used when checking that a fiber is null.
pub const NULL_CHECK_TOL: f64 = 1e-4;

/// `α_r + df`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DAngeloForm {
    pub base: DefiningFunction,
    pub gauge: Option<Gauge>,
}

impl DAngeloForm {
    pub fn canonical(base: &DefiningFunction) -> Self {
        Self { base: base.clone(), gauge: None }
    }

    pub fn with_gauge(base: &DefiningFunction, gauge: Gauge) -> Result<Self> {
        if gauge.basis.n() != base.n() {
            return Err(DAngeloError::DimensionMismatch { basis: gauge.basis.n(), domain: base.n() });
        }
        Ok(Self { base: base.clone(), gauge: Some(gauge) })
    }

    fn gauge_jet(&self, x: &[f64]) -> Result<Option<Jet2>> {
        match &self.gauge {
            Some(g) if !g.is_zero() => Ok(Some(calc::jet2(g, x, Backend::Dual)?)),
            _ => Ok(None),
        }
    }
}

/// `α(Z)` at a boundary point of `a.base`.
pub fn alpha_eval(a: &DAngeloForm, bp: &BoundaryPoint, z: &[C64]) -> Result<C64> {
    Ok(alpha_on(a, bp, std::slice::from_ref(&z.to_vec()))?[0])
}

fn alpha_on(a: &DAngeloForm, bp: &BoundaryPoint, fiber: &[Vec<C64>]) -> Result<Vec<C64>> {
    let gj = a.gauge_jet(&bp.real())?;
    let df = gj.map(|j| j.dz());
    Ok(fiber
        .iter()
        .map(|z| {
            let r_part = bp.hess.pair(z, &bp.n_vec);
            r_part + df.as_ref().map_or(C64::new(0.0, 0.0), |d| d.apply(z))
        })
        .collect())
}

/// Coefficients `bj(q) = Σk r_{jk̄}(q) conj(Nk(q))` of the r-part of the
/// ambient form.
pub fn ambient_b<F: Smooth + ?Sized>(r: &F, x: &[f64]) -> Result<Vec<C64>> {
    let jet = calc::jet2(r, x, Backend::Dual)?;
    let dr = jet.dz();
    let norm = dr.norm();
    if norm <= 1e-10 {
        return Err(HypersurfaceError::DegenerateGradient { point: x.to_vec(), norm }.into());
    }
    let n = dr.0.len();
    Ok((0..n)
        .map(|j| (0..n).map(|k| jet.mixed(j, k) * dr.0[k]).sum::<C64>() / (norm * norm))
        .collect())
}

/// The real one-form `α̃ = β + β̄` in the basis `(dx1, dy1, …)`.
pub fn ambient_alpha(a: &DAngeloForm, x: &[f64]) -> Result<Vec<f64>> {
    let mut b = ambient_b(&a.base, x)?;
    if let Some(j) = a.gauge_jet(x)? {
        for (bj, fj) in b.iter_mut().zip(j.dz().0) {
            *bj += fj;
        }
    }
    Ok(b.iter().flat_map(|c| [2.0 * c.re, -2.0 * c.im]).collect())
}

/// `Gjk = ∂bj/∂z̄k` for the r-part, by fourth-order central differences.
pub fn dbar_b<F: Smooth + ?Sized>(r: &F, x: &[f64]) -> Result<Vec<Vec<C64>>> {
    let m = x.len();
    let n = m / 2;
    let h = calc::fd_step(x);
    let flat = |y: &[f64]| -> Vec<f64> {
        match ambient_b(r, y) {
            Ok(b) => b.iter().flat_map(|c| [c.re, c.im]).collect(),
            Err(_) => vec![f64::NAN; m],
        }
    };
    let mut partial = Vec::with_capacity(m);
    for a in 0..m {
        let mut e = vec![0.0; m];
        e[a] = 1.0;
        let d = calc::central_diff(flat, x, &e, h);
        if d.iter().any(|v| !v.is_finite()) {
            return Err(CalcError::Evaluation { point: x.to_vec() }.into());
        }
        partial.push(d);
    }
    let db = |a: usize, j: usize| C64::new(partial[a][2 * j], partial[a][2 * j + 1]);
    Ok((0..n)
        .map(|j| (0..n).map(|k| 0.5 * (db(2 * k, j) + C64::i() * db(2 * k + 1, j))).collect())
        .collect())
}

fn mixed_matrix(jet: &Jet2) -> Vec<Vec<C64>> {
    let n = jet.dim() / 2;
    (0..n).map(|j| (0..n).map(|k| jet.mixed(j, k)).collect()).collect()
}

/// `−½ F* Gᵀ F`, not yet symmetrized.
fn dbar_from_g(g: &[Vec<C64>], fiber: &[Vec<C64>]) -> HermitianForm {
    let k = fiber.len();
    let mut out = HermitianForm::zeros(k);
    for a in 0..k {
        for b in 0..k {
            let mut s = C64::new(0.0, 0.0);
            for (j, row) in g.iter().enumerate() {
                for (kk, gjk) in row.iter().enumerate() {
                    s += fiber[a][kk].conj() * gjk * fiber[b][j];
                }
            }
            out.set(a, b, -0.5 * s);
        }
    }
    out
}

/// Largest principal angle between `fiber` and the numerical Levi kernel.
pub fn fiber_angle(bp: &BoundaryPoint, fiber: &[Vec<C64>]) -> f64 {
    if fiber.is_empty() {
        return 0.0;
    }
    let levi = crate::hypersurface::levi_form(bp);
    let kernel = match calc::kernel_basis(&levi, NULL_CHECK_TOL, bp.hess.norm()) {
        Ok(k) => k,
        Err(_) => return std::f64::consts::FRAC_PI_2,
    };
    let kernel: Vec<Vec<C64>> = kernel.iter().map(|v| calc::combine(v, &bp.frame)).collect();
    let f = calc::orthonormalize(fiber, 1e-12);
    calc::principal_angles(&f, &kernel)
        .last()
        .map_or(0.0, |(angle, _)| *angle)
}

pub(crate) fn check_fiber(bp: &BoundaryPoint, fiber: &[Vec<C64>]) -> Result<()> {
    let angle = fiber_angle(bp, fiber);
    if angle > ANGLE_TOL {
        return Err(DAngeloError::IllPosedFiber { point: bp.real(), angle });
    }
    Ok(())
}

/// `∂̄α` on the fiber, before symmetrization.
pub fn dbar_alpha_raw(a: &DAngeloForm, bp: &BoundaryPoint, fiber: &[Vec<C64>]) -> Result<HermitianForm> {
    let x = bp.real();
    let mut g = dbar_b(&a.base, &x)?;
    if let Some(j) = a.gauge_jet(&x)? {
        let gf = mixed_matrix(&j);
        for (row, frow) in g.iter_mut().zip(gf) {
            for (v, w) in row.iter_mut().zip(frow) {
                *v += w;
            }
        }
    }
    Ok(dbar_from_g(&g, fiber))
}

/// `∂̄α` on the fiber, symmetrized.
pub fn dbar_alpha(a: &DAngeloForm, bp: &BoundaryPoint, fiber: &[Vec<C64>]) -> Result<HermitianForm> {
    check_fiber(bp, fiber)?;
    let mut d = dbar_alpha_raw(a, bp, fiber)?;
    d.symmetrize();
    Ok(d)
}

/// `ᾱ∧α` on the fiber: `½ v̄ vᵀ` with `vb = α(Fb)`.
pub fn wedge_alpha(a: &DAngeloForm, bp: &BoundaryPoint, fiber: &[Vec<C64>]) -> Result<HermitianForm> {
    Ok(HermitianForm::half_rank_one(&alpha_on(a, bp, fiber)?))
}

/// Ratio attained at one support point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PointRatio {
    pub index: usize,
    pub point: Vec<f64>,
    #[serde(with = "crate::extreal")]
    pub ratio: f64,
}

fn ratio_or_inf(w: &HermitianForm, d: &HermitianForm) -> f64 {
    match calc::sup_ratio(w, d, RatioTol::default()) {
        Ok(v) => v,
        Err(_) => f64::INFINITY,
    }
}

fn fiber_at(dist: &SampledDistribution, i: usize) -> Vec<Vec<C64>> {
    calc::orthonormalize(&dist.fibers[i], 1e-12)
}

/// Ratios `inf{t : ᾱ∧α ≤ t∂̄α}` at every support point.
pub fn point_ratios(a: &DAngeloForm, dist: &SampledDistribution) -> Result<Vec<PointRatio>> {
    let support = dist.support();
    let out: Vec<Result<PointRatio>> = par::map(&support, |&i| {
        let x = &dist.points[i];
        let bp = BoundaryPoint::at(&a.base, x)?;
        let fiber = fiber_at(dist, i);
        let w = wedge_alpha(a, &bp, &fiber)?;
        let mut d = dbar_alpha_raw(a, &bp, &fiber)?;
        d.symmetrize();
        Ok(PointRatio { index: i, point: x.clone(), ratio: ratio_or_inf(&w, &d) })
    });
    out.into_iter().collect()
}

/// `𝔫̃(α; 𝒟)`: the largest point ratio, `0` on empty support.
pub fn n_of_form(a: &DAngeloForm, dist: &SampledDistribution) -> Result<f64> {
    Ok(point_ratios(a, dist)?.iter().fold(0.0, |m, p| m.max(p.ratio)))
}

/// `‖α‖` on the distribution: the largest `|α(Z)|` over unit fiber vectors.
pub fn size_norm(a: &DAngeloForm, dist: &SampledDistribution) -> Result<f64> {
    let support = dist.support();
    let sizes: Vec<Result<f64>> = par::map(&support, |&i| {
        let bp = BoundaryPoint::at(&a.base, &dist.points[i])?;
        Ok(calc::cnorm(&alpha_on(a, &bp, &fiber_at(dist, i))?))
    });
    sizes.into_iter().try_fold(0.0, |m, s| Ok(f64::max(m, s?)))
}

/// `sup |Z f|` over unit null vectors where `r2 = e^f r1`, computed as the
/// size of the difference of the canonical forms of `r2` and `r1`.
pub fn sigma_distance(r1: &DefiningFunction, r2: &DefiningFunction, null_dist: &SampledDistribution) -> Result<f64> {
    let support = null_dist.support();
    let eps = 1e-3 * r1.scale();
    let sizes: Vec<Result<f64>> = par::map(&support, |&i| {
        let x = &null_dist.points[i];
        let bp1 = BoundaryPoint::at(r1, x)?;
        let bp2 = BoundaryPoint::at(r2, x)?;
        let (_, g) = calc::grad_real(r1, x)?;
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let q: Vec<f64> = x.iter().zip(&g).map(|(p, d)| p - eps * d / gn).collect();
        let (v1, v2) = (calc::value(r1, &q)?, calc::value(r2, &q)?);
        if !(v1 < 0.0 && v2 / v1 > 0.0) {
            return Err(DAngeloError::InvalidPair { point: x.clone() });
        }
        let fiber = fiber_at(null_dist, i);
        let a1 = alpha_on(&DAngeloForm::canonical(r1), &bp1, &fiber)?;
        let a2 = alpha_on(&DAngeloForm::canonical(r2), &bp2, &fiber)?;
        let diff: Vec<C64> = a2.iter().zip(&a1).map(|(p, q)| p - q).collect();
        Ok(calc::cnorm(&diff))
    });
    sizes.into_iter().try_fold(0.0, |m, s| Ok(f64::max(m, s?)))
}

/// Per-point data of the form `α_r + Σ cm dφm` as an affine function of
/// the gauge coefficients.
#[derive(Debug, Clone)]
enum PointModel {
    Line { a0: C64, a: Vec<C64>, d0: f64, d: Vec<f64> },
    Block { a0: Vec<C64>, a: Vec<Vec<C64>>, d0: HermitianForm, d: Vec<HermitianForm> },
}

/// The wedge and `∂̄α` forms of `α_r + d(Σ cm φm)` on a sampled
/// distribution, affine in the coefficients `c`.
#[derive(Debug, Clone)]
pub struct AffineModel {
    pub basis: GaugeBasis,
    pub indices: Vec<usize>,
    pub points: Vec<Vec<f64>>,
    models: Vec<PointModel>,
    scales: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl AffineModel {
    pub fn build(base: &DefiningFunction, dist: &SampledDistribution, basis: &GaugeBasis) -> Result<Self> {
        if basis.n() != base.n() {
            return Err(DAngeloError::DimensionMismatch { basis: basis.n(), domain: base.n() });
        }
        let support = dist.support();
        let built: Vec<Result<(PointModel, f64, Vec<f64>)>> = par::map(&support, |&i| {
            let x = &dist.points[i];
            let bp = BoundaryPoint::at(base, x)?;
            let fiber = fiber_at(dist, i);
            let a0: Vec<C64> = fiber.iter().map(|z| bp.hess.pair(z, &bp.n_vec)).collect();
            let mut d0 = dbar_from_g(&dbar_b(base, x)?, &fiber);
            d0.symmetrize();
            let jets = basis.jets(x);
            let mut am = Vec::with_capacity(jets.len());
            let mut dm = Vec::with_capacity(jets.len());
            for j in &jets {
                let dz = j.dz();
                am.push(fiber.iter().map(|z| dz.apply(z)).collect::<Vec<C64>>());
                let mut d = dbar_from_g(&mixed_matrix(j), &fiber);
                d.symmetrize();
                dm.push(d);
            }
            let sq = |v: &[C64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>();
            let mut scale = d0.norm().max(sq(&a0));
            for (a, d) in am.iter().zip(&dm) {
                scale = scale.max(d.norm()).max(sq(a));
            }
            let model = if fiber.len() == 1 {
                PointModel::Line {
                    a0: a0[0],
                    a: am.iter().map(|v| v[0]).collect(),
                    d0: d0.get(0, 0).re,
                    d: dm.iter().map(|h| h.get(0, 0).re).collect(),
                }
            } else {
                PointModel::Block { a0, a: am, d0, d: dm }
            };
            Ok((model, scale, jets.iter().map(|j| j.value).collect()))
        });
        let mut models = Vec::new();
        let mut scales = Vec::new();
        let mut values = Vec::new();
        let mut indices = Vec::new();
        let mut points = Vec::new();
        for (b, &i) in built.into_iter().zip(&support) {
            let (m, s, v) = b?;
            models.push(m);
            scales.push(s);
            values.push(v);
            indices.push(i);
            points.push(dist.points[i].clone());
        }
        Ok(Self { basis: basis.clone(), indices, points, models, scales, values })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    fn forms(&self, p: usize, c: &[f64]) -> (Vec<C64>, HermitianForm) {
        match &self.models[p] {
            PointModel::Line { a0, a, d0, d } => {
                let (av, dv) = line_at(*a0, a, *d0, d, c);
                (vec![av], HermitianForm::diag(&[dv]))
            }
            PointModel::Block { a0, a, d0, d } => {
                let mut av = a0.clone();
                let mut dv = d0.clone();
                for ((&cm, am), dm) in c.iter().zip(a).zip(d) {
                    if cm != 0.0 {
                        av.iter_mut().zip(am).for_each(|(x, y)| *x += cm * y);
                        dv = dv.add(&dm.scaled(cm));
                    }
                }
                (av, dv)
            }
        }
    }

    /// Ratio at support point `p` for coefficients `c`.
    pub fn ratio(&self, p: usize, c: &[f64]) -> f64 {
        match &self.models[p] {
            PointModel::Line { a0, a, d0, d } => {
                let (av, dv) = line_at(*a0, a, *d0, d, c);
                calc::scalar_ratio(0.5 * av.norm_sqr(), dv, RatioTol::default()).unwrap_or(f64::INFINITY)
            }
            PointModel::Block { .. } => {
                let (av, dv) = self.forms(p, c);
                ratio_or_inf(&HermitianForm::half_rank_one(&av), &dv)
            }
        }
    }

    pub fn ratios(&self, c: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|p| self.ratio(p, c)).collect()
    }

    /// `𝔫̃` of the gauged form; `0` on empty support.
    pub fn value(&self, c: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for p in 0..self.len() {
            worst = worst.max(self.ratio(p, c));
            if worst == f64::INFINITY {
                break;
            }
        }
        worst
    }

    /// Size norm of the gauged form.
    pub fn size(&self, c: &[f64]) -> f64 {
        (0..self.len()).map(|p| calc::cnorm(&self.forms(p, c).0)).fold(0.0, f64::max)
    }

    /// Condition number of the Gram matrix of the basis on the support.
    pub fn gram_condition(&self) -> f64 {
        let m = self.dim();
        if self.is_empty() || m == 0 {
            return 1.0;
        }
        let mut g = nalgebra::DMatrix::<f64>::zeros(m, m);
        for v in &self.values {
            for a in 0..m {
                for b in 0..m {
                    g[(a, b)] += v[a] * v[b];
                }
            }
        }
        let e = g.symmetric_eigen().eigenvalues;
        let (lo, hi) = e.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        if lo <= hi * 1e-300 || lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Normalized margins `g_p(c) = λmin(t∂̄α − ᾱ∧α)/s_p` and, for finite
    /// `k`, `(k² − ‖a_p‖²)/k²`. All are concave in `c`.
    fn margins(&self, t: f64, k: f64, c: &[f64]) -> Vec<f64> {
        let per_point: Vec<Vec<f64>> = par::map_range(self.len(), |p| {
            let s = self.scales[p];
            let (g, n2) = match &self.models[p] {
                PointModel::Line { a0, a, d0, d } => {
                    let (av, dv) = line_at(*a0, a, *d0, d, c);
                    ((t * dv - 0.5 * av.norm_sqr()) / s, av.norm_sqr())
                }
                PointModel::Block { .. } => {
                    let (av, dv) = self.forms(p, c);
                    let mtx = dv.scaled(t).add(&HermitianForm::half_rank_one(&av).scaled(-1.0));
                    (calc::eig_herm(&mtx).min() / s, av.iter().map(|x| x.norm_sqr()).sum())
                }
            };
            if k.is_finite() {
                vec![g, (k * k - n2) / (k * k)]
            } else {
                vec![g]
            }
        });
        per_point.into_iter().flatten().collect()
    }

    /// Adds the log-barrier terms of point `p` at `z = (c, μ)` for the
    /// constraints `margin − μ > 0`. Returns `None` outside the barrier's
    /// domain.
    fn barrier_point(&self, p: usize, t: f64, k: f64, z: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>) -> Option<f64> {
        let m = self.dim();
        let (c, mu) = (&z[..m], z[m]);
        let s = self.scales[p];
        let mut total = 0.0;
        // Scalar constraint ψ = g − μ with c-gradient `dg` and c-Hessian `curv`.
        let scalar = |psi: f64, dg: &[f64], curv: &dyn Fn(usize, usize) -> f64, grad: &mut [f64], hess: &mut DMatrix<f64>| -> Option<f64> {
            if !(psi > 0.0) {
                return None;
            }
            let mut dpsi = dg.to_vec();
            dpsi.push(-1.0);
            for i in 0..=m {
                grad[i] += dpsi[i] / psi;
                for j in 0..=m {
                    let mut v = -dpsi[i] * dpsi[j] / (psi * psi);
                    if i < m && j < m {
                        v += curv(i, j) / psi;
                    }
                    hess[(i, j)] += v;
                }
            }
            Some(psi.ln())
        };
        let (av, a_rows): (Vec<C64>, Vec<Vec<C64>>) = match &self.models[p] {
            PointModel::Line { a0, a, d0, d } => {
                let (av, dv) = line_at(*a0, a, *d0, d, c);
                let g = (t * dv - 0.5 * av.norm_sqr()) / s;
                let dg: Vec<f64> = (0..m).map(|i| (t * d[i] - (av.conj() * a[i]).re) / s).collect();
                let curv = |i: usize, j: usize| -(a[i].conj() * a[j]).re / s;
                total += scalar(g - mu, &dg, &curv, grad, hess)?;
                (vec![av], a.iter().map(|x| vec![*x]).collect())
            }
            PointModel::Block { a, d, .. } => {
                let (av, dv) = self.forms(p, c);
                let kd = av.len();
                let xm = dv.scaled(t).add(&HermitianForm::half_rank_one(&av).scaled(-1.0)).scaled(1.0 / s).to_matrix()
                    - DMatrix::<C64>::identity(kd, kd) * C64::new(mu, 0.0);
                let chol = xm.clone().cholesky()?;
                let logdet: f64 = (0..kd).map(|i| 2.0 * chol.l()[(i, i)].re.ln()).sum();
                let xinv = chol.inverse();
                let outer = |u: &[C64], v: &[C64]| {
                    DMatrix::<C64>::from_fn(kd, kd, |r, q| 0.5 * (u[r].conj() * v[q] + v[r].conj() * u[q]))
                };
                let mut ys: Vec<DMatrix<C64>> = (0..m)
                    .map(|i| {
                        let xi = (d[i].to_matrix() * C64::new(t, 0.0) - outer(&a[i], &av)) / C64::new(s, 0.0);
                        &xinv * xi
                    })
                    .collect();
                ys.push(-xinv.clone());
                for i in 0..=m {
                    grad[i] += ys[i].trace().re;
                    for j in 0..=m {
                        let mut v = -(&ys[i] * &ys[j]).trace().re;
                        if i < m && j < m {
                            let xij = -outer(&a[i], &a[j]) / C64::new(s, 0.0);
                            v += (&xinv * xij).trace().re;
                        }
                        hess[(i, j)] += v;
                    }
                }
                total += logdet;
                (av, a.clone())
            }
        };
        if k.is_finite() {
            let k2 = k * k;
            let n2: f64 = av.iter().map(|x| x.norm_sqr()).sum();
            let dot = |u: &[C64], v: &[C64]| u.iter().zip(v).map(|(x, y)| (x.conj() * y).re).sum::<f64>();
            let dg: Vec<f64> = (0..m).map(|i| -2.0 * dot(&av, &a_rows[i]) / k2).collect();
            let curv = |i: usize, j: usize| -2.0 * dot(&a_rows[i], &a_rows[j]) / k2;
            total += scalar((k2 - n2) / k2 - mu, &dg, &curv, grad, hess)?;
        }
        Some(total)
    }

    /// `T μ + Σ log(margin − μ)` with gradient and Hessian in `z = (c, μ)`.
    fn barrier(&self, t: f64, k: f64, weight: f64, z: &[f64]) -> Option<(f64, Vec<f64>, DMatrix<f64>)> {
        let m = self.dim();
        let chunks: Vec<usize> = (0..self.len()).step_by(BARRIER_CHUNK).collect();
        let parts = par::map(&chunks, |&start| {
            let mut g = vec![0.0; m + 1];
            let mut h = DMatrix::<f64>::zeros(m + 1, m + 1);
            let mut v = 0.0;
            for p in start..(start + BARRIER_CHUNK).min(self.len()) {
                v += self.barrier_point(p, t, k, z, &mut g, &mut h)?;
            }
            Some((v, g, h))
        });
        let mut value = weight * z[m];
        let mut grad = vec![0.0; m + 1];
        grad[m] = weight;
        let mut hess = DMatrix::<f64>::zeros(m + 1, m + 1);
        for part in parts {
            let (v, g, h) = part?;
            value += v;
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            hess += h;
        }
        Some((value, grad, hess))
    }

    /// Searches for coefficients with `ᾱ∧α ≤ t∂̄α` at every point (and size
    /// at most `k`) by maximizing the smallest normalized margin `μ` with a
    /// log-barrier method. Stops as soon as `μ ≥ 0`, and reports
    /// infeasibility once the barrier's duality gap shows `max μ < 0`.
    pub fn feasible(&self, t: f64, k: f64, c0: &[f64]) -> Option<Vec<f64>> {
        let m = self.dim();
        let lowest = self.margins(t, k, c0).into_iter().fold(f64::INFINITY, f64::min);
        if lowest >= 0.0 {
            return Some(c0.to_vec());
        }
        if self.is_empty() {
            return None;
        }
        let pieces = (self.len() * if k.is_finite() { 2 } else { 1 }) as f64;
        let mut z = c0.to_vec();
        z.push(lowest - 0.1 * (1.0 + lowest.abs()));
        let mut weight = pieces / (1.0 + lowest.abs());
        loop {
            z = newton_ascent(|z| self.barrier(t, k, weight, z), z, |z| z[m] >= 0.0)?;
            if z[m] >= 0.0 {
                let c = z[..m].to_vec();
                let lowest = self.margins(t, k, &c).into_iter().fold(f64::INFINITY, f64::min);
                return (lowest >= -1e-12).then_some(c);
            }
            if z[m] + pieces / weight < 0.0 {
                return None;
            }
            weight *= 10.0;
            if weight > 1e15 {
                return None;
            }
        }
    }

    /// Adds `log det B_p(c, t)` and its derivatives, where
    /// `B_p = [[∂̄α, ā/√2], [aᵀ/√2, t]]` is positive definite exactly when
    /// `ᾱ∧α < t∂̄α` at point `p`.
    fn lmi_point(&self, p: usize, k: f64, z: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>) -> Option<f64> {
        let m = self.dim();
        let (c, t) = (&z[..m], z[m]);
        if !(t > 0.0) {
            return None;
        }
        let mut total = 0.0;
        let av = match &self.models[p] {
            PointModel::Line { a0, a, d0, d } => {
                let (av, dv) = line_at(*a0, a, *d0, d, c);
                let q = dv * t - 0.5 * av.norm_sqr();
                if !(q > 0.0) {
                    return None;
                }
                let mut dq: Vec<f64> = (0..m).map(|i| d[i] * t - (av.conj() * a[i]).re).collect();
                dq.push(dv);
                for i in 0..=m {
                    grad[i] += dq[i] / q;
                    for j in 0..=m {
                        let curv = if i < m && j < m {
                            -(a[i].conj() * a[j]).re
                        } else if i < m {
                            d[i]
                        } else if j < m {
                            d[j]
                        } else {
                            0.0
                        };
                        hess[(i, j)] += curv / q - dq[i] * dq[j] / (q * q);
                    }
                }
                total += q.ln();
                vec![av]
            }
            PointModel::Block { a, d, .. } => {
                let (av, dv) = self.forms(p, c);
                let kd = av.len();
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let embed = |dm: &DMatrix<C64>, v: &[C64], corner: f64| {
                    DMatrix::<C64>::from_fn(kd + 1, kd + 1, |r, q| match (r < kd, q < kd) {
                        (true, true) => dm[(r, q)],
                        (true, false) => v[r].conj() * h,
                        (false, true) => v[q] * h,
                        (false, false) => C64::new(corner, 0.0),
                    })
                };
                let b = embed(&dv.to_matrix(), &av, t);
                let chol = b.cholesky()?;
                let logdet: f64 = (0..=kd).map(|i| 2.0 * chol.l()[(i, i)].re.ln()).sum();
                let binv = chol.inverse();
                let zero = vec![C64::new(0.0, 0.0); kd];
                let mut ys: Vec<DMatrix<C64>> = (0..m).map(|i| &binv * embed(&d[i].to_matrix(), &a[i], 0.0)).collect();
                ys.push(&binv * embed(&DMatrix::zeros(kd, kd), &zero, 1.0));
                for i in 0..=m {
                    grad[i] += ys[i].trace().re;
                    for j in 0..=i {
                        let v = -(&ys[i] * &ys[j]).trace().re;
                        hess[(i, j)] += v;
                        if i != j {
                            hess[(j, i)] += v;
                        }
                    }
                }
                total += logdet;
                av
            }
        };
        if k.is_finite() {
            let a_rows: Vec<Vec<C64>> = match &self.models[p] {
                PointModel::Line { a, .. } => a.iter().map(|x| vec![*x]).collect(),
                PointModel::Block { a, .. } => a.clone(),
            };
            let k2 = k * k;
            let dot = |u: &[C64], v: &[C64]| u.iter().zip(v).map(|(x, y)| (x.conj() * y).re).sum::<f64>();
            let q = (k2 - dot(&av, &av)) / k2;
            if !(q > 0.0) {
                return None;
            }
            let dq: Vec<f64> = (0..m).map(|i| -2.0 * dot(&av, &a_rows[i]) / k2).collect();
            for i in 0..m {
                grad[i] += dq[i] / q;
                for j in 0..m {
                    hess[(i, j)] += -2.0 * dot(&a_rows[i], &a_rows[j]) / (k2 * q) - dq[i] * dq[j] / (q * q);
                }
            }
            total += q.ln();
        }
        Some(total)
    }

    /// `−T t + Σ_p log det B_p` with gradient and Hessian in `z = (c, t)`.
    fn lmi_barrier(&self, k: f64, weight: f64, z: &[f64]) -> Option<(f64, Vec<f64>, DMatrix<f64>)> {
        let m = self.dim();
        let chunks: Vec<usize> = (0..self.len()).step_by(BARRIER_CHUNK).collect();
        let parts = par::map(&chunks, |&start| {
            let mut g = vec![0.0; m + 1];
            let mut h = DMatrix::<f64>::zeros(m + 1, m + 1);
            let mut v = 0.0;
            for p in start..(start + BARRIER_CHUNK).min(self.len()) {
                v += self.lmi_point(p, k, z, &mut g, &mut h)?;
            }
            Some((v, g, h))
        });
        let mut value = -weight * z[m];
        let mut grad = vec![0.0; m + 1];
        grad[m] = -weight;
        let mut hess = DMatrix::<f64>::zeros(m + 1, m + 1);
        for part in parts {
            let (v, g, h) = part?;
            value += v;
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            hess += h;
        }
        Some((value, grad, hess))
    }

    /// Minimizes `t` directly over the convex set `{(c, t) : ᾱ∧α ≤ t∂̄α}`
    /// by a barrier method started from the strictly feasible `(c, t)`.
    /// Returns the final coefficients and a lower bound for the minimum
    /// from the barrier's duality gap.
    pub fn minimize_t(&self, k: f64, c: &[f64], t: f64, rtol: f64) -> Option<(Vec<f64>, f64)> {
        let m = self.dim();
        let mut z = c.to_vec();
        z.push(t);
        let mut nu = 0.0;
        for model in &self.models {
            nu += match model {
                PointModel::Line { .. } => 2.0,
                PointModel::Block { a0, .. } => (a0.len() + 1) as f64,
            };
            if k.is_finite() {
                nu += 1.0;
            }
        }
        self.lmi_barrier(k, 0.0, &z)?;
        let mut weight = nu / t;
        for _ in 0..40 {
            z = newton_ascent(|z| self.lmi_barrier(k, weight, z), z, |_| false)?;
            if nu / weight <= 0.25 * rtol * z[m] {
                break;
            }
            weight *= 8.0;
        }
        let lower = (z[m] - nu / weight).max(0.0);
        z.truncate(m);
        Some((z, lower))
    }
}

const BARRIER_CHUNK: usize = 64;

/// Damped Newton ascent on a concave function given with its gradient and
/// Hessian. Stops at small Newton decrement, a failed line search, or when
/// `done` holds. Returns `None` if the start is outside the domain.
fn newton_ascent<F, D>(eval: F, mut z: Vec<f64>, done: D) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>, DMatrix<f64>)>,
    D: Fn(&[f64]) -> bool,
{
    let n = z.len();
    let (mut phi, mut grad, mut hess) = eval(&z)?;
    for _ in 0..100 {
        if done(&z) {
            break;
        }
        let neg = -hess;
        let rhs = DVector::from_vec(grad.clone());
        let step = match neg.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => {
                let shift = 1e-10 * neg.diagonal().amax().max(1e-300);
                match (neg + DMatrix::<f64>::identity(n, n) * shift).cholesky() {
                    Some(ch) => ch.solve(&rhs),
                    None => break,
                }
            }
        };
        let dec2: f64 = grad.iter().zip(step.iter()).map(|(g, s)| g * s).sum();
        if !(dec2 > 1e-10) {
            break;
        }
        let mut s = 1.0;
        let mut next = None;
        for _ in 0..50 {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + s * b).collect();
            if let Some(e) = eval(&trial) {
                if e.0 >= phi + 0.25 * s * dec2 {
                    next = Some((trial, e));
                    break;
                }
            }
            s *= 0.5;
        }
        match next {
            Some((trial, e)) => {
                z = trial;
                (phi, grad, hess) = e;
            }
            None => break,
        }
    }
    Some(z)
}

fn line_at(a0: C64, a: &[C64], d0: f64, d: &[f64], c: &[f64]) -> (C64, f64) {
    let mut av = a0;
    let mut dv = d0;
    for ((&cm, am), dm) in c.iter().zip(a).zip(d) {
        av += cm * am;
        dv += cm * dm;
    }
    (av, dv)
}

/// Optimizer budget for [`optimize_n`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Budget {
    pub starts: usize,
    pub evaluations: usize,
    pub seed: u64,
    /// Initial simplex edge and half-width of the random starts.
    pub step: f64,
    /// Relative resolution of the bisection on `t`.
    pub bisection_rtol: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { starts: 8, evaluations: 2000, seed: 1, step: 0.5, bisection_rtol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StartTrace {
    pub seed: u64,
    #[serde(with = "crate::extreal")]
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BisectionStep {
    pub t: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OptimizerTrace {
    pub starts: Vec<StartTrace>,
    pub bisection: Vec<BisectionStep>,
}

/// Result of [`optimize_n`]. `value` is attained by `coefficients`, so it is
/// an upper bound for the infimum over the basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormEstimate {
    #[serde(with = "crate::extreal")]
    pub value: f64,
    pub bound: String,
    pub coefficients: Vec<f64>,
    pub basis: GaugeBasis,
    pub basis_id: String,
    #[serde(rename = "K", with = "crate::extreal")]
    pub k: f64,
    #[serde(with = "crate::extreal")]
    pub size: f64,
    pub support_size: usize,
    #[serde(with = "crate::extreal")]
    pub gram_condition: f64,
    pub per_point: Vec<PointRatio>,
    pub seeds: Vec<u64>,
    pub trace: OptimizerTrace,
}

const PENALTY: f64 = 1e12;
const WORST_POINTS: usize = 5;

/// `𝔫_K(𝒟)` over gauges in `basis`: multi-start simplex search on the
/// pointwise sup followed by bisection on `t` with a feasibility search.
pub fn optimize_n(
    base: &DefiningFunction,
    dist: &SampledDistribution,
    basis: &GaugeBasis,
    k: f64,
    budget: &Budget,
) -> Result<NormEstimate> {
    let model = AffineModel::build(base, dist, basis)?;
    Ok(optimize_model(&model, k, budget, None))
}

/// [`optimize_n`] on a prebuilt model, optionally adding a warm start.
pub fn optimize_model(model: &AffineModel, k: f64, budget: &Budget, warm: Option<&[f64]>) -> NormEstimate {
    let m = model.dim();
    let zero = vec![0.0; m];
    let mut starts: Vec<(u64, Vec<f64>)> = vec![(budget.seed, zero.clone())];
    if let Some(w) = warm {
        starts.push((budget.seed, w.to_vec()));
    }
    for i in 1..budget.starts.max(1) {
        let seed = budget.seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        starts.push((seed, (0..m).map(|_| budget.step * rng.random_range(-1.0..1.0)).collect()));
    }
    let seeds: Vec<u64> = starts.iter().map(|s| s.0).collect();
    let mut trace = OptimizerTrace { starts: vec![], bisection: vec![] };

    if model.is_empty() {
        return finish(model, k, zero, 0.0, seeds, trace);
    }

    let merit = |c: &[f64]| -> f64 {
        if k.is_finite() {
            let s = model.size(c);
            if s >= k {
                return PENALTY * (2.0 + (s - k) / k);
            }
        }
        let r = model.ratios(c);
        let inf = r.iter().filter(|v| v.is_infinite()).count();
        if inf == 0 {
            r.iter().fold(0.0, |a, &b| a.max(b))
        } else {
            PENALTY * (1.0 + inf as f64 / r.len() as f64)
        }
    };
    let runs: Vec<optim::SimplexResult> = par::map(&starts, |(_, x0)| {
        if merit(x0) == 0.0 {
            return optim::SimplexResult { x: x0.clone(), f: 0.0, evaluations: 1 };
        }
        optim::nelder_mead(merit, x0, budget.step, budget.evaluations, 1e-12)
    });
    let mut best = (f64::INFINITY, zero.clone());
    for ((seed, _), run) in starts.iter().zip(&runs) {
        let value = if run.f < PENALTY { run.f } else { f64::INFINITY };
        trace.starts.push(StartTrace { seed: *seed, value, evaluations: run.evaluations });
        if run.f < best.0 || (best.0.is_infinite() && run.f < PENALTY) {
            best = (run.f, run.x.clone());
        }
    }
    let (best_value, best_c) = if best.0 < PENALTY { (best.0, best.1) } else { (f64::INFINITY, best.1) };
    if best_value == 0.0 {
        return finish(model, k, best_c, 0.0, seeds, trace);
    }

    let (mut hi, mut cert) = if best_value.is_finite() {
        (best_value, best_c.clone())
    } else {
        let mut t = 1.0;
        loop {
            let found = model.feasible(t, k, &best_c);
            trace.bisection.push(BisectionStep { t, feasible: found.is_some() });
            if let Some(c) = found {
                break (t, c);
            }
            t *= 4.0;
            if t > 1e8 {
                return finish(model, k, best_c, f64::INFINITY, seeds, trace);
            }
        }
    };
    let mut lo = 0.0;
    if let Some((c, lower)) = model.minimize_t(k, &cert, 1.5 * hi, budget.bisection_rtol) {
        let v = model.value(&c);
        trace.bisection.push(BisectionStep { t: v, feasible: v.is_finite() });
        if v <= hi {
            hi = v;
            cert = c;
        }
        lo = (lower * (1.0 - budget.bisection_rtol)).min(hi);
    }
    for _ in 0..60 {
        if hi - lo <= budget.bisection_rtol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let found = model.feasible(mid, k, &cert);
        trace.bisection.push(BisectionStep { t: mid, feasible: found.is_some() });
        match found {
            Some(c) => {
                hi = mid;
                cert = c;
            }
            None => lo = mid,
        }
    }
    let cert_value = model.value(&cert);
    if cert_value <= best_value && (!k.is_finite() || model.size(&cert) < k) {
        finish(model, k, cert, cert_value, seeds, trace)
    } else {
        finish(model, k, best_c, best_value, seeds, trace)
    }
}

fn finish(model: &AffineModel, k: f64, c: Vec<f64>, value: f64, seeds: Vec<u64>, trace: OptimizerTrace) -> NormEstimate {
    let mut per_point: Vec<PointRatio> = model
        .ratios(&c)
        .into_iter()
        .enumerate()
        .map(|(p, ratio)| PointRatio { index: model.indices[p], point: model.points[p].clone(), ratio })
        .collect();
    per_point.sort_by(|a, b| b.ratio.total_cmp(&a.ratio).then(a.index.cmp(&b.index)));
    per_point.truncate(WORST_POINTS);
    NormEstimate {
        value,
        bound: "upper".into(),
        size: model.size(&c),
        coefficients: c,
        basis: model.basis.clone(),
        basis_id: model.basis.id(),
        k,
        support_size: model.len(),
        gram_condition: model.gram_condition(),
        per_point,
        seeds,
        trace,
    }
}

/// Residuals of the identity checks on a null distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConsistencyReport {
    pub points: usize,
    pub skipped: bool,
    /// `|α_{e^f r}(Z) − α_r(Z) − df(Z)|`.
    pub gauge_residual: f64,
    /// `|dα̃|` on pairs from `𝒩 ⊕ 𝒩̄`.
    pub closedness_residual: f64,
    /// Conjugate-asymmetry of the unsymmetrized `∂̄α`.
    pub symmetry_residual: f64,
    pub gauge_tol: f64,
    pub closedness_tol: f64,
    pub symmetry_tol: f64,
    pub pass: bool,
}

/// Checks the gauge shift rule, closedness of `α̃` on the null directions
/// and Hermitian symmetry of `∂̄α` at every support point of `null_dist`.
pub fn consistency_suite(a: &DAngeloForm, null_dist: &SampledDistribution) -> Result<ConsistencyReport> {
    let (gauge_tol, closedness_tol, symmetry_tol) = (1e-5, 1e-4, 1e-6);
    let support = null_dist.support();
    let shifted = match &a.gauge {
        Some(g) => DefiningFunction::conformal(&a.base, g.clone()),
        None => a.base.clone(),
    };
    let per: Vec<Result<(f64, f64, f64)>> = par::map(&support, |&i| {
        let x = &null_dist.points[i];
        let fiber = fiber_at(null_dist, i);
        let bp = BoundaryPoint::at(&a.base, x)?;
        let bp_shift = BoundaryPoint::at(&shifted, x)?;
        let lhs = alpha_on(&DAngeloForm::canonical(&shifted), &bp_shift, &fiber)?;
        let rhs = alpha_on(a, &bp, &fiber)?;
        let gauge = lhs.iter().zip(&rhs).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);

        let m = x.len();
        let h = calc::fd_step(x);
        let mut jac = vec![vec![0.0; m]; m];
        for (ax, row) in jac.iter_mut().enumerate() {
            let mut e = vec![0.0; m];
            e[ax] = 1.0;
            *row = calc::central_diff(|y| ambient_alpha(a, y).unwrap_or_else(|_| vec![f64::NAN; m]), x, &e, h);
        }
        let form = |u: &[C64], v: &[C64]| -> C64 {
            let mut s = C64::new(0.0, 0.0);
            for p in 0..m {
                for q in 0..m {
                    s += (jac[p][q] - jac[q][p]) * u[p] * v[q];
                }
            }
            s
        };
        let lifted: Vec<Vec<C64>> = fiber.iter().map(|z| calc::complexify10(z)).collect();
        let conj = |v: &[C64]| v.iter().map(|c| c.conj()).collect::<Vec<C64>>();
        let mut closed: f64 = 0.0;
        for u in &lifted {
            for v in &lifted {
                closed = closed.max(form(u, v).norm()).max(form(u, &conj(v)).norm());
            }
        }
        if !closed.is_finite() {
            return Err(CalcError::Evaluation { point: x.clone() }.into());
        }
        let sym = dbar_alpha_raw(a, &bp, &fiber)?.asymmetry();
        Ok((gauge, closed, sym))
    });
    let mut report = ConsistencyReport {
        points: support.len(),
        skipped: support.is_empty(),
        gauge_residual: 0.0,
        closedness_residual: 0.0,
        symmetry_residual: 0.0,
        gauge_tol,
        closedness_tol,
        symmetry_tol,
        pass: true,
    };
    for r in per {
        let (g, c, s) = r?;
        report.gauge_residual = report.gauge_residual.max(g);
        report.closedness_residual = report.closedness_residual.max(c);
        report.symmetry_residual = report.symmetry_residual.max(s);
    }
    report.pass = report.gauge_residual <= gauge_tol
        && report.closedness_residual <= closedness_tol
        && report.symmetry_residual <= symmetry_tol;
    Ok(report)
}
