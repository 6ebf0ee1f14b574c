//! Defining functions, boundary points, tangential frames and Levi forms.

use crate::calc::{self, Backend, CalcError, ComplexPoint, Covector10, HermitianForm, Scalar, Smooth, C64};
use crate::gauge::Gauge;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypersurfaceError {
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error("projection to the boundary did not converge from {point:?}")]
    ProjectionFailure { point: Vec<f64> },
    #[error("degenerate gradient |∂r| = {norm} at {point:?}")]
    DegenerateGradient { point: Vec<f64>, norm: f64 },
    #[error("point {point:?} is outside the bounding box")]
    OutOfBox { point: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Shape {
    /// `|z|² − 1`.
    Ball { n: usize },
    /// `Σ |zj|²/aj² − 1`.
    Ellipsoid { axes: Vec<f64> },
    /// `|z1|⁴ + |z2|² − 1`.
    Quartic,
    /// `|z1|² + |z1|⁴ − |z2|² + |z2|⁴ − 1`, not pseudoconvex near `z2 = 0`.
    Saddle,
    /// `|w − e^{iβ log|z|²}|² − 1 + η(log|z|²)` with
    /// `η(t) = s·max(0, |t| − t0)⁴`.
    Worm { beta: f64, t0: f64, s: f64 },
    /// `e^f · r`.
    Conformal { base: Box<DefiningFunction>, gauge: Gauge },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DefiningFunction {
    pub id: String,
    pub params: BTreeMap<String, f64>,
    pub shape: Shape,
    /// Per real coordinate `(lo, hi)`.
    pub bbox: Vec<(f64, f64)>,
}

impl DefiningFunction {
    pub fn ball(n: usize) -> Self {
        Self {
            id: "ball".into(),
            params: BTreeMap::from([("n".into(), n as f64)]),
            shape: Shape::Ball { n },
            bbox: vec![(-1.5, 1.5); 2 * n],
        }
    }

    pub fn ellipsoid(axes: &[f64]) -> Self {
        let params = axes.iter().enumerate().map(|(i, a)| (format!("a{}", i + 1), *a)).collect();
        Self {
            id: "ellipsoid".into(),
            params,
            shape: Shape::Ellipsoid { axes: axes.to_vec() },
            bbox: axes.iter().flat_map(|a| [(-1.5 * a, 1.5 * a); 2]).collect(),
        }
    }

    pub fn quartic() -> Self {
        Self {
            id: "quartic".into(),
            params: BTreeMap::new(),
            shape: Shape::Quartic,
            bbox: vec![(-1.5, 1.5); 4],
        }
    }

    pub fn saddle() -> Self {
        Self {
            id: "saddle".into(),
            params: BTreeMap::new(),
            shape: Shape::Saddle,
            bbox: vec![(-2.0, 2.0); 4],
        }
    }

    pub fn worm(beta: f64, t0: f64, s: f64) -> Self {
        let zmax = (0.5 * (t0 + s.powf(-0.25))).exp() * 1.01;
        Self {
            id: "worm".into(),
            params: BTreeMap::from([("beta".into(), beta), ("t0".into(), t0), ("s".into(), s)]),
            shape: Shape::Worm { beta, t0, s },
            bbox: vec![(-zmax, zmax), (-zmax, zmax), (-2.05, 2.05), (-2.05, 2.05)],
        }
    }

    /// `e^f · base`.
    pub fn conformal(base: &DefiningFunction, gauge: Gauge) -> Self {
        Self {
            id: format!("exp({})*{}", gauge.basis.id(), base.id),
            params: base.params.clone(),
            bbox: base.bbox.clone(),
            shape: Shape::Conformal { base: Box::new(base.clone()), gauge },
        }
    }

    pub fn in_box(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.bbox).all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    /// A point with `r < 0`.
    pub fn interior_point(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Worm { .. } => vec![1.0, 0.0, 1.0, 0.0],
            Shape::Conformal { base, .. } => base.interior_point(),
            _ => vec![0.0; 2 * self.n()],
        }
    }

    /// Characteristic length of the domain.
    pub fn scale(&self) -> f64 {
        match &self.shape {
            Shape::Ellipsoid { axes } => axes.iter().cloned().fold(0.0, f64::max),
            Shape::Conformal { base, .. } => base.scale(),
            _ => 1.0,
        }
    }
}

impl Smooth for DefiningFunction {
    fn n(&self) -> usize {
        match &self.shape {
            Shape::Ball { n } => *n,
            Shape::Ellipsoid { axes } => axes.len(),
            Shape::Conformal { base, .. } => base.n(),
            _ => 2,
        }
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        let abs2 = |j: usize| x[2 * j] * x[2 * j] + x[2 * j + 1] * x[2 * j + 1];
        match &self.shape {
            Shape::Ball { n } => (0..*n).fold(S::cst(-1.0), |acc, j| acc + abs2(j)),
            Shape::Ellipsoid { axes } => axes
                .iter()
                .enumerate()
                .fold(S::cst(-1.0), |acc, (j, a)| acc + abs2(j).scale(1.0 / (a * a))),
            Shape::Quartic => abs2(0).sq() + abs2(1) - S::cst(1.0),
            Shape::Saddle => abs2(0) + abs2(0).sq() - abs2(1) + abs2(1).sq() - S::cst(1.0),
            Shape::Worm { beta, t0, s } => {
                let t = abs2(0).ln();
                let h = t.scale(*beta);
                let u = (x[2] - h.cos()).sq() + (x[3] - h.sin()).sq();
                let tv = t.re();
                let eta = if tv > *t0 {
                    t.add_f(-t0).powi(4).scale(*s)
                } else if tv < -*t0 {
                    (-t).add_f(-t0).powi(4).scale(*s)
                } else {
                    S::cst(0.0)
                };
                u - S::cst(1.0) + eta
            }
            Shape::Conformal { base, gauge } => gauge.eval(x).exp() * base.eval(x),
        }
    }
}

/// A boundary point with its cached first and second order data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundaryPoint {
    pub p: ComplexPoint,
    pub dr: Covector10,
    /// `N = Σ conj(∂r)j/‖∂r‖² ∂zj`, so `Nr = 1`.
    pub n_vec: Vec<C64>,
    /// Orthonormal basis of `ker ∂r`.
    pub frame: Vec<Vec<C64>>,
    pub residual: f64,
    /// Ambient complex Hessian of r.
    pub hess: HermitianForm,
}

impl BoundaryPoint {
    /// Builds the cached data at `x` without moving it.
    pub fn at<F: Smooth + ?Sized>(f: &F, x: &[f64]) -> Result<Self, HypersurfaceError> {
        let jet = calc::jet2(f, x, Backend::Dual)?;
        let dr = jet.dz();
        let norm = dr.norm();
        if norm < 1e-10 {
            return Err(HypersurfaceError::DegenerateGradient { point: x.to_vec(), norm });
        }
        let n_vec: Vec<C64> = dr.0.iter().map(|c| c.conj() / (norm * norm)).collect();
        Ok(Self {
            p: ComplexPoint::from_real(x),
            frame: tangential_frame(&dr),
            dr,
            n_vec,
            residual: jet.value.abs(),
            hess: jet.levi_matrix(),
        })
    }

    pub fn real(&self) -> Vec<f64> {
        self.p.to_real()
    }

    /// Largest deviation of `Z*Z` from the identity.
    pub fn frame_defect(&self) -> f64 {
        let k = self.frame.len();
        let mut worst: f64 = 0.0;
        for a in 0..k {
            for b in 0..k {
                let g = calc::cdot(&self.frame[a], &self.frame[b]);
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }
}

/// Gram–Schmidt on the canonical basis projected to `ker ∂r`, skipping the
/// coordinate direction most parallel to `conj(∂r)`.
pub fn tangential_frame(dr: &Covector10) -> Vec<Vec<C64>> {
    let n = dr.0.len();
    let norm = dr.norm();
    let nhat: Vec<C64> = dr.0.iter().map(|c| c.conj() / norm).collect();
    let mut skip = 0;
    for j in 1..n {
        if nhat[j].norm() > nhat[skip].norm() + 1e-14 {
            skip = j;
        }
    }
    let seeds: Vec<Vec<C64>> = (0..n)
        .filter(|&j| j != skip)
        .map(|j| {
            let c = nhat[j].conj();
            (0..n)
                .map(|i| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) } - c * nhat[i])
                .collect()
        })
        .collect();
    calc::orthonormalize(&seeds, 1e-12)
}

pub const BOUNDARY_TOL: f64 = 1e-10;
pub const FRAME_TOL: f64 = 1e-9;

/// Newton iteration along the real gradient until `|r| ≤ tol`.
pub fn project_to_boundary<F: Smooth + ?Sized>(
    f: &F,
    z0: &[f64],
    tol: f64,
) -> Result<BoundaryPoint, HypersurfaceError> {
    let mut x = z0.to_vec();
    for _ in 0..50 {
        let (r, g) = calc::grad_real(f, &x)?;
        if r.abs() <= tol {
            return BoundaryPoint::at(f, &x);
        }
        let g2: f64 = g.iter().map(|v| v * v).sum();
        if g2.sqrt() < 2e-10 {
            return Err(HypersurfaceError::DegenerateGradient { point: x, norm: 0.5 * g2.sqrt() });
        }
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= r * gi / g2;
        }
    }
    Err(HypersurfaceError::ProjectionFailure { point: z0.to_vec() })
}

/// `L = Z* H Z` on the tangential frame.
pub fn levi_form(bp: &BoundaryPoint) -> HermitianForm {
    bp.hess.restrict(&bp.frame)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub index: usize,
    pub point: Vec<f64>,
    pub eigenvalue: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct PseudoconvexityReport {
    pub min_eigenvalue: f64,
    pub points: usize,
    pub rel_tol: f64,
    pub violations: Vec<Violation>,
}

impl PseudoconvexityReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn pseudoconvexity_report(sample: &[BoundaryPoint], rel_tol: f64) -> PseudoconvexityReport {
    let mins: Vec<f64> = crate::par::map(sample, |bp| calc::eig_herm(&levi_form(bp)).min());
    let violations = mins
        .iter()
        .enumerate()
        .filter(|(_, m)| **m < -rel_tol)
        .map(|(i, m)| Violation { index: i, point: sample[i].real(), eigenvalue: *m })
        .collect();
    PseudoconvexityReport {
        min_eigenvalue: mins.iter().cloned().fold(f64::INFINITY, f64::min),
        points: sample.len(),
        rel_tol,
        violations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum Strategy {
    #[default]
    Grid,
    Random,
    Param,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "grid" => Ok(Self::Grid),
            "random" => Ok(Self::Random),
            "param" => Ok(Self::Param),
            _ => Err(format!("unknown sampling strategy '{s}'")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub points: Vec<BoundaryPoint>,
    pub requested: usize,
    pub failures: usize,
}

impl Sample {
    pub fn warning(&self) -> Option<String> {
        (self.points.len() < self.requested).then(|| {
            format!(
                "partial sample: {} of {} points ({} projections failed)",
                self.points.len(),
                self.requested,
                self.failures
            )
        })
    }
}

/// Boundary sample. `Grid` casts rays from an interior point along a
/// deterministic low-discrepancy set of directions, `Random` along seeded
/// random directions; `Param` uses the analytic parametrization where the
/// domain has one (falling back to `Grid`).
pub fn sample_boundary(f: &DefiningFunction, strategy: Strategy, count: usize, seed: u64) -> Sample {
    let seeds: Vec<Vec<f64>> = match strategy {
        Strategy::Param => match param_points(f, count) {
            Some(pts) => pts,
            None => return sample_boundary(f, Strategy::Grid, count, seed),
        },
        Strategy::Grid => {
            let dim = 2 * f.n();
            let alpha = r_sequence(dim);
            (0..count)
                .filter_map(|i| {
                    let u: Vec<f64> =
                        alpha.iter().map(|a| (0.5 + (i as f64 + 1.0) * a).fract()).collect();
                    ray_hit(f, &gaussian_dir(&u))
                })
                .collect()
        }
        Strategy::Random => {
            let dim = 2 * f.n();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dirs: Vec<Vec<f64>> = (0..count)
                .map(|_| {
                    let u: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                    gaussian_dir(&u)
                })
                .collect();
            dirs.iter().filter_map(|d| ray_hit(f, d)).collect()
        }
    };
    let requested = if strategy == Strategy::Param { seeds.len() } else { count };
    let projected: Vec<Option<BoundaryPoint>> =
        crate::par::map(&seeds, |x| project_to_boundary(f, x, BOUNDARY_TOL).ok());
    let points: Vec<BoundaryPoint> = projected.into_iter().flatten().collect();
    let failures = requested - points.len().min(requested);
    Sample { points, requested, failures }
}

// Additive recurrence with the generalized golden ratio.
fn r_sequence(dim: usize) -> Vec<f64> {
    let mut g = 2.0f64;
    for _ in 0..64 {
        g = (1.0 + g).powf(1.0 / (dim as f64 + 1.0));
    }
    (1..=dim).map(|k| (1.0 / g.powi(k as i32)).fract()).collect()
}

fn gaussian_dir(u: &[f64]) -> Vec<f64> {
    let mut d: Vec<f64> = u
        .chunks(2)
        .flat_map(|c| {
            let r = (-2.0 * c[0].max(1e-300).ln()).sqrt();
            let t = 2.0 * PI * c.get(1).copied().unwrap_or(0.0);
            [r * t.cos(), r * t.sin()]
        })
        .take(u.len())
        .collect();
    let n = d.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    d.iter_mut().for_each(|v| *v /= n);
    d
}

// First sign change of r along the ray from the interior point, refined by
// bisection.
fn ray_hit(f: &DefiningFunction, dir: &[f64]) -> Option<Vec<f64>> {
    let c = f.interior_point();
    let diam = f.bbox.iter().map(|(lo, hi)| (hi - lo).powi(2)).sum::<f64>().sqrt();
    let step = diam / 256.0;
    let at = |t: f64| -> Vec<f64> { c.iter().zip(dir).map(|(a, d)| a + t * d).collect() };
    let mut t0 = 0.0;
    let mut t1 = step;
    loop {
        let x = at(t1);
        if !f.in_box(&x) {
            return None;
        }
        let v = f.eval(&x[..]);
        if !v.is_finite() {
            return None;
        }
        if v > 0.0 {
            break;
        }
        t0 = t1;
        t1 += step;
    }
    for _ in 0..60 {
        let m = 0.5 * (t0 + t1);
        if f.eval(&at(m)[..]) > 0.0 {
            t1 = m;
        } else {
            t0 = m;
        }
    }
    Some(at(0.5 * (t0 + t1)))
}

/// Points placed exactly on analytic strata of the example domains.
pub fn param_points(f: &DefiningFunction, count: usize) -> Option<Vec<Vec<f64>>> {
    let count = count.max(8);
    match &f.shape {
        Shape::Ball { n: 2 } => Some(sphere_param(count, 1.0, 1.0)),
        Shape::Ellipsoid { axes } if axes.len() == 2 => {
            Some(sphere_param(count, axes[0], axes[1]))
        }
        Shape::Quartic => {
            let nc = (count / 4).max(4);
            let mut pts: Vec<Vec<f64>> = (0..nc)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / nc as f64;
                    vec![0.0, 0.0, t.cos(), t.sin()]
                })
                .collect();
            // |z2| = cos a, |z1| = sqrt(sin a) off the circle.
            let rest = count - nc;
            let na = ((rest as f64 / 4.0).cbrt().round() as usize).max(2);
            let nphi = (rest / na).max(4);
            let n1 = (nphi as f64).sqrt().round().max(2.0) as usize;
            let n2 = (nphi / n1).max(2);
            for ia in 0..na {
                let a = 0.5 * PI * (ia as f64 + 0.5) / na as f64;
                let (m1, m2) = (a.sin().sqrt(), a.cos());
                for i1 in 0..n1 {
                    let p1 = 2.0 * PI * (i1 as f64 + 0.25) / n1 as f64;
                    for i2 in 0..n2 {
                        let p2 = 2.0 * PI * (i2 as f64 + 0.5) / n2 as f64;
                        pts.push(vec![m1 * p1.cos(), m1 * p1.sin(), m2 * p2.cos(), m2 * p2.sin()]);
                    }
                }
            }
            Some(pts)
        }
        Shape::Worm { beta, t0, s } => Some(worm_param(*beta, *t0, *s, count)),
        _ => None,
    }
}

fn sphere_param(count: usize, a1: f64, a2: f64) -> Vec<Vec<f64>> {
    let na = ((count as f64 / 4.0).cbrt().round() as usize).max(2);
    let nphi = (count / na).max(4);
    let n1 = (nphi as f64).sqrt().round().max(2.0) as usize;
    let n2 = (nphi / n1).max(2);
    let mut pts = Vec::with_capacity(na * n1 * n2);
    for ia in 0..na {
        let a = 0.5 * PI * (ia as f64 + 0.5) / na as f64;
        for i1 in 0..n1 {
            let p1 = 2.0 * PI * i1 as f64 / n1 as f64;
            for i2 in 0..n2 {
                let p2 = 2.0 * PI * (i2 as f64 + 0.5) / n2 as f64;
                let (m1, m2) = (a1 * a.cos(), a2 * a.sin());
                pts.push(vec![m1 * p1.cos(), m1 * p1.sin(), m2 * p2.cos(), m2 * p2.sin()]);
            }
        }
    }
    pts
}

/// Worm layout: three quarters of the points on the annulus `{w = 0}` as an
/// isotropic log-polar grid, the rest on the whole boundary circle bundle
/// including the caps.
pub fn worm_param(beta: f64, t0: f64, s: f64, count: usize) -> Vec<Vec<f64>> {
    let l = t0;
    let (nr, nphi) = worm_annulus_grid(l, (3 * count) / 4);
    let mut pts = annulus_points(-0.5 * l, 0.5 * l, nr, nphi);
    let rest = count - nr * nphi;
    let tmax = t0 + s.powf(-0.25);
    let npsi = 24;
    let nphi2 = 4;
    let nrho = (rest / (npsi * nphi2)).max(3);
    for ir in 0..nrho {
        // log|z|² over the whole range, avoiding the cap tips.
        let t = -0.97 * tmax + 1.94 * tmax * (ir as f64 + 0.5) / nrho as f64;
        let eta = s * (t.abs() - t0).max(0.0).powi(4);
        let h = beta * t;
        let rad = (1.0 - eta).sqrt();
        let mz = (0.5 * t).exp();
        for ip in 0..nphi2 {
            let ph = 2.0 * PI * ip as f64 / nphi2 as f64;
            for k in 0..npsi {
                let psi = h + 2.0 * PI * (k as f64 + 0.5) / npsi as f64;
                pts.push(vec![
                    mz * ph.cos(),
                    mz * ph.sin(),
                    h.cos() + rad * psi.cos(),
                    h.sin() + rad * psi.sin(),
                ]);
            }
        }
    }
    pts
}

/// [`worm_param`] for a worm-shaped function, empty otherwise.
pub fn worm_param_of(f: &DefiningFunction, count: usize) -> Vec<Vec<f64>> {
    match &f.shape {
        Shape::Worm { beta, t0, s } => worm_param(*beta, *t0, *s, count),
        _ => vec![],
    }
}

/// `(radii, angles)` for an isotropic log-polar grid with about `target`
/// points over a log-width `l`.
pub fn worm_annulus_grid(l: f64, target: usize) -> (usize, usize) {
    let nphi_of = |nr: usize| ((2.0 * PI * (nr - 1) as f64 / l).round() as usize).max(8);
    let mut nr = 3;
    while (nr + 1) * nphi_of(nr + 1) <= target {
        nr += 1;
    }
    (nr, nphi_of(nr))
}

/// Points `(e^{ρ+iφ}, 0)` on a log-polar grid.
pub fn annulus_points(rho1: f64, rho2: f64, nr: usize, nphi: usize) -> Vec<Vec<f64>> {
    let mut pts = Vec::with_capacity(nr * nphi);
    for ir in 0..nr {
        let rho = rho1 + (rho2 - rho1) * ir as f64 / (nr - 1).max(1) as f64;
        for ip in 0..nphi {
            let ph = 2.0 * PI * ip as f64 / nphi as f64;
            let m = rho.exp();
            pts.push(vec![m * ph.cos(), m * ph.sin(), 0.0, 0.0]);
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_projection() {
        let f = DefiningFunction::ball(2);
        let bp = project_to_boundary(&f, &[2.0, 0.0, 0.0, 0.0], BOUNDARY_TOL).unwrap();
        assert!((bp.real()[0] - 1.0).abs() < 1e-10);
        assert!((calc::cdot(&bp.n_vec, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).re - 1.0).abs() < 1e-10);
        assert!((bp.dr.apply(&bp.n_vec) - 1.0).norm() < 1e-12);
        assert_eq!(bp.frame.len(), 1);
        assert!((bp.frame[0][1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quartic_projection() {
        let f = DefiningFunction::quartic();
        let bp = project_to_boundary(&f, &[0.0, 0.0, 2.0, 0.0], BOUNDARY_TOL).unwrap();
        assert!((bp.real()[2] - 1.0).abs() < 1e-10);
        assert!((bp.frame[0][0].norm() - 1.0).abs() < 1e-12);
        let l = levi_form(&bp);
        assert!(l.get(0, 0).norm() < 1e-12);
    }

    #[test]
    fn grid_sample_on_ball() {
        let f = DefiningFunction::ball(2);
        let s = sample_boundary(&f, Strategy::Grid, 100, 0);
        assert_eq!(s.points.len(), 100);
        assert!(s.points.iter().all(|b| b.residual <= 1e-10 && b.frame_defect() < 1e-9));
    }

    #[test]
    fn grid_size_is_isotropic() {
        let (nr, nphi) = worm_annulus_grid(1.0, 6600);
        let dphi = 2.0 * PI / nphi as f64;
        let drho = 1.0 / (nr - 1) as f64;
        assert!((dphi / drho - 1.0).abs() < 0.05, "{nr} {nphi}");
        assert!(nr * nphi <= 6700);
    }
}
