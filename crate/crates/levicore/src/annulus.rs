//! The norm of the class of `d^c h`, `h = β log|z|²`, on an annulus, by
//! reduction to radial gauges `f(ρ)`, `ρ = log|z|`.
//!
//! On the annulus the null fiber is spanned by `∂z` and, for `α = d^c h + df`
//! with radial `f`, the pointwise condition `ᾱ∧α ≤ λ ∂̄α` reads
//! `4β² + f′² ≤ −λ f″` (both sides carry the same factor `1/(8|z|²)`).
//! The oracle discretizes `ρ` into `m` cells with slopes `u0..um` at the
//! faces and imposes, cell by cell with `a, b` the adjacent slopes,
//! `4β² + ab ≤ λ(a − b)/δρ` and `4β² + ab > 0`. Writing `u = 2β tan θ`
//! shows the infimum of feasible `λ` is `2β δρ / tan(π/m)`, which tends to
//! `2βL/π` with `L = log(r2/r1)`.

use crate::optim;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnulusError {
    #[error("radii must satisfy 0 < r1 < r2, got ({r1}, {r2})")]
    Radii { r1: f64, r2: f64 },
    #[error("mesh size must be at least 16, got {0}")]
    Mesh(usize),
    #[error("winding must be finite and non-negative, got {0}")]
    Winding(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnnulusProblem {
    pub r1: f64,
    pub r2: f64,
    pub beta: f64,
    pub m: usize,
}

impl AnnulusProblem {
    pub fn new(r1: f64, r2: f64, beta: f64, m: usize) -> Result<Self, AnnulusError> {
        if !(r1 > 0.0 && r2 > r1 && r2.is_finite()) {
            return Err(AnnulusError::Radii { r1, r2 });
        }
        if m < 16 {
            return Err(AnnulusError::Mesh(m));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(AnnulusError::Winding(beta));
        }
        Ok(Self { r1, r2, beta, m })
    }

    /// The annulus `|log|z|| ≤ t0/2` carried by the worm domain.
    pub fn worm(beta: f64, t0: f64, m: usize) -> Result<Self, AnnulusError> {
        Self::new((-0.5 * t0).exp(), (0.5 * t0).exp(), beta, m)
    }

    /// `log(r2/r1)`.
    pub fn width(&self) -> f64 {
        (self.r2 / self.r1).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleResult {
    #[serde(with = "crate::extreal")]
    pub value: f64,
    pub m: usize,
    /// Final bisection bracket `[infeasible, feasible]`.
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Upper end of the bracket search; beyond it the problem is reported as
/// infeasible.
pub const LAMBDA_MAX: f64 = 1e9;

/// Whether the discrete cell constraints admit slopes for this `λ`.
///
/// Sweeps left to right keeping the open interval of slopes reachable at
/// each face. For `a > −k` (`k = λ/δρ`) the first constraint is
/// `b ≤ (ka − 4β²)/(a + k)`, increasing in `a`; the second is
/// `b > −4β²/a` for `a > 0` and void for `a ≤ 0`.
pub fn oracle_feasible(prob: &AnnulusProblem, lambda: f64) -> bool {
    let c = 4.0 * prob.beta * prob.beta;
    let k = lambda * prob.m as f64 / prob.width();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..prob.m {
        let lo_valid = lo.max(-k);
        if hi <= -k || lo_valid >= hi {
            return false;
        }
        let next_hi = if hi.is_infinite() { k } else { (k * hi - c) / (hi + k) };
        let next_lo = if lo_valid <= 0.0 { f64::NEG_INFINITY } else { -c / lo_valid };
        lo = next_lo;
        hi = next_hi;
        if lo >= hi {
            return false;
        }
    }
    true
}

/// Bisection on `λ` for the discrete radial problem.
pub fn annulus_norm_oracle(prob: &AnnulusProblem) -> OracleResult {
    if prob.beta == 0.0 {
        return OracleResult { value: 0.0, m: prob.m, bracket: (0.0, 0.0), iterations: 0 };
    }
    let mut hi = 1.0;
    while !oracle_feasible(prob, hi) {
        hi *= 2.0;
        if hi > LAMBDA_MAX {
            return OracleResult { value: f64::INFINITY, m: prob.m, bracket: (LAMBDA_MAX, f64::INFINITY), iterations: 0 };
        }
    }
    let mut iterations = 0;
    let (lo, hi) = optim::bisect_monotone(
        |t| {
            iterations += 1;
            oracle_feasible(prob, t)
        },
        0.0,
        hi,
        1e-13,
        200,
    );
    OracleResult { value: hi, m: prob.m, bracket: (lo, hi), iterations }
}

/// Oracle values for several mesh sizes.
pub fn oracle_convergence(prob: &AnnulusProblem, meshes: &[usize]) -> Vec<OracleResult> {
    meshes
        .iter()
        .map(|&m| annulus_norm_oracle(&AnnulusProblem { m, ..prob.clone() }))
        .collect()
}

/// `2βL/π`, the mesh limit of the oracle.
pub fn continuum_value(prob: &AnnulusProblem) -> f64 {
    2.0 * prob.beta * prob.width() / std::f64::consts::PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AppendixNorms {
    pub degree: usize,
    pub parameters: usize,
    /// Mean of `|h − Re F|` over the annulus, minimized over `F`.
    pub n_l1: f64,
    /// Sup of `|h − Re F|`, minimized over `F`.
    pub n_linf: f64,
    pub n_a: f64,
    /// `n_l1² / (n_a · n_linf)`; report only.
    #[serde(with = "crate::extreal")]
    pub ratio: f64,
    pub coefficients_l1: Vec<f64>,
    pub coefficients_linf: Vec<f64>,
    pub evaluations: usize,
}

/// Quadrature nodes on the annulus with area weights summing to one.
struct Quadrature {
    r: Vec<f64>,
    theta: Vec<f64>,
    w: Vec<f64>,
}

fn quadrature(prob: &AnnulusProblem, nr: usize, nt: usize) -> Quadrature {
    let (mut r, mut theta, mut w) = (vec![], vec![], vec![]);
    let dr = (prob.r2 - prob.r1) / nr as f64;
    for i in 0..nr {
        let ri = prob.r1 + (i as f64 + 0.5) * dr;
        for j in 0..nt {
            r.push(ri);
            theta.push(2.0 * std::f64::consts::PI * j as f64 / nt as f64);
            w.push(ri);
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Quadrature { r, theta, w }
}

/// Values of `Re(c z^k)` for the real parameters of `c`, ordered as the
/// constant, then `(Re c, Im c)` for `k = 1, −1, 2, −2, …, d, −d`.
fn laurent_columns(q: &Quadrature, d: usize) -> Vec<Vec<f64>> {
    let mut cols = vec![vec![1.0; q.r.len()]];
    for k in 1..=d as i32 {
        for s in [k, -k] {
            let s = s as f64;
            cols.push(q.r.iter().zip(&q.theta).map(|(r, t)| r.powf(s) * (s * t).cos()).collect());
            cols.push(q.r.iter().zip(&q.theta).map(|(r, t)| -r.powf(s) * (s * t).sin()).collect());
        }
    }
    cols
}

/// `(mean, sup)` of `|h − Re F|` for one candidate.
fn residual_stats(h: &[f64], cols: &[Vec<f64>], w: &[f64], c: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut sup: f64 = 0.0;
    for i in 0..h.len() {
        let mut f = 0.0;
        for (col, ck) in cols.iter().zip(c) {
            f += ck * col[i];
        }
        let e = (h[i] - f).abs();
        mean += w[i] * e;
        sup = sup.max(e);
    }
    (mean, sup)
}

/// `(mean, sup)` of `|h − Re F|` at given coefficients, for checks.
pub fn appendix_residuals(prob: &AnnulusProblem, degree: usize, coeffs: &[f64]) -> (f64, f64) {
    let q = quadrature(prob, 48, 96);
    let cols = laurent_columns(&q, degree);
    let h: Vec<f64> = q.r.iter().map(|r| -prob.beta * (r * r).ln()).collect();
    residual_stats(&h, &cols, &q.w, coeffs)
}

/// Minimizes the mean and the sup of `|h − Re F|`, `h = −β log|z|²`, over
/// Laurent polynomials `F` of degree at most `d`, by multi-start simplex
/// search.
pub fn appendix_norms(prob: &AnnulusProblem, degree: usize, n_a: f64, starts: usize, evals: usize, seed: u64) -> AppendixNorms {
    let q = quadrature(prob, 48, 96);
    let cols = laurent_columns(&q, degree);
    let p = cols.len();
    let h: Vec<f64> = q.r.iter().map(|r| -prob.beta * (r * r).ln()).collect();
    let mut total = 0;
    let mut run = |pick: fn((f64, f64)) -> f64| -> Vec<f64> {
        let mut best: Option<optim::SimplexResult> = None;
        for s in 0..starts.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
            let x0: Vec<f64> = if s == 0 {
                vec![0.0; p]
            } else {
                (0..p).map(|_| 0.1 * prob.beta * rng.random_range(-1.0..1.0)).collect()
            };
            let step = 0.1 * prob.beta.max(1e-3);
            let r = optim::nelder_mead(|c| pick(residual_stats(&h, &cols, &q.w, c)), &x0, step, evals, 1e-12);
            total += r.evaluations;
            if best.as_ref().is_none_or(|b| r.f < b.f) {
                best = Some(r);
            }
        }
        best.map(|b| b.x).unwrap_or_default()
    };
    let c1 = run(|s| s.0);
    let cinf = run(|s| s.1);
    let (m1, _) = residual_stats(&h, &cols, &q.w, &c1);
    let (m_at_inf, s_inf) = residual_stats(&h, &cols, &q.w, &cinf);
    // The sup minimizer is also a candidate for the mean.
    let (n_l1, c1) = if m_at_inf < m1 { (m_at_inf, cinf.clone()) } else { (m1, c1) };
    let ratio = if n_a > 0.0 && s_inf > 0.0 { n_l1 * n_l1 / (n_a * s_inf) } else if n_l1 == 0.0 { 0.0 } else { f64::INFINITY };
    AppendixNorms {
        degree,
        parameters: p,
        n_l1,
        n_linf: s_inf,
        n_a,
        ratio,
        coefficients_l1: c1,
        coefficients_linf: cinf,
        evaluations: total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_matches_sweep() {
        for (beta, t0, m) in [(1.0, 1.0, 64), (0.5, 2.0, 32), (1.0, 1.0, 128)] {
            let prob = AnnulusProblem::worm(beta, t0, m).unwrap();
            let h = prob.width() / m as f64;
            let exact = 2.0 * beta * h / (std::f64::consts::PI / m as f64).tan();
            let got = annulus_norm_oracle(&prob).value;
            assert!((got - exact).abs() < 1e-10 * exact, "{got} vs {exact}");
        }
    }

    #[test]
    fn zero_winding() {
        let prob = AnnulusProblem::worm(0.0, 1.0, 64).unwrap();
        assert_eq!(annulus_norm_oracle(&prob).value, 0.0);
        let a = appendix_norms(&prob, 2, 0.0, 1, 200, 1);
        assert_eq!((a.n_l1, a.n_linf), (0.0, 0.0));
    }

    #[test]
    fn invalid_problems() {
        assert!(AnnulusProblem::new(1.0, 0.5, 1.0, 64).is_err());
        assert!(AnnulusProblem::new(0.5, 1.0, 1.0, 8).is_err());
    }
}
