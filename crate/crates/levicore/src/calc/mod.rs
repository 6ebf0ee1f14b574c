//! Complex differential calculus and small Hermitian linear algebra.
//!
//! Points of ℂⁿ are handled in real coordinates `(x1, y1, …, xn, yn)`.
//! Complex derivatives use the Wirtinger operators
//! `∂/∂zj = ½(∂/∂xj − i∂/∂yj)` and `∂/∂z̄j = ½(∂/∂xj + i∂/∂yj)`.
//!
//! Two-forms are evaluated with the wedge convention
//! `(β∧γ)(Z,W̄) = ½(β(Z)γ(W̄) − β(W̄)γ(Z))`. Under it
//! `∂∂̄f(Z,W̄) = ½ Σ f_{jk̄} Zj W̄k`; the [`HermitianForm`] returned by
//! [`hess_mixed`] stores the coefficients `f_{jk̄}` without the ½.

pub mod dual;
mod herm;

pub use dual::{HyperDual, Scalar};
pub use herm::{
    combine, eig_herm, kernel_basis, orthonormalize, principal_angles, scalar_ratio, sup_ratio, sym_null_space, Eig,
    HermitianForm, RatioTol,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalcError {
    #[error("non-finite evaluation at {point:?}")]
    Evaluation { point: Vec<f64> },
    #[error("form is not semidefinite: eigenvalue {min} below -{threshold}")]
    NotSemidefinite { min: f64, threshold: f64 },
    #[error("invalid form: eigenvalue {min} below -{threshold}")]
    InvalidForm { min: f64, threshold: f64 },
}

/// A point of ℂⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint(pub Vec<C64>);

impl ComplexPoint {
    pub fn from_real(x: &[f64]) -> Self {
        Self(x.chunks(2).map(|c| C64::new(c[0], c[1])).collect())
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.0.iter().flat_map(|z| [z.re, z.im]).collect()
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }
}

/// The functional `Z ↦ Σ cj Zj` on (1,0) vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covector10(pub Vec<C64>);

impl Covector10 {
    pub fn apply(&self, z: &[C64]) -> C64 {
        self.0.iter().zip(z).map(|(c, z)| c * z).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// A smooth real function on ℂⁿ, generic over the scalar type so that one
/// definition serves plain evaluation and automatic differentiation.
pub trait Smooth {
    /// Complex dimension n.
    fn n(&self) -> usize;
    /// Value at real coordinates `(x1, y1, …)`.
    fn eval<S: Scalar>(&self, x: &[S]) -> S;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum Backend {
    #[default]
    Dual,
    FiniteDiff,
}

/// Value, real gradient and real Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Row-major 2n×2n.
    pub hess: Vec<f64>,
}

impl Jet2 {
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// `(∂f/∂z1, …, ∂f/∂zn)`.
    pub fn dz(&self) -> Covector10 {
        Covector10(
            self.grad
                .chunks(2)
                .map(|g| C64::new(0.5 * g[0], -0.5 * g[1]))
                .collect(),
        )
    }

    /// Coefficient `f_{jk̄} = ∂²f/∂zj∂z̄k`.
    pub fn mixed(&self, j: usize, k: usize) -> C64 {
        let m = self.dim();
        let h = |a: usize, b: usize| self.hess[a * m + b];
        let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
        C64::new(
            0.25 * (h(xj, xk) + h(yj, yk)),
            0.25 * (h(xj, yk) - h(yj, xk)),
        )
    }

    /// Hermitian form with `x* H x = Σ f_{jk̄} xj x̄k`; entry `(a, b)` is
    /// `f_{b ā}`.
    pub fn levi_matrix(&self) -> HermitianForm {
        let n = self.dim() / 2;
        let mut h = HermitianForm::zeros(n);
        for a in 0..n {
            for b in 0..n {
                h.set(a, b, self.mixed(b, a));
            }
        }
        h.symmetrize();
        h
    }
}

fn check_finite(vals: &[f64], x: &[f64]) -> Result<(), CalcError> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CalcError::Evaluation { point: x.to_vec() })
    }
}

/// Plain evaluation with a finiteness check.
pub fn value<F: Smooth + ?Sized>(f: &F, x: &[f64]) -> Result<f64, CalcError> {
    let v = f.eval(x);
    check_finite(&[v], x)?;
    Ok(v)
}

/// Gradient only, by first-order hyper-dual seeding.
pub fn grad_real<F: Smooth + ?Sized>(f: &F, x: &[f64]) -> Result<(f64, Vec<f64>), CalcError> {
    let m = x.len();
    let mut g = vec![0.0; m];
    let mut v = 0.0;
    let mut buf: Vec<HyperDual> = x.iter().map(|&t| HyperDual::cst(t)).collect();
    for a in 0..m {
        buf[a] = HyperDual::var(x[a], 1.0, 0.0);
        let r = f.eval(&buf);
        buf[a] = HyperDual::cst(x[a]);
        g[a] = r.e1;
        v = r.v;
    }
    check_finite(&g, x)?;
    check_finite(&[v], x)?;
    Ok((v, g))
}

/// Second-order jet by the chosen backend.
pub fn jet2<F: Smooth + ?Sized>(f: &F, x: &[f64], backend: Backend) -> Result<Jet2, CalcError> {
    let jet = match backend {
        Backend::Dual => jet2_dual(f, x),
        Backend::FiniteDiff => jet2_fd(f, x),
    };
    check_finite(&[jet.value], x)?;
    check_finite(&jet.grad, x)?;
    check_finite(&jet.hess, x)?;
    Ok(jet)
}

fn jet2_dual<F: Smooth + ?Sized>(f: &F, x: &[f64]) -> Jet2 {
    let m = x.len();
    let mut grad = vec![0.0; m];
    let mut hess = vec![0.0; m * m];
    let mut value = 0.0;
    let mut buf: Vec<HyperDual> = x.iter().map(|&t| HyperDual::cst(t)).collect();
    for a in 0..m {
        for b in a..m {
            buf[a] = HyperDual::var(x[a], 1.0, 0.0);
            if a == b {
                buf[a].e2 = 1.0;
            } else {
                buf[b] = HyperDual::var(x[b], 0.0, 1.0);
            }
            let r = f.eval(&buf);
            buf[a] = HyperDual::cst(x[a]);
            buf[b] = HyperDual::cst(x[b]);
            value = r.v;
            if a == b {
                grad[a] = r.e1;
            }
            hess[a * m + b] = r.e12;
            hess[b * m + a] = r.e12;
        }
    }
    Jet2 { value, grad, hess }
}

/// Step for first-derivative stencils: ε^{1/3}(1+‖p‖).
pub fn fd_step(x: &[f64]) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Step for second-derivative stencils: ε^{1/4}(1+‖p‖).
pub fn fd_step2(x: &[f64]) -> f64 {
    f64::EPSILON.powf(0.25) * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

const D1: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

/// Fourth-order central difference of a vector-valued map along `dir`.
pub fn central_diff<G>(g: G, x: &[f64], dir: &[f64], h: f64) -> Vec<f64>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut acc: Vec<f64> = Vec::new();
    let mut y = x.to_vec();
    for (s, w) in D1 {
        for i in 0..x.len() {
            y[i] = x[i] + s * h * dir[i];
        }
        let v = g(&y);
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        for (a, b) in acc.iter_mut().zip(v) {
            *a += w * b;
        }
    }
    acc.iter_mut().for_each(|a| *a /= 12.0 * h);
    acc
}

fn jet2_fd<F: Smooth + ?Sized>(f: &F, x: &[f64]) -> Jet2 {
    let m = x.len();
    let h1 = fd_step(x);
    let h2 = fd_step2(x);
    let value = f.eval(x);
    let mut y = x.to_vec();
    let at = |y: &mut Vec<f64>, da: (usize, f64), db: Option<(usize, f64)>| {
        y.copy_from_slice(x);
        y[da.0] += da.1;
        if let Some((b, s)) = db {
            y[b] += s;
        }
        f.eval(&y[..])
    };
    let mut grad = vec![0.0; m];
    for a in 0..m {
        grad[a] = D1.iter().map(|&(s, w)| w * at(&mut y, (a, s * h1), None)).sum::<f64>()
            / (12.0 * h1);
    }
    let mut hess = vec![0.0; m * m];
    for a in 0..m {
        let d2 = [(-2.0, -1.0), (-1.0, 16.0), (1.0, 16.0), (2.0, -1.0)]
            .iter()
            .map(|&(s, w)| w * at(&mut y, (a, s * h2), None))
            .sum::<f64>()
            - 30.0 * value;
        hess[a * m + a] = d2 / (12.0 * h2 * h2);
        for b in (a + 1)..m {
            let mut acc = 0.0;
            for (sa, wa) in D1 {
                for (sb, wb) in D1 {
                    acc += wa * wb * at(&mut y, (a, sa * h2), Some((b, sb * h2)));
                }
            }
            let v = acc / (144.0 * h2 * h2);
            hess[a * m + b] = v;
            hess[b * m + a] = v;
        }
    }
    Jet2 { value, grad, hess }
}

/// `∂f` at `p`.
pub fn grad10<F: Smooth + ?Sized>(
    f: &F,
    p: &ComplexPoint,
    backend: Backend,
) -> Result<Covector10, CalcError> {
    let x = p.to_real();
    match backend {
        Backend::Dual => {
            let (_, g) = grad_real(f, &x)?;
            Ok(Jet2 { value: 0.0, grad: g, hess: vec![] }.dz())
        }
        Backend::FiniteDiff => {
            let h = fd_step(&x);
            let mut g = vec![0.0; x.len()];
            for (a, ga) in g.iter_mut().enumerate() {
                let mut e = vec![0.0; x.len()];
                e[a] = 1.0;
                *ga = central_diff(|y| vec![f.eval(y)], &x, &e, h)[0];
            }
            check_finite(&g, &x)?;
            Ok(Jet2 { value: 0.0, grad: g, hess: vec![] }.dz())
        }
    }
}

/// Complex Hessian `(f_{jk̄})` at `p` as a Hermitian form.
pub fn hess_mixed<F: Smooth + ?Sized>(
    f: &F,
    p: &ComplexPoint,
    backend: Backend,
) -> Result<HermitianForm, CalcError> {
    Ok(jet2(f, &p.to_real(), backend)?.levi_matrix())
}

/// Hermitian inner product `⟨a, b⟩ = Σ aj b̄j`.
pub fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn cnorm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// A (1,0) vector as a complex vector in the real coordinate basis
/// `(∂x1, ∂y1, …)`: `∂zj = ½(∂xj − i∂yj)`.
pub fn complexify10(z: &[C64]) -> Vec<C64> {
    z.iter()
        .flat_map(|&c| [0.5 * c, C64::new(0.0, -0.5) * c])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Ball;
    impl Smooth for Ball {
        fn n(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> S {
            x.iter().fold(S::cst(-1.0), |acc, &v| acc + v * v)
        }
    }

    struct Quartic;
    impl Smooth for Quartic {
        fn n(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> S {
            (x[0].sq() + x[1].sq()).sq() + x[2].sq() + x[3].sq() - S::cst(1.0)
        }
    }

    fn pt(v: &[(f64, f64)]) -> ComplexPoint {
        ComplexPoint(v.iter().map(|&(a, b)| C64::new(a, b)).collect())
    }

    #[test]
    fn ball_gradient_is_conjugate_point() {
        let g = grad10(&Ball, &pt(&[(1.0, 0.0), (0.0, 0.0)]), Backend::Dual).unwrap();
        assert!((g.0[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(g.0[1].norm() < 1e-15);
        let p = pt(&[(0.3, -0.4), (0.1, 0.7)]);
        let g = grad10(&Ball, &p, Backend::Dual).unwrap();
        for j in 0..2 {
            assert!((g.0[j] - p.0[j].conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn quartic_gradient_and_hessian() {
        let p = pt(&[(0.0, 0.0), (1.0, 0.0)]);
        let g = grad10(&Quartic, &p, Backend::Dual).unwrap();
        assert!(g.0[0].norm() < 1e-15 && (g.0[1] - 1.0).norm() < 1e-15);
        let th = 0.8f64;
        let h = hess_mixed(&Quartic, &pt(&[(0.0, 0.0), (th.cos(), th.sin())]), Backend::Dual)
            .unwrap();
        assert!(h.get(0, 0).norm() < 1e-15);
        assert!((h.get(1, 1) - 1.0).norm() < 1e-14);
        assert!(h.get(0, 1).norm() < 1e-15);
    }

    #[test]
    fn ball_hessian_is_identity() {
        let h = hess_mixed(&Ball, &pt(&[(0.2, 0.1), (-0.5, 0.3)]), Backend::Dual).unwrap();
        assert!(h.dist(&HermitianForm::identity(2)) < 1e-14);
    }

    #[test]
    fn backends_agree_on_quartic() {
        let p = pt(&[(0.4, -0.3), (0.2, 0.9)]);
        let a = hess_mixed(&Quartic, &p, Backend::Dual).unwrap();
        let b = hess_mixed(&Quartic, &p, Backend::FiniteDiff).unwrap();
        assert!(a.dist(&b) < 1e-7, "{}", a.dist(&b));
        let ga = grad10(&Quartic, &p, Backend::Dual).unwrap();
        let gb = grad10(&Quartic, &p, Backend::FiniteDiff).unwrap();
        assert!(ga.0.iter().zip(&gb.0).all(|(x, y)| (x - y).norm() < 1e-9));
    }

    #[test]
    fn complexify_keeps_norm_ratio() {
        let z = vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0)];
        let w = complexify10(&z);
        assert!((cnorm(&w) * 2f64.sqrt() - cnorm(&z)).abs() < 1e-14);
    }
}
