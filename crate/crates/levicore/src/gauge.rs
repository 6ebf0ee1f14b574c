//! Gauge functions: real functions f given by coefficients over a basis.

use crate::calc::{HyperDual, Jet2, Scalar, Smooth};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "family")]
pub enum GaugeBasis {
    /// Monomials in `Re zj, Im zj` of total degree 1..=degree.
    Polynomial { n: usize, degree: usize },
    /// Functions of `ρ = log|z1|` on an annulus, in the rescaled variable
    /// `s = (ρ − center)/halfWidth`: Chebyshev modes `T1..T_cheb(s)` and, for
    /// each `a` in `layers`, the pair `−log(a² − s²)`, `log((a+s)/(a−s))`.
    Radial { n: usize, center: f64, half_width: f64, cheb: usize, layers: Vec<f64> },
}

impl GaugeBasis {
    pub fn polynomial(n: usize, degree: usize) -> Self {
        Self::Polynomial { n, degree }
    }

    /// The default radial basis on `ρ ∈ [ρ1, ρ2]` (16 members).
    pub fn radial(n: usize, rho1: f64, rho2: f64) -> Self {
        Self::Radial {
            n,
            center: 0.5 * (rho1 + rho2),
            half_width: 0.5 * (rho2 - rho1),
            cheb: 8,
            layers: vec![1.02, 1.04, 1.08, 1.16],
        }
    }

    /// A smaller radial basis on the same annulus (8 members).
    pub fn radial_small(n: usize, rho1: f64, rho2: f64) -> Self {
        Self::Radial {
            n,
            center: 0.5 * (rho1 + rho2),
            half_width: 0.5 * (rho2 - rho1),
            cheb: 4,
            layers: vec![1.04, 1.16],
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Polynomial { n, .. } | Self::Radial { n, .. } => *n,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Polynomial { .. } => self.exponents().len(),
            Self::Radial { cheb, layers, .. } => cheb + 2 * layers.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn id(&self) -> String {
        match self {
            Self::Polynomial { degree, .. } => format!("poly{{degree={degree}}}"),
            Self::Radial { cheb, layers, .. } => {
                format!("radial{{cheb={cheb},layers={layers:?}}}")
            }
        }
    }

    pub fn exponents(&self) -> Vec<Vec<u32>> {
        let Self::Polynomial { n, degree } = self else { return vec![] };
        let vars = 2 * n;
        let mut out = Vec::new();
        for d in 1..=*degree as u32 {
            let mut cur = vec![0u32; vars];
            push_compositions(d, 0, &mut cur, &mut out);
        }
        out
    }

    /// All members at `x`.
    pub fn eval_all<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        match self {
            Self::Polynomial { degree, .. } => {
                let d = *degree;
                let pows: Vec<Vec<S>> = x
                    .iter()
                    .map(|&v| {
                        let mut p = vec![S::cst(1.0)];
                        for k in 1..=d {
                            p.push(p[k - 1] * v);
                        }
                        p
                    })
                    .collect();
                self.exponents()
                    .iter()
                    .map(|e| {
                        e.iter()
                            .enumerate()
                            .fold(S::cst(1.0), |acc, (i, &k)| acc * pows[i][k as usize])
                    })
                    .collect()
            }
            Self::Radial { center, half_width, cheb, layers, .. } => {
                let rho = (x[0] * x[0] + x[1] * x[1]).ln().scale(0.5);
                let s = (rho.add_f(-center)).scale(1.0 / half_width);
                let mut out = Vec::with_capacity(self.len());
                let (mut t0, mut t1) = (S::cst(1.0), s);
                for _ in 0..*cheb {
                    out.push(t1);
                    let t2 = s * t1.scale(2.0) - t0;
                    t0 = t1;
                    t1 = t2;
                }
                for &a in layers {
                    let a = S::cst(a);
                    out.push(-(a * a - s * s).ln());
                    out.push(((a + s) / (a - s)).ln());
                }
                out
            }
        }
    }
}

fn push_compositions(left: u32, i: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if i + 1 == cur.len() {
        cur[i] = left;
        out.push(cur.clone());
        cur[i] = 0;
        return;
    }
    for k in (0..=left).rev() {
        cur[i] = k;
        push_compositions(left - k, i + 1, cur, out);
    }
    cur[i] = 0;
}

impl GaugeBasis {
    /// Second-order jets of every member at `x`, sharing one basis
    /// evaluation per pair of seeded directions.
    pub fn jets(&self, x: &[f64]) -> Vec<Jet2> {
        let m = x.len();
        let count = self.len();
        let mut out: Vec<Jet2> =
            (0..count).map(|_| Jet2 { value: 0.0, grad: vec![0.0; m], hess: vec![0.0; m * m] }).collect();
        let mut buf: Vec<HyperDual> = x.iter().map(|&t| HyperDual::cst(t)).collect();
        for a in 0..m {
            for b in a..m {
                buf[a] = HyperDual::var(x[a], 1.0, 0.0);
                if a == b {
                    buf[a].e2 = 1.0;
                } else {
                    buf[b] = HyperDual::var(x[b], 0.0, 1.0);
                }
                let vals = self.eval_all(&buf);
                buf[a] = HyperDual::cst(x[a]);
                buf[b] = HyperDual::cst(x[b]);
                for (j, v) in out.iter_mut().zip(vals) {
                    j.value = v.v;
                    if a == b {
                        j.grad[a] = v.e1;
                    }
                    j.hess[a * m + b] = v.e12;
                    j.hess[b * m + a] = v.e12;
                }
            }
        }
        out
    }
}

/// `f = Σ cm φm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    pub basis: GaugeBasis,
    pub coeffs: Vec<f64>,
}

impl Gauge {
    pub fn zero(basis: GaugeBasis) -> Self {
        let m = basis.len();
        Self { basis, coeffs: vec![0.0; m] }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }
}

impl Smooth for Gauge {
    fn n(&self) -> usize {
        self.basis.n()
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        self.basis
            .eval_all(x)
            .into_iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .fold(S::cst(0.0), |acc, (p, &c)| acc + p.scale(c))
    }
}

/// A single basis member as a function.
pub struct Member<'a> {
    pub basis: &'a GaugeBasis,
    pub index: usize,
}

impl Smooth for Member<'_> {
    fn n(&self) -> usize {
        self.basis.n()
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        self.basis.eval_all(x)[self.index]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_jets_match_single_members() {
        let basis = GaugeBasis::radial(2, -0.5, 0.5);
        let x = [1.1, 0.3, 0.2, -0.4];
        let all = basis.jets(&x);
        for (i, j) in all.iter().enumerate() {
            let single = crate::calc::jet2(&Member { basis: &basis, index: i }, &x, crate::calc::Backend::Dual).unwrap();
            assert_eq!(j, &single);
        }
    }

    #[test]
    fn polynomial_member_count() {
        // C(4 + 4, 4) − 1 monomials of degree 1..=4 in four variables.
        assert_eq!(GaugeBasis::polynomial(2, 4).len(), 69);
        assert_eq!(GaugeBasis::polynomial(2, 1).len(), 4);
    }

    #[test]
    fn polynomial_degree_one_is_coordinates() {
        let b = GaugeBasis::polynomial(2, 1);
        let v = b.eval_all(&[1.0, 2.0, 3.0, 4.0]);
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        assert_eq!(s, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn radial_members() {
        let b = GaugeBasis::radial(2, -0.5, 0.5);
        assert_eq!(b.len(), 16);
        // |z1| = e^{0.25}: s = 0.5
        let r = 0.25f64.exp();
        let v = b.eval_all(&[r, 0.0, 0.3, 0.1]);
        assert!((v[0] - 0.5).abs() < 1e-14);
        assert!((v[1] - (2.0 * 0.25 - 1.0)).abs() < 1e-14);
        assert!((v[8] + (1.02f64 * 1.02 - 0.25).ln()).abs() < 1e-12);
        assert!((v[9] - (1.52f64 / 0.52).ln()).abs() < 1e-12);
    }
}
