//! Dense Hermitian forms on small frames.

use super::{CalcError, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// A k×k conjugate-symmetric matrix, row-major, acting as `x ↦ x* H x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitianForm {
    pub dim: usize,
    pub entries: Vec<C64>,
}

impl HermitianForm {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut h = Self::zeros(dim);
        for i in 0..dim {
            h.set(i, i, C64::new(1.0, 0.0));
        }
        h
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let dim = rows.len();
        let mut h = Self { dim, entries: rows.concat() };
        h.symmetrize();
        h
    }

    /// Diagonal form with real entries.
    pub fn diag(d: &[f64]) -> Self {
        let mut h = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            h.set(i, i, C64::new(*v, 0.0));
        }
        h
    }

    /// `½ v̄ vᵀ`: the form `x ↦ ½|Σ vj xj|²`.
    pub fn half_rank_one(v: &[C64]) -> Self {
        let k = v.len();
        let mut h = Self::zeros(k);
        for a in 0..k {
            for b in 0..k {
                h.set(a, b, 0.5 * v[a].conj() * v[b]);
            }
        }
        h
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.entries[i * self.dim + j] = v;
    }

    /// Largest entrywise deviation from conjugate symmetry.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `H ← (H + H*)/2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.dim {
            let d = self.get(i, i);
            self.set(i, i, C64::new(d.re, 0.0));
            for j in (i + 1)..self.dim {
                let m = 0.5 * (self.get(i, j) + self.get(j, i).conj());
                self.set(i, j, m);
                self.set(j, i, m.conj());
            }
        }
    }

    /// `w* H z`.
    pub fn pair(&self, z: &[C64], w: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..self.dim {
            let row: C64 = (0..self.dim).map(|b| self.get(a, b) * z[b]).sum();
            acc += w[a].conj() * row;
        }
        acc
    }

    /// `x* H x`.
    pub fn quad(&self, x: &[C64]) -> f64 {
        self.pair(x, x).re
    }

    /// `F* H F` for frame vectors given as the columns `frame[c]`.
    pub fn restrict(&self, frame: &[Vec<C64>]) -> Self {
        let k = frame.len();
        let mut out = Self::zeros(k);
        for a in 0..k {
            for b in 0..k {
                out.set(a, b, self.pair(&frame[b], &frame[a]));
            }
        }
        out.symmetrize();
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&o.entries).map(|(a, b)| a + b).collect(),
        }
    }

    /// Frobenius distance.
    pub fn dist(&self, o: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&o.entries)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        let e = eig_herm(self);
        e.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }
}

/// Ascending eigenvalues with orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct Eig {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
}

impl Eig {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

pub fn eig_herm(h: &HermitianForm) -> Eig {
    match h.dim {
        0 => Eig { values: vec![], vectors: vec![] },
        1 => Eig { values: vec![h.get(0, 0).re], vectors: vec![vec![C64::new(1.0, 0.0)]] },
        _ => {
            let mut m = h.clone();
            m.symmetrize();
            let se = m.to_matrix().symmetric_eigen();
            let mut idx: Vec<usize> = (0..h.dim).collect();
            idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
            Eig {
                values: idx.iter().map(|&i| se.eigenvalues[i]).collect(),
                vectors: idx
                    .iter()
                    .map(|&i| se.eigenvectors.column(i).iter().copied().collect())
                    .collect(),
            }
        }
    }
}

pub const KERNEL_FLOOR: f64 = 1e-12;

/// Orthonormal basis of the numerical kernel of a semidefinite form.
///
/// Eigenvalues up to `rel_tol · max(λmax, scale)` count as zero; a form
/// whose size is below [`KERNEL_FLOOR`] is zero and its kernel is the whole
/// space. Pass `scale = 0` for a purely self-relative threshold.
pub fn kernel_basis(
    h: &HermitianForm,
    rel_tol: f64,
    scale: f64,
) -> Result<Vec<Vec<C64>>, CalcError> {
    let e = eig_herm(h);
    let size = e.max().max(0.0).max(scale);
    if size <= KERNEL_FLOOR {
        return Ok(e.vectors);
    }
    let thr = (rel_tol * size).max(KERNEL_FLOOR);
    if e.min() < -thr {
        return Err(CalcError::NotSemidefinite { min: e.min(), threshold: thr });
    }
    Ok(e.values
        .iter()
        .zip(e.vectors)
        .filter(|(v, _)| **v <= thr)
        .map(|(_, x)| x)
        .collect())
}

/// Null space of a real symmetric (possibly indefinite) matrix, row-major.
pub fn sym_null_space(m: &[f64], dim: usize, rel_tol: f64) -> Vec<Vec<f64>> {
    let se = DMatrix::from_row_slice(dim, dim, m).symmetric_eigen();
    let size = se.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let thr = (rel_tol * size).max(KERNEL_FLOOR);
    (0..dim)
        .filter(|&i| se.eigenvalues[i].abs() <= thr)
        .map(|i| se.eigenvectors.column(i).iter().copied().collect())
        .collect()
}

/// Tolerances for [`sup_ratio`]: a quantity is numerically zero when it
/// is at most `max(rel · scale, abs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioTol {
    pub rel: f64,
    pub abs: f64,
}

impl Default for RatioTol {
    fn default() -> Self {
        Self { rel: 1e-9, abs: 1e-8 }
    }
}

/// `inf{t > 0 : A ≤ tB}` for `A ⪰ 0`, possibly `+∞`.
pub fn sup_ratio(a: &HermitianForm, b: &HermitianForm, tol: RatioTol) -> Result<f64, CalcError> {
    if a.dim == 1 {
        return scalar_ratio(a.get(0, 0).re, b.get(0, 0).re, tol);
    }
    let eb = eig_herm(b);
    let thr_b = (tol.rel * eb.max().max(0.0)).max(tol.abs);
    if eb.min() < -thr_b {
        return Err(CalcError::InvalidForm { min: eb.min(), threshold: thr_b });
    }
    let ea_max = eig_herm(a).max().max(0.0);
    let thr_a = (tol.rel * ea_max).max(tol.abs);
    let (kern, range): (Vec<usize>, Vec<usize>) =
        (0..b.dim).partition(|&i| eb.values[i] <= thr_b);
    if !kern.is_empty() {
        let kv: Vec<Vec<C64>> = kern.iter().map(|&i| eb.vectors[i].clone()).collect();
        if eig_herm(&a.restrict(&kv)).max() > thr_a {
            return Ok(f64::INFINITY);
        }
    }
    if range.is_empty() {
        return Ok(0.0);
    }
    let scaled: Vec<Vec<C64>> = range
        .iter()
        .map(|&i| eb.vectors[i].iter().map(|v| v / eb.values[i].sqrt()).collect())
        .collect();
    Ok(eig_herm(&a.restrict(&scaled)).max().max(0.0))
}

/// [`sup_ratio`] for 1×1 forms given by their entries.
pub fn scalar_ratio(a: f64, b: f64, tol: RatioTol) -> Result<f64, CalcError> {
    let thr_b = (tol.rel * b.max(0.0)).max(tol.abs);
    if b < -thr_b {
        return Err(CalcError::InvalidForm { min: b, threshold: thr_b });
    }
    let thr_a = (tol.rel * a.max(0.0)).max(tol.abs);
    if b <= thr_b {
        return Ok(if a > thr_a { f64::INFINITY } else { 0.0 });
    }
    Ok(a.max(0.0) / b)
}

/// Modified Gram–Schmidt (two passes), dropping vectors whose residual
/// norm falls below `tol`.
pub fn orthonormalize(vs: &[Vec<C64>], tol: f64) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = super::cdot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let n = super::cnorm(&w);
        if n > tol {
            out.push(w.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Principal angles between span(`f`) and span(`t`), both orthonormal sets
/// in the same ℂ^d. Returns one `(angle, coefficients)` pair per vector of
/// `f`, ascending by angle; the coefficient vectors are orthonormal and give
/// the principal directions as combinations of `f` (see [`combine`]).
pub fn principal_angles(f: &[Vec<C64>], t: &[Vec<C64>]) -> Vec<(f64, Vec<C64>)> {
    let k = f.len();
    if k == 0 {
        return vec![];
    }
    // G = F* P_T F, with P_T the orthogonal projector onto span t.
    let coeffs: Vec<Vec<C64>> =
        f.iter().map(|fv| t.iter().map(|tv| super::cdot(fv, tv)).collect()).collect();
    let mut g = HermitianForm::zeros(k);
    for a in 0..k {
        for b in 0..k {
            let s: C64 = coeffs[a].iter().zip(&coeffs[b]).map(|(x, y)| x.conj() * y).sum();
            g.set(a, b, s);
        }
    }
    let e = eig_herm(&g);
    let mut out: Vec<(f64, Vec<C64>)> = e
        .values
        .iter()
        .zip(e.vectors)
        .map(|(&c2, v)| (c2.clamp(0.0, 1.0).sqrt().acos(), v))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// `Σ c_i basis_i`.
pub fn combine(coeffs: &[C64], basis: &[Vec<C64>]) -> Vec<C64> {
    let d = basis.first().map_or(0, |b| b.len());
    let mut out = vec![C64::new(0.0, 0.0); d];
    for (c, b) in coeffs.iter().zip(basis) {
        for (o, x) in out.iter_mut().zip(b) {
            *o += c * x;
        }
    }
    out
}
