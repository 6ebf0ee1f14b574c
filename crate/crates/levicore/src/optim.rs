//! Nelder–Mead simplex search and a limited-memory BFGS minimizer.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "camelCase")]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
}

/// Minimizes `f` from `x0` with an initial simplex of edge `step`, using the
/// dimension-adapted coefficients of Gao and Han.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, max_evals: usize, ftol: f64) -> SimplexResult {
    nelder_mead_to(f, x0, step, max_evals, ftol, f64::NEG_INFINITY)
}

/// [`nelder_mead`] that also stops once a value `≤ target` is seen.
pub fn nelder_mead_to<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
    target: f64,
) -> SimplexResult {
    let n = x0.len();
    let mut evals = 0;
    let mut call = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let v = call(x0, &mut evals);
        return SimplexResult { x: vec![], f: v, evaluations: evals };
    }
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = call(x0, &mut evals);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = call(&x, &mut evals);
        simplex.push((x, v));
    }
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        if best <= target {
            break;
        }
        let worst = simplex[n].1;
        let flat = best.is_finite() && (worst - best).abs() <= ftol * (best.abs() + 1e-300);
        if flat && diameter(&simplex) <= 1e-9 * (1.0 + norm(&simplex[0].0)) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(alpha);
        let fr = call(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(gamma);
            let fe = call(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let x = along(alpha * rho);
            let v = call(&x, &mut evals);
            (x, v)
        } else {
            let x = along(-rho);
            let v = call(&x, &mut evals);
            (x, v)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x0b = simplex[0].0.clone();
        for s in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = x0b.iter().zip(&s.0).map(|(b, v)| b + sigma * (v - b)).collect();
            let v = call(&x, &mut evals);
            *s = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    SimplexResult { x, f, evaluations: evals }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let x0 = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(x, _)| x.iter().zip(x0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// Limited-memory BFGS with backtracking line search. `fg` returns the
/// value and gradient; `stop` is checked at every accepted iterate.
pub fn lbfgs<F, S>(mut fg: F, x0: &[f64], max_iter: usize, mut stop: S) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
    S: FnMut(&[f64], f64) -> bool,
{
    const MEM: usize = 8;
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = fg(&x);
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    for _ in 0..max_iter {
        if stop(&x, fx) {
            break;
        }
        let gnorm = dot(&g, &g).sqrt();
        if gnorm < 1e-14 || !fx.is_finite() {
            break;
        }
        // Two-loop recursion.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, r) in hist.iter().rev() {
            let a = r * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            q.iter_mut().for_each(|v| *v /= gnorm.max(1.0));
        }
        for ((s, y, r), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = r * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
            hist.clear();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let (fnew, gnew) = fg(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * t * slope {
                accepted = Some((xn, fnew, gnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            hist.push((s, y, 1.0 / sy));
            if hist.len() > MEM {
                hist.remove(0);
            }
        }
        let done = (fx - fnew).abs() <= 1e-15 * fx.abs().max(1e-300);
        x = xn;
        fx = fnew;
        g = gnew;
        if done && n > 0 {
            break;
        }
    }
    (x, fx)
}

/// Smallest `t` in `[lo, hi]` (to relative resolution `rtol`) with
/// `feasible(t)`, given that `feasible(hi)` holds and feasibility is
/// monotone. Returns the final bracket.
pub fn bisect_monotone<F: FnMut(f64) -> bool>(mut feasible: F, mut lo: f64, mut hi: f64, rtol: f64, max_iter: usize) -> (f64, f64) {
    for _ in 0..max_iter {
        if hi - lo <= rtol * hi.abs() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_finds_rosenbrock_minimum() {
        let r = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            0.5,
            4000,
            1e-14,
        );
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn simplex_handles_nonsmooth_max() {
        let r = nelder_mead(|x| (x[0] - 1.0).abs().max((x[1] + 2.0).abs()), &[0.0, 0.0], 1.0, 3000, 1e-12);
        assert!(r.f < 1e-5, "{r:?}");
    }

    #[test]
    fn lbfgs_quadratic() {
        let (x, f) = lbfgs(
            |x| {
                let f = (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2);
                (f, vec![2.0 * (x[0] - 3.0), 20.0 * (x[1] + 1.0)])
            },
            &[0.0, 0.0],
            200,
            |_, _| false,
        );
        assert!(f < 1e-16 && (x[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn bisection_bracket() {
        let (lo, hi) = bisect_monotone(|t| t >= 0.3, 0.0, 1.0, 1e-9, 100);
        assert!(lo < 0.3 && hi >= 0.3 && hi - lo < 1e-8);
    }
}
