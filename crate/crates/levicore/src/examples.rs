//! Example domains with analytic ground truth, and the planar example of a
//! distribution whose second derived distribution vanishes.

use crate::calc::{self, Smooth, C64};
use crate::distributions::{self, SampledDistribution};
use crate::gauge::GaugeBasis;
use crate::hypersurface::{self, DefiningFunction};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExampleError {
    #[error("unknown domain '{0}' (try `examples list`)")]
    Unknown(String),
    #[error("parameter '{name}' = {value} outside {range}")]
    BadParam { name: String, value: f64, range: String },
    #[error("unknown parameter '{name}' for domain '{domain}'")]
    UnknownParam { domain: String, name: String },
    #[error("capped worm is not a defining function: |∂r| = {norm:e} at {point:?}")]
    Degenerate { point: Vec<f64>, norm: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParamSpec {
    pub name: String,
    pub default: f64,
    pub min: f64,
    pub max: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegistryEntry {
    pub name: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
}

fn spec(name: &str, default: f64, min: f64, max: f64, description: &str) -> ParamSpec {
    ParamSpec { name: name.into(), default, min, max, description: description.into() }
}

/// Registered domains with their parameter schemas.
pub fn registry() -> Vec<RegistryEntry> {
    vec![
        RegistryEntry {
            name: "ball".into(),
            description: "unit ball |z|² < 1 in ℂ²".into(),
            params: vec![],
        },
        RegistryEntry {
            name: "ellipsoid".into(),
            description: "|z1/a1|² + |z2/a2|² < 1".into(),
            params: vec![
                spec("a1", 1.0, 0.05, 20.0, "semi-axis of z1"),
                spec("a2", 2.0, 0.05, 20.0, "semi-axis of z2"),
            ],
        },
        RegistryEntry {
            name: "quartic".into(),
            description: "|z1|⁴ + |z2|² < 1, weakly pseudoconvex on the circle {z1 = 0, |z2| = 1}".into(),
            params: vec![],
        },
        RegistryEntry {
            name: "saddle".into(),
            description: "|z1|² + |z1|⁴ − |z2|² + |z2|⁴ < 1, not pseudoconvex".into(),
            params: vec![],
        },
        RegistryEntry {
            name: "worm".into(),
            description: "|w − exp(iβ log|z|²)|² < 1 − s·max(0, |log|z|²| − t0)⁴".into(),
            params: vec![
                spec("beta", 1.0, 1e-3, 10.0, "winding rate β"),
                spec("t0", 1.0, 0.1, 4.0, "log|z|² half-length of the flat part"),
                spec("s", 1.0, 0.05, 100.0, "cap steepness"),
            ],
        },
    ]
}

/// Known facts about a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Metadata {
    pub pseudoconvex: bool,
    pub weak_locus: String,
    pub null_fiber: String,
    pub core: String,
    pub core_trivial: bool,
    /// Expected stabilization index of the core iteration, if known.
    pub core_k: Option<usize>,
    pub df: Option<f64>,
    pub df_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExampleDomain {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub function: DefiningFunction,
    pub metadata: Metadata,
}

/// Builds a registered domain; missing parameters take their defaults.
pub fn make_domain(name: &str, params: &BTreeMap<String, f64>) -> Result<ExampleDomain, ExampleError> {
    let entry = registry()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| ExampleError::Unknown(name.into()))?;
    for key in params.keys() {
        if !entry.params.iter().any(|p| &p.name == key) {
            return Err(ExampleError::UnknownParam { domain: name.into(), name: key.clone() });
        }
    }
    let mut vals = BTreeMap::new();
    for p in &entry.params {
        let v = params.get(&p.name).copied().unwrap_or(p.default);
        if !(v >= p.min && v <= p.max) {
            return Err(ExampleError::BadParam {
                name: p.name.clone(),
                value: v,
                range: format!("[{}, {}]", p.min, p.max),
            });
        }
        vals.insert(p.name.clone(), v);
    }
    let (function, metadata) = match name {
        "ball" => (
            DefiningFunction::ball(2),
            strongly_pseudoconvex("ball: DF = 1 since the Levi form is positive definite"),
        ),
        "ellipsoid" => (
            DefiningFunction::ellipsoid(&[vals["a1"], vals["a2"]]),
            strongly_pseudoconvex("ellipsoid: DF = 1 since the Levi form is positive definite"),
        ),
        "quartic" => (
            DefiningFunction::quartic(),
            Metadata {
                pseudoconvex: true,
                weak_locus: "circle {z1 = 0, |z2| = 1}".into(),
                null_fiber: "span{∂/∂z1}".into(),
                core: "trivial: the circle has zero holomorphic dimension".into(),
                core_trivial: true,
                core_k: Some(1),
                df: Some(1.0),
                df_source: "trivial core, so the norm of the null distribution is 0".into(),
            },
        ),
        "saddle" => (
            DefiningFunction::saddle(),
            Metadata {
                pseudoconvex: false,
                weak_locus: "Levi form negative near z2 = 0".into(),
                null_fiber: "undefined".into(),
                core: "undefined".into(),
                core_trivial: false,
                core_k: None,
                df: None,
                df_source: "not pseudoconvex".into(),
            },
        ),
        "worm" => {
            let (beta, t0, s) = (vals["beta"], vals["t0"], vals["s"]);
            let f = DefiningFunction::worm(beta, t0, s);
            check_worm(&f)?;
            let n = 2.0 * beta * t0 / PI;
            (
                f,
                Metadata {
                    pseudoconvex: true,
                    weak_locus: format!("annulus {{w = 0, {:.6} ≤ |z| ≤ {:.6}}}", (-0.5 * t0).exp(), (0.5 * t0).exp()),
                    null_fiber: "span{∂/∂z}".into(),
                    core: "the annulus {w = 0} with fiber span{∂/∂z}".into(),
                    core_trivial: false,
                    core_k: Some(1),
                    df: Some(1.0 / (1.0 + n)),
                    df_source: "1/(1 + 2βt0/π), the mesh limit of the radial annulus oracle".into(),
                },
            )
        }
        _ => unreachable!(),
    };
    Ok(ExampleDomain { name: name.into(), params: vals, function, metadata })
}

fn strongly_pseudoconvex(df_source: &str) -> Metadata {
    Metadata {
        pseudoconvex: true,
        weak_locus: "empty".into(),
        null_fiber: "zero".into(),
        core: "trivial (empty null distribution)".into(),
        core_trivial: true,
        core_k: Some(1),
        df: Some(1.0),
        df_source: df_source.into(),
    }
}

/// The capped worm must keep `∂r ≠ 0` on its boundary.
fn check_worm(f: &DefiningFunction) -> Result<(), ExampleError> {
    for x in hypersurface::worm_param_of(f, 4000) {
        let (_, g) = calc::grad_real(f, &x).map_err(|_| ExampleError::Degenerate { point: x.clone(), norm: 0.0 })?;
        let norm = 0.5 * g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-6 {
            return Err(ExampleError::Degenerate { point: x, norm });
        }
    }
    Ok(())
}

impl ExampleDomain {
    fn worm_params(&self) -> Option<(f64, f64, f64)> {
        (self.name == "worm").then(|| (self.params["beta"], self.params["t0"], self.params["s"]))
    }

    /// Distance from `x` to the exact weakly pseudoconvex locus, `None` if
    /// the locus is empty.
    pub fn locus_distance(&self, x: &[f64]) -> Option<f64> {
        match self.name.as_str() {
            "quartic" => {
                let m2 = x[2].hypot(x[3]);
                Some((x[0] * x[0] + x[1] * x[1] + (m2 - 1.0).powi(2)).sqrt())
            }
            "worm" => {
                let (_, t0, _) = self.worm_params()?;
                let rho = x[0].hypot(x[1]).ln();
                let rho_c = rho.clamp(-0.5 * t0, 0.5 * t0);
                let dz = (rho.exp() - rho_c.exp()).abs();
                Some((dz * dz + x[2] * x[2] + x[3] * x[3]).sqrt())
            }
            _ => None,
        }
    }

    /// Evenly spread points on the exact locus.
    pub fn locus_samples(&self, count: usize) -> Vec<Vec<f64>> {
        match self.name.as_str() {
            "quartic" => (0..count)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / count as f64;
                    vec![0.0, 0.0, t.cos(), t.sin()]
                })
                .collect(),
            "worm" => {
                let (_, t0, _) = self.worm_params().unwrap_or_default();
                let (nr, nphi) = hypersurface::worm_annulus_grid(t0, count);
                hypersurface::annulus_points(-0.5 * t0, 0.5 * t0, nr, nphi)
            }
            _ => vec![],
        }
    }

    /// Exact null fiber at a point of the locus.
    pub fn exact_null_fiber(&self, _x: &[f64]) -> Vec<Vec<C64>> {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        match self.name.as_str() {
            "quartic" | "worm" => vec![vec![one, zero]],
            _ => vec![],
        }
    }

    /// Real tangent space of the locus at `x`.
    pub fn exact_tangent(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self.name.as_str() {
            "quartic" => {
                let m = x[2].hypot(x[3]);
                vec![vec![0.0, 0.0, -x[3] / m, x[2] / m]]
            }
            "worm" => vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]],
            _ => vec![],
        }
    }

    /// Coordinate patch used for the null distribution, its core and the
    /// norm. For the worm it excludes the caps.
    pub fn in_patch(&self, x: &[f64]) -> bool {
        match self.worm_params() {
            Some((_, t0, _)) => (x[0] * x[0] + x[1] * x[1]).ln().abs() <= t0 + 1e-9,
            None => true,
        }
    }

    /// Gauge basis used for the norm: radial on the worm annulus,
    /// polynomials of degree `degree` elsewhere.
    pub fn gauge_basis(&self, degree: usize) -> GaugeBasis {
        match self.worm_params() {
            Some((_, t0, _)) => GaugeBasis::radial(2, -0.5 * t0, 0.5 * t0),
            None => GaugeBasis::polynomial(self.function.n(), degree),
        }
    }

    /// A smaller basis of the same family.
    pub fn small_gauge_basis(&self, degree: usize) -> GaugeBasis {
        match self.worm_params() {
            Some((_, t0, _)) => GaugeBasis::radial_small(2, -0.5 * t0, 0.5 * t0),
            None => GaugeBasis::polynomial(self.function.n(), degree.saturating_sub(2).max(1)),
        }
    }

    /// The annulus carried by the worm, for the radial oracle.
    pub fn annulus(&self, m: usize) -> Option<crate::annulus::AnnulusProblem> {
        let (beta, t0, _) = self.worm_params()?;
        crate::annulus::AnnulusProblem::worm(beta, t0, m).ok()
    }
}

/// Largest distance from `support` to the locus and from the locus samples
/// to `support`.
pub fn hausdorff_to_locus(domain: &ExampleDomain, support: &[Vec<f64>], locus_count: usize) -> (f64, f64) {
    let forward = support
        .iter()
        .map(|x| domain.locus_distance(x).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let backward = domain
        .locus_samples(locus_count)
        .iter()
        .map(|y| {
            support
                .iter()
                .map(|x| x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    (forward, backward)
}

/// `ker(x dx⊗dx + y dy⊗dy)` sampled on an `n × n` grid of `[−1, 1]²`.
pub fn cross_distribution(n: usize) -> SampledDistribution {
    let pts: Vec<Vec<f64>> = (0..n)
        .flat_map(|i| {
            (0..n).map(move |j| {
                let s = |k: usize| -1.0 + 2.0 * k as f64 / (n - 1) as f64;
                vec![s(i), s(j)]
            })
        })
        .collect();
    distributions::real_form_distribution(pts, 2, |p| vec![p[0], 0.0, 0.0, p[1]], 1e-9)
}

/// Exact tangent of the support `{xy = 0}` of the cross distribution and of
/// its derived distributions.
pub fn cross_tangent(support_is_origin_only: bool, p: &[f64]) -> Vec<Vec<f64>> {
    let at_origin = p[0] == 0.0 && p[1] == 0.0;
    match (support_is_origin_only, at_origin) {
        (true, _) => vec![],
        (false, true) => vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        (false, false) if p[0] == 0.0 => vec![vec![0.0, 1.0]],
        (false, false) => vec![vec![1.0, 0.0]],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let w = make_domain("worm", &BTreeMap::new()).unwrap();
        assert_eq!(w.params["beta"], 1.0);
        assert!(make_domain("torus", &BTreeMap::new()).is_err());
        let bad = BTreeMap::from([("beta".to_string(), -1.0)]);
        assert!(matches!(make_domain("worm", &bad), Err(ExampleError::BadParam { .. })));
        let unknown = BTreeMap::from([("q".to_string(), 1.0)]);
        assert!(matches!(make_domain("ball", &unknown), Err(ExampleError::UnknownParam { .. })));
    }

    #[test]
    fn locus_points_are_on_the_boundary() {
        for name in ["quartic", "worm"] {
            let d = make_domain(name, &BTreeMap::new()).unwrap();
            for x in d.locus_samples(50) {
                assert!(d.function.eval(&x).abs() < 1e-12, "{name} {x:?}");
                assert!(d.locus_distance(&x).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn cross_fibers() {
        let d = cross_distribution(11);
        let dims = d.fiber_dims();
        let at = |x: usize, y: usize| dims[x * 11 + y];
        assert_eq!(at(5, 5), 2);
        assert_eq!(at(5, 2), 1);
        assert_eq!(at(1, 5), 1);
        assert_eq!(at(1, 2), 0);
    }
}
