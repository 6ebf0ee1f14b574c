//! Run configuration: a TOML file plus command-line overrides.

use levicore::dangelo::Budget;
use levicore::distributions::DerivedOpts;
use levicore::examples::ExampleDomain;
use levicore::calc::Smooth;
use levicore::gauge::GaugeBasis;
use levicore::hypersurface::Strategy;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SampleSpec {
    pub strategy: Strategy,
    pub count: usize,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self { strategy: Strategy::Param, count: 4000, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Tolerances {
    /// Relative kernel threshold for the Levi form.
    pub levi_rel_tol: f64,
    pub derived: DerivedOpts,
    pub max_core_iter: usize,
    pub defect_tol: f64,
    pub delta_resolution: f64,
    /// Support points used by the identity checks.
    pub check_points: usize,
    pub key_lemma_points: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            levi_rel_tol: 1e-6,
            derived: DerivedOpts::default(),
            max_core_iter: 8,
            defect_tol: 1e-8,
            delta_resolution: 1e-3,
            check_points: 50,
            key_lemma_points: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct CollarSpec {
    /// Outer collar depth; defaults to `0.1·scale` of the domain.
    pub eps0: Option<f64>,
    pub strata: usize,
    pub base_points: usize,
}

impl Default for CollarSpec {
    fn default() -> Self {
        Self { eps0: None, strata: 4, base_points: 400 }
    }
}

impl CollarSpec {
    /// Depths `ε₀·2^{−j}`, shallowest first.
    pub fn depths(&self, scale: f64) -> Vec<f64> {
        let eps0 = self.eps0.unwrap_or(0.1 * scale);
        (0..self.strata.max(1)).rev().map(|j| eps0 / 2f64.powi(j as i32)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct OracleSpec {
    pub m: usize,
    pub convergence: Vec<usize>,
    pub appendix_degree: usize,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self { m: 64, convergence: vec![32, 64, 128], appendix_degree: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RunConfig {
    pub domain: String,
    pub params: BTreeMap<String, f64>,
    pub sample: SampleSpec,
    pub tolerances: Tolerances,
    /// `auto`, `poly:D`, `radial` or `radial-small`.
    pub basis: String,
    #[serde(rename = "K", with = "levicore::extreal")]
    pub k: f64,
    pub delta_grid: Vec<f64>,
    pub collar: CollarSpec,
    pub budget: Budget,
    pub oracle: OracleSpec,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    /// Directory for CSV dumps.
    pub csv: Option<PathBuf>,
    /// Drop wall-clock timings so that reports are byte-comparable.
    pub normalized: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: "ball".into(),
            params: BTreeMap::new(),
            sample: SampleSpec::default(),
            tolerances: Tolerances::default(),
            basis: "auto".into(),
            k: f64::INFINITY,
            delta_grid: levicore::df_index::ScanOpts::default().delta_grid,
            collar: CollarSpec::default(),
            budget: Budget::default(),
            oracle: OracleSpec::default(),
            threads: None,
            out: None,
            csv: None,
            normalized: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid value for {key}: {msg}")]
    Value { key: String, msg: String },
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: &str| Err(ConfigError::Value { key: key.into(), msg: msg.into() });
        if self.sample.count == 0 {
            return bad("sample.count", "must be positive");
        }
        if self.delta_grid.is_empty() || self.delta_grid.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return bad("deltaGrid", "values must lie in (0, 1]");
        }
        if self.delta_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("deltaGrid", "must be strictly increasing");
        }
        if !(self.k > 0.0) {
            return bad("K", "must be positive");
        }
        if let Some(e) = self.collar.eps0 {
            if !(e > 0.0) {
                return bad("collar.eps0", "must be positive");
            }
        }
        if self.oracle.m < 16 {
            return bad("oracle.m", "must be at least 16");
        }
        parse_basis(&self.basis).map(|_| ())
    }

    /// Basis for the domain and the smaller basis of the same family used
    /// by the reduction check.
    pub fn bases(&self, domain: &ExampleDomain) -> Result<(GaugeBasis, GaugeBasis), ConfigError> {
        let n = domain.function.n();
        Ok(match parse_basis(&self.basis)? {
            BasisChoice::Auto => (domain.small_gauge_basis(4), domain.gauge_basis(4)),
            BasisChoice::Poly(d) => (GaugeBasis::polynomial(n, d.saturating_sub(2).max(1)), GaugeBasis::polynomial(n, d)),
            BasisChoice::Radial | BasisChoice::RadialSmall => {
                let t0 = domain.params.get("t0").copied().ok_or_else(|| ConfigError::Value {
                    key: "basis".into(),
                    msg: "radial bases need the worm parameter t0".into(),
                })?;
                let small = GaugeBasis::radial_small(n, -0.5 * t0, 0.5 * t0);
                let big = GaugeBasis::radial(n, -0.5 * t0, 0.5 * t0);
                if parse_basis(&self.basis)? == BasisChoice::Radial {
                    (small, big)
                } else {
                    (small.clone(), small)
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BasisChoice {
    Auto,
    Poly(usize),
    Radial,
    RadialSmall,
}

fn parse_basis(s: &str) -> Result<BasisChoice, ConfigError> {
    let err = || ConfigError::Value { key: "basis".into(), msg: format!("'{s}' is not auto, poly:D, radial or radial-small") };
    match s {
        "auto" => Ok(BasisChoice::Auto),
        "radial" => Ok(BasisChoice::Radial),
        "radial-small" => Ok(BasisChoice::RadialSmall),
        _ => {
            let d = s.strip_prefix("poly:").ok_or_else(err)?.parse::<usize>().map_err(|_| err())?;
            if d == 0 {
                return Err(err());
            }
            Ok(BasisChoice::Poly(d))
        }
    }
}

/// Parses `key=value` for `--param`.
pub fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("'{v}' is not a number"))?;
    Ok((k.trim().to_string(), v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig { domain: "worm".into(), ..RunConfig::default() };
        c.params.insert("beta".into(), 1.5);
        let text = toml::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = RunConfig::from_toml("domain = \"quartic\"\nK = 5.0\n[sample]\ncount = 100\n").unwrap();
        assert_eq!(c.domain, "quartic");
        assert_eq!(c.k, 5.0);
        assert_eq!(c.sample.count, 100);
        assert_eq!(c.sample.seed, 1);
    }

    #[test]
    fn bad_values_rejected() {
        let c = RunConfig { delta_grid: vec![0.5, 0.2], ..RunConfig::default() };
        assert!(c.validate().is_err());
        let c = RunConfig { basis: "poly:x".into(), ..RunConfig::default() };
        assert!(c.validate().is_err());
        assert!(parse_param("beta").is_err());
        assert_eq!(parse_param("beta=2").unwrap(), ("beta".into(), 2.0));
    }

    #[test]
    fn collar_depths_halve() {
        let d = CollarSpec::default().depths(1.0);
        assert_eq!(d, vec![0.0125, 0.025, 0.05, 0.1]);
    }
}
