//! Browser bindings. Every function returns a JSON string; errors come back
//! as `{"error": "..."}`.

use levicore::annulus::{self, AnnulusProblem};
use levicore::calc::eig_herm;
use levicore::df_index::{self, CollarGrid};
use levicore::examples::{self, ExampleDomain};
use levicore::hypersurface::{self, Strategy};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use wasm_bindgen::prelude::*;

fn respond(r: Result<Value, String>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

fn domain(name: &str, params: &str) -> Result<ExampleDomain, String> {
    let params: BTreeMap<String, f64> = if params.trim().is_empty() {
        BTreeMap::new()
    } else {
        serde_json::from_str(params).map_err(|e| format!("params: {e}"))?
    };
    examples::make_domain(name, &params).map_err(|e| e.to_string())
}

/// Registered domains and their parameters.
#[wasm_bindgen]
pub fn domains() -> String {
    serde_json::to_string(&examples::registry()).unwrap_or_default()
}

/// Annulus oracle for `steps + 1` windings in `[0, beta_max]`, with the
/// continuum value `2βt0/π` and the index `1/(1+n)`.
#[wasm_bindgen]
pub fn oracle_curve(beta_max: f64, t0: f64, m: usize, steps: usize) -> String {
    respond((|| {
        let steps = steps.clamp(1, 200);
        let rows: Result<Vec<Value>, String> = (0..=steps)
            .map(|i| {
                let beta = beta_max * i as f64 / steps as f64;
                let prob = AnnulusProblem::worm(beta, t0, m).map_err(|e| e.to_string())?;
                let v = annulus::annulus_norm_oracle(&prob).value;
                Ok(json!({
                    "beta": beta,
                    "value": v,
                    "continuum": annulus::continuum_value(&prob),
                    "df": 1.0 / (1.0 + v),
                }))
            })
            .collect();
        Ok(json!({ "t0": t0, "m": m, "rows": rows? }))
    })())
}

/// Plurisubharmonicity defect of `−(−r)^δ` on a collar of the canonical
/// defining function, at `steps` values of δ in `(0, 1)`.
#[wasm_bindgen]
pub fn defect_curve(name: &str, params: &str, base_points: usize, steps: usize) -> String {
    respond((|| {
        let d = domain(name, params)?;
        let s = hypersurface::sample_boundary(&d.function, Strategy::Param, base_points.clamp(20, 2000), 1);
        let base: Vec<Vec<f64>> = s.points.iter().map(|b| b.real()).filter(|x| d.in_patch(x)).collect();
        let grid = CollarGrid::from_boundary(&d.function, &base, &df_index::default_depths(d.function.scale()))
            .map_err(|e| e.to_string())?;
        let steps = steps.clamp(2, 100);
        let mut rows = Vec::with_capacity(steps);
        for i in 1..=steps {
            let delta = i as f64 / (steps + 1) as f64;
            let defect = df_index::psh_defect(&d.function, delta, &grid).map_err(|e| e.to_string())?;
            rows.push(json!({ "delta": delta, "defect": defect }));
        }
        Ok(json!({ "domain": d.name, "collarPoints": grid.len(), "rows": rows }))
    })())
}

/// Smallest Levi eigenvalue at sampled boundary points, with `log|z1|²`
/// and `|z2|` for plotting.
#[wasm_bindgen]
pub fn levi_scan(name: &str, params: &str, count: usize, seed: u64) -> String {
    respond((|| {
        let d = domain(name, params)?;
        let s = hypersurface::sample_boundary(&d.function, Strategy::Random, count.clamp(10, 5000), seed);
        let points: Vec<Value> = s
            .points
            .iter()
            .map(|bp| {
                let x = bp.real();
                let min = eig_herm(&hypersurface::levi_form(bp)).min();
                json!({
                    "t": (x[0] * x[0] + x[1] * x[1]).ln(),
                    "w": x[2].hypot(x[3]),
                    "minEig": min,
                })
            })
            .collect();
        let rep = hypersurface::pseudoconvexity_report(&s.points, 1e-6);
        Ok(json!({
            "domain": d.name,
            "minEigenvalue": rep.min_eigenvalue,
            "violations": rep.violations.len(),
            "points": points,
        }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_curve_starts_at_zero() {
        let v: Value = serde_json::from_str(&oracle_curve(2.0, 1.0, 64, 4)).unwrap();
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[0]["value"], 0.0);
        assert!((rows[2]["value"].as_f64().unwrap() - 0.636108).abs() < 1e-6);
    }

    #[test]
    fn ball_defect_is_positive() {
        let v: Value = serde_json::from_str(&defect_curve("ball", "", 50, 5)).unwrap();
        assert!(v["rows"].as_array().unwrap().iter().all(|r| r["defect"].as_f64().unwrap() > 0.0));
    }

    #[test]
    fn bad_input_is_reported() {
        let v: Value = serde_json::from_str(&levi_scan("torus", "", 10, 1)).unwrap();
        assert!(v["error"].is_string());
        let v: Value = serde_json::from_str(&levi_scan("worm", "{\"beta\": ", 10, 1)).unwrap();
        assert!(v["error"].as_str().unwrap().starts_with("params"));
    }

    #[test]
    fn saddle_scan_finds_violations() {
        let v: Value = serde_json::from_str(&levi_scan("saddle", "", 200, 1)).unwrap();
        assert!(v["violations"].as_u64().unwrap() > 0);
    }
}
