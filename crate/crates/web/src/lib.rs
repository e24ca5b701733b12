//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers or JSON text and returns JSON text, so the
//! page needs no generated type glue beyond the functions themselves.

use autoblock::autoblock::{autoblock, AutoblockConfig};
use autoblock::bench::SWEEP_RHOS;
use autoblock::clustering::{complete_linkage, cut, DistanceMatrix};
use autoblock::diagnostics::efficiency_report;
use autoblock::example_models::{compound_symmetric_mvn, fixed_correlation_blocks};
use autoblock::{run_mcmc, SamplerPlan};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Block sizes of the toy model used by the autoblock demo, small enough to
/// finish in a browser tab.
pub const DEMO_SIZES: [usize; 3] = [8, 4, 2];

/// Distances `1 - |r|` from a row-major correlation matrix.
fn distances(rows: &[Vec<f64>]) -> Result<DistanceMatrix, String> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err("correlation matrix must be square".into());
    }
    let values = DMatrix::from_fn(d, d, |i, j| if i == j { 0.0 } else { 1.0 - rows[i][j].abs() });
    DistanceMatrix::new(values).ok_or_else(|| "correlations must be symmetric and within [-1, 1]".into())
}

/// Clusters a correlation matrix (JSON array of rows) and cuts the tree at `height`.
pub fn cluster_json(correlation: &str, height: f64) -> Result<String, String> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(correlation).map_err(|e| e.to_string())?;
    if rows.is_empty() {
        return Err("correlation matrix is empty".into());
    }
    if !(0.0..=1.0).contains(&height) {
        return Err("height must lie in [0, 1]".into());
    }
    let distances = distances(&rows)?;
    let tree = complete_linkage(&distances);
    let groups = cut(&tree, height).groups;
    Ok(json!({ "merges": tree.merges, "leaf_order": tree.leaf_order, "groups": groups }).to_string())
}

#[derive(Serialize)]
struct CurvePoint {
    rho: f64,
    scalar: f64,
    blocked: f64,
}

/// Algorithmic efficiency of all-scalar and all-blocked sampling on
/// compound-symmetric normals of dimension `dim` across correlations.
pub fn curve_json(dim: usize, iterations: usize, seed: u64) -> Result<String, String> {
    if !(2..=64).contains(&dim) {
        return Err("dimension must lie in 2..=64".into());
    }
    let mut points = Vec::new();
    for &rho in SWEEP_RHOS.iter() {
        let example = compound_symmetric_mvn(rho, dim).map_err(|e| e.to_string())?;
        let mut graph = example.graph().map_err(|e| e.to_string())?;
        let mut efficiency = |plan: SamplerPlan| -> Result<f64, String> {
            let chain = run_mcmc(&mut graph, &plan, iterations, seed).map_err(|e| e.to_string())?;
            Ok(efficiency_report(&chain).map_err(|e| e.to_string())?.algorithmic_efficiency)
        };
        let scalar = efficiency(SamplerPlan::all_scalar(dim))?;
        let blocked = efficiency(SamplerPlan::all_blocked(dim))?;
        points.push(CurvePoint { rho, scalar, blocked });
    }
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

/// Runs the blocking search on a small fixed-correlation model.
pub fn autoblock_json(rho: f64, iterations: usize, seed: u64) -> Result<String, String> {
    let example = fixed_correlation_blocks(rho, &DEMO_SIZES).map_err(|e| e.to_string())?;
    let graph = example.graph().map_err(|e| e.to_string())?;
    let config = AutoblockConfig { iterations, seed, ..Default::default() };
    let trace = autoblock(&graph, &config).map_err(|e| e.to_string())?;
    let sweeps: Vec<_> = trace
        .sweeps
        .iter()
        .map(|s| {
            let candidates: Vec<_> = s
                .candidates
                .iter()
                .map(|c| {
                    json!({
                        "heights": c.heights,
                        "block_sizes": c.plan.block_sizes(),
                        "efficiency": c.report.overall_efficiency,
                        "algorithmic_efficiency": c.report.algorithmic_efficiency,
                    })
                })
                .collect();
            json!({ "index": s.index, "selected": s.selected, "height": s.selected_height, "candidates": candidates })
        })
        .collect();
    Ok(json!({
        "sweeps": sweeps,
        "final_groups": trace.final_groups.iter().filter(|g| g.len() > 1).collect::<Vec<_>>(),
        "final_height": trace.final_height,
        "termination": trace.termination,
    })
    .to_string())
}

fn to_js(result: Result<String, String>) -> Result<String, JsError> {
    result.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn cluster(correlation: &str, height: f64) -> Result<String, JsError> {
    to_js(cluster_json(correlation, height))
}

#[wasm_bindgen]
pub fn efficiency_curve(dim: usize, iterations: usize, seed: u32) -> Result<String, JsError> {
    to_js(curve_json(dim, iterations, seed.into()))
}

#[wasm_bindgen]
pub fn autoblock_toy(rho: f64, iterations: usize, seed: u32) -> Result<String, JsError> {
    to_js(autoblock_json(rho, iterations, seed.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cluster_groups_the_correlated_pair() {
        let out = cluster_json("[[1,0.9,0.1],[0.9,1,0.2],[0.1,0.2,1]]", 0.5).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["groups"], json!([[0, 1], [2]]));
        assert_eq!(v["merges"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn cluster_rejects_bad_input() {
        assert!(cluster_json("[[1,0.5],[0.4,1]]", 0.5).is_err());
        assert!(cluster_json("[[1,2],[2,1]]", 0.5).is_err());
        assert!(cluster_json("[]", 0.5).is_err());
        assert!(cluster_json("[[1]]", 1.5).is_err());
        assert!(cluster_json("nope", 0.5).is_err());
    }

    #[test]
    fn curve_covers_the_sweep() {
        let v: serde_json::Value = serde_json::from_str(&curve_json(2, 2000, 1).unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), SWEEP_RHOS.len());
        assert!(curve_json(1, 2000, 1).is_err());
    }

    #[test]
    fn toy_trace_has_a_final_partition() {
        let v: serde_json::Value = serde_json::from_str(&autoblock_json(0.8, 2000, 3).unwrap()).unwrap();
        assert!(v["sweeps"].as_array().unwrap().len() >= 2);
        assert!(v["final_groups"].is_array());
    }
}
