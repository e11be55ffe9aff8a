//! The `report.json` schema.

use serde::{Deserialize, Serialize};
use slpants_core::solver::SolveReport;

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One thresholded pass/fail line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<="`, `">="` or `">"`.
    pub comparison: String,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, comparison: "<=".into(), threshold, pass: value <= threshold }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, comparison: ">=".into(), threshold, pass: value >= threshold }
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, comparison: ">".into(), threshold, pass: value > threshold }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub converged: bool,
    /// Scheme that produced the field; differs from the configured one after
    /// a fallback.
    pub scheme: String,
    pub fell_back_to_monotone: bool,
    pub nodes: usize,
    pub iterations: usize,
    pub seed_iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
    pub fallback_nodes: usize,
    pub linear_iterations: usize,
    pub convexity_margin: f64,
    pub convexity_worst_node: usize,
    pub geometric: bool,
    pub capped: bool,
}

impl SolveSummary {
    pub fn new(r: &SolveReport, nodes: usize, converged: bool, fell_back: bool) -> Self {
        SolveSummary {
            converged,
            scheme: crate::pipeline::scheme_name(r.scheme).into(),
            fell_back_to_monotone: fell_back,
            nodes,
            iterations: r.iterations,
            seed_iterations: r.seed_iterations,
            residual: r.residual,
            history: r.history.clone(),
            fallback_nodes: r.fallback_nodes,
            linear_iterations: r.linear_iterations,
            convexity_margin: r.convexity_margin,
            convexity_worst_node: r.convexity_worst_node,
            geometric: r.geometric,
            capped: r.capped,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub det_residual: f64,
    pub curl: f64,
    pub trace_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub edge: usize,
    pub lambda_sl: f64,
    /// Ground rate at twice `mesh_m`.
    pub lambda_sl_refined: f64,
    pub lambda_fit: f64,
    pub rel_error: f64,
    pub r2: f64,
    pub mesh_m: usize,
    pub window: [f64; 2],
    pub samples: usize,
    pub spectrum: Vec<f64>,
    pub nearest_mode: usize,
    pub spectral_match_warning: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler_characteristic: i64,
    pub boundary_cycles: usize,
    pub g: i64,
    pub b: i64,
    pub n: i64,
    pub raymond_count: i64,
    pub descriptor: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub offsets: Vec<f64>,
    pub solve: Option<SolveSummary>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyPair {
    pub first: usize,
    pub second: usize,
    /// Translation `t` fitted to the offset difference, if one exists.
    pub translation: Option<[f64; 2]>,
    pub translation_residual: f64,
    /// `max |φ′ − φ − t·u − const|` for the best constant.
    pub affine_deviation: Option<f64>,
    pub no_translation_match: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Residuals>,
    /// Per edge; `null` where no sample point fell inside the mesh.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub boundary_affinity: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub edges: Vec<EdgeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologyReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub family: Vec<FamilyMember>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub family_pairs: Vec<FamilyPair>,
    pub warnings: Vec<String>,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub timing: Timing,
}

impl RunReport {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        RunReport {
            version: VERSION.into(),
            command: command.into(),
            config: config.clone(),
            solve: None,
            residuals: None,
            boundary_affinity: vec![],
            edges: vec![],
            topology: None,
            family: vec![],
            family_pairs: vec![],
            warnings: vec![],
            checks: vec![],
            pass: true,
            timing: Timing { wall_time_s: 0.0 },
        }
    }

    pub fn check(&mut self, c: Check) {
        self.pass &= c.pass;
        self.checks.push(c);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
