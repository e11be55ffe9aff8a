//! Run configuration, read from TOML.
//!
//! ```toml
//! [polygon]
//! points = [[1.0, 0.0], [-0.5, 0.8660254037844386], [-0.5, -0.8660254037844386]]
//! a = 0.0
//! c = [0.0, 0.0, 0.0]
//!
//! [grid]
//! h = 0.015625
//! ```
//!
//! Every other section is optional. Validation errors name the offending key.

use std::path::Path;

use serde::{Deserialize, Serialize};
use slpants_core::geometry::{BoundaryTrace, GhParams, Polygon};
use slpants_core::grid::{Grid, Lattice};
use slpants_core::scheme::Scheme;
use slpants_core::solver::{Init, SolveParams};
use slpants_core::Vec2;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub polygon: PolygonConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub asymptotics: AsymptoticsConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub hooks: HooksConfig,
    #[serde(default)]
    pub family: FamilyConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonConfig {
    /// Monopole positions, counterclockwise.
    pub points: Vec<[f64; 2]>,
    /// ALF constant; 0 is the ALE case.
    #[serde(default)]
    pub a: f64,
    /// Cylinder offsets, one per edge, summing to zero. Defaults to zeros.
    #[serde(default)]
    pub c: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Square,
    Hexagonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    #[serde(default = "default_width")]
    pub stencil_width: usize,
    #[serde(default = "default_lattice")]
    pub lattice: LatticeKind,
}

fn default_width() -> usize {
    3
}

fn default_lattice() -> LatticeKind {
    LatticeKind::Hexagonal
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Monotone,
    NinePoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Affine,
    Coarse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub scheme: SchemeKind,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub init: InitKind,
    /// Retry with the monotone scheme when the nine-point solve fails.
    pub fallback_to_monotone: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let sp = SolveParams::default();
        SolverConfig {
            scheme: SchemeKind::Monotone,
            tol: sp.tol,
            max_iter: sp.max_iter,
            damping: sp.damping,
            init: InitKind::Affine,
            fallback_to_monotone: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymptoticsConfig {
    /// Points of the edge eigenproblem.
    pub mesh_m: usize,
    /// `[u1_min, u1_max]` of the fit; `u1_min` defaults to `4h`.
    pub fit_window: Option<[f64; 2]>,
    pub fit_max: f64,
    /// Position along each edge as a fraction of its length, within the
    /// middle 60%.
    pub edge_position: f64,
    pub threshold: f64,
    pub r2_min: f64,
}

impl Default for AsymptoticsConfig {
    fn default() -> Self {
        AsymptoticsConfig {
            mesh_m: 1024,
            fit_window: None,
            fit_max: 0.1,
            edge_position: 0.5,
            threshold: 0.10,
            r2_min: 0.98,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Bound on the recomputed residual; defaults to `10·tol`.
    pub det_tol: Option<f64>,
    pub convexity_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { det_tol: None, convexity_tol: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Vtk,
    Obj,
    Csv,
}

impl MeshFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Vtk => "vtk",
            MeshFormat::Obj => "obj",
            MeshFormat::Csv => "csv",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub mesh_format: MeshFormat,
    /// File names inside the output directory.
    pub solution: String,
    pub report: String,
    pub mesh: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            mesh_format: MeshFormat::Vtk,
            solution: "solution.csv".into(),
            report: "report.json".into(),
            mesh: "mesh".into(),
        }
    }
}

/// Non-geometric test hooks. Runs using them are flagged in the report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HooksConfig {
    /// Replace the potential by a constant.
    pub constant_v: Option<f64>,
    /// Dirichlet data `√V₀ |u|²/2` instead of the affine trace, the exact
    /// solution for a constant potential `V₀` (1 without `constant_v`).
    pub exact_boundary: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyConfig {
    /// Offset vectors to sweep, each summing to zero.
    pub offsets: Vec<Vec<f64>>,
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config { key: key.into(), message: message.into() }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let key = e.span().map(|s| key_at(text, s.start)).unwrap_or_default();
            CliError::Config { key, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn polygon(&self) -> Result<Polygon, CliError> {
        Polygon::new(self.polygon.points.iter().map(|p| Vec2::new(p[0], p[1])).collect())
            .map_err(|e| invalid("polygon.points", e.to_string()))
    }

    pub fn gh_params(&self) -> Result<GhParams, CliError> {
        GhParams::new(self.polygon()?, self.polygon.a).map_err(|e| invalid("polygon.a", e.to_string()))
    }

    pub fn offsets(&self) -> Vec<f64> {
        self.polygon.c.clone().unwrap_or_else(|| vec![0.0; self.polygon.points.len()])
    }

    pub fn trace(&self, c: &[f64], key: &str) -> Result<BoundaryTrace, CliError> {
        BoundaryTrace::new(&self.polygon()?, c).map_err(|e| invalid(key, e.to_string()))
    }

    pub fn lattice(&self) -> Lattice {
        match self.grid.lattice {
            LatticeKind::Square => Lattice::Square,
            LatticeKind::Hexagonal => Lattice::Hexagonal,
        }
    }

    pub fn build_grid(&self) -> Result<Grid, CliError> {
        Grid::new(&self.polygon()?, self.grid.h, self.grid.stencil_width, self.lattice())
            .map_err(|e| invalid("grid.h", e.to_string()))
    }

    pub fn scheme(&self) -> Scheme {
        match self.solver.scheme {
            SchemeKind::Monotone => Scheme::Monotone,
            SchemeKind::NinePoint => Scheme::NinePoint,
        }
    }

    pub fn solve_params(&self) -> SolveParams {
        SolveParams {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            damping: self.solver.damping,
            init: match self.solver.init {
                InitKind::Affine => Init::Affine,
                InitKind::Coarse => Init::Coarse,
            },
            scheme: self.scheme(),
        }
    }

    /// Lower and upper end of the decay fit window.
    pub fn fit_window(&self) -> (f64, f64) {
        match self.asymptotics.fit_window {
            Some([lo, hi]) => (lo, hi),
            None => (4.0 * self.grid.h, self.asymptotics.fit_max),
        }
    }

    pub fn det_tol(&self) -> f64 {
        self.verify.det_tol.unwrap_or(10.0 * self.solver.tol)
    }

    pub fn is_geometric(&self) -> bool {
        self.hooks.constant_v.is_none() && !self.hooks.exact_boundary
    }

    /// Checks every precondition that does not need a solve.
    pub fn validate(&self) -> Result<(), CliError> {
        let poly = self.polygon()?;
        if !(self.polygon.a >= 0.0 && self.polygon.a.is_finite()) {
            return Err(invalid("polygon.a", "must be finite and nonnegative"));
        }
        self.gh_params()?;
        self.trace(&self.offsets(), "polygon.c")?;
        for (k, c) in self.family.offsets.iter().enumerate() {
            self.trace(c, &format!("family.offsets[{k}]"))?;
        }
        let h = self.grid.h;
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("grid.h", "must be positive"));
        }
        if h > poly.diameter() {
            return Err(invalid("grid.h", "exceeds the polygon diameter"));
        }
        if self.grid.stencil_width == 0 {
            return Err(invalid("grid.stencil_width", "must be at least 1"));
        }
        let s = &self.solver;
        let sp = self.solve_params();
        if !(s.tol > 0.0 && s.tol.is_finite()) {
            return Err(invalid("solver.tol", "must be positive"));
        }
        if s.max_iter == 0 {
            return Err(invalid("solver.max_iter", "must be at least 1"));
        }
        if !(s.damping > 0.0 && s.damping <= 1.0) {
            return Err(invalid("solver.damping", "must lie in (0, 1]"));
        }
        sp.validate().map_err(|e| invalid("solver", e.to_string()))?;
        let a = &self.asymptotics;
        if a.mesh_m < 16 {
            return Err(invalid("asymptotics.mesh_m", "must be at least 16"));
        }
        if let Some([lo, hi]) = a.fit_window {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(invalid("asymptotics.fit_window", "needs 0 < min < max"));
            }
        }
        if !(a.fit_max > 0.0 && a.fit_max.is_finite()) {
            return Err(invalid("asymptotics.fit_max", "must be positive"));
        }
        if !(0.2..=0.8).contains(&a.edge_position) {
            return Err(invalid("asymptotics.edge_position", "must lie in the middle 60% [0.2, 0.8]"));
        }
        if !(a.threshold > 0.0) {
            return Err(invalid("asymptotics.threshold", "must be positive"));
        }
        if !(0.0..=1.0).contains(&a.r2_min) {
            return Err(invalid("asymptotics.r2_min", "must lie in [0, 1]"));
        }
        if let Some(t) = self.verify.det_tol {
            if !(t > 0.0) {
                return Err(invalid("verify.det_tol", "must be positive"));
            }
        }
        if !(self.verify.convexity_tol >= 0.0) {
            return Err(invalid("verify.convexity_tol", "must be nonnegative"));
        }
        if let Some(v) = self.hooks.constant_v {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid("hooks.constant_v", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Dotted key of the TOML entry enclosing byte `pos`.
fn key_at(text: &str, pos: usize) -> String {
    let mut section = String::new();
    let mut key = String::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with('[') && !t.starts_with("[[") {
            section = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_string();
        }
        offset += line.len();
        if offset > pos {
            break;
        }
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const TRIANGLE: &str = r#"
[polygon]
points = [[1.0, 0.0], [-0.5, 0.8660254037844386], [-0.5, -0.8660254037844386]]

[grid]
h = 0.125
"#;

    fn key_of(text: &str) -> String {
        match RunConfig::from_toml(text) {
            Err(CliError::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_toml(TRIANGLE).unwrap();
        assert_eq!(c.offsets(), vec![0.0; 3]);
        assert_eq!(c.grid.lattice, LatticeKind::Hexagonal);
        assert_eq!(c.fit_window(), (0.5, 0.1));
        assert!(c.is_geometric());
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of(&TRIANGLE.replace("h = 0.125", "h = 0.0")), "grid.h");
        assert_eq!(key_of(&format!("{TRIANGLE}stencil = 3\n")), "grid.stencil");
        let bad_c = TRIANGLE.replace("[grid]", "c = [1.0, 0.0, 0.0]\n\n[grid]");
        assert_eq!(key_of(&bad_c), "polygon.c");
        let bad_scheme = format!("{TRIANGLE}\n[solver]\nscheme = \"upwind\"\n");
        assert_eq!(key_of(&bad_scheme), "solver.scheme");
        let cw = TRIANGLE.replace("-0.5, 0.8660254037844386], [-0.5, -0.8660254037844386", "-0.5, -0.8660254037844386], [-0.5, 0.8660254037844386");
        assert_eq!(key_of(&cw), "polygon.points");
    }
}
