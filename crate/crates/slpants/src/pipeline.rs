//! Solve, verify, asymptotics, classification and family sweeps on top of
//! the core library.

use std::time::Instant;

use slpants_core::asymptotics::{compare_rates, edge_eigen, fit_decay_rate};
use slpants_core::geometry::{BoundaryTrace, EdgeFrame, GhParams, Polygon};
use slpants_core::grid::{BoundaryData, Field, Grid};
use slpants_core::reconstruction::{boundary_affinity_check, build_graph_mesh, edge_samples, sl_residuals, GraphMesh};
use slpants_core::scheme::{self, Scheme, Source};
use slpants_core::solver::{self, Init, SolveParams, SolveReport};
use slpants_core::topology::{classify_total_space, measure_quotient};
use slpants_core::{Error, Vec2};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{Check, EdgeReport, FamilyMember, FamilyPair, Residuals, RunReport, SolveSummary, TopologyReport};

pub fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Monotone => "monotone",
        Scheme::NinePoint => "nine-point",
    }
}

/// Potential of a run: the Gibbons–Hawking `V` or the constant hook.
#[derive(Clone, Debug)]
pub enum Potential {
    Gh(GhParams),
    Constant(f64),
}

impl Source for Potential {
    fn value(&self, x: Vec2) -> slpants_core::Result<f64> {
        match self {
            Potential::Gh(p) => p.value(x),
            Potential::Constant(v) => Ok(*v),
        }
    }

    fn is_geometric(&self) -> bool {
        matches!(self, Potential::Gh(_))
    }
}

/// Dirichlet data of a run: the affine trace or the exact quadratic hook.
#[derive(Clone, Debug)]
pub enum Boundary {
    Trace { polygon: Polygon, trace: BoundaryTrace },
    /// `scale · |u|²/2`.
    Quadratic { scale: f64 },
}

impl BoundaryData for Boundary {
    fn value(&self, x: Vec2) -> slpants_core::Result<f64> {
        match self {
            Boundary::Trace { polygon, trace } => trace.eval(polygon, x),
            Boundary::Quadratic { scale } => Ok(0.5 * scale * x.norm_sq()),
        }
    }

    fn is_geometric(&self) -> bool {
        matches!(self, Boundary::Trace { .. })
    }
}

/// Everything a solve needs, built from a validated config.
#[derive(Clone, Debug)]
pub struct Problem {
    pub config: RunConfig,
    pub polygon: Polygon,
    pub grid: Grid,
    pub potential: Potential,
    pub boundary: Boundary,
    pub offsets: Vec<f64>,
}

impl Problem {
    pub fn new(config: &RunConfig) -> Result<Self, CliError> {
        Self::with_offsets(config, &config.offsets())
    }

    pub fn with_offsets(config: &RunConfig, c: &[f64]) -> Result<Self, CliError> {
        let polygon = config.polygon()?;
        let grid = config.build_grid()?;
        let potential = match config.hooks.constant_v {
            Some(v) => Potential::Constant(v),
            None => Potential::Gh(config.gh_params()?),
        };
        let boundary = if config.hooks.exact_boundary {
            Boundary::Quadratic { scale: config.hooks.constant_v.unwrap_or(1.0).sqrt() }
        } else {
            Boundary::Trace { polygon: polygon.clone(), trace: config.trace(c, "polygon.c")? }
        };
        Ok(Problem { config: config.clone(), polygon, grid, potential, boundary, offsets: c.to_vec() })
    }

    pub fn field(&self, values: Vec<f64>) -> Result<Field, CliError> {
        Ok(Field::new(&self.grid, values, &self.boundary)?)
    }
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub phi: Field,
    pub report: SolveReport,
    pub fell_back: bool,
}

impl Solved {
    pub fn summary(&self, grid: &Grid) -> SolveSummary {
        SolveSummary::new(&self.report, grid.len(), true, self.fell_back)
    }
}

/// Solves with the configured scheme. A failed nine-point solve is retried
/// with the monotone scheme when `solver.fallback_to_monotone` is set.
pub fn solve(p: &Problem) -> Result<Solved, Error> {
    solve_with(p, &p.config.solve_params())
}

pub fn solve_with(p: &Problem, sp: &SolveParams) -> Result<Solved, Error> {
    let start = Instant::now();
    let first = solver::solve(&p.grid, &p.potential, &p.boundary, sp);
    let (result, fell_back) = match first {
        Err(Error::NonConvergence(_) | Error::SingularJacobian { .. })
            if sp.scheme == Scheme::NinePoint && p.config.solver.fallback_to_monotone =>
        {
            let msp = SolveParams { scheme: Scheme::Monotone, ..sp.clone() };
            (solver::solve(&p.grid, &p.potential, &p.boundary, &msp), true)
        }
        other => (other, false),
    };
    let (phi, mut report) = result?;
    report.wall_time = Some(start.elapsed().as_secs_f64());
    Ok(Solved { phi, report, fell_back })
}

/// Post-solve checks on a field.
#[derive(Clone, Debug)]
pub struct Verification {
    pub residuals: Residuals,
    pub convexity_margin: f64,
    pub boundary_affinity: Vec<f64>,
    pub checks: Vec<Check>,
    pub mesh: GraphMesh,
}

impl Verification {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn record(&self, r: &mut RunReport) {
        r.residuals = Some(self.residuals);
        r.boundary_affinity = self.boundary_affinity.iter().map(|d| d.is_finite().then_some(*d)).collect();
        for c in &self.checks {
            r.check(c.clone());
        }
    }
}

pub fn verify(p: &Problem, phi: &Field, scheme: Scheme) -> Result<Verification, CliError> {
    let res = sl_residuals(&p.grid, phi, &p.potential, scheme)?;
    let (convexity_margin, _) = scheme::convexity_check(&p.grid, phi);
    let mesh = build_graph_mesh(&p.grid, phi)?;
    let boundary_affinity = boundary_affinity_check(&p.grid, &mesh, &p.boundary)?;
    let cfg = &p.config;
    let checks = vec![
        Check::at_most("det_residual", res.det_residual, cfg.det_tol()),
        Check::at_least("convexity_margin", convexity_margin, -cfg.verify.convexity_tol),
        Check::above("trace_margin", res.trace_margin, 0.0),
    ];
    Ok(Verification {
        residuals: Residuals { det_residual: res.det_residual, curl: res.curl, trace_margin: res.trace_margin },
        convexity_margin,
        boundary_affinity,
        checks,
        mesh,
    })
}

/// Decay-rate cross-check on every edge.
pub fn edge_rates(p: &Problem, mesh: &GraphMesh) -> Result<Vec<EdgeReport>, CliError> {
    let cfg = &p.config;
    let a = &cfg.asymptotics;
    let window = cfg.fit_window();
    let h = p.grid.spacing();
    let kmax = (window.1 / h).ceil() as usize + 1;
    let edges: Vec<usize> = (0..p.polygon.len()).collect();
    let results = crate::threads::map(&edges, |&i| -> Result<EdgeReport, CliError> {
        let frame = EdgeFrame::new(&p.polygon, i)?;
        let u2 = -a.edge_position * frame.length;
        let samples = edge_samples(&p.grid, mesh, &frame, u2, kmax)?;
        let fit = fit_decay_rate(&samples, window)?;
        let sl = edge_eigen(&p.polygon, &p.potential, i, a.mesh_m)?;
        let refined = edge_eigen(&p.polygon, &p.potential, i, 2 * a.mesh_m)?;
        let cmp = compare_rates(&sl, &fit, a.threshold);
        Ok(EdgeReport {
            edge: i,
            lambda_sl: sl.lambda,
            lambda_sl_refined: refined.lambda,
            lambda_fit: fit.lambda,
            rel_error: cmp.rel_error,
            r2: fit.r2,
            mesh_m: a.mesh_m,
            window: [window.0, window.1],
            samples: fit.count,
            spectrum: sl.spectrum,
            nearest_mode: cmp.nearest_mode,
            spectral_match_warning: cmp.spectral_match,
        })
    });
    results.into_iter().collect()
}

/// Records per-edge checks; a spectral match downgrades a rate failure to a
/// warning.
pub fn record_rates(r: &mut RunReport, edges: Vec<EdgeReport>) {
    let a = &r.config.asymptotics;
    let (threshold, r2_min) = (a.threshold, a.r2_min);
    for e in &edges {
        let conv = (e.lambda_sl - e.lambda_sl_refined).abs() / e.lambda_sl_refined;
        r.check(Check::at_most(&format!("edge{}.lambda_sl_mesh_doubling", e.edge), conv, 0.01));
        if e.spectral_match_warning {
            r.warnings.push(format!(
                "edge {}: fitted rate {:.6} misses the ground rate but matches mode {} within {}",
                e.edge, e.lambda_fit, e.nearest_mode, threshold
            ));
        } else {
            r.check(Check::at_most(&format!("edge{}.rel_error", e.edge), e.rel_error, threshold));
        }
        r.check(Check::at_least(&format!("edge{}.r2", e.edge), e.r2, r2_min));
    }
    r.edges = edges;
}

pub fn topology(mesh: &GraphMesh, ends: usize) -> Result<TopologyReport, CliError> {
    let (t, c) = measure_quotient(mesh, ends as i64)?;
    let s = classify_total_space(&t)?;
    Ok(TopologyReport {
        vertices: c.vertices,
        edges: c.edges,
        faces: c.faces,
        euler_characteristic: c.euler,
        boundary_cycles: c.boundary_cycles,
        g: t.g,
        b: t.b,
        n: t.n,
        raymond_count: s.raymond_count,
        descriptor: s.descriptor,
    })
}

/// Translation `t` with `c′ − c = ((pᵢ₊₁ − pᵢ)·t)ᵢ` in the least-squares
/// sense, and the sup residual of that fit.
pub fn fit_translation(poly: &Polygon, c: &[f64], c2: &[f64]) -> ([f64; 2], f64) {
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let rows: Vec<(Vec2, f64)> = (0..poly.len())
        .map(|i| {
            let (a, b) = poly.edge(i);
            (b - a, c2[i] - c[i])
        })
        .collect();
    for (e, d) in &rows {
        a11 += e.x * e.x;
        a12 += e.x * e.y;
        a22 += e.y * e.y;
        b1 += e.x * d;
        b2 += e.y * d;
    }
    let det = a11 * a22 - a12 * a12;
    let t = Vec2::new((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det);
    let res = rows.iter().fold(0.0f64, |m, (e, d)| m.max((e.dot(t) - d).abs()));
    ([t.x, t.y], res)
}

/// `max |φ₂ − φ₁ − t·u − k|` for the best constant `k`.
pub fn affine_deviation(grid: &Grid, phi1: &Field, phi2: &Field, t: [f64; 2]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for ((u, a), b) in grid.nodes().iter().zip(&phi1.values).zip(&phi2.values) {
        let d = b - a - t[0] * u.x - t[1] * u.y;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    0.5 * (hi - lo)
}

/// One solve per offset vector, then the translation cross-check between
/// every pair. Failed members are kept with their error.
pub fn family(cfg: &RunConfig, offsets: &[Vec<f64>]) -> Result<(Vec<FamilyMember>, Vec<FamilyPair>, Vec<Option<Field>>), CliError> {
    let problems: Vec<Problem> = offsets
        .iter()
        .enumerate()
        .map(|(k, c)| {
            Problem::with_offsets(cfg, c).map_err(|e| match e {
                CliError::Config { message, .. } => CliError::Config { key: format!("family.offsets[{k}]"), message },
                e => e,
            })
        })
        .collect::<Result<_, _>>()?;
    let solved = crate::threads::map(&problems, solve);
    let mut members = Vec::new();
    let mut fields = Vec::new();
    for (p, s) in problems.iter().zip(solved) {
        match s {
            Ok(s) => {
                members.push(FamilyMember { offsets: p.offsets.clone(), solve: Some(s.summary(&p.grid)), error: None });
                fields.push(Some(s.phi));
            }
            Err(e) => {
                members.push(FamilyMember { offsets: p.offsets.clone(), solve: None, error: Some(e.to_string()) });
                fields.push(None);
            }
        }
    }
    let poly = cfg.polygon()?;
    let scale = offsets.iter().flatten().fold(1.0f64, |m, c| m.max(c.abs()));
    let mut pairs = Vec::new();
    for i in 0..offsets.len() {
        for j in i + 1..offsets.len() {
            let (t, res) = fit_translation(&poly, &offsets[i], &offsets[j]);
            let matched = res <= 1e-9 * scale;
            let dev = match (&fields[i], &fields[j]) {
                (Some(a), Some(b)) if matched => Some(affine_deviation(&problems[0].grid, a, b, t)),
                _ => None,
            };
            pairs.push(FamilyPair {
                first: i,
                second: j,
                translation: matched.then_some(t),
                translation_residual: res,
                affine_deviation: dev,
                no_translation_match: !matched,
            });
        }
    }
    Ok((members, pairs, fields))
}

/// `Init::User` params seeded from a previous field.
pub fn user_init(sp: &SolveParams, phi: &Field) -> SolveParams {
    SolveParams { init: Init::User(phi.values.clone()), ..sp.clone() }
}
