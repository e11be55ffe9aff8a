//! Damped Newton iteration for the discrete Dirichlet problem.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{BoundaryData, Field, Grid, Lattice};
use crate::scheme::{self, Scheme, Source};
use crate::{Error, Result, Vec2};

/// Initial iterate.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Init {
    /// Least-squares affine fit of the boundary data plus the paraboloid
    /// `(√V̄/2)(|x − x̄|² − R²)`, which is convex with `det = V̄`.
    #[default]
    Affine,
    /// Solve on the grid of spacing `2h` and interpolate along lattice lines.
    Coarse,
    /// Caller-supplied nodal values.
    User(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveParams {
    /// Target for the sup-norm of `MAₕ[φ] − V`.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial and restored Newton step length in `(0, 1]`.
    pub damping: f64,
    pub init: Init,
    pub scheme: Scheme,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { tol: 1e-8, max_iter: 100, damping: 1.0, init: Init::Affine, scheme: Scheme::Monotone }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter("damping must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub scheme: Scheme,
    /// Newton steps taken.
    pub iterations: usize,
    /// Final sup-norm residual.
    pub residual: f64,
    /// Sup-norm residual before each step and after the last one.
    pub history: Vec<f64>,
    /// Monotone Newton steps spent seeding the nine-point scheme.
    pub seed_iterations: usize,
    /// Nodes where the nine-point scheme fell back to the monotone operator.
    pub fallback_nodes: usize,
    /// Total Krylov iterations over all Newton steps.
    pub linear_iterations: usize,
    /// Seconds; filled in by callers that own a clock.
    pub wall_time: Option<f64>,
    /// Minimum normalized second difference of the result.
    pub convexity_margin: f64,
    pub convexity_worst_node: usize,
    /// `false` when a testing hook supplied `V` or the boundary data.
    pub geometric: bool,
    /// `V` was clipped by a cap.
    pub capped: bool,
}

const MAX_HALVINGS: usize = 40;

/// Residual target of the monotone solve that seeds the nine-point scheme.
pub const SEED_TOL: f64 = 1e-6;

/// Solves `MAₕ[φ] = V` with Dirichlet data `data`.
///
/// Each Newton step solves `J δ = −F` and tries `φ + θδ`; `θ` halves while the
/// residual grows and returns to `sp.damping` after three consecutive
/// decreases. With [`Init::Affine`] or [`Init::Coarse`] the nine-point
/// scheme starts from a monotone solve to [`SEED_TOL`], and nodes where its
/// compact Hessian is not positive definite use the monotone operator
/// instead (counted in [`SolveReport::fallback_nodes`]). It reports
/// [`Error::SingularJacobian`] when the linear solve or the line search fails.
pub fn solve(
    grid: &Grid,
    src: &dyn Source,
    data: &dyn BoundaryData,
    sp: &SolveParams,
) -> Result<(Field, SolveReport)> {
    sp.validate()?;
    let v = scheme::sample_source(grid, src)?;
    let closure = grid.closure_values(data)?;
    let mut values = match &sp.init {
        Init::Affine => affine_init(grid, &closure, &v),
        Init::Coarse => coarse_init(grid, src, data, sp, &closure, &v)?,
        Init::User(u) => u.clone(),
    };
    let mut seed_iterations = 0;
    if sp.scheme == Scheme::NinePoint && !matches!(sp.init, Init::User(_)) {
        // the compact scheme is only Newton-stable inside the convex cone
        let msp = SolveParams { scheme: Scheme::Monotone, init: Init::User(values), tol: sp.tol.max(SEED_TOL), ..sp.clone() };
        let (seed, rep) = solve(grid, src, data, &msp)?;
        values = seed.values;
        seed_iterations = rep.iterations;
    }
    let phi = Field::with_closure(grid, values, closure)?;
    let mut report = SolveReport {
        scheme: sp.scheme,
        geometric: src.is_geometric() && data.is_geometric(),
        capped: src.is_capped(),
        seed_iterations,
        ..Default::default()
    };
    let phi = match sp.scheme {
        Scheme::Monotone => newton(grid, phi, &v, sp, &[], &mut report)?,
        Scheme::NinePoint => nine_point(grid, phi, &v, sp, &mut report)?,
    };
    let (m, node) = scheme::convexity_check(grid, &phi);
    report.convexity_margin = m;
    report.convexity_worst_node = node;
    Ok((phi, report))
}

/// Nine-point Newton with the monotone operator at nodes whose compact
/// Hessian is not positive definite. The fallback set only grows, so the
/// outer loop ends after at most `grid.len()` passes.
fn nine_point(grid: &Grid, mut phi: Field, v: &[f64], sp: &SolveParams, report: &mut SolveReport) -> Result<Field> {
    let mut fallback: Vec<bool> = (0..grid.len()).map(|n| !scheme::compact_hessian_is_convex(grid, &phi, n)).collect();
    loop {
        phi = newton(grid, phi, v, sp, &fallback, report)?;
        let mut grew = false;
        for (n, f) in fallback.iter_mut().enumerate() {
            if !*f && !scheme::compact_hessian_is_convex(grid, &phi, n) {
                *f = true;
                grew = true;
            }
        }
        if !grew {
            report.fallback_nodes = fallback.iter().filter(|f| **f).count();
            return Ok(phi);
        }
    }
}

fn sup(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, x| if x.abs() > m || x.is_nan() { x.abs() } else { m })
}

/// Damped Newton on the scheme `sp.scheme` masked by `fallback`; iterations
/// and history accumulate in `report`.
fn newton(
    grid: &Grid,
    mut phi: Field,
    v: &[f64],
    sp: &SolveParams,
    fallback: &[bool],
    report: &mut SolveReport,
) -> Result<Field> {
    let mut f = scheme::residual_with(grid, &phi, v, sp.scheme, fallback);
    let mut r = sup(&f);
    report.history.push(r);
    let mut theta = sp.damping;
    let mut streak = 0;
    while r > sp.tol || !r.is_finite() {
        if report.iterations == sp.max_iter {
            report.residual = r;
            let (m, node) = scheme::convexity_check(grid, &phi);
            report.convexity_margin = m;
            report.convexity_worst_node = node;
            return Err(Error::NonConvergence(Box::new((phi, report.clone()))));
        }
        report.iterations += 1;
        let it = report.iterations;
        let jac = scheme::jacobian_with(grid, &phi, sp.scheme, fallback);
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let norm2 = libm::sqrt(rhs.iter().map(|x| x * x).sum::<f64>());
        let lin_tol = (1e-6 * norm2).max(1e-3 * sp.tol).min(1e-2 * norm2);
        let (delta, stats) = crate::sparse::solve(&jac, &rhs, lin_tol).ok_or(Error::SingularJacobian { iteration: it })?;
        report.linear_iterations += stats.iterations;
        let mut halvings = 0;
        loop {
            let mut trial = phi.clone();
            for (t, d) in trial.values.iter_mut().zip(&delta) {
                *t += theta * d;
            }
            let ft = scheme::residual_with(grid, &trial, v, sp.scheme, fallback);
            let rt = sup(&ft);
            if rt < r || halvings == MAX_HALVINGS {
                if rt >= r && sp.scheme == Scheme::NinePoint {
                    return Err(Error::SingularJacobian { iteration: it });
                }
                phi = trial;
                f = ft;
                r = rt;
                break;
            }
            theta *= 0.5;
            streak = 0;
            halvings += 1;
        }
        streak += 1;
        if streak >= 3 {
            theta = sp.damping;
        }
        report.history.push(r);
    }
    report.residual = r;
    Ok(phi)
}

/// Affine least-squares fit `α + β·x` of the closure values.
fn affine_fit(points: &[Vec2], values: &[f64]) -> (f64, Vec2) {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vec2::ZERO, |s, p| s + *p) * (1.0 / n);
    let vbar = values.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy, mut sxv, mut syv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, f) in points.iter().zip(values) {
        let d = *p - mean;
        let g = f - vbar;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
        sxv += d.x * g;
        syv += d.y * g;
    }
    let det = sxx * syy - sxy * sxy;
    let beta = if det.abs() > 1e-300 {
        Vec2::new((syy * sxv - sxy * syv) / det, (sxx * syv - sxy * sxv) / det)
    } else {
        Vec2::ZERO
    };
    (vbar - beta.dot(mean), beta)
}

fn affine_init(grid: &Grid, closure: &[f64], v: &[f64]) -> Vec<f64> {
    let pts = grid.closure_points();
    let (alpha, beta) = affine_fit(pts, closure);
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let vbar = sorted[sorted.len() / 2].max(0.0);
    let k = 0.5 * libm::sqrt(vbar);
    let c = grid.polygon().centroid();
    let r2 = pts.iter().map(|p| (*p - c).norm_sq()).fold(0.0, f64::max);
    grid.nodes().iter().map(|x| alpha + beta.dot(*x) + k * ((*x - c).norm_sq() - r2)).collect()
}

fn coarse_init(
    grid: &Grid,
    src: &dyn Source,
    data: &dyn BoundaryData,
    sp: &SolveParams,
    closure: &[f64],
    v: &[f64],
) -> Result<Vec<f64>> {
    let coarse = match Grid::new(grid.polygon(), 2.0 * grid.spacing(), grid.stencil_width(), grid.lattice()) {
        Ok(g) => g,
        Err(Error::SpacingTooCoarse { .. }) => return Ok(affine_init(grid, closure, v)),
        Err(e) => return Err(e),
    };
    let csp = SolveParams { init: Init::Affine, ..sp.clone() };
    let (cphi, _) = solve(&coarse, src, data, &csp)?;
    let fine = Field::with_closure(grid, vec![0.0; grid.len()], closure.to_vec())?;
    let st = grid.stencil();
    let diag = match grid.lattice() {
        Lattice::Square => (1, 1),
        Lattice::Hexagonal => (1, -1),
    };
    let mut out = Vec::with_capacity(grid.len());
    for (n, &(i, j)) in grid.lattice_coords().iter().enumerate() {
        if i % 2 == 0 && j % 2 == 0 {
            out.push(cphi.values[coarse.node_at(i / 2, j / 2).expect("coarse lattice point is a node")]);
            continue;
        }
        // midpoint of two coarse lattice points along a unit lattice direction
        let (p, q) = match (i.rem_euclid(2), j.rem_euclid(2)) {
            (1, 0) => (1, 0),
            (0, 1) => (0, 1),
            _ => diag,
        };
        let k = st.index_of(p, q).expect("unit directions are in every stencil");
        let arm = grid.arm(n, k);
        let end = |sign: i64, nb| {
            let (a, b) = (i + sign * p, j + sign * q);
            if a.rem_euclid(2) == 0 && b.rem_euclid(2) == 0 {
                if let Some(m) = coarse.node_at(a / 2, b / 2) {
                    return cphi.values[m];
                }
            }
            fine.at(nb)
        };
        let (vf, vb) = (end(1, arm.forward), end(-1, arm.backward));
        let (hf, hb) = (arm.h_forward, arm.h_backward);
        out.push((hb * vf + hf * vb) / (hf + hb));
    }
    Ok(out)
}
