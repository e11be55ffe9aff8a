//! The gradient graph `y = ∇φ(u)` of a solved field: discrete special
//! Lagrangian residuals, the triangulated graph, near-edge samples and the
//! affinity of `φ` along the edges.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::EdgeFrame;
use crate::grid::{BoundaryData, Field, Grid, Neighbor};
use crate::scheme::{self, Scheme, Source};
use crate::{Error, Result, Vec2};

/// Directional first derivative along stencil direction `k` at node `n`,
/// exact on quadratics.
fn directional_derivative(grid: &Grid, phi: &Field, n: usize, k: usize) -> f64 {
    let arm = grid.arm(n, k);
    let (wf, wb) = arm.first_difference_weights();
    let c = phi.values[n];
    wf * (phi.at(arm.forward) - c) + wb * (phi.at(arm.backward) - c)
}

/// Unit vectors of the two lattice basis directions and their stencil indices.
fn basis(grid: &Grid) -> ([usize; 2], [Vec2; 2]) {
    let st = grid.stencil();
    let k = [st.index_of(1, 0).expect("basis direction"), st.index_of(0, 1).expect("basis direction")];
    (k, [st.directions[k[0]].unit, st.directions[k[1]].unit])
}

/// Solves `[e₀ · g, e₁ · g] = d` for `g`.
fn from_directional(e: [Vec2; 2], d: [f64; 2]) -> Vec2 {
    let det = e[0].cross(e[1]);
    Vec2::new((d[0] * e[1].y - d[1] * e[0].y) / det, (e[0].x * d[1] - e[1].x * d[0]) / det)
}

/// `(y₁, y₂) = ∇φ` at every node from three-point differences along the two
/// lattice basis directions. The stencil is centered where both neighbors
/// are nodes and one-sided second order against closure values otherwise.
pub fn gradient_field(grid: &Grid, phi: &Field) -> Vec<Vec2> {
    let (k, e) = basis(grid);
    (0..grid.len())
        .map(|n| from_directional(e, [directional_derivative(grid, phi, n, k[0]), directional_derivative(grid, phi, n, k[1])]))
        .collect()
}

/// Discrete form of the reduced special Lagrangian system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlResiduals {
    /// `sup |MAₕ[φ] − V|` for the chosen scheme.
    pub det_residual: f64,
    /// `sup |∂y₁/∂u₂ − ∂y₂/∂u₁|` over nodes whose four basis neighbors are
    /// nodes.
    pub curl: f64,
    /// `min tr D²ₕφ` from the compact Hessian.
    pub trace_margin: f64,
    pub curl_nodes: usize,
}

pub fn sl_residuals(grid: &Grid, phi: &Field, src: &dyn Source, scheme: Scheme) -> Result<SlResiduals> {
    let r = scheme::ma_residual(grid, phi, src, scheme)?;
    let det_residual = r.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    let trace_margin = (0..grid.len())
        .map(|n| {
            let [a, _, c] = scheme::hessian(grid, phi, n);
            a + c
        })
        .fold(f64::INFINITY, f64::min);
    let y = gradient_field(grid, phi);
    let (k, e) = basis(grid);
    let (mut curl, mut count) = (0.0f64, 0);
    for n in 0..grid.len() {
        let mut d = [[0.0; 2]; 2];
        let mut ok = true;
        for (slot, &kk) in k.iter().enumerate() {
            let arm = grid.arm(n, kk);
            match (arm.forward, arm.backward) {
                (Neighbor::Interior(f), Neighbor::Interior(b)) => {
                    let w = 1.0 / (arm.h_forward + arm.h_backward);
                    let dy = y[f as usize] - y[b as usize];
                    d[slot] = [w * dy.x, w * dy.y];
                }
                _ => ok = false,
            }
        }
        if !ok {
            continue;
        }
        let g1 = from_directional(e, [d[0][0], d[1][0]]);
        let g2 = from_directional(e, [d[0][1], d[1][1]]);
        curl = curl.max((g1.y - g2.x).abs());
        count += 1;
    }
    Ok(SlResiduals { det_residual, curl, trace_margin, curl_nodes: count })
}

/// Per-triangle quality of the `(u₁, u₂)` projection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriangleQuality {
    pub area: f64,
    /// Smallest interior angle in radians.
    pub min_angle: f64,
    /// `min_angle` below 10°.
    pub skinny: bool,
}

/// Triangulated gradient graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphMesh {
    /// `(u₁, u₂, y₁, y₂)` per node.
    pub points: Vec<[f64; 4]>,
    pub phi: Vec<f64>,
    /// Counterclockwise in the `(u₁, u₂)` projection.
    pub triangles: Vec<[u32; 3]>,
    pub quality: Vec<TriangleQuality>,
}

const SKINNY: f64 = 10.0 * core::f64::consts::PI / 180.0;

fn quality(a: Vec2, b: Vec2, c: Vec2) -> TriangleQuality {
    let area = 0.5 * (b - a).cross(c - a);
    let angle = |p: Vec2, q: Vec2, r: Vec2| {
        let (u, v) = (q - p, r - p);
        libm::atan2(u.cross(v).abs(), u.dot(v))
    };
    let min_angle = angle(a, b, c).min(angle(b, c, a)).min(angle(c, a, b));
    TriangleQuality { area, min_angle, skinny: min_angle < SKINNY }
}

impl GraphMesh {
    /// Lifts a triangulation of `points` (projection coordinates) with
    /// per-node gradients and values.
    pub fn from_parts(u: &[Vec2], y: &[Vec2], phi: &[f64], triangles: Vec<[u32; 3]>) -> Result<Self> {
        if u.len() != y.len() || u.len() != phi.len() {
            return Err(Error::LengthMismatch { expected: u.len(), found: y.len().min(phi.len()) });
        }
        let mut q = Vec::with_capacity(triangles.len());
        for t in &triangles {
            if t.iter().any(|&i| i as usize >= u.len()) {
                return Err(Error::TriangulationFailed("vertex index out of range"));
            }
            let tq = quality(u[t[0] as usize], u[t[1] as usize], u[t[2] as usize]);
            if !(tq.area > 0.0) {
                return Err(Error::TriangulationFailed("flipped or degenerate triangle"));
            }
            q.push(tq);
        }
        Ok(GraphMesh {
            points: u.iter().zip(y).map(|(a, b)| [a.x, a.y, b.x, b.y]).collect(),
            phi: phi.to_vec(),
            triangles,
            quality: q,
        })
    }

    pub fn vertex(&self, i: usize) -> Vec2 {
        Vec2::new(self.points[i][0], self.points[i][1])
    }

    pub fn gradient(&self, i: usize) -> Vec2 {
        Vec2::new(self.points[i][2], self.points[i][3])
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

/// Triangulates the nodes strip by strip between consecutive lattice rows,
/// always closing the quadrilateral ahead with its shorter diagonal.
///
/// Only the largest block of consecutive rows holding at least two nodes is
/// meshed, extended by a single-node apex row at either end, so the result
/// is always a disk. Nodes near thin tips outside the block stay in
/// [`GraphMesh::points`] but belong to no triangle.
pub fn build_graph_mesh(grid: &Grid, phi: &Field) -> Result<GraphMesh> {
    let rows: Vec<_> = grid.rows().collect();
    let u = grid.nodes();
    // largest run of rows with two or more nodes, by node count
    let (mut best, mut best_count) = (0..0, 0);
    let mut k = 0;
    while k < rows.len() {
        if rows[k].len() < 2 {
            k += 1;
            continue;
        }
        let start = k;
        let mut count = 0;
        while k < rows.len() && rows[k].len() >= 2 {
            count += rows[k].len();
            k += 1;
        }
        if count > best_count {
            best = start..k;
            best_count = count;
        }
    }
    let mut lo_row = best.start;
    let mut hi_row = best.end;
    if lo_row > 0 && rows[lo_row - 1].len() == 1 {
        lo_row -= 1;
    }
    if hi_row < rows.len() && rows[hi_row].len() == 1 {
        hi_row += 1;
    }
    if hi_row < lo_row + 2 {
        return Err(Error::TriangulationFailed("fewer than two node rows"));
    }
    let mut tris = Vec::new();
    for w in rows[lo_row..hi_row].windows(2) {
        let (lo, hi) = (w[0].clone(), w[1].clone());
        let (mut a, mut b) = (lo.start, hi.start);
        while a + 1 < lo.end || b + 1 < hi.end {
            let advance_lower = if a + 1 == lo.end {
                false
            } else if b + 1 == hi.end {
                true
            } else {
                u[a + 1].dist(u[b]) <= u[a].dist(u[b + 1])
            };
            if advance_lower {
                tris.push([a as u32, (a + 1) as u32, b as u32]);
                a += 1;
            } else {
                tris.push([a as u32, (b + 1) as u32, b as u32]);
                b += 1;
            }
        }
    }
    let y = gradient_field(grid, phi);
    GraphMesh::from_parts(u, &y, &phi.values, tris)
}

/// Barycentric point location on a [`GraphMesh`] through a uniform bucket
/// grid.
#[derive(Clone, Debug)]
pub struct Locator<'a> {
    mesh: &'a GraphMesh,
    lo: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl<'a> Locator<'a> {
    pub fn new(mesh: &'a GraphMesh) -> Self {
        let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for i in 0..mesh.points.len() {
            let p = mesh.vertex(i);
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let nt = mesh.triangles.len().max(1);
        let side = libm::ceil(libm::sqrt(nt as f64)).max(1.0);
        let cell = ((hi.x - lo.x).max(hi.y - lo.y) / side).max(1e-300);
        let nx = (((hi.x - lo.x) / cell) as usize + 1).max(1);
        let ny = (((hi.y - lo.y) / cell) as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let mut loc = Locator { mesh, lo, cell, nx, ny, buckets: Vec::new() };
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let ps = tri.map(|i| mesh.vertex(i as usize));
            let (c0, r0) = loc.cell_of(Vec2::new(ps[0].x.min(ps[1].x).min(ps[2].x), ps[0].y.min(ps[1].y).min(ps[2].y)));
            let (c1, r1) = loc.cell_of(Vec2::new(ps[0].x.max(ps[1].x).max(ps[2].x), ps[0].y.max(ps[1].y).max(ps[2].y)));
            for r in r0..=r1 {
                for c in c0..=c1 {
                    buckets[r * nx + c].push(t as u32);
                }
            }
        }
        loc.buckets = buckets;
        loc
    }

    fn cell_of(&self, p: Vec2) -> (usize, usize) {
        let c = libm::floor((p.x - self.lo.x) / self.cell).clamp(0.0, (self.nx - 1) as f64) as usize;
        let r = libm::floor((p.y - self.lo.y) / self.cell).clamp(0.0, (self.ny - 1) as f64) as usize;
        (c, r)
    }

    /// Containing triangle and barycentric weights, allowing a relative
    /// slack of `1e-12` on the edges.
    pub fn locate(&self, p: Vec2) -> Option<(usize, [f64; 3])> {
        if !p.is_finite() {
            return None;
        }
        let (c, r) = self.cell_of(p);
        for &t in &self.buckets[r * self.nx + c] {
            let tri = self.mesh.triangles[t as usize];
            let [a, b, cc] = tri.map(|i| self.mesh.vertex(i as usize));
            let area = (b - a).cross(cc - a);
            let l0 = (b - p).cross(cc - p) / area;
            let l1 = (cc - p).cross(a - p) / area;
            let l2 = 1.0 - l0 - l1;
            let eps = -1e-12;
            if l0 >= eps && l1 >= eps && l2 >= eps {
                return Some((t as usize, [l0, l1, l2]));
            }
        }
        None
    }

    /// P1 interpolation of `(φ, y₁, y₂)` at `p`.
    pub fn interpolate(&self, p: Vec2) -> Option<(f64, Vec2)> {
        let (t, w) = self.locate(p)?;
        let tri = self.mesh.triangles[t];
        let mut phi = 0.0;
        let mut y = Vec2::ZERO;
        for (k, &i) in tri.iter().enumerate() {
            phi += w[k] * self.mesh.phi[i as usize];
            y += w[k] * self.mesh.gradient(i as usize);
        }
        Some((phi, y))
    }
}

/// Near-edge samples along one inward normal line, in edge-frame
/// coordinates. `y₁` is the outward normal component of `∇φ` and grows
/// without bound near an asymptotically cylindrical edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSamples {
    pub edge: usize,
    pub u2: f64,
    /// Strictly decreasing and positive.
    pub u1: Vec<f64>,
    pub y1: Vec<f64>,
    /// Tangential gradient component at the same points.
    pub y2: Vec<f64>,
    pub phi: Vec<f64>,
    /// `false` when `y₁` levels off toward the edge like a smooth graph.
    pub asymptotic: bool,
}

/// Log-slope of `y` against `ln u` by least squares.
fn log_slope(u: &[f64], y: &[f64]) -> f64 {
    let n = u.len() as f64;
    let lx: Vec<f64> = u.iter().map(|v| libm::log(*v)).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(y).map(|(x, v)| (x - mx) * (v - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Samples `(u₁, y₁)` at `u₁ = k·h`, `k = kmax … 1`, on the normal line
/// through frame coordinate `u2`, keeping the points inside the mesh.
pub fn edge_samples(grid: &Grid, mesh: &GraphMesh, frame: &EdgeFrame, u2: f64, kmax: usize) -> Result<EdgeSamples> {
    let l = frame.length;
    if !(u2 >= -0.8 * l && u2 <= -0.2 * l) {
        return Err(Error::OutsideStrip { u2 });
    }
    let loc = Locator::new(mesh);
    let h = grid.spacing();
    let mut s = EdgeSamples { edge: frame.edge, u2, u1: vec![], y1: vec![], y2: vec![], phi: vec![], asymptotic: true };
    for k in (1..=kmax).rev() {
        let u1 = k as f64 * h;
        let x = frame.from_frame(Vec2::new(u1, u2));
        if let Some((phi, y)) = loc.interpolate(x) {
            let yf = frame.rotate(y);
            s.u1.push(u1);
            s.y1.push(-yf.x);
            s.y2.push(yf.y);
            s.phi.push(phi);
        }
    }
    if s.u1.len() < 4 {
        return Err(Error::InsufficientResolution { found: s.u1.len() });
    }
    let half = s.u1.len() / 2;
    let far = log_slope(&s.u1[..half], &s.y1[..half]);
    let near = log_slope(&s.u1[half..], &s.y1[half..]);
    // y₁ ≈ −ln(u₁)/λ keeps its log-slope; a bounded y₁ loses it toward the edge
    s.asymptotic = near < 0.0 && far < 0.0 && near.abs() * 2.0 >= far.abs();
    Ok(s)
}

/// `sup |φ − trace(projection)|` over points at distance `2h` from each edge
/// across its middle 60%; `NaN` for an edge with no point inside the mesh.
pub fn boundary_affinity_check(grid: &Grid, mesh: &GraphMesh, data: &dyn BoundaryData) -> Result<Vec<f64>> {
    let poly = grid.polygon();
    let loc = Locator::new(mesh);
    let delta = 2.0 * grid.spacing();
    let mut out = Vec::with_capacity(poly.len());
    for i in 0..poly.len() {
        let (a, b) = poly.edge(i);
        let l = poly.edge_length(i);
        let count = (libm::ceil(0.6 * l / grid.spacing()) as usize).max(2);
        let n = poly.inward_normal(i);
        let mut dev = f64::NAN;
        for k in 0..=count {
            let t = 0.2 + 0.6 * k as f64 / count as f64;
            let on = a + t * (b - a);
            if let Some((phi, _)) = loc.interpolate(on + delta * n) {
                let d = (phi - data.value(on)?).abs();
                dev = if dev.is_nan() { d } else { dev.max(d) };
            }
        }
        out.push(dev);
    }
    Ok(out)
}
