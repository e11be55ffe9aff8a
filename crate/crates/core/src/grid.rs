//! Lattice nodes clipped to the polygon, wide stencils and boundary closure.
//!
//! Nodes are the lattice points at positive depth inside the polygon. Every
//! stencil ray from a node ends either at another node or at its exact
//! intersection with the boundary (a *closure point*), which carries the
//! Dirichlet value.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{BoundaryTrace, Polygon};
use crate::{Error, Result, Vec2};

const HALF_SQRT3: f64 = 0.866_025_403_784_438_6;
const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Node lattice: `hℤ²`, or the triangular lattice spanned by `h(1,0)` and
/// `h(1/2, √3/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Lattice {
    #[default]
    Square,
    Hexagonal,
}

impl Lattice {
    /// Physical position of lattice point `(i, j)` at spacing `h`.
    pub fn point(self, i: i64, j: i64, h: f64) -> Vec2 {
        match self {
            Lattice::Square => Vec2::new(i as f64 * h, j as f64 * h),
            Lattice::Hexagonal => {
                Vec2::new((2 * i + j) as f64 * (0.5 * h), j as f64 * (HALF_SQRT3 * h))
            }
        }
    }

    /// Lattice vector `(p, q)` in units of `h`.
    pub fn vector(self, p: i64, q: i64) -> Vec2 {
        match self {
            Lattice::Square => Vec2::new(p as f64, q as f64),
            Lattice::Hexagonal => Vec2::new(p as f64 + 0.5 * q as f64, HALF_SQRT3 * q as f64),
        }
    }

    fn row_spacing(self) -> f64 {
        match self {
            Lattice::Square => 1.0,
            Lattice::Hexagonal => HALF_SQRT3,
        }
    }

    /// Primitive lattice direction parallel to the quarter turn of `(p, q)`.
    fn quarter_turn(self, p: i64, q: i64) -> (i64, i64) {
        match self {
            Lattice::Square => canonical(-q, p),
            // J a₁ = (2a₂ − a₁)/√3 and J a₂ = (a₂ − 2a₁)/√3
            Lattice::Hexagonal => canonical(-p - 2 * q, 2 * p + q),
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Reduce to a primitive vector in the upper half plane `p > 0 ∨ (p = 0 ∧ q > 0)`.
fn canonical(p: i64, q: i64) -> (i64, i64) {
    let g = gcd(p, q);
    let (p, q) = (p / g, q / g);
    if p < 0 || (p == 0 && q < 0) {
        (-p, -q)
    } else {
        (p, q)
    }
}

/// A stencil direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    pub p: i64,
    pub q: i64,
    /// Unit vector along the direction.
    pub unit: Vec2,
    /// Length of the lattice vector in units of `h`.
    pub length: f64,
}

/// Weights reconstructing the Hessian from directional second derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianStencil {
    /// `(direction index, w₁₁, w₁₂, w₂₂)`.
    pub terms: Vec<(usize, f64, f64, f64)>,
}

/// Lattice directions of the wide stencil paired into orthogonal frames.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub directions: Vec<Direction>,
    pub pairs: Vec<[usize; 2]>,
    pub hessian: HessianStencil,
}

impl Stencil {
    /// All primitive directions of width `≤ width` (sup-norm of the integer
    /// coordinates on the square lattice, Euclidean length on the triangular
    /// one) together with their orthogonal partners.
    pub fn new(lattice: Lattice, width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidParameter("stencil width must be at least 1"));
        }
        let w = width as i64;
        let mut base: Vec<(i64, i64)> = Vec::new();
        let range = match lattice {
            Lattice::Square => w,
            Lattice::Hexagonal => 2 * w,
        };
        for p in 0..=range {
            for q in -range..=range {
                if (p == 0 && q <= 0) || gcd(p, q) != 1 {
                    continue;
                }
                let keep = match lattice {
                    Lattice::Square => p.abs().max(q.abs()) <= w,
                    Lattice::Hexagonal => p * p + p * q + q * q <= w * w,
                };
                if keep {
                    base.push((p, q));
                }
            }
        }
        let mut all = base.clone();
        for &(p, q) in &base {
            let partner = lattice.quarter_turn(p, q);
            if !all.contains(&partner) {
                all.push(partner);
            }
        }
        let angle = |d: &(i64, i64)| {
            let v = lattice.vector(d.0, d.1);
            libm::atan2(v.y, v.x)
        };
        all.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
        let directions: Vec<Direction> = all
            .iter()
            .map(|&(p, q)| {
                let v = lattice.vector(p, q);
                let length = v.norm();
                Direction { p, q, unit: (1.0 / length) * v, length }
            })
            .collect();
        let index = |d: (i64, i64)| all.iter().position(|x| *x == d).unwrap();
        let mut pairs: Vec<[usize; 2]> = Vec::new();
        for &d in &base {
            let a = index(d);
            let b = index(lattice.quarter_turn(d.0, d.1));
            let pair = [a.min(b), a.max(b)];
            if !pairs.contains(&pair) {
                pairs.push(pair);
            }
        }
        pairs.sort();
        let hessian = match lattice {
            Lattice::Square => HessianStencil {
                terms: vec![
                    (index((1, 0)), 1.0, 0.0, 0.0),
                    (index((0, 1)), 0.0, 0.0, 1.0),
                    (index((1, 1)), 0.0, 0.5, 0.0),
                    (index((1, -1)), 0.0, -0.5, 0.0),
                ],
            },
            Lattice::Hexagonal => HessianStencil {
                terms: vec![
                    (index((1, 0)), 1.0, 0.0, -1.0 / 3.0),
                    (index((0, 1)), 0.0, 1.0 / SQRT3, 2.0 / 3.0),
                    (index((1, -1)), 0.0, -1.0 / SQRT3, 2.0 / 3.0),
                ],
            },
        };
        Ok(Stencil { directions, pairs, hessian })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn index_of(&self, p: i64, q: i64) -> Option<usize> {
        self.directions.iter().position(|d| d.p == p && d.q == q)
    }
}

/// Where a stencil arm ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Neighbor {
    Interior(u32),
    Boundary(u32),
}

/// Forward and backward arm of one direction at one node, with the exact
/// physical arm lengths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arm {
    pub forward: Neighbor,
    pub backward: Neighbor,
    pub h_forward: f64,
    pub h_backward: f64,
}

impl Arm {
    /// Weights `(w_f, w_b)` of the second difference
    /// `w_f (φ_f − φ₀) + w_b (φ_b − φ₀)`, exact on quadratics.
    #[inline]
    pub fn second_difference_weights(&self) -> (f64, f64) {
        let s = self.h_forward + self.h_backward;
        (2.0 / (self.h_forward * s), 2.0 / (self.h_backward * s))
    }

    /// Weights `(w_f, w_b)` of the three-point first derivative
    /// `w_f (φ_f − φ₀) + w_b (φ_b − φ₀)`, exact on quadratics.
    #[inline]
    pub fn first_difference_weights(&self) -> (f64, f64) {
        let (hf, hb) = (self.h_forward, self.h_backward);
        let d = hf * hb * (hf + hb);
        (hb * hb / d, -hf * hf / d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Row {
    j: i64,
    i_first: i64,
    start: usize,
    len: usize,
}

/// Discretized polygon interior.
#[derive(Clone, Debug)]
pub struct Grid {
    polygon: Polygon,
    lattice: Lattice,
    h: f64,
    width: usize,
    stencil: Stencil,
    nodes: Vec<Vec2>,
    coords: Vec<(i64, i64)>,
    rows: Vec<Row>,
    arms: Vec<Arm>,
    closure: Vec<Vec2>,
    snapped: usize,
}

impl Grid {
    /// Builds the grid of spacing `h` and stencil width `width`.
    ///
    /// Closure points within `εv` of a vertex are moved onto that vertex so
    /// they take the vertex value; [`Grid::snapped_closure_points`] counts them.
    pub fn new(polygon: &Polygon, h: f64, width: usize, lattice: Lattice) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParameter("grid spacing must be positive"));
        }
        let stencil = Stencil::new(lattice, width)?;
        let eps_b = polygon.boundary_tolerance();
        let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), -Vec2::new(f64::INFINITY, f64::INFINITY));
        for p in polygon.points() {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let dy = lattice.row_spacing() * h;
        let j_lo = libm::floor(lo.y / dy) as i64 - 1;
        let j_hi = libm::ceil(hi.y / dy) as i64 + 1;
        let mut nodes = Vec::new();
        let mut coords = Vec::new();
        let mut rows = Vec::new();
        for j in j_lo..=j_hi {
            let shift = match lattice {
                Lattice::Square => 0.0,
                Lattice::Hexagonal => 0.5 * j as f64,
            };
            let i_lo = libm::floor(lo.x / h - shift) as i64 - 1;
            let i_hi = libm::ceil(hi.x / h - shift) as i64 + 1;
            let start = nodes.len();
            let mut first = None;
            for i in i_lo..=i_hi {
                let x = lattice.point(i, j, h);
                if polygon.interior_depth(x) > eps_b {
                    if first.is_none() {
                        first = Some(i);
                    }
                    nodes.push(x);
                    coords.push((i, j));
                }
            }
            // empty rows between occupied ones are kept so rows index by j
            match first {
                Some(i_first) => rows.push(Row { j, i_first, start, len: nodes.len() - start }),
                None if !rows.is_empty() => rows.push(Row { j, i_first: 0, start, len: 0 }),
                None => {}
            }
        }
        while rows.last().is_some_and(|r| r.len == 0) {
            rows.pop();
        }
        if nodes.is_empty() {
            return Err(Error::SpacingTooCoarse { h });
        }
        let mut grid = Grid {
            polygon: polygon.clone(),
            lattice,
            h,
            width,
            stencil,
            nodes,
            coords,
            rows,
            arms: Vec::new(),
            closure: Vec::new(),
            snapped: 0,
        };
        grid.connect();
        Ok(grid)
    }

    fn connect(&mut self) {
        let eps_v = self.polygon.vertex_tolerance();
        let ndir = self.stencil.len();
        let mut arms = Vec::with_capacity(self.nodes.len() * ndir);
        let mut closure = Vec::new();
        let mut snapped = 0;
        for (n, &(i, j)) in self.coords.iter().enumerate() {
            let x = self.nodes[n];
            for d in &self.stencil.directions {
                let mut ends = [(Neighbor::Interior(0), 0.0); 2];
                for (slot, sign) in [1i64, -1].into_iter().enumerate() {
                    let (ni, nj) = (i + sign * d.p, j + sign * d.q);
                    if let Some(m) = self.node_at(ni, nj) {
                        ends[slot] = (Neighbor::Interior(m as u32), d.length * self.h);
                        continue;
                    }
                    let e = (sign as f64 * self.h) * self.lattice.vector(d.p, d.q);
                    let t = self.ray_exit(x, e);
                    let mut y = x + t * e;
                    if let Some(p) = self.polygon.points().iter().find(|p| p.dist(y) <= eps_v) {
                        y = *p;
                        snapped += 1;
                    }
                    closure.push(y);
                    ends[slot] = (Neighbor::Boundary((closure.len() - 1) as u32), x.dist(y));
                }
                arms.push(Arm {
                    forward: ends[0].0,
                    backward: ends[1].0,
                    h_forward: ends[0].1,
                    h_backward: ends[1].1,
                });
            }
        }
        self.arms = arms;
        self.closure = closure;
        self.snapped = snapped;
    }

    /// Smallest `t > 0` with `x + t e` on the boundary.
    fn ray_exit(&self, x: Vec2, e: Vec2) -> f64 {
        let mut t = f64::INFINITY;
        for k in 0..self.polygon.len() {
            let rate = self.polygon.inward_normal(k).dot(e);
            if rate < 0.0 {
                t = t.min(self.polygon.edge_distance(k, x) / -rate);
            }
        }
        t
    }

    /// Index of the node at lattice coordinates `(i, j)`.
    pub fn node_at(&self, i: i64, j: i64) -> Option<usize> {
        let j0 = self.rows.first()?.j;
        let r = self.rows.get(usize::try_from(j - j0).ok()?)?;
        debug_assert_eq!(r.j, j);
        let k = i - r.i_first;
        (k >= 0 && (k as usize) < r.len).then(|| r.start + k as usize)
    }

    pub fn polygon(&self) -> &Polygon {
        &self.polygon
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn stencil_width(&self) -> usize {
        self.width
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn lattice_coords(&self) -> &[(i64, i64)] {
        &self.coords
    }

    /// Node index ranges of the lattice rows `j₀, j₀ + 1, …`, bottom to top;
    /// every row is a contiguous run of `i` and may be empty on thin parts of
    /// the polygon.
    pub fn rows(&self) -> impl Iterator<Item = core::ops::Range<usize>> + '_ {
        self.rows.iter().map(|r| r.start..r.start + r.len)
    }

    /// Arm of direction `k` at node `n`.
    #[inline]
    pub fn arm(&self, n: usize, k: usize) -> &Arm {
        &self.arms[n * self.stencil.len() + k]
    }

    pub fn closure_points(&self) -> &[Vec2] {
        &self.closure
    }

    pub fn snapped_closure_points(&self) -> usize {
        self.snapped
    }

    /// Dirichlet values at every closure point.
    pub fn closure_values(&self, data: &dyn BoundaryData) -> Result<Vec<f64>> {
        self.closure.iter().map(|x| data.value(*x)).collect()
    }
}

/// Shorthand for a square-lattice [`Grid::new`].
pub fn build_grid(poly: &Polygon, h: f64, width: usize) -> Result<Grid> {
    Grid::new(poly, h, width, Lattice::Square)
}

/// Dirichlet data on the polygon boundary.
pub trait BoundaryData {
    fn value(&self, x: Vec2) -> Result<f64>;

    /// `false` for testing hooks that do not come from a boundary trace.
    fn is_geometric(&self) -> bool {
        false
    }
}

/// The affine trace of a [`BoundaryTrace`].
#[derive(Clone, Copy, Debug)]
pub struct TraceData<'a> {
    pub trace: &'a BoundaryTrace,
    pub polygon: &'a Polygon,
}

impl BoundaryData for TraceData<'_> {
    fn value(&self, x: Vec2) -> Result<f64> {
        self.trace.eval(self.polygon, x)
    }

    fn is_geometric(&self) -> bool {
        true
    }
}

/// Exact boundary function (manufactured-solution testing hook).
pub struct ExactBoundary<F>(pub F);

impl<F: Fn(Vec2) -> f64> BoundaryData for ExactBoundary<F> {
    fn value(&self, x: Vec2) -> Result<f64> {
        Ok((self.0)(x))
    }
}

/// Nodal values of `φ` together with its closure values.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
    pub closure: Vec<f64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<f64>, data: &dyn BoundaryData) -> Result<Self> {
        Self::with_closure(grid, values, grid.closure_values(data)?)
    }

    pub fn with_closure(grid: &Grid, values: Vec<f64>, closure: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), found: values.len() });
        }
        if closure.len() != grid.closure_points().len() {
            return Err(Error::LengthMismatch {
                expected: grid.closure_points().len(),
                found: closure.len(),
            });
        }
        if values.iter().chain(&closure).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Field { values, closure })
    }

    /// Samples `f` at every node and closure point.
    pub fn from_fn(grid: &Grid, f: impl Fn(Vec2) -> f64) -> Self {
        Field {
            values: grid.nodes().iter().map(|x| f(*x)).collect(),
            closure: grid.closure_points().iter().map(|x| f(*x)).collect(),
        }
    }

    #[inline]
    pub fn at(&self, nb: Neighbor) -> f64 {
        match nb {
            Neighbor::Interior(i) => self.values[i as usize],
            Neighbor::Boundary(i) => self.closure[i as usize],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
