//! Monopole polygon, Gibbons–Hawking potential and the affine boundary trace.
//!
//! Indices are 0-based throughout: vertex `i` is `pᵢ₊₁` in the usual 1-based
//! labelling and edge `i` joins vertex `i` to vertex `(i + 1) mod n`.

use alloc::vec::Vec;

use crate::{Error, Result, Vec2};

/// Relative tolerance on cylinder-offset sums, scaled by `max|cᵢ| + 1`.
pub const SUM_TOLERANCE: f64 = 1e-9;
/// Relative vertex-proximity and on-boundary tolerance, scaled by the diameter.
pub const PROXIMITY_TOLERANCE: f64 = 1e-8;

/// A strictly convex, counterclockwise polygon of monopole points.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    points: Vec<Vec2>,
    diameter: f64,
}

impl Polygon {
    /// Validates `points` without reordering them.
    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        let n = points.len();
        if n < 3 {
            return Err(Error::TooFewPoints { found: n });
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("polygon points"));
        }
        let mut diameter = 0.0f64;
        for (i, p) in points.iter().enumerate() {
            for q in &points[i + 1..] {
                diameter = diameter.max(p.dist(*q));
            }
        }
        let eps = PROXIMITY_TOLERANCE * diameter;
        for i in 0..n {
            for j in i + 1..n {
                if points[i].dist(points[j]) <= eps {
                    return Err(Error::DuplicateVertex { first: i, second: j });
                }
            }
        }
        let signed_area = signed_area(&points);
        if signed_area <= 0.0 {
            return Err(Error::NotCounterclockwise { signed_area });
        }
        // positive turns at every vertex, and exactly one full turn in total
        // (rules out star polygons whose turns are all positive)
        let mut turning = 0.0;
        for i in 0..n {
            let d0 = points[(i + 1) % n] - points[i];
            let d1 = points[(i + 2) % n] - points[(i + 1) % n];
            let cross = d0.cross(d1);
            if cross <= 0.0 {
                return Err(Error::NotStrictlyConvex { vertex: (i + 1) % n });
            }
            turning += libm::atan2(cross, d0.dot(d1));
        }
        if (turning - 2.0 * core::f64::consts::PI).abs() > 1e-6 {
            return Err(Error::NotStrictlyConvex { vertex: 0 });
        }
        Ok(Polygon { points, diameter })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn vertex(&self, i: usize) -> Vec2 {
        self.points[i % self.points.len()]
    }

    /// Endpoints of edge `i`.
    pub fn edge(&self, i: usize) -> (Vec2, Vec2) {
        (self.vertex(i), self.vertex(i + 1))
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        let (a, b) = self.edge(i);
        a.dist(b)
    }

    /// Unit direction `vᵢ = (pᵢ₊₁ − pᵢ)/|pᵢ₊₁ − pᵢ|`.
    pub fn edge_direction(&self, i: usize) -> Vec2 {
        let (a, b) = self.edge(i);
        (1.0 / a.dist(b)) * (b - a)
    }

    /// Unit normal of edge `i` pointing into the polygon.
    pub fn inward_normal(&self, i: usize) -> Vec2 {
        self.edge_direction(i).perp()
    }

    pub fn min_edge_length(&self) -> f64 {
        (0..self.len()).map(|i| self.edge_length(i)).fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.len();
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let (p, q) = self.edge(i);
            let w = p.cross(q);
            a2 += w;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Vec2::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    /// Tolerance `εv` for vertex proximity.
    pub fn vertex_tolerance(&self) -> f64 {
        PROXIMITY_TOLERANCE * self.diameter
    }

    /// Tolerance `εb` for boundary membership.
    pub fn boundary_tolerance(&self) -> f64 {
        PROXIMITY_TOLERANCE * self.diameter
    }

    /// Signed distance from `x` to the supporting line of edge `i`, positive
    /// on the interior side.
    pub fn edge_distance(&self, i: usize, x: Vec2) -> f64 {
        let (a, _) = self.edge(i);
        self.inward_normal(i).dot(x - a)
    }

    /// Minimum over edges of [`Self::edge_distance`]: positive strictly inside,
    /// and equal to the Euclidean distance to the boundary there.
    pub fn interior_depth(&self, x: Vec2) -> f64 {
        (0..self.len()).map(|i| self.edge_distance(i, x)).fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: Vec2) -> bool {
        self.interior_depth(x) > 0.0
    }

    /// Nearest boundary point: `(edge, parameter t ∈ [0,1] along the edge, distance)`.
    pub fn project_to_boundary(&self, x: Vec2) -> (usize, f64, f64) {
        let mut best = (0, 0.0, f64::INFINITY);
        for i in 0..self.len() {
            let (a, b) = self.edge(i);
            let d = b - a;
            let t = ((x - a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
            let dist = x.dist(a + t * d);
            if dist < best.2 {
                best = (i, t, dist);
            }
        }
        best
    }

    /// Radius of the largest inscribed disk.
    pub fn inradius(&self) -> f64 {
        let (mut lo, mut hi) = (0.0, self.diameter);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.inner_parallel_nonempty(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn inner_parallel_nonempty(&self, r: f64) -> bool {
        let mut poly: Vec<Vec2> = self.points.clone();
        for i in 0..self.len() {
            let (a, _) = self.edge(i);
            let nrm = self.inward_normal(i);
            let level = |p: Vec2| nrm.dot(p - a) - r;
            let mut out = Vec::with_capacity(poly.len() + 1);
            for k in 0..poly.len() {
                let p = poly[k];
                let q = poly[(k + 1) % poly.len()];
                let (lp, lq) = (level(p), level(q));
                if lp >= 0.0 {
                    out.push(p);
                }
                if (lp >= 0.0) != (lq >= 0.0) {
                    let s = lp / (lp - lq);
                    out.push(p + s * (q - p));
                }
            }
            if out.len() < 3 {
                return false;
            }
            poly = out;
        }
        signed_area(&poly) > 0.0
    }
}

fn signed_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    0.5 * (0..n).map(|i| points[i].cross(points[(i + 1) % n])).sum::<f64>()
}

/// Gibbons–Hawking data: polygon plus the ALE/ALF constant `A ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct GhParams {
    pub polygon: Polygon,
    a: f64,
}

impl GhParams {
    pub fn new(polygon: Polygon, a: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::NonFinite("ALE/ALF constant"));
        }
        if a < 0.0 {
            return Err(Error::InvalidParameter("ALE/ALF constant must be nonnegative"));
        }
        Ok(GhParams { polygon, a })
    }

    pub fn alf_constant(&self) -> f64 {
        self.a
    }

    fn check_regular(&self, u: Vec2) -> Result<()> {
        let eps = self.polygon.vertex_tolerance();
        for (i, p) in self.polygon.points().iter().enumerate() {
            let d = u.dist(*p);
            if d < eps {
                return Err(Error::PotentialSingular { vertex: i, distance: d });
            }
        }
        Ok(())
    }

    /// `V(u) = A + Σᵢ 1/(2|u − pᵢ|)` on the plane `u₃ = 0`.
    pub fn potential(&self, u: Vec2) -> Result<f64> {
        self.check_regular(u)?;
        Ok(self.a + self.polygon.points().iter().map(|p| 0.5 / u.dist(*p)).sum::<f64>())
    }

    /// Analytic gradient of [`Self::potential`].
    pub fn potential_gradient(&self, u: Vec2) -> Result<Vec2> {
        self.check_regular(u)?;
        let mut g = Vec2::ZERO;
        for p in self.polygon.points() {
            let d = u - *p;
            let r = d.norm();
            g += (-0.5 / (r * r * r)) * d;
        }
        Ok(g)
    }
}

/// The map `R` from the `u`-plane to the `y`-plane: `∂u₁ ↦ −∂y₂`, `∂u₂ ↦ ∂y₁`.
pub fn rotate90(v: Vec2) -> Vec2 {
    Vec2::new(v.y, -v.x)
}

/// Rigid motion placing edge `i` on the line `{u₁ = 0}` with the polygon in
/// `{u₁ > 0}`.
///
/// `pᵢ` goes to the origin and `pᵢ₊₁` to `(0, −ℓᵢ)`: for a counterclockwise
/// polygon this is the only orientation-preserving choice that keeps the
/// interior on the positive side.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeFrame {
    pub edge: usize,
    /// Row-major rotation matrix.
    pub rotation: [[f64; 2]; 2],
    /// `pᵢ`, mapped to the origin.
    pub origin: Vec2,
    pub length: f64,
}

impl EdgeFrame {
    pub fn new(poly: &Polygon, i: usize) -> Result<Self> {
        if i >= poly.len() {
            return Err(Error::IndexOutOfRange { index: i, len: poly.len() });
        }
        let v = poly.edge_direction(i);
        let n = v.perp();
        Ok(EdgeFrame {
            edge: i,
            rotation: [[n.x, n.y], [-v.x, -v.y]],
            origin: poly.vertex(i),
            length: poly.edge_length(i),
        })
    }

    pub fn rotate(&self, v: Vec2) -> Vec2 {
        let r = &self.rotation;
        Vec2::new(r[0][0] * v.x + r[0][1] * v.y, r[1][0] * v.x + r[1][1] * v.y)
    }

    pub fn unrotate(&self, v: Vec2) -> Vec2 {
        let r = &self.rotation;
        Vec2::new(r[0][0] * v.x + r[1][0] * v.y, r[0][1] * v.x + r[1][1] * v.y)
    }

    /// Global point to edge-frame coordinates.
    pub fn to_frame(&self, x: Vec2) -> Vec2 {
        self.rotate(x - self.origin)
    }

    /// Edge-frame coordinates back to the global plane.
    pub fn from_frame(&self, x: Vec2) -> Vec2 {
        self.unrotate(x) + self.origin
    }
}

/// Shorthand for [`EdgeFrame::new`].
pub fn edge_frame(poly: &Polygon, i: usize) -> Result<EdgeFrame> {
    EdgeFrame::new(poly, i)
}

/// Cylinder offsets `cᵢ` and the vertex values `bᵢ` of the boundary trace.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace {
    c: Vec<f64>,
    b: Vec<f64>,
}

impl BoundaryTrace {
    /// `b₀ = 0` and `bᵢ₊₁ = bᵢ + cᵢ`; the cyclic closure needs `Σcᵢ = 0`.
    pub fn new(poly: &Polygon, c: &[f64]) -> Result<Self> {
        if c.len() != poly.len() {
            return Err(Error::LengthMismatch { expected: poly.len(), found: c.len() });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cylinder offsets"));
        }
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
        let tolerance = SUM_TOLERANCE * scale;
        let sum: f64 = c.iter().sum();
        if sum.abs() > tolerance {
            return Err(Error::ConstraintViolated { sum, tolerance });
        }
        let mut b = Vec::with_capacity(c.len());
        let mut acc = 0.0;
        for ci in c {
            b.push(acc);
            acc += ci;
        }
        Ok(BoundaryTrace { c: c.to_vec(), b })
    }

    /// Offsets after translating the `y`-plane by `t`: `cᵢ + (pᵢ₊₁ − pᵢ)·t`.
    pub fn translated_offsets(poly: &Polygon, c: &[f64], t: Vec2) -> Vec<f64> {
        c.iter()
            .enumerate()
            .map(|(i, ci)| {
                let (a, b) = poly.edge(i);
                ci + (b - a).dot(t)
            })
            .collect()
    }

    pub fn offsets(&self) -> &[f64] {
        &self.c
    }

    pub fn vertex_values(&self) -> &[f64] {
        &self.b
    }

    /// Affine interpolation of the vertex values along the boundary.
    pub fn eval(&self, poly: &Polygon, x: Vec2) -> Result<f64> {
        let eps_v = poly.vertex_tolerance();
        for (i, p) in poly.points().iter().enumerate() {
            if x.dist(*p) <= eps_v {
                return Ok(self.b[i]);
            }
        }
        let (i, t, dist) = poly.project_to_boundary(x);
        if dist > poly.boundary_tolerance() {
            return Err(Error::NotOnBoundary { distance: dist });
        }
        Ok(self.edge_value(i, t))
    }

    /// Value at parameter `t` on edge `i`, i.e. at `(1 − t)pᵢ + t pᵢ₊₁`.
    pub fn edge_value(&self, i: usize, t: f64) -> f64 {
        let n = self.b.len();
        (1.0 - t) * self.b[i % n] + t * self.b[(i + 1) % n]
    }
}

/// Shorthand for [`BoundaryTrace::new`].
pub fn boundary_trace(poly: &Polygon, c: &[f64]) -> Result<BoundaryTrace> {
    BoundaryTrace::new(poly, c)
}

/// Shorthand for [`BoundaryTrace::eval`].
pub fn trace_eval(trace: &BoundaryTrace, poly: &Polygon, x: Vec2) -> Result<f64> {
    trace.eval(poly, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const S3: f64 = 1.732_050_807_568_877_2;

    fn triangle() -> Polygon {
        Polygon::new(vec![
            Vec2::new(1.0, 0.0),
            Vec2::new(-0.5, S3 / 2.0),
            Vec2::new(-0.5, -S3 / 2.0),
        ])
        .unwrap()
    }

    fn square() -> Polygon {
        Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn validation_errors() {
        let cw = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        ];
        assert!(matches!(Polygon::new(cw), Err(Error::NotCounterclockwise { .. })));
        let collinear = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(matches!(Polygon::new(collinear), Err(Error::NotStrictlyConvex { .. })));
        let short = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)];
        assert!(matches!(Polygon::new(short), Err(Error::TooFewPoints { found: 2 })));
        let dup = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(matches!(Polygon::new(dup), Err(Error::DuplicateVertex { first: 1, second: 2 })));
        // a pentagram turns left at every vertex but winds twice
        let star: Vec<Vec2> = (0..5)
            .map(|k| {
                let t = 4.0 * core::f64::consts::PI * k as f64 / 5.0;
                Vec2::new(libm::cos(t), libm::sin(t))
            })
            .collect();
        assert!(matches!(Polygon::new(star), Err(Error::NotStrictlyConvex { .. })));
    }

    #[test]
    fn order_is_preserved() {
        let t = triangle();
        assert_eq!(t.vertex(1), Vec2::new(-0.5, S3 / 2.0));
        assert!((t.inradius() - 0.5).abs() < 1e-12);
        assert!(square().inradius() - 0.5 < 1e-12);
    }

    #[test]
    fn potential_values() {
        let t = triangle();
        let ale = GhParams::new(t.clone(), 0.0).unwrap();
        let alf = GhParams::new(t, 1.0).unwrap();
        assert!((ale.potential(Vec2::ZERO).unwrap() - 1.5).abs() < 1e-15);
        assert!((alf.potential(Vec2::ZERO).unwrap() - 2.5).abs() < 1e-15);
        // direct term-by-term evaluation at (1.01, 0)
        let far = libm::sqrt(1.51 * 1.51 + 0.75);
        let expected = 0.5 / 0.01 + 2.0 * 0.5 / far;
        let v = ale.potential(Vec2::new(1.01, 0.0)).unwrap();
        assert!((v - expected).abs() < 1e-12 * expected);
        assert!(matches!(
            ale.potential(Vec2::new(1.0, 1e-12)),
            Err(Error::PotentialSingular { vertex: 0, .. })
        ));
        assert!(GhParams::new(triangle(), -1.0).is_err());
    }

    #[test]
    fn potential_gradient_matches_central_differences() {
        let t = triangle();
        let gh = GhParams::new(t.clone(), 0.0).unwrap();
        let gh1 = GhParams::new(t, 1.0).unwrap();
        let g0 = gh.potential_gradient(Vec2::ZERO).unwrap();
        assert!(g0.norm() < 1e-14);
        let u = Vec2::new(0.5, 0.0);
        let g = gh.potential_gradient(u).unwrap();
        assert_eq!(g, gh1.potential_gradient(u).unwrap());
        let h = 1e-6;
        let fd = Vec2::new(
            (gh.potential(u + Vec2::new(h, 0.0)).unwrap() - gh.potential(u - Vec2::new(h, 0.0)).unwrap())
                / (2.0 * h),
            (gh.potential(u + Vec2::new(0.0, h)).unwrap() - gh.potential(u - Vec2::new(0.0, h)).unwrap())
                / (2.0 * h),
        );
        assert!((g - fd).norm() < 1e-7);
    }

    #[test]
    fn quarter_turn() {
        assert_eq!(rotate90(Vec2::new(1.0, 0.0)), Vec2::new(0.0, -1.0));
        assert_eq!(rotate90(Vec2::new(0.0, 1.0)), Vec2::new(1.0, 0.0));
        let v = Vec2::new(3.7, -1.2);
        assert_eq!(rotate90(rotate90(rotate90(rotate90(v)))), v);
    }

    #[test]
    fn edge_frames() {
        // edge 3 of the unit square runs down the u₁ = 0 axis
        let sq = square();
        let f = edge_frame(&sq, 3).unwrap();
        assert_eq!(f.rotation, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(f.to_frame(Vec2::new(0.0, 1.0)), Vec2::ZERO);

        let t = triangle();
        let f = edge_frame(&t, 0).unwrap();
        let a = f.to_frame(t.vertex(0));
        let b = f.to_frame(t.vertex(1));
        let c = f.to_frame(t.centroid());
        assert!(a.norm() < 1e-12 * f.length);
        assert!(b.x.abs() < 1e-12 && (b.y + f.length).abs() < 1e-12);
        assert!(c.x > 0.0);
        let r = f.rotation;
        assert!((r[0][0] * r[1][1] - r[0][1] * r[1][0] - 1.0).abs() < 1e-15);
        for p in t.points() {
            assert!(f.to_frame(*p).x >= -1e-12);
            assert!(f.from_frame(f.to_frame(*p)).dist(*p) < 1e-12);
        }
        assert!(matches!(edge_frame(&t, 3), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn traces() {
        let t = triangle();
        let zero = boundary_trace(&t, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(zero.vertex_values(), &[0.0, 0.0, 0.0]);
        let tr = boundary_trace(&t, &[1.0, -1.0, 0.0]).unwrap();
        assert_eq!(tr.vertex_values(), &[0.0, 1.0, 0.0]);
        assert!(matches!(
            boundary_trace(&t, &[1.0, 1.0, 1.0]),
            Err(Error::ConstraintViolated { .. })
        ));
        assert!(matches!(boundary_trace(&t, &[0.0, 0.0]), Err(Error::LengthMismatch { .. })));
        let (a, b) = t.edge(0);
        assert_eq!(trace_eval(&tr, &t, 0.5 * (a + b)).unwrap(), 0.5);
        assert_eq!(trace_eval(&tr, &t, b).unwrap(), 1.0);
        assert!(matches!(trace_eval(&tr, &t, Vec2::ZERO), Err(Error::NotOnBoundary { .. })));
        // both edges meeting at a vertex agree there
        for i in 0..3 {
            assert_eq!(tr.edge_value(i, 0.0), tr.edge_value(i + 2, 1.0));
        }
    }
}
