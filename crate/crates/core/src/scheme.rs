//! Discrete Monge–Ampère operators and their Newton Jacobians.
//!
//! Both operators are built from the normalized directional second
//! difference along a stencil direction `e`,
//!
//! ```text
//! Δ²ₑφ(x) = 2/(h₊+h₋) · [(φ₊ − φ₀)/h₊ + (φ₋ − φ₀)/h₋],
//! ```
//!
//! with arm lengths `h±` shortened at the boundary. It is exact on quadratics.

use alloc::vec::Vec;

use crate::geometry::GhParams;
use crate::grid::{Field, Grid, Neighbor};
use crate::sparse::Csr;
use crate::{Result, Vec2};

/// Weight of the negative parts in the monotone operator.
pub const PENALTY: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    /// `min` over orthogonal pairs of `(Δ²ₑφ)⁺(Δ²ₑ⊥φ)⁺ − (Δ²ₑφ)⁻ − (Δ²ₑ⊥φ)⁻`.
    #[default]
    Monotone,
    /// `φ₁₁φ₂₂ − φ₁₂²` from the compact Hessian stencil.
    NinePoint,
}

/// Right-hand side `V` of `det D²φ = V`.
pub trait Source {
    fn value(&self, x: Vec2) -> Result<f64>;

    /// `false` for testing hooks.
    fn is_geometric(&self) -> bool {
        false
    }

    /// `true` when values are clipped by a cap.
    fn is_capped(&self) -> bool {
        false
    }
}

impl Source for GhParams {
    fn value(&self, x: Vec2) -> Result<f64> {
        self.potential(x)
    }

    fn is_geometric(&self) -> bool {
        true
    }
}

/// Constant `V ≡ V₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantSource(pub f64);

impl Source for ConstantSource {
    fn value(&self, _: Vec2) -> Result<f64> {
        Ok(self.0)
    }
}

/// Arbitrary `V` (manufactured solutions).
pub struct FnSource<F>(pub F);

impl<F: Fn(Vec2) -> f64> Source for FnSource<F> {
    fn value(&self, x: Vec2) -> Result<f64> {
        Ok((self.0)(x))
    }
}

/// `min(V, cap)`.
pub struct Capped<S> {
    pub inner: S,
    pub cap: f64,
}

impl<S: Source> Source for Capped<S> {
    fn value(&self, x: Vec2) -> Result<f64> {
        Ok(self.inner.value(x)?.min(self.cap))
    }

    fn is_geometric(&self) -> bool {
        self.inner.is_geometric()
    }

    fn is_capped(&self) -> bool {
        true
    }
}

/// `V` at every node.
pub fn sample_source(grid: &Grid, src: &dyn Source) -> Result<Vec<f64>> {
    grid.nodes().iter().map(|x| src.value(*x)).collect()
}

/// Normalized second difference of `phi` along direction `k` at node `n`.
#[inline]
pub fn second_difference(grid: &Grid, phi: &Field, n: usize, k: usize) -> f64 {
    let arm = grid.arm(n, k);
    let (wf, wb) = arm.second_difference_weights();
    let c = phi.values[n];
    wf * (phi.at(arm.forward) - c) + wb * (phi.at(arm.backward) - c)
}

/// `(H₁₁, H₁₂, H₂₂)` from the compact Hessian stencil.
pub fn hessian(grid: &Grid, phi: &Field, n: usize) -> [f64; 3] {
    let mut h = [0.0; 3];
    for &(k, w11, w12, w22) in &grid.stencil().hessian.terms {
        let d = second_difference(grid, phi, n, k);
        h[0] += w11 * d;
        h[1] += w12 * d;
        h[2] += w22 * d;
    }
    h
}

#[inline]
fn frame_value(p: f64, q: f64) -> f64 {
    p.max(0.0) * q.max(0.0) - PENALTY * ((-p).max(0.0) + (-q).max(0.0))
}

/// Generalized derivative of [`frame_value`] with respect to `(p, q)`.
#[inline]
fn frame_derivative(p: f64, q: f64) -> (f64, f64) {
    match (p > 0.0, q > 0.0) {
        (true, true) => (q, p),
        (true, false) => (0.0, PENALTY),
        (false, true) => (PENALTY, 0.0),
        (false, false) => (PENALTY, PENALTY),
    }
}

/// Active frame and operator value of the monotone scheme at node `n`.
fn monotone_at(grid: &Grid, phi: &Field, n: usize, d: &mut [f64]) -> (usize, f64) {
    for (k, slot) in d.iter_mut().enumerate() {
        *slot = second_difference(grid, phi, n, k);
    }
    let mut best = (0, f64::INFINITY);
    for (j, &[a, b]) in grid.stencil().pairs.iter().enumerate() {
        let v = frame_value(d[a], d[b]);
        if v < best.1 {
            best = (j, v);
        }
    }
    best
}

/// Operator used at node `n`: `fallback[n]` switches a nine-point node to the
/// monotone operator; an empty mask switches nothing.
#[inline]
fn local_scheme(scheme: Scheme, fallback: &[bool], n: usize) -> Scheme {
    if fallback.get(n).copied().unwrap_or(false) {
        Scheme::Monotone
    } else {
        scheme
    }
}

/// `MAₕ[φ]` at every node.
pub fn ma_operator(grid: &Grid, phi: &Field, scheme: Scheme) -> Vec<f64> {
    operator_with(grid, phi, scheme, &[])
}

/// `MAₕ[φ]` with the monotone operator at the nodes flagged in `fallback`.
pub fn operator_with(grid: &Grid, phi: &Field, scheme: Scheme, fallback: &[bool]) -> Vec<f64> {
    let mut d = alloc::vec![0.0; grid.stencil().len()];
    (0..grid.len())
        .map(|n| match local_scheme(scheme, fallback, n) {
            Scheme::Monotone => monotone_at(grid, phi, n, &mut d).1,
            Scheme::NinePoint => {
                let [a, b, c] = hessian(grid, phi, n);
                a * c - b * b
            }
        })
        .collect()
}

/// `MAₕ[φ] − V` at every node.
pub fn ma_residual(grid: &Grid, phi: &Field, src: &dyn Source, scheme: Scheme) -> Result<Vec<f64>> {
    let v = sample_source(grid, src)?;
    Ok(residual_with(grid, phi, &v, scheme, &[]))
}

pub(crate) fn residual_with(grid: &Grid, phi: &Field, v: &[f64], scheme: Scheme, fallback: &[bool]) -> Vec<f64> {
    let mut r = operator_with(grid, phi, scheme, fallback);
    for (ri, vi) in r.iter_mut().zip(v) {
        *ri -= vi;
    }
    r
}

fn push_difference(grid: &Grid, n: usize, k: usize, scale: f64, row: &mut Vec<(u32, f64)>) {
    if scale == 0.0 {
        return;
    }
    let arm = grid.arm(n, k);
    let (wf, wb) = arm.second_difference_weights();
    row.push((n as u32, -scale * (wf + wb)));
    if let Neighbor::Interior(m) = arm.forward {
        row.push((m, scale * wf));
    }
    if let Neighbor::Interior(m) = arm.backward {
        row.push((m, scale * wb));
    }
}

/// Jacobian of `MAₕ` with respect to the nodal values. For the monotone
/// scheme this is the generalized derivative of the active frame; its
/// negative has positive diagonal and nonpositive off-diagonal entries.
pub fn ma_jacobian(grid: &Grid, phi: &Field, scheme: Scheme) -> Csr {
    jacobian_with(grid, phi, scheme, &[])
}

/// Jacobian of [`operator_with`].
pub fn jacobian_with(grid: &Grid, phi: &Field, scheme: Scheme, fallback: &[bool]) -> Csr {
    let nd = grid.stencil().len();
    let per_row = match scheme {
        Scheme::Monotone => 5,
        Scheme::NinePoint => 1 + 2 * grid.stencil().hessian.terms.len(),
    };
    let mut jac = Csr::with_capacity(grid.len(), grid.len() * per_row);
    let mut row = Vec::with_capacity(per_row + 4);
    let mut d = alloc::vec![0.0; nd];
    for n in 0..grid.len() {
        match local_scheme(scheme, fallback, n) {
            Scheme::Monotone => {
                let (j, _) = monotone_at(grid, phi, n, &mut d);
                let [a, b] = grid.stencil().pairs[j];
                let (da, db) = frame_derivative(d[a], d[b]);
                push_difference(grid, n, a, da, &mut row);
                push_difference(grid, n, b, db, &mut row);
            }
            Scheme::NinePoint => {
                let [h11, h12, h22] = hessian(grid, phi, n);
                for &(k, w11, w12, w22) in &grid.stencil().hessian.terms {
                    let s = h22 * w11 + h11 * w22 - 2.0 * h12 * w12;
                    push_difference(grid, n, k, s, &mut row);
                }
            }
        }
        jac.push_row(&mut row);
    }
    jac
}

/// `true` when the compact Hessian at node `n` is positive definite.
pub fn compact_hessian_is_convex(grid: &Grid, phi: &Field, n: usize) -> bool {
    let [a, b, c] = hessian(grid, phi, n);
    a > 0.0 && c > 0.0 && a * c - b * b > 0.0
}

/// Minimum normalized second difference over all nodes and directions, and
/// the node attaining it.
pub fn convexity_check(grid: &Grid, phi: &Field) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for n in 0..grid.len() {
        for k in 0..grid.stencil().len() {
            let d = second_difference(grid, phi, n, k);
            if d < best.0 {
                best = (d, n);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;
    use crate::grid::{build_grid, Lattice};
    use alloc::vec;

    fn square() -> Polygon {
        Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap()
    }

    fn triangle() -> Polygon {
        let s = libm::sqrt(3.0) / 2.0;
        Polygon::new(vec![Vec2::new(1.0, 0.0), Vec2::new(-0.5, s), Vec2::new(-0.5, -s)]).unwrap()
    }

    #[test]
    fn quadratics_are_reproduced() {
        for (poly, lattice) in [(square(), Lattice::Square), (triangle(), Lattice::Hexagonal), (triangle(), Lattice::Square)] {
            let g = crate::Grid::new(&poly, 0.07, 3, lattice).unwrap();
            let phi = Field::from_fn(&g, |x| 0.5 * x.norm_sq());
            for scheme in [Scheme::Monotone, Scheme::NinePoint] {
                let r = ma_residual(&g, &phi, &ConstantSource(1.0), scheme).unwrap();
                assert!(r.iter().all(|v| v.abs() < 1e-9), "{lattice:?} {scheme:?}");
            }
            let rank1 = Field::from_fn(&g, |x| 0.5 * x.x * x.x);
            let r = ma_residual(&g, &rank1, &ConstantSource(1.0), Scheme::NinePoint).unwrap();
            assert!(r.iter().all(|v| (v + 1.0).abs() < 1e-9));
            let r = ma_residual(&g, &rank1, &ConstantSource(1.0), Scheme::Monotone).unwrap();
            assert!(r.iter().all(|v| (v + 1.0).abs() < 1e-9));
            let q = Field::from_fn(&g, |x| 1.3 * x.x * x.x + 0.4 * x.x * x.y + 0.7 * x.y * x.y);
            for n in 0..g.len() {
                let [a, b, c] = hessian(&g, &q, n);
                assert!((a - 2.6).abs() < 1e-8 && (b - 0.4).abs() < 1e-8 && (c - 1.4).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn convexity_margin_signs() {
        let g = build_grid(&square(), 0.1, 3).unwrap();
        let (m, _) = convexity_check(&g, &Field::from_fn(&g, |x| 0.5 * x.norm_sq()));
        assert!((m - 1.0).abs() < 1e-9);
        let (m, _) = convexity_check(&g, &Field::from_fn(&g, |x| -0.5 * x.norm_sq()));
        assert!((m + 1.0).abs() < 1e-9);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = crate::Grid::new(&triangle(), 0.2, 2, Lattice::Hexagonal).unwrap();
        let phi = Field::from_fn(&g, |x| 0.5 * x.norm_sq() + 0.1 * libm::sin(3.0 * x.x) * x.y);
        for scheme in [Scheme::Monotone, Scheme::NinePoint] {
            let jac = ma_jacobian(&g, &phi, scheme);
            let base = ma_operator(&g, &phi, scheme);
            for m in 0..g.len() {
                let mut p = phi.clone();
                let eps = 1e-7;
                p.values[m] += eps;
                let pert = ma_operator(&g, &p, scheme);
                for n in 0..g.len() {
                    let fd = (pert[n] - base[n]) / eps;
                    assert!((fd - jac.get(n, m)).abs() < 1e-4 * (1.0 + fd.abs()), "{scheme:?} {n} {m}");
                }
            }
        }
    }
}
