//! Topology of the quotient surface and of the total space.
//!
//! A U(1)-invariant special Lagrangian with quotient surface of genus `g`,
//! `b` circle boundaries and `n` ends is homeomorphic to `S³` minus `n`
//! points when `2g + b = 0` and to `#_{2g+b}(S²×S¹)` minus `n` points
//! otherwise.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::reconstruction::GraphMesh;
use crate::{Error, Result};

/// Genus, circle boundary count and end count of the quotient surface.
///
/// Signed so that invalid input can be reported instead of wrapping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuotientTopology {
    pub g: i64,
    pub b: i64,
    pub n: i64,
}

impl QuotientTopology {
    pub fn new(g: i64, b: i64, n: i64) -> Result<Self> {
        let t = Self { g, b, n };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.g < 0 || self.b < 0 || self.n < 3 {
            return Err(Error::InvalidTopology);
        }
        Ok(())
    }
}

/// Homeomorphism type of the total space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TotalSpace {
    /// Number of `S²×S¹` summands, `2g + b`.
    pub summands: i64,
    /// Connected-sum count `2g + h − 1` with `h = 1 + b` fixed-point sets.
    pub raymond_count: i64,
    pub punctures: i64,
    pub descriptor: String,
}

impl TotalSpace {
    pub fn is_punctured_sphere(&self) -> bool {
        self.summands == 0
    }
}

fn subscript(k: i64) -> String {
    const DIGITS: [char; 10] = ['₀', '₁', '₂', '₃', '₄', '₅', '₆', '₇', '₈', '₉'];
    format!("{k}").chars().map(|c| DIGITS[c as usize - '0' as usize]).collect()
}

pub fn classify_total_space(t: &QuotientTopology) -> Result<TotalSpace> {
    t.validate()?;
    let summands = 2 * t.g + t.b;
    let h = 1 + t.b;
    let descriptor = if summands == 0 {
        format!("S³ minus {} points", t.n)
    } else {
        format!("#{}(S²×S¹) minus {} points", subscript(summands), t.n)
    };
    Ok(TotalSpace { summands, raymond_count: 2 * t.g + h - 1, punctures: t.n, descriptor })
}

/// Combinatorial data of a triangulated surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SurfaceCounts {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler: i64,
    pub boundary_cycles: usize,
}

/// Counts `V − E + F` and boundary cycles of an oriented triangle list.
///
/// Only vertices referenced by a triangle count. Fails on an edge shared by
/// more than two triangles, an edge traversed twice in the same direction,
/// or a vertex whose link is not a single arc or circle.
pub fn surface_counts(triangles: &[[u32; 3]]) -> Result<SurfaceCounts> {
    if triangles.is_empty() {
        return Err(Error::EmptyMesh);
    }
    // directed edge -> use count
    let mut directed: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    let mut verts: BTreeMap<u32, usize> = BTreeMap::new();
    for t in triangles {
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            return Err(Error::NonManifoldMesh("degenerate triangle"));
        }
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let c = directed.entry((a, b)).or_insert(0);
            *c += 1;
            if *c > 1 {
                return Err(Error::NonManifoldMesh("inconsistent orientation"));
            }
            *verts.entry(a).or_insert(0) += 1;
        }
    }
    let mut edges = 0;
    let mut boundary: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &(a, b) in directed.keys() {
        let reverse = directed.contains_key(&(b, a));
        if !reverse {
            boundary.entry(a).or_default().push(b);
            edges += 1;
        } else if a < b {
            edges += 1;
        }
    }
    // an edge in three faces repeats a direction, so each edge has at most two

    // vertex links: at each vertex the faces form one fan
    let mut fan_next: BTreeMap<u32, BTreeMap<u32, u32>> = BTreeMap::new();
    for t in triangles {
        for k in 0..3 {
            let v = t[k];
            fan_next.entry(v).or_default().insert(t[(k + 1) % 3], t[(k + 2) % 3]);
        }
    }
    for links in fan_next.values() {
        let starts: Vec<u32> = links.keys().copied().filter(|a| !links.values().any(|b| b == a)).collect();
        let start = match starts.len() {
            0 => *links.keys().next().unwrap(),
            1 => starts[0],
            _ => return Err(Error::NonManifoldMesh("bowtie vertex")),
        };
        let mut seen = 0;
        let mut cur = start;
        while let Some(&next) = links.get(&cur) {
            seen += 1;
            cur = next;
            if cur == start || seen > links.len() {
                break;
            }
        }
        if seen != links.len() {
            return Err(Error::NonManifoldMesh("bowtie vertex"));
        }
    }

    let mut cycles = 0;
    let mut visited: BTreeMap<(u32, u32), bool> = BTreeMap::new();
    for (&a, outs) in &boundary {
        if outs.len() > 1 {
            return Err(Error::NonManifoldMesh("bowtie vertex"));
        }
        let b = outs[0];
        if visited.contains_key(&(a, b)) {
            continue;
        }
        cycles += 1;
        let (mut x, mut y) = (a, b);
        loop {
            visited.insert((x, y), true);
            let next = match boundary.get(&y) {
                Some(o) => o[0],
                None => return Err(Error::NonManifoldMesh("open boundary chain")),
            };
            x = y;
            y = next;
            if visited.contains_key(&(x, y)) {
                break;
            }
        }
    }
    let vertices = verts.len();
    let faces = triangles.len();
    Ok(SurfaceCounts {
        vertices,
        edges,
        faces,
        euler: vertices as i64 - edges as i64 + faces as i64,
        boundary_cycles: cycles,
    })
}

/// Quotient topology from a triangle list. `b` counts boundary cycles beyond
/// the outer one.
pub fn measure_triangles(triangles: &[[u32; 3]], n: i64) -> Result<(QuotientTopology, SurfaceCounts)> {
    let c = surface_counts(triangles)?;
    let twice_g = 2 - c.euler - c.boundary_cycles as i64;
    if twice_g < 0 || twice_g % 2 != 0 || c.boundary_cycles == 0 {
        return Err(Error::InvalidTopology);
    }
    let t = QuotientTopology::new(twice_g / 2, c.boundary_cycles as i64 - 1, n)?;
    Ok((t, c))
}

pub fn measure_quotient(mesh: &GraphMesh, n: i64) -> Result<(QuotientTopology, SurfaceCounts)> {
    measure_triangles(&mesh.triangles, n)
}

/// Triangulated annulus with `k` segments around, for testing.
pub fn annulus(k: u32) -> Vec<[u32; 3]> {
    let mut t = vec![];
    for i in 0..k {
        let j = (i + 1) % k;
        // inner ring 0..k, outer ring k..2k
        t.push([i, k + i, k + j]);
        t.push([i, k + j, j]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_classifications() {
        let c = |g, b, n| classify_total_space(&QuotientTopology::new(g, b, n).unwrap()).unwrap().descriptor;
        assert_eq!(c(0, 0, 3), "S³ minus 3 points");
        assert_eq!(c(1, 0, 3), "#₂(S²×S¹) minus 3 points");
        assert_eq!(c(0, 2, 4), "#₂(S²×S¹) minus 4 points");
        assert_eq!(c(3, 6, 5), "#₁₂(S²×S¹) minus 5 points");
        assert!(QuotientTopology::new(-1, 0, 3).is_err());
        assert!(QuotientTopology::new(0, 0, 2).is_err());
    }

    #[test]
    fn single_triangle_and_annulus() {
        let (t, c) = measure_triangles(&[[0, 1, 2]], 3).unwrap();
        assert_eq!((c.euler, c.boundary_cycles, t.g, t.b), (1, 1, 0, 0));
        for k in 3..8 {
            let (t, c) = measure_triangles(&annulus(k), 3).unwrap();
            assert_eq!((c.euler, c.boundary_cycles, t.g, t.b), (0, 2, 0, 1));
        }
    }

    #[test]
    fn closed_surface_is_rejected_and_orientation_checked() {
        // boundary of a tetrahedron: χ = 2, no boundary
        let tet = [[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]];
        let c = surface_counts(&tet).unwrap();
        assert_eq!((c.euler, c.boundary_cycles), (2, 0));
        assert!(measure_triangles(&tet, 3).is_err());
        assert!(matches!(surface_counts(&[[0, 1, 2], [0, 1, 3]]), Err(Error::NonManifoldMesh(_))));
        assert!(matches!(surface_counts(&[[0, 1, 2], [1, 0, 3], [0, 1, 4]]), Err(Error::NonManifoldMesh(_))));
        // two triangles sharing only a vertex
        assert!(matches!(surface_counts(&[[0, 1, 2], [0, 3, 4]]), Err(Error::NonManifoldMesh(_))));
    }
}
