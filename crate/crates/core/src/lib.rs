#![no_std]

//! Numerical construction of the U(1)-invariant special Lagrangian "pair of
//! pants" in a Gibbons–Hawking space times the plane.
//!
//! After the circle reduction the special Lagrangian becomes the gradient graph
//! `y = ∇φ(u)` of a convex function on the monopole polygon, where `φ` solves the
//! real Monge–Ampère Dirichlet problem `det D²φ = V` with affine data on every
//! edge. This crate discretizes and solves that problem and checks its
//! consequences:
//!
//! * [`geometry`]: monopole polygon, Gibbons–Hawking potential, edge frames and
//!   the affine boundary trace built from the cylinder offsets `cᵢ`.
//! * [`grid`], [`scheme`], [`solver`]: lattice discretization, the monotone
//!   wide-stencil and compact nine-point operators, damped Newton.
//! * [`reconstruction`]: gradient graph, discrete special Lagrangian residuals,
//!   meshes, near-edge samples and boundary affinity.
//! * [`asymptotics`]: edge Sturm–Liouville ground states and decay-rate fits.
//! * [`topology`]: Euler characteristic of the quotient surface and the
//!   homeomorphism type of the total space.
//!
//! Everything here is `no_std` + `alloc`; file formats and the command line
//! live in the `slpants` crate.

extern crate alloc;

pub mod asymptotics;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod reconstruction;
pub mod scheme;
pub mod solver;
pub mod sparse;
pub mod topology;
mod vec2;

pub use error::Error;
pub use geometry::{BoundaryTrace, EdgeFrame, GhParams, Polygon};
pub use grid::{Field, Grid, Lattice};
pub use scheme::Scheme;
pub use solver::{SolveParams, SolveReport};
pub use vec2::Vec2;

pub type Result<T, E = Error> = core::result::Result<T, E>;
