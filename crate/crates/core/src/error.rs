use alloc::boxed::Box;
use core::fmt;

use crate::grid::Field;
use crate::solver::SolveReport;

/// Every failure the core library can report.
#[derive(Debug, Clone)]
pub enum Error {
    TooFewPoints { found: usize },
    DuplicateVertex { first: usize, second: usize },
    NotCounterclockwise { signed_area: f64 },
    NotStrictlyConvex { vertex: usize },
    NonFinite(&'static str),
    InvalidParameter(&'static str),
    PotentialSingular { vertex: usize, distance: f64 },
    IndexOutOfRange { index: usize, len: usize },
    LengthMismatch { expected: usize, found: usize },
    ConstraintViolated { sum: f64, tolerance: f64 },
    NotOnBoundary { distance: f64 },
    SpacingTooCoarse { h: f64 },
    /// The Newton iteration hit `max_iter`; carries the last iterate and the
    /// report with its residual history.
    NonConvergence(Box<(Field, SolveReport)>),
    SingularJacobian { iteration: usize },
    TriangulationFailed(&'static str),
    EmptyMesh,
    InsufficientResolution { found: usize },
    OutsideStrip { u2: f64 },
    EigenFailure { iterations: usize },
    NonPositiveGroundState { index: usize },
    NotDecaying { slope: f64 },
    WindowTooSmall { found: usize },
    InvalidTopology,
    NonManifoldMesh(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Error::*;
        match self {
            TooFewPoints { found } => write!(f, "polygon needs at least 3 points, got {found}"),
            DuplicateVertex { first, second } => {
                write!(f, "vertices {first} and {second} coincide")
            }
            NotCounterclockwise { signed_area } => {
                write!(f, "polygon is not counterclockwise (signed area {signed_area:e})")
            }
            NotStrictlyConvex { vertex } => {
                write!(f, "polygon is not strictly convex at vertex {vertex}")
            }
            NonFinite(what) => write!(f, "non-finite value in {what}"),
            InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            PotentialSingular { vertex, distance } => write!(
                f,
                "potential evaluated at distance {distance:e} from monopole point {vertex}"
            ),
            IndexOutOfRange { index, len } => write!(f, "index {index} out of range 0..{len}"),
            LengthMismatch { expected, found } => {
                write!(f, "expected {expected} values, got {found}")
            }
            ConstraintViolated { sum, tolerance } => write!(
                f,
                "cylinder offsets must satisfy sum c_i = 0 (sum = {sum:e}, tolerance {tolerance:e})"
            ),
            NotOnBoundary { distance } => {
                write!(f, "point lies {distance:e} away from the polygon boundary")
            }
            SpacingTooCoarse { h } => write!(f, "grid spacing {h} leaves no interior nodes"),
            NonConvergence(b) => write!(
                f,
                "Newton iteration did not converge in {} iterations (residual {:e})",
                b.1.iterations, b.1.residual
            ),
            SingularJacobian { iteration } => {
                write!(f, "singular Jacobian at Newton iteration {iteration}")
            }
            TriangulationFailed(why) => write!(f, "triangulation failed: {why}"),
            EmptyMesh => write!(f, "mesh has no triangles"),
            InsufficientResolution { found } => {
                write!(f, "only {found} samples inside the sampling strip (need 4)")
            }
            OutsideStrip { u2 } => {
                write!(f, "transverse coordinate {u2} is outside the middle 60% of the edge")
            }
            EigenFailure { iterations } => {
                write!(f, "inverse iteration did not converge in {iterations} steps")
            }
            NonPositiveGroundState { index } => {
                write!(f, "ground state changes sign at sample {index}")
            }
            NotDecaying { slope } => write!(f, "samples do not decay (log slope {slope})"),
            WindowTooSmall { found } => {
                write!(f, "only {found} samples inside the fit window (need 4)")
            }
            InvalidTopology => write!(f, "invalid topology data"),
            NonManifoldMesh(why) => write!(f, "mesh is not a manifold: {why}"),
        }
    }
}

impl core::error::Error for Error {}
