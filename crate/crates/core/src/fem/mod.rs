//! P1 finite elements for the Helmholtz problem.

pub mod assembly;
pub mod functional;
pub mod problem;
pub mod snapshot;
pub mod solve;

pub use assembly::{assemble_system, AssembledSystem, SparseMatrix};
pub use functional::{
    apply_linear_functional, apply_quadratic_functional, curve_edges, curve_length, Curve, LinearFunctional,
};
pub use problem::{
    cavity_problem, plate_load, plate_problem, preset, triangle_problem, FrequencyConvention, QoiKind, WaveProblem,
};
pub use snapshot::{IterationRecord, Snapshot, SnapshotDocument, SnapshotStatus};
pub use solve::{solve, solve_with_report, SolveReport, RCOND_THRESHOLD};

use num_complex::Complex64 as C64;

use crate::error::FemError;
use crate::mesh::Point;

/// P1 interpolation of a snapshot at the given points.
pub fn evaluate_solution(snapshot: &Snapshot, points: &[Point]) -> Result<Vec<C64>, FemError> {
    snapshot.evaluate(points)
}
