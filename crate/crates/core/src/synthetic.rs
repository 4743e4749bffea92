//! Two-point problems used to break individual hypotheses.
//!
//! All of them live on the grid `L = 0.5, dx = 1` (two points), state
//! ordered `(u0, u1, v0, v1)`, with `A` a rotation `(u, v) ↦ (-ω v, ω u)` at
//! each point.

use std::sync::Arc;

use crate::linalg::SparseMatrix;
use crate::periodic_space::Grid;
use crate::problem::{CubicReaction, ProblemDef};

pub fn two_point_grid() -> Grid {
    Grid::new(0.5, 1.0).expect("valid grid")
}

/// Rotation with frequency `omega[j]` at grid point `j`.
pub fn rotation_operator(omega: &[f64]) -> SparseMatrix {
    let nx = omega.len();
    let mut t = Vec::with_capacity(2 * nx);
    for (j, &w) in omega.iter().enumerate() {
        t.push((j, j + nx, -w));
        t.push((j + nx, j, w));
    }
    SparseMatrix::from_triplets(2 * nx, 2 * nx, &t)
}

fn build(name: &str, omega: [f64; 2], weight: [f64; 2]) -> ProblemDef {
    let h = CubicReaction { weight: weight.to_vec(), cubic: 1.0 };
    ProblemDef::new(name, two_point_grid(), rotation_operator(&omega), Arc::new(h)).expect("consistent shapes")
}

/// `±i` with multiplicity two.
pub fn double_eigenvalue() -> ProblemDef {
    build("synthetic double eigenvalue", [1.0, 1.0], [1.0, 1.0])
}

/// Simple `±i`, plus `±2i` in the spectrum.
pub fn resonant_2i() -> ProblemDef {
    build("synthetic eigenvalue at 2i", [1.0, 2.0], [1.0, 0.0])
}

/// Simple `±i` and no other resonance: the well-posed two-point reference.
pub fn simple_rotation() -> ProblemDef {
    build("synthetic simple rotation", [1.0, 3.5], [1.0, 0.0])
}
