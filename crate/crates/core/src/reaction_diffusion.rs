//! Two-field reaction–diffusion system on a truncated line,
//!
//! ```text
//! u_t = u_xx - v - ρ u + u (λκ² - u² - v²) [+ (u² u_x)_x]
//! v_t = v_xx + u - ρ v + v (λκ² - u² - v²) [+ (v² v_x)_x]
//! ```
//!
//! with `κ(x) = sech(x/2)` and `ρ(x) = (2 tanh²(x/2) - 1)/4`, so that
//! `κ'' = ρκ`. The semilinear variant has the circular periodic branch
//! `(u, v) = √λ κ (cos t, sin t)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::linalg::SparseMatrix;
use crate::periodic_space::{Grid, StateVector};
use crate::problem::{dirichlet_laplacian, CubicReaction, Nonlinearity, ProblemDef, QuasilinearDiffusion, SumNonlinearity};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Semilinear,
    Quasilinear,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Dirichlet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleConfig {
    pub variant: Variant,
    pub half_length: f64,
    pub dx: f64,
    /// Replace ρ by `D₂κ_h / κ_h` so that the discrete identities hold exactly.
    pub consistent_rho: bool,
    pub boundary: Boundary,
    /// Drop the `λκ²` term (breaks transversality).
    pub zero_lambda_coupling: bool,
}

impl Default for ExampleConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Semilinear,
            half_length: 30.0,
            dx: 0.05,
            consistent_rho: false,
            boundary: Boundary::Dirichlet,
            zero_lambda_coupling: false,
        }
    }
}

impl ExampleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_length >= 20.0 && self.half_length.is_finite()) {
            return Err(HopfError::Config(format!("half length {} must be at least 20", self.half_length)));
        }
        if !(self.dx > 0.0 && self.dx <= 0.2) {
            return Err(HopfError::Config(format!("dx = {} must lie in (0, 0.2]", self.dx)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.half_length, self.dx)
    }
}

pub fn kappa(x: f64) -> f64 {
    1.0 / (0.5 * x).cosh()
}

pub fn rho(x: f64) -> f64 {
    (2.0 * (0.5 * x).tanh().powi(2) - 1.0) / 4.0
}

pub fn kappa_on(grid: &Grid) -> Vec<f64> {
    grid.points().into_iter().map(kappa).collect()
}

/// Potential used in the operator: the continuum ρ, or the gridwise
/// `D₂κ_h / κ_h`.
pub fn rho_on(grid: &Grid, consistent: bool) -> Vec<f64> {
    if consistent {
        let k = kappa_on(grid);
        let d2k = dirichlet_laplacian(grid.nx, grid.dx).matvec(&k);
        d2k.iter().zip(&k).map(|(a, b)| a / b).collect()
    } else {
        grid.points().into_iter().map(rho).collect()
    }
}

/// `A(u, v) = (D₂u - v - ρu, D₂v + u - ρv)`.
pub fn assemble_operator(grid: &Grid, rho: &[f64]) -> SparseMatrix {
    let nx = grid.nx;
    let d2 = dirichlet_laplacian(nx, grid.dx);
    let mut t = Vec::with_capacity(2 * d2.nnz() + 4 * nx);
    for (r, c, v) in d2.iter() {
        t.push((r, c, v));
        t.push((r + nx, c + nx, v));
    }
    for (j, r) in rho.iter().enumerate() {
        t.push((j, j, -r));
        t.push((j + nx, j + nx, -r));
        t.push((j, j + nx, -1.0));
        t.push((j + nx, j, 1.0));
    }
    SparseMatrix::from_triplets(2 * nx, 2 * nx, &t)
}

/// `h(λ, u, v) = (u, v)(λκ² - u² - v²)`, or without the `λκ²` term.
pub fn semilinear_h(grid: &Grid, zero_lambda_coupling: bool) -> CubicReaction {
    let weight = if zero_lambda_coupling { vec![0.0; grid.nx] } else { kappa_on(grid).into_iter().map(|k| k * k).collect() };
    CubicReaction { weight, cubic: 1.0 }
}

/// `((u² u_x)_x, (v² v_x)_x)`.
pub fn quasilinear_h1(grid: &Grid) -> QuasilinearDiffusion {
    QuasilinearDiffusion::new(grid)
}

pub fn make_problem(cfg: &ExampleConfig) -> Result<ProblemDef> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let a = assemble_operator(&grid, &rho_on(&grid, cfg.consistent_rho));
    let reaction = semilinear_h(&grid, cfg.zero_lambda_coupling);
    let (name, h): (&str, Arc<dyn Nonlinearity>) = match cfg.variant {
        Variant::Semilinear => ("reaction-diffusion (semilinear)", Arc::new(reaction)),
        Variant::Quasilinear => (
            "reaction-diffusion (quasilinear)",
            Arc::new(SumNonlinearity { parts: vec![Box::new(reaction), Box::new(quasilinear_h1(&grid))] }),
        ),
    };
    ProblemDef::new(name, grid, a, h)
}

/// `√λ κ_h (cos t, sin t)`.
pub fn exact_branch(grid: &Grid, lambda: f64, t: f64) -> Result<StateVector> {
    if !(lambda >= 0.0) {
        return Err(HopfError::Domain(format!("the exact branch needs λ >= 0, got {lambda}")));
    }
    let k = kappa_on(grid);
    let a = lambda.sqrt();
    let u: Vec<f64> = k.iter().map(|x| a * x * t.cos()).collect();
    let v: Vec<f64> = k.iter().map(|x| a * x * t.sin()).collect();
    StateVector::from_fields(*grid, &u, &v)
}

/// `(κ_h, -iκ_h)`, the eigenvector of `A` for `i` in the continuum.
pub fn critical_mode(grid: &Grid) -> crate::periodic_space::ComplexStateVector {
    let k = kappa_on(grid);
    let z: Vec<num_complex::Complex64> =
        k.iter().map(|&x| num_complex::Complex64::new(x, 0.0)).chain(k.iter().map(|&x| num_complex::Complex64::new(0.0, -x))).collect();
    crate::periodic_space::ComplexStateVector::from_complex(*grid, &z).expect("grid-shaped")
}
