//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use hopf_core::linear_periodic::ResonantScalarPath;
use hopf_core::periodic_space::{time_derivative, Grid, PeriodicTrajectory};
use hopf_core::problem::ProblemDef;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Random trajectory with modes only in `2..=n_t`.
pub fn random_nonresonant(grid: Grid, n_t: usize, rng: &mut ChaCha8Rng) -> PeriodicTrajectory {
    let modes = (0..=n_t)
        .map(|n| {
            (0..grid.dim())
                .map(|_| if n < 2 { ZERO } else { Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) })
                .collect()
        })
        .collect();
    PeriodicTrajectory::from_modes(grid, modes).unwrap()
}

pub fn forcing_of(p: &ProblemDef, u: &PeriodicTrajectory) -> PeriodicTrajectory {
    time_derivative(u).sub(&u.map_space(|z| p.a().matvec_complex(z)))
}

pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|k| {
            let mut x = (PI * (k as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `c(t) = e^{it}(Φ(t) - mean Φ)` with `Φ(t) = ∫_0^t e^{-is} g(s) ds`.
pub fn variation_of_constants(g: &ResonantScalarPath, ts: &[f64]) -> Vec<Complex64> {
    let rule = gauss_legendre(40);
    let phi = |t: f64| -> Complex64 {
        rule.iter()
            .map(|&(x, w)| {
                let s = 0.5 * t * (x + 1.0);
                0.5 * t * w * Complex64::from_polar(1.0, -s) * g.eval(s)
            })
            .sum()
    };
    let m = 64;
    let mean: Complex64 = (0..m).map(|k| phi(2.0 * PI * k as f64 / m as f64)).sum::<Complex64>() / m as f64;
    ts.iter().map(|&t| Complex64::from_polar(1.0, t) * (phi(t) - mean)).collect()
}

/// Random resonant forcing with `ĝ(1) = 0`.
pub fn random_resonant_forcing(n_t: usize, rng: &mut ChaCha8Rng) -> ResonantScalarPath {
    let coeffs = (-(n_t as i64)..=n_t as i64)
        .map(|n| if n == 1 { ZERO } else { Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) })
        .collect();
    ResonantScalarPath::from_coeffs(coeffs).unwrap()
}
