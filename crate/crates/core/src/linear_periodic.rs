//! Periodic solutions of the linear problem `u_t - A u = v`.
//!
//! Forcing without modes `-1, 0, 1` is solved mode by mode through the
//! resolvent. The split solver separates the critical eigenspace with the
//! spectral projection and solves the two scalar equations
//! `c' - μc = g`, `d' - conj(μ) d = h` there.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{HopfError, Result};
use crate::periodic_space::{time_derivative, PeriodicTrajectory};
use crate::problem::ProblemDef;
use crate::spectral::{SpectralDecomposition, I};

/// Largest modulus accepted for modes that must vanish.
pub const RESONANT_CONTENT_LIMIT: f64 = 1e-12;
pub const RESONANT_FORCING_LIMIT: f64 = 1e-10;

/// Scalar complex path `c(t) = Σ ĉ(n) e^{int}`, `n = -n_t..=n_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResonantScalarPath {
    n_t: usize,
    coeffs: Vec<Complex64>,
}

impl ResonantScalarPath {
    pub fn zeros(n_t: usize) -> Self {
        Self { n_t, coeffs: vec![Complex64::new(0.0, 0.0); 2 * n_t + 1] }
    }

    /// Coefficients listed from `n = -n_t` to `n = n_t`.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(HopfError::Shape("a scalar path needs 2 n_t + 1 coefficients".into()));
        }
        Ok(Self { n_t: coeffs.len() / 2, coeffs })
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn get(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.n_t {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[(n + self.n_t as i64) as usize]
    }

    pub fn set(&mut self, n: i64, value: Complex64) {
        let k = (n + self.n_t as i64) as usize;
        self.coeffs[k] = value;
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs.iter().enumerate().map(move |(k, &c)| (k as i64 - self.n_t as i64, c))
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.modes().map(|(n, c)| c * Complex64::from_polar(1.0, n as f64 * t)).sum()
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self.modes().map(|(n, c)| c * Complex64::new(0.0, n as f64)).collect();
        Self { n_t: self.n_t, coeffs }
    }
}

/// Solves `c' - i c = g` with `ĉ(1) = 0`.
pub fn solve_resonant_ode(g: &ResonantScalarPath) -> Result<ResonantScalarPath> {
    solve_scalar_ode(g, I, 1)
}

/// Solves `c' - μ c = g` in coefficient space; mode `resonant` must be
/// absent from `g` and is set to zero in `c`.
pub fn solve_scalar_ode(g: &ResonantScalarPath, mu: Complex64, resonant: i64) -> Result<ResonantScalarPath> {
    let gr = g.get(resonant);
    if gr.norm() > RESONANT_FORCING_LIMIT {
        return Err(HopfError::Precondition(format!("forcing has resonant content {gr} at mode {resonant}")));
    }
    let mut c = ResonantScalarPath::zeros(g.n_t);
    for (n, gn) in g.modes() {
        if n != resonant {
            c.set(n, gn / (Complex64::new(0.0, n as f64) - mu));
        }
    }
    Ok(c)
}

fn check_nonresonant(v: &PeriodicTrajectory) -> Result<()> {
    for n in 0..=1.min(v.n_t()) {
        let worst = v.mode(n).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if worst > RESONANT_CONTENT_LIMIT {
            return Err(HopfError::Precondition(format!("forcing has content {worst:.3e} in mode {n}")));
        }
    }
    Ok(())
}

/// `û(n) = (in - A)^{-1} v̂(n)` for `n >= 2`, zero on modes `0, ±1`.
pub fn solve_periodic_nonresonant(p: &ProblemDef, v: &PeriodicTrajectory) -> Result<PeriodicTrajectory> {
    check_nonresonant(v)?;
    let modes: Vec<Vec<Complex64>> = (0..=v.n_t())
        .into_par_iter()
        .map(|n| {
            if n < 2 {
                return Ok(vec![Complex64::new(0.0, 0.0); v.dim()]);
            }
            p.solve_resolvent_raw(n as i64, v.mode(n))
        })
        .collect::<Result<_>>()?;
    PeriodicTrajectory::from_modes(*v.grid(), modes)
}

/// Solves via the splitting `v = P v + (I - P) v`: the critical part through
/// the scalar equations, the complement through projected resolvent solves.
pub fn solve_periodic_full(p: &ProblemDef, sd: &SpectralDecomposition, v: &PeriodicTrajectory) -> Result<PeriodicTrajectory> {
    check_nonresonant(v)?;
    let n_t = v.n_t();
    // scalar paths g(t) = ⟨v(t), φ⟩ and h(t) = ⟨v(t), conj φ⟩ = conj g(t)
    let mut g = ResonantScalarPath::zeros(n_t);
    let mut h = ResonantScalarPath::zeros(n_t);
    for n in 2..=n_t {
        let (gn, hn) = sd.coefficients(v.mode(n));
        g.set(n as i64, gn);
        h.set(n as i64, hn);
        g.set(-(n as i64), hn.conj());
        h.set(-(n as i64), gn.conj());
    }
    let c = solve_scalar_ode(&g, sd.mu, 1)?;
    let d = solve_scalar_ode(&h, sd.mu.conj(), -1)?;
    let psi = sd.psi_star.to_complex();

    let modes: Vec<Vec<Complex64>> = (0..=n_t)
        .into_par_iter()
        .map(|n| {
            if n < 2 {
                return Ok(vec![Complex64::new(0.0, 0.0); v.dim()]);
            }
            let rhs = sd.complement(v.mode(n));
            let u2 = sd.complement(&p.solve_resolvent_raw(n as i64, &rhs)?);
            let (cn, dn) = (c.get(n as i64), d.get(n as i64));
            Ok(u2.iter().zip(&psi).map(|(x, z)| x + cn * z + dn * z.conj()).collect())
        })
        .collect::<Result<_>>()?;
    PeriodicTrajectory::from_modes(*v.grid(), modes)
}

/// `u_t - A u - v`.
pub fn linear_residual(p: &ProblemDef, u: &PeriodicTrajectory, v: &PeriodicTrajectory) -> PeriodicTrajectory {
    let au = u.map_space(|z| p.a().matvec_complex(z));
    time_derivative(u).sub(&au).sub(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_ode_examples() {
        let n_t = 4;
        let mut g = ResonantScalarPath::zeros(n_t);
        g.set(2, Complex64::new(1.0, 0.0));
        let c = solve_resonant_ode(&g).unwrap();
        assert!((c.get(2) - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(c.get(1), Complex64::new(0.0, 0.0));

        let mut g = ResonantScalarPath::zeros(n_t);
        g.set(-1, Complex64::new(1.0, 0.0));
        let c = solve_resonant_ode(&g).unwrap();
        assert!((c.get(-1) - Complex64::new(0.0, 0.5)).norm() < 1e-15);

        let zero = solve_resonant_ode(&ResonantScalarPath::zeros(n_t)).unwrap();
        assert!(zero.modes().all(|(_, c)| c == Complex64::new(0.0, 0.0)));

        let mut bad = ResonantScalarPath::zeros(n_t);
        bad.set(1, Complex64::new(1e-6, 0.0));
        assert!(matches!(solve_resonant_ode(&bad), Err(HopfError::Precondition(_))));
    }

    #[test]
    fn scalar_ode_residual() {
        let coeffs: Vec<Complex64> =
            (0..9).map(|k| if k == 5 { Complex64::new(0.0, 0.0) } else { Complex64::new((k as f64).sin(), (k as f64).cos()) }).collect();
        let g = ResonantScalarPath::from_coeffs(coeffs).unwrap();
        let c = solve_resonant_ode(&g).unwrap();
        let dc = c.derivative();
        for (n, gn) in g.modes() {
            let r = dc.get(n) - I * c.get(n) - gn;
            assert!(r.norm() <= 1e-14, "n = {n}: {r}");
        }
    }
}
