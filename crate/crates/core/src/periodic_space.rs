//! Discrete 2π-periodic trajectories in the state space of two fields on a
//! uniform grid.
//!
//! A trajectory is stored through its temporal Fourier coefficients
//! `û(n)` for `n = 0..=n_t`; negative modes are implied by `û(-n) = conj û(n)`,
//! so every trajectory is real valued in time. Spatial pairings use the
//! quadrature weight `dx`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Uniform grid `x_j = -L + j dx`, `j = 0..nx`, carrying two fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub dx: f64,
    pub half_length: f64,
}

impl Grid {
    pub fn new(half_length: f64, dx: f64) -> Result<Self> {
        if !(half_length > 0.0 && dx > 0.0 && half_length.is_finite() && dx.is_finite()) {
            return Err(HopfError::Domain(format!("invalid grid L = {half_length}, dx = {dx}")));
        }
        let nx = (2.0 * half_length / dx).round() as usize + 1;
        Ok(Self { nx, dx, half_length })
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    /// Length of a state vector (two fields).
    pub fn dim(&self) -> usize {
        2 * self.nx
    }
}

/// Weighted pairing `dx Σ a_k b_k`.
pub fn pair(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    grid.dx * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// Sesquilinear pairing `dx Σ a_k conj(b_k)`.
pub fn cpair(grid: &Grid, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>() * grid.dx
}

pub fn norm_l2(grid: &Grid, a: &[f64]) -> f64 {
    pair(grid, a, a).sqrt()
}

pub fn cnorm_l2(grid: &Grid, a: &[Complex64]) -> f64 {
    (grid.dx * a.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

/// A point of the discrete state space: field `u` in the first `nx` entries,
/// field `v` in the last `nx`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    grid: Grid,
    data: Vec<f64>,
}

impl StateVector {
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.dim() {
            return Err(HopfError::Shape(format!("state of length {} on a grid of dim {}", data.len(), grid.dim())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(HopfError::Domain("non-finite state entry".into()));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![0.0; grid.dim()] }
    }

    pub fn from_fields(grid: Grid, u: &[f64], v: &[f64]) -> Result<Self> {
        let mut data = u.to_vec();
        data.extend_from_slice(v);
        Self::new(grid, data)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn u(&self) -> &[f64] {
        &self.data[..self.grid.nx]
    }

    pub fn v(&self) -> &[f64] {
        &self.data[self.grid.nx..]
    }

    pub fn norm_l2(&self) -> f64 {
        norm_l2(&self.grid, &self.data)
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `re + i im` with both parts on the same grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexStateVector {
    pub re: StateVector,
    pub im: StateVector,
}

impl ComplexStateVector {
    pub fn new(re: StateVector, im: StateVector) -> Result<Self> {
        if re.grid != im.grid {
            return Err(HopfError::Shape("real and imaginary parts on different grids".into()));
        }
        Ok(Self { re, im })
    }

    pub fn from_complex(grid: Grid, z: &[Complex64]) -> Result<Self> {
        Ok(Self {
            re: StateVector::new(grid, z.iter().map(|c| c.re).collect())?,
            im: StateVector::new(grid, z.iter().map(|c| c.im).collect())?,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.re.grid
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.re.data.iter().zip(&self.im.data).map(|(&a, &b)| Complex64::new(a, b)).collect()
    }

    pub fn conj(&self) -> Self {
        let im = self.im.data.iter().map(|v| -v).collect();
        Self { re: self.re.clone(), im: StateVector { grid: self.re.grid, data: im } }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let z: Vec<Complex64> = self.to_complex().into_iter().map(|x| x * c).collect();
        Self::from_complex(*self.grid(), &z).expect("scaling preserves shape")
    }

    pub fn norm_l2(&self) -> f64 {
        cnorm_l2(self.grid(), &self.to_complex())
    }
}

/// Real 2π-periodic trajectory stored by its Fourier modes `0..=n_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicTrajectory {
    grid: Grid,
    n_t: usize,
    modes: Vec<Vec<Complex64>>,
}

impl PeriodicTrajectory {
    pub fn zeros(grid: Grid, n_t: usize) -> Self {
        Self { grid, n_t, modes: vec![vec![ZERO; grid.dim()]; n_t + 1] }
    }

    /// Builds a trajectory from modes `0..=n_t`. The imaginary part of mode 0
    /// must vanish (to 1e-12 relative) and is then dropped.
    pub fn from_modes(grid: Grid, modes: Vec<Vec<Complex64>>) -> Result<Self> {
        if modes.is_empty() {
            return Err(HopfError::Shape("a trajectory needs at least mode 0".into()));
        }
        if let Some(bad) = modes.iter().find(|m| m.len() != grid.dim()) {
            return Err(HopfError::Shape(format!("mode of length {} on a grid of dim {}", bad.len(), grid.dim())));
        }
        if modes.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(HopfError::Domain("non-finite Fourier coefficient".into()));
        }
        let scale = modes[0].iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if modes[0].iter().any(|z| z.im.abs() > 1e-12 * scale.max(1.0)) {
            return Err(HopfError::Domain("mode 0 of a real trajectory must be real".into()));
        }
        let n_t = modes.len() - 1;
        let mut modes = modes;
        modes[0].iter_mut().for_each(|z| z.im = 0.0);
        Ok(Self { grid, n_t, modes })
    }

    /// Constant trajectory `u(t) = w`.
    pub fn constant(w: &StateVector, n_t: usize) -> Self {
        let mut out = Self::zeros(w.grid, n_t);
        out.modes[0] = w.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        out
    }

    /// Discrete Fourier analysis of `m` equispaced samples `u(2πq/m)`.
    /// Requires `m > 2 n_t` so that the stored modes are not aliased.
    pub fn from_samples(grid: Grid, n_t: usize, samples: &[Vec<f64>]) -> Result<Self> {
        let m = samples.len();
        if m <= 2 * n_t {
            return Err(HopfError::Shape(format!("{m} samples cannot resolve {n_t} modes")));
        }
        let mut out = Self::zeros(grid, n_t);
        for (q, s) in samples.iter().enumerate() {
            if s.len() != grid.dim() {
                return Err(HopfError::Shape("sample length does not match grid".into()));
            }
            let t = 2.0 * PI * q as f64 / m as f64;
            for n in 0..=n_t {
                let e = Complex64::from_polar(1.0 / m as f64, -(n as f64) * t);
                for (c, &x) in out.modes[n].iter_mut().zip(s) {
                    *c += e * x;
                }
            }
        }
        out.modes[0].iter_mut().for_each(|z| z.im = 0.0);
        Ok(out)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Stored coefficient `û(n)`, `0 <= n <= n_t`.
    pub fn mode(&self, n: usize) -> &[Complex64] {
        &self.modes[n]
    }

    pub fn modes(&self) -> &[Vec<Complex64>] {
        &self.modes
    }

    /// Coefficient for any `|n| <= n_t`, using real symmetry for `n < 0`.
    pub fn coeff(&self, n: i64) -> Result<Vec<Complex64>> {
        let k = n.unsigned_abs() as usize;
        if k > self.n_t {
            return Err(HopfError::ModeOutOfRange { n, n_t: self.n_t });
        }
        Ok(if n >= 0 { self.modes[k].clone() } else { self.modes[k].iter().map(|z| z.conj()).collect() })
    }

    /// Replaces `û(n)` (and implicitly `û(-n)`).
    pub fn set_mode(&mut self, n: usize, value: Vec<Complex64>) -> Result<()> {
        if n > self.n_t {
            return Err(HopfError::ModeOutOfRange { n: n as i64, n_t: self.n_t });
        }
        if value.len() != self.dim() {
            return Err(HopfError::Shape("mode length does not match grid".into()));
        }
        self.modes[n] = value;
        if n == 0 {
            self.modes[0].iter_mut().for_each(|z| z.im = 0.0);
        }
        Ok(())
    }

    /// Value at time `t`.
    pub fn at(&self, t: f64) -> StateVector {
        let mut out: Vec<f64> = self.modes[0].iter().map(|z| z.re).collect();
        for n in 1..=self.n_t {
            let e = Complex64::from_polar(2.0, n as f64 * t);
            for (o, c) in out.iter_mut().zip(&self.modes[n]) {
                *o += (c * e).re;
            }
        }
        StateVector { grid: self.grid, data: out }
    }

    /// Values at `t_q = 2πq/m`, `q = 0..m`.
    pub fn samples(&self, m: usize) -> Vec<Vec<f64>> {
        (0..m).map(|q| self.at(2.0 * PI * q as f64 / m as f64).data).collect()
    }

    pub fn map_modes(&self, f: impl Fn(usize, &Complex64) -> Complex64) -> Self {
        let modes = self.modes.iter().enumerate().map(|(n, m)| m.iter().map(|z| f(n, z)).collect()).collect();
        let mut out = Self { grid: self.grid, n_t: self.n_t, modes };
        out.modes[0].iter_mut().for_each(|z| z.im = 0.0);
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_modes(|_, z| z * s)
    }

    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        assert_eq!((self.grid, self.n_t), (other.grid, other.n_t), "trajectory shapes differ");
        let modes = self.modes.iter().zip(&other.modes).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y * s).collect()).collect();
        Self { grid: self.grid, n_t: self.n_t, modes }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, -1.0)
    }

    /// Applies a real linear map to every mode.
    pub fn map_space(&self, f: impl Fn(&[Complex64]) -> Vec<Complex64>) -> Self {
        let mut out = Self { grid: self.grid, n_t: self.n_t, modes: self.modes.iter().map(|m| f(m)).collect() };
        out.modes[0].iter_mut().for_each(|z| z.im = 0.0);
        out
    }

    /// Time-averaged L² norm, `((1/2π)∫‖u(t)‖² dt)^{1/2}` via Parseval.
    pub fn norm_l2(&self) -> f64 {
        let mut s = self.modes[0].iter().map(|z| z.norm_sqr()).sum::<f64>();
        for m in &self.modes[1..] {
            s += 2.0 * m.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        (self.grid.dx * s).sqrt()
    }

    /// Fraction of the energy carried by modes above `3 n_t / 4`.
    pub fn trailing_energy_fraction(&self) -> f64 {
        let energy = |m: &Vec<Complex64>| m.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let total: f64 = self.modes.iter().map(energy).sum();
        if total == 0.0 {
            return 0.0;
        }
        let start = (3 * self.n_t) / 4 + 1;
        self.modes.iter().skip(start).map(energy).sum::<f64>() / total
    }

    /// Copy with a different mode cutoff (truncating or zero padding).
    pub fn with_cutoff(&self, n_t: usize) -> Self {
        let mut out = Self::zeros(self.grid, n_t);
        for n in 0..=n_t.min(self.n_t) {
            out.modes[n] = self.modes[n].clone();
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let modes = self
            .modes
            .iter()
            .enumerate()
            .map(|(n, m)| ModeJson { n: n as i64, re: m.iter().map(|z| z.re).collect(), im: m.iter().map(|z| z.im).collect() })
            .collect();
        serde_json::to_value(TrajectoryJson {
            n_t: self.n_t,
            nx: self.grid.nx,
            dx: self.grid.dx,
            half_length: self.grid.half_length,
            modes,
        })
        .expect("trajectory serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let parsed: TrajectoryJson = serde_json::from_value(value.clone()).map_err(|e| HopfError::Config(e.to_string()))?;
        let grid = Grid { nx: parsed.nx, dx: parsed.dx, half_length: parsed.half_length };
        let mut modes = vec![vec![ZERO; grid.dim()]; parsed.n_t + 1];
        for m in parsed.modes {
            if m.n < 0 || m.n as usize > parsed.n_t || m.re.len() != grid.dim() || m.im.len() != grid.dim() {
                return Err(HopfError::Shape(format!("bad mode entry n = {}", m.n)));
            }
            modes[m.n as usize] = m.re.iter().zip(&m.im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        }
        Self::from_modes(grid, modes)
    }
}

#[derive(Serialize, Deserialize)]
struct ModeJson {
    n: i64,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryJson {
    n_t: usize,
    nx: usize,
    dx: f64,
    #[serde(rename = "L")]
    half_length: f64,
    modes: Vec<ModeJson>,
}

pub fn fourier_coeff(traj: &PeriodicTrajectory, n: i64) -> Result<ComplexStateVector> {
    ComplexStateVector::from_complex(traj.grid, &traj.coeff(n)?)
}

/// Splits into the mean, the first harmonic and the remaining harmonics.
pub fn project_subspaces(traj: &PeriodicTrajectory) -> (StateVector, PeriodicTrajectory, PeriodicTrajectory) {
    let x0 = StateVector { grid: traj.grid, data: traj.modes[0].iter().map(|z| z.re).collect() };
    let x1 = traj.map_modes(|n, z| if n == 1 { *z } else { ZERO });
    let xinf = traj.map_modes(|n, z| if n >= 2 { *z } else { ZERO });
    (x0, x1, xinf)
}

/// `(τ_θ u)(t) = u(t - θ)`.
pub fn translate(traj: &PeriodicTrajectory, theta: f64) -> PeriodicTrajectory {
    traj.map_modes(|n, z| z * Complex64::from_polar(1.0, -(n as f64) * theta))
}

pub fn time_derivative(traj: &PeriodicTrajectory) -> PeriodicTrajectory {
    traj.map_modes(|n, z| z * Complex64::new(0.0, n as f64))
}

/// `a cos t - b sin t` for `ψ = a + i b`.
pub fn l1_map(psi: &ComplexStateVector, n_t: usize) -> PeriodicTrajectory {
    assert!(n_t >= 1, "the first harmonic needs n_t >= 1");
    let mut out = PeriodicTrajectory::zeros(*psi.grid(), n_t);
    out.modes[1] = psi.to_complex().into_iter().map(|z| z * 0.5).collect();
    out
}

/// Values `(l¹u, l²u)` of the amplitude and phase functionals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePair {
    pub p: f64,
    pub q: f64,
}

impl PhasePair {
    pub fn norm(&self) -> f64 {
        self.p.hypot(self.q)
    }
}

/// Real functional `m(w) = dx Σ weight_k w_k`, extended complex-linearly.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeFunctional {
    pub weight: StateVector,
}

impl AmplitudeFunctional {
    pub fn apply(&self, w: &[f64]) -> f64 {
        pair(&self.weight.grid, &self.weight.data, w)
    }

    pub fn apply_complex(&self, w: &[Complex64]) -> Complex64 {
        let g = &self.weight.grid;
        let re: f64 = w.iter().zip(&self.weight.data).map(|(z, c)| z.re * c).sum();
        let im: f64 = w.iter().zip(&self.weight.data).map(|(z, c)| z.im * c).sum();
        Complex64::new(re, im) * g.dx
    }
}

/// Builds `m` from a pairing vector `φ` (typically the adjoint eigenvector):
/// `m(w) = a⟨w, Re φ⟩ + b⟨w, Im φ⟩` with `(a, b)` fixed by
/// `m(Re ψ) = 1`, `m(Im ψ) = 0`, hence `m_c ψ = 1`.
pub fn build_functional_m(psi: &ComplexStateVector, pairing: &ComplexStateVector) -> Result<AmplitudeFunctional> {
    let g = *psi.grid();
    let (pr, pi) = (psi.re.data(), psi.im.data());
    let (fr, fi) = (pairing.re.data(), pairing.im.data());
    let m11 = pair(&g, pr, fr);
    let m12 = pair(&g, pr, fi);
    let m21 = pair(&g, pi, fr);
    let m22 = pair(&g, pi, fi);
    let det = m11 * m22 - m12 * m21;
    let scale = (m11.abs() + m12.abs()) * (m21.abs() + m22.abs());
    if !(det.abs() > 1e-12 * scale) || det == 0.0 {
        return Err(HopfError::Degenerate("Re ψ and Im ψ are not separated by the pairing vector".into()));
    }
    let a = m22 / det;
    let b = -m21 / det;
    let weight = fr.iter().zip(fi).map(|(x, y)| a * x + b * y).collect();
    Ok(AmplitudeFunctional { weight: StateVector::new(g, weight)? })
}

/// `l¹u = 2 Re(m_c û(1))`, `l²u = -2 Im(m_c û(1))`.
pub fn functional_l(m: &AmplitudeFunctional, traj: &PeriodicTrajectory) -> PhasePair {
    if traj.n_t == 0 {
        return PhasePair { p: 0.0, q: 0.0 };
    }
    let z = m.apply_complex(&traj.modes[1]);
    PhasePair { p: 2.0 * z.re, q: -2.0 * z.im }
}
