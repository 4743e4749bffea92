//! The evolution problem `u_t = A u + h(λ, u)` on a discrete state space.

use std::collections::HashMap;
use std::fmt::Debug;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::linalg::{ComplexLu, LinalgError, RealLu, SparseMatrix};
use crate::periodic_space::{norm_l2, ComplexStateVector, Grid, PeriodicTrajectory, StateVector};

/// Condition estimate above which a shifted operator counts as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// A nonlinearity `h(λ, u)` with closed-form derivatives.
///
/// `jacobian` must return the same sparsity pattern for every `u` at fixed
/// `λ`; space-time assembly relies on it.
pub trait Nonlinearity: Send + Sync + Debug {
    fn eval(&self, lambda: f64, u: &[f64]) -> Vec<f64>;

    /// `h_λ(λ, u)`.
    fn eval_lambda(&self, lambda: f64, u: &[f64]) -> Vec<f64>;

    /// `h_u(λ, u)` as a sparse matrix.
    fn jacobian(&self, lambda: f64, u: &[f64]) -> SparseMatrix;

    fn apply_u(&self, lambda: f64, u: &[f64], v: &[f64]) -> Vec<f64> {
        self.jacobian(lambda, u).matvec(v)
    }

    /// `h_λu(λ, u) v`.
    fn apply_lambda_u(&self, lambda: f64, u: &[f64], v: &[f64]) -> Vec<f64>;

    /// `h_uu(λ, u)[v, w]`.
    fn apply_uu(&self, lambda: f64, u: &[f64], v: &[f64], w: &[f64]) -> Vec<f64>;
}

/// Pointwise reaction `(u, v) (λ weight(x) - cubic (u² + v²))` on a grid of
/// `weight.len()` points.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicReaction {
    pub weight: Vec<f64>,
    pub cubic: f64,
}

impl CubicReaction {
    fn nx(&self) -> usize {
        self.weight.len()
    }
}

impl Nonlinearity for CubicReaction {
    fn eval(&self, lambda: f64, z: &[f64]) -> Vec<f64> {
        let nx = self.nx();
        let mut out = vec![0.0; 2 * nx];
        for j in 0..nx {
            let (u, v) = (z[j], z[j + nx]);
            let r = lambda * self.weight[j] - self.cubic * (u * u + v * v);
            out[j] = u * r;
            out[j + nx] = v * r;
        }
        out
    }

    fn eval_lambda(&self, _lambda: f64, z: &[f64]) -> Vec<f64> {
        let nx = self.nx();
        (0..2 * nx).map(|k| self.weight[k % nx] * z[k]).collect()
    }

    fn jacobian(&self, lambda: f64, z: &[f64]) -> SparseMatrix {
        let nx = self.nx();
        let c = self.cubic;
        let mut t = Vec::with_capacity(4 * nx);
        for j in 0..nx {
            let (u, v) = (z[j], z[j + nx]);
            let r = lambda * self.weight[j] - c * (u * u + v * v);
            t.push((j, j, r - 2.0 * c * u * u));
            t.push((j, j + nx, -2.0 * c * u * v));
            t.push((j + nx, j, -2.0 * c * u * v));
            t.push((j + nx, j + nx, r - 2.0 * c * v * v));
        }
        SparseMatrix::from_triplets(2 * nx, 2 * nx, &t)
    }

    fn apply_lambda_u(&self, _lambda: f64, _z: &[f64], v: &[f64]) -> Vec<f64> {
        self.eval_lambda(0.0, v)
    }

    fn apply_uu(&self, _lambda: f64, z: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
        let nx = self.nx();
        let mut out = vec![0.0; 2 * nx];
        for j in 0..nx {
            let zz = [z[j], z[j + nx]];
            let aa = [a[j], a[j + nx]];
            let bb = [b[j], b[j + nx]];
            let za = zz[0] * aa[0] + zz[1] * aa[1];
            let zb = zz[0] * bb[0] + zz[1] * bb[1];
            let ab = aa[0] * bb[0] + aa[1] * bb[1];
            for f in 0..2 {
                out[j + f * nx] = -2.0 * self.cubic * (aa[f] * zb + bb[f] * za + zz[f] * ab);
            }
        }
        out
    }
}

/// Second-difference matrix `[1, -2, 1] / dx²` with zero boundary values.
pub fn dirichlet_laplacian(nx: usize, dx: f64) -> SparseMatrix {
    let s = 1.0 / (dx * dx);
    let mut t = Vec::with_capacity(3 * nx);
    for j in 0..nx {
        t.push((j, j, -2.0 * s));
        if j > 0 {
            t.push((j, j - 1, s));
        }
        if j + 1 < nx {
            t.push((j, j + 1, s));
        }
    }
    SparseMatrix::from_triplets(nx, nx, &t)
}

/// Quasilinear diffusion `((u² u_x)_x, (v² v_x)_x)`, discretized in the
/// conservative form `D₂(u³)/3` with the Dirichlet second-difference matrix.
#[derive(Clone, Debug)]
pub struct QuasilinearDiffusion {
    nx: usize,
    d2: SparseMatrix,
}

impl QuasilinearDiffusion {
    pub fn new(grid: &Grid) -> Self {
        Self { nx: grid.nx, d2: dirichlet_laplacian(grid.nx, grid.dx) }
    }

    fn per_field(&self, z: &[f64], f: impl Fn(usize) -> f64) -> Vec<f64> {
        let nx = self.nx;
        let mut out = Vec::with_capacity(2 * nx);
        for field in 0..2 {
            let w: Vec<f64> = (0..nx).map(|j| f(field * nx + j)).collect();
            out.extend(self.d2.matvec(&w));
        }
        debug_assert_eq!(out.len(), z.len());
        out
    }
}

impl Nonlinearity for QuasilinearDiffusion {
    fn eval(&self, _lambda: f64, z: &[f64]) -> Vec<f64> {
        self.per_field(z, |k| z[k].powi(3) / 3.0)
    }

    fn eval_lambda(&self, _lambda: f64, z: &[f64]) -> Vec<f64> {
        vec![0.0; z.len()]
    }

    fn jacobian(&self, _lambda: f64, z: &[f64]) -> SparseMatrix {
        let nx = self.nx;
        let mut t = Vec::with_capacity(6 * nx);
        for field in 0..2 {
            let o = field * nx;
            for (r, c, v) in self.d2.iter() {
                t.push((r + o, c + o, v * z[c + o] * z[c + o]));
            }
        }
        SparseMatrix::from_triplets(2 * nx, 2 * nx, &t)
    }

    fn apply_u(&self, _lambda: f64, z: &[f64], v: &[f64]) -> Vec<f64> {
        self.per_field(z, |k| z[k] * z[k] * v[k])
    }

    fn apply_lambda_u(&self, _lambda: f64, z: &[f64], _v: &[f64]) -> Vec<f64> {
        vec![0.0; z.len()]
    }

    fn apply_uu(&self, _lambda: f64, z: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
        self.per_field(z, |k| 2.0 * z[k] * a[k] * b[k])
    }
}

/// Sum of nonlinearities.
#[derive(Debug)]
pub struct SumNonlinearity {
    pub parts: Vec<Box<dyn Nonlinearity>>,
}

impl Nonlinearity for SumNonlinearity {
    fn eval(&self, lambda: f64, u: &[f64]) -> Vec<f64> {
        sum_all(&self.parts, |p| p.eval(lambda, u), u.len())
    }

    fn eval_lambda(&self, lambda: f64, u: &[f64]) -> Vec<f64> {
        sum_all(&self.parts, |p| p.eval_lambda(lambda, u), u.len())
    }

    fn jacobian(&self, lambda: f64, u: &[f64]) -> SparseMatrix {
        let n = u.len();
        let t: Vec<_> = self.parts.iter().flat_map(|p| p.jacobian(lambda, u).triplets()).collect();
        SparseMatrix::from_triplets(n, n, &t)
    }

    fn apply_u(&self, lambda: f64, u: &[f64], v: &[f64]) -> Vec<f64> {
        sum_all(&self.parts, |p| p.apply_u(lambda, u, v), u.len())
    }

    fn apply_lambda_u(&self, lambda: f64, u: &[f64], v: &[f64]) -> Vec<f64> {
        sum_all(&self.parts, |p| p.apply_lambda_u(lambda, u, v), u.len())
    }

    fn apply_uu(&self, lambda: f64, u: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        sum_all(&self.parts, |p| p.apply_uu(lambda, u, v, w), u.len())
    }
}

fn sum_all(parts: &[Box<dyn Nonlinearity>], f: impl Fn(&dyn Nonlinearity) -> Vec<f64>, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for p in parts {
        for (o, x) in out.iter_mut().zip(f(p.as_ref())) {
            *o += x;
        }
    }
    out
}

/// Bifurcation parameter `λ` and period perturbation `σ` (period `2π(1+σ)`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaledParams {
    pub lambda: f64,
    pub sigma: f64,
}

type CachedLu = Arc<OnceLock<Result<Arc<ComplexLu>>>>;

/// Operator `A`, nonlinearity `h` and the admissible parameter region.
pub struct ProblemDef {
    name: String,
    grid: Grid,
    a: SparseMatrix,
    h: Arc<dyn Nonlinearity>,
    lambda_window: (f64, f64),
    trust_radius: f64,
    a_lu: OnceLock<std::result::Result<RealLu, LinalgError>>,
    resolvents: Mutex<HashMap<i64, CachedLu>>,
}

impl Debug for ProblemDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemDef")
            .field("name", &self.name)
            .field("grid", &self.grid)
            .field("nnz(A)", &self.a.nnz())
            .field("h", &self.h)
            .field("lambda_window", &self.lambda_window)
            .field("trust_radius", &self.trust_radius)
            .finish()
    }
}

impl ProblemDef {
    pub fn new(name: impl Into<String>, grid: Grid, a: SparseMatrix, h: Arc<dyn Nonlinearity>) -> Result<Self> {
        if a.nrows() != grid.dim() || a.ncols() != grid.dim() {
            return Err(HopfError::Shape(format!("A is {}x{} but the grid has dimension {}", a.nrows(), a.ncols(), grid.dim())));
        }
        Ok(Self {
            name: name.into(),
            grid,
            a,
            h,
            lambda_window: (-10.0, 10.0),
            trust_radius: f64::INFINITY,
            a_lu: OnceLock::new(),
            resolvents: Mutex::new(HashMap::new()),
        })
    }

    /// Sets the open interval `K` of admissible `λ`; it must contain 0.
    pub fn with_lambda_window(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < 0.0 && 0.0 < hi) {
            return Err(HopfError::Domain(format!("λ window ({lo}, {hi}) must contain 0")));
        }
        self.lambda_window = (lo, hi);
        Ok(self)
    }

    pub fn with_trust_radius(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(HopfError::Domain(format!("trust radius {delta} must be positive")));
        }
        self.trust_radius = delta;
        Ok(self)
    }

    /// Same operator and parameter region with a different nonlinearity.
    pub fn with_nonlinearity(&self, name: impl Into<String>, h: Arc<dyn Nonlinearity>) -> Self {
        Self {
            name: name.into(),
            grid: self.grid,
            a: self.a.clone(),
            h,
            lambda_window: self.lambda_window,
            trust_radius: self.trust_radius,
            a_lu: OnceLock::new(),
            resolvents: Mutex::new(HashMap::new()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn h(&self) -> &dyn Nonlinearity {
        self.h.as_ref()
    }

    pub fn lambda_window(&self) -> (f64, f64) {
        self.lambda_window
    }

    pub fn trust_radius(&self) -> f64 {
        self.trust_radius
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// `A + h_u(λ, 0)`.
    pub fn linearization(&self, lambda: f64) -> SparseMatrix {
        let zero = vec![0.0; self.dim()];
        self.a.add_scaled(&self.h.jacobian(lambda, &zero), 1.0)
    }

    pub fn apply_a(&self, w: &StateVector) -> StateVector {
        StateVector::new(self.grid, self.a.matvec(w.data())).expect("A preserves shape")
    }

    fn a_factor(&self) -> Result<&RealLu> {
        self.a_lu.get_or_init(|| RealLu::factor(&self.a)).as_ref().map_err(|e| HopfError::SingularOperator(e.to_string()))
    }

    pub fn solve_a(&self, rhs: &StateVector) -> Result<StateVector> {
        let x = self.a_factor()?.solve(rhs.data()).map_err(|e| HopfError::SingularOperator(e.to_string()))?;
        StateVector::new(self.grid, x)
    }

    /// Cached factorization of `in - A`, computed once per `n`.
    pub fn resolvent_factor(&self, n: i64) -> Result<Arc<ComplexLu>> {
        let cell = {
            let mut map = self.resolvents.lock().expect("resolvent cache poisoned");
            map.entry(n).or_default().clone()
        };
        cell.get_or_init(|| {
            let lu = ComplexLu::factor_shifted(&self.a, Complex64::new(0.0, n as f64)).map_err(|_| HopfError::Resonance { n })?;
            let condition = lu.condition_estimate().map_err(|_| HopfError::Resonance { n })?;
            if !(condition <= CONDITION_LIMIT) {
                return Err(if n.abs() == 1 { HopfError::Resonance { n } } else { HopfError::IllConditioned { n, condition } });
            }
            Ok(Arc::new(lu))
        })
        .clone()
    }

    /// `(in - A)^{-1} rhs` for `n ≠ ±1`.
    pub fn solve_resolvent(&self, n: i64, rhs: &ComplexStateVector) -> Result<ComplexStateVector> {
        let x = self.solve_resolvent_raw(n, &rhs.to_complex())?;
        ComplexStateVector::from_complex(self.grid, &x)
    }

    pub fn solve_resolvent_raw(&self, n: i64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        if n.abs() == 1 {
            return Err(HopfError::Resonance { n });
        }
        let lu = self.resolvent_factor(n)?;
        Ok(lu.solve(rhs)?)
    }

    fn check_domain(&self, lambda: f64, u: &[f64]) -> Result<()> {
        let (lo, hi) = self.lambda_window;
        if !(lo < lambda && lambda < hi) {
            return Err(HopfError::Domain(format!("λ = {lambda} outside ({lo}, {hi})")));
        }
        let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(sup < self.trust_radius) {
            return Err(HopfError::Domain(format!("‖u‖∞ = {sup} exceeds trust radius {}", self.trust_radius)));
        }
        Ok(())
    }

    /// `A u + h(λ, u)`.
    pub fn residual_f(&self, lambda: f64, u: &StateVector) -> Result<StateVector> {
        self.check_domain(lambda, u.data())?;
        let mut out = self.a.matvec(u.data());
        for (o, h) in out.iter_mut().zip(self.h.eval(lambda, u.data())) {
            *o += h;
        }
        StateVector::new(self.grid, out)
    }

    /// `A u + h(λ, u)` along a trajectory, with `h` evaluated on
    /// `2 n_t + 2` equispaced samples.
    pub fn collocated_f(&self, lambda: f64, u: &PeriodicTrajectory) -> Result<PeriodicTrajectory> {
        let m = collocation_points(u.n_t());
        let samples = u.samples(m);
        let mut hs = Vec::with_capacity(m);
        for s in &samples {
            self.check_domain(lambda, s)?;
            hs.push(self.h.eval(lambda, s));
        }
        let h = PeriodicTrajectory::from_samples(self.grid, u.n_t(), &hs)?;
        let au = u.map_space(|z| self.a.matvec_complex(z));
        Ok(au.add_scaled(&h, 1.0))
    }

    /// `g(Λ, u) = u_t - (σ + 1)(A u + h(λ, u))`.
    pub fn residual_g(&self, params: ScaledParams, u: &PeriodicTrajectory) -> Result<PeriodicTrajectory> {
        let f = self.collocated_f(params.lambda, u)?;
        Ok(crate::periodic_space::time_derivative(u).add_scaled(&f, -(params.sigma + 1.0)))
    }

    /// Compares the derivative callables of `h` with central differences at
    /// random points.
    pub fn check_derivatives(&self, samples: usize, step: f64, seed: u64) -> DerivativeReport {
        assert!(step > 0.0, "finite-difference step must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim();
        let (lo, hi) = self.lambda_window;
        let amp = if self.trust_radius.is_finite() { 0.5 * self.trust_radius } else { 1.0 };
        let mut report = DerivativeReport { samples, step, ..Default::default() };
        let h = self.h.as_ref();
        let sub = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (x - y) / s).collect() };
        let axpy = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
        for _ in 0..samples {
            let lambda = lo.max(-1.0) + (hi.min(1.0) - lo.max(-1.0)) * (0.1 + 0.8 * rng.random::<f64>());
            let mut rand_vec = |scale: f64| -> Vec<f64> { (0..n).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect() };
            let u = rand_vec(amp);
            let v = rand_vec(1.0);
            let w = rand_vec(1.0);
            let e = step;

            let fd = sub(&h.eval(lambda, &axpy(&u, &v, e)), &h.eval(lambda, &axpy(&u, &v, -e)), 2.0 * e);
            report.h_u = report.h_u.max(rel_err(&fd, &h.apply_u(lambda, &u, &v)));
            let jac = h.jacobian(lambda, &u).matvec(&v);
            report.h_u = report.h_u.max(rel_err(&jac, &h.apply_u(lambda, &u, &v)));

            let fd = sub(&h.eval(lambda + e, &u), &h.eval(lambda - e, &u), 2.0 * e);
            report.h_lambda = report.h_lambda.max(rel_err(&fd, &h.eval_lambda(lambda, &u)));

            let fd = sub(&h.apply_u(lambda + e, &u, &v), &h.apply_u(lambda - e, &u, &v), 2.0 * e);
            report.h_lambda_u = report.h_lambda_u.max(rel_err(&fd, &h.apply_lambda_u(lambda, &u, &v)));

            let exact = h.apply_uu(lambda, &u, &v, &w);
            let fd = sub(&h.apply_u(lambda, &axpy(&u, &w, e), &v), &h.apply_u(lambda, &axpy(&u, &w, -e), &v), 2.0 * e);
            report.h_uu = report.h_uu.max(rel_err(&fd, &exact));
            report.h_uu_max_norm = report.h_uu_max_norm.max(exact.iter().fold(0.0, |m, x| m.max(x.abs())));

            let zero = vec![0.0; n];
            let at_zero = h.eval(lambda, &zero).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let hu00 = h.apply_u(0.0, &zero, &v).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            report.origin_violation = report.origin_violation.max(at_zero).max(hu00);
        }
        report.max_error = report.h_u.max(report.h_lambda).max(report.h_lambda_u).max(report.h_uu);
        report.passed = report.max_error <= DERIVATIVE_TOLERANCE && report.origin_violation == 0.0;
        report
    }

    /// Discrete L² norm on this grid.
    pub fn norm(&self, w: &[f64]) -> f64 {
        norm_l2(&self.grid, w)
    }
}

pub const DERIVATIVE_TOLERANCE: f64 = 1e-6;

/// Number of time samples used to evaluate nonlinearities.
pub fn collocation_points(n_t: usize) -> usize {
    2 * n_t + 2
}

fn rel_err(fd: &[f64], exact: &[f64]) -> f64 {
    let diff = fd.iter().zip(exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = fd.iter().chain(exact).fold(0.0f64, |m, a| m.max(a.abs()));
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(1e-300)
    }
}

/// Maximum relative errors of the derivative callables against central
/// differences.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub samples: usize,
    pub step: f64,
    pub h_u: f64,
    pub h_lambda: f64,
    pub h_lambda_u: f64,
    pub h_uu: f64,
    /// Largest entry of `h_uu[v, w]` seen; zero for nonlinearities linear in `u`.
    pub h_uu_max_norm: f64,
    /// Largest entry of `h(λ, 0)` or `h_u(0, 0) v`; must be exactly zero.
    pub origin_violation: f64,
    pub max_error: f64,
    pub passed: bool,
}
