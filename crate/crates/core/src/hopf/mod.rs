//! Extended system `H(Λ, u) = (l u - e₁, u_t - (σ + 1)(A + h_u(λ, 0)) u)`,
//! its Jacobian at the critical point, and Newton solves on the space-time
//! discretization. Branch continuation lives in [`branch`].

pub mod branch;
pub mod spacetime;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HopfError, Result};
use crate::linalg::{bordered_smallest_singular_value, norm2, realify, split_complex, BorderedMatrix, SparseMatrix};
use crate::periodic_space::{functional_l, l1_map, AmplitudeFunctional, PeriodicTrajectory, PhasePair};
use crate::problem::{ProblemDef, ScaledParams};
use crate::spectral::{apply_lambda_u_complex, SpectralDecomposition};
use spacetime::SpaceTime;

pub use branch::*;

/// Smallest singular value below which the Jacobian counts as singular.
pub const BIJECTIVITY_TOLERANCE: f64 = 1e-6;
pub const LEAKAGE_TOLERANCE: f64 = 1e-10;
pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 25 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonStats {
    pub iterations: usize,
    pub residual: f64,
    /// Euclidean norms of the Newton updates.
    pub steps: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl NewtonStats {
    /// `‖step_{k+1}‖ / ‖step_k‖²` for the last two steps.
    pub fn quadratic_constant(&self) -> Option<f64> {
        match self.steps.as_slice() {
            [.., a, b] if *a > 0.0 => Some(b / (a * a)),
            _ => None,
        }
    }
}

/// A square system in the unknowns `(u slots, λ, σ)`.
pub(crate) trait NewtonSystem {
    /// Residual in the unknown layout and its norm.
    fn residual(&self, x: &[f64]) -> Result<(Vec<f64>, f64)>;
    fn jacobian(&self, x: &[f64]) -> Result<BorderedMatrix>;
}

pub(crate) fn newton(sys: &dyn NewtonSystem, mut x: Vec<f64>, opts: &NewtonOptions) -> Result<(Vec<f64>, NewtonStats)> {
    let mut stats = NewtonStats::default();
    let (mut r, mut norm) = sys.residual(&x)?;
    stats.residuals.push(norm);
    while norm > opts.tol {
        if stats.iterations == opts.max_iter || !norm.is_finite() {
            return Err(HopfError::Convergence { iterations: stats.iterations, residual: norm });
        }
        let clock = std::time::Instant::now();
        let jac = sys.jacobian(&x)?;
        let assembled = clock.elapsed();
        let step = jac.factor()?.solve(&r)?;
        log::debug!("newton linear solve: assembly {assembled:?}, total {:?}", clock.elapsed());
        for (xi, si) in x.iter_mut().zip(&step) {
            *xi -= si;
        }
        stats.steps.push(norm2(&step));
        stats.iterations += 1;
        (r, norm) = sys.residual(&x)?;
        stats.residuals.push(norm);
        log::debug!("newton {}: |step| = {:.3e}, residual = {:.3e}", stats.iterations, norm2(&step), norm);
    }
    stats.residual = norm;
    Ok((x, stats))
}

/// Time-averaged discrete L² norm of a slot vector.
pub(crate) fn slot_norm(st: &SpaceTime, x: &[f64]) -> f64 {
    let s = st.slots();
    let sum: f64 = x[..st.size()].iter().enumerate().map(|(i, v)| if i % s == 0 { v * v } else { 2.0 * v * v }).sum();
    (st.grid().dx * sum).sqrt()
}

/// Applies a spatial linear map to every slot.
pub(crate) fn per_slot(st: &SpaceTime, x: &[f64], f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let d = st.state_dim();
    let mut out = vec![0.0; st.size()];
    let mut buf = vec![0.0; d];
    for slot in 0..st.slots() {
        for k in 0..d {
            buf[k] = x[st.index(k, slot)];
        }
        for (k, v) in f(&buf).into_iter().enumerate() {
            out[st.index(k, slot)] = v;
        }
    }
    out
}

/// Rows of `l¹` and `l²` in the slot layout.
pub(crate) fn functional_rows(st: &SpaceTime, m: &AmplitudeFunctional) -> Vec<Vec<(usize, f64)>> {
    let dx = st.grid().dx;
    let w = m.weight.data();
    let row = |slot: usize, sign: f64| -> Vec<(usize, f64)> {
        w.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(k, c)| (st.index(k, slot), sign * 2.0 * dx * c)).collect()
    };
    vec![row(1, 1.0), row(2, -1.0)]
}

fn sparse_col(v: Vec<f64>) -> Vec<(usize, f64)> {
    BorderedMatrix::sparse_from_dense(&v)
}

/// Parameters and trajectory of the extended system.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedState {
    pub params: ScaledParams,
    pub u: PeriodicTrajectory,
}

/// `(l u - (1, 0), u_t - (σ + 1)(A u + h_u(λ, 0) u))`.
pub fn extended_h(p: &ProblemDef, m: &AmplitudeFunctional, state: &ExtendedState) -> Result<(PhasePair, PeriodicTrajectory)> {
    let ExtendedState { params, u } = state;
    let zero = vec![0.0; p.dim()];
    let lin = p.a().add_scaled(&p.h().jacobian(params.lambda, &zero), 1.0);
    let au = u.map_space(|z| lin.matvec_complex(z));
    let g = crate::periodic_space::time_derivative(u).add_scaled(&au, -(params.sigma + 1.0));
    let l = functional_l(m, u);
    Ok((PhasePair { p: l.p - 1.0, q: l.q }, g))
}

struct ExtendedSystem<'a> {
    p: &'a ProblemDef,
    st: SpaceTime,
    rows: Vec<Vec<(usize, f64)>>,
}

impl ExtendedSystem<'_> {
    fn linear(&self, lambda: f64) -> SparseMatrix {
        let zero = vec![0.0; self.p.dim()];
        self.p.a().add_scaled(&self.p.h().jacobian(lambda, &zero), 1.0)
    }

    fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], ScaledParams) {
        let n = self.st.size();
        (&x[..n], ScaledParams { lambda: x[n], sigma: x[n + 1] })
    }

    fn core(&self, params: ScaledParams) -> SparseMatrix {
        let n = self.st.size();
        SparseMatrix::from_triplets(n, n, &self.st.linear_part(&self.linear(params.lambda), params.sigma + 1.0))
    }
}

impl NewtonSystem for ExtendedSystem<'_> {
    fn residual(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (u, params) = self.split(x);
        let mut r = self.core(params).matvec(u);
        let g = slot_norm(&self.st, &r);
        let l1: f64 = self.rows[0].iter().map(|&(k, c)| c * u[k]).sum::<f64>() - 1.0;
        let l2: f64 = self.rows[1].iter().map(|&(k, c)| c * u[k]).sum();
        r.extend([l1, l2]);
        Ok((r, g.hypot(l1.hypot(l2))))
    }

    fn jacobian(&self, x: &[f64]) -> Result<BorderedMatrix> {
        let (u, params) = self.split(x);
        let zero = vec![0.0; self.p.dim()];
        let h = self.p.h();
        let col_lambda =
            per_slot(&self.st, u, |v| h.apply_lambda_u(params.lambda, &zero, v).into_iter().map(|y| -(params.sigma + 1.0) * y).collect());
        let lin = self.linear(params.lambda);
        let col_sigma = per_slot(&self.st, u, |v| lin.matvec(v).into_iter().map(|y| -y).collect());
        Ok(BorderedMatrix::new(
            self.core(params),
            vec![sparse_col(col_lambda), sparse_col(col_sigma)],
            self.rows.clone(),
            vec![vec![0.0; 2]; 2],
        ))
    }
}

/// Initial guess `(0, L₁ψ★)` built from the critical eigenvector.
pub fn critical_guess(sd: &SpectralDecomposition, n_t: usize) -> ExtendedState {
    ExtendedState { params: ScaledParams::default(), u: l1_map(&sd.psi_star, n_t) }
}

/// Newton solve of the extended system.
pub fn solve_extended(
    p: &ProblemDef,
    m: &AmplitudeFunctional,
    initial: &ExtendedState,
    opts: &NewtonOptions,
) -> Result<(ExtendedState, NewtonStats)> {
    let st = SpaceTime::new(*p.grid(), initial.u.n_t());
    let rows = functional_rows(&st, m);
    let sys = ExtendedSystem { p, st, rows };
    let mut x = sys.st.to_slots(&initial.u);
    x.extend([initial.params.lambda, initial.params.sigma]);
    let (x, stats) = newton(&sys, x, opts)?;
    let (u, params) = sys.split(&x);
    Ok((ExtendedState { params, u: sys.st.from_slots(u) }, stats))
}

/// `DH*`: `(λ, σ, u) ↦ (l¹u, l²u, u_t - A u - σ A u★ - λ h_λu(0, 0) u★)` as a
/// bordered space-time matrix with unknowns ordered `(u, λ, σ)`.
pub fn jacobian_dhstar(p: &ProblemDef, m: &AmplitudeFunctional, u_star: &PeriodicTrajectory) -> BorderedMatrix {
    let st = SpaceTime::new(*p.grid(), u_star.n_t());
    let sys = ExtendedSystem { p, rows: functional_rows(&st, m), st };
    let mut x = sys.st.to_slots(u_star);
    x.extend([0.0, 0.0]);
    sys.jacobian(&x).expect("the extended Jacobian has no failure modes")
}

#[derive(Clone, Debug, PartialEq)]
pub struct BijectivityReport {
    pub smallest_singular_value: f64,
    /// Largest relative cross-block component between `ℝ² ⊕ X₀ ⊕ X₁` and `X_∞`.
    pub leakage: f64,
    pub ok: bool,
}

/// Estimates the smallest singular value of `DH*` and checks that it maps
/// `ℝ² ⊕ X₀ ⊕ X₁` and `X_∞` into the matching target blocks.
pub fn verify_dhstar_bijective(p: &ProblemDef, m: &AmplitudeFunctional, u_star: &PeriodicTrajectory, seed: u64) -> BijectivityReport {
    let dh = jacobian_dhstar(p, m, u_star);
    let smallest = bordered_smallest_singular_value(&dh, 300, seed);
    let st = SpaceTime::new(*p.grid(), u_star.n_t());
    let n = st.size();
    let low = |i: usize| i >= n || i % st.slots() <= 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut leakage = 0.0f64;
    for block_low in [true, false] {
        for _ in 0..3 {
            let x: Vec<f64> = (0..dh.dim()).map(|i| if low(i) == block_low { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
            let y = dh.apply(&x);
            let total = norm2(&y);
            let cross: Vec<f64> = y.iter().enumerate().filter(|(i, _)| low(*i) != block_low).map(|(_, v)| *v).collect();
            if total > 0.0 {
                leakage = leakage.max(norm2(&cross) / total);
            }
        }
    }
    let ok = smallest > BIJECTIVITY_TOLERANCE && leakage <= LEAKAGE_TOLERANCE;
    BijectivityReport { smallest_singular_value: smallest, leakage, ok }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluxDecomposition {
    pub p: f64,
    pub q: f64,
    /// Preimage in `X₁` with mode-one coefficient orthogonal to that of `u★`.
    pub u_sharp: PeriodicTrajectory,
    /// `‖p u★ + q A u★ + T₁ u♯ - h_λu(0, 0) u★‖ / ‖h_λu(0, 0) u★‖`.
    pub reconstruction: f64,
}

/// Splits `h_λu(0, 0) u★ = p u★ + q A u★ + T₁ u♯` on the first harmonic.
pub fn decompose_flux_48(p: &ProblemDef, sd: &SpectralDecomposition, u_star: &PeriodicTrajectory) -> Result<FluxDecomposition> {
    let w = u_star.mode(1).to_vec();
    let aw = p.a().matvec_complex(&w);
    let f = apply_lambda_u_complex(p, 0.0, &w);

    let gram = |a: &[Complex64], b: &[Complex64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum() };
    let (ww, vv, wv) = (gram(&w, &w), gram(&aw, &aw), gram(&w, &aw));
    if !((ww * vv - wv * wv) > 1e-12 * ww * vv) {
        return Err(HopfError::Degenerate("u★ and A u★ are not independent".into()));
    }

    // (i - A) v + p w + q A w = f with conj(w)ᵀ v = 0, in real form.
    let d = p.dim();
    let core = realify(&p.a().scaled(-1.0), &SparseMatrix::identity(d));
    let columns = vec![sparse_col(split_complex(&w)), sparse_col(split_complex(&aw))];
    let re_row = (0..d).map(|k| (k, w[k].re)).chain((0..d).map(|k| (k + d, w[k].im)));
    let im_row = (0..d).map(|k| (k, -w[k].im)).chain((0..d).map(|k| (k + d, w[k].re)));
    let rows = vec![re_row.filter(|e| e.1 != 0.0).collect(), im_row.filter(|e| e.1 != 0.0).collect()];
    let system = BorderedMatrix::new(core, columns, rows, vec![vec![0.0; 2]; 2]);
    let mut rhs = split_complex(&f);
    rhs.extend([0.0, 0.0]);
    let sol = system.factor()?.solve(&rhs)?;
    let (pp, qq) = (sol[2 * d], sol[2 * d + 1]);
    let v: Vec<Complex64> = (0..d).map(|k| Complex64::new(sol[k], sol[k + d])).collect();

    let i = Complex64::new(0.0, 1.0);
    let av = p.a().matvec_complex(&v);
    let fnorm = crate::linalg::cnorm2(&f);
    let res: Vec<Complex64> = (0..d).map(|k| pp * w[k] + qq * aw[k] + i * v[k] - av[k] - f[k]).collect();
    let reconstruction = if fnorm > 0.0 { crate::linalg::cnorm2(&res) / fnorm } else { crate::linalg::cnorm2(&res) };

    let mut u_sharp = PeriodicTrajectory::zeros(*sd.grid(), u_star.n_t());
    u_sharp.set_mode(1, v)?;
    Ok(FluxDecomposition { p: pp, q: qq, u_sharp, reconstruction })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_constant_uses_last_steps() {
        let stats = NewtonStats { steps: vec![1e-1, 1e-3, 2e-6], ..Default::default() };
        assert!((stats.quadratic_constant().unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(NewtonStats::default().quadratic_constant(), None);
    }
}
