//! Amplitude-parameterized branch `α ↦ (ζ(α), α u★ + α η(α))` of periodic
//! solutions, with the mirror symmetry, `ζ'(0)` fit and translation checks.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::spacetime::SpaceTime;
use super::{functional_rows, newton, slot_norm, sparse_col, ExtendedState, NewtonOptions, NewtonSystem};
use crate::error::{HopfError, Result};
use crate::linalg::{BorderedMatrix, SparseMatrix};
use crate::periodic_space::{functional_l, translate, AmplitudeFunctional, PeriodicTrajectory, PhasePair};
use crate::problem::{ProblemDef, ScaledParams};

pub const FIT_TOLERANCE: f64 = 1e-3;
/// Share of energy allowed above `3 n_t / 4` before a warning is logged.
pub const TRAILING_ENERGY_LIMIT: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct BranchPoint {
    pub alpha: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub u: PeriodicTrajectory,
    pub residual: f64,
    pub newton_iters: usize,
    pub l_check: PhasePair,
    /// `‖η(α)‖ = ‖u / α - u★‖`, zero at `α = 0`.
    pub eta_norm: f64,
    pub trailing_energy: f64,
}

impl BranchPoint {
    pub fn params(&self) -> ScaledParams {
        ScaledParams { lambda: self.lambda, sigma: self.sigma }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Truncation {
    pub alpha: f64,
    pub last_good_alpha: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchResult {
    pub points: Vec<BranchPoint>,
    pub u_star: PeriodicTrajectory,
    /// Parameters of the bifurcation point from the extended solve.
    pub params_star: ScaledParams,
    pub truncated: Option<Truncation>,
}

struct BranchSystem<'a> {
    p: &'a ProblemDef,
    st: SpaceTime,
    rows: Vec<Vec<(usize, f64)>>,
    alpha: f64,
}

impl BranchSystem<'_> {
    fn split(&self, x: &[f64]) -> (PeriodicTrajectory, ScaledParams) {
        let n = self.st.size();
        (self.st.from_slots(&x[..n]), ScaledParams { lambda: x[n], sigma: x[n + 1] })
    }
}

impl NewtonSystem for BranchSystem<'_> {
    fn residual(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let (u, params) = self.split(x);
        let mut r = self.st.to_slots(&self.p.residual_g(params, &u)?);
        let g = slot_norm(&self.st, &r);
        let ux = &x[..self.st.size()];
        let l1: f64 = self.rows[0].iter().map(|&(k, c)| c * ux[k]).sum::<f64>() - self.alpha;
        let l2: f64 = self.rows[1].iter().map(|&(k, c)| c * ux[k]).sum();
        r.extend([l1, l2]);
        Ok((r, g.hypot(l1.hypot(l2))))
    }

    fn jacobian(&self, x: &[f64]) -> Result<BorderedMatrix> {
        let (u, params) = self.split(x);
        let (st, h) = (&self.st, self.p.h());
        let scale = params.sigma + 1.0;
        let samples = u.samples(st.samples());
        let js: Vec<SparseMatrix> = samples.iter().map(|s| h.jacobian(params.lambda, s)).collect();
        let mut t = st.linear_part(self.p.a(), scale);
        t.extend(st.collocated_part(&js, scale));
        let core = SparseMatrix::from_triplets(st.size(), st.size(), &t);

        let hl: Vec<Vec<f64>> = samples.iter().map(|s| h.eval_lambda(params.lambda, s)).collect();
        let hl = PeriodicTrajectory::from_samples(*st.grid(), st.n_t(), &hl)?;
        let col_lambda: Vec<f64> = st.to_slots(&hl).into_iter().map(|v| -scale * v).collect();
        let f = self.p.collocated_f(params.lambda, &u)?;
        let col_sigma: Vec<f64> = st.to_slots(&f).into_iter().map(|v| -v).collect();
        Ok(BorderedMatrix::new(core, vec![sparse_col(col_lambda), sparse_col(col_sigma)], self.rows.clone(), vec![vec![0.0; 2]; 2]))
    }
}

/// Solves `l¹u = α, l²u = 0, g((λ, σ), u) = 0` by Newton from `guess`.
pub fn solve_branch_point(
    p: &ProblemDef,
    m: &AmplitudeFunctional,
    u_star: &PeriodicTrajectory,
    alpha: f64,
    guess: &ExtendedState,
    opts: &NewtonOptions,
) -> Result<BranchPoint> {
    let st = SpaceTime::new(*p.grid(), u_star.n_t());
    let rows = functional_rows(&st, m);
    let sys = BranchSystem { p, st, rows, alpha };
    let mut x = sys.st.to_slots(&guess.u);
    x.extend([guess.params.lambda, guess.params.sigma]);
    let (x, stats) = newton(&sys, x, opts)?;
    let (u, params) = sys.split(&x);
    Ok(finish_point(alpha, params, u, u_star, m, stats.residual, stats.iterations))
}

fn finish_point(
    alpha: f64,
    params: ScaledParams,
    u: PeriodicTrajectory,
    u_star: &PeriodicTrajectory,
    m: &AmplitudeFunctional,
    residual: f64,
    newton_iters: usize,
) -> BranchPoint {
    let eta_norm = if alpha == 0.0 { 0.0 } else { u.scale(1.0 / alpha).sub(u_star).norm_l2() };
    let trailing_energy = u.trailing_energy_fraction();
    if trailing_energy > TRAILING_ENERGY_LIMIT {
        log::warn!("α = {alpha}: {trailing_energy:.2e} of the energy sits in the top quarter of the modes; raise n_t");
    }
    BranchPoint {
        alpha,
        lambda: params.lambda,
        sigma: params.sigma,
        l_check: functional_l(m, &u),
        u,
        residual,
        newton_iters,
        eta_norm,
        trailing_energy,
    }
}

/// Continues over `alphas`, ordered by increasing `|α|` and of one sign,
/// warm-starting each solve from the previous point.
pub fn continue_over(p: &ProblemDef, m: &AmplitudeFunctional, star: &ExtendedState, alphas: &[f64], opts: &NewtonOptions) -> BranchResult {
    let mut points: Vec<BranchPoint> = Vec::with_capacity(alphas.len());
    let mut truncated = None;
    for &alpha in alphas {
        if alpha == 0.0 {
            let u = PeriodicTrajectory::zeros(*p.grid(), star.u.n_t());
            points.push(finish_point(0.0, star.params, u, &star.u, m, 0.0, 0));
            continue;
        }
        let guess = match points.last() {
            Some(prev) if prev.alpha != 0.0 => {
                let r = alpha / prev.alpha;
                let shift = |v: f64, v0: f64| v0 + (v - v0) * r * r;
                ExtendedState {
                    params: ScaledParams { lambda: shift(prev.lambda, star.params.lambda), sigma: shift(prev.sigma, star.params.sigma) },
                    u: prev.u.scale(r),
                }
            }
            _ => ExtendedState { params: star.params, u: star.u.scale(alpha) },
        };
        match solve_branch_point(p, m, &star.u, alpha, &guess, opts) {
            Ok(point) => points.push(point),
            Err(e) => {
                let last_good_alpha = points.last().map_or(0.0, |q| q.alpha);
                log::warn!("branch truncated at α = {alpha}: {e}");
                truncated = Some(Truncation { alpha, last_good_alpha, reason: e.to_string() });
                break;
            }
        }
    }
    BranchResult { points, u_star: star.u.clone(), params_star: star.params, truncated }
}

/// Branch on the grid `α_k = α_max k / steps`, `k = 0..=steps`.
pub fn continue_branch(
    p: &ProblemDef,
    m: &AmplitudeFunctional,
    star: &ExtendedState,
    alpha_max: f64,
    steps: usize,
    opts: &NewtonOptions,
) -> Result<BranchResult> {
    if !(alpha_max >= 0.0 && alpha_max.is_finite()) || steps == 0 {
        return Err(HopfError::Precondition(format!("need α_max >= 0 and steps >= 1, got {alpha_max}, {steps}")));
    }
    let alphas: Vec<f64> = if alpha_max == 0.0 { vec![0.0] } else { (0..=steps).map(|k| alpha_max * k as f64 / steps as f64).collect() };
    Ok(continue_over(p, m, star, &alphas, opts))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryReport {
    /// `max |ζ(-α) - ζ(α)|`.
    pub zeta_deviation: f64,
    /// `max ‖u(-α) - τ_π u(α)‖`, equivalently `|α| ‖η(-α) + τ_π η(α)‖`.
    pub u_deviation: f64,
    pub mirrored: Vec<BranchPoint>,
    pub passed: bool,
}

/// Re-solves the branch at `-α` and compares with the mirror image
/// `(ζ(α), τ_π u(α))`.
pub fn check_symmetry_45(result: &BranchResult, p: &ProblemDef, m: &AmplitudeFunctional, opts: &NewtonOptions) -> Result<SymmetryReport> {
    let alphas: Vec<f64> = result.points.iter().map(|q| -q.alpha).collect();
    let star = ExtendedState { params: result.params_star, u: result.u_star.clone() };
    let mirrored = continue_over(p, m, &star, &alphas, opts);
    if let Some(t) = mirrored.truncated {
        return Err(HopfError::Inconsistent(format!("mirrored branch stopped at α = {}: {}", t.alpha, t.reason)));
    }
    let mut zeta_deviation = 0.0f64;
    let mut u_deviation = 0.0f64;
    for (a, b) in result.points.iter().zip(&mirrored.points) {
        zeta_deviation = zeta_deviation.max((a.lambda - b.lambda).abs()).max((a.sigma - b.sigma).abs());
        u_deviation = u_deviation.max(b.u.sub(&translate(&a.u, PI)).norm_l2());
    }
    let limit = 1e-8 + 10.0 * opts.tol;
    Ok(SymmetryReport { zeta_deviation, u_deviation, passed: zeta_deviation <= limit && u_deviation <= limit, mirrored: mirrored.points })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZetaFit {
    /// Linear coefficients of `λ(α) - λ(0)` and `σ(α) - σ(0)`: the estimate of `ζ'(0)`.
    pub c1: f64,
    pub s1: f64,
    /// Quadratic coefficients.
    pub c2: f64,
    pub s2: f64,
    pub passed: bool,
}

/// Least-squares polynomial fit of `ζ(α) - ζ(0)` through the origin.
pub fn fit_zeta_prime(result: &BranchResult) -> Result<ZetaFit> {
    let base = result.params_star;
    let pts: Vec<&BranchPoint> = result.points.iter().filter(|q| q.alpha != 0.0).collect();
    let alpha: Vec<f64> = pts.iter().map(|q| q.alpha).collect();
    let lambda: Vec<f64> = pts.iter().map(|q| q.lambda - base.lambda).collect();
    let sigma: Vec<f64> = pts.iter().map(|q| q.sigma - base.sigma).collect();
    fit_series(&alpha, &lambda, &sigma)
}

/// Fits `c₁α + c₂α² + ...` with higher powers as nuisance terms, up to
/// degree `min(6, n - 2)`.
pub fn fit_series(alpha: &[f64], lambda: &[f64], sigma: &[f64]) -> Result<ZetaFit> {
    let n = alpha.len();
    if n < 4 {
        return Err(HopfError::Precondition(format!("fitting ζ'(0) needs at least 4 nonzero α, got {n}")));
    }
    let degree = (n - 2).clamp(2, 6);
    let scale = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let v = DMatrix::from_fn(n, degree, |i, j| (alpha[i] / scale).powi(j as i32 + 1));
    let svd = v.svd(true, true);
    let solve = |y: &[f64]| -> Result<Vec<f64>> {
        let c = svd.solve(&DVector::from_column_slice(y), 1e-14).map_err(|e| HopfError::Degenerate(format!("fit failed: {e}")))?;
        Ok((0..degree).map(|j| c[j] / scale.powi(j as i32 + 1)).collect())
    };
    let (cl, cs) = (solve(lambda)?, solve(sigma)?);
    Ok(ZetaFit { c1: cl[0], s1: cs[0], c2: cl[1], s2: cs[1], passed: cl[0].abs() <= FIT_TOLERANCE && cs[0].abs() <= FIT_TOLERANCE })
}

/// `θ ∈ [0, 2π)` with `e^{iθ} = (p - iq) / √(p² + q²)`; `τ_θ` then moves
/// `l`-value `(p, q)` to `(√(p² + q²), 0)`.
pub fn phase_angle(l: PhasePair) -> f64 {
    Complex64::new(l.p, -l.q).arg().rem_euclid(2.0 * PI)
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniquenessSample {
    pub theta: f64,
    pub alpha: f64,
    /// `l`-value of the converged point.
    pub l_value: PhasePair,
    /// `‖u - u_ref‖` for the solve seeded at `τ_θ(α u★)`.
    pub deviation: f64,
    pub newton_iters: usize,
    /// Angle recovered from `l(τ_θ u_ref)`; equals `2π - θ` modulo `2π`.
    pub recovered_theta: f64,
    /// `‖τ_recovered τ_θ u_ref - u_ref‖`.
    pub phase_error: f64,
}

/// Solves the branch system at `reference.alpha` from the translated seed
/// `τ_θ(α u★)`, and checks that the phase formula undoes `τ_θ` on the
/// reference solution.
pub fn sample_uniqueness(
    p: &ProblemDef,
    m: &AmplitudeFunctional,
    star: &ExtendedState,
    reference: &BranchPoint,
    theta: f64,
    opts: &NewtonOptions,
) -> Result<UniquenessSample> {
    let alpha = reference.alpha;
    let seed = ExtendedState { params: star.params, u: translate(&star.u.scale(alpha), theta) };
    let point = solve_branch_point(p, m, &star.u, alpha, &seed, opts)?;
    let moved = translate(&reference.u, theta);
    let recovered_theta = phase_angle(functional_l(m, &moved));
    let phase_error = translate(&moved, recovered_theta).sub(&reference.u).norm_l2();
    Ok(UniquenessSample {
        theta,
        alpha,
        l_value: point.l_check,
        deviation: point.u.sub(&reference.u).norm_l2(),
        newton_iters: point.newton_iters,
        recovered_theta,
        phase_error,
    })
}
