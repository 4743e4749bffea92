//! Numerical checks of the spectral hypotheses: a simple eigenpair at `±i`,
//! transversal crossing, invertibility of `in - A` for `n ≠ ±1` with a
//! bound `‖(in - A)^{-1}‖ ≤ M/n`, and the spectral projection onto the
//! critical eigenspace.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::linalg::{inverse_norm_estimate, random_complex_unit, smallest_singular_values, ComplexLu, SparseMatrix};
use crate::periodic_space::{cnorm_l2, cpair, ComplexStateVector, Grid};
use crate::problem::{DerivativeReport, ProblemDef};

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Largest accepted eigen-residual `‖Aψ - μψ‖` for a unit vector.
pub const EIGEN_RESIDUAL_LIMIT: f64 = 1e-8;
pub const SIMPLICITY_TOLERANCE: f64 = 1e-3;
pub const TRANSVERSALITY_TOLERANCE: f64 = 1e-6;
/// Relative agreement required between the two routes to `μ'(0)`.
pub const TRANSVERSALITY_AGREEMENT: f64 = 1e-4;
/// Largest `|μ - i|` accepted as "the eigenvalue at i".
pub const EIGENVALUE_TOLERANCE: f64 = 1e-2;
pub const PLATEAU_FACTOR: f64 = 1.05;

const EIGEN_SEED: u64 = 0x5eed;

/// `(μ, ψ)` with `‖ψ‖ = 1` in the discrete L² norm.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub mu: Complex64,
    pub psi: ComplexStateVector,
    pub residual: f64,
    pub iterations: usize,
}

fn complex_matvec(a: &SparseMatrix, x: &[Complex64]) -> Vec<Complex64> {
    a.matvec_complex(x)
}

/// Fixes the phase so that the first entry of (nearly) maximal modulus is
/// real and positive.
fn fix_phase(z: &mut [Complex64]) {
    let max = z.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    if max == 0.0 {
        return;
    }
    let k = z.iter().position(|c| c.norm() >= max * (1.0 - 1e-12)).expect("maximum exists");
    let phase = z[k].conj() / z[k].norm();
    z.iter_mut().for_each(|c| *c *= phase);
}

fn shifted_factor(a: &SparseMatrix, target: Complex64) -> Result<(ComplexLu, Complex64)> {
    let offset = 1e-7 * target.norm().max(1.0);
    let shift = target + Complex64::new(offset, offset);
    Ok((ComplexLu::factor_shifted(a, shift)?, shift))
}

/// Shifted inverse iteration with Rayleigh-quotient eigenvalue estimates.
pub fn eigenpair_of(a: &SparseMatrix, grid: &Grid, target: Complex64) -> Result<EigenPair> {
    let (lu, _) = shifted_factor(a, target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(EIGEN_SEED);
    let mut x = random_complex_unit(a.nrows(), &mut rng);
    let mut best: Option<(f64, Complex64, Vec<Complex64>)> = None;
    let mut stall = 0;
    let max_iter = 60;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let y = lu.solve(&x)?;
        let s = cnorm_l2(grid, &y);
        if !(s > 0.0 && s.is_finite()) {
            return Err(HopfError::Convergence { iterations: it, residual: f64::NAN });
        }
        x = y.into_iter().map(|v| v / s).collect();
        let ax = complex_matvec(a, &x);
        let mu = cpair(grid, &ax, &x);
        let r: Vec<Complex64> = ax.iter().zip(&x).map(|(p, q)| p - mu * q).collect();
        let res = cnorm_l2(grid, &r);
        match &best {
            Some((b, _, _)) if res >= 0.5 * b => stall += 1,
            _ => stall = 0,
        }
        if best.as_ref().is_none_or(|(b, _, _)| res < *b) {
            best = Some((res, mu, x.clone()));
        }
        if res <= 1e-14 * mu.norm().max(1.0) || stall >= 3 {
            break;
        }
    }
    let (residual, mu, mut psi) = best.expect("at least one iteration");
    if !(residual <= EIGEN_RESIDUAL_LIMIT) {
        return Err(HopfError::Convergence { iterations, residual });
    }
    fix_phase(&mut psi);
    Ok(EigenPair { mu, psi: ComplexStateVector::from_complex(*grid, &psi)?, residual, iterations })
}

/// Eigenpair of `A` nearest to `target`.
pub fn eigenpair_near(p: &ProblemDef, target: Complex64) -> Result<EigenPair> {
    eigenpair_of(p.a(), p.grid(), target)
}

/// Relative distance of `ψ` from the line spanned by `reference`.
pub fn collinearity_error(grid: &Grid, psi: &[Complex64], reference: &[Complex64]) -> f64 {
    let c = cpair(grid, psi, reference) / cpair(grid, reference, reference);
    let d: Vec<Complex64> = psi.iter().zip(reference).map(|(a, b)| a - c * b).collect();
    cnorm_l2(grid, &d) / cnorm_l2(grid, psi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Simplicity {
    /// Smallest singular value of `μ - A`.
    pub smallest: f64,
    /// Second-smallest singular value of `μ - A`.
    pub margin: f64,
    pub simple: bool,
}

pub fn check_simplicity_of(a: &SparseMatrix, mu: Complex64) -> Result<Simplicity> {
    let eps = 1e-12 * a.norm_one().max(1.0);
    let lu = ComplexLu::factor_shifted(a, mu + Complex64::new(eps, eps))?;
    let apply = |x: &[Complex64]| -> Vec<Complex64> {
        let ax = a.matvec_complex(x);
        x.iter().zip(ax).map(|(v, w)| mu * v - w).collect()
    };
    let s = smallest_singular_values(&apply, &lu, 2.min(a.nrows()), 300, EIGEN_SEED)?;
    let (smallest, margin) = (s[0], s.get(1).copied().unwrap_or(f64::INFINITY));
    Ok(Simplicity { smallest, margin, simple: margin > SIMPLICITY_TOLERANCE && smallest < 1e-8 * margin })
}

/// Singular-value test of `dim N(μ - A) = 1`.
pub fn check_simplicity(p: &ProblemDef, pair: &EigenPair) -> Result<Simplicity> {
    check_simplicity_of(p.a(), pair.mu)
}

/// Critical eigenpair, adjoint eigenvector and the rank-two projection
/// `P w = ⟨w, φ⟩ψ★ + ⟨w, conj φ⟩ conj ψ★`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    pub mu: Complex64,
    /// Eigenvector scaled to unit sup norm, largest entry real positive.
    pub psi_star: ComplexStateVector,
    /// Solves `Aᵀφ = conj(μ) φ`, normalized so that `⟨ψ★, φ⟩ = 1`.
    pub phi_adj: ComplexStateVector,
    pub pair: EigenPair,
}

impl SpectralDecomposition {
    pub fn grid(&self) -> &Grid {
        self.psi_star.grid()
    }

    /// Coefficients `(⟨w, φ⟩, ⟨w, conj φ⟩)`.
    pub fn coefficients(&self, w: &[Complex64]) -> (Complex64, Complex64) {
        let g = self.grid();
        let phi = self.phi_adj.to_complex();
        let phic: Vec<Complex64> = phi.iter().map(|z| z.conj()).collect();
        (cpair(g, w, &phi), cpair(g, w, &phic))
    }

    pub fn project(&self, w: &[Complex64]) -> Vec<Complex64> {
        let (a, b) = self.coefficients(w);
        self.psi_star.to_complex().iter().map(|z| a * z + b * z.conj()).collect()
    }

    pub fn complement(&self, w: &[Complex64]) -> Vec<Complex64> {
        let pw = self.project(w);
        w.iter().zip(pw).map(|(a, b)| a - b).collect()
    }
}

pub fn spectral_decomposition_of(a: &SparseMatrix, grid: &Grid, target: Complex64) -> Result<SpectralDecomposition> {
    let pair = eigenpair_of(a, grid, target)?;
    let mut psi = pair.psi.to_complex();
    let sup = psi.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    psi.iter_mut().for_each(|z| *z /= sup);
    fix_phase(&mut psi);

    let (lu, _) = shifted_factor(a, pair.mu)?;
    let at = a.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(EIGEN_SEED);
    let mut phi = random_complex_unit(a.nrows(), &mut rng);
    let mut prev = f64::INFINITY;
    for _ in 0..60 {
        let y = lu.solve_adjoint(&phi)?;
        let s = cnorm_l2(grid, &y);
        phi = y.into_iter().map(|v| v / s).collect();
        let atp = at.matvec_complex(&phi);
        let r: Vec<Complex64> = atp.iter().zip(&phi).map(|(x, y)| x - pair.mu.conj() * y).collect();
        let res = cnorm_l2(grid, &r);
        if res <= 1e-14 * pair.mu.norm().max(1.0) || res >= 0.5 * prev {
            break;
        }
        prev = res;
    }
    let c = cpair(grid, &psi, &phi);
    if !(c.norm() > 1e-8 * cnorm_l2(grid, &psi)) {
        return Err(HopfError::Degenerate(format!("⟨ψ★, φ⟩ = {c} vanishes")));
    }
    // ⟨ψ, φ/conj(c)⟩ = ⟨ψ, φ⟩ / c = 1
    let phi: Vec<Complex64> = phi.into_iter().map(|z| z / c.conj()).collect();
    Ok(SpectralDecomposition {
        mu: pair.mu,
        psi_star: ComplexStateVector::from_complex(*grid, &psi)?,
        phi_adj: ComplexStateVector::from_complex(*grid, &phi)?,
        pair,
    })
}

/// Decomposition at the eigenvalue nearest `i`.
pub fn build_projection(p: &ProblemDef) -> Result<SpectralDecomposition> {
    spectral_decomposition_of(p.a(), p.grid(), I)
}

/// Applies the real-linear map `h_λu(λ, 0)` to a complex vector.
pub fn apply_lambda_u_complex(p: &ProblemDef, lambda: f64, z: &[Complex64]) -> Vec<Complex64> {
    let zero = vec![0.0; z.len()];
    let re: Vec<f64> = z.iter().map(|c| c.re).collect();
    let im: Vec<f64> = z.iter().map(|c| c.im).collect();
    let h = p.h();
    h.apply_lambda_u(lambda, &zero, &re).into_iter().zip(h.apply_lambda_u(lambda, &zero, &im)).map(|(a, b)| Complex64::new(a, b)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transversality {
    /// Central difference of the eigenvalue of `A + h_u(±dλ, 0)`.
    pub finite_difference: Complex64,
    /// `⟨h_λu(0, 0) ψ★, φ⟩`.
    pub adjoint: Complex64,
    pub d_lambda: f64,
    pub transversal: bool,
}

impl Transversality {
    pub fn value(&self) -> Complex64 {
        self.adjoint
    }
}

/// `μ'(0)` by two independent routes, which must agree.
pub fn transversality(p: &ProblemDef, d_lambda: f64) -> Result<Transversality> {
    let (lo, hi) = p.lambda_window();
    if !(d_lambda > 0.0 && lo < -d_lambda && d_lambda < hi) {
        return Err(HopfError::Domain(format!("dλ = {d_lambda} must be positive with ±dλ inside the λ window")));
    }
    let sd = build_projection(p)?;
    let plus = eigenpair_of(&p.linearization(d_lambda), p.grid(), sd.mu)?;
    let minus = eigenpair_of(&p.linearization(-d_lambda), p.grid(), sd.mu)?;
    let fd = (plus.mu - minus.mu) / (2.0 * d_lambda);
    let hpsi = apply_lambda_u_complex(p, 0.0, &sd.psi_star.to_complex());
    let adjoint = cpair(p.grid(), &hpsi, &sd.phi_adj.to_complex());
    let diff = (fd - adjoint).norm();
    if diff > TRANSVERSALITY_AGREEMENT * fd.norm().max(adjoint.norm()) + 1e-8 {
        return Err(HopfError::Inconsistent(format!("μ'(0) routes disagree: finite difference {fd}, adjoint pairing {adjoint}")));
    }
    Ok(Transversality { finite_difference: fd, adjoint, d_lambda, transversal: adjoint.re.abs() > TRANSVERSALITY_TOLERANCE })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventEntry {
    pub n: i64,
    pub norm_estimate: Option<f64>,
    /// `n ‖(in - A)^{-1}‖` for `n >= 2`.
    pub m_n: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventTable {
    pub entries: Vec<ResolventEntry>,
    /// Modes whose factorization failed or was too ill-conditioned.
    pub failed: Vec<i64>,
    /// `max M_n` over the successful modes `n >= 2`.
    pub m: f64,
    pub h4: bool,
    pub h5: bool,
}

/// Resolvent norms for `n = 0, 2, ..., n_max` by power iteration on
/// `(in - A)^{-H}(in - A)^{-1}`.
///
/// The plateau verdict compares the largest `M_n` on the tail
/// `[n_max/2, n_max]` with the head `[2, n_max/2)`: it holds when the tail
/// does not exceed the head by more than 5%.
pub fn resolvent_scan(p: &ProblemDef, n_max: i64, probes: usize, seed: u64) -> Result<ResolventTable> {
    if n_max < 2 {
        return Err(HopfError::Precondition(format!("n_max = {n_max} must be at least 2")));
    }
    let ns: Vec<i64> = std::iter::once(0).chain(2..=n_max).collect();
    let entries: Vec<ResolventEntry> = ns
        .par_iter()
        .map(|&n| {
            let est = p.resolvent_factor(n).and_then(|lu| Ok(inverse_norm_estimate(&lu, probes, seed.wrapping_add(n as u64))?));
            match est {
                Ok(e) => ResolventEntry { n, norm_estimate: Some(e), m_n: (n >= 2).then_some(n as f64 * e), error: None },
                Err(err) => ResolventEntry { n, norm_estimate: None, m_n: None, error: Some(err.to_string()) },
            }
        })
        .collect();
    let failed: Vec<i64> = entries.iter().filter(|e| e.error.is_some()).map(|e| e.n).collect();
    let max_over =
        |lo: i64, hi: i64| entries.iter().filter(|e| e.n >= lo && e.n <= hi).filter_map(|e| e.m_n).fold(f64::NEG_INFINITY, f64::max);
    let m = max_over(2, n_max).max(0.0);
    let half = n_max / 2;
    let head = max_over(2, half - 1);
    let tail = max_over(half, n_max);
    let h5 = head == f64::NEG_INFINITY || tail <= PLATEAU_FACTOR * head;
    Ok(ResolventTable { h4: failed.is_empty(), h5, entries, failed, m })
}

/// Resolvent norm at any `n`, without the resonance guard; infinite when
/// `in - A` cannot be factored.
pub fn resolvent_norm_unchecked(p: &ProblemDef, n: i64, probes: usize, seed: u64) -> f64 {
    match ComplexLu::factor_shifted(p.a(), Complex64::new(0.0, n as f64)) {
        Ok(lu) => inverse_norm_estimate(&lu, probes, seed).unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenSummary {
    pub mu: Complex64,
    pub residual: f64,
    pub iterations: usize,
    pub distance_to_i: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdicts {
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    pub h4: bool,
    pub h5: bool,
}

impl Verdicts {
    pub fn all(&self) -> bool {
        self.h1 && self.h2 && self.h3 && self.h4 && self.h5
    }
}

/// Measured quantities and verdicts for the hypotheses.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub derivatives: DerivativeReport,
    pub eig_plus: Option<EigenSummary>,
    pub simplicity: Option<Simplicity>,
    pub mu_prime_0: Option<Complex64>,
    pub transversality: Option<Transversality>,
    pub resolvent: Option<ResolventTable>,
    pub m: Option<f64>,
    pub verdicts: Verdicts,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub derivative_samples: usize,
    pub derivative_step: f64,
    pub d_lambda: f64,
    pub n_max: i64,
    pub probes: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { derivative_samples: 4, derivative_step: 1e-5, d_lambda: 1e-4, n_max: 64, probes: 30, seed: 42 }
    }
}

pub fn check_hypotheses(p: &ProblemDef, opts: &CheckOptions) -> HypothesisReport {
    let mut diagnostics = Vec::new();
    let derivatives = p.check_derivatives(opts.derivative_samples, opts.derivative_step, opts.seed);
    if !derivatives.passed {
        diagnostics.push(format!("H1: derivative check failed (max relative error {:.3e})", derivatives.max_error));
    }

    let pair = eigenpair_near(p, I);
    let (eig_plus, simplicity, h2) = match &pair {
        Ok(pair) => {
            let dist = (pair.mu - I).norm();
            let simp = check_simplicity(p, pair);
            if dist > EIGENVALUE_TOLERANCE {
                diagnostics.push(format!("H2: nearest eigenvalue {} is {dist:.3e} away from i", pair.mu));
            }
            let simp = match simp {
                Ok(s) => {
                    if !s.simple {
                        diagnostics.push(format!("H2: eigenvalue not simple (singular values {:.3e}, {:.3e})", s.smallest, s.margin));
                    }
                    Some(s)
                }
                Err(e) => {
                    diagnostics.push(format!("H2: simplicity check failed: {e}"));
                    None
                }
            };
            let ok = dist <= EIGENVALUE_TOLERANCE && simp.is_some_and(|s| s.simple);
            let summary = EigenSummary { mu: pair.mu, residual: pair.residual, iterations: pair.iterations, distance_to_i: dist };
            (Some(summary), simp, ok)
        }
        Err(e) => {
            diagnostics.push(format!("H2: no eigenpair near i: {e}"));
            (None, None, false)
        }
    };

    let trans = transversality(p, opts.d_lambda);
    let (transversality, h3) = match trans {
        Ok(t) => {
            if !t.transversal {
                diagnostics.push(format!("H3: Re μ'(0) = {:.3e} is not transversal", t.adjoint.re));
            }
            (Some(t), t.transversal)
        }
        Err(e) => {
            diagnostics.push(format!("H3: {e}"));
            (None, false)
        }
    };

    let (resolvent, h4, h5) = match resolvent_scan(p, opts.n_max, opts.probes, opts.seed) {
        Ok(t) => {
            if !t.h4 {
                diagnostics.push(format!("H4: in - A singular or ill-conditioned for n in {:?}", t.failed));
            }
            if !t.h5 {
                diagnostics.push("H5: n‖(in - A)^{-1}‖ still growing on the tail of the scan".to_string());
            }
            let (h4, h5) = (t.h4, t.h5);
            (Some(t), h4, h5)
        }
        Err(e) => {
            diagnostics.push(format!("H4: {e}"));
            (None, false, false)
        }
    };

    HypothesisReport {
        verdicts: Verdicts { h1: derivatives.passed, h2, h3, h4, h5 },
        derivatives,
        eig_plus,
        simplicity,
        mu_prime_0: transversality.map(|t| t.value()),
        transversality,
        m: resolvent.as_ref().map(|t| t.m),
        resolvent,
        diagnostics,
    }
}
