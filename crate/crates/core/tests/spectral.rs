use hopf_core::linalg::SparseMatrix;
use hopf_core::periodic_space::{cnorm_l2, cpair, Grid};
use hopf_core::reaction_diffusion::{critical_mode, kappa_on, make_problem, ExampleConfig, Variant};
use hopf_core::spectral::*;
use hopf_core::synthetic;
use hopf_core::HopfError;
use nalgebra::DMatrix;
use num_complex::Complex64;

fn cfg(consistent: bool, dx: f64) -> ExampleConfig {
    ExampleConfig { consistent_rho: consistent, dx, ..Default::default() }
}

fn coarse(consistent: bool) -> ExampleConfig {
    ExampleConfig { consistent_rho: consistent, dx: 0.2, half_length: 20.0, ..Default::default() }
}

/// Singular values of `μ - A` from a dense SVD of the real form.
fn dense_singular_values(a: &SparseMatrix, mu: Complex64) -> Vec<f64> {
    let n = a.nrows();
    let ad = a.to_dense();
    let mut r = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let re = if i == j { mu.re } else { 0.0 } - ad[(i, j)];
            let im = if i == j { mu.im } else { 0.0 };
            r[(i, j)] = re;
            r[(i + n, j + n)] = re;
            r[(i, j + n)] = -im;
            r[(i + n, j)] = im;
        }
    }
    let mut s: Vec<f64> = r.singular_values().iter().copied().collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // each singular value of the complex matrix appears twice
    s.into_iter().step_by(2).collect()
}

#[test]
fn consistent_eigenpair_is_exact() {
    let p = make_problem(&cfg(true, 0.05)).unwrap();
    let pair = eigenpair_near(&p, I).unwrap();
    println!("consistent μ = {} residual {:.3e} iterations {}", pair.mu, pair.residual, pair.iterations);
    assert!((pair.mu - I).norm() <= 1e-10);
    assert!(pair.residual <= 1e-8);
    let g = *p.grid();
    let err = collinearity_error(&g, &pair.psi.to_complex(), &critical_mode(&g).to_complex());
    assert!(err <= 1e-10, "{err}");
}

#[test]
fn standard_eigenpair_converges_at_second_order() {
    let mus: Vec<Complex64> =
        [0.1, 0.05, 0.025].iter().map(|&dx| eigenpair_near(&make_problem(&cfg(false, dx)).unwrap(), I).unwrap().mu).collect();
    println!("standard μ(dx) = {mus:?}");
    assert!((mus[1] - I).norm() <= 5e-3);
    let ratio = (mus[0] - mus[1]).norm() / (mus[1] - mus[2]).norm();
    println!("refinement ratio {ratio}");
    assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    let p = make_problem(&cfg(false, 0.05)).unwrap();
    let pair = eigenpair_near(&p, I).unwrap();
    let g = *p.grid();
    let err = collinearity_error(&g, &pair.psi.to_complex(), &critical_mode(&g).to_complex());
    assert!(err <= 5e-3, "{err}");
}

#[test]
fn conjugate_target_gives_conjugate_pair() {
    let p = make_problem(&coarse(false)).unwrap();
    let plus = eigenpair_near(&p, I).unwrap();
    let minus = eigenpair_near(&p, -I).unwrap();
    assert!((plus.mu.conj() - minus.mu).norm() < 1e-10);
    let diff = plus.psi.conj().to_complex().iter().zip(minus.psi.to_complex()).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    assert!(diff < 1e-8, "{diff}");
}

#[test]
fn simplicity_matches_dense_svd() {
    let p = make_problem(&coarse(false)).unwrap();
    assert!(p.grid().nx <= 400);
    let pair = eigenpair_near(&p, I).unwrap();
    let s = check_simplicity(&p, &pair).unwrap();
    let dense = dense_singular_values(p.a(), pair.mu);
    println!("simplicity {s:?}, dense {:?}", &dense[..3]);
    assert!(s.simple && s.margin > 1e-3);
    assert!((s.margin - dense[1]).abs() <= 1e-6 * dense[1]);
    assert!(dense[0] < 1e-10);

    let far = check_simplicity_of(p.a(), Complex64::new(0.0, 5.0)).unwrap();
    assert!(!far.simple && far.smallest > 1.0);
}

#[test]
fn double_eigenvalue_is_not_simple() {
    let p = synthetic::double_eigenvalue();
    let pair = eigenpair_near(&p, I).unwrap();
    let s = check_simplicity(&p, &pair).unwrap();
    assert!(!s.simple, "{s:?}");
    assert!(s.margin < 1e-8);
    let q = synthetic::resonant_2i();
    let s = check_simplicity(&q, &eigenpair_near(&q, I).unwrap()).unwrap();
    assert!(s.simple && (s.margin - 1.0).abs() < 1e-8, "{s:?}");
}

#[test]
fn transversality_routes_agree_on_the_example() {
    let p = make_problem(&cfg(false, 0.05)).unwrap();
    let t = transversality(&p, 1e-4).unwrap();
    println!("μ'(0): fd {} adjoint {}", t.finite_difference, t.adjoint);
    assert!((t.adjoint.re - 2.0 / 3.0).abs() <= 1e-2);
    assert!(t.adjoint.im.abs() <= 1e-2);
    assert!(t.transversal);

    // oracle: ∫κ⁴/∫κ² by the trapezoid rule on the same grid
    let g = *p.grid();
    let k = kappa_on(&g);
    let ratio = k.iter().map(|x| x.powi(4)).sum::<f64>() / k.iter().map(|x| x * x).sum::<f64>();
    assert!((t.adjoint.re - ratio).abs() < 1e-3, "{ratio}");
}

#[test]
fn transversality_of_simple_couplings() {
    let p = make_problem(&ExampleConfig { zero_lambda_coupling: true, ..coarse(true) }).unwrap();
    let t = transversality(&p, 1e-4).unwrap();
    assert!(t.adjoint.norm() < 1e-12 && !t.transversal);

    let base = make_problem(&coarse(false)).unwrap();
    let nx = base.grid().nx;
    let h = hopf_core::problem::CubicReaction { weight: vec![0.3; nx], cubic: 0.0 };
    let q = base.with_nonlinearity("uniform shift", std::sync::Arc::new(h));
    let t = transversality(&q, 1e-4).unwrap();
    assert!((t.adjoint - Complex64::new(0.3, 0.0)).norm() < 1e-10, "{}", t.adjoint);
    assert!((t.finite_difference - Complex64::new(0.3, 0.0)).norm() < 1e-8);
}

#[test]
fn projection_properties() {
    let p = make_problem(&coarse(false)).unwrap();
    let sd = build_projection(&p).unwrap();
    let g = *p.grid();
    let psi = sd.psi_star.to_complex();
    let sup = psi.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    assert!((sup - 1.0).abs() < 1e-14);
    let pairing = cpair(&g, &psi, &sd.phi_adj.to_complex());
    assert!((pairing - 1.0).norm() < 1e-12);

    let ppsi = sd.project(&psi);
    assert!(ppsi.iter().zip(&psi).all(|(a, b)| (a - b).norm() < 1e-10));
    let conj: Vec<Complex64> = psi.iter().map(|z| z.conj()).collect();
    let pc = sd.project(&conj);
    assert!(pc.iter().zip(&conj).all(|(a, b)| (a - b).norm() < 1e-10));

    let w: Vec<Complex64> = (0..g.dim()).map(|k| Complex64::new((k as f64 * 0.3).sin(), (k as f64 * 0.7).cos())).collect();
    let pw = sd.project(&w);
    let ppw = sd.project(&pw);
    let d = pw.iter().zip(&ppw).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    assert!(d <= 1e-10, "{d}");

    // P commutes with A
    let apw = p.a().matvec_complex(&pw);
    let paw = sd.project(&p.a().matvec_complex(&w));
    let d: Vec<Complex64> = apw.iter().zip(&paw).map(|(a, b)| a - b).collect();
    assert!(cnorm_l2(&g, &d) <= 1e-8 * cnorm_l2(&g, &apw).max(1.0), "{}", cnorm_l2(&g, &d));

    // the complement is invariant under the resolvent at 2i
    let qw = sd.complement(&w);
    let x = p.solve_resolvent_raw(2, &qw).unwrap();
    let px = sd.project(&x);
    assert!(cnorm_l2(&g, &px) <= 1e-8 * cnorm_l2(&g, &x));
}

#[test]
fn resolvent_scan_on_the_example() {
    let p = make_problem(&cfg(false, 0.05)).unwrap();
    let t = resolvent_scan(&p, 64, 30, 42).unwrap();
    assert!(t.h4 && t.h5, "{:?}", t.failed);
    let m: Vec<(i64, f64)> = t.entries.iter().filter_map(|e| e.m_n.map(|m| (e.n, m))).collect();
    println!("M_n head {:?} M = {}", &m[..6], t.m);
    // normal operator: ‖(in - A)^{-1}‖ = 1/dist(in, spectrum) = 1/(n - 1) up to O(dx²)
    for &(n, mn) in &m {
        let expected = n as f64 / (n as f64 - 1.0);
        assert!((mn - expected).abs() < 1e-2 * expected, "n = {n}: {mn} vs {expected}");
    }
    let diag = resolvent_norm_unchecked(&make_problem(&cfg(true, 0.05)).unwrap(), 1, 30, 42);
    println!("n = 1 diagnostic {diag:e}");
    assert!(diag >= 1e6);
}

#[test]
fn resolvent_scan_dense_oracle() {
    let p = make_problem(&coarse(false)).unwrap();
    // clustered singular values (1 and 1.033 at n = 0) need many probes
    let t = resolvent_scan(&p, 8, 600, 1).unwrap();
    for e in t.entries.iter().filter(|e| e.n == 0 || e.n == 3) {
        let dense = dense_singular_values(p.a(), Complex64::new(0.0, e.n as f64));
        let exact = 1.0 / dense[0];
        assert!((e.norm_estimate.unwrap() - exact).abs() <= 1e-6 * exact, "n = {}", e.n);
    }
}

#[test]
fn resolvent_scan_detects_resonance_at_2i() {
    let p = synthetic::resonant_2i();
    let t = resolvent_scan(&p, 8, 20, 42).unwrap();
    assert!(!t.h4);
    assert_eq!(t.failed, vec![2]);
    let q = synthetic::double_eigenvalue();
    let t = resolvent_scan(&q, 8, 20, 42).unwrap();
    assert!(t.h4 && t.h5);
    assert!(matches!(resolvent_scan(&q, 1, 5, 0), Err(HopfError::Precondition(_))));
}

#[test]
fn hypothesis_report_on_defaults_and_breaks() {
    let opts = CheckOptions::default();
    let r = check_hypotheses(&make_problem(&ExampleConfig::default()).unwrap(), &opts);
    assert!(r.verdicts.all(), "{:?}", r.diagnostics);

    let opts = CheckOptions { n_max: 8, ..Default::default() };
    let r = check_hypotheses(&synthetic::double_eigenvalue(), &opts);
    assert!(!r.verdicts.h2 && r.verdicts.h1 && r.verdicts.h3 && r.verdicts.h4 && r.verdicts.h5, "{:?}", r.verdicts);
    let r = check_hypotheses(&synthetic::resonant_2i(), &opts);
    assert!(!r.verdicts.h4 && r.verdicts.h1 && r.verdicts.h2 && r.verdicts.h3, "{:?}", r.verdicts);
    let r = check_hypotheses(&make_problem(&ExampleConfig { zero_lambda_coupling: true, ..coarse(false) }).unwrap(), &opts);
    assert!(!r.verdicts.h3 && r.verdicts.h1 && r.verdicts.h2 && r.verdicts.h4 && r.verdicts.h5, "{:?}", r.verdicts);
}

#[test]
fn quasilinear_has_the_same_linear_part() {
    let c = ExampleConfig { variant: Variant::Quasilinear, ..coarse(false) };
    let p = make_problem(&c).unwrap();
    let q = make_problem(&coarse(false)).unwrap();
    assert_eq!(eigenpair_near(&p, I).unwrap().mu, eigenpair_near(&q, I).unwrap().mu);
    let _ = Grid::new(1.0, 0.5).unwrap();
}
