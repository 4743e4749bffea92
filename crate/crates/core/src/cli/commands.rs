use std::f64::consts::PI;
use std::path::PathBuf;

use serde_json::{json, Map, Value};

use super::config::{ProblemVariant, RunConfig};
use super::output::{write_json, Table};
use crate::error::{HopfError, Result};
use crate::hopf::{
    check_symmetry_45, continue_branch, critical_guess, decompose_flux_48, fit_zeta_prime, solve_extended, verify_dhstar_bijective,
    BranchResult, ExtendedState, NewtonOptions, RECONSTRUCTION_TOLERANCE,
};
use crate::periodic_space::{build_functional_m, AmplitudeFunctional};
use crate::problem::ProblemDef;
use crate::reaction_diffusion::exact_branch;
use crate::spectral::{build_projection, check_hypotheses, transversality, CheckOptions, HypothesisReport, SpectralDecomposition};

/// Largest `C` accepted in the standard-mode bound `error ≤ C dx²`.
pub const EXACT_CONSTANT_LIMIT: f64 = 1.0;
/// Tolerance of the exact-branch comparison in consistent mode.
pub const EXACT_CONSISTENT_TOLERANCE: f64 = 1e-8;
/// Time samples per period in the pointwise exact-branch comparison.
const EXACT_TIME_SAMPLES: usize = 16;

pub struct Context {
    pub config: RunConfig,
    pub config_path: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
}

impl Context {
    fn newton(&self) -> NewtonOptions {
        NewtonOptions { tol: self.config.solver.newton_tol, max_iter: self.config.solver.max_iter }
    }

    /// Common header of every JSON output.
    fn envelope(&self, command: &str, body: Value) -> Value {
        let mut out = Map::new();
        out.insert("schema".into(), json!(1));
        out.insert("command".into(), json!(command));
        out.insert("seed".into(), json!(self.seed));
        out.insert("config_path".into(), json!(self.config_path.display().to_string()));
        out.insert("config".into(), serde_json::to_value(&self.config).unwrap_or(Value::Null));
        if let Value::Object(body) = body {
            out.extend(body);
        }
        Value::Object(out)
    }

    fn write_json(&self, name: &str, command: &str, body: Value) -> Result<()> {
        write_json(&self.out, name, &self.envelope(command, body)).map_err(io_error)?;
        println!("wrote {}", self.out.join(name).display());
        Ok(())
    }

    fn write_table(&self, table: &Table, stem: &str) -> Result<()> {
        let name = table.write(&self.out, stem, self.config.output.format).map_err(io_error)?;
        println!("wrote {}", self.out.join(name).display());
        Ok(())
    }
}

fn io_error(e: std::io::Error) -> HopfError {
    HopfError::Config(format!("cannot write output: {e}"))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Problem, projection, functional and critical point shared by the solver
/// subcommands.
struct Critical {
    p: ProblemDef,
    sd: SpectralDecomposition,
    m: AmplitudeFunctional,
    star: ExtendedState,
    iterations: usize,
    residual: f64,
}

fn critical(ctx: &Context) -> Result<Critical> {
    let p = ctx.config.problem.build()?;
    let sd = build_projection(&p)?;
    let m = build_functional_m(&sd.psi_star, &sd.phi_adj)?;
    let (star, stats) = solve_extended(&p, &m, &critical_guess(&sd, ctx.config.solver.n_t), &ctx.newton())?;
    log::info!("critical point λ* = {:.3e}, σ* = {:.3e} after {} iterations", star.params.lambda, star.params.sigma, stats.iterations);
    Ok(Critical { p, sd, m, star, iterations: stats.iterations, residual: stats.residual })
}

fn hypotheses(ctx: &Context) -> Result<HypothesisReport> {
    let p = ctx.config.problem.build()?;
    let opts = CheckOptions { n_max: ctx.config.solver.n_max_resolvent, seed: ctx.seed, ..CheckOptions::default() };
    Ok(check_hypotheses(&p, &opts))
}

pub fn check(ctx: &Context) -> Result<i32> {
    let report = hypotheses(ctx)?;
    let v = &report.verdicts;
    for (name, ok) in [("H1", v.h1), ("H2", v.h2), ("H3", v.h3), ("H4", v.h4), ("H5", v.h5)] {
        println!("{name} {}", verdict(ok));
    }
    if let Some(mu) = report.mu_prime_0 {
        println!("Re mu'(0) = {:.6}", mu.re);
    }
    for d in &report.diagnostics {
        println!("  {d}");
    }
    if let Some(table) = &report.resolvent {
        let mut t = Table::new(&["n", "norm_estimate", "M_n"]);
        for e in &table.entries {
            t.push(vec![json!(e.n), json!(e.norm_estimate), json!(e.m_n)]);
        }
        ctx.write_table(&t, "resolvent")?;
    }
    let body = json!({ "passed": v.all(), "report": report });
    ctx.write_json("report.json", "check", body)?;
    Ok(if v.all() { 0 } else { 1 })
}

pub fn extended(ctx: &Context) -> Result<i32> {
    let c = critical(ctx)?;
    let bij = verify_dhstar_bijective(&c.p, &c.m, &c.star.u, ctx.seed);
    let flux = decompose_flux_48(&c.p, &c.sd, &c.star.u);
    let fd = transversality(&c.p, CheckOptions::default().d_lambda);

    println!("lambda* = {:.6e}  sigma* = {:.6e}  ({} iterations)", c.star.params.lambda, c.star.params.sigma, c.iterations);
    println!("DH* smallest singular value {:.4e}, leakage {:.2e}: {}", bij.smallest_singular_value, bij.leakage, verdict(bij.ok));
    let flux_json = match &flux {
        Ok(f) => {
            println!("flux split p = {:.6}  q = {:.3e}  (reconstruction {:.2e})", f.p, f.q, f.reconstruction);
            json!({ "p": f.p, "q": f.q, "reconstruction": f.reconstruction })
        }
        Err(e) => {
            println!("flux split failed: {e}");
            json!({ "error": e.to_string() })
        }
    };
    let fd_json = match &fd {
        Ok(t) => json!({ "re_mu_prime": t.finite_difference.re, "im_mu_prime": t.finite_difference.im }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let flux_ok = flux.as_ref().is_ok_and(|f| f.reconstruction <= RECONSTRUCTION_TOLERANCE);
    let passed = bij.ok && flux_ok;
    let body = json!({
        "passed": passed,
        "lambda_star": c.star.params.lambda,
        "sigma_star": c.star.params.sigma,
        "newton_iters": c.iterations,
        "residual": c.residual,
        "bijectivity": {
            "smallest_singular_value": bij.smallest_singular_value,
            "leakage": bij.leakage,
            "ok": bij.ok,
        },
        "flux": flux_json,
        "finite_difference": fd_json,
    });
    ctx.write_json("extended.json", "extended", body)?;
    Ok(if passed { 0 } else { 1 })
}

fn run_branch(ctx: &Context, c: &Critical) -> Result<BranchResult> {
    let s = &ctx.config.solver;
    continue_branch(&c.p, &c.m, &c.star, s.alpha_max, s.alpha_steps, &ctx.newton())
}

fn truncation_json(result: &BranchResult) -> Value {
    match &result.truncated {
        Some(t) => {
            println!("branch truncated at alpha = {} (last good alpha = {}): {}", t.alpha, t.last_good_alpha, t.reason);
            json!({ "alpha": t.alpha, "last_good_alpha": t.last_good_alpha, "reason": t.reason })
        }
        None => Value::Null,
    }
}

pub fn branch(ctx: &Context, skip_check: bool) -> Result<i32> {
    if !skip_check {
        let report = hypotheses(ctx)?;
        if !report.verdicts.all() {
            println!("hypothesis check failed; rerun with --skip-check to continue anyway");
            for d in &report.diagnostics {
                println!("  {d}");
            }
            return Ok(1);
        }
    }
    let c = critical(ctx)?;
    let result = run_branch(ctx, &c)?;
    let tol = ctx.config.solver.newton_tol;

    let mut table = Table::new(&["alpha", "lambda", "sigma", "eta_norm", "residual", "newton_iters"]);
    for q in &result.points {
        table.push(vec![json!(q.alpha), json!(q.lambda), json!(q.sigma), json!(q.eta_norm), json!(q.residual), json!(q.newton_iters)]);
    }
    ctx.write_table(&table, "branch")?;

    let symmetry = check_symmetry_45(&result, &c.p, &c.m, &ctx.newton());
    let symmetry_json = match &symmetry {
        Ok(s) => {
            println!("symmetry: zeta {:.2e}, u {:.2e}: {}", s.zeta_deviation, s.u_deviation, verdict(s.passed));
            json!({ "zeta_deviation": s.zeta_deviation, "u_deviation": s.u_deviation, "passed": s.passed })
        }
        Err(e) => {
            println!("symmetry check failed: {e}");
            json!({ "error": e.to_string(), "passed": false })
        }
    };
    let fit_json = match fit_zeta_prime(&result) {
        Ok(f) => {
            println!("zeta'(0): c1 = {:.3e}, s1 = {:.3e}: {}; c2 = {:.6}", f.c1, f.s1, verdict(f.passed), f.c2);
            json!({ "c1": f.c1, "s1": f.s1, "c2": f.c2, "s2": f.s2, "passed": f.passed })
        }
        Err(e) => json!({ "error": e.to_string() }),
    };

    let max_residual = result.points.iter().fold(0.0f64, |m, q| m.max(q.residual));
    let passed = result.truncated.is_none() && max_residual <= tol;
    let mut body = json!({
        "passed": passed,
        "points": result.points.len(),
        "max_residual": max_residual,
        "lambda_star": result.params_star.lambda,
        "sigma_star": result.params_star.sigma,
        "truncated": truncation_json(&result),
        "symmetry": symmetry_json,
        "zeta_fit": fit_json,
    });
    if ctx.config.output.trajectories {
        let traj: Vec<Value> = result.points.iter().map(|q| json!({ "alpha": q.alpha, "u": q.u.to_json() })).collect();
        body["trajectories"] = Value::Array(traj);
    }
    ctx.write_json("branch_summary.json", "branch", body)?;
    Ok(if passed { 0 } else { 1 })
}

pub fn verify_exact(ctx: &Context) -> Result<i32> {
    let problem = &ctx.config.problem;
    if problem.variant != ProblemVariant::Semilinear {
        return Err(HopfError::Config(format!(
            "verify-exact has a closed-form oracle only for the semilinear variant, not {:?}",
            problem.variant
        )));
    }
    let c = critical(ctx)?;
    let result = run_branch(ctx, &c)?;
    let grid = *c.p.grid();

    let mut table = Table::new(&["alpha", "lambda_computed", "lambda_exact", "abs_err"]);
    let mut errors = Vec::new();
    let mut max_error = 0.0f64;
    for q in &result.points {
        let lambda_exact = q.alpha * q.alpha;
        let abs_err = (q.lambda - lambda_exact).abs();
        let mut u_err = 0.0f64;
        for k in 0..EXACT_TIME_SAMPLES {
            let t = 2.0 * PI * k as f64 / EXACT_TIME_SAMPLES as f64;
            let exact = exact_branch(&grid, lambda_exact, t)?;
            let got = q.u.at(t);
            u_err = got.data().iter().zip(exact.data()).fold(u_err, |m, (a, b)| m.max((a - b).abs()));
        }
        max_error = max_error.max(abs_err).max(q.sigma.abs()).max(u_err);
        table.push(vec![json!(q.alpha), json!(q.lambda), json!(lambda_exact), json!(abs_err)]);
        errors.push(json!({ "alpha": q.alpha, "lambda_err": abs_err, "sigma_err": q.sigma.abs(), "u_max_err": u_err }));
    }
    ctx.write_table(&table, "exact")?;

    let dx2 = grid.dx * grid.dx;
    let (tolerance, observed_constant) = if problem.consistent_rho {
        (EXACT_CONSISTENT_TOLERANCE, Value::Null)
    } else {
        (EXACT_CONSTANT_LIMIT * dx2, json!(max_error / dx2))
    };
    let passed = result.truncated.is_none() && max_error <= tolerance;
    match observed_constant.as_f64() {
        Some(cst) => println!("max error {max_error:.3e} = {cst:.3e} dx^2 (limit {EXACT_CONSTANT_LIMIT} dx^2): {}", verdict(passed)),
        None => println!("max error {max_error:.3e} (tolerance {tolerance:.0e}): {}", verdict(passed)),
    }
    let body = json!({
        "passed": passed,
        "max_error": max_error,
        "tolerance": tolerance,
        "observed_constant": observed_constant,
        "constant_limit": if problem.consistent_rho { Value::Null } else { json!(EXACT_CONSTANT_LIMIT) },
        "truncated": truncation_json(&result),
        "errors": errors,
    });
    ctx.write_json("exact_summary.json", "verify-exact", body)?;
    Ok(if passed { 0 } else { 1 })
}
