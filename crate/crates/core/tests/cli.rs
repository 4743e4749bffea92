use std::path::{Path, PathBuf};
use std::process::Command;

use hopf_core::cli::{run, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use serde_json::Value;
use tempfile::TempDir;

const COARSE: &str = "L = 20.0\ndx = 0.2\n";
const COARSE_SOLVER: &str = "[solver]\nn_t = 6\nalpha_max = 0.5\nalpha_steps = 10\n";

struct Run {
    dir: TempDir,
    code: i32,
}

impl Run {
    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&std::fs::read_to_string(self.out().join(name)).unwrap()).unwrap()
    }

    fn csv(&self, name: &str) -> (Vec<String>, Vec<Vec<f64>>) {
        let mut r = csv::Reader::from_path(self.out().join(name)).unwrap();
        let headers = r.headers().unwrap().iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.unwrap().iter().map(|c| if c.is_empty() { f64::NAN } else { c.parse().unwrap() }).collect())
            .collect();
        (headers, rows)
    }
}

fn hopf(sub: &str, config: &str, extra: &[&str]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, config).unwrap();
    let out = dir.path().join("out");
    let mut args = vec!["hopf", sub, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let code = run(args);
    Run { dir, code }
}

fn coarse(problem: &str) -> String {
    format!("[problem]\n{problem}{COARSE}{COARSE_SOLVER}")
}

#[test]
fn check_passes_on_defaults_and_echoes_seed() {
    let r = hopf("check", "[problem]\nvariant = \"semilinear\"\n", &["--seed", "7"]);
    assert_eq!(r.code, EXIT_OK);
    let report = r.json("report.json");
    assert_eq!(report["schema"], 1);
    assert_eq!(report["seed"], 7);
    assert_eq!(report["command"], "check");
    assert_eq!(report["config"]["solver"]["n_t"], 16);
    let mu = report["report"]["mu_prime_0"][0].as_f64().unwrap();
    assert!((mu - 2.0 / 3.0).abs() < 1e-2, "{mu}");
    let (headers, rows) = r.csv("resolvent.csv");
    assert_eq!(headers, ["n", "norm_estimate", "M_n"]);
    assert!(rows.len() >= 60);
}

#[test]
fn broken_hypotheses_exit_one_with_their_verdict() {
    for (problem, broken) in [
        ("variant = \"synthetic_double\"\n", "h2"),
        ("zero_lambda_coupling = true\n", "h3"),
        ("variant = \"synthetic_resonant_2i\"\n", "h4"),
    ] {
        let r = hopf("check", &format!("[problem]\n{problem}"), &[]);
        assert_eq!(r.code, EXIT_FAILURE, "{broken}");
        let v = &r.json("report.json")["report"]["verdicts"];
        for h in ["h1", "h2", "h3", "h4", "h5"] {
            assert_eq!(v[h], h != broken, "{broken}: {h} = {}", v[h]);
        }
    }
}

#[test]
fn usage_and_config_errors_exit_two() {
    let missing = run(["hopf", "check", "--config", "/nonexistent/run.toml"]);
    assert_eq!(missing, EXIT_USAGE);
    assert_eq!(run(["hopf", "branch"]), EXIT_USAGE);
    assert_eq!(run(["hopf", "frobnicate", "--config", "x.toml"]), EXIT_USAGE);
    assert_eq!(run(["hopf", "--help"]), EXIT_OK);
    assert_eq!(run(["hopf", "--version"]), EXIT_OK);
    for config in ["[problem\n", "[problem]\nkappa = 2.0\n", "[solver]\nalpha_steps = 1\n", "[solver]\nnewton_tol = 0.0\n"] {
        let r = hopf("check", config, &[]);
        assert_eq!(r.code, EXIT_USAGE, "{config}");
        assert!(!r.out().exists());
    }
}

#[test]
fn verify_exact_rejects_variants_without_oracle() {
    for variant in ["quasilinear", "synthetic_double"] {
        let r = hopf("verify-exact", &format!("[problem]\nvariant = \"{variant}\"\n"), &[]);
        assert_eq!(r.code, EXIT_USAGE, "{variant}");
    }
}

#[test]
fn branch_in_consistent_mode_is_exact() {
    let r = hopf("branch", &coarse("consistent_rho = true\n"), &["--threads", "2"]);
    assert_eq!(r.code, EXIT_OK);
    let (headers, rows) = r.csv("branch.csv");
    assert_eq!(headers, ["alpha", "lambda", "sigma", "eta_norm", "residual", "newton_iters"]);
    assert_eq!(rows.len(), 11);
    for row in &rows {
        let (alpha, lambda, sigma) = (row[0], row[1], row[2]);
        assert!((lambda - alpha * alpha).abs() <= 1e-9 && sigma.abs() <= 1e-9, "{row:?}");
    }
    let s = r.json("branch_summary.json");
    assert_eq!(s["passed"], true);
    assert!((s["zeta_fit"]["c2"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(s["symmetry"]["passed"], true);
    assert!(s.get("trajectories").is_none());
}

#[test]
fn branch_with_zero_amplitude_is_a_single_row() {
    let config = format!("[problem]\nconsistent_rho = true\n{COARSE}[solver]\nn_t = 4\nalpha_max = 0.0\n");
    let r = hopf("branch", &config, &["--skip-check"]);
    assert_eq!(r.code, EXIT_OK);
    let (_, rows) = r.csv("branch.csv");
    assert_eq!(rows, vec![vec![0.0; 6]]);
    assert!(r.json("branch_summary.json")["zeta_fit"]["error"].is_string());
}

#[test]
fn quasilinear_branch_reports_flat_start() {
    let config = format!("[problem]\nvariant = \"quasilinear\"\nconsistent_rho = true\n{COARSE}[solver]\nn_t = 6\nalpha_max = 0.3\nalpha_steps = 6\n[output]\nformat = \"json\"\ntrajectories = true\n");
    let r = hopf("branch", &config, &["--skip-check"]);
    assert_eq!(r.code, EXIT_OK);
    let s = r.json("branch_summary.json");
    assert_eq!(s["zeta_fit"]["passed"], true, "{}", s["zeta_fit"]);
    assert_eq!(s["trajectories"].as_array().unwrap().len(), 7);
    let table = r.json("branch.json");
    assert_eq!(table.as_array().unwrap().len(), 7);
    assert!(table[3]["lambda"].is_number());
}

#[test]
fn verify_exact_in_both_modes() {
    let r = hopf("verify-exact", &coarse("consistent_rho = true\n"), &[]);
    assert_eq!(r.code, EXIT_OK);
    let (headers, rows) = r.csv("exact.csv");
    assert_eq!(headers, ["alpha", "lambda_computed", "lambda_exact", "abs_err"]);
    assert!(rows.iter().all(|row| row[3] <= 1e-9));
    let s = r.json("exact_summary.json");
    assert!(s["max_error"].as_f64().unwrap() <= 1e-8 && s["observed_constant"].is_null());

    let r = hopf("verify-exact", &coarse(""), &[]);
    assert_eq!(r.code, EXIT_OK);
    let s = r.json("exact_summary.json");
    let c = s["observed_constant"].as_f64().unwrap();
    assert!(c > 0.0 && c <= 1.0, "{c}");
}

#[test]
fn extended_reports_bijectivity_and_flux() {
    let r = hopf("extended", &coarse("consistent_rho = true\n"), &[]);
    assert_eq!(r.code, EXIT_OK);
    let s = r.json("extended.json");
    assert_eq!(s["bijectivity"]["ok"], true);
    let p = s["flux"]["p"].as_f64().unwrap();
    let fd = s["finite_difference"]["re_mu_prime"].as_f64().unwrap();
    assert!((p - fd).abs() < 1e-3 * fd, "{p} vs {fd}");

    let r = hopf("extended", "[problem]\nvariant = \"synthetic_resonant_2i\"\n[solver]\nn_t = 4\n", &[]);
    assert_eq!(r.code, EXIT_FAILURE);
    assert_eq!(r.json("extended.json")["bijectivity"]["ok"], false);
}

#[test]
fn binary_exit_codes() {
    let exe = Path::new(env!("CARGO_BIN_EXE_hopf"));
    let status = Command::new(exe).args(["check", "--config", "/nonexistent.toml"]).output().unwrap().status;
    assert_eq!(status.code(), Some(EXIT_USAGE));
    let status = Command::new(exe).arg("--help").output().unwrap().status;
    assert_eq!(status.code(), Some(EXIT_OK));
}
