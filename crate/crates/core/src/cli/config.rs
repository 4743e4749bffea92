use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HopfError, Result};
use crate::problem::ProblemDef;
use crate::reaction_diffusion::{make_problem, Boundary, ExampleConfig, Variant};
use crate::synthetic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemVariant {
    Semilinear,
    Quasilinear,
    /// Two-point problem with `±i` of multiplicity two.
    SyntheticDouble,
    /// Two-point problem with `2i` in the spectrum.
    #[serde(rename = "synthetic_resonant_2i")]
    SyntheticResonant2i,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub variant: ProblemVariant,
    #[serde(alias = "L")]
    pub half_length: f64,
    pub dx: f64,
    pub consistent_rho: bool,
    pub zero_lambda_coupling: bool,
    pub boundary: Boundary,
}

impl Default for ProblemSection {
    fn default() -> Self {
        let e = ExampleConfig::default();
        Self {
            variant: ProblemVariant::Semilinear,
            half_length: e.half_length,
            dx: e.dx,
            consistent_rho: e.consistent_rho,
            zero_lambda_coupling: e.zero_lambda_coupling,
            boundary: e.boundary,
        }
    }
}

impl ProblemSection {
    /// The reaction-diffusion configuration, or `None` for synthetic problems.
    pub fn example(&self) -> Option<ExampleConfig> {
        let variant = match self.variant {
            ProblemVariant::Semilinear => Variant::Semilinear,
            ProblemVariant::Quasilinear => Variant::Quasilinear,
            _ => return None,
        };
        Some(ExampleConfig {
            variant,
            half_length: self.half_length,
            dx: self.dx,
            consistent_rho: self.consistent_rho,
            boundary: self.boundary,
            zero_lambda_coupling: self.zero_lambda_coupling,
        })
    }

    pub fn build(&self) -> Result<ProblemDef> {
        match self.variant {
            ProblemVariant::SyntheticDouble => Ok(synthetic::double_eigenvalue()),
            ProblemVariant::SyntheticResonant2i => Ok(synthetic::resonant_2i()),
            _ => make_problem(&self.example().expect("reaction-diffusion variant")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub newton_tol: f64,
    pub max_iter: usize,
    pub n_t: usize,
    pub alpha_max: f64,
    pub alpha_steps: usize,
    pub n_max_resolvent: i64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { newton_tol: 1e-10, max_iter: 25, n_t: 16, alpha_max: 0.5, alpha_steps: 10, n_max_resolvent: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Format of the tables; summaries are always JSON.
    pub format: OutputFormat,
    pub path: PathBuf,
    /// 0 warnings, 1 info, 2 debug, 3 trace.
    pub verbosity: u8,
    /// Include full branch trajectories in the JSON summary.
    pub trajectories: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { format: OutputFormat::Csv, path: PathBuf::from("out"), verbosity: 0, trajectories: false }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub solver: SolverSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HopfError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HopfError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        let bad = |msg: String| Err(HopfError::Config(msg));
        if !(s.newton_tol > 0.0 && s.newton_tol.is_finite()) {
            return bad(format!("solver.newton_tol must be positive, got {}", s.newton_tol));
        }
        if s.max_iter == 0 || s.n_t == 0 {
            return bad("solver.max_iter and solver.n_t must be positive".into());
        }
        if !(s.alpha_max >= 0.0 && s.alpha_max.is_finite()) {
            return bad(format!("solver.alpha_max must be finite and >= 0, got {}", s.alpha_max));
        }
        if s.alpha_steps < 2 {
            return bad(format!("solver.alpha_steps must be >= 2, got {}", s.alpha_steps));
        }
        if s.n_max_resolvent < 4 {
            return bad(format!("solver.n_max_resolvent must be >= 4, got {}", s.n_max_resolvent));
        }
        if let Some(e) = self.problem.example() {
            e.validate().map_err(|err| HopfError::Config(err.to_string()))?;
        }
        Ok(())
    }
}
