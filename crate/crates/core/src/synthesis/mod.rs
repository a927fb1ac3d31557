//! Convex programs for H2 / H∞ state-feedback synthesis, the iterative
//! linearization loop for structured gains, and certification of results.

pub mod certify;
mod common;
mod h2;
mod hinf;
mod ilmi;
pub mod linearize;
pub mod pattern;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Trajectory;
use crate::error::{dim_err, Error, Result};
use crate::model::{Gain, LinearSystem};
use crate::sdp::{ConicProgram, SolveStatus, SolverSettings};

pub use certify::{bisect_norm, certify_bound, robust_verify, RobustReport, RobustSample};
pub use h2::build_h2_program;
pub use hinf::build_hinf_program;
pub use ilmi::{synth_structured_ilmi, synth_unstructured, synthesize};
pub use linearize::{linearize_inverse, InverseLinearization};
pub use pattern::StructurePattern;

/// Lower bound imposed on the S-procedure scalar `β`.
pub const BETA_MIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    H2,
    Hinf,
}

impl std::str::FromStr for Norm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h2" => Ok(Norm::H2),
            "hinf" | "h-inf" | "hinfinity" => Ok(Norm::Hinf),
            other => Err(Error::Parse(format!("unknown norm `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knowledge {
    ModelBased,
    DataDriven,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "pattern", rename_all = "snake_case")]
pub enum Structure {
    Unstructured,
    /// Gain restricted to a pattern; solved by iterative linearization.
    Structured(StructurePattern),
    /// Convex restriction with diagonal `P` and `L` on the pattern; one solve.
    PdiagBaseline(StructurePattern),
}

impl Structure {
    pub fn pattern(&self) -> Option<&StructurePattern> {
        match self {
            Structure::Unstructured => None,
            Structure::Structured(p) | Structure::PdiagBaseline(p) => Some(p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multipliers {
    /// One `α_i` per data point.
    PerSample,
    /// A single `α` for all data points.
    Shared,
}

/// Everything needed to assemble one synthesis problem.
///
/// For data-driven problems only `C, D, G, H` of `system` are used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub norm: Norm,
    pub knowledge: Knowledge,
    pub structure: Structure,
    pub multipliers: Multipliers,
    pub system: LinearSystem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Trajectory>,
}

impl ProblemSpec {
    pub fn model_based(system: LinearSystem, norm: Norm, structure: Structure) -> Result<Self> {
        let spec = Self {
            norm,
            knowledge: Knowledge::ModelBased,
            structure,
            multipliers: Multipliers::PerSample,
            system,
            data: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn data_driven(
        system: LinearSystem,
        data: Trajectory,
        norm: Norm,
        structure: Structure,
        multipliers: Multipliers,
    ) -> Result<Self> {
        let spec = Self {
            norm,
            knowledge: Knowledge::DataDriven,
            structure,
            multipliers,
            system,
            data: Some(data),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.norm == Norm::H2 && !self.system.has_zero_feedthrough() {
            return Err(Error::NonzeroFeedthrough);
        }
        match (self.knowledge, &self.data) {
            (Knowledge::DataDriven, None) => {
                return Err(Error::InvalidArgument("data-driven problem needs a trajectory".into()))
            }
            (Knowledge::ModelBased, Some(_)) => {
                return Err(Error::InvalidArgument("model-based problem must not carry a trajectory".into()))
            }
            (Knowledge::DataDriven, Some(traj)) => {
                traj.validate()?;
                if traj.nx() != self.system.nx() {
                    return Err(dim_err("trajectory states", self.system.nx(), traj.nx()));
                }
                if traj.nu() != self.system.nu() {
                    return Err(dim_err("trajectory inputs", self.system.nu(), traj.nu()));
                }
            }
            _ => {}
        }
        if let Some(p) = self.structure.pattern() {
            p.check_dims(self.system.nu(), self.system.nx())?;
        }
        Ok(())
    }

    pub fn trajectory(&self) -> Result<&Trajectory> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("data-driven problem needs a trajectory".into()))
    }

    /// Builds the program for this spec; linearized steps need `p_tilde` and `lambda`.
    pub fn build(&self, p_tilde: Option<&DMatrix<f64>>, lambda: Option<f64>) -> Result<ConicProgram> {
        match self.norm {
            Norm::H2 => build_h2_program(self, p_tilde, lambda),
            Norm::Hinf => build_hinf_program(self, p_tilde, lambda),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IlmiConfig {
    pub lambda0: f64,
    pub mu: f64,
    pub delta: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Initial linearization point; identity when absent.
    #[serde(with = "crate::io::opt_rows", skip_serializing_if = "Option::is_none")]
    pub p0: Option<DMatrix<f64>>,
}

impl Default for IlmiConfig {
    fn default() -> Self {
        Self { lambda0: 1.0, mu: 2.0, delta: 1e8, tol: 0.01, max_iters: 200, p0: None }
    }
}

impl IlmiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 1.0) {
            return Err(Error::InvalidArgument(format!("mu must exceed 1, got {}", self.mu)));
        }
        if !(self.delta > 0.0 && self.tol > 0.0 && self.lambda0 > 0.0) {
            return Err(Error::InvalidArgument("lambda0, delta and tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// One linearized step of the iterative loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lambda: f64,
    #[serde(with = "finite")]
    pub gamma: f64,
    #[serde(with = "finite")]
    pub slack_trace: f64,
    #[serde(with = "finite")]
    pub p_change: f64,
    #[serde(with = "finite")]
    pub inverse_gap: f64,
    pub status: SolveStatus,
    pub ipm_iterations: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MultiplierValues {
    pub alpha: Vec<f64>,
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    #[serde(rename = "K")]
    pub k: Gain,
    #[serde(rename = "P", with = "crate::io::rows")]
    pub p: DMatrix<f64>,
    /// Performance bound; infinite when no optimal solve was obtained.
    #[serde(with = "finite")]
    pub gamma: f64,
    pub status: SolveStatus,
    /// Solves for the iterative loop, interior-point iterations for single solves.
    pub iterations: usize,
    pub multipliers: MultiplierValues,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack_trace: Option<f64>,
    #[serde(default)]
    pub history: Vec<IterationRecord>,
    /// Scalar decision variables of the (last) program.
    pub n_variables: usize,
    pub seconds: f64,
    pub norm: Norm,
    pub structure: Structure,
}

impl SynthesisResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        crate::io::write_text(path, &serde_json::to_string_pretty(self)?)
    }
}

/// Non-finite floats as JSON `null`, read back as `+∞`.
mod finite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Solver settings and loop configuration bundled for callers that run many cells.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub solver: SolverSettings,
    pub ilmi: IlmiConfig,
}
