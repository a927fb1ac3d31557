//! Experiment runner: table presets, timing sweeps, reports and the
//! command-line front end.

mod bench;
pub mod cli;
mod report;
mod table;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{simulate_collect, ExcitationSpec, Trajectory};
use crate::error::{Error, Result};
use crate::model::{builtin_system, LinearSystem};
use crate::sdp::SolverSettings;
use crate::synthesis::{IlmiConfig, Multipliers, Norm, Structure, StructurePattern};

pub use bench::{run_bench, BenchConfig, BenchReport, BenchRow};
pub use report::{CheckOutcome, ReportRow, TableReport, MODEL_COLUMN};
pub use table::{run_experiment, table_preset};

/// Builtin plant name or path to a system JSON file.
pub fn resolve_system(source: &str) -> Result<LinearSystem> {
    match builtin_system(source) {
        Some(sys) => Ok(sys),
        None if Path::new(source).exists() => LinearSystem::load(source),
        None => Err(Error::InvalidArgument(format!("unknown system `{source}` (not builtin, no such file)"))),
    }
}

/// One row family of a comparison table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Unstructured gain, one multiplier for all samples.
    Shared,
    /// Unstructured gain, one multiplier per sample.
    Ours,
    /// Diagonal-`P` convex restriction with one shared multiplier.
    BaselineConvex,
    /// Diagonal-`P` convex restriction with per-sample multipliers.
    BaselineConvexPerSample,
    /// Iterative linearization with one shared multiplier.
    OursStructuredShared,
    /// Iterative linearization with per-sample multipliers.
    OursStructured,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Shared,
        Method::Ours,
        Method::BaselineConvex,
        Method::OursStructuredShared,
        Method::BaselineConvexPerSample,
        Method::OursStructured,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Shared => "shared-alpha",
            Method::Ours => "ours",
            Method::BaselineConvex => "baseline-convex",
            Method::BaselineConvexPerSample => "baseline-convex*",
            Method::OursStructuredShared => "ours-structured#",
            Method::OursStructured => "ours-structured",
        }
    }

    pub fn is_structured(self) -> bool {
        !matches!(self, Method::Shared | Method::Ours)
    }

    pub fn multipliers(self) -> Multipliers {
        match self {
            Method::Shared | Method::BaselineConvex | Method::OursStructuredShared => Multipliers::Shared,
            _ => Multipliers::PerSample,
        }
    }

    /// Single convex solve, so the ordering and monotonicity properties hold exactly.
    pub fn is_convex(self) -> bool {
        !matches!(self, Method::OursStructuredShared | Method::OursStructured)
    }

    pub fn structure(self, pattern: &StructurePattern) -> Structure {
        match self {
            Method::Shared | Method::Ours => Structure::Unstructured,
            Method::BaselineConvex | Method::BaselineConvexPerSample => Structure::PdiagBaseline(pattern.clone()),
            Method::OursStructuredShared | Method::OursStructured => Structure::Structured(pattern.clone()),
        }
    }

    /// Methods whose model-based programs coincide share a class.
    pub fn model_class(self) -> Method {
        match self {
            Method::Shared | Method::Ours => Method::Ours,
            Method::BaselineConvex | Method::BaselineConvexPerSample => Method::BaselineConvex,
            Method::OursStructuredShared | Method::OursStructured => Method::OursStructured,
        }
    }

    /// The shared-multiplier counterpart of a per-sample method.
    pub fn shared_counterpart(self) -> Option<Method> {
        match self {
            Method::Ours => Some(Method::Shared),
            Method::BaselineConvexPerSample => Some(Method::BaselineConvex),
            Method::OursStructured => Some(Method::OursStructuredShared),
            _ => None,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::Parse(format!("unknown method `{s}`")))
    }
}

/// A data-driven column: trajectory length and noise bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    #[serde(rename = "T")]
    pub t: usize,
    pub eps: f64,
}

/// Expected model-based value for one method class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelTarget {
    pub method: Method,
    pub gamma: f64,
    pub rel_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    /// Builtin name or system file path.
    pub system: String,
    pub norm: Norm,
    pub pattern: StructurePattern,
    pub cells: Vec<Cell>,
    pub methods: Vec<Method>,
    /// Adds the model-based `(A,B)` column.
    pub model_column: bool,
    pub model_targets: Vec<ModelTarget>,
    pub seed: u64,
    #[serde(default)]
    pub excitation: ExcitationSpec,
    #[serde(default)]
    pub ilmi: IlmiConfig,
    #[serde(default)]
    pub solver: SolverSettings,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.iter().any(|c| c.t == 0 || !(c.eps >= 0.0) || !c.eps.is_finite()) {
            return Err(Error::InvalidArgument("cells need T ≥ 1 and finite eps ≥ 0".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        self.ilmi.validate()
    }

    /// One trajectory per distinct noise bound, long enough for every cell
    /// that uses it; shorter cells take prefixes.
    pub fn trajectories(&self, sys: &LinearSystem) -> Result<Vec<Trajectory>> {
        self.cells
            .iter()
            .map(|cell| {
                let longest = self
                    .cells
                    .iter()
                    .filter(|c| c.eps == cell.eps)
                    .map(|c| c.t)
                    .max()
                    .unwrap_or(cell.t);
                let mut traj = simulate_collect(sys, longest, cell.eps, self.seed, &self.excitation)?;
                traj.meta.system = Some(self.system.clone());
                traj.prefix(cell.t)
            })
            .collect()
    }

    /// Column header for a cell: only the coordinate that varies is shown.
    pub fn column_label(&self, cell: &Cell) -> String {
        let t_varies = self.cells.iter().any(|c| c.t != cell.t);
        let eps_varies = self.cells.iter().any(|c| c.eps != cell.eps);
        match (t_varies, eps_varies) {
            (true, false) => format!("T={}", cell.t),
            (false, true) => format!("eps={}", cell.eps),
            _ => format!("T={},eps={}", cell.t, cell.eps),
        }
    }
}
