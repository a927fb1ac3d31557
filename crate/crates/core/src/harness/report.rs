use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::error::Result;
use crate::sdp::SolveStatus;

/// Column label of model-based cells.
pub const MODEL_COLUMN: &str = "(A,B)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    /// `(A,B)` for model-based cells, otherwise the data column label.
    pub column: String,
    #[serde(rename = "T")]
    pub t: Option<usize>,
    pub eps: Option<f64>,
    /// Bound from an optimal solve; `None` otherwise.
    pub gamma: Option<f64>,
    /// Norm of the synthesized gain on the known plant (model-based cells).
    pub oracle_norm: Option<f64>,
    pub seconds: f64,
    pub iterations: usize,
    pub n_variables: usize,
    pub status: SolveStatus,
    /// Annotation such as `realization-dependent` or `interpretation`.
    pub flag: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Informational checks are reported but do not decide the exit status.
    pub gating: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub checks: Vec<CheckOutcome>,
}

impl TableReport {
    /// All gating checks passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.gating).all(|c| c.passed)
    }

    pub fn row(&self, method: &str, column: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method && r.column == column)
    }

    fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = Vec::new();
        for r in &self.rows {
            if !cols.contains(&r.column) {
                cols.push(r.column.clone());
            }
        }
        cols
    }

    pub fn to_markdown(&self) -> String {
        let cfg = &self.config;
        let cols = self.columns();
        let mut out = String::new();
        let _ = writeln!(out, "## {}", cfg.name);
        let _ = writeln!(
            out,
            "\nsystem `{}`, norm {:?}, pattern `{}`, seed {}, tol_feas {:e}, tol_gap {:e}, strict_margin {:e}\n",
            cfg.system, cfg.norm, cfg.pattern, cfg.seed, cfg.solver.tol_feas, cfg.solver.tol_gap, cfg.solver.strict_margin
        );
        let _ = writeln!(out, "| method | {} |", cols.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(cols.len()));
        for m in &cfg.methods {
            let cells: Vec<String> = cols
                .iter()
                .map(|c| match self.row(m.label(), c) {
                    None => "(same)".to_string(),
                    Some(r) => match r.gamma {
                        Some(g) => format!("{g:.4}"),
                        None => r.status.to_string(),
                    },
                })
                .collect();
            let _ = writeln!(out, "| {} | {} |", m.label(), cells.join(" | "));
        }
        let _ = writeln!(
            out,
            "\n`*` per-sample multipliers on the baseline, `#` shared multiplier on the iterative method. \
             Baseline rows are an interpretation of the cited convex restriction. \
             Data-driven cells are realization-dependent."
        );
        let _ = writeln!(out, "\n### checks\n");
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            let kind = if c.gating { "" } else { " (informational)" };
            let _ = writeln!(out, "- {mark} {}{kind}: {}", c.name, c.detail);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "method", "column", "T", "eps", "gamma", "oracle_norm", "seconds", "iterations", "n_variables", "status",
            "flag",
        ])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.column.clone(),
                opt(r.t.map(|v| v.to_string())),
                opt(r.eps.map(|v| v.to_string())),
                opt(r.gamma.map(|v| format!("{v:.6}"))),
                opt(r.oracle_norm.map(|v| format!("{v:.6}"))),
                format!("{:.4}", r.seconds),
                r.iterations.to_string(),
                r.n_variables.to_string(),
                r.status.to_string(),
                opt(r.flag.clone()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.md`, `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write_all(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        crate::io::write_text(dir.join(format!("{stem}.md")), &self.to_markdown())?;
        self.write_csv(dir.join(format!("{stem}.csv")))?;
        crate::io::write_text(dir.join(format!("{stem}.json")), &serde_json::to_string_pretty(self)?)
    }
}
