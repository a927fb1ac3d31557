use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{resolve_system, Method};
use crate::data::{simulate_collect, ExcitationSpec};
use crate::error::{Error, Result};
use crate::sdp::{SolveStatus, SolverSettings};
use crate::synthesis::{synthesize, IlmiConfig, Norm, ProblemSpec, StructurePattern};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub system: String,
    pub norm: Norm,
    pub pattern: StructurePattern,
    pub eps: f64,
    #[serde(rename = "T")]
    pub t_values: Vec<usize>,
    pub methods: Vec<Method>,
    pub seed: u64,
    #[serde(default)]
    pub excitation: ExcitationSpec,
    #[serde(default)]
    pub ilmi: IlmiConfig,
    #[serde(default)]
    pub solver: SolverSettings,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            system: "h2-example".into(),
            norm: Norm::H2,
            pattern: "110;011".parse().expect("valid pattern"),
            eps: 0.1,
            t_values: vec![10, 50, 100, 200],
            methods: vec![Method::OursStructured, Method::BaselineConvex],
            seed: 0,
            excitation: ExcitationSpec::default(),
            ilmi: IlmiConfig::default(),
            solver: SolverSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    #[serde(rename = "T")]
    pub t: usize,
    pub method: String,
    pub seconds: f64,
    pub iterations: usize,
    pub n_variables: usize,
    pub status: SolveStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }

    /// For each `T`, whether the first method took at least as long as every other.
    pub fn first_not_faster(&self) -> Vec<(usize, bool)> {
        let Some(first) = self.config.methods.first().map(|m| m.label()) else { return Vec::new() };
        self.config
            .t_values
            .iter()
            .map(|&t| {
                let at_t: Vec<&BenchRow> = self.rows.iter().filter(|r| r.t == t).collect();
                let lead = at_t.iter().find(|r| r.method == first).map(|r| r.seconds);
                let ok = lead.is_some_and(|s| at_t.iter().filter(|r| r.method != first).all(|r| s >= r.seconds));
                (t, ok)
            })
            .collect()
    }
}

/// Times each method on one trajectory per `T`, sequentially so timings do not compete.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.t_values.is_empty() || cfg.t_values.contains(&0) {
        return Err(Error::InvalidArgument("bench needs T values ≥ 1".into()));
    }
    cfg.ilmi.validate()?;
    let sys = resolve_system(&cfg.system)?;
    let longest = *cfg.t_values.iter().max().expect("non-empty");
    let full = simulate_collect(&sys, longest, cfg.eps, cfg.seed, &cfg.excitation)?;
    let mut rows = Vec::new();
    for &t in &cfg.t_values {
        let traj = full.prefix(t)?;
        for &method in &cfg.methods {
            let spec = ProblemSpec::data_driven(
                sys.clone(),
                traj.clone(),
                cfg.norm,
                method.structure(&cfg.pattern),
                method.multipliers(),
            )?;
            let result = synthesize(&spec, &cfg.ilmi, &cfg.solver)?;
            log::info!("bench T={t} {}: {:.3}s {}", method.label(), result.seconds, result.status);
            rows.push(BenchRow {
                t,
                method: method.label().into(),
                seconds: (result.seconds * 1e6).round() / 1e6,
                iterations: result.iterations,
                n_variables: result.n_variables,
                status: result.status,
            });
        }
    }
    Ok(BenchReport { config: cfg.clone(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_rows_and_csv() {
        let cfg = BenchConfig { t_values: vec![6, 12], ..Default::default() };
        let report = run_bench(&cfg).unwrap();
        assert_eq!(report.rows.len(), 4);
        let csv = report.to_csv_string().unwrap();
        assert!(csv.starts_with("T,method,seconds,iterations,n_variables,status"));
        let vars: Vec<usize> = report
            .rows
            .iter()
            .filter(|r| r.method == "ours-structured")
            .map(|r| r.n_variables)
            .collect();
        assert!(vars[1] > vars[0]);
        assert_eq!(report.first_not_faster().len(), 2);
    }

    #[test]
    fn rejects_empty_grid() {
        let cfg = BenchConfig { t_values: vec![], ..Default::default() };
        assert!(run_bench(&cfg).is_err());
    }
}
