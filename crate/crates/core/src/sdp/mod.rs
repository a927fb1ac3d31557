//! Conic-program IR over scalar and matrix variables with PSD block constraints,
//! and an embedded primal-dual interior-point solver.

mod expr;
mod ipm;
pub mod svec;

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigmin, is_symmetric, sym};

pub use expr::{MatExpr, ScalarExpr};

/// Relative asymmetry tolerated in LMI coefficients before they are symmetrized.
const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol_feas: f64,
    pub tol_gap: f64,
    /// Margin used for strict blocks: `F ≻ 0` is imposed as `F ⪰ margin·I`.
    pub strict_margin: f64,
    pub max_ipm_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol_feas: 1e-8, tol_gap: 1e-8, strict_margin: 1e-7, max_ipm_iters: 100 }
    }
}

/// Shape of a decision variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarKind {
    Scalar,
    /// Column vector of independent scalars.
    Vector { len: usize },
    /// Symmetric `n×n`, stored as `svec` coordinates.
    Symmetric { n: usize },
    Diagonal { n: usize },
    /// Dense `rows×cols`; with a mask, only entries marked `true` (row-major) are free
    /// and the rest are identically zero.
    Matrix { rows: usize, cols: usize, mask: Option<Vec<bool>> },
}

impl VarKind {
    pub fn matrix(rows: usize, cols: usize) -> Self {
        VarKind::Matrix { rows, cols, mask: None }
    }

    /// Matrix whose free entries are the nonzeros of `pattern`.
    pub fn masked(pattern: &DMatrix<f64>) -> Self {
        let (rows, cols) = pattern.shape();
        let mask = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| pattern[(i, j)] != 0.0)
            .collect();
        VarKind::Matrix { rows, cols, mask: Some(mask) }
    }

    /// Number of flattened scalars.
    pub fn len(&self) -> usize {
        match self {
            VarKind::Scalar => 1,
            VarKind::Vector { len } => *len,
            VarKind::Symmetric { n } => svec::svec_len(*n),
            VarKind::Diagonal { n } => *n,
            VarKind::Matrix { rows, cols, mask } => match mask {
                Some(m) => m.iter().filter(|&&b| b).count(),
                None => rows * cols,
            },
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            VarKind::Scalar => (1, 1),
            VarKind::Vector { len } => (*len, 1),
            VarKind::Symmetric { n } | VarKind::Diagonal { n } => (*n, *n),
            VarKind::Matrix { rows, cols, .. } => (*rows, *cols),
        }
    }

    /// `(row, col, weight)` placement of each flattened coordinate; symmetric
    /// off-diagonal coordinates also fill the mirrored entry.
    fn placements(&self) -> Vec<Vec<(usize, usize, f64)>> {
        match self {
            VarKind::Scalar => vec![vec![(0, 0, 1.0)]],
            VarKind::Vector { len } => (0..*len).map(|i| vec![(i, 0, 1.0)]).collect(),
            VarKind::Diagonal { n } => (0..*n).map(|i| vec![(i, i, 1.0)]).collect(),
            VarKind::Symmetric { n } => svec::svec_index(*n)
                .into_iter()
                .map(|(i, j)| {
                    if i == j {
                        vec![(i, i, 1.0)]
                    } else {
                        vec![(i, j, 1.0 / SQRT_2), (j, i, 1.0 / SQRT_2)]
                    }
                })
                .collect(),
            VarKind::Matrix { rows, cols, mask } => {
                let mut out = Vec::new();
                for i in 0..*rows {
                    for j in 0..*cols {
                        if mask.as_ref().is_none_or(|m| m[i * cols + j]) {
                            out.push(vec![(i, j, 1.0)]);
                        }
                    }
                }
                out
            }
        }
    }
}

/// Reference to a declared variable.
#[derive(Clone, Debug, PartialEq)]
pub struct VarHandle {
    pub name: String,
    pub kind: VarKind,
    pub offset: usize,
}

impl VarHandle {
    /// Matrix-valued affine expression equal to the variable.
    pub fn expr(&self) -> MatExpr {
        let (r, c) = self.kind.shape();
        let mut out = MatExpr::zeros(r, c);
        for (k, places) in self.kind.placements().into_iter().enumerate() {
            let mut m = DMatrix::zeros(r, c);
            for (i, j, w) in places {
                m[(i, j)] = w;
            }
            out.terms.insert(self.offset + k, m);
        }
        out
    }

    /// Scalar expression for a 1×1 variable.
    pub fn scalar(&self) -> ScalarExpr {
        assert_eq!(self.kind.shape(), (1, 1), "scalar() on non-scalar variable {}", self.name);
        ScalarExpr::var(self.offset)
    }

    /// Scalar expression for entry `k` of a vector variable.
    pub fn component(&self, k: usize) -> ScalarExpr {
        assert!(matches!(self.kind, VarKind::Vector { .. }), "component() needs a vector");
        assert!(k < self.kind.len());
        ScalarExpr::var(self.offset + k)
    }

    /// Reassembles the variable's value from the flattened vector.
    pub fn value(&self, x: &[f64]) -> DMatrix<f64> {
        self.expr().eval(x)
    }
}

#[derive(Clone, Debug)]
pub struct LmiBlock {
    pub expr: MatExpr,
    pub label: String,
    pub strict: bool,
}

#[derive(Clone, Debug)]
pub struct LinearConstraint {
    pub expr: ScalarExpr,
    pub label: String,
}

/// `minimize objective` subject to LMI blocks `⪰ 0` and affine scalars `≥ 0`.
#[derive(Clone, Debug, Default)]
pub struct ConicProgram {
    variables: Vec<VarHandle>,
    n_scalars: usize,
    lmis: Vec<LmiBlock>,
    linear: Vec<LinearConstraint>,
    objective: ScalarExpr,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: &str, kind: VarKind) -> Result<VarHandle> {
        if self.variables.iter().any(|v| v.name == name) {
            return Err(Error::DuplicateVariable(name.to_string()));
        }
        let handle = VarHandle { name: name.to_string(), kind, offset: self.n_scalars };
        self.n_scalars += handle.kind.len();
        self.variables.push(handle.clone());
        Ok(handle)
    }

    /// Adds `expr ⪰ 0`, or `expr ≻ 0` when `strict`.
    pub fn add_lmi(&mut self, expr: MatExpr, label: &str, strict: bool) -> Result<()> {
        let (r, c) = expr.shape();
        if r != c {
            return Err(Error::NotSquare { context: "add_lmi", rows: r, cols: c });
        }
        if !is_symmetric(&expr.constant, SYMMETRY_TOL) || !expr.terms.values().all(|m| is_symmetric(m, SYMMETRY_TOL)) {
            return Err(Error::Asymmetric("add_lmi"));
        }
        if let Some((&k, _)) = expr.terms.iter().next_back() {
            if k >= self.n_scalars {
                return Err(Error::UnknownVariable(format!("scalar index {k}")));
            }
        }
        let mut expr = expr;
        expr.constant = sym(&expr.constant);
        expr.terms = expr
            .terms
            .into_iter()
            .map(|(k, m)| (k, sym(&m)))
            .filter(|(_, m)| m.amax() != 0.0)
            .collect();
        self.lmis.push(LmiBlock { expr, label: label.to_string(), strict });
        Ok(())
    }

    /// Adds `expr ≥ 0`.
    pub fn add_linear(&mut self, expr: ScalarExpr, label: &str) -> Result<()> {
        if let Some((&k, _)) = expr.terms.iter().next_back() {
            if k >= self.n_scalars {
                return Err(Error::UnknownVariable(format!("scalar index {k}")));
            }
        }
        self.linear.push(LinearConstraint { expr, label: label.to_string() });
        Ok(())
    }

    pub fn set_objective(&mut self, expr: ScalarExpr) -> Result<()> {
        if let Some((&k, _)) = expr.terms.iter().next_back() {
            if k >= self.n_scalars {
                return Err(Error::UnknownVariable(format!("scalar index {k}")));
            }
        }
        self.objective = expr;
        Ok(())
    }

    pub fn variables(&self) -> &[VarHandle] {
        &self.variables
    }

    pub fn variable(&self, name: &str) -> Result<&VarHandle> {
        self.variables
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Total number of flattened scalar decision variables.
    pub fn n_scalars(&self) -> usize {
        self.n_scalars
    }

    pub fn lmis(&self) -> &[LmiBlock] {
        &self.lmis
    }

    pub fn linear_constraints(&self) -> &[LinearConstraint] {
        &self.linear
    }

    pub fn objective(&self) -> &ScalarExpr {
        &self.objective
    }

    /// Compact description for diffing programs.
    pub fn debug_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n_scalars": self.n_scalars,
            "variables": self.variables.iter().map(|v| serde_json::json!({
                "name": v.name,
                "kind": v.kind,
                "offset": v.offset,
                "len": v.kind.len(),
            })).collect::<Vec<_>>(),
            "lmi_blocks": self.lmis.iter().map(|b| serde_json::json!({
                "label": b.label,
                "size": b.expr.nrows(),
                "strict": b.strict,
                "n_terms": b.expr.terms.len(),
            })).collect::<Vec<_>>(),
            "linear": self.linear.iter().map(|l| l.label.clone()).collect::<Vec<_>>(),
            "objective": {
                "constant": self.objective.constant,
                "terms": self.objective.terms.iter().map(|(k, c)| (k.to_string(), *c)).collect::<BTreeMap<_, _>>(),
            },
        })
    }

    /// Runs the interior-point solver.
    pub fn solve(&self, settings: &SolverSettings) -> Solution {
        solve(self, settings)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    IterationLimit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical_failure",
            SolveStatus::IterationLimit => "iteration_limit",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    #[serde(skip)]
    pub values: BTreeMap<String, DMatrix<f64>>,
    pub objective_value: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    /// Flattened decision vector.
    pub x: Vec<f64>,
    /// Smallest eigenvalue of each LMI block at `x`, before any strict margin.
    pub block_min_eigs: Vec<f64>,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, name: &str) -> Result<&DMatrix<f64>> {
        self.values.get(name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        Ok(self.value(name)?[(0, 0)])
    }
}

/// Solves `prog` with the embedded interior-point method.
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> Solution {
    let m = prog.n_scalars;
    let mut blocks = Vec::with_capacity(prog.lmis.len() + prog.linear.len());
    for lmi in &prog.lmis {
        let n = lmi.expr.nrows();
        let mut c = lmi.expr.constant.clone();
        if lmi.strict {
            c -= DMatrix::identity(n, n) * settings.strict_margin;
        }
        blocks.push(ipm::Block {
            c,
            terms: lmi.expr.terms.iter().map(|(&k, f)| (k, -f)).collect(),
        });
    }
    for lin in &prog.linear {
        blocks.push(ipm::Block {
            c: DMatrix::from_element(1, 1, lin.expr.constant),
            terms: lin
                .expr
                .terms
                .iter()
                .map(|(&k, &f)| (k, DMatrix::from_element(1, 1, -f)))
                .collect(),
        });
    }
    let mut b = vec![0.0; m];
    for (&k, &c) in &prog.objective.terms {
        b[k] = -c;
    }
    let out = ipm::run(&blocks, &b, settings);
    let x = out.y;
    let values = prog
        .variables
        .iter()
        .map(|v| (v.name.clone(), v.value(&x)))
        .collect();
    let block_min_eigs = prog.lmis.iter().map(|l| eigmin(&l.expr.eval(&x))).collect();
    Solution {
        status: out.status,
        values,
        objective_value: prog.objective.eval(&x),
        residuals: Residuals { primal: out.pinf, dual: out.dinf, gap: out.relgap },
        iterations: out.iterations,
        x,
        block_min_eigs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn tight() -> SolverSettings {
        SolverSettings { strict_margin: 0.0, ..Default::default() }
    }

    fn program_scalar_lower_bound(scale: f64) -> (ConicProgram, VarHandle) {
        let mut p = ConicProgram::new();
        let x = p.add_variable("x", VarKind::Scalar).unwrap();
        p.add_lmi(MatExpr::from_scalar(&x.scalar()) - one(1.0), "x>=1", false).unwrap();
        p.set_objective(x.scalar() * scale).unwrap();
        (p, x)
    }

    fn program_trace(scale: f64) -> ConicProgram {
        let mut p = ConicProgram::new();
        let pm = p.add_variable("P", VarKind::Symmetric { n: 2 }).unwrap();
        p.add_lmi(pm.expr() - DMatrix::identity(2, 2), "P>=I", false).unwrap();
        p.set_objective(pm.expr().trace() * scale).unwrap();
        p
    }

    fn program_t(scale: f64) -> ConicProgram {
        let mut p = ConicProgram::new();
        let t = p.add_variable("t", VarKind::Scalar).unwrap();
        let te = MatExpr::from_scalar(&t.scalar());
        let blk = MatExpr::block(&[
            vec![te.clone(), MatExpr::constant(one(1.0))],
            vec![MatExpr::constant(one(1.0)), te],
        ])
        .unwrap();
        p.add_lmi(blk, "det", false).unwrap();
        p.set_objective(t.scalar() * scale).unwrap();
        p
    }

    #[test]
    fn symmetric_counts() {
        assert_eq!(VarKind::Symmetric { n: 3 }.len(), 6);
        assert_eq!(VarKind::Symmetric { n: 5 }.len(), 15);
        let mask = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(VarKind::masked(&mask).len(), 4);
    }

    #[test]
    fn symmetric_handle_matches_smat() {
        let mut p = ConicProgram::new();
        let _ = p.add_variable("a", VarKind::Scalar).unwrap();
        let s = p.add_variable("S", VarKind::Symmetric { n: 3 }).unwrap();
        let coords = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut x = vec![0.0];
        x.extend_from_slice(&coords);
        let back = s.value(&x);
        assert!((back - svec::smat(&coords, 3)).amax() < 1e-15);
    }

    #[test]
    fn duplicate_and_asymmetric_rejected() {
        let mut p = ConicProgram::new();
        let x = p.add_variable("x", VarKind::Scalar).unwrap();
        assert!(matches!(p.add_variable("x", VarKind::Scalar), Err(Error::DuplicateVariable(_))));
        let bad = MatExpr::from_scalar(&x.scalar()).rmul(&DMatrix::from_row_slice(1, 2, &[0.0, 1.0]));
        let bad = MatExpr::block(&[vec![bad], vec![MatExpr::zeros(1, 2)]]).unwrap();
        assert!(matches!(p.add_lmi(bad, "asym", false), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn scalar_example() {
        let (p, _) = program_scalar_lower_bound(1.0);
        let s = p.solve(&tight());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.scalar("x").unwrap() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn trace_example() {
        let s = program_trace(1.0).solve(&tight());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective_value - 2.0).abs() < 1e-7);
        assert!((s.value("P").unwrap() - DMatrix::identity(2, 2)).amax() < 1e-6);
    }

    #[test]
    fn determinant_example() {
        let s = program_t(1.0).solve(&tight());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.scalar("t").unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn objective_scaling_invariance() {
        for c in [0.01, 3.0, 250.0] {
            let (p1, _) = program_scalar_lower_bound(1.0);
            let (pc, _) = program_scalar_lower_bound(c);
            let (s1, sc) = (p1.solve(&tight()), pc.solve(&tight()));
            assert!((s1.x[0] - sc.x[0]).abs() < 1e-6);
            assert!((sc.objective_value - c * s1.objective_value).abs() < 1e-6 * c.max(1.0));

            let (s1, sc) = (program_trace(1.0).solve(&tight()), program_trace(c).solve(&tight()));
            assert!((sc.objective_value - c * s1.objective_value).abs() < 1e-6 * c.max(1.0));
            let (s1, sc) = (program_t(1.0).solve(&tight()), program_t(c).solve(&tight()));
            assert!((s1.x[0] - sc.x[0]).abs() < 1e-5);
        }
    }

    #[test]
    fn deterministic() {
        let a = program_t(1.0).solve(&SolverSettings::default());
        let b = program_t(1.0).solve(&SolverSettings::default());
        assert_eq!(a.status, b.status);
        assert!((a.objective_value - b.objective_value).abs() <= 1e-10);
    }

    #[test]
    fn infeasible_detected() {
        let mut p = ConicProgram::new();
        let x = p.add_variable("x", VarKind::Scalar).unwrap();
        p.add_lmi(MatExpr::from_scalar(&x.scalar()) - one(1.0), "x>=1", false).unwrap();
        p.add_linear(-x.scalar(), "x<=0").unwrap();
        p.set_objective(x.scalar()).unwrap();
        assert_eq!(p.solve(&SolverSettings::default()).status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut p = ConicProgram::new();
        let x = p.add_variable("x", VarKind::Scalar).unwrap();
        p.add_linear(-x.scalar(), "x<=0").unwrap();
        p.set_objective(x.scalar()).unwrap();
        assert_eq!(p.solve(&SolverSettings::default()).status, SolveStatus::Unbounded);

        let mut p = ConicProgram::new();
        let x = p.add_variable("x", VarKind::Scalar).unwrap();
        p.set_objective(x.scalar()).unwrap();
        assert_eq!(p.solve(&SolverSettings::default()).status, SolveStatus::Unbounded);
    }

    #[test]
    fn strict_blocks_keep_margin() {
        let settings = SolverSettings::default();
        for p in [program_trace(1.0), program_t(1.0)] {
            let mut strict = ConicProgram::new();
            for v in p.variables() {
                strict.add_variable(&v.name, v.kind.clone()).unwrap();
            }
            for l in p.lmis() {
                strict.add_lmi(l.expr.clone(), &l.label, true).unwrap();
            }
            strict.set_objective(p.objective().clone()).unwrap();
            let s = strict.solve(&settings);
            assert_eq!(s.status, SolveStatus::Optimal);
            for e in &s.block_min_eigs {
                assert!(*e >= settings.strict_margin - settings.tol_feas, "{e}");
            }
        }
    }

    #[test]
    fn residuals_within_tolerance_when_optimal() {
        let settings = SolverSettings::default();
        let s = program_trace(1.0).solve(&settings);
        assert!(s.residuals.primal <= settings.tol_feas);
        assert!(s.residuals.dual <= settings.tol_feas);
        assert!(s.residuals.gap <= settings.tol_gap);
    }

    #[test]
    fn debug_dump_lists_blocks() {
        let p = program_t(1.0);
        let j = p.debug_json();
        assert_eq!(j["n_scalars"], 1);
        assert_eq!(j["lmi_blocks"][0]["size"], 2);
    }
}
