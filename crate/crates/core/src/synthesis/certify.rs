//! Certification of a fixed gain: LMI feasibility of a norm bound, bisection on
//! it, and sampling-based checks over the data-consistency set.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Norm, SynthesisResult};
use crate::data::{sample_sigma, Trajectory};
use crate::error::{Error, Result};
use crate::model::{
    close_loop, h2_norm_closed_loop, hinf_sweep_refined, is_schur_stable, spectral_radius, ClosedLoop, Gain,
    LinearSystem, DEFAULT_N_GRID,
};
use crate::sdp::{ConicProgram, MatExpr, ScalarExpr, SolveStatus, SolverSettings, VarHandle, VarKind};

/// Relative slack allowed between a sampled norm and the bound.
pub const ROBUST_REL_TOL: f64 = 1e-3;

fn block_rows(rows: Vec<Vec<MatExpr>>) -> Result<MatExpr> {
    MatExpr::block(&rows)
}

/// `F + tI − margin·I ⪰ 0`, the relaxed form of `F ≻ 0`.
fn add_relaxed(prog: &mut ConicProgram, f: MatExpr, t: &VarHandle, margin: f64, label: &str) -> Result<()> {
    let n = f.nrows();
    let mut shift = MatExpr::zeros(n, n);
    shift.terms.insert(t.offset, DMatrix::identity(n, n));
    prog.add_lmi(f + shift - DMatrix::identity(n, n) * margin, label, false)
}

fn bound_program(cl: &ClosedLoop, gamma: f64, norm: Norm, margin: f64) -> Result<ConicProgram> {
    let nx = cl.a_k.nrows();
    let (ny, nd) = (cl.c_k.nrows(), cl.g.ncols());
    let c = |m: &DMatrix<f64>| MatExpr::constant(m.clone());
    let mut prog = ConicProgram::new();
    let t = prog.add_variable("t", VarKind::Scalar)?;
    let p = prog.add_variable("P", VarKind::Symmetric { n: nx })?;
    let akp = p.expr().lmul(&cl.a_k);
    let ckp = p.expr().lmul(&cl.c_k);
    match norm {
        Norm::H2 => {
            let q = prog.add_variable("Q", VarKind::Symmetric { n: ny })?;
            let lyap = block_rows(vec![
                vec![p.expr(), akp.clone(), c(&cl.g)],
                vec![akp.transpose(), p.expr(), MatExpr::zeros(nx, nd)],
                vec![c(&cl.g.transpose()), MatExpr::zeros(nd, nx), MatExpr::identity(nd)],
            ])?;
            add_relaxed(&mut prog, lyap, &t, margin, "lyapunov")?;
            let out = block_rows(vec![vec![q.expr(), ckp.clone()], vec![ckp.transpose(), p.expr()]])?;
            add_relaxed(&mut prog, out, &t, margin, "output")?;
            prog.add_lmi(q.expr() - DMatrix::identity(ny, ny) * margin, "Q", false)?;
            prog.add_linear(ScalarExpr::constant(gamma * gamma) - q.expr().trace(), "trace bound")?;
        }
        Norm::Hinf => {
            let brl = block_rows(vec![
                vec![p.expr(), akp.clone(), c(&cl.g), MatExpr::zeros(nx, ny)],
                vec![akp.transpose(), p.expr(), MatExpr::zeros(nx, nd), ckp.transpose()],
                vec![c(&cl.g.transpose()), MatExpr::zeros(nd, nx), MatExpr::identity(nd), c(&cl.h.transpose())],
                vec![MatExpr::zeros(ny, nx), ckp, c(&cl.h), MatExpr::identity(ny) .scale(gamma * gamma)],
            ])?;
            add_relaxed(&mut prog, brl, &t, margin, "bounded real")?;
        }
    }
    prog.add_lmi(p.expr() - DMatrix::identity(nx, nx) * margin, "P", false)?;
    prog.add_linear(t.scalar() + ScalarExpr::constant(1.0), "t lower bound")?;
    prog.set_objective(t.scalar())?;
    Ok(prog)
}

/// Whether the norm-bound LMIs with fixed `(A, B, K, γ)` admit a solution
/// under the strict-margin convention.
pub fn certify_bound(
    sys: &LinearSystem,
    k: &Gain,
    gamma: f64,
    norm: Norm,
    settings: &SolverSettings,
) -> Result<bool> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if norm == Norm::H2 && !sys.has_zero_feedthrough() {
        return Err(Error::NonzeroFeedthrough);
    }
    let cl = close_loop(sys, k)?;
    let prog = bound_program(&cl, gamma, norm, settings.strict_margin)?;
    let sol = prog.solve(settings);
    match sol.status {
        SolveStatus::Optimal => Ok(sol.objective_value <= 0.0),
        other => Err(Error::Solver(other.to_string())),
    }
}

/// Smallest certified bound in `(0, upper]`, to absolute tolerance `tol`.
pub fn bisect_norm(
    sys: &LinearSystem,
    k: &Gain,
    norm: Norm,
    upper: f64,
    tol: f64,
    settings: &SolverSettings,
) -> Result<f64> {
    let cl = close_loop(sys, k)?;
    if !is_schur_stable(&cl.a_k)? {
        return Err(Error::Unstable(spectral_radius(&cl.a_k)?));
    }
    if !certify_bound(sys, k, upper, norm, settings)? {
        return Err(Error::BracketFailure(upper));
    }
    let (mut lo, mut hi) = (0.0, upper);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if certify_bound(sys, k, mid, norm, settings)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustSample {
    pub index: usize,
    pub stable: bool,
    pub spectral_radius: f64,
    /// Oracle norm of the closed loop; `null` when unstable.
    pub norm: Option<f64>,
    pub ratio: Option<f64>,
    pub violation: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RobustReport {
    pub gamma: f64,
    pub samples: Vec<RobustSample>,
    /// Largest `norm / γ`; infinite if any sample is unstable.
    pub worst_ratio: f64,
    pub violations: usize,
    /// Perturbation radius used for the accepted draws.
    pub radius: f64,
    pub acceptance_rate: f64,
}

impl RobustReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn evaluate(sys: &LinearSystem, k: &Gain, norm: Norm, gamma: f64, index: usize) -> Result<RobustSample> {
    let cl = close_loop(sys, k)?;
    let rho = spectral_radius(&cl.a_k)?;
    if !is_schur_stable(&cl.a_k)? {
        return Ok(RobustSample { index, stable: false, spectral_radius: rho, norm: None, ratio: None, violation: true });
    }
    let value = match norm {
        Norm::H2 => h2_norm_closed_loop(&cl)?,
        Norm::Hinf => hinf_sweep_refined(&cl, DEFAULT_N_GRID)?,
    };
    Ok(RobustSample {
        index,
        stable: true,
        spectral_radius: rho,
        norm: Some(value),
        ratio: Some(value / gamma),
        violation: value > gamma * (1.0 + ROBUST_REL_TOL),
    })
}

/// Checks a data-driven result on the generating plant (sample 0) and on
/// `samples − 1` further draws from the consistency set.
///
/// `sys` supplies `C, D, G, H`; the draws replace `A, B`. The perturbation
/// radius starts at the noise bound and is halved until draws are accepted.
pub fn robust_verify(
    sys: &LinearSystem,
    result: &SynthesisResult,
    traj: &Trajectory,
    samples: usize,
    seed: u64,
) -> Result<RobustReport> {
    let mut report = RobustReport { gamma: result.gamma, worst_ratio: 0.0, ..Default::default() };
    if samples == 0 {
        return Ok(report);
    }
    let truth = traj
        .true_system()
        .ok_or_else(|| Error::InvalidArgument("robust verification needs the generating system".into()))?;
    let mut pairs = vec![(truth.a.clone(), truth.b.clone())];
    let mut radius = traj.eps.max(1e-6);
    let (mut accepted, mut attempts) = (0usize, 0usize);
    let mut round = 0u64;
    while pairs.len() < samples && round < 40 {
        let needed = samples - pairs.len();
        match sample_sigma(traj, None, needed, radius, seed.wrapping_add(round), 200 * needed) {
            Ok(s) => {
                accepted += s.pairs.len();
                attempts += s.attempts;
                let rate = s.acceptance_rate;
                pairs.extend(s.pairs);
                if rate < 0.05 {
                    radius *= 0.5;
                }
            }
            Err(Error::NoAcceptance(n)) => {
                attempts += n;
                radius *= 0.5;
            }
            Err(e) => return Err(e),
        }
        round += 1;
    }
    report.radius = radius;
    report.acceptance_rate = if attempts > 0 { accepted as f64 / attempts as f64 } else { 1.0 };
    for (index, (a, b)) in pairs.into_iter().enumerate() {
        let plant = sys.with_dynamics(a, b)?;
        let sample = evaluate(&plant, &result.k, result.norm, result.gamma, index)?;
        if sample.violation {
            report.violations += 1;
        }
        report.worst_ratio = report.worst_ratio.max(sample.ratio.unwrap_or(f64::INFINITY));
        report.samples.push(sample);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{h2_norm, hinf_norm, h2_example_system, HinfMethod};

    fn small_stable() -> LinearSystem {
        LinearSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.3]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DMatrix::zeros(1, 1),
            DMatrix::identity(2, 2) * 0.1,
            DMatrix::zeros(1, 2),
        )
        .unwrap()
    }

    #[test]
    fn certify_brackets_the_h2_norm() {
        let sys = h2_example_system();
        let k = Gain::zeros(2, 3);
        let settings = SolverSettings::default();
        let sys = sys.with_dynamics(sys.a.clone() * 0.5, sys.b.clone()).unwrap();
        let n = h2_norm(&sys, &k).unwrap();
        assert!(!certify_bound(&sys, &k, 0.5 * n, Norm::H2, &settings).unwrap());
        assert!(certify_bound(&sys, &k, 2.0 * n, Norm::H2, &settings).unwrap());
    }

    #[test]
    fn bisection_matches_sweep_for_zero_gain() {
        let sys = small_stable();
        let k = Gain::zeros(1, 2);
        let settings = SolverSettings::default();
        let sweep = hinf_norm(&sys, &k, HinfMethod::FrequencySweep).unwrap();
        let bis = bisect_norm(&sys, &k, Norm::Hinf, 2.0 * sweep + 1.0, 1e-6, &settings).unwrap();
        assert!((bis - sweep).abs() <= 1e-5, "{bis} vs {sweep}");
        let h2 = h2_norm(&sys, &k).unwrap();
        let bis = bisect_norm(&sys, &k, Norm::H2, 2.0 * h2 + 1.0, 1e-6, &settings).unwrap();
        assert!((bis - h2).abs() <= 1e-5, "{bis} vs {h2}");
    }

    #[test]
    fn bisection_rejects_unstable_loop() {
        let sys = h2_example_system();
        let a = &sys.a * 2.0;
        let sys = sys.with_dynamics(a, sys.b.clone()).unwrap();
        let k = Gain::zeros(2, 3);
        assert!(matches!(
            bisect_norm(&sys, &k, Norm::H2, 10.0, 1e-6, &SolverSettings::default()),
            Err(Error::Unstable(_))
        ));
    }

    #[test]
    fn bisection_bracket_failure() {
        let sys = small_stable();
        let k = Gain::zeros(1, 2);
        let n = h2_norm(&sys, &k).unwrap();
        assert!(matches!(
            bisect_norm(&sys, &k, Norm::H2, 0.5 * n, 1e-6, &SolverSettings::default()),
            Err(Error::BracketFailure(_))
        ));
    }
}
