use std::time::Instant;

use nalgebra::DMatrix;

use super::linearize::linearize_inverse;
use super::{
    IlmiConfig, IterationRecord, Knowledge, MultiplierValues, Norm, ProblemSpec, Structure, SynthesisResult,
};
use crate::error::{Error, Result};
use crate::linalg::{eigmin, spd_inverse};
use crate::model::Gain;
use crate::sdp::{Solution, SolveStatus, SolverSettings};

/// Dispatches on the structure: single solve or iterative linearization.
pub fn synthesize(spec: &ProblemSpec, cfg: &IlmiConfig, settings: &SolverSettings) -> Result<SynthesisResult> {
    match spec.structure {
        Structure::Structured(_) => synth_structured_ilmi(spec, cfg, settings),
        _ => synth_unstructured(spec, settings),
    }
}

fn multipliers(sol: &Solution) -> MultiplierValues {
    MultiplierValues {
        alpha: sol.values.get("alpha").map(|a| a.iter().copied().collect()).unwrap_or_default(),
        beta: sol.values.get("beta").map(|b| b[(0, 0)]),
    }
}

fn failed(spec: &ProblemSpec, status: SolveStatus, iterations: usize, n_variables: usize, started: Instant) -> SynthesisResult {
    let (nu, nx) = (spec.system.nu(), spec.system.nx());
    SynthesisResult {
        k: Gain::zeros(nu, nx),
        p: DMatrix::zeros(nx, nx),
        gamma: f64::INFINITY,
        status,
        iterations,
        multipliers: MultiplierValues::default(),
        slack_trace: None,
        history: Vec::new(),
        n_variables,
        seconds: started.elapsed().as_secs_f64(),
        norm: spec.norm,
        structure: spec.structure.clone(),
    }
}

/// `γ² I − C_K P C_Kᵀ − HHᵀ`, expected positive definite for data-driven H∞ results.
fn output_margin(spec: &ProblemSpec, k: &DMatrix<f64>, p: &DMatrix<f64>, g: f64) -> f64 {
    let sys = &spec.system;
    let ck = &sys.c + &sys.d * k;
    let ny = sys.ny();
    eigmin(&(DMatrix::identity(ny, ny) * g - &ck * p * ck.transpose() - &sys.h * sys.h.transpose()))
}

/// One convex solve: unstructured, or the diagonal-`P` baseline. `K = L P⁻¹`.
pub fn synth_unstructured(spec: &ProblemSpec, settings: &SolverSettings) -> Result<SynthesisResult> {
    let started = Instant::now();
    let pattern = match &spec.structure {
        Structure::Unstructured => None,
        Structure::PdiagBaseline(p) => Some(p),
        Structure::Structured(_) => {
            return Err(Error::InvalidArgument("structured specs are solved iteratively".into()))
        }
    };
    let prog = spec.build(None, None)?;
    let sol = prog.solve(settings);
    if !sol.is_optimal() {
        return Ok(failed(spec, sol.status, sol.iterations, prog.n_scalars(), started));
    }
    let p = sol.value("P")?.clone();
    let l = sol.value("L")?;
    let k = if pattern.is_some() {
        DMatrix::from_fn(l.nrows(), l.ncols(), |i, j| l[(i, j)] / p[(j, j)])
    } else {
        match spd_inverse(&p, "recovered P") {
            Ok(pinv) => l * pinv,
            Err(_) => return Ok(failed(spec, SolveStatus::NumericalFailure, sol.iterations, prog.n_scalars(), started)),
        }
    };
    let g = sol.scalar("g")?;
    if spec.norm == Norm::Hinf && spec.knowledge == Knowledge::DataDriven {
        let margin = output_margin(spec, &k, &p, g);
        if margin <= 0.0 {
            log::warn!("output bound γ²I − C_K P C_Kᵀ − HHᵀ not positive definite (eigmin {margin:.3e})");
        }
    }
    Ok(SynthesisResult {
        k: Gain(k),
        p,
        gamma: g.max(0.0).sqrt(),
        status: SolveStatus::Optimal,
        iterations: sol.iterations,
        multipliers: multipliers(&sol),
        slack_trace: None,
        history: Vec::new(),
        n_variables: prog.n_scalars(),
        seconds: started.elapsed().as_secs_f64(),
        norm: spec.norm,
        structure: spec.structure.clone(),
    })
}

/// Iterative linearization for a structured gain.
///
/// Each step solves the convexified program at `P̃ = P_k`, then grows `λ` by `μ`
/// while below `δ`. Stops once both `‖P_k − P_{k−1}‖_F` and `‖Y_k − P_k⁻¹‖_F`
/// fall below `tol`.
pub fn synth_structured_ilmi(
    spec: &ProblemSpec,
    cfg: &IlmiConfig,
    settings: &SolverSettings,
) -> Result<SynthesisResult> {
    let started = Instant::now();
    cfg.validate()?;
    let Structure::Structured(_) = &spec.structure else {
        return Err(Error::InvalidArgument("iterative synthesis needs a structured spec".into()));
    };
    let nx = spec.system.nx();
    let mut p_prev = match &cfg.p0 {
        Some(p0) => p0.clone(),
        None => DMatrix::identity(nx, nx),
    };
    let mut lambda = cfg.lambda0;
    let mut retried = false;
    let mut history = Vec::new();
    let mut last: Option<(Solution, usize)> = None;
    let mut status = SolveStatus::IterationLimit;
    let mut iteration = 0;

    while iteration < cfg.max_iters {
        iteration += 1;
        let prog = spec.build(Some(&p_prev), Some(lambda))?;
        let sol = prog.solve(settings);
        if !sol.is_optimal() {
            history.push(IterationRecord {
                iteration,
                lambda,
                gamma: f64::INFINITY,
                slack_trace: f64::INFINITY,
                p_change: f64::INFINITY,
                inverse_gap: f64::INFINITY,
                status: sol.status,
                ipm_iterations: sol.iterations,
            });
            if iteration == 1 && !retried {
                retried = true;
                lambda = cfg.lambda0 / 10.0;
                iteration = 0;
                continue;
            }
            status = sol.status;
            break;
        }
        let p = sol.value("P")?.clone();
        let z = sol.value("Z")?;
        let zt = z.trace();
        // `Y` enters every block monotonically and is bounded above only by the
        // linearized inverse, so `lin(P) + Z` is the largest optimal choice and is
        // used as the canonical iterate.
        let y = linearize_inverse(&p_prev)?.eval(&p) + z;
        let p_change = (&p - &p_prev).norm();
        let inverse_gap = match spd_inverse(&p, "iterate P") {
            Ok(pinv) => (y - pinv).norm(),
            Err(_) => f64::INFINITY,
        };
        history.push(IterationRecord {
            iteration,
            lambda,
            gamma: sol.scalar("g")?.max(0.0).sqrt(),
            slack_trace: zt,
            p_change,
            inverse_gap,
            status: sol.status,
            ipm_iterations: sol.iterations,
        });
        let n = prog.n_scalars();
        p_prev = p;
        last = Some((sol, n));
        if lambda < cfg.delta {
            lambda *= cfg.mu;
        }
        if p_change < cfg.tol && inverse_gap < cfg.tol {
            status = SolveStatus::Optimal;
            break;
        }
    }

    let Some((sol, n_variables)) = last else {
        let mut out = failed(spec, status, iteration, 0, started);
        out.history = history;
        return Ok(out);
    };
    let k = sol.value("K")?.clone();
    let g = sol.scalar("g")?;
    if spec.norm == Norm::Hinf && spec.knowledge == Knowledge::DataDriven {
        let margin = output_margin(spec, &k, sol.value("P")?, g);
        if margin <= 0.0 {
            log::warn!("output bound γ²I − C_K P C_Kᵀ − HHᵀ not positive definite (eigmin {margin:.3e})");
        }
    }
    Ok(SynthesisResult {
        k: Gain(k),
        p: sol.value("P")?.clone(),
        gamma: g.max(0.0).sqrt(),
        status,
        iterations: history.iter().filter(|h| h.status == SolveStatus::Optimal).count(),
        multipliers: multipliers(&sol),
        slack_trace: Some(sol.value("Z")?.trace()),
        history,
        n_variables,
        seconds: started.elapsed().as_secs_f64(),
        norm: spec.norm,
        structure: spec.structure.clone(),
    })
}
