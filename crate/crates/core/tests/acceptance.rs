//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ddsc::data::{simulate_collect, ExcitationSpec, Trajectory};
use ddsc::harness::{run_bench, BenchConfig};
use ddsc::model::{
    close_loop, h2_norm, h2_example_system, hinf_norm_with, hinf_example_system, hinf_sweep_refined, spectral_radius,
    Gain, HinfMethod, HinfOptions, LinearSystem, DEFAULT_N_GRID,
};
use ddsc::sdp::SolverSettings;
use ddsc::synthesis::{
    bisect_norm, robust_verify, synthesize, IlmiConfig, Multipliers, Norm, ProblemSpec, Structure, SynthesisResult,
};

const SLACK: f64 = 1e-6;
const ROBUST_SAMPLES: usize = 50;
const TOL_BISECT: f64 = 1e-6;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target
}

fn solve(spec: &ProblemSpec) -> SynthesisResult {
    synthesize(spec, &IlmiConfig::default(), &SolverSettings::default()).expect("synthesis runs")
}

fn model(sys: LinearSystem, norm: Norm, structure: Structure) -> SynthesisResult {
    solve(&ProblemSpec::model_based(sys, norm, structure).expect("valid spec"))
}

fn data(sys: &LinearSystem, traj: &Trajectory, norm: Norm, multipliers: Multipliers) -> SynthesisResult {
    let spec = ProblemSpec::data_driven(sys.clone(), traj.clone(), norm, Structure::Unstructured, multipliers)
        .expect("valid spec");
    solve(&spec)
}

fn h2_model() -> (SynthesisResult, f64) {
    let started = Instant::now();
    let res = model(h2_example_system(), Norm::H2, Structure::Unstructured);
    (res, started.elapsed().as_secs_f64())
}

fn criterion_1() -> Outcome {
    let (res, secs) = h2_model();
    let oracle = h2_norm(&h2_example_system(), &res.k).unwrap_or(f64::INFINITY);
    outcome(
        res.is_optimal() && within(res.gamma, 2.1537, 0.01) && oracle <= res.gamma * 1.01 && secs < 5.0,
        format!("gamma {:.5}, oracle {oracle:.5}, {secs:.2}s", res.gamma),
    )
}

fn criterion_2() -> Outcome {
    let pattern = "110;011".parse().unwrap();
    let res = model(h2_example_system(), Norm::H2, Structure::Structured(pattern));
    let oracle = h2_norm(&h2_example_system(), &res.k).unwrap_or(f64::INFINITY);
    let violation = res.structure.pattern().map_or(f64::INFINITY, |p| p.violation(res.k.matrix()));
    outcome(
        res.is_optimal()
            && res.iterations <= 200
            && within(res.gamma, 2.7165, 0.05)
            && violation == 0.0
            && oracle <= res.gamma * 1.01,
        format!(
            "status {}, {} iterations, gamma {:.5}, pattern violation {violation:e}, oracle {oracle:.5}",
            res.status, res.iterations, res.gamma
        ),
    )
}

fn criterion_3() -> Outcome {
    let sys = hinf_example_system();
    let res = model(sys.clone(), Norm::Hinf, Structure::Unstructured);
    let opts = HinfOptions { n_grid: 4096, ..Default::default() };
    let sweep = hinf_norm_with(&sys, &res.k, HinfMethod::FrequencySweep, &opts).unwrap_or(f64::NAN);
    let bisect = hinf_norm_with(&sys, &res.k, HinfMethod::LmiBisection, &opts).unwrap_or(f64::NAN);
    outcome(
        res.is_optimal() && within(res.gamma, 0.7815, 0.01) && (sweep - bisect).abs() <= 1e-4,
        format!("gamma {:.5}, sweep {sweep:.6}, bisection {bisect:.6}", res.gamma),
    )
}

fn criterion_4() -> Outcome {
    let pattern = "110;110".parse().unwrap();
    let res = model(hinf_example_system(), Norm::Hinf, Structure::PdiagBaseline(pattern));
    outcome(res.is_optimal() && within(res.gamma, 3.7464, 0.01), format!("gamma {:.5}", res.gamma))
}

fn criterion_5() -> Outcome {
    let pattern = "110;110".parse().unwrap();
    let res = model(hinf_example_system(), Norm::Hinf, Structure::Structured(pattern));
    let tr_z = res.slack_trace.unwrap_or(f64::INFINITY);
    let tr_p = res.p.trace();
    outcome(
        res.is_optimal() && within(res.gamma, 1.0580, 0.05) && tr_z <= 1e-6 * tr_p,
        format!("gamma {:.5}, Tr Z {tr_z:.3e}, Tr P {tr_p:.3e}", res.gamma),
    )
}

/// Data-driven results collected for the robustness criterion.
struct DataRun {
    label: String,
    sys: LinearSystem,
    traj: Trajectory,
    result: SynthesisResult,
}

fn cases() -> [(Norm, LinearSystem, usize, f64); 2] {
    [(Norm::H2, h2_example_system(), 20, 0.1), (Norm::Hinf, hinf_example_system(), 50, 0.05)]
}

fn criterion_6(runs: &mut Vec<DataRun>) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (norm, sys, t, eps) in cases() {
        for seed in 0..5 {
            let traj = simulate_collect(&sys, t, eps, seed, &ExcitationSpec::default()).expect("simulation");
            let per = data(&sys, &traj, norm, Multipliers::PerSample);
            let shared = data(&sys, &traj, norm, Multipliers::Shared);
            let pass = per.is_optimal() && shared.is_optimal() && per.gamma <= shared.gamma + SLACK;
            ok &= pass;
            detail.push(format!("{norm:?} seed {seed}: {:.5} <= {:.5}", per.gamma, shared.gamma));
            for (kind, result) in [("per-sample", per), ("shared", shared)] {
                runs.push(DataRun { label: format!("{norm:?} seed {seed} {kind}"), sys: sys.clone(), traj: traj.clone(), result });
            }
        }
    }
    outcome(ok, detail.join("; "))
}

fn criterion_7(runs: &mut Vec<DataRun>) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    let grids = [vec![6, 10, 15, 20], vec![10, 20, 40, 50]];
    for ((norm, sys, _, eps), grid) in cases().into_iter().zip(grids) {
        let longest = *grid.last().unwrap();
        let full = simulate_collect(&sys, longest, eps, 0, &ExcitationSpec::default()).expect("simulation");
        let mut gammas = Vec::new();
        for &t in &grid {
            let traj = full.prefix(t).unwrap();
            let result = data(&sys, &traj, norm, Multipliers::PerSample);
            ok &= result.is_optimal();
            gammas.push(result.gamma);
            runs.push(DataRun { label: format!("{norm:?} prefix T={t}"), sys: sys.clone(), traj, result });
        }
        ok &= gammas.windows(2).all(|w| w[1] <= w[0] + SLACK);
        let shown: Vec<String> = grid.iter().zip(&gammas).map(|(t, g)| format!("T={t}: {g:.5}")).collect();
        detail.push(format!("{norm:?} {}", shown.join(", ")));
    }
    outcome(ok, detail.join("; "))
}

fn criterion_8(runs: &[DataRun]) -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut failures = Vec::new();
    for (i, run) in runs.iter().filter(|r| r.result.is_optimal()).enumerate() {
        match robust_verify(&run.sys, &run.result, &run.traj, ROBUST_SAMPLES, 1000 + i as u64) {
            Ok(report) => {
                let pass = report.samples.len() == ROBUST_SAMPLES
                    && report.samples.iter().all(|s| s.stable && s.ratio.is_some_and(|r| r <= 1.001));
                worst = worst.max(report.worst_ratio);
                if !pass {
                    failures.push(format!("{} ({} violations)", run.label, report.violations));
                }
                ok &= pass;
            }
            Err(e) => {
                ok = false;
                failures.push(format!("{}: {e}", run.label));
            }
        }
        checked += 1;
    }
    let mut detail = format!("{checked} results x {ROBUST_SAMPLES} samples, worst ratio {worst:.5}");
    if !failures.is_empty() {
        detail.push_str(&format!(", failing: {}", failures.join(", ")));
    }
    outcome(ok, detail)
}

fn criterion_9() -> Outcome {
    let sys = h2_example_system();
    let (reference, _) = h2_model();
    let traj = simulate_collect(&sys, 20, 1e-6, 0, &ExcitationSpec::default()).expect("simulation");
    let res = data(&sys, &traj, Norm::H2, Multipliers::PerSample);
    outcome(
        res.is_optimal() && within(res.gamma, reference.gamma, 0.02),
        format!("data gamma {:.5} vs model {:.5}", res.gamma, reference.gamma),
    )
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn random_system(rng: &mut ChaCha8Rng, with_h: bool) -> LinearSystem {
    let nx = rng.random_range(1..=4);
    let nu = rng.random_range(1..=2);
    let ny = rng.random_range(1..=3);
    let nd = rng.random_range(1..=2);
    let a = random_matrix(rng, nx, nx);
    let rho = spectral_radius(&a).unwrap();
    let target = rng.random_range(0.2..0.9);
    let a = if rho > 0.0 { a * (target / rho) } else { a };
    let h = if with_h { random_matrix(rng, ny, nd) } else { DMatrix::zeros(ny, nd) };
    LinearSystem::new(
        a,
        random_matrix(rng, nx, nu),
        random_matrix(rng, ny, nx),
        random_matrix(rng, ny, nu),
        random_matrix(rng, nx, nd),
        h,
    )
    .expect("consistent dimensions")
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let settings = SolverSettings::default();
    let tol = 10.0 * TOL_BISECT;
    let mut worst: (f64, f64) = (0.0, 0.0);
    let mut ok = true;
    for _ in 0..20 {
        let sys = random_system(&mut rng, false);
        let k = Gain::zeros(sys.nu(), sys.nx());
        let oracle = h2_norm(&sys, &k).expect("stable");
        let bound = bisect_norm(&sys, &k, Norm::H2, 2.0 * oracle + 1.0, TOL_BISECT, &settings);
        let err = bound.map_or(f64::INFINITY, |b| (b - oracle).abs());
        worst.0 = worst.0.max(err);
        ok &= err <= tol;

        let sys = random_system(&mut rng, true);
        let k = Gain::zeros(sys.nu(), sys.nx());
        let cl = close_loop(&sys, &k).unwrap();
        let oracle = hinf_sweep_refined(&cl, DEFAULT_N_GRID).expect("stable");
        let bound = bisect_norm(&sys, &k, Norm::Hinf, 2.0 * oracle + 1.0, TOL_BISECT, &settings);
        let err = bound.map_or(f64::INFINITY, |b| (b - oracle).abs());
        worst.1 = worst.1.max(err);
        ok &= err <= tol;
    }
    outcome(ok, format!("20 systems, worst |bisection - oracle| H2 {:.2e}, Hinf {:.2e} (limit {tol:.0e})", worst.0, worst.1))
}

fn criterion_11() -> Outcome {
    let cfg = BenchConfig { t_values: vec![10, 50, 100, 200], ..Default::default() };
    match run_bench(&cfg) {
        Ok(report) => {
            let csv = report.to_csv_string().unwrap_or_default();
            let order = report.first_not_faster();
            let rows_ok = report.rows.len() == 8 && csv.lines().count() == 9;
            let times: Vec<String> = report.rows.iter().map(|r| format!("T={} {} {:.3}s", r.t, r.method, r.seconds)).collect();
            outcome(rows_ok && order.iter().all(|(_, ok)| *ok), times.join(", "))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn main() -> ExitCode {
    let mut runs = Vec::new();
    let started = Instant::now();
    let results = vec![
        (1, criterion_1()),
        (2, criterion_2()),
        (3, criterion_3()),
        (4, criterion_4()),
        (5, criterion_5()),
        (6, criterion_6(&mut runs)),
        (7, criterion_7(&mut runs)),
        (8, criterion_8(&runs)),
        (9, criterion_9()),
        (10, criterion_10()),
        (11, criterion_11()),
    ];
    let mut all = true;
    for (n, o) in &results {
        println!("criterion {n:>2}: {} {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        all &= o.passed;
    }
    println!("acceptance: {} ({:.1}s)", if all { "all criteria pass" } else { "FAILED" }, started.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
