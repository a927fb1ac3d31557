//! `ddsc` command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::{resolve_system, run_bench, run_experiment, table_preset, BenchConfig, ExperimentConfig};
use crate::data::{consistent, simulate_collect, ExcitationSpec, InitialState, Trajectory};
use crate::error::{Error, Result};
use crate::model::{close_loop, h2_norm, hinf_norm, is_schur_stable, spectral_radius, HinfMethod, LinearSystem};
use crate::sdp::SolverSettings;
use crate::synthesis::{
    certify_bound, robust_verify, synthesize, IlmiConfig, Multipliers, Norm, ProblemSpec, Structure,
    StructurePattern, SynthesisResult,
};

/// Exit status for a run whose checks did not pass.
pub const EXIT_CHECK_FAILED: u8 = 2;
/// Exit status for errors such as bad input files.
pub const EXIT_ERROR: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "ddsc", version, about = "Data-driven structured controller synthesis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for data generation and sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub tol_feas: Option<f64>,
    #[arg(long, global = true)]
    pub tol_gap: Option<f64>,
    /// Margin used for strict LMIs.
    #[arg(long, global = true)]
    pub strict_margin: Option<f64>,
    #[arg(long, global = true)]
    pub max_ipm_iters: Option<usize>,
    /// Output file, or directory for `table`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl GlobalArgs {
    fn apply(&self, base: SolverSettings) -> SolverSettings {
        SolverSettings {
            tol_feas: self.tol_feas.unwrap_or(base.tol_feas),
            tol_gap: self.tol_gap.unwrap_or(base.tol_gap),
            strict_margin: self.strict_margin.unwrap_or(base.strict_margin),
            max_ipm_iters: self.max_ipm_iters.unwrap_or(base.max_ipm_iters),
        }
    }

    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a noisy trajectory from a plant.
    GenData(GenDataArgs),
    /// Synthesize a gain from a model or a trajectory.
    Synth(SynthArgs),
    /// Certify a result and check it on plants consistent with the data.
    Eval(EvalArgs),
    /// Run a comparison table preset or a custom experiment.
    Table(TableArgs),
    /// Time structured synthesis against the convex baseline over T.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value = "h2-example")]
    pub system: String,
    #[arg(long = "T", value_name = "T")]
    pub t: usize,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub input_std: f64,
    /// Standard deviation of a Gaussian initial state; zero state when absent.
    #[arg(long)]
    pub x0_std: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Plant (builtin name or file); for data runs only C, D, G, H are used.
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub norm: Norm,
    #[arg(long, conflicts_with = "data")]
    pub model_based: bool,
    /// Trajectory file.
    #[arg(long, required_unless_present = "model_based")]
    pub data: Option<PathBuf>,
    /// Sparsity pattern such as "110;011".
    #[arg(long)]
    pub pattern: Option<StructurePattern>,
    /// Use the diagonal-P convex restriction instead of the iterative method.
    #[arg(long, requires = "pattern")]
    pub pdiag: bool,
    #[arg(long, default_value = "per-sample", value_parser = parse_multipliers)]
    pub multipliers: Multipliers,
    #[arg(long)]
    pub lambda0: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Stopping tolerance of the iterative method.
    #[arg(long)]
    pub ilmi_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub result: PathBuf,
    /// Known plant for model-based results.
    #[arg(long)]
    pub system: Option<String>,
    /// Trajectory with the generating plant retained.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub table: Option<u32>,
    /// Experiment JSON file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// `a:b:step` or a comma list.
    #[arg(long = "sweep-T", value_name = "SWEEP", default_value = "10,50,100,200")]
    pub sweep_t: String,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
}

fn parse_multipliers(s: &str) -> std::result::Result<Multipliers, String> {
    match s {
        "per-sample" | "per_sample" => Ok(Multipliers::PerSample),
        "shared" => Ok(Multipliers::Shared),
        other => Err(format!("expected `per-sample` or `shared`, got `{other}`")),
    }
}

/// Parses `a:b:step` or `t1,t2,...`.
pub fn parse_sweep(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Parse(format!("bad sweep `{s}`"));
    let num = |v: &str| v.trim().parse::<usize>().map_err(|_| bad());
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts.as_slice() else { return Err(bad()) };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if step == 0 || a > b {
            return Err(bad());
        }
        (a..=b).step_by(step).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() || values.contains(&0) {
        return Err(bad());
    }
    Ok(values)
}

/// Runs a parsed command and returns the process exit status.
pub fn run(cli: Cli) -> Result<u8> {
    let g = &cli.global;
    match &cli.command {
        Command::GenData(a) => gen_data(g, a),
        Command::Synth(a) => synth(g, a),
        Command::Eval(a) => eval(g, a),
        Command::Table(a) => table(g, a),
        Command::Bench(a) => bench(g, a),
    }
}

/// Largest `‖x_{k+1} − A x_k − B u_k‖₂` over the trajectory.
fn max_residual(sys: &LinearSystem, traj: &Trajectory) -> f64 {
    (0..traj.len())
        .map(|k| {
            let (x, u, xn) = traj.sample(k);
            (xn - &sys.a * x - &sys.b * u).norm()
        })
        .fold(0.0, f64::max)
}

fn gen_data(g: &GlobalArgs, a: &GenDataArgs) -> Result<u8> {
    let sys = resolve_system(&a.system)?;
    let excitation = ExcitationSpec {
        x0: a.x0_std.map_or(InitialState::Zero, |std| InitialState::Gaussian { std }),
        input_std: a.input_std,
    };
    let mut traj = simulate_collect(&sys, a.t, a.eps, g.seed, &excitation)?;
    traj.meta.system = Some(a.system.clone());
    let out = g.out_or("data.json");
    traj.save(&out)?;
    let residual = max_residual(&sys, &traj);
    let ok = residual <= a.eps * (1.0 + 1e-9) + 1e-12 && consistent(&sys.a, &sys.b, &traj)?;
    println!("wrote {} (T={}, eps={}, seed={})", out.display(), a.t, a.eps, g.seed);
    println!("max residual {residual:.3e}, generating plant consistent: {ok}");
    Ok(if ok { 0 } else { EXIT_CHECK_FAILED })
}

fn synth(g: &GlobalArgs, a: &SynthArgs) -> Result<u8> {
    let structure = match (&a.pattern, a.pdiag) {
        (None, _) => Structure::Unstructured,
        (Some(p), false) => Structure::Structured(p.clone()),
        (Some(p), true) => Structure::PdiagBaseline(p.clone()),
    };
    let spec = match &a.data {
        None => {
            let name = a.system.as_deref().ok_or_else(|| Error::InvalidArgument("--system is required".into()))?;
            ProblemSpec::model_based(resolve_system(name)?, a.norm, structure)?
        }
        Some(path) => {
            let traj = Trajectory::load(path)?;
            let sys = match (&a.system, &traj.meta.system) {
                (Some(name), _) | (None, Some(name)) => resolve_system(name)?,
                (None, None) => match traj.true_system() {
                    Some(s) => s.clone(),
                    None => return Err(Error::InvalidArgument("--system is required for this trajectory".into())),
                },
            };
            ProblemSpec::data_driven(sys, traj, a.norm, structure, a.multipliers)?
        }
    };
    let defaults = IlmiConfig::default();
    let ilmi = IlmiConfig {
        lambda0: a.lambda0.unwrap_or(defaults.lambda0),
        mu: a.mu.unwrap_or(defaults.mu),
        delta: a.delta.unwrap_or(defaults.delta),
        tol: a.ilmi_tol.unwrap_or(defaults.tol),
        max_iters: a.max_iters.unwrap_or(defaults.max_iters),
        p0: None,
    };
    ilmi.validate()?;
    let settings = g.apply(SolverSettings::default());
    let result = synthesize(&spec, &ilmi, &settings)?;
    let out = g.out_or("result.json");
    result.save(&out)?;
    println!(
        "status {}, gamma {:.6}, iterations {}, variables {}, {:.3}s",
        result.status, result.gamma, result.iterations, result.n_variables, result.seconds
    );
    println!("K = {:?}", crate::linalg::to_rows(result.k.matrix()));
    println!("wrote {}", out.display());
    Ok(if result.is_optimal() { 0 } else { EXIT_CHECK_FAILED })
}

fn oracle(sys: &LinearSystem, result: &SynthesisResult) -> Result<f64> {
    match result.norm {
        Norm::H2 => h2_norm(sys, &result.k),
        Norm::Hinf => hinf_norm(sys, &result.k, HinfMethod::FrequencySweep),
    }
}

fn eval(g: &GlobalArgs, a: &EvalArgs) -> Result<u8> {
    let result = SynthesisResult::load(&a.result)?;
    let settings = g.apply(SolverSettings::default());
    if let Some(path) = &a.data {
        let traj = Trajectory::load(path)?;
        let sys = match (&a.system, traj.true_system()) {
            (Some(name), _) => resolve_system(name)?,
            (None, Some(s)) => s.clone(),
            (None, None) => return Err(Error::InvalidArgument("trajectory has no generating plant".into())),
        };
        let report = robust_verify(&sys, &result, &traj, a.samples, g.seed)?;
        println!(
            "gamma {:.6}, samples {}, worst ratio {:.6}, violations {}, radius {:.3e}",
            report.gamma,
            report.samples.len(),
            report.worst_ratio,
            report.violations,
            report.radius
        );
        return Ok(if report.passed() { 0 } else { EXIT_CHECK_FAILED });
    }
    let name = a
        .system
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("eval needs --system or --data".into()))?;
    let sys = resolve_system(name)?;
    let cl = close_loop(&sys, &result.k)?;
    if !is_schur_stable(&cl.a_k)? {
        println!("violation: closed loop unstable (spectral radius {:.6})", spectral_radius(&cl.a_k)?);
        return Ok(EXIT_CHECK_FAILED);
    }
    let norm = oracle(&sys, &result)?;
    let ratio = norm / result.gamma;
    let certified = if result.gamma.is_finite() {
        certify_bound(&sys, &result.k, result.gamma * (1.0 + 1e-6), result.norm, &settings)
            .map(|c| c.to_string())
            .unwrap_or_else(|e| format!("error ({e})"))
    } else {
        "skipped".into()
    };
    println!("gamma {:.6}, oracle norm {norm:.6}, worst ratio {ratio:.6}, certified {certified}", result.gamma);
    Ok(if ratio <= 1.01 { 0 } else { EXIT_CHECK_FAILED })
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn table(g: &GlobalArgs, a: &TableArgs) -> Result<u8> {
    let (mut cfg, stem) = match (a.table, &a.config) {
        (Some(n), _) => (table_preset(n)?, format!("table{n}")),
        (None, Some(path)) => {
            let cfg = ExperimentConfig::load(path)?;
            let stem = file_stem(&cfg.name);
            (cfg, stem)
        }
        (None, None) => return Err(Error::InvalidArgument("--table or --config is required".into())),
    };
    cfg.seed = g.seed;
    cfg.solver = g.apply(cfg.solver);
    let report = run_experiment(&cfg)?;
    let dir = g.out_or("results");
    report.write_all(&dir, &stem)?;
    print!("{}", report.to_markdown());
    println!("\nwrote {}", Path::new(&dir).join(format!("{stem}.{{md,csv,json}}")).display());
    Ok(if report.passed() { 0 } else { EXIT_CHECK_FAILED })
}

fn bench(g: &GlobalArgs, a: &BenchArgs) -> Result<u8> {
    let cfg = BenchConfig {
        t_values: parse_sweep(&a.sweep_t)?,
        eps: a.eps,
        seed: g.seed,
        solver: g.apply(SolverSettings::default()),
        ..Default::default()
    };
    let report = run_bench(&cfg)?;
    let out = g.out_or("bench.csv");
    report.write_csv(&out)?;
    print!("{}", report.to_csv_string()?);
    let order = report.first_not_faster();
    for (t, ok) in &order {
        println!("T={t}: ours-structured not faster than baseline: {ok}");
    }
    println!("wrote {}", out.display());
    Ok(if order.iter().all(|(_, ok)| *ok) { 0 } else { EXIT_CHECK_FAILED })
}
