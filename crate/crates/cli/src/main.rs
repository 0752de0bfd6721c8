//! `proxsplit`: run a splitting method on a problem and write a trace and a report.

use std::fs;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use proxsplit::engines::{
    recommend, Algorithm, IterState, RhoSchedule, Roles, Solution, Solver, SolverConfig,
    StepOutcome, StopReason, ValidationReport,
};
use proxsplit::problems::oracle::oracle_solve;
use proxsplit::problems::{BuiltinProblem, ProblemSpec};
use proxsplit::product::{lift, ParallelFamily, ParallelSolver};
use proxsplit::space::{NORM_MAX_ITER, NORM_SEED, NORM_TOL};
use proxsplit::Error;

const EXIT_CONVERGED: u8 = 0;
const EXIT_BAD_CONFIG: u8 = 1;
const EXIT_MAX_ITER: u8 = 2;
const EXIT_REJECTED: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

const TRACE_HEADER: [&str; 5] = ["iter", "residual", "objective", "dist_P", "seconds"];

#[derive(Parser)]
#[command(
    name = "proxsplit",
    version,
    about = "Relaxed proximal splitting methods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the parameters, iterate, and write `trace.csv` and `report.json`.
    Run(RunArgs),
    /// Print the three forward-backward settings worth trying.
    Recommend(ProblemArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Built-in `kind:seed:n[:reg]` (lasso, tv1d, constrained_ls, split_quadratic) or a problem JSON file.
    #[arg(long)]
    problem: String,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    algorithm: Algorithm,
    /// Step sizes are numbers, optionally divided by `beta`, `L2` (‖L‖², or
    /// ‖Σ ω_m L_m* L_m‖ for the parallel forms) or `tauL2`, as in `1.9/beta`.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// Constant `a`, or `a:b:ramp[:k]`.
    #[arg(long, default_value = "1")]
    rho: RhoSchedule,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Iterations during which the relaxation may exceed its limit.
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
    #[arg(long)]
    quadratic_mode: bool,
    /// Iterate even when the parameters are rejected.
    #[arg(long = "unsafe")]
    allow_unsafe: bool,
    #[arg(long, default_value_t = 1)]
    trace_every: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Workers for the per-term proxes of the parallel methods.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_BAD_CONFIG);
        }
    };
    let code = match cli.command {
        Command::Run(args) => run(&args),
        Command::Recommend(args) => run_recommend(&args),
    };
    ExitCode::from(code)
}

struct LoadedProblem {
    spec: ProblemSpec,
    label: String,
    seed: Option<u64>,
}

fn load_problem(source: &str) -> Result<LoadedProblem, String> {
    if let Ok(mut builtin) = source.parse::<BuiltinProblem>() {
        if let Ok(seed) = std::env::var("PROXSPLIT_SEED") {
            builtin.seed = seed
                .trim()
                .parse()
                .map_err(|_| format!("PROXSPLIT_SEED must be an unsigned integer, got `{seed}`"))?;
        }
        let spec = builtin.build().map_err(|e| e.to_string())?;
        return Ok(LoadedProblem {
            spec,
            label: format!(
                "{}:{}:{}:{}",
                builtin.kind.name(),
                builtin.seed,
                builtin.n,
                builtin.reg
            ),
            seed: Some(builtin.seed),
        });
    }
    let text =
        fs::read_to_string(source).map_err(|e| format!("cannot read problem `{source}`: {e}"))?;
    let spec =
        ProblemSpec::from_json(&text).map_err(|e| format!("invalid problem `{source}`: {e}"))?;
    Ok(LoadedProblem {
        spec,
        label: source.to_string(),
        seed: None,
    })
}

/// Quantities a step size may be expressed in.
struct Scales {
    beta: f64,
    norm_sq: f64,
}

fn scales(algorithm: Algorithm, problem: &ProblemSpec) -> Result<Scales, String> {
    if let Some(family) = parallel_family(algorithm, problem) {
        let lifted = lift(problem, family.mode(), None).map_err(|e| e.to_string())?;
        let beta = problem.h.smooth_info().map_or(0.0, |s| s.lipschitz);
        let norm_sq = lifted
            .parallel_norm(&lifted.weights, None)
            .map_err(|e| e.to_string())?;
        return Ok(Scales { beta, norm_sq });
    }
    let roles = Roles::assign(algorithm, problem).map_err(|e| e.to_string())?;
    let beta = roles.h.smooth_info().map_or(0.0, |s| s.lipschitz);
    let norm = match roles.l.norm_bound() {
        Some(b) => b,
        None => roles
            .l
            .estimate_norm(NORM_TOL, NORM_MAX_ITER, NORM_SEED)
            .map_err(|e| e.to_string())?,
    };
    Ok(Scales {
        beta,
        norm_sq: norm * norm,
    })
}

fn step_value(name: &str, text: &str, scales: &Scales, tau: Option<f64>) -> Result<f64, String> {
    let bad = || format!("cannot parse --{name} `{text}`");
    let (number, divisor) = match text.split_once('/') {
        None => (text, 1.0),
        Some((number, unit)) => {
            let divisor = match unit.trim() {
                "beta" => scales.beta,
                "L2" => scales.norm_sq,
                "tauL2" => {
                    tau.ok_or_else(|| format!("--{name} `{text}` needs --tau"))? * scales.norm_sq
                }
                _ => unit.trim().parse().map_err(|_| bad())?,
            };
            (number, divisor)
        }
    };
    let value = number.trim().parse::<f64>().map_err(|_| bad())? / divisor;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("--{name} `{text}` is not finite"))
    }
}

fn solver_config(args: &RunArgs, problem: &ProblemSpec) -> Result<SolverConfig, String> {
    let scales = scales(args.algorithm, problem)?;
    let parse = |name: &str, text: &Option<String>, tau: Option<f64>| {
        text.as_deref()
            .map(|t| step_value(name, t, &scales, tau))
            .transpose()
    };
    let tau = parse("tau", &args.tau, None)?;
    let mut cfg = SolverConfig::new(args.algorithm)
        .schedule(args.rho.clone())
        .max_iter(args.max_iter)
        .stop_tol(args.tol)
        .quadratic_mode(args.quadratic_mode);
    cfg.burn_in = args.burn_in;
    cfg.tau = tau;
    cfg.gamma = parse("gamma", &args.gamma, None)?;
    cfg.sigma = parse("sigma", &args.sigma, tau)?;
    cfg.eta = parse("eta", &args.eta, tau)?;
    Ok(cfg)
}

/// Problems with several terms run the parallel form when the method has one.
fn parallel_family(algorithm: Algorithm, problem: &ProblemSpec) -> Option<ParallelFamily> {
    ParallelFamily::of(algorithm).filter(|_| problem.terms.len() > 1)
}

enum Engine {
    Plain(Solver),
    Parallel(ParallelSolver),
}

impl Engine {
    fn new(problem: &ProblemSpec, cfg: SolverConfig, threads: usize) -> proxsplit::Result<Engine> {
        if parallel_family(cfg.algorithm, problem).is_some() {
            Ok(Engine::Parallel(ParallelSolver::new(
                problem, cfg, threads,
            )?))
        } else {
            Ok(Engine::Plain(Solver::new(problem, cfg)?))
        }
    }

    fn report(&self) -> &ValidationReport {
        match self {
            Engine::Plain(s) => &s.report,
            Engine::Parallel(s) => &s.report,
        }
    }

    fn run_with<H>(&self, allow_unsafe: bool, hook: H) -> proxsplit::Result<Solution>
    where
        H: FnMut(&StepOutcome, f64) -> ControlFlow<()>,
    {
        match self {
            Engine::Plain(s) => s.run_with(None, allow_unsafe, hook),
            Engine::Parallel(s) => s.run_with(None, allow_unsafe, hook),
        }
    }

    /// Distance to the oracle fixed point in the method's metric.
    fn distance_to_solution(
        &self,
        problem: &ProblemSpec,
    ) -> Option<Box<dyn Fn(&IterState) -> Option<f64> + '_>> {
        let Engine::Plain(solver) = self else {
            return None;
        };
        let oracle = oracle_solve(problem).ok()?;
        let duals = oracle.duals.unwrap_or_default();
        let fixed = solver
            .roles
            .fixed_point(&solver.cfg, &oracle.x_star, &duals)
            .ok()?;
        Some(Box::new(move |state: &IterState| {
            solver
                .roles
                .metric_distance_sq(&solver.cfg, state, &fixed)
                .ok()
                .map(|d| d.max(0.0).sqrt())
        }))
    }
}

#[derive(Serialize)]
struct Parameters {
    algorithm: &'static str,
    tau: Option<f64>,
    sigma: Option<f64>,
    eta: Option<f64>,
    gamma: Option<f64>,
    rho: String,
    max_iter: usize,
    tol: f64,
    burn_in: usize,
    quadratic_mode: bool,
    threads: usize,
    parallel: bool,
}

#[derive(Serialize)]
struct RunReport<'a> {
    status: &'static str,
    problem: &'a str,
    seed: Option<u64>,
    parameters: Parameters,
    #[serde(rename = "unsafe")]
    unsafe_run: bool,
    validation: &'a ValidationReport,
    iterations: usize,
    final_residual: Option<f64>,
    final_objective: Option<f64>,
    oracle_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    x: Option<Vec<f64>>,
}

fn fail(message: impl std::fmt::Display) -> u8 {
    eprintln!("error: {message}");
    EXIT_BAD_CONFIG
}

fn write_report(out: &Path, report: &RunReport<'_>) -> Result<(), String> {
    let text = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
    fs::write(out.join("report.json"), format!("{text}\n")).map_err(|e| e.to_string())?;
    println!("{text}");
    Ok(())
}

fn plain_or_blank(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn sci_or_blank(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn run(args: &RunArgs) -> u8 {
    if args.trace_every == 0 {
        return fail("--trace-every must be at least 1");
    }
    let loaded = match load_problem(&args.problem.problem) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let problem = &loaded.spec;
    let cfg = match solver_config(args, problem) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let engine = match Engine::new(problem, cfg.clone(), args.threads) {
        Ok(e) => e,
        Err(e) => return fail(e),
    };
    if let Err(e) = fs::create_dir_all(&args.out) {
        return fail(format!("cannot create {}: {e}", args.out.display()));
    }
    let admitted = engine.report().admissible;
    let mut report = RunReport {
        status: "rejected",
        problem: &loaded.label,
        seed: loaded.seed,
        parameters: Parameters {
            algorithm: cfg.algorithm.name(),
            tau: cfg.tau,
            sigma: cfg.sigma,
            eta: cfg.eta,
            gamma: cfg.gamma,
            rho: format!("{:?}", cfg.rho),
            max_iter: cfg.max_iter,
            tol: cfg.stop_tol,
            burn_in: cfg.burn_in,
            quadratic_mode: cfg.quadratic_mode,
            threads: args.threads,
            parallel: matches!(engine, Engine::Parallel(_)),
        },
        unsafe_run: args.allow_unsafe,
        validation: engine.report(),
        iterations: 0,
        final_residual: None,
        final_objective: None,
        oracle_objective: None,
        error: None,
        x: None,
    };
    if !admitted && !args.allow_unsafe {
        for c in &engine.report().violated {
            eprintln!("rejected by {}: {c}", engine.report().theorem_tag);
        }
        return match write_report(&args.out, &report) {
            Ok(()) => EXIT_REJECTED,
            Err(e) => fail(e),
        };
    }

    let oracle = oracle_solve(problem).ok();
    report.oracle_objective = oracle.as_ref().map(|o| o.objective);
    let distance = engine.distance_to_solution(problem);
    let mut writer = match csv::Writer::from_path(args.out.join("trace.csv")) {
        Ok(w) => w,
        Err(e) => return fail(e),
    };
    if let Err(e) = writer.write_record(TRACE_HEADER) {
        return fail(e);
    }
    let start = Instant::now();
    let mut written = 0usize;
    let mut trace_error = None;
    let record = |iter: usize, outcome: &StepOutcome, writer: &mut csv::Writer<fs::File>| {
        let objective = problem.objective(&outcome.estimate).ok();
        let dist = distance.as_ref().and_then(|d| d(&outcome.next));
        writer.write_record([
            iter.to_string(),
            format!("{:e}", outcome.residual()),
            plain_or_blank(objective),
            sci_or_blank(dist),
            format!("{:.6}", start.elapsed().as_secs_f64()),
        ])
    };
    let result = engine.run_with(args.allow_unsafe, |outcome, _| {
        let iter = outcome.next.iter;
        if iter % args.trace_every == 0 {
            if let Err(e) = record(iter, outcome, &mut writer) {
                trace_error = Some(e);
                return ControlFlow::Break(());
            }
            written = iter;
        }
        ControlFlow::Continue(())
    });
    if let Some(e) = trace_error {
        return fail(e);
    }
    let code = match result {
        Ok(solution) => {
            let outcome = &solution.outcome;
            if let Some(last) = &outcome.last {
                if written != outcome.iterations {
                    if let Err(e) = record(outcome.iterations, last, &mut writer) {
                        return fail(e);
                    }
                }
            }
            report.iterations = outcome.iterations;
            report.final_residual = Some(outcome.residual);
            report.final_objective = problem.objective(&solution.x).ok();
            report.x = Some(solution.x.as_slice().to_vec());
            match outcome.reason {
                StopReason::Converged => {
                    report.status = "converged";
                    EXIT_CONVERGED
                }
                StopReason::MaxIter | StopReason::Halted => {
                    report.status = "max_iter";
                    EXIT_MAX_ITER
                }
            }
        }
        Err(Error::Divergence { iter }) => {
            report.status = "diverged";
            report.iterations = iter;
            report.error = Some(format!("non-finite iterate at iteration {iter}"));
            EXIT_DIVERGED
        }
        Err(e) => return fail(e),
    };
    if let Err(e) = writer.flush() {
        return fail(e);
    }
    match write_report(&args.out, &report) {
        Ok(()) => code,
        Err(e) => fail(e),
    }
}

fn run_recommend(args: &ProblemArgs) -> u8 {
    let loaded = match load_problem(&args.problem) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let candidates = match recommend(&loaded.spec) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if candidates.iter().any(|c| c.restricted) {
        eprintln!("h is not quadratic: only the general setting applies");
    }
    match serde_json::to_string_pretty(&candidates) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{text}");
            EXIT_CONVERGED
        }
        Err(e) => fail(e),
    }
}
