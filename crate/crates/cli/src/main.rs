//! `impoly` — fit explicit polynomial surrogates to implicitly defined
//! functions.
//!
//! Three subcommands share one config format: `run` fits and writes the
//! artifact files, `verify` only checks the single-jump assumption and
//! prints per-section violation counts, `bench` times the pipeline stages
//! serial versus parallel. Exit codes: 0 success, 2 verification failure
//! without `--force`, 1 hard error (including config errors).

mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use impoly::{
    choose_order, eliminate, fit_analytic, fit_dyadic, fit_polynomial, system_residual,
    verify_single_jump, EliminationChain, FitError, FitReport, ImplicitProblem, Interval,
    JumpReport, MultiIndex, RealFn, Rect, StageSpec, SystemError, SystemProblem,
};

use config::{ConfigError, ModeConfig, RunConfig, StageConfig};
use output::{Artifacts, BenchRow};

/// Points scanned along the dependent axis per verified section.
const Y_SCAN: usize = 64;

#[derive(Parser)]
#[command(
    name = "impoly",
    version,
    about = "Fit explicit polynomial surrogates to implicitly defined functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the configured problem and write coefficients, report, and
    /// surface samples.
    Run(RunArgs),
    /// Check the single-jump assumption only; print per-section violation
    /// counts.
    Verify(CommonArgs),
    /// Time the pipeline stages over repeated fits, serial versus parallel.
    Bench(BenchArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the run configuration.
    config: PathBuf,
    /// Cap the worker thread count (0 = automatic).
    #[arg(long, value_name = "K")]
    threads: Option<usize>,
    /// Override the sampling seed used by the verifiers.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Write artifacts here instead of the configured directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Fit even when verification finds violations.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Write bench.csv here instead of the configured directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of timed repetitions.
    #[arg(long, default_value_t = 3)]
    reps: usize,
}

// ------------------------------------------------------------------
// Errors
// ------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    Config { path: PathBuf, source: ConfigError },
    Fit(FitError),
    System(SystemError),
    Io(std::io::Error),
    Setup(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { path, source } => match source.line {
                Some(line) => write!(f, "{}:{line}: {}", path.display(), source.message),
                None => write!(f, "{}: {}", path.display(), source.message),
            },
            CliError::Fit(e) => e.fmt(f),
            CliError::System(e) => e.fmt(f),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Setup(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::Fit(e)
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        CliError::System(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    /// True for failures of the single-jump assumption itself (no clean
    /// section, no valid elimination order) as opposed to hard errors.
    /// These exit 2 when the run is not forced.
    fn is_verification(&self) -> bool {
        matches!(
            self,
            CliError::Fit(FitError::Bracket(_))
                | CliError::System(SystemError::NoValidOrder { .. })
                | CliError::System(SystemError::Stage {
                    source: FitError::Bracket(_),
                    ..
                })
        )
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run_cmd(args),
        Command::Verify(args) => verify_cmd(args),
        Command::Bench(args) => bench_cmd(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

// ------------------------------------------------------------------
// Shared plumbing
// ------------------------------------------------------------------

fn load_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = config::load(&args.config).map_err(|source| CliError::Config {
        path: args.config.clone(),
        source,
    })?;
    if let Some(seed) = args.seed {
        cfg.tolerances.seed = seed;
    }
    Ok(cfg)
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(k) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Setup(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}

fn scoped_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Setup(format!("cannot build a thread pool: {e}")))
}

/// Runs the bracket verifier(s): one scan for single-equation modes; for
/// systems, each equation is scanned in the last dependent variable over
/// the rectangle extended by the lower codomain intervals (the stage-one
/// eligibility check).
fn verify_all(cfg: &RunConfig) -> Result<Vec<JumpReport>, CliError> {
    let tol = &cfg.tolerances;
    if let ModeConfig::System { .. } = cfg.mode {
        let m = cfg.m();
        let mut axes: Vec<Interval> = (0..cfg.domain.dim()).map(|k| cfg.domain.axis(k)).collect();
        axes.extend_from_slice(&cfg.intervals[..m - 1]);
        let extended = Rect::from_intervals(&axes);
        cfg.equations
            .iter()
            .map(|eq| {
                verify_single_jump(
                    eq,
                    &extended,
                    cfg.intervals[m - 1],
                    tol.orientation_samples,
                    Y_SCAN,
                    tol.seed,
                )
                .map_err(|e| CliError::Fit(e.into()))
            })
            .collect()
    } else {
        let report = verify_single_jump(
            &cfg.equations[0],
            &cfg.domain,
            cfg.intervals[0],
            tol.orientation_samples,
            Y_SCAN,
            tol.seed,
        )
        .map_err(|e| CliError::Fit(e.into()))?;
        Ok(vec![report])
    }
}

fn build_problem(cfg: &RunConfig) -> Result<ImplicitProblem, CliError> {
    Ok(ImplicitProblem::with_options(
        Box::new(cfg.equations[0].clone()),
        cfg.domain.clone(),
        cfg.intervals[0],
        cfg.center.clone(),
        cfg.orientation,
        cfg.tolerances,
    )?)
}

/// Fits the single-equation modes; returns the problem (for its resolved
/// center and orientation) plus one labeled report per fit.
fn fit_single(cfg: &RunConfig) -> Result<(ImplicitProblem, Vec<(String, FitReport)>), CliError> {
    let problem = build_problem(cfg)?;
    let fits = match &cfg.mode {
        ModeConfig::Polynomial { n } => {
            let report = fit_polynomial(&problem, &MultiIndex::new(n.clone()))?;
            vec![(format!("N={}", output::fmt_usize_list(n)), report)]
        }
        ModeConfig::Analytic { schedule } => fit_analytic(&problem, schedule)?
            .into_iter()
            .zip(schedule)
            .map(|(report, &n)| (format!("N={n}"), report))
            .collect(),
        ModeConfig::Dyadic { depth } => {
            let report = fit_dyadic(&problem, *depth)?;
            vec![(format!("depth={depth}"), report)]
        }
        ModeConfig::System { .. } => unreachable!("system mode has its own driver"),
    };
    Ok((problem, fits))
}

fn stage_specs(stage_cfgs: &[StageConfig]) -> Vec<StageSpec> {
    stage_cfgs
        .iter()
        .map(|s| {
            let mut spec = StageSpec::new(MultiIndex::new(s.n.clone()));
            spec.domain = s.domain.clone();
            spec.interval = s.interval;
            spec.center = s.center.clone();
            spec.orientation = s.orientation;
            spec
        })
        .collect()
}

/// Builds the system, resolves the elimination order (configured or
/// probed), and runs the stage cascade.
fn fit_system(
    cfg: &RunConfig,
    stage_cfgs: &[StageConfig],
) -> Result<(SystemProblem, Vec<usize>, EliminationChain), CliError> {
    let equations: Vec<Box<dyn RealFn>> = cfg
        .equations
        .iter()
        .map(|e| Box::new(e.clone()) as Box<dyn RealFn>)
        .collect();
    let problem = SystemProblem::with_options(
        equations,
        cfg.domain.clone(),
        Rect::from_intervals(&cfg.intervals),
        cfg.order.clone(),
        cfg.tolerances,
    )?;
    let order = match &cfg.order {
        Some(order) => order.clone(),
        None => choose_order(&problem, cfg.tolerances.orientation_samples)?,
    };
    let chain = eliminate(&problem, &order, &stage_specs(stage_cfgs))?;
    Ok((problem, order, chain))
}

fn stage_totals(reports: &[FitReport]) -> (f64, f64, f64) {
    reports.iter().fold((0.0, 0.0, 0.0), |(m, s, d), r| {
        (
            m + r.timings.moments_s,
            s + r.timings.solve_s,
            d + r.timings.diagnostics_s,
        )
    })
}

// ------------------------------------------------------------------
// run
// ------------------------------------------------------------------

fn run_cmd(args: RunArgs) -> Result<ExitCode, CliError> {
    init_threads(args.common.threads)?;
    let mut cfg = load_config(&args.common)?;
    if args.force {
        cfg.tolerances.force = true;
    }
    if let Some(out) = args.out {
        cfg.out_dir = Some(out);
    }
    let force = cfg.tolerances.force;
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));

    let verifications = verify_all(&cfg)?;
    let violations: usize = verifications.iter().map(|v| v.violations.len()).sum();
    for (j, v) in verifications.iter().enumerate() {
        let label = if verifications.len() > 1 {
            format!("equation {}: ", j + 1)
        } else {
            String::new()
        };
        println!(
            "{label}{} sections checked, {} violation(s)",
            v.samples_checked,
            v.violations.len()
        );
    }
    if violations > 0 {
        if !force {
            eprintln!(
                "verification failed on {violations} section(s); rerun with --force to fit anyway"
            );
            return Ok(ExitCode::from(2));
        }
        eprintln!("verification found {violations} violating section(s); continuing under --force");
    }

    let artifacts = match &cfg.mode {
        ModeConfig::System { stages } => run_system(&cfg, stages, &verifications),
        _ => run_single(&cfg, &verifications[0]),
    };
    let artifacts = match artifacts {
        Ok(a) => a,
        Err(e) if e.is_verification() && !force => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
        Err(e) => return Err(e),
    };

    artifacts.write_all(&out_dir)?;
    let names: Vec<&str> = artifacts.names().collect();
    println!("wrote {} to {}/", names.join(", "), out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn run_single(cfg: &RunConfig, verification: &JumpReport) -> Result<Artifacts, CliError> {
    let (problem, fits) = fit_single(cfg)?;
    for (label, report) in &fits {
        println!(
            "fit {label}: residual_max = {:.3e}, block_mismatch_max = {:.3e}",
            report.residual_max, report.block_mismatch_max
        );
        if report.condition_warning {
            eprintln!(
                "warning: mode matrix condition estimate {:.3e} exceeds the configured bound",
                report.condition_estimate
            );
        }
    }
    let (_, last) = fits.last().expect("every mode produces at least one fit");

    let mut artifacts = Artifacts::new();
    artifacts.push("coefficients.csv", output::coefficients_csv(last.coefficients()));
    artifacts.push(
        "report.txt",
        output::single_report(
            cfg,
            problem.center(),
            problem.orientation(),
            verification,
            &fits,
        ),
    );
    artifacts.push(
        "surface.csv",
        output::surface_csv(
            &cfg.equations[0],
            &cfg.domain,
            cfg.intervals[0],
            last.coefficients(),
            cfg.tolerances.validation_per_axis,
            &cfg.variables,
        )?,
    );
    Ok(artifacts)
}

fn run_system(
    cfg: &RunConfig,
    stage_cfgs: &[StageConfig],
    verifications: &[JumpReport],
) -> Result<Artifacts, CliError> {
    let (problem, order, chain) = fit_system(cfg, stage_cfgs)?;
    let residuals = system_residual(&problem, &chain, cfg.tolerances.validation_per_axis)?;

    let order_1: Vec<usize> = order.iter().map(|&e| e + 1).collect();
    println!("elimination order: {}", output::fmt_usize_list(&order_1));
    for (k, stage) in chain.stages().iter().enumerate() {
        println!(
            "stage {} (equation {} solves {}): residual_max = {:.3e}",
            k + 1,
            stage.equation + 1,
            cfg.variables[cfg.n() + stage.variable],
            stage.report.residual_max
        );
    }
    for (j, r) in residuals.iter().enumerate() {
        println!("composed residual, equation {}: {:.3e}", j + 1, r);
    }

    let mut artifacts = Artifacts::new();
    for (k, stage) in chain.stages().iter().enumerate() {
        artifacts.push(
            format!("stage{}_coefficients.csv", k + 1),
            output::coefficients_csv(stage.surrogate()),
        );
    }
    artifacts.push("manifest.txt", output::manifest(cfg, &order, &chain, stage_cfgs));
    artifacts.push(
        "report.txt",
        output::system_report(cfg, verifications, &order, &chain, &residuals),
    );
    artifacts.push(
        "surface.csv",
        output::system_surface_csv(
            problem.equations(),
            &cfg.domain,
            &chain,
            cfg.tolerances.validation_per_axis,
            &cfg.variables,
        )?,
    );
    Ok(artifacts)
}

// ------------------------------------------------------------------
// verify
// ------------------------------------------------------------------

fn verify_cmd(args: CommonArgs) -> Result<ExitCode, CliError> {
    init_threads(args.threads)?;
    let cfg = load_config(&args)?;
    let verifications = verify_all(&cfg)?;
    let mut violations = 0;
    for (j, v) in verifications.iter().enumerate() {
        if verifications.len() > 1 {
            println!("[equation {}]", j + 1);
        }
        print!("{}", output::verification_lines(v));
        violations += v.violations.len();
    }
    Ok(if violations == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

// ------------------------------------------------------------------
// bench
// ------------------------------------------------------------------

/// Runs every fit the config asks for and returns the per-fit reports
/// (stage reports, for systems). Used by `bench`, which times this.
fn bench_fits(cfg: &RunConfig) -> Result<Vec<FitReport>, CliError> {
    match &cfg.mode {
        ModeConfig::System { stages } => {
            let (_, _, chain) = fit_system(cfg, stages)?;
            Ok(chain.stages().iter().map(|s| s.report.clone()).collect())
        }
        _ => Ok(fit_single(cfg)?.1.into_iter().map(|(_, r)| r).collect()),
    }
}

fn bench_cmd(args: BenchArgs) -> Result<ExitCode, CliError> {
    if args.reps == 0 {
        return Err(CliError::Setup("--reps must be at least 1".into()));
    }
    let mut cfg = load_config(&args.common)?;
    if let Some(out) = args.out {
        cfg.out_dir = Some(out);
    }
    let force = cfg.tolerances.force;
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));

    let serial = scoped_pool(1)?;
    let parallel = scoped_pool(args.common.threads.unwrap_or(0))?;

    let mut rows = Vec::with_capacity(args.reps);
    for rep in 1..=args.reps {
        let start = Instant::now();
        let outcome = serial.install(|| bench_fits(&cfg));
        let serial_s = start.elapsed().as_secs_f64();
        if let Err(e) = outcome {
            return bench_fail(e, force);
        }

        let start = Instant::now();
        let outcome = parallel.install(|| bench_fits(&cfg));
        let parallel_s = start.elapsed().as_secs_f64();
        let reports = match outcome {
            Ok(r) => r,
            Err(e) => return bench_fail(e, force),
        };

        let (moments_s, solve_s, diagnostics_s) = stage_totals(&reports);
        rows.push(BenchRow {
            rep,
            moments_s,
            solve_s,
            diagnostics_s,
            serial_s,
            parallel_s,
        });
    }

    let csv = output::bench_csv(&rows);
    print!("{csv}");
    std::fs::create_dir_all(&out_dir)?;
    let path = out_dir.join("bench.csv");
    std::fs::write(&path, &csv)?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn bench_fail(e: CliError, force: bool) -> Result<ExitCode, CliError> {
    if e.is_verification() && !force {
        eprintln!("error: {e}");
        Ok(ExitCode::from(2))
    } else {
        Err(e)
    }
}
