// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dsm_core::io::{export_problem, format_float, write_csv_vector};
use dsm_core::{perturb, Schedule};
use dsm_harness::{
    run_sweep, run_verify, write_report, ExitStatus, HarnessError, ProblemSpec, RuleChoice, Suite,
    SweepConfig,
};

/// Dynamical systems method for noisy linear ill-posed problems.
#[derive(Parser)]
#[command(name = "dsm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a δ-sweep and write a CSV report.
    Sweep(SweepArgs),
    /// Run invariant checks and print a pass/fail report.
    Verify {
        /// identities, bounds, lemmas or all
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Write a problem as MatrixMarket/CSV files.
    ExportProblem(ExportArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// synthetic, gravity, heat, or file:<matrix>,<solution>
    #[arg(long, default_value = "synthetic")]
    problem: String,
    /// Discretization size for generated problems.
    #[arg(long, default_value_t = 32)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Comma-separated, strictly decreasing noise levels.
    #[arg(long, default_value = "1e-1,1e-2,1e-3,1e-4")]
    deltas: String,
    /// Discrepancy constant in (1, 2).
    #[arg(long, default_value_t = 1.5)]
    c: f64,
    /// Schedule a(t) = c0/(c1 + t)^b, e.g. "c0=1,c1=1,b=0.5".
    #[arg(long, default_value = "c0=1,c1=1,b=0.5")]
    schedule: String,
    /// integral, root or both
    #[arg(long, default_value = "both")]
    rule: String,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "quad-tol", default_value_t = 1e-10)]
    quad_tol: f64,
    /// Horizon for the integral rule.
    #[arg(long = "t-max", default_value_t = 1e20)]
    t_max: f64,
    /// Leave wall_time_ms empty so reports are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Also write f_delta.csv at this noise level.
    #[arg(long)]
    delta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn parse_deltas(text: &str) -> Result<Vec<f64>, HarnessError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| HarnessError::Usage(format!("bad noise level '{s}'")))
        })
        .collect()
}

fn sweep(args: SweepArgs) -> Result<ExitStatus, HarnessError> {
    let cfg = SweepConfig {
        problem: args.problem.problem.parse()?,
        n: args.problem.n,
        deltas: parse_deltas(&args.deltas)?,
        c: args.c,
        schedule: args.schedule.parse::<Schedule>()?,
        rule: args.rule.parse::<RuleChoice>()?,
        seed: args.problem.seed,
        quad_tolerance: args.quad_tol,
        t_max: args.t_max,
        omit_timing: args.no_timing,
    };
    let rows = run_sweep(&cfg)?;
    match &args.out {
        Some(path) => write_report(File::create(path)?, &rows, cfg.omit_timing)?,
        None => write_report(io::stdout().lock(), &rows, cfg.omit_timing)?,
    }
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        log::error!("{failed} of {} runs failed", rows.len());
        return Ok(ExitStatus::Precondition);
    }
    Ok(ExitStatus::Success)
}

fn verify(suite: &str) -> Result<ExitStatus, HarnessError> {
    let suite: Suite = suite.parse()?;
    let report = run_verify(suite)?;
    let mut out = io::stdout().lock();
    writeln!(out, "{report}")?;
    Ok(if report.all_passed() {
        ExitStatus::Success
    } else {
        ExitStatus::VerificationFailure
    })
}

fn export(args: ExportArgs) -> Result<ExitStatus, HarnessError> {
    let spec: ProblemSpec = args.problem.problem.parse()?;
    let problem = spec.build(args.problem.n, args.problem.seed)?;
    let mut extra = vec![
        ("generator".to_string(), spec.to_string()),
        ("n".to_string(), args.problem.n.to_string()),
        ("seed".to_string(), args.problem.seed.to_string()),
    ];
    if let Some(delta) = args.delta {
        let noisy = perturb(&problem, delta, args.problem.seed)?;
        std::fs::create_dir_all(&args.out)?;
        write_csv_vector(File::create(args.out.join("f_delta.csv"))?, &noisy.f_delta)?;
        extra.push(("delta".to_string(), format_float(delta)));
    }
    for path in export_problem(&problem, &args.out, &extra)? {
        log::info!("wrote {}", path.display());
    }
    Ok(ExitStatus::Success)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(args) => sweep(args),
        Command::Verify { suite } => verify(&suite),
        Command::ExportProblem(args) => export(args),
    };
    let status = result.unwrap_or_else(|e| {
        eprintln!("dsm: {e}");
        e.exit_status()
    });
    ExitCode::from(status as u8)
}
