mod output;
mod problem;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use epca_core::analysis::{
    convergence_order, error_table, estimate_constants, monotonicity_certificate, Verdict, DEFAULT_GRID,
};
use epca_core::{solve, Error as CoreError, IntegratorRegistry, SolveStatus};
use serde_json::json;

use output::TableBlock;

const DEFAULT_PRECISION: usize = 8;

/// Impulsive delay equations with adaptive delay: EPCA solver and diagnostics.
#[derive(Parser)]
#[command(name = "epca", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem and write the trajectory.
    Solve(SolveArgs),
    /// Error tables against the closed form (or the reference integrator).
    Table(TableArgs),
    /// Observed convergence order over a ladder of step sizes.
    Order(OrderArgs),
    /// Monotonicity certificate of t - tau(t) and a-priori constants.
    Certify(CertifyArgs),
    /// List the available integrators.
    Methods,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Built-in problem name or path to a problem file.
    #[arg(long)]
    problem: String,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Decimal places of CSV values.
    #[arg(long, env = "EPCA_PRECISION")]
    precision: Option<usize>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Step size.
    #[arg(long)]
    h: f64,
    /// End time; defaults to the problem horizon.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Integrator name, see `epca methods`.
    #[arg(long, default_value = "epca")]
    method: String,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    common: Common,
    /// Step sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    h: Vec<f64>,
    /// Sample times, comma separated; each must be a mesh point.
    #[arg(long, value_delimiter = ',')]
    times: Vec<f64>,
    /// Use the reference integrator as the exact solution.
    #[arg(long)]
    exact_from_oracle: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct OrderArgs {
    #[command(flatten)]
    common: Common,
    /// Largest step size.
    #[arg(long)]
    h_base: f64,
    /// Number of step sizes (at least 3).
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Ratio between consecutive step sizes.
    #[arg(long, default_value_t = 10.0)]
    factor: f64,
    /// Sample times, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    times: Vec<f64>,
    #[arg(long)]
    exact_from_oracle: bool,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    h: f64,
    /// Samples per axis for sampled constants.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
}

impl Common {
    fn precision(&self) -> usize {
        self.precision.unwrap_or(DEFAULT_PRECISION)
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn cmd_solve(args: SolveArgs) -> Result<u8> {
    let loaded = problem::load(&args.common.problem)?;
    let integrator = IntegratorRegistry::default().get(&args.method)?;
    let t_end = args.t_end.unwrap_or(loaded.problem.horizon);
    let sol = integrator.integrate(&loaded.problem, args.h, t_end)?;
    let mut out = args.common.writer()?;
    match args.format {
        Format::Csv => output::trajectory_csv(&mut out, sol.as_ref(), args.common.precision())?,
        Format::Json => {
            let v = output::trajectory_json(sol.as_ref(), &loaded.name, integrator.name(), args.h)?;
            output::write_json(&mut out, &v)?;
        }
    }
    out.flush()?;
    match sol.status() {
        SolveStatus::TauNegative { index } => {
            eprintln!("delay became negative at step {index} (t = {}); output is partial", sol.t_end());
            Ok(2)
        }
        _ => Ok(0),
    }
}

fn cmd_table(args: TableArgs) -> Result<u8> {
    let loaded = problem::load(&args.common.problem)?;
    let exact = problem::reference(&loaded, args.exact_from_oracle)?;
    let mut blocks = Vec::new();
    let mut offending = Vec::new();
    for &h in &args.h {
        let traj = solve(&loaded.problem, h, loaded.problem.horizon)?;
        let mut rows = Vec::new();
        for &s in &args.times {
            match error_table(&traj, &loaded.problem.history, exact.as_ref(), &[s]) {
                Ok(mut r) => rows.append(&mut r),
                Err(e @ (CoreError::NotAMeshPoint { .. } | CoreError::OutOfRange { .. })) => {
                    offending.push(format!("h = {h}, t = {s}: {e}"))
                }
                Err(e) => return Err(e.into()),
            }
        }
        blocks.push(TableBlock { h, rows });
    }
    if !offending.is_empty() {
        bail!("invalid sample times:\n  {}", offending.join("\n  "));
    }
    let mut out = args.common.writer()?;
    match args.format {
        Format::Csv => output::table_csv(&mut out, &blocks, loaded.problem.dim, args.common.precision())?,
        Format::Json => {
            let reference = if loaded.exact.is_some() && !args.exact_from_oracle { "closed_form" } else { "oracle" };
            output::write_json(&mut out, &output::table_json(&blocks, &loaded.name, reference))?;
        }
    }
    out.flush()?;
    Ok(0)
}

fn cmd_order(args: OrderArgs) -> Result<u8> {
    if args.levels < 3 {
        bail!(CoreError::TooFewLevels(args.levels));
    }
    if !(args.factor > 1.0) {
        bail!("--factor must be greater than 1");
    }
    let loaded = problem::load(&args.common.problem)?;
    let exact = problem::reference(&loaded, args.exact_from_oracle)?;
    let levels: Vec<f64> = (0..args.levels).map(|i| args.h_base / args.factor.powi(i as i32)).collect();
    let est = convergence_order(&loaded.problem, exact.as_ref(), &levels, &args.times)?;
    let mut out = args.common.writer()?;
    output::write_json(&mut out, &output::order_json(&est, &loaded.name, &args.times))?;
    out.flush()?;
    for f in &est.failures {
        eprintln!("level h = {} failed: {}", f.h, f.error);
    }
    Ok(if est.levels.len() < 3 { 1 } else { 0 })
}

fn cmd_certify(args: CertifyArgs) -> Result<u8> {
    let loaded = problem::load(&args.common.problem)?;
    let traj = solve(&loaded.problem, args.h, loaded.problem.horizon)?;
    let report = monotonicity_certificate(&traj, &loaded.problem);
    let verdict = if traj.status.is_success() { report.verdict() } else { Verdict::Failed };
    let constants = estimate_constants(&loaded.problem, Some(args.grid));
    let v = json!({
        "schema": output::SCHEMA,
        "kind": "certificate",
        "problem": loaded.name,
        "h": args.h,
        "status": traj.status,
        "verdict": verdict,
        "monotonicity": report,
        "constants": constants.as_ref().ok(),
        "constants_error": constants.as_ref().err().map(|e| e.to_string()),
    });
    let mut out = args.common.writer()?;
    output::write_json(&mut out, &v)?;
    out.flush()?;
    Ok(match verdict {
        Verdict::StrictlyIncreasing => 0,
        Verdict::PiecewiseMonotone => 3,
        Verdict::Failed => 4,
    })
}

fn cmd_methods() -> Result<u8> {
    let registry = IntegratorRegistry::default();
    for name in registry.names() {
        println!("{name}\t{}", registry.get(name)?.description());
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version are not errors; usage errors share exit code 1
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Table(a) => cmd_table(a),
        Command::Order(a) => cmd_order(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Methods => cmd_methods(),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
