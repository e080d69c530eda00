use std::path::PathBuf;
use std::process::{Command, ExitCode};

use clap::{Parser, Subcommand};
use spinbath::Method;
use spinbath_cli::analyze::{run_analysis, AnalysisKind};
use spinbath_cli::compile::compile_gates;
use spinbath_cli::oracle::{oracle_check, CALIBRATION_FILE};
use spinbath_cli::output::resolve_output;
use spinbath_cli::run::run_echo;
use spinbath_cli::sweep::{default_workers, SweepConfig, SweepPlan};
use spinbath_cli::{CliError, RunConfig};

/// Loschmidt-echo decoherence of a qubit coupled to a spin chain.
#[derive(Parser)]
#[command(name = "spinbath", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute one echo series.
    Echo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        method: Option<Method>,
    },
    /// Run every point of a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        method: Option<Method>,
    },
    /// Fit a stored run or sweep.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        which: AnalysisKind,
        /// Report path; defaults to `<input>/analysis-<which>.json`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compile one Trotter step into lattice gates.
    CompileGates {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross-check all engines against the full-space oracle.
    OracleCheck {
        #[arg(long, default_value = ".")]
        output: PathBuf,
    },
}

fn execute(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Echo { config, output, method } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(m) = method {
                cfg.method = m;
            }
            let dir = resolve_output(output.as_deref(), cfg.output.as_deref())?;
            cfg.output = Some(dir.clone());
            let (_, series) = run_echo(&cfg, &dir)?;
            println!("wrote {} points to {}", series.len(), dir.display());
        }
        Cmd::Sweep {
            config,
            output,
            workers,
            method,
        } => {
            let sweep = SweepConfig::load(&config)?;
            let dir = resolve_output(output.as_deref(), sweep.output.as_deref())?;
            let mut plan = SweepPlan::new(&sweep)?;
            if let Some(m) = method {
                plan = plan.with_method(m);
            }
            let workers = workers.or(sweep.workers).unwrap_or_else(default_workers);
            println!("sweep: {} points on {} workers", plan.len(), workers);
            let index = plan.execute(&dir, workers)?;
            println!("completed {} of {} points in {}", index.completed, index.total, dir.display());
            if index.failed > 0 {
                return Err(CliError::PartialSweep {
                    failed: index.failed,
                    total: index.total,
                });
            }
        }
        Cmd::Analyze { input, which, output } => {
            let path = run_analysis(&input, which, output.as_deref())?;
            println!("wrote {}", path.display());
        }
        Cmd::CompileGates {
            config,
            tau,
            verify,
            output,
        } => {
            let cfg = RunConfig::load(&config)?;
            let dir = resolve_output(output.as_deref(), cfg.output.as_deref())?;
            let (seq, verification) = compile_gates(&cfg, tau, verify, &dir)?;
            let count = seq.count();
            println!(
                "{} gates: {} local, {} collision phases, {} addressed to site 0",
                seq.gates.len(),
                count.local,
                count.collision_phases,
                count.addressed_site0
            );
            if let Some(v) = verification {
                println!("distance {:e} at tau, {:e} at tau/2", v.distance, v.half_tau_distance);
            }
        }
        Cmd::OracleCheck { output } => {
            let report = oracle_check(&output)?;
            println!(
                "{} checks passed, convention hash {}; wrote {}",
                report.checks.len(),
                report.convention_hash,
                output.join(CALIBRATION_FILE).display()
            );
        }
    }
    Ok(())
}

/// Some OpenBLAS builds pick kernels that return wrong eigenvectors on
/// virtualized CPUs. If the self-check fails and no core type was forced,
/// rerun this process with a known-good one.
fn reexec_with_safe_blas() -> Option<ExitCode> {
    const VAR: &str = "OPENBLAS_CORETYPE";
    let error = spinbath::linalg::lapack_self_check().unwrap_or(f64::INFINITY);
    if error < 1e-8 {
        return None;
    }
    if std::env::var_os(VAR).is_some() {
        log::warn!("LAPACK self-check error {error:e} with {VAR} set; results may be wrong");
        return None;
    }
    log::info!("LAPACK self-check error {error:e}; restarting with {VAR}=Haswell");
    let exe = std::env::current_exe().ok()?;
    let status = Command::new(exe)
        .args(std::env::args_os().skip(1))
        .env(VAR, "Haswell")
        .status()
        .ok()?;
    Some(ExitCode::from(status.code().unwrap_or(2) as u8))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(code) = reexec_with_safe_blas() {
        return code;
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
