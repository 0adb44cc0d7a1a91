use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use koplab::experiment::{self, ExperimentConfig, Outcome};
use koplab::lp;
use koplab::model::{make_initial_data, CouplingAlpha};
use koplab::solver::{self, ModelKind};
use koplab::spectral::Fourier;
use koplab::Error;

#[derive(Parser)]
#[command(name = "koplab", version, about = "Order-parameter and Korteweg capillary fluid laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the interaction kernel Fourier pair and Bessel identities.
    KernelValidate {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3])]
        dims: Vec<usize>,
        /// CSV destination (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-mode checks of the linear semigroup and decay envelopes.
    LinearValidate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frequency thresholds for a list of couplings.
    Thresholds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate one model and write snapshots, a manifest and norms.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        #[arg(long)]
        alpha: Option<f64>,
        /// Output directory (overrides the configuration).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence sweep over the configured couplings.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Op,
    K,
}

fn sink(path: Option<&Path>) -> std::io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn is_solver_failure(e: &Error) -> bool {
    matches!(e, Error::VacuumError { .. } | Error::BlowUp { .. })
}

fn run(cli: Cli) -> koplab::Result<Outcome> {
    match cli.command {
        Command::KernelValidate { dims, out } => {
            let rows = experiment::run_kernel_validation(&dims)?;
            experiment::write_kernel_csv(sink(out.as_deref())?, &rows)?;
            Ok(Outcome::from_pass(rows.iter().all(|r| r.passes())))
        }
        Command::LinearValidate { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let report = experiment::run_linear_validation(&cfg)?;
            experiment::write_linear_csv(sink(out.as_deref())?, &report)?;
            Ok(Outcome::from_pass(report.passes()))
        }
        Command::Thresholds { config, alphas, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let report = experiment::run_threshold_report(&cfg.params, &alphas)?;
            experiment::write_threshold_csv(sink(out.as_deref())?, &report)?;
            Ok(Outcome::Pass)
        }
        Command::Simulate { config, model, alpha, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let kind = match (model, alpha) {
                (ModelArg::Op, Some(a)) => ModelKind::Op(CouplingAlpha::new(a)?),
                (ModelArg::Op, None) => return Err(Error::Config("--model op needs --alpha".into())),
                (ModelArg::K, _) => ModelKind::K,
            };
            let fourier = Fourier::new(cfg.grid);
            let state0 = make_initial_data(&fourier, cfg.amplitude, cfg.band, cfg.seed)?;
            let dt_max = solver::dt_max(&fourier, &state0, &cfg.params)?;
            if cfg.step.dt > dt_max {
                eprintln!("warning: dt = {} exceeds the advisory bound {dt_max:e}", cfg.step.dt);
            }
            let traj = solver::integrate(&fourier, &state0, kind, &cfg.params, &cfg.step)?;
            let dir = out.unwrap_or(cfg.output_dir);
            let prefix = match kind {
                ModelKind::Op(a) => format!("op_alpha{}", a.get()),
                ModelKind::K => "k".to_string(),
            };
            solver::write_trajectory(&dir, &fourier, &traj, &prefix)?;
            let rows = experiment::trajectory_norm_rows(&fourier, &traj, &cfg.params, kind.alpha())?;
            lp::write_norm_csv(sink(Some(&dir.join(format!("{prefix}_norms.csv"))))?, &rows)?;
            Ok(Outcome::Pass)
        }
        Command::Sweep { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let report = experiment::run_convergence_sweep(&cfg)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            std::fs::create_dir_all(&dir)?;
            experiment::write_rate_csv(sink(Some(&dir.join("sweep.csv")))?, &report)?;
            for (name, fit) in [("order_l1", report.order_fit), ("f_diff_h", report.f_fit)] {
                if let Some(f) = fit {
                    println!("{name}: slope {:.3} +- {:.3}", f.slope, f.ci95);
                }
            }
            if report.solver_failed() {
                return Ok(Outcome::SolverFailure);
            }
            Ok(Outcome::from_pass(report.passes(0.2)))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => ExitCode::from(outcome.code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_solver_failure(&e) { Outcome::SolverFailure.code() as u8 } else { 1 })
        }
    }
}
