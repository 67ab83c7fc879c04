//! `ghostimg`: run, sweep, certify, validate and report ghost imaging scenes.
//!
//! Exit codes: 0 success, 1 I/O or internal error, 2 config error,
//! 3 physics-regime error, 4 validation failure.

mod config;
mod error;
mod runner;

use clap::{Parser, Subcommand, ValueEnum};
use config::Scene;
use error::Failure;
use ghost_imaging::source::SpectrumConfiguration;
use ghost_imaging::Execution;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "ghostimg", version, about = "Ghost imaging with Gaussian-state light")]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true, env = "GHOSTIMG_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scene: image, metrics and manifest.
    Run {
        /// Scene config (or a run manifest to reproduce).
        scene: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the Cartesian product of the scene's sweep axes.
    Sweep {
        scene: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Classify a spectrum pair as classical, quantum-admissible or unphysical.
    Certify {
        /// Spectrum pair JSON: {dims, spacing, gn, gp: [[re, im], ...]}.
        #[arg(long, conflicts_with = "scene", required_unless_present = "scene")]
        spectrum: Option<PathBuf>,
        /// Build the GSM spectrum pair of this scene's source instead.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Bound::Quantum)]
        bound: Bound,
        #[arg(long, default_value_t = 33)]
        samples: usize,
        /// Half-width of the frequency grid in spectral standard deviations.
        #[arg(long, default_value_t = 4.0)]
        extent: f64,
        /// Scale the phase-sensitive spectrum by this factor.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Compare a Monte Carlo image with the analytic prediction.
    Validate {
        scene: PathBuf,
        /// Write validation.json here.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.95)]
        min_fraction: f64,
        #[arg(long, default_value_t = 3.0)]
        sigma: f64,
    },
    /// Render PGM and CSV from a run directory or manifest.
    Report {
        target: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Bound {
    /// `|g~p| = g~n`.
    Classical,
    /// `|g~p| = sqrt(g~n (1 + g~n))`.
    Quantum,
}

fn execution(workers: Option<usize>) -> Result<Execution, Failure> {
    match workers {
        Some(0) => Err(Failure::Config("--workers must be at least 1".into())),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
            Ok(if n == 1 { Execution::Sequential } else { Execution::Parallel })
        }
        None => Ok(Execution::default()),
    }
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let exec = execution(cli.workers)?;
    match cli.command {
        Command::Run { scene, out } => {
            let scene = Scene::load(&scene)?;
            let s = runner::run_scene(&scene, &out, exec)?;
            for w in &s.manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!("run {} -> {}", s.manifest.run_id, s.dir.display());
            print_json(&s.metrics);
        }
        Command::Sweep { scene, out } => {
            let scene = Scene::load(&scene)?;
            let s = runner::run_sweep(&scene, &out, exec)?;
            println!("{} runs -> {}", s.runs.len(), s.table.display());
            let mut first = None;
            for (i, r) in s.runs.iter().enumerate() {
                if let Err(e) = r {
                    eprintln!("run {i}: {e}");
                    first.get_or_insert_with(|| e.clone());
                }
            }
            if let Some(e) = first {
                return Err(e);
            }
        }
        Command::Certify { spectrum, scene, bound, samples, extent, scale } => {
            let report = match (spectrum, scene) {
                (Some(p), _) => runner::certify_file(&p)?,
                (None, Some(s)) => {
                    let config = match bound {
                        Bound::Classical => SpectrumConfiguration::ClassicalMaximum,
                        Bound::Quantum => SpectrumConfiguration::QuantumMaximum,
                    };
                    runner::certify_scene(&Scene::load(&s)?, config, samples, extent, scale)?
                }
                (None, None) => return Err(Failure::Config("give --spectrum or --scene".into())),
            };
            print_json(&report);
        }
        Command::Validate { scene, out, min_fraction, sigma } => {
            let scene = Scene::load(&scene)?;
            let report = runner::validate(&scene, exec, min_fraction, sigma)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| Failure::io(dir.display(), e))?;
                let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
                let p = dir.join("validation.json");
                std::fs::write(&p, text).map_err(|e| Failure::io(p.display(), e))?;
            }
            print_json(&report);
            if !report.passed {
                return Err(Failure::Validation(format!(
                    "{}/{} scan points within {} SE (need {:.0}%), residual consistent: {}",
                    report.within,
                    report.scan_points,
                    report.sigma,
                    100.0 * report.min_fraction,
                    report.residual_consistent
                )));
            }
        }
        Command::Report { target, out } => {
            for p in runner::report(&target, out.as_deref())? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ghostimg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
