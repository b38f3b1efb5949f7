use clap::{Parser, Subcommand, ValueEnum};
use gglab_harness::config::ConfigError;
use gglab_harness::convergence::ConvergenceError;
use gglab_harness::presets;
use gglab_harness::{
    exit, load_config, load_sweep, output, run_convergence, run_single, run_sweep, RefinementMode,
    RunStatus,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gglab", version, about = "Damped coupled KdV simulations")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single simulation.
    Run {
        /// Config file or `preset:NAME`.
        #[arg(long)]
        config: String,
        /// Output directory (default: `outputs.dir` of the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every cell of a parameter sweep.
    Sweep {
        #[arg(long)]
        config: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refine dt (and dx) and report residual ratios and observed orders.
    Converge {
        #[arg(long)]
        config: String,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, value_enum, default_value_t = Mode::SpaceTime)]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inspect the built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    SpaceTime,
    Time,
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn config_failure(e: ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit::INVALID as u8)
}

fn failure(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(exit::FAILED as u8)
}

fn status(ok: bool) -> ExitCode {
    ExitCode::from(if ok { exit::SUCCESS } else { exit::FAILED } as u8)
}

fn run_status(s: RunStatus) -> ExitCode {
    match s {
        RunStatus::Ok => ExitCode::SUCCESS,
        RunStatus::Invalid => ExitCode::from(exit::INVALID as u8),
        RunStatus::BlowUp | RunStatus::SolveFailure => ExitCode::from(exit::FAILED as u8),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match cli.command {
        Command::Run { config, out } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            let dir = out.unwrap_or_else(|| cfg.outputs.dir.clone());
            let report = match run_single(&cfg, &dir) {
                Ok(r) => r,
                Err(e) => return failure(e),
            };
            match (&report.fit, report.status.is_ok()) {
                (Some(f), true) => println!(
                    "{}: k = {:.6}, C = {:.6e}, r^2 = {:.6}, max residual/E0 = {:.3e}",
                    dir.display(),
                    f.k,
                    f.c,
                    f.r_squared,
                    report.max_residual.unwrap_or(f64::NAN)
                ),
                _ => println!(
                    "{}: {} {}",
                    dir.display(),
                    report.status.as_str(),
                    report
                        .message
                        .as_deref()
                        .or(report.fit_error.as_deref())
                        .unwrap_or("")
                ),
            }
            run_status(report.status)
        }
        Command::Sweep { config, jobs, out } => {
            let sweep = match load_sweep(&config) {
                Ok(s) => s,
                Err(e) => return config_failure(e),
            };
            let dir = out.unwrap_or_else(|| sweep.out_dir());
            println!("{} cells", sweep.cell_count());
            let report = match run_sweep(&sweep, jobs, &dir) {
                Ok(r) => r,
                Err(e) => return failure(e),
            };
            println!("wrote {}", dir.join("sweep.csv").display());
            if report.only_invalid_failures() {
                return ExitCode::from(exit::INVALID as u8);
            }
            status(report.all_ok())
        }
        Command::Converge {
            config,
            levels,
            mode,
            out,
        } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            let mode = match mode {
                Mode::SpaceTime => RefinementMode::SpaceTime,
                Mode::Time => RefinementMode::Time,
            };
            let report = match run_convergence(&cfg, levels, mode) {
                Ok(r) => r,
                Err(e @ ConvergenceError::TooFewLevels(_)) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit::INVALID as u8);
                }
                Err(e) => return failure(e),
            };
            let dir = out.unwrap_or_else(|| cfg.outputs.dir.clone());
            if let Err(e) = std::fs::create_dir_all(&dir) {
                return failure(e);
            }
            let path = dir.join("convergence.json");
            if let Err(e) = output::write_json(&path, &report) {
                return failure(e);
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            status(report.all_ok())
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for p in presets::PRESETS {
                    println!("{:<20} {:<6} {}", p.name, p.kind.name(), p.summary);
                }
                ExitCode::SUCCESS
            }
            PresetAction::Show { name } => match presets::find(&name) {
                Some(p) => {
                    print!("{}", p.text);
                    ExitCode::SUCCESS
                }
                None => config_failure(ConfigError::UnknownPreset(name)),
            },
        },
    }
}
