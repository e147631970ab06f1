use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridstudies_core::config::{
    ConfigError, DistCase, FaultMode, MlTask, StabilityMode, StudyConfig, StudyKind,
};
use gridstudies_core::phasor::{parse_network, solve_steady_state, write_solution_csv};
use gridstudies_core::studies::{self, StudyError};

#[derive(Parser)]
#[command(
    name = "gridstudies",
    version,
    about = "Power-system case studies: fault datasets, lightning Monte Carlo, feeder time series, transient stability and ML predictors"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for every random draw of the study.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (a CSV file for fault-lab and phasor).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Caps the worker threads of the parallel parts.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Study configuration file (TOML). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Train,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Fault,
    Lightning,
    Stability,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Fault dataset on the 400 kV line.
    FaultLab {
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Upper bound of the fault resistances in test mode, ohms.
        #[arg(long)]
        rmax: Option<f64>,
    },
    /// Monte Carlo lightning performance study.
    Lightning {
        /// Number of sampled strokes.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Radial feeder time series (A1–A4) or Monte Carlo (B1–B4).
    Dist {
        #[arg(long, value_parser = parse_case)]
        case: Option<DistCase>,
        #[arg(long)]
        hours: Option<usize>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Single-machine transient stability run or sweep.
    Stability {
        #[arg(long)]
        p_mw: Option<f64>,
        #[arg(long)]
        duration_ms: Option<f64>,
        /// Classify the whole power-factor and duration grid.
        #[arg(long)]
        sweep: bool,
    },
    /// Train and evaluate the predictors.
    Ml {
        #[arg(long, value_enum)]
        task: Option<Task>,
    },
    /// Solve a steady-state phasor network file.
    Phasor {
        /// Network description (TOML).
        #[arg(long)]
        network: PathBuf,
    },
    /// Run the study described by --config.
    Run,
}

fn parse_case(s: &str) -> Result<DistCase, String> {
    DistCase::parse(s).ok_or_else(|| format!("unknown case {s:?}; expected A1–A4 or B1–B4"))
}

fn base_config(global: &Global, kind: Option<StudyKind>) -> Result<StudyConfig, ConfigError> {
    let mut cfg = match (&global.config, kind) {
        (Some(path), _) => {
            let c = StudyConfig::load(path)?;
            if let Some(k) = kind {
                if c.study != k {
                    return Err(ConfigError::Invalid(format!(
                        "{} describes study \"{}\", not \"{k}\"",
                        path.display(),
                        c.study
                    )));
                }
            }
            c
        }
        (None, Some(k)) => StudyConfig::new(k),
        (None, None) => {
            return Err(ConfigError::Invalid("run needs --config FILE".into()));
        }
    };
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(o) = &global.out {
        cfg.out = o.clone();
    }
    if global.threads.is_some() {
        cfg.threads = global.threads;
    }
    Ok(cfg)
}

fn build_config(cli: &Cli) -> Result<StudyConfig, ConfigError> {
    let g = &cli.global;
    let kind = match &cli.command {
        Command::FaultLab { .. } => Some(StudyKind::FaultLab),
        Command::Lightning { .. } => Some(StudyKind::Lightning),
        Command::Dist { .. } => Some(StudyKind::Dist),
        Command::Stability { .. } => Some(StudyKind::Stability),
        Command::Ml { .. } => Some(StudyKind::Ml),
        Command::Run | Command::Phasor { .. } => None,
    };
    let mut cfg = base_config(g, kind)?;
    match &cli.command {
        Command::FaultLab { mode, rmax } => {
            let p = cfg.fault_lab.as_mut().expect("resolved");
            if let Some(m) = mode {
                p.mode = match m {
                    Mode::Train => FaultMode::Train,
                    Mode::Test => FaultMode::Test,
                };
            }
            if let Some(r) = rmax {
                p.r_max = *r;
            }
            // --out names the dataset file
            if let Some(out) = &g.out {
                let name = out.file_name().ok_or_else(|| {
                    ConfigError::Invalid(format!("{} is not a file name", out.display()))
                })?;
                p.file = Some(name.to_string_lossy().into_owned());
                cfg.out = match out.parent() {
                    Some(d) if d != Path::new("") => d.to_path_buf(),
                    _ => PathBuf::from("."),
                };
            }
        }
        Command::Lightning { n } => {
            if let Some(n) = n {
                cfg.lightning.as_mut().expect("resolved").n = *n;
            }
        }
        Command::Dist { case, hours, runs } => {
            let p = cfg.dist.as_mut().expect("resolved");
            if let Some(c) = case {
                p.case = *c;
            }
            if let Some(h) = hours {
                p.hours = *h;
            }
            if let Some(r) = runs {
                p.runs = *r;
            }
        }
        Command::Stability {
            p_mw,
            duration_ms,
            sweep,
        } => {
            let p = cfg.stability.as_mut().expect("resolved");
            if let Some(x) = p_mw {
                p.p_mw = *x;
            }
            if let Some(d) = duration_ms {
                p.duration_ms = *d;
            }
            if *sweep {
                p.mode = StabilityMode::Sweep;
            }
        }
        Command::Ml { task } => {
            if let Some(t) = task {
                cfg.ml.as_mut().expect("resolved").task = match t {
                    Task::Fault => MlTask::Fault,
                    Task::Lightning => MlTask::Lightning,
                    Task::Stability => MlTask::Stability,
                    Task::All => MlTask::All,
                };
            }
        }
        Command::Run | Command::Phasor { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn phasor(network: &Path, out: Option<&Path>) -> ExitCode {
    let text = match std::fs::read_to_string(network) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", network.display());
            return ExitCode::from(2);
        }
    };
    let net = match parse_network(&text) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {}: {e}", network.display());
            return ExitCode::from(2);
        }
    };
    let sol = match solve_steady_state(&net) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = match out {
        Some(path) => std::fs::File::create(path)
            .map_err(|e| e.to_string())
            .and_then(|f| write_solution_csv(&net, &sol, f).map_err(|e| e.to_string())),
        None => write_solution_csv(&net, &sol, std::io::stdout()).map_err(|e| e.to_string()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Phasor { network } = &cli.command {
        return phasor(network, cli.global.out.as_deref());
    }
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match studies::run(&cfg) {
        Ok(m) => {
            println!("{} finished in {:.1} s", m.study, m.wall_clock_s);
            for f in &m.outputs {
                println!("  {} ({} bytes)", cfg.out.join(&f.name).display(), f.bytes);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &StudyError) -> u8 {
    e.exit_code() as u8
}
