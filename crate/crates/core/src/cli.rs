//! Command-line harness: `recovery-lab <command> --config FILE [--out DIR]`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::{Error, Result};
use crate::experiments::{
    load_config, render_svg, run_bound, run_ce_continuity, run_consistency, run_dense_uniqueness_check, run_fit,
    run_gen, run_nonidentification_demo, run_recovery, run_separation, run_theorem2_demo, run_vc, BoundConfig,
    ConsistencyConfig, ConvergenceConfig, FitConfig, GenConfig, NonidConfig, RecoveryConfig, RunReport,
    SeparationConfig, UniquenessConfig, VcConfig,
};
use crate::noisy_choice::{read_dataset, write_dataset};

/// Overrides `--threads` when set.
pub const THREADS_ENV: &str = "RECOVERY_LAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "recovery-lab", version, about = "Utility recovery experiments from choice data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON config file
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Override the replicate count
    #[arg(long)]
    replicates: Option<usize>,
    /// Worker threads (RECOVERY_LAB_THREADS takes precedence)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a noisy choice dataset
    Gen(Common),
    /// ERM fit on a dataset file
    Fit(Common),
    /// Consistency sweep over sample sizes
    Consistency(Common),
    /// Recovery from finite experiments
    Recovery(Common),
    /// Representation convergence along preference sequences
    Theorem2(Common),
    /// Certainty-equivalent continuity
    CeContinuity(Common),
    /// Non-identification of unnormalised representations
    Nonid(Common),
    /// Separation gaps between family members
    Separation(Common),
    /// VC lower bound by shattering search
    Vc(Common),
    /// Separation of grid members on the dense act universe
    Uniqueness(Common),
    /// Evaluate the sample-complexity bound
    Bound(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Fit(_) => "fit",
            Command::Consistency(_) => "consistency",
            Command::Recovery(_) => "recovery",
            Command::Theorem2(_) => "theorem2",
            Command::CeContinuity(_) => "ce-continuity",
            Command::Nonid(_) => "nonid",
            Command::Separation(_) => "separation",
            Command::Vc(_) => "vc",
            Command::Uniqueness(_) => "uniqueness",
            Command::Bound(_) => "bound",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Gen(c)
            | Command::Fit(c)
            | Command::Consistency(c)
            | Command::Recovery(c)
            | Command::Theorem2(c)
            | Command::CeContinuity(c)
            | Command::Nonid(c)
            | Command::Separation(c)
            | Command::Vc(c)
            | Command::Uniqueness(c)
            | Command::Bound(c) => c,
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Parse { .. } => EXIT_CONFIG,
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_FAILURE,
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(flag),
    }
}

fn ignored(flag: &str, command: &str) {
    eprintln!("warning: --{flag} has no effect on `{command}`");
}

fn run_command(cmd: &Command) -> Result<(RunReport, Vec<(String, String)>)> {
    let c = cmd.common();
    let name = cmd.name();
    let mut extra = Vec::new();
    let report = match cmd {
        Command::Gen(_) => {
            let mut cfg: GenConfig = load_config(&c.config)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if c.replicates.is_some() {
                ignored("replicates", name);
            }
            let (report, ds) = run_gen(&cfg)?;
            fs::create_dir_all(&c.out)?;
            write_dataset(&ds, &c.out.join("dataset.jsonl"))?;
            report
        }
        Command::Fit(_) => {
            let cfg: FitConfig = load_config(&c.config)?;
            if c.seed.is_some() {
                ignored("seed", name);
            }
            let base = c.config.parent().unwrap_or(Path::new("."));
            let path = if cfg.dataset.is_absolute() { cfg.dataset.clone() } else { base.join(&cfg.dataset) };
            let ds = read_dataset(&path).map_err(|e| match e {
                Error::Io(io) => Error::Config(format!("cannot read dataset {}: {io}", path.display())),
                other => other,
            })?;
            run_fit(&cfg, &ds)?
        }
        Command::Consistency(_) => {
            let mut cfg: ConsistencyConfig = load_config(&c.config)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if let Some(r) = c.replicates {
                cfg.replicates = r;
            }
            run_consistency(&cfg)?
        }
        Command::Recovery(_) => {
            let mut cfg: RecoveryConfig = load_config(&c.config)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if let Some(r) = c.replicates {
                cfg.replicates = r;
            }
            run_recovery(&cfg)?
        }
        Command::Theorem2(_) | Command::CeContinuity(_) => {
            let cfg: ConvergenceConfig = load_config(&c.config)?;
            if c.seed.is_some() {
                ignored("seed", name);
            }
            if matches!(cmd, Command::Theorem2(_)) {
                run_theorem2_demo(&cfg)?
            } else {
                run_ce_continuity(&cfg)?
            }
        }
        Command::Nonid(_) => {
            let mut cfg: NonidConfig = load_config(&c.config)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            run_nonidentification_demo(&cfg)?
        }
        Command::Separation(_) => {
            let mut cfg: SeparationConfig = load_config(&c.config)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let report = run_separation(&cfg)?;
            extra.push(("scatter.csv".to_string(), report.table.to_csv()));
            report
        }
        Command::Vc(_) => {
            let mut cfg: VcConfig = load_config(&c.config)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            run_vc(&cfg)?
        }
        Command::Uniqueness(_) => {
            let cfg: UniquenessConfig = load_config(&c.config)?;
            if c.seed.is_some() {
                ignored("seed", name);
            }
            run_dense_uniqueness_check(&cfg)?
        }
        Command::Bound(_) => {
            let cfg: BoundConfig = load_config(&c.config)?;
            if c.seed.is_some() {
                ignored("seed", name);
            }
            run_bound(&cfg)?
        }
    };
    Ok((report, extra))
}

fn execute(cmd: &Command) -> Result<()> {
    let c = cmd.common();
    let threads = thread_count(c.threads)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    let start = Instant::now();
    let (report, extra) = pool.install(|| run_command(cmd))?;
    let elapsed = start.elapsed().as_secs_f64();

    let name = cmd.name();
    fs::create_dir_all(&c.out)?;
    fs::write(c.out.join("report.json"), report.to_json()?)?;
    fs::write(c.out.join(format!("{name}.csv")), report.table.to_csv())?;
    fs::write(c.out.join(format!("{name}.svg")), render_svg(&report))?;
    for (file, body) in extra {
        fs::write(c.out.join(file), body)?;
    }
    let timing = json!({"command": name, "wall_seconds": elapsed, "threads": pool.current_num_threads()});
    fs::write(c.out.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
    for flag in &report.flags {
        eprintln!("flag: {flag}");
    }
    println!("{name}: wrote {}", c.out.display());
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
