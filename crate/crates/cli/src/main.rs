use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use deepres_cli::{commands, load_config, CliError, Context};

const AFTER_HELP: &str = "\
Environment:
  DEEPRES_OUT_DIR  output directory when --out is not given; overrides output.dir

Exit codes:
  0  success
  1  a stage failed at runtime (see FAILED in the output directory)
  2  invalid config, arguments or input files
  3  a verification check ran and failed";

#[derive(Parser, Debug)]
#[command(name = "deepres", version, about = "Depth-scaling experiments on residual networks", after_help = AFTER_HELP)]
struct Cli {
    /// Config file, or one of the presets: quickstart, ode, sde.
    #[arg(long, global = true)]
    config: Option<String>,

    /// Output directory.
    #[arg(long, global = true, env = "DEEPRES_OUT_DIR")]
    out: Option<PathBuf>,

    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Only print result lines.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate data, train the depth sweep, diagnose it, and run the limits
    /// check if enabled.
    Run,
    /// Build a scaling report from saved checkpoints.
    Diagnose {
        /// Glob of checkpoint files, e.g. 'out/checkpoints/*.ckpt'.
        checkpoints: String,
    },
    /// Measure the convergence rate of the recursion to its limit.
    VerifyLimits,
    /// Write the configured dataset.
    GenData,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Input("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Input(format!("--workers: {e}")))?;
    }
    let ctx = Context { quiet: cli.quiet };
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    let manifest = match cli.command {
        Command::Run => commands::run(&cfg, &ctx)?,
        Command::Diagnose { checkpoints } => {
            cfg.validate_diagnostics()?;
            commands::diagnose(&checkpoints, &cfg.diagnostics, &cfg.output_dir, &ctx)?
        }
        Command::VerifyLimits => commands::verify_limits(&cfg, &ctx)?,
        Command::GenData => commands::gen_data(&cfg, &ctx)?,
    };
    ctx.log(&format!(
        "{} artifacts in {}",
        manifest.artifacts.len(),
        cfg.output_dir.display()
    ));
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
