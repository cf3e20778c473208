use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cpwave_cli::{execute, CliError, Command, ScenarioConfig};

#[derive(Parser)]
#[command(name = "cpwave", version, about = "Characteristic solver for thin gravitational-wave collisions")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file or a manifest.json from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
    /// Worker threads, 0 = one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve the characteristic problem and write solution tables.
    Solve(Common),
    /// Constraint, Ricci and action checks on a solution.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Directory holding solution tables of a completed run.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Write the boundary data alone.
    Background(Common),
    /// Refinement study with observed orders.
    Convergence(Common),
    /// Jump relations across the strip.
    Jump(Common),
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (common, command) = match cli.command {
        Sub::Solve(c) => (c, Command::Solve),
        Sub::Verify { common, from } => (common, Command::Verify { from }),
        Sub::Background(c) => (c, Command::Background),
        Sub::Convergence(c) => (c, Command::Convergence),
        Sub::Jump(c) => (c, Command::Jump),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build_global()
        .map_err(|e| CliError::Config { path: "--threads".into(), message: e.to_string() })?;
    let cfg = ScenarioConfig::load(&common.config)?;
    let out = common.out.or_else(|| cfg.output.dir.clone()).ok_or_else(|| CliError::Config {
        path: "output.dir".into(),
        message: "no output directory (set output.dir or pass --out)".into(),
    })?;
    let art = execute(&command, &cfg, &out)?;
    if !common.quiet {
        for t in &art.tables {
            println!("wrote {} ({} rows)", art.dir.join(&t.name).display(), t.rows);
        }
        println!("wrote {}", art.dir.join(cpwave_cli::MANIFEST).display());
    }
    if let Some(msg) = &art.stopped {
        eprintln!("cpwave: {msg}");
        return Ok(false);
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("cpwave: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
