use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use biholder::cli::{load_config, preset, run, summary_lines, PresetOptions, RunConfig};

#[derive(Parser)]
#[command(version, about = "Sampled checks of biHölder maps, quasisymmetry and Besov embeddings")]
struct Cli {
    /// Worker threads (defaults to all cores; results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analyses of a JSON config.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a named preset, save its config and run it.
    Preset {
        name: String,
        #[arg(long, default_value = "reports")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Per-axis resolution of the primary grid (points for Cantor sets).
        #[arg(long)]
        resolution: Option<usize>,
        /// Use every pair instead of sampled budgets.
        #[arg(long)]
        exact: bool,
        /// Only print the config.
        #[arg(long)]
        dry_run: bool,
    },
}

fn execute(config: &RunConfig, base: &Path, out: &Path) -> anyhow::Result<bool> {
    let summary = run(config, base, out)?;
    for line in summary_lines(&summary) {
        println!("{line}");
    }
    Ok(summary.success())
}

fn main_inner(cli: Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
            let out = out.or_else(|| cfg.out_dir.as_ref().map(|d| base.join(d))).unwrap_or_else(|| "reports".into());
            execute(&cfg, &base, &out)
        }
        Command::Preset { name, out, seed, resolution, exact, dry_run } => {
            let cfg = preset(&name, PresetOptions { seed, resolution, exact })?;
            let text = serde_json::to_string_pretty(&cfg)? + "\n";
            if dry_run {
                print!("{text}");
                return Ok(true);
            }
            let dir = out.join(&name);
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            std::fs::write(dir.join("config.json"), text).context("writing config.json")?;
            execute(&cfg, Path::new("."), &dir)
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
