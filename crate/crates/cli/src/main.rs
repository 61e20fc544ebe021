use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ghostsim_core::GhostError;
use ghostsim_core::recon::{Mode, Overrides, parse_config_with, run};

/// Ghost imaging simulator.
#[derive(Debug, Parser)]
#[command(name = "ghostsim", version)]
struct Cli {
    /// pgi, cgi, cgi-photon, pair-mc, verify-eq1, psf; or `rerun` to take the
    /// mode from the config (e.g. a manifest written by an earlier run).
    mode: String,
    /// JSON config file or a run manifest.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<u64>,
    /// Worker threads; defaults to one per core. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn fail(code: i32, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("ghostsim: {message}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mode = match cli.mode.as_str() {
        "rerun" => None,
        name => match Mode::ALL.into_iter().find(|m| m.name() == name) {
            Some(m) => Some(m),
            None => return fail(2, format!("unknown mode `{name}`")),
        },
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(2, "--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(2, e);
        }
    }
    let overrides = Overrides {
        mode,
        seed: cli.seed,
        shots: cli.shots,
        out: cli.out,
    };
    let cfg = match parse_config_with(&cli.config, &overrides) {
        Ok(cfg) => cfg,
        // an unreadable config file is a config error
        Err(GhostError::Io(e)) => return fail(2, format!("{}: {e}", cli.config.display())),
        Err(e) => return fail(e.exit_code(), e),
    };
    match run(&cfg) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for (k, v) in &report.summary {
                println!("{k}: {v}");
            }
            println!("wrote {} files to {}", report.artifacts.len(), report.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.exit_code(), e),
    }
}
