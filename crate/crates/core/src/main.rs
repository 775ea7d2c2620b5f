//! `screenfb <config> [--stages s1,s2,...] [--out dir] [--threads n]`
//!
//! Exit status: 0 success, 2 configuration error, 3 stage failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use screenfb::config::Config;
use screenfb::pipeline::{run_pipeline, Stage};

#[derive(Debug, Parser)]
#[command(name = "screenfb", version, about = "Monopolist screening solver and free-boundary analysis")]
struct Cli {
    /// TOML run configuration.
    config: PathBuf,
    /// Comma-separated subset of solve,segment,rays,obstacle,classify,flatness,report.
    #[arg(long, value_delimiter = ',')]
    stages: Option<Vec<String>>,
    /// Output directory (overrides the config's `output.dir`).
    #[arg(long, env = "SCREENFB_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("screenfb: config error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match Config::load(&cli.config) {
        Ok((cfg, _)) => cfg,
        Err(e) => return config_error(e),
    };
    let names = cli
        .stages
        .or_else(|| cfg.pipeline.stages.clone())
        .unwrap_or_else(|| Stage::ALL.iter().map(|s| s.name().to_string()).collect());
    let mut stages = Vec::new();
    for n in &names {
        match Stage::parse(n) {
            Some(s) => stages.push(s),
            None => return config_error(format!("unknown stage `{n}`")),
        }
    }
    let out = cli
        .out
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("screenfb-out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return config_error("--threads must be at least 1");
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return config_error(e),
    };
    match pool.install(|| run_pipeline(&cfg, &stages, &out)) {
        Ok(outcome) => {
            eprintln!(
                "screenfb: {} stage(s) complete, {} output(s) in {}",
                outcome.manifest.stages.len(),
                outcome.manifest.outputs.len(),
                out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("screenfb: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
