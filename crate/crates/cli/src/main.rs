use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fbnav::harness::{self, EnvSpec, RunConfig};

#[derive(Parser)]
#[command(
    name = "fbnav",
    version,
    about = "Feedback-driven adaptation experiments for graph navigation agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the base agent on the Basic-style corpus.
    Pretrain(Common),
    /// Run Stage-1 episodes and collect feedback.
    Deploy(Common),
    /// Adapt the pretrained agent and evaluate it.
    Adapt(Common),
    /// Instruction-count by feedback-count grid of single-step adaptations.
    Ablate(Common),
    /// Summarize the metric CSVs of a run directory.
    Report {
        /// Run directory (defaults to --out).
        dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config or run manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Deployment environment file.
    #[arg(long)]
    env: Option<PathBuf>,
    /// Style id (`basic` or one of the configured user styles).
    #[arg(long)]
    style: Option<String>,
    /// continual, hybrid, entropy or none.
    #[arg(long)]
    mode: Option<String>,
    /// Memory bank file to load before Stage 1.
    #[arg(long)]
    warm_start: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(env) = &self.env {
            cfg.env = EnvSpec::Path(env.clone());
        }
        if let Some(bank) = &self.warm_start {
            cfg.warm_start = Some(bank.clone());
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(mode) = &self.mode {
            cfg.adapt.mode = mode.parse()?;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<Vec<String>> {
    let outputs = match cli.command {
        Command::Pretrain(c) => harness::cmd_pretrain(&c.config()?)?,
        Command::Deploy(c) => harness::cmd_deploy(&c.config()?, c.style.as_deref())?,
        Command::Adapt(c) => harness::cmd_adapt(&c.config()?, None)?,
        Command::Ablate(c) => harness::cmd_ablate(&c.config()?, c.style.as_deref())?,
        Command::Report { dir, out } => {
            let dir = dir.or(out).unwrap_or_else(|| RunConfig::default().out);
            harness::cmd_report(&dir)?
        }
    };
    Ok(outputs)
}

fn error_line(err: &anyhow::Error) -> String {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<fbnav::Error>())
        .map_or("error", |e| e.kind());
    let mut message = String::new();
    for part in err.chain().map(|e| e.to_string()) {
        if message.contains(&part) {
            continue;
        }
        if !message.is_empty() {
            message.push_str(": ");
        }
        message.push_str(&part);
    }
    serde_json::json!({ "status": "error", "kind": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => {
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let message = err.to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!(
                "{}",
                serde_json::json!({ "status": "error", "kind": "usage", "message": first })
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(outputs) => {
            for name in outputs {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", error_line(&err));
            ExitCode::FAILURE
        }
    }
}
