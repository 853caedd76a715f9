mod config;
mod error;
mod experiments;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::CliError;
use crate::experiments::Output;

#[derive(Parser)]
#[command(name = "phasediff", version, about = "Phase-space diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides `stochastic.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    cli_version: &'static str,
    core_version: &'static str,
    field_format_version: u32,
    experiment: &'static str,
    config_file: &'static str,
    config_sha256: String,
    seed: Option<u64>,
    rerun: String,
    files: Vec<FileEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn load(path: &Path) -> Result<Config, CliError> {
    let text = fs::read_to_string(path)?;
    Config::parse(&text)
}

fn run(config: &Path, out: &Path, threads: Option<usize>, seed: Option<u64>) -> Result<(), CliError> {
    let mut cfg = load(config)?;
    if let (Some(s), Some(st)) = (seed, cfg.stochastic.as_mut()) {
        st.seed = s;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| std::io::Error::other(e.to_string()))?;

    let mut output = Output::new(out, cfg.output.plots)?;
    let mut resolved = serde_json::to_string_pretty(&cfg).expect("config serializes");
    resolved.push('\n');
    output.write("config.json", &resolved)?;
    let results = pool.install(|| experiments::run(&cfg, &mut output))?;
    let mut text = serde_json::to_string_pretty(&results).expect("results serialize");
    text.push('\n');
    output.write("results.json", &text)?;

    let files = output
        .files()
        .iter()
        .map(|name| {
            Ok(FileEntry {
                name: name.clone(),
                sha256: sha256_hex(&fs::read(output.dir().join(name))?),
            })
        })
        .collect::<Result<Vec<_>, std::io::Error>>()?;
    let manifest = Manifest {
        tool: "phasediff",
        cli_version: env!("CARGO_PKG_VERSION"),
        core_version: phasediff::VERSION,
        field_format_version: phasediff::io::FORMAT_VERSION,
        experiment: cfg.kind().name(),
        config_file: "config.json",
        config_sha256: sha256_hex(resolved.as_bytes()),
        seed: cfg.stochastic.as_ref().map(|s| s.seed),
        rerun: "phasediff run --config config.json --out <dir>".into(),
        files,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(output.dir().join("manifest.json"), text)?;
    println!("{}", serde_json::to_string_pretty(&results).expect("results serialize"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out, threads, seed } => run(&config, &out, threads, seed),
        Command::Validate { config } => load(&config).map(|cfg| println!("ok: {} experiment", cfg.kind().name())),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
