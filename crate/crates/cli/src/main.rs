//! `eqs` — train a fidelity-kernel classifier and convert it into an
//! explicit quantum surrogate.
//!
//! Exit codes: 0 success, 2 configuration error, 3 synthesis missed its
//! fidelity targets within the gate budget, 1 anything else.

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use stages::{StageError, Workspace};

#[derive(Parser)]
#[command(name = "eqs", version, about = "Explicit quantum surrogates for fidelity-kernel classifiers")]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker-thread cap (overrides the configuration).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the synthetic clustered dataset and write it as a directory.
    Generate,
    /// Train the one-vs-rest kernel SVM and report accuracies.
    Train,
    /// Diagonalize the trained observables and export spectra plus the
    /// exact low-rank accuracy table.
    Spectral,
    /// Synthesize surrogate circuits from the spectral bundle.
    Synthesize,
    /// Compare gradient magnitudes at surrogate vs random initialization.
    Gradients,
    /// Fine-tune the parameterized surrogate with Adam.
    Finetune,
    /// Run every stage and consolidate the reports.
    Pipeline,
}

fn load_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.out_dir = out.to_string_lossy().into_owned();
    }
    if let Some(threads) = cli.threads {
        config.threads = Some(threads);
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: configuration error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Some(threads) = config.threads {
        // Ignore failure: the global pool may already exist under test.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }

    let workspace = match Workspace::new(config) {
        Ok(w) => w,
        Err(e) => return fail(e),
    };
    let result = match cli.command {
        Command::Generate => workspace.cmd_generate(),
        Command::Train => workspace.cmd_train(),
        Command::Spectral => workspace.cmd_spectral(),
        Command::Synthesize => workspace.cmd_synthesize(),
        Command::Gradients => workspace.cmd_gradients(),
        Command::Finetune => workspace.cmd_finetune(),
        Command::Pipeline => workspace.cmd_pipeline(),
    };
    match result {
        Ok(report) => {
            if let Some(obj) = report.as_object() {
                let mut keys: Vec<&String> = obj.keys().collect();
                keys.sort();
                println!(
                    "ok: wrote {} (fields: {})",
                    workspace.out_dir.display(),
                    keys.iter()
                        .map(|k| k.as_str())
                        .filter(|k| *k != "config")
                        .collect::<Vec<_>>()
                        .join(", ")
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn fail(e: StageError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        StageError::Config(_) => ExitCode::from(2),
        StageError::NotConverged(_) => ExitCode::from(3),
        StageError::Other(_) => ExitCode::from(1),
    }
}
