use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use monoflow_cli::config::ExperimentConfig;
use monoflow_cli::{presets, report, runner};

#[derive(Parser)]
#[command(name = "monoflow", version, about = "Spectral flow and index experiments for lattice monopoles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its report and trajectories.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and check a configuration without running it.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// List bundled presets, or print one.
    ListPresets {
        name: Option<String>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
}

fn load(src: &Source) -> monoflow::Result<ExperimentConfig> {
    match (&src.config, &src.preset) {
        (Some(p), _) => ExperimentConfig::load(p),
        (None, Some(name)) => presets::load(name),
        (None, None) => unreachable!("clap requires one source"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListPresets { name: None } => {
            for n in presets::names() {
                println!("{n}");
            }
            ExitCode::SUCCESS
        }
        Command::ListPresets { name: Some(n) } => match presets::source(&n) {
            Some(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: unknown preset {n:?}");
                ExitCode::from(2)
            }
        },
        Command::Validate { source } => match load(&source) {
            Ok(cfg) => {
                println!("{}: ok (config {})", cfg.name, &cfg.hash()[..12]);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run { source, out, threads, seed } => {
            let mut cfg = match load(&source) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
                    eprintln!("warning: {e}");
                }
            }
            let rep = match runner::run(&cfg) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            for line in rep.lines() {
                println!("{line}");
            }
            let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
            match report::emit_trajectories(&rep, &dir) {
                Ok(files) => {
                    for f in files {
                        println!("wrote {}", f.display());
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            if rep.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
