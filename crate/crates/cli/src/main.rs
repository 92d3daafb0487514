use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levy_em::model::presets;
use levy_em_cli::config::preset_params;
use levy_em_cli::plotdata::emit_plotdata;
use levy_em_cli::{run, validate, CliError, ExperimentConfig, RunOptions, EXIT_ASSERT, EXIT_INVALID};

#[derive(Parser)]
#[command(name = "levy-em", version, about = "Strong-convergence studies for Euler-Maruyama on Levy-driven SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every study in the config and write results plus a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 3 if any study misses its acceptance threshold.
        #[arg(long)]
        assert: bool,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the built-in models and their parameters.
    Presets,
    /// Write plot-ready data files for the rate studies of a run.
    EmitPlotdata {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            threads,
            out,
            assert,
        } => {
            let (cfg, text) = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(d) => return fail(CliError::Invalid(d)),
            };
            let opts = RunOptions {
                seed,
                threads,
                out_dir: out,
            };
            match run(&cfg, &text, &opts) {
                Ok(outcome) => {
                    for line in &outcome.report {
                        println!("{line}");
                    }
                    println!("manifest: {}", outcome.out_dir.join(levy_em_cli::run::MANIFEST_FILE).display());
                    if assert && !outcome.failures.is_empty() {
                        eprintln!("acceptance failed: {}", outcome.failures.join(", "));
                        return ExitCode::from(EXIT_ASSERT as u8);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Validate { config } => {
            let diags = match ExperimentConfig::load(&config) {
                Ok((cfg, _)) => validate(&cfg),
                Err(d) => d,
            };
            if diags.is_empty() {
                println!("ok");
                return ExitCode::SUCCESS;
            }
            for d in &diags {
                eprintln!("{d}");
            }
            ExitCode::from(EXIT_INVALID as u8)
        }
        Command::Presets => {
            for name in presets::NAMES {
                let coeffs = presets::by_name(name).expect("listed preset");
                let params = preset_params(name)
                    .unwrap_or(&[])
                    .iter()
                    .map(|(k, v)| format!("{k} = {v}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                println!("{name}");
                println!("  mu = {:?}", coeffs.mu);
                println!("  sigma = {:?}", coeffs.sigma);
                println!("  gamma = {:?}", coeffs.gamma);
                println!("  c = {}, b = {}, L = {}", coeffs.c, coeffs.b, coeffs.big_l);
                if !params.is_empty() {
                    println!("  params: {params}");
                }
            }
            ExitCode::SUCCESS
        }
        Command::EmitPlotdata { manifest, out } => match emit_plotdata(&manifest, out.as_deref()) {
            Ok(files) => {
                for f in files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
