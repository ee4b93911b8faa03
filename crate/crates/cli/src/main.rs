//! `hpcai500`: score, rank and analyze HPC AI benchmark runs.
//!
//! Exit codes: 0 success, 1 domain violation, 2 input or parse error.
//! Machine-readable output goes to stdout, diagnostics to stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use hpcai500_core::characterization::{tsne, CharacterizeOptions, FeatureMode};
use hpcai500_core::repeatability::GroupBy;
use hpcai500_core::report::OutputFormat;
use hpcai500_core::PrecisionMode;

use commands::{Outcome, RunFilter};
use config::{parse_fraction, Config};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (run format 1)");

#[derive(Debug, Parser)]
#[command(name = "hpcai500", version = VERSION, about)]
struct Cli {
    /// TOML file with defaults (seed, threshold, k, perplexity, output_dir)
    /// and extra or replacement benchmark specs.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check runs against their benchmark rules; prints one line per violation.
    Validate { runs: PathBuf },

    /// Score every run and print the reports as JSON.
    Score { runs: PathBuf },

    /// Rank the runs of one benchmark by VFLOPS.
    Rank {
        runs: PathBuf,
        #[arg(long, default_value = "json")]
        format: OutputFormat,
        /// Also list runs that fail validation.
        #[arg(long)]
        include_invalid: bool,
        /// Write here instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },

    /// Run-to-run variation of epochs-to-quality.
    ///
    /// Groups: `config` = benchmark, system, accelerator count, precision,
    /// compression, and seed when recorded; `system` = benchmark and system;
    /// `benchmark` = benchmark only. Groups with a single run are skipped.
    Variation {
        runs: PathBuf,
        #[arg(long, default_value = "config")]
        group_by: GroupBy,
        /// Repeatability cut-off as a fraction (0.02) or percentage (2%).
        #[arg(long, value_parser = parse_fraction)]
        threshold: Option<f64>,
    },

    /// Cluster profiled workloads and embed them in 2-D.
    Cluster {
        profiles: PathBuf,
        #[arg(long, default_value = "arch_dependent")]
        mode: FeatureMode,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        perplexity: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "HPCAI500_OUTPUT_DIR")]
        out_dir: Option<PathBuf>,
    },

    /// Measured scaling curve and/or modeled all-reduce efficiency.
    #[command(group(ArgGroup::new("source").required(true).multiple(true).args(["runs", "model"])))]
    Scaling {
        #[arg(long)]
        runs: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        baseline: u32,
        #[arg(long)]
        benchmark: Option<String>,
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        precision: Option<PrecisionMode>,
        #[arg(long)]
        compression: Option<bool>,
        /// JSON communication model.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
        scales: Vec<u32>,
        #[arg(long, env = "HPCAI500_OUTPUT_DIR")]
        out_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let config = Config::load(cli.config.as_deref())?;
    let out_dir = |flag: Option<PathBuf>| {
        flag.or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    };
    match cli.command {
        Command::Validate { runs } => commands::validate(&runs, &config.registry()?),
        Command::Score { runs } => commands::score(&runs, &config.registry()?),
        Command::Rank {
            runs,
            format,
            include_invalid,
            output,
        } => commands::rank_runs(
            &runs,
            &config.registry()?,
            format,
            include_invalid,
            output.as_deref(),
        ),
        Command::Variation {
            runs,
            group_by,
            threshold,
        } => commands::variation_report(&runs, group_by, threshold.unwrap_or(config.threshold)),
        Command::Cluster {
            profiles,
            mode,
            k,
            perplexity,
            seed,
            out_dir: dir,
        } => {
            let options = CharacterizeOptions {
                mode,
                k: k.unwrap_or(config.k),
                perplexity: perplexity.unwrap_or(config.perplexity),
                seed: seed.unwrap_or(config.seed),
                tsne_iterations: tsne::DEFAULT_ITERATIONS,
            };
            commands::cluster(&profiles, &options, &out_dir(dir))
        }
        Command::Scaling {
            runs,
            baseline,
            benchmark,
            system,
            precision,
            compression,
            model,
            scales,
            out_dir: dir,
        } => {
            let dir = out_dir(dir);
            if let Some(runs) = runs {
                let filter = RunFilter {
                    benchmark,
                    system,
                    precision,
                    compression,
                };
                commands::scaling_from_runs(&runs, baseline, &filter, &dir)?;
            }
            if let Some(model) = model {
                commands::scaling_from_model(&model, &scales, &dir)?;
            }
            Ok(Outcome::Success)
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<hpcai500_core::Error>() {
        Some(e) if !e.is_input_error() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Violations) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn version_mentions_run_format() {
        assert!(VERSION.ends_with(&format!(
            "(run format {})",
            hpcai500_core::ingest::RUN_FORMAT_VERSION
        )));
    }

    #[test]
    fn domain_and_input_errors_map_to_exit_codes() {
        let domain = anyhow::Error::from(hpcai500_core::Error::MissingBaseline(8));
        let input = anyhow::Error::from(hpcai500_core::Error::Parse {
            line: 1,
            message: "x".into(),
        });
        assert_eq!(exit_code_for(&domain), 1);
        assert_eq!(exit_code_for(&input), 2);
        assert_eq!(exit_code_for(&anyhow::anyhow!("io")), 2);
    }
}
