//! `perspace` command-line interface.
//!
//! Exit status: 0 on success, 1 on bad input (unreadable or invalid files,
//! unknown flags), 2 on internal failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use perspace::discrepancy::mean_response_matrices;
use perspace::experiments::{run_regime, RegimeConfig};
use perspace::synth::{SynthConfig, SyntheticCollection};
use perspace::{io, DissimilarityMatrix, ErrorMetric, SolverSettings};

#[derive(Parser, Debug)]
#[command(name = "perspace", version, about = "Raw-stress perspective spaces for model collections")]
struct Cli {
    /// Override every seed in configs and solver settings.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InputFormat {
    /// `.jsonl` means embeddings, anything else a dissimilarity CSV.
    Auto,
    Dissimilarity,
    Embeddings,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Embed a dissimilarity CSV or an embeddings JSONL file; writes a configuration CSV.
    Mds {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
        format: InputFormat,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        rel_tol: Option<f64>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Embeddings JSONL to a discrepancy matrix CSV.
    Discrepancy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write a synthetic collection as embeddings JSONL from a JSON config.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Also write the exact limiting dissimilarity matrix as CSV.
        #[arg(long)]
        limit: Option<PathBuf>,
    },
    /// Run a bootstrap experiment from a JSON regime config; writes a results CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Procrustes-align one configuration CSV onto another; prints a JSON report.
    Align {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        no_translation: bool,
    },
}

enum Failure {
    Input(String),
    Internal(String),
}

impl From<perspace::Error> for Failure {
    fn from(e: perspace::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

fn read_target(path: &Path, format: InputFormat) -> Result<DissimilarityMatrix, Failure> {
    let embeddings = match format {
        InputFormat::Embeddings => true,
        InputFormat::Dissimilarity => false,
        InputFormat::Auto => path.extension().is_some_and(|e| e == "jsonl"),
    };
    if embeddings {
        let table = io::read_embeddings(path)?;
        Ok(perspace::discrepancy_matrix(&mean_response_matrices(&table)?)?)
    } else {
        Ok(io::read_dissimilarity(path)?)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Mds { input, output, format, dim, max_iters, rel_tol, restarts } => {
            let target = read_target(&input, format)?;
            let mut settings = SolverSettings::new(dim).with_seed(cli.seed.unwrap_or(0));
            if let Some(v) = max_iters {
                settings.max_iters = v;
            }
            if let Some(v) = rel_tol {
                settings.rel_tol = v;
            }
            if let Some(v) = restarts {
                settings.restarts = v;
            }
            settings.validate()?;
            let cfg = perspace::mds(&target, &settings)?;
            io::write_configuration(&cfg, &output)?;
            let meta = cfg.meta();
            println!(
                "{}",
                json!({
                    "n": cfg.n(),
                    "dim": cfg.dim(),
                    "stress": cfg.stress(),
                    "iterations": meta.iterations,
                    "converged": meta.converged,
                    "start": meta.start,
                    "restarts": meta.restarts,
                    "seed": meta.seed,
                })
            );
        }
        Command::Discrepancy { input, output } => {
            let table = io::read_embeddings(&input)?;
            let d = perspace::discrepancy_matrix(&mean_response_matrices(&table)?)?;
            io::write_dissimilarity(&d, &output)?;
        }
        Command::Synth { config, output, limit } => {
            let mut cfg: SynthConfig = io::load_json(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
                cfg.latent.seed = seed;
            }
            let coll = SyntheticCollection::generate(&cfg)?;
            io::write_embeddings(&coll.sample_collection(), &output)?;
            if let Some(path) = limit {
                io::write_dissimilarity(&coll.exact_limit_matrix(), path)?;
            }
        }
        Command::Experiment { config, output } => {
            let mut cfg: RegimeConfig = io::load_json(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let outcome = run_regime(&cfg)?;
            io::write_results(&outcome.results, &output)?;
            for f in &outcome.failures {
                eprintln!("trial n={} m={} r={} b={} failed: {}", f.n, f.m, f.r, f.bootstrap, f.message);
            }
            println!("{}", json!({ "rows": outcome.results.len(), "failures": outcome.failures.len() }));
        }
        Command::Align { source, target, no_translation } => {
            let src = io::read_configuration(&source)?;
            let tgt = io::read_configuration(&target)?;
            let with_translation = !no_translation;
            let a = perspace::procrustes(&src, &tgt, with_translation)?;
            let rotation: Vec<Vec<f64>> =
                a.rotation.row_iter().map(|r| r.iter().copied().collect()).collect();
            let avg = perspace::alignment::aligned_error_with(&src, &tgt, ErrorMetric::AvgL2, with_translation)?;
            let tti =
                perspace::alignment::aligned_error_with(&src, &tgt, ErrorMetric::TwoToInfinity, with_translation)?;
            println!(
                "{}",
                json!({
                    "rotation": rotation,
                    "translation": a.translation.iter().collect::<Vec<_>>(),
                    "determinant": a.determinant(),
                    "residual": a.residual,
                    "avg_l2": avg,
                    "two_to_infinity": tti,
                })
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Input(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Internal(msg))) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(2),
    }
}
