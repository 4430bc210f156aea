use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing::error;

use densaug::config::RunConfig;
use densaug::eval::format_ablation_table;
use densaug::organize::{Language, Strategy};
use densaug::pipeline::{Pipeline, DEFAULT_NOISE_LEVELS};
use densaug::theory::{sweep_single_source, sweep_union};
use densaug::{Error, Result};

#[derive(Parser)]
#[command(name = "densaug", version, about = "Augment a retrieval corpus with generated QA pairs and events, then evaluate dense retrieval")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Flags override the config file, which overrides built-in defaults.
#[derive(Args)]
struct Global {
    /// TOML run configuration.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    queries: Option<PathBuf>,
    #[arg(long, global = true)]
    qrels: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Regeneration threshold; -1 disables regeneration.
    #[arg(long, global = true, allow_negative_numbers = true)]
    tau: Option<i32>,
    #[arg(long, global = true)]
    strategy: Option<Strategy>,
    #[arg(long, global = true)]
    language: Option<Language>,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Use index artifacts even if they came from a different configuration.
    #[arg(long, global = true)]
    force: bool,
    /// More log output on stderr (-v debug, -vv trace).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and copy corpus, queries and qrels into the output directory.
    Ingest,
    /// Generate, score and regenerate QA pairs and events.
    Augment {
        /// Take generation records from this JSONL file instead of a model.
        #[arg(long)]
        import: Option<PathBuf>,
    },
    /// Embed documents, generated texts and queries.
    Embed,
    /// Build the vector index from the embeddings.
    Index,
    /// Write the top documents per query to run.jsonl.
    Retrieve,
    /// Score the configured scenario; writes report.json.
    Eval,
    /// Score all seven component subsets.
    Ablate,
    /// Run ingest, augment, embed, index and eval in order.
    Run,
    /// Monte-Carlo check of the normalized-margin inequalities.
    VerifyTheory {
        #[arg(long, default_value_t = 10_000)]
        instances: usize,
        #[arg(long = "theory-seed", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        max_dim: usize,
    },
    #[command(subcommand)]
    Analyze(Analyze),
}

#[derive(Subcommand)]
enum Analyze {
    /// Diversity of the generated QA and event texts.
    Diversity,
    /// Noise retention after augmenting noise-injected documents.
    Noise {
        /// Noise levels as fractions of the text length.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_NOISE_LEVELS)]
        levels: Vec<f64>,
    },
    /// Mean number of units per document.
    Counts,
}

fn build_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &g.output_dir {
        cfg.paths.output_dir = p.clone();
    }
    if let Some(p) = &g.corpus {
        cfg.paths.corpus = Some(p.clone());
    }
    if let Some(p) = &g.queries {
        cfg.paths.queries = Some(p.clone());
    }
    if let Some(p) = &g.qrels {
        cfg.paths.qrels = Some(p.clone());
    }
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = g.tau {
        cfg.tau = v;
    }
    if let Some(v) = g.strategy {
        cfg.strategy = v;
    }
    if let Some(v) = g.language {
        cfg.language = v;
    }
    if let Some(v) = g.parallelism {
        cfg.parallelism = v;
    }
    if let Some(v) = &g.k {
        cfg.k_values = v.clone();
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Command::VerifyTheory { instances, seed, max_dim } = cli.command {
        let t1 = sweep_single_source(instances, seed, max_dim)?;
        let t2 = sweep_union(instances, seed, max_dim)?;
        print_json(&serde_json::json!({"single_source": t1, "qa_event_union": t2}))?;
        if t1.violations + t2.violations > 0 {
            return Err(Error::Validation(format!(
                "{} margin violations found",
                t1.violations + t2.violations
            )));
        }
        return Ok(());
    }

    let cfg = build_config(&cli.global)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism.max(1))
        .build_global()
        .ok();
    let p = Pipeline::new(cfg)?.force(cli.global.force);
    match cli.command {
        Command::Ingest => {
            p.ingest()?;
        }
        Command::Augment { import } => {
            match import {
                Some(path) => p.import_generations(&path)?,
                None => p.augment()?,
            };
        }
        Command::Embed => p.embed()?,
        Command::Index => {
            p.index()?;
        }
        Command::Retrieve => {
            p.retrieve()?;
        }
        Command::Eval => print_json(&p.eval()?.aggregates)?,
        Command::Run => print_json(&p.run_all()?.aggregates)?,
        Command::Ablate => print!("{}", format_ablation_table(&p.ablate()?)),
        Command::Analyze(Analyze::Counts) => print_json(&p.analyze_counts()?)?,
        Command::Analyze(Analyze::Diversity) => {
            for (kind, n, s) in p.analyze_diversity()? {
                println!("{kind}: {n} texts {}", serde_json::to_string(&s)?);
            }
        }
        Command::Analyze(Analyze::Noise { levels }) => {
            for r in p.analyze_noise(&levels)? {
                println!("{}", serde_json::to_string(&r)?);
            }
        }
        Command::VerifyTheory { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match (cli.global.quiet, cli.global.verbose) {
        (true, _) => tracing::Level::WARN,
        (false, 0) => tracing::Level::INFO,
        (false, 1) => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .with_target(false)
        .with_ansi(std::io::stderr().is_terminal())
        .init();

    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}
