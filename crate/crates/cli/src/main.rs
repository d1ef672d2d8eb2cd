//! Command-line driver: graph generation and experiment execution from TOML
//! configs, emitting results CSVs with replayable manifests.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use graphbandits::harness::{ExperimentMode, SpiderWebSpec};
use graphbandits::{generate_graph, run_experiment, ExperimentConfig, GraphKind};

#[derive(Parser)]
#[command(name = "graphbandits", version, about = "Best-node identification on graphs with differential edge observations", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph and emit its edge list
    Generate(GenerateArgs),
    /// Execute full PAC identification runs from a config
    Run(ExperimentArgs),
    /// Compute budgeted error curves from a config
    Curve(ExperimentArgs),
    /// Run contextual stage sequences from a config
    Contextual(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorKind {
    Line,
    RandomTree,
    SpiderWeb,
    ErdosRenyi,
}

#[derive(Args)]
struct GenerateArgs {
    /// Graph family to generate
    #[arg(long, value_enum)]
    kind: GeneratorKind,
    /// Node count (line, random-tree, erdos-renyi)
    #[arg(long)]
    nodes: Option<usize>,
    /// Ring count (spider-web)
    #[arg(long)]
    rings: Option<usize>,
    /// Nodes per ring (spider-web)
    #[arg(long)]
    ring_size: Option<usize>,
    /// Edge probability (erdos-renyi)
    #[arg(long)]
    edge_prob: Option<f64>,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for results.csv and manifest.toml
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's repetition count
    #[arg(long)]
    repetitions: Option<usize>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Run(args) => experiment(args, ExperimentMode::Pac),
        Command::Curve(args) => experiment(args, ExperimentMode::Curve),
        Command::Contextual(args) => experiment(args, ExperimentMode::Contextual),
    }
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let nodes = || args.nodes.context("--nodes is required for this kind");
    let kind = match args.kind {
        GeneratorKind::Line => GraphKind::Line { nodes: nodes()? },
        GeneratorKind::RandomTree => GraphKind::RandomTree {
            nodes: nodes()?,
            seed: args.seed,
        },
        GeneratorKind::SpiderWeb => {
            let rings = args.rings.context("--rings is required for spider-web")?;
            let ring_size = args
                .ring_size
                .context("--ring-size is required for spider-web")?;
            GraphKind::SpiderWeb(SpiderWebSpec::new(rings, ring_size)?)
        }
        GeneratorKind::ErdosRenyi => GraphKind::ErdosRenyiConnected {
            nodes: nodes()?,
            edge_prob: args
                .edge_prob
                .context("--edge-prob is required for erdos-renyi")?,
            seed: args.seed,
        },
    };
    let graph = generate_graph(&kind)?;
    match args.out {
        Some(path) => graph
            .write_edge_list_file(&path)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", graph.to_edge_list_string()),
    }
    Ok(())
}

fn experiment(args: ExperimentArgs, mode: ExperimentMode) -> anyhow::Result<()> {
    let mut config = ExperimentConfig::from_toml_file(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    if config.mode != mode {
        bail!(
            "config mode {:?} does not match this subcommand",
            config.mode
        );
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(repetitions) = args.repetitions {
        config.repetitions = repetitions;
    }
    let artifacts = run_experiment(&config, &args.out)?;
    println!("wrote {}", artifacts.results.display());
    println!("wrote {}", artifacts.manifest.display());
    Ok(())
}
