use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use minmax_core::{ConstraintSet, Norm};
use minmax_harness::config::ProjectConfig;
use minmax_harness::experiment::{fmt_value, project_from_config};
use minmax_harness::{run_experiment, ExperimentConfig, Task};

#[derive(Parser)]
#[command(name = "minmax", about = "Min-max attacks, adversarial training and projections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attack several models with one perturbation per image.
    AttackEnsemble(RunArgs),
    /// One perturbation shared by each group of images.
    AttackUniversal(RunArgs),
    /// One perturbation per image that survives a set of transforms.
    AttackTransform(RunArgs),
    /// Adversarial training against several perturbation types.
    TrainAt(RunArgs),
    /// Plain SGD training.
    TrainNatural(RunArgs),
    /// Project a vector onto an lp ball intersected with a box.
    Project(ProjectArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long, conflicts_with_all = ["norm", "eps", "vector", "lower", "upper"])]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    norm: Option<String>,
    #[arg(long, required_unless_present = "config", allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long, required_unless_present = "config", allow_hyphen_values = true)]
    vector: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<String>,
}

/// Numbers separated by commas and/or whitespace.
fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("'{t}' is not a number")))
        .collect()
}

fn load(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn run_task(task: Task, args: &RunArgs) -> anyhow::Result<()> {
    let cfg = load(args)?;
    let out = run_experiment(&cfg, task)?;
    for m in out.metrics.iter().filter(|m| m.iter.is_none()) {
        println!("{} = {}", m.name, fmt_value(m.value));
    }
    eprintln!("results written to {}", cfg.out.display());
    Ok(())
}

fn run_project(args: &ProjectArgs) -> anyhow::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let vector = parse_list(args.vector.as_deref().unwrap_or_default())?;
            let d = vector.len();
            let bound = |s: &Option<String>, fill: f64| -> anyhow::Result<Vec<f64>> {
                match s {
                    Some(s) => parse_list(s),
                    None => Ok(vec![fill; d]),
                }
            };
            let project = ProjectConfig {
                norm: args.norm.clone().unwrap_or_default(),
                eps: args.eps.unwrap_or_default(),
                lower: bound(&args.lower, f64::NEG_INFINITY)?,
                upper: bound(&args.upper, f64::INFINITY)?,
                vector,
            };
            let mut cfg = ExperimentConfig::from_toml("")?;
            cfg.project = Some(project);
            cfg
        }
    };
    match &args.out {
        Some(out) => {
            cfg.out = out.clone();
            run_experiment(&cfg, Task::Project)?;
        }
        None => cfg.validate(Task::Project)?,
    }
    let p = cfg.project.as_ref().expect("validated");
    let norm: Norm = p.norm.parse()?;
    let x = project_from_config(&cfg)?;
    let set = ConstraintSet::new(norm, p.eps, p.lower.clone(), p.upper.clone())?;
    if !set.contains(&x, 1e-9) {
        bail!("projection left the feasible set");
    }
    println!("{}", x.iter().map(|&v| fmt_value(v)).collect::<Vec<_>>().join(" "));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::AttackEnsemble(a) => run_task(Task::AttackEnsemble, a),
        Command::AttackUniversal(a) => run_task(Task::AttackUniversal, a),
        Command::AttackTransform(a) => run_task(Task::AttackTransform, a),
        Command::TrainAt(a) => run_task(Task::TrainAt, a),
        Command::TrainNatural(a) => run_task(Task::TrainNatural, a),
        Command::Project(a) => run_project(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
