use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use leadopt::evaluate::PropertySpec;
use leadopt::fingerprint::{FingerprintParams, Similarity};
use leadopt::metrics::{success_rate_without_similarity, MetricReport};
use leadopt::orchestrate::{ExternalPlanner, Mode, PlannerBinding, RunConfig};
use leadopt::pipeline::{self, PropertyRegistry, ResultLine};
use leadopt::tools::default_tools;
use leadopt::transport::Endpoint;

#[derive(Parser)]
#[command(name = "leadopt", version, about = "Multi-tool lead optimization campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one campaign per dataset row and stream results.
    Run(RunArgs),
    /// Build a trajectory buffer from parallel-mode runs on a training set.
    BuildBuffer(BuildArgs),
    /// Metric table and per-step series from a results file.
    Report(ReportArgs),
    /// Check a dataset file and print per-row diagnostics.
    ValidateDataset(ValidateArgs),
    /// Write seeded synthetic train/test datasets.
    SynthDataset(SynthArgs),
}

#[derive(Args)]
struct Common {
    /// Dataset file (JSON lines: smiles, property, optional reference).
    #[arg(long)]
    dataset: PathBuf,
    /// Only run rows for this property.
    #[arg(long)]
    property: Option<String>,
    #[arg(long, default_value_t = 3)]
    steps: usize,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON array of tool entries; defaults to the four builtin tools.
    #[arg(long)]
    tools_config: Option<PathBuf>,
    /// JSON array of external evaluator entries.
    #[arg(long)]
    evaluators_config: Option<PathBuf>,
    /// External planner endpoint (tcp:HOST:PORT or exec:COMMAND ARGS).
    #[arg(long)]
    planner: Option<String>,
    /// Disable the single retry with failure feedback.
    #[arg(long)]
    no_retry: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "online")]
    mode: Mode,
    /// Buffer file (required in retrieve mode).
    #[arg(long)]
    buffer: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    common: Common,
    /// Buffer file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Results file from `run`.
    results: PathBuf,
    /// Directory for per-property series CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also report SR without the similarity gate.
    #[arg(long)]
    no_sim_gate: bool,
    #[arg(long)]
    evaluators_config: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    property: Option<String>,
    #[arg(long)]
    evaluators_config: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    train: usize,
    #[arg(long, default_value_t = 100)]
    test: usize,
    #[arg(long, default_value = "plogp")]
    property: String,
    /// Directory receiving train.jsonl and test.jsonl.
    #[arg(long)]
    out: PathBuf,
}

fn registry(evaluators: Option<&Path>) -> Result<PropertyRegistry> {
    let mut reg = PropertyRegistry::builtin();
    if let Some(p) = evaluators {
        pipeline::load_evaluators(p, &mut reg)?;
    }
    Ok(reg)
}

fn base_config(c: &Common, mode: Mode, reg: &PropertyRegistry) -> Result<RunConfig> {
    let tools = match &c.tools_config {
        Some(p) => pipeline::load_tools(p)?,
        None => default_tools(),
    };
    // Placeholder property; each row's property replaces it.
    let property = match &c.property {
        Some(id) => reg.get(id).cloned().with_context(|| format!("unknown property {id:?}"))?,
        None => PropertySpec::builtin("plogp").expect("builtin"),
    };
    let mut config = RunConfig::new(mode, tools, property);
    config.steps = c.steps;
    config.tau = Similarity::new(c.tau).with_context(|| format!("tau {} outside [0, 1]", c.tau))?;
    config.seed = c.seed;
    config.retry = !c.no_retry;
    if let Some(p) = &c.planner {
        let endpoint: Endpoint = p.parse().map_err(anyhow::Error::msg)?;
        let transport = endpoint.connect()?;
        config.planner = PlannerBinding::External(ExternalPlanner { endpoint, transport });
    }
    Ok(config)
}

fn run(args: RunArgs) -> Result<()> {
    let c = &args.common;
    let reg = registry(c.evaluators_config.as_deref())?;
    let mut config = base_config(c, args.mode, &reg)?;
    if let Some(p) = &args.buffer {
        config.buffer = Some(pipeline::load_buffer(p, FingerprintParams::default())?);
    }
    config.validate()?;
    let data = pipeline::ingest(&c.dataset, &reg, c.property.as_deref())?;
    info!("{} rows, {} skipped", data.rows.len(), data.skipped.len());
    let lines = pipeline::run_to_file(&config, &reg, &data.rows, c.jobs, &args.out)?;
    let failed = lines.iter().filter(|l| matches!(l, ResultLine::Failed(_))).count();
    let succeeded = lines
        .iter()
        .filter(|l| matches!(l, ResultLine::Campaign(r) if r.best_seen.is_some()))
        .count();
    println!(
        "{} campaigns, {} succeeded, {} failed, {} rows skipped -> {}",
        lines.len(),
        succeeded,
        failed,
        data.skipped.len(),
        args.out.display()
    );
    Ok(())
}

fn build_buffer(args: BuildArgs) -> Result<()> {
    let c = &args.common;
    let reg = registry(c.evaluators_config.as_deref())?;
    let config = base_config(c, Mode::Parallel, &reg)?;
    config.validate()?;
    let data = pipeline::ingest(&c.dataset, &reg, c.property.as_deref())?;
    let (buffer, summary) = pipeline::build_buffer(&config, &reg, &data.rows, c.jobs)?;
    buffer.flush(&args.out)?;
    println!(
        "{} campaigns, {} records, {} failed -> {}",
        summary.campaigns,
        summary.records,
        summary.failures,
        args.out.display()
    );
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let lines = pipeline::read_results(&args.results)?;
    let reports = pipeline::report(&lines)?;
    println!("{}", MetricReport::table_header());
    for (prop, rep) in &reports {
        println!("{}", rep.table_row(prop));
    }
    if args.no_sim_gate {
        let reg = registry(args.evaluators_config.as_deref())?;
        for (prop, _) in &reports {
            let spec = reg.get(prop).with_context(|| format!("no evaluator for {prop:?}"))?;
            let results: Vec<_> = lines
                .iter()
                .filter_map(|l| match l {
                    ResultLine::Campaign(r) if &r.property_id == prop => Some((**r).clone()),
                    _ => None,
                })
                .collect();
            println!("{prop}: SR without similarity gate {:.2}", success_rate_without_similarity(&results, spec)?);
        }
    }
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (prop, rep) in &reports {
            let path = dir.join(format!("{prop}_series.csv"));
            fs::write(&path, rep.series_csv()).with_context(|| format!("writing {}", path.display()))?;
            let path = dir.join(format!("{prop}_report.json"));
            fs::write(&path, serde_json_line(rep)?).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

fn serde_json_line(rep: &MetricReport) -> Result<String> {
    Ok(format!("{}\n", serde_json::to_string(rep)?))
}

fn validate_dataset(args: ValidateArgs) -> Result<()> {
    let reg = registry(args.evaluators_config.as_deref())?;
    let data = pipeline::ingest(&args.dataset, &reg, args.property.as_deref())?;
    for s in &data.skipped {
        println!("line {}: {}", s.line, s.reason);
    }
    println!("{} rows, {} usable, {} skipped", data.total, data.rows.len(), data.skipped.len());
    Ok(())
}

fn synth_dataset(args: SynthArgs) -> Result<()> {
    if PropertySpec::builtin(&args.property).is_err() {
        bail!("synthetic datasets use builtin properties; {:?} is not one", args.property);
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let (train, test) = pipeline::synth_dataset(args.seed, args.train, args.test, &args.property);
    pipeline::write_dataset(&args.out.join("train.jsonl"), &train)?;
    pipeline::write_dataset(&args.out.join("test.jsonl"), &test)?;
    println!("{} train, {} test rows -> {}", train.len(), test.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::BuildBuffer(a) => build_buffer(a),
        Command::Report(a) => report(a),
        Command::ValidateDataset(a) => validate_dataset(a),
        Command::SynthDataset(a) => synth_dataset(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
