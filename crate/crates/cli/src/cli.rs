//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use driftbench::drift::DetectorKind;
use driftbench::generators::{Family, GeneratorParams};
use driftbench::io::{write_dataset, TraceFormat};
use driftbench::learners::ALGORITHMS;
use serde::Deserialize;

use crate::config::{DriftSpec, ExperimentType, SourceConfig};
use crate::runner::{self, build_source, Overrides, RunOptions};
use crate::summarize::{collect_entries, render_csv, render_text, summarize};
use crate::CliError;

// stdout may be a closed pipe (`| head`); losing output there is fine.
macro_rules! out {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

#[derive(Debug, Parser)]
#[command(name = "driftbench", version, about = "Data-stream learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Config file, or a directory of configs for `run`
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (`run`, `summarize`) or file/directory (`generate`)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Overrides the config seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Experiments run concurrently in suite mode
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// csv or json
    #[arg(long, global = true)]
    pub format: Option<TraceFormat>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic (optionally drifting) stream to CSV
    Generate(GenerateArgs),
    /// Run one experiment config, or every config in a directory
    Run,
    /// Tabulate final accuracy per learner across datasets
    Summarize(SummarizeArgs),
    /// Show algorithms, generators, detectors and experiment types
    List,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub concept: Option<usize>,
    /// Number of instances
    #[arg(long)]
    pub n: Option<u64>,
    /// Concept after the drift
    #[arg(long, requires = "drift_position")]
    pub drift_concept: Option<usize>,
    #[arg(long, requires = "drift_concept")]
    pub drift_position: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub drift_width: u64,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Trace or summary files, or directories of them
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(args) => generate(cli, args),
        Command::Run => run(cli),
        Command::Summarize(args) => summarize_cmd(cli, args),
        Command::List => list(cli),
    }
}

/// `seed` and `[source]` of an experiment file, ignoring everything else.
#[derive(Deserialize)]
struct GenerateFile {
    #[serde(default)]
    seed: u64,
    source: SourceConfig,
}

fn generate(cli: &Cli, args: &GenerateArgs) -> Result<(), CliError> {
    let (mut seed, mut src) = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let f: GenerateFile = toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            (f.seed, f.source)
        }
        None => {
            let family = args.family.ok_or_else(|| CliError::config("generate needs --family or --config"))?;
            (0, SourceConfig::generator(family, 0))
        }
    };
    if src.generator.is_none() {
        return Err(CliError::config("generate needs a generator source"));
    }
    if let Some(f) = args.family {
        src.generator = Some(f);
    }
    if let Some(c) = args.concept {
        src.concept = c;
    }
    if let Some(n) = args.n {
        src.n = Some(n);
    }
    if let (Some(concept), Some(position)) = (args.drift_concept, args.drift_position) {
        src.drift = Some(DriftSpec {
            concept,
            position,
            width: args.drift_width,
        });
    }
    if args.noise.is_some() {
        src.params = GeneratorParams {
            noise: args.noise,
            ..src.params
        };
    }
    if let Some(s) = cli.seed {
        seed = s;
    }
    src.topic = None;
    let mut stream = build_source(&src, seed)?;
    let schema = stream.schema().clone();
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let path = if out.extension().is_some_and(|e| e == "csv") {
        out
    } else {
        fs::create_dir_all(&out)?;
        out.join(format!("{}_s{seed}.csv", src.describe()))
    };
    let rows = std::iter::from_fn(|| stream.next_instance().transpose());
    let written = write_dataset(&path, &schema, rows);
    let n = match written {
        Ok(n) => n,
        Err(e) => {
            let _ = fs::remove_file(&path);
            return Err(e.into());
        }
    };
    let schema_json = serde_json::to_string_pretty(&schema).map_err(driftbench::Error::from)?;
    out!("{schema_json}");
    eprintln!("wrote {n} instances to {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("run needs --config"))?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let ov = Overrides {
        seed: cli.seed,
        format: cli.format,
    };
    if config.is_dir() {
        let paths = runner::suite_configs(config)?;
        let results = runner::run_suite(&paths, &out, &ov, cli.workers.unwrap_or(1));
        let mut failed = 0;
        let mut code = 0;
        for (path, r) in paths.iter().zip(results) {
            match r {
                Ok(s) => report(&s, &out),
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    failed += 1;
                    code = code.max(e.exit_code());
                }
            }
        }
        let msg = format!("{failed} of {} experiments failed", paths.len());
        return match code {
            0 => Ok(()),
            1 => Err(CliError::Config(msg)),
            _ => Err(CliError::Failed(msg)),
        };
    }
    let summary = runner::load_and_run(config, &out, &ov, &RunOptions::default())?;
    report(&summary, &out);
    Ok(())
}

fn report(s: &runner::RunSummary, out: &Path) {
    out!(
        "{}: final_cum_accuracy={:.4} kappa={:.4} drifts={} -> {}",
        s.name,
        s.metrics.final_cum_accuracy,
        s.metrics.final_kappa,
        s.metrics.drift_count,
        out.join(&s.trace_file).display()
    );
}

fn summarize_cmd(cli: &Cli, args: &SummarizeArgs) -> Result<(), CliError> {
    let groups = summarize(&collect_entries(&args.paths)?);
    let csv = render_csv(&groups)?;
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.csv"), &csv)?;
    }
    let mut stdout = std::io::stdout().lock();
    match cli.format {
        Some(TraceFormat::Csv) => stdout.write_all(csv.as_bytes())?,
        _ => stdout.write_all(render_text(&groups).as_bytes())?,
    }
    Ok(())
}

fn list(cli: &Cli) -> Result<(), CliError> {
    if cli.format == Some(TraceFormat::Json) {
        let doc = serde_json::json!({
            "experiment_types": ExperimentType::ALL.iter().map(|t| t.name()).collect::<Vec<_>>(),
            "algorithms": ALGORITHMS.iter().map(|a| serde_json::json!({
                "name": a.name,
                "kind": a.kind.to_string(),
                "params": a.params.iter().map(|p| serde_json::json!({
                    "name": p.name, "default": p.default, "doc": p.doc,
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "generators": Family::ALL.iter().map(|f| serde_json::json!({
                "name": f.name(), "describe": f.describe(),
            })).collect::<Vec<_>>(),
            "detectors": DetectorKind::ALL.iter().map(|d| serde_json::json!({
                "name": d.name(), "describe": d.describe(),
            })).collect::<Vec<_>>(),
        });
        out!("{}", serde_json::to_string_pretty(&doc).map_err(driftbench::Error::from)?);
        return Ok(());
    }
    out!("experiment types:");
    for t in ExperimentType::ALL {
        out!("  {}", t.name());
    }
    out!("\nalgorithms:");
    for a in ALGORITHMS {
        out!("  {} ({})", a.name, a.kind);
        for p in a.params {
            out!("      {} = {}  {}", p.name, p.default, p.doc);
        }
    }
    out!("\ngenerators:");
    for f in Family::ALL {
        out!("  {:<11} {}", f.name(), f.describe());
    }
    out!("\ndetectors:");
    for d in DetectorKind::ALL {
        out!("  {:<13} {}", d.name(), d.describe());
    }
    Ok(())
}
