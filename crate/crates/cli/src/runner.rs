//! Executes one experiment or a directory of them.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread::{self, JoinHandle};
use std::time::Instant;

use driftbench::cash::{cash_search, CashConfig, CashReport};
use driftbench::eval::{evaluate_pretrained, run_holdout, run_prequential, EvalConfig, MetricTrace, RunMeta, TraceSummary};
use driftbench::generators::{build_generator, DriftComposition};
use driftbench::io::{infer_schema, replay_csv, write_trace, Subscription, Topic, TraceFormat};
use driftbench::learners::{build_learner, train_batch, Learner};
use driftbench::meta::MetaEnsemble;
use driftbench::par::Execution;
use driftbench::types::{collect_n, Take};
use driftbench::{sub_seed, Error, FeatureSchema, Instance, StreamSource};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentType, Protocol, SourceConfig};
use crate::CliError;

pub const SUMMARY_FORMAT_VERSION: u32 = 1;

/// A topic subscription whose publisher runs on its own thread. Publisher
/// errors surface when the subscription drains.
struct TopicFeed {
    sub: Subscription,
    publisher: Option<JoinHandle<driftbench::Result<u64>>>,
}

impl StreamSource for TopicFeed {
    fn schema(&self) -> &FeatureSchema {
        self.sub.schema()
    }

    fn next_instance(&mut self) -> driftbench::Result<Option<Instance>> {
        if let Some(inst) = self.sub.next_instance()? {
            return Ok(Some(inst));
        }
        if let Some(handle) = self.publisher.take() {
            handle.join().unwrap_or_else(|p| std::panic::resume_unwind(p))?;
        }
        Ok(None)
    }
}

fn via_topic(name: &str, mut src: Box<dyn StreamSource>) -> Box<dyn StreamSource> {
    let topic = Topic::new(name, src.schema().clone(), None);
    let sub = topic.subscribe();
    let publisher = thread::spawn(move || {
        let result = topic.publish_all(&mut src);
        topic.close();
        result
    });
    Box::new(TopicFeed {
        sub,
        publisher: Some(publisher),
    })
}

/// Builds the configured source. Generator randomness derives from `seed`
/// under the names `generator`, `generator-post` and `drift`.
pub fn build_source(src: &SourceConfig, seed: u64) -> Result<Box<dyn StreamSource>, CliError> {
    src.validate()?;
    let cfg_err = CliError::config;
    let mut out: Box<dyn StreamSource> = match (&src.generator, &src.csv) {
        (Some(family), _) => {
            let base = build_generator(*family, src.concept, sub_seed(seed, "generator"), &src.params)
                .map_err(cfg_err)?;
            let stream: Box<dyn StreamSource> = match &src.drift {
                None => base,
                Some(d) => {
                    let post = build_generator(*family, d.concept, sub_seed(seed, "generator-post"), &src.params)
                        .map_err(cfg_err)?;
                    Box::new(
                        DriftComposition::new(base, post, d.position, d.width, sub_seed(seed, "drift"))
                            .map_err(cfg_err)?,
                    )
                }
            };
            Box::new(Take::new(stream, src.n.unwrap_or(0)))
        }
        (None, Some(path)) => {
            let label = src.label.as_deref();
            let schema = infer_schema(path, label, src.sample_rows)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let replay = replay_csv(path, schema, label)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            match src.n {
                Some(n) => Box::new(Take::new(replay, n)),
                None => Box::new(replay),
            }
        }
        (None, None) => unreachable!("validated"),
    };
    if let Some(name) = &src.topic {
        out = via_topic(name, out);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Keep the evaluator's scored/trained audit on the returned trace.
    pub audit: bool,
    pub exec: Execution,
}

pub struct Outcome {
    pub trace: MetricTrace,
    pub cash: Option<CashReport>,
    /// Sequence numbers consumed as the training prefix.
    pub prefix_seqs: Vec<u64>,
    pub wall_time_secs: f64,
}

enum Arm {
    Incremental(Box<dyn Learner>),
    Pretrain(Box<dyn Learner>),
    Cash,
}

fn build_arm(cfg: &ExperimentConfig, schema: &FeatureSchema, exec: Execution) -> Result<Arm, CliError> {
    let seed = sub_seed(cfg.seed, "learner");
    let single = || -> Result<Box<dyn Learner>, CliError> {
        let spec = cfg.learner.as_ref().ok_or_else(|| CliError::config("missing [learner]"))?;
        build_learner(&spec.algorithm, &spec.params, schema, seed).map_err(CliError::config)
    };
    Ok(match cfg.experiment_type {
        ExperimentType::Online => Arm::Incremental(single()?),
        ExperimentType::BatchPretrained => Arm::Pretrain(single()?),
        ExperimentType::CashPretrained => Arm::Cash,
        ExperimentType::MetaOnline => {
            let meta = cfg.meta.as_ref().ok_or_else(|| CliError::config("missing [meta]"))?;
            let roster: Vec<_> = meta
                .roster
                .iter()
                .map(|s| (s.algorithm.clone(), s.params.clone()))
                .collect();
            Arm::Incremental(Box::new(
                MetaEnsemble::from_roster(schema.clone(), &roster, meta.mode(), meta.window, seed, exec)
                    .map_err(CliError::config)?,
            ))
        }
    })
}

/// Runs one experiment in memory. Config and schema problems are reported
/// as [`CliError::Config`] before any sample is processed.
pub fn execute(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let mut src = build_source(&cfg.source, cfg.seed)?;
    let schema = src.schema().clone();
    let arm = build_arm(cfg, &schema, opts.exec)?;
    let ecfg = EvalConfig {
        audit: opts.audit,
        ..cfg.evaluator.eval_config()
    };
    let start = Instant::now();
    let mut cash = None;
    let mut prefix_seqs = Vec::new();
    let mut trace = match arm {
        Arm::Incremental(mut learner) => match cfg.evaluator.protocol {
            Protocol::Prequential => run_prequential(&mut src, &mut learner, &ecfg)?,
            Protocol::Holdout => run_holdout(
                &mut src,
                &mut learner,
                cfg.evaluator.holdout_size.unwrap_or(0),
                cfg.evaluator.period.unwrap_or(0),
                &ecfg,
            )?,
        },
        arm => {
            let need = cfg.prefix_size as usize;
            let prefix = collect_n(&mut src, need)?;
            if prefix.len() < need {
                return Err(Error::StreamTooShort { needed: need }.into());
            }
            prefix_seqs = prefix.iter().map(|i| i.seq).collect();
            let model = match arm {
                Arm::Pretrain(learner) => train_batch(learner, &prefix, cfg.epochs)?,
                _ => {
                    let section = cfg.cash.clone().unwrap_or_default();
                    let ccfg = CashConfig {
                        folds: section.folds,
                        budget: section.budget,
                        shuffle: section.shuffle,
                        epochs: cfg.epochs,
                        seed: cfg.seed,
                        exec: opts.exec,
                    };
                    let result = cash_search(&prefix, &schema, &section.space(), &ccfg)?;
                    cash = Some(result.report);
                    result.model
                }
            };
            evaluate_pretrained(&mut src, model.as_ref(), &ecfg)?
        }
    };
    trace.meta = RunMeta {
        dataset: cfg.source.describe(),
        learner: cfg.learner_descriptor(),
        seed: cfg.seed,
        protocol: match (cfg.experiment_type.is_pretrained(), cfg.evaluator.protocol) {
            (true, _) => "pretrained",
            (false, Protocol::Prequential) => "prequential",
            (false, Protocol::Holdout) => "holdout",
        }
        .to_string(),
    };
    Ok(Outcome {
        trace,
        cash,
        prefix_seqs,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// The JSON document written next to every trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format_version: u32,
    pub name: String,
    pub experiment_type: ExperimentType,
    pub dataset: String,
    pub learner: String,
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: TraceSummary,
    pub wall_time_secs: f64,
    pub trace_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cash: Option<CashReport>,
    /// Fully resolved config; feeding this file back to `run` repeats the run.
    pub config: ExperimentConfig,
}

pub fn trace_path(out_dir: &Path, name: &str, format: TraceFormat) -> PathBuf {
    out_dir.join(format!("{name}.trace.{}", format.extension()))
}

pub fn summary_path(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(format!("{name}.summary.json"))
}

/// Runs `cfg` and writes `<name>.trace.<csv|json>` and `<name>.summary.json`
/// into `out_dir`. Nothing is left behind on failure.
pub fn run_to_dir(cfg: &ExperimentConfig, out_dir: &Path, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let mut cfg = cfg.clone();
    let name = cfg.name();
    cfg.name = Some(name.clone());
    let outcome = execute(&cfg, opts)?;
    fs::create_dir_all(out_dir)?;
    let trace_file = trace_path(out_dir, &name, cfg.output.format);
    let summary_file = summary_path(out_dir, &name);
    let written = (|| -> Result<RunSummary, CliError> {
        write_trace(&outcome.trace, &trace_file, cfg.output.format)?;
        let summary = RunSummary {
            format_version: SUMMARY_FORMAT_VERSION,
            name: name.clone(),
            experiment_type: cfg.experiment_type,
            dataset: outcome.trace.meta.dataset.clone(),
            learner: outcome.trace.meta.learner.clone(),
            seed: cfg.seed,
            metrics: outcome.trace.summary()?,
            wall_time_secs: outcome.wall_time_secs,
            trace_file: trace_file
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
            cash: outcome.cash.clone(),
            config: cfg.clone(),
        };
        let text = serde_json::to_string_pretty(&summary).map_err(driftbench::Error::from)?;
        fs::write(&summary_file, text + "\n")?;
        Ok(summary)
    })();
    if written.is_err() {
        let _ = fs::remove_file(&trace_file);
        let _ = fs::remove_file(&summary_file);
    }
    written
}

/// Config files of a suite directory, sorted by name.
pub fn suite_configs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::config(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::config(format!("no .toml configs in {}", dir.display())));
    }
    Ok(paths)
}

/// Overrides applied on top of every loaded config.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub format: Option<TraceFormat>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(f) = self.format {
            cfg.output.format = f;
        }
    }
}

pub fn load_and_run(path: &Path, out_dir: &Path, ov: &Overrides, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    ov.apply(&mut cfg);
    run_to_dir(&cfg, out_dir, opts)
}

/// Runs configs on `workers` threads; results come back in input order.
/// Each experiment stays sequential inside when more than one worker runs.
pub fn run_suite(
    paths: &[PathBuf],
    out_dir: &Path,
    ov: &Overrides,
    workers: usize,
) -> Vec<Result<RunSummary, CliError>> {
    let workers = workers.clamp(1, paths.len().max(1));
    let opts = RunOptions {
        audit: false,
        exec: if workers > 1 {
            Execution::Sequential
        } else {
            Execution::default()
        },
    };
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunSummary, CliError>>>> =
        Mutex::new((0..paths.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = paths.get(i) else { break };
                let r = load_and_run(path, out_dir, ov, &opts);
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    results
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every config is visited"))
        .collect()
}
