//! Experiment configuration files.
//!
//! A config is TOML (or the JSON `config` block of a run summary). Tables
//! may be written as `[section]` headers or dotted keys:
//!
//! ```toml
//! name = "stagger_hat"
//! experiment_type = "online"   # batch_pretrained | online | cash_pretrained | meta_online
//! seed = 7
//! prefix_size = 0              # required >= 1 for the pretrained types
//!
//! source.generator = "stagger" # or source.csv = "data.csv" (+ source.label)
//! source.concept = 0
//! source.n = 20000
//! source.drift = { concept = 1, position = 10000, width = 1 }
//!
//! learner.algorithm = "hoeffding_adaptive_tree"
//! learner.params = { grace = 100 }
//!
//! evaluator.protocol = "prequential" # or "holdout" (+ holdout_size, period)
//! evaluator.report_every = 100
//! output.format = "csv"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use driftbench::cash::{ConfigSpace, SpaceEntry};
use driftbench::eval::EvalConfig;
use driftbench::generators::{Family, GeneratorParams};
use driftbench::io::TraceFormat;
use driftbench::learners::{algorithm_info, LearnerKind, Params};
use driftbench::meta::{MetaMode, DEFAULT_ROSTER, DEFAULT_WINDOW};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentType {
    /// Fit on a prefix, freeze, score the rest.
    BatchPretrained,
    /// Incremental learner under a stream protocol.
    Online,
    /// Grid-search CASH on a prefix, freeze the winner, score the rest.
    CashPretrained,
    /// Online meta-selection over a roster.
    MetaOnline,
}

impl ExperimentType {
    pub const ALL: [ExperimentType; 4] = [
        ExperimentType::BatchPretrained,
        ExperimentType::Online,
        ExperimentType::CashPretrained,
        ExperimentType::MetaOnline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentType::BatchPretrained => "batch_pretrained",
            ExperimentType::Online => "online",
            ExperimentType::CashPretrained => "cash_pretrained",
            ExperimentType::MetaOnline => "meta_online",
        }
    }

    pub fn is_pretrained(self) -> bool {
        matches!(self, ExperimentType::BatchPretrained | ExperimentType::CashPretrained)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    /// Concept after the drift.
    pub concept: usize,
    pub position: u64,
    #[serde(default = "one")]
    pub width: u64,
}

fn one() -> u64 {
    1
}

fn default_sample_rows() -> usize {
    1000
}

/// Where instances come from: a generator or a CSV file, optionally
/// replayed through an in-process topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Family>,
    #[serde(default)]
    pub concept: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftSpec>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub params: GeneratorParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default = "default_sample_rows")]
    pub sample_rows: usize,
    /// Stream length; required for generators, a cap for CSV files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Publish the source to a topic of this name and consume it through a
    /// subscription.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

impl SourceConfig {
    pub fn generator(family: Family, n: u64) -> Self {
        SourceConfig {
            generator: Some(family),
            concept: 0,
            drift: None,
            params: GeneratorParams::default(),
            csv: None,
            label: None,
            sample_rows: default_sample_rows(),
            n: Some(n),
            topic: None,
        }
    }

    /// Short dataset descriptor used in traces and summaries.
    pub fn describe(&self) -> String {
        match (&self.generator, &self.csv) {
            (Some(f), _) => {
                let mut s = format!("{f}_c{}", self.concept);
                if let Some(d) = &self.drift {
                    s.push_str(&format!("_to{}@{}", d.concept, d.position));
                    if d.width > 1 {
                        s.push_str(&format!("w{}", d.width));
                    }
                }
                s
            }
            (None, Some(p)) => p
                .file_stem()
                .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()),
            (None, None) => String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.generator, &self.csv) {
            (Some(family), None) => {
                match self.n {
                    None => return Err(CliError::config("source.n is required for generators")),
                    Some(0) => return Err(CliError::config("source.n must be at least 1")),
                    _ => {}
                }
                let max = family.n_concepts();
                if self.concept >= max {
                    return Err(CliError::config(format!(
                        "source.concept {} out of range for {family} (0..{max})",
                        self.concept
                    )));
                }
                if let Some(d) = &self.drift {
                    if d.concept >= max {
                        return Err(CliError::config(format!(
                            "source.drift.concept {} out of range for {family}",
                            d.concept
                        )));
                    }
                    if d.width == 0 {
                        return Err(CliError::config("source.drift.width must be at least 1"));
                    }
                }
                Ok(())
            }
            (None, Some(_)) => {
                if self.drift.is_some() || self.params != GeneratorParams::default() {
                    return Err(CliError::config("drift and params apply to generators only"));
                }
                if self.n == Some(0) {
                    return Err(CliError::config("source.n must be at least 1"));
                }
                Ok(())
            }
            (Some(_), Some(_)) => Err(CliError::config("source: set either generator or csv, not both")),
            (None, None) => Err(CliError::config("source: set generator or csv")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub algorithm: String,
    #[serde(default, skip_serializing_if = "Params::is_empty")]
    pub params: Params,
}

impl LearnerSpec {
    pub fn new(algorithm: &str) -> Self {
        LearnerSpec {
            algorithm: algorithm.to_string(),
            params: Params::new(),
        }
    }

    pub fn describe(&self) -> String {
        if self.params.is_empty() {
            return self.algorithm.clone();
        }
        let ps: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}{{{}}}", self.algorithm, ps.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaModeName {
    Meta,
    LastBest,
    WeightedVote,
}

fn default_alpha() -> f64 {
    0.95
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

fn default_roster() -> Vec<LearnerSpec> {
    DEFAULT_ROSTER.iter().map(|a| LearnerSpec::new(a)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaConfig {
    pub mode: MetaModeName,
    /// Fading factor of the weighted vote.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_roster")]
    pub roster: Vec<LearnerSpec>,
}

impl MetaConfig {
    pub fn mode(&self) -> MetaMode {
        match self.mode {
            MetaModeName::Meta => MetaMode::Meta,
            MetaModeName::LastBest => MetaMode::LastBest,
            MetaModeName::WeightedVote => MetaMode::WeightedVote { alpha: self.alpha },
        }
    }
}

fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CashSection {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default)]
    pub shuffle: bool,
    /// Search space; the built-in grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<Vec<SpaceEntry>>,
}

impl Default for CashSection {
    fn default() -> Self {
        CashSection {
            folds: default_folds(),
            budget: None,
            shuffle: false,
            space: None,
        }
    }
}

impl CashSection {
    pub fn space(&self) -> ConfigSpace {
        match &self.space {
            Some(entries) => ConfigSpace::new(entries.clone()),
            None => driftbench::cash::default_space(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    #[default]
    Prequential,
    Holdout,
}

fn default_report_every() -> u64 {
    100
}

fn default_eval_window() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluatorConfig {
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default = "default_report_every")]
    pub report_every: u64,
    #[serde(default = "default_eval_window")]
    pub window: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holdout_size: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<u64>,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig {
            protocol: Protocol::Prequential,
            report_every: default_report_every(),
            window: default_eval_window(),
            holdout_size: None,
            period: None,
        }
    }
}

impl EvaluatorConfig {
    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            report_every: self.report_every,
            window: self.window,
            ..EvalConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: TraceFormat,
}

fn default_epochs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Output file stem; defaults to the config file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub experiment_type: ExperimentType,
    #[serde(default)]
    pub seed: u64,
    pub source: SourceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner: Option<LearnerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<MetaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cash: Option<CashSection>,
    #[serde(default)]
    pub evaluator: EvaluatorConfig,
    /// Buffered training prefix of the pretrained types; never scored.
    #[serde(default)]
    pub prefix_size: u64,
    /// Passes over the prefix for incremental learners.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn new(experiment_type: ExperimentType, source: SourceConfig) -> Self {
        ExperimentConfig {
            name: None,
            experiment_type,
            seed: 0,
            source,
            learner: None,
            meta: None,
            cash: None,
            evaluator: EvaluatorConfig::default(),
            prefix_size: 0,
            epochs: default_epochs(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    /// Reads a TOML config, or the `config` block of a JSON run summary.
    /// Relative CSV paths resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let wrap = |e: String| CliError::config(format!("{}: {e}", path.display()));
        let mut cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| wrap(e.to_string()))?;
            let value = match value.get("config") {
                Some(inner) => inner.clone(),
                None => value,
            };
            serde_json::from_value(value).map_err(|e| wrap(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| wrap(e.to_string()))?
        };
        if cfg.name.is_none() {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            cfg.name = stem.map(|s| s.trim_end_matches(".summary").to_string());
        }
        if let (Some(csv), Some(dir)) = (&cfg.source.csv, path.parent()) {
            if csv.is_relative() {
                cfg.source.csv = Some(dir.join(csv));
            }
        }
        cfg.validate().map_err(|e| wrap(e.to_string()))?;
        Ok(cfg)
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!("{}_{}", self.experiment_type.name(), self.source.describe())
        })
    }

    /// Learner descriptor used to group results.
    pub fn learner_descriptor(&self) -> String {
        let t = self.experiment_type.name();
        match self.experiment_type {
            ExperimentType::BatchPretrained | ExperimentType::Online => format!(
                "{t}:{}",
                self.learner.as_ref().map_or(String::new(), LearnerSpec::describe)
            ),
            ExperimentType::CashPretrained => {
                let cash = self.cash.clone().unwrap_or_default();
                let algos: Vec<String> = cash.space().entries.iter().map(|e| e.algorithm.clone()).collect();
                format!("{t}:[{}]", algos.join(","))
            }
            ExperimentType::MetaOnline => {
                let meta = self.meta.as_ref();
                let roster: Vec<String> = meta
                    .map(|m| m.roster.iter().map(LearnerSpec::describe).collect())
                    .unwrap_or_default();
                let mode = meta.map_or("", |m| m.mode().name());
                format!("{t}:{mode}[{}]", roster.join(","))
            }
        }
    }

    /// Structural checks that need no data.
    pub fn validate(&self) -> Result<(), CliError> {
        self.source.validate()?;
        let t = self.experiment_type;
        if t.is_pretrained() {
            if self.prefix_size == 0 {
                return Err(CliError::config(format!("{} requires prefix_size >= 1", t.name())));
            }
            if let Some(n) = self.source.n {
                if self.prefix_size >= n {
                    return Err(CliError::config(format!(
                        "prefix_size {} leaves nothing to score in a {n}-sample stream",
                        self.prefix_size
                    )));
                }
            }
            if self.evaluator.protocol != Protocol::Prequential {
                return Err(CliError::config(
                    "pretrained experiments score every post-prefix sample; evaluator.protocol must be left at its default",
                ));
            }
        } else if self.prefix_size != 0 {
            return Err(CliError::config(format!("prefix_size applies to pretrained types, not {}", t.name())));
        }
        if self.epochs == 0 {
            return Err(CliError::config("epochs must be at least 1"));
        }
        let needs_learner = matches!(t, ExperimentType::BatchPretrained | ExperimentType::Online);
        match (&self.learner, needs_learner) {
            (None, true) => return Err(CliError::config(format!("{} requires [learner]", t.name()))),
            (Some(_), false) => return Err(CliError::config(format!("[learner] does not apply to {}", t.name()))),
            (Some(spec), true) => {
                let info = algorithm_info(&spec.algorithm)
                    .ok_or_else(|| CliError::config(format!("unknown algorithm `{}`", spec.algorithm)))?;
                if t == ExperimentType::Online && info.kind == LearnerKind::Batch {
                    return Err(CliError::config(format!(
                        "`{}` is a batch learner; use batch_pretrained",
                        spec.algorithm
                    )));
                }
            }
            (None, false) => {}
        }
        match (&self.meta, t == ExperimentType::MetaOnline) {
            (None, true) => return Err(CliError::config("meta_online requires [meta]")),
            (Some(_), false) => return Err(CliError::config(format!("[meta] does not apply to {}", t.name()))),
            (Some(m), true) => {
                if m.roster.is_empty() {
                    return Err(CliError::config("meta.roster is empty"));
                }
                if m.window == 0 {
                    return Err(CliError::config("meta.window must be positive"));
                }
                for spec in &m.roster {
                    let info = algorithm_info(&spec.algorithm)
                        .ok_or_else(|| CliError::config(format!("unknown algorithm `{}`", spec.algorithm)))?;
                    if info.kind == LearnerKind::Batch {
                        return Err(CliError::config(format!(
                            "roster member `{}` is not an online learner",
                            spec.algorithm
                        )));
                    }
                }
            }
            (None, false) => {}
        }
        if self.cash.is_some() && t != ExperimentType::CashPretrained {
            return Err(CliError::config(format!("[cash] does not apply to {}", t.name())));
        }
        if t == ExperimentType::CashPretrained {
            let cash = self.cash.clone().unwrap_or_default();
            cash.space().validate().map_err(CliError::config)?;
            if cash.folds < 2 {
                return Err(CliError::config("cash.folds must be at least 2"));
            }
        }
        self.evaluator.eval_config().validate().map_err(CliError::config)?;
        if self.evaluator.protocol == Protocol::Holdout {
            let (Some(h), Some(p)) = (self.evaluator.holdout_size, self.evaluator.period) else {
                return Err(CliError::config("holdout needs evaluator.holdout_size and evaluator.period"));
            };
            if h == 0 || p <= h {
                return Err(CliError::config("holdout needs 0 < holdout_size < period"));
            }
        }
        Ok(())
    }
}
