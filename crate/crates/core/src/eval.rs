//! Prequential, periodic-holdout and pretrained evaluation producing
//! [`MetricTrace`]s.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::learners::{Learner, LearnerEvent};
use crate::types::{cohen_kappa, ConfusionMatrix, FeatureSchema, Instance, PredictorStatus, StreamSource};
use crate::{Error, Result};

/// Something a learner reported, stamped with the sample that triggered it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceEvent {
    Drift {
        seq: u64,
        detector: String,
        status: PredictorStatus,
    },
    Switch {
        seq: u64,
        active: usize,
    },
}

impl TraceEvent {
    fn stamp(seq: u64, e: LearnerEvent) -> Self {
        match e {
            LearnerEvent::Drift { detector, status } => TraceEvent::Drift {
                seq,
                detector,
                status,
            },
            LearnerEvent::Switch { active } => TraceEvent::Switch { seq, active },
        }
    }

    pub fn seq(&self) -> u64 {
        match *self {
            TraceEvent::Drift { seq, .. } | TraceEvent::Switch { seq, .. } => seq,
        }
    }

    pub fn is_drift(&self) -> bool {
        matches!(
            self,
            TraceEvent::Drift {
                status: PredictorStatus::Drift,
                ..
            }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Sequence number of the last sample covered by this record.
    pub seq: u64,
    pub cum_accuracy: f64,
    pub window_accuracy: f64,
    pub kappa: f64,
    /// Events raised since the previous record.
    pub events: Vec<TraceEvent>,
    pub active_learner: Option<usize>,
    /// Final holdout cycle cut short by the end of the stream.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub incomplete: bool,
}

/// Run descriptor carried alongside the records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub dataset: String,
    pub learner: String,
    pub seed: u64,
    pub protocol: String,
}

/// Samples seen by the evaluator, for leakage audits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Audit {
    /// `(seq, y_true, y_pred)` for every scored sample.
    pub scored: Vec<(u64, usize, usize)>,
    /// Sequence numbers passed to `partial_fit`, in order.
    pub trained: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTrace {
    pub meta: RunMeta,
    pub records: Vec<TraceRecord>,
    #[serde(skip)]
    pub audit: Option<Audit>,
}

/// Headline numbers of one trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub final_cum_accuracy: f64,
    pub mean_window_accuracy: f64,
    pub final_kappa: f64,
    pub drift_count: usize,
    pub switch_count: usize,
    pub n_records: usize,
}

impl MetricTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn events(&self) -> impl Iterator<Item = &TraceEvent> {
        self.records.iter().flat_map(|r| &r.events)
    }

    pub fn summary(&self) -> Result<TraceSummary> {
        let last = self.last().ok_or(Error::EmptyTrace)?;
        let n = self.records.len();
        Ok(TraceSummary {
            final_cum_accuracy: last.cum_accuracy,
            mean_window_accuracy: self.records.iter().map(|r| r.window_accuracy).sum::<f64>()
                / n as f64,
            final_kappa: last.kappa,
            drift_count: self.events().filter(|e| e.is_drift()).count(),
            switch_count: self
                .events()
                .filter(|e| matches!(e, TraceEvent::Switch { .. }))
                .count(),
            n_records: n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Emit a record every this many scored samples (and at stream end).
    pub report_every: u64,
    /// Scored samples covered by `window_accuracy`.
    pub window: usize,
    /// Stop after this many samples, pretraining included.
    pub max_samples: Option<u64>,
    /// Prequential only: train on this many leading samples without scoring.
    pub pretrain: u64,
    /// Class assumed when the learner has not seen any sample yet; `None`
    /// turns an untrained prediction into an error.
    pub untrained_fallback: Option<usize>,
    /// Keep an [`Audit`] of scored and trained samples.
    pub audit: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            report_every: 100,
            window: 200,
            max_samples: None,
            pretrain: 0,
            untrained_fallback: Some(0),
            audit: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.report_every == 0 {
            return Err(Error::param("report_every", "must be positive"));
        }
        if self.window == 0 {
            return Err(Error::param("window", "must be positive"));
        }
        Ok(())
    }
}

/// Running confusion matrix plus a sliding window of hits.
#[derive(Debug, Clone)]
struct Scorer {
    cm: ConfusionMatrix,
    window: VecDeque<bool>,
    capacity: usize,
    window_hits: usize,
}

impl Scorer {
    fn new(n_classes: usize, capacity: usize) -> Self {
        Scorer {
            cm: ConfusionMatrix::new(n_classes),
            window: VecDeque::with_capacity(capacity),
            capacity,
            window_hits: 0,
        }
    }

    fn score(&mut self, y: usize, pred: usize) -> Result<()> {
        self.cm.update(y, pred)?;
        let hit = y == pred;
        if self.window.len() == self.capacity && self.window.pop_front() == Some(true) {
            self.window_hits -= 1;
        }
        self.window.push_back(hit);
        self.window_hits += usize::from(hit);
        Ok(())
    }

    fn clear_window(&mut self) {
        self.window.clear();
        self.window_hits = 0;
    }

    fn record(
        &self,
        seq: u64,
        events: &mut Vec<TraceEvent>,
        active: Option<usize>,
    ) -> Result<TraceRecord> {
        let total = self.cm.total();
        Ok(TraceRecord {
            seq,
            cum_accuracy: if total == 0 {
                0.0
            } else {
                self.cm.trace() as f64 / total as f64
            },
            window_accuracy: if self.window.is_empty() {
                0.0
            } else {
                self.window_hits as f64 / self.window.len() as f64
            },
            kappa: if total == 0 { 0.0 } else { cohen_kappa(&self.cm)? },
            events: std::mem::take(events),
            active_learner: active,
            incomplete: false,
        })
    }
}

fn predict_with_fallback(l: &dyn Learner, x: &[f64], fallback: Option<usize>) -> Result<usize> {
    match l.predict(x) {
        Err(Error::Untrained) if fallback.is_some() => Ok(fallback.unwrap()),
        other => other,
    }
}

fn drain_events(l: &mut dyn Learner, seq: u64, into: &mut Vec<TraceEvent>) {
    into.extend(l.take_events().into_iter().map(|e| TraceEvent::stamp(seq, e)));
}

fn next_labeled(src: &mut dyn StreamSource) -> Result<Option<(Instance, usize)>> {
    match src.next_instance()? {
        None => Ok(None),
        Some(inst) => {
            let y = inst.y.ok_or(Error::Unlabeled { seq: inst.seq })?;
            Ok(Some((inst, y)))
        }
    }
}

fn check_class(schema: &FeatureSchema, y: usize) -> Result<()> {
    if y >= schema.n_classes() {
        return Err(Error::UnknownClass {
            class: y,
            n_classes: schema.n_classes(),
        });
    }
    Ok(())
}

/// Test-then-train over every sample: predict, score, then `partial_fit`.
pub fn run_prequential(
    src: &mut dyn StreamSource,
    learner: &mut dyn Learner,
    cfg: &EvalConfig,
) -> Result<MetricTrace> {
    cfg.validate()?;
    if learner.is_frozen() {
        return Err(Error::FrozenLearner);
    }
    let schema = src.schema().clone();
    let mut scorer = Scorer::new(schema.n_classes(), cfg.window);
    let mut audit = cfg.audit.then(Audit::default);
    let mut records = Vec::new();
    let mut events = Vec::new();
    let (mut processed, mut scored, mut last_seq) = (0u64, 0u64, None);
    while cfg.max_samples.is_none_or(|m| processed < m) {
        let Some((inst, y)) = next_labeled(src)? else {
            break;
        };
        check_class(&schema, y)?;
        processed += 1;
        if processed > cfg.pretrain {
            let pred = predict_with_fallback(learner, &inst.x, cfg.untrained_fallback)?;
            scorer.score(y, pred)?;
            scored += 1;
            if let Some(a) = &mut audit {
                a.scored.push((inst.seq, y, pred));
            }
        }
        learner.partial_fit(&inst)?;
        if let Some(a) = &mut audit {
            a.trained.push(inst.seq);
        }
        drain_events(learner, inst.seq, &mut events);
        last_seq = Some(inst.seq);
        if scored > 0 && processed > cfg.pretrain && scored % cfg.report_every == 0 {
            records.push(scorer.record(inst.seq, &mut events, learner.active_member())?);
        }
    }
    let last_seq = last_seq.ok_or(Error::EmptyStream)?;
    if scored == 0 {
        return Err(Error::StreamTooShort {
            needed: cfg.pretrain as usize + 1,
        });
    }
    if records.last().is_none_or(|r| r.seq != last_seq) {
        records.push(scorer.record(last_seq, &mut events, learner.active_member())?);
    }
    Ok(MetricTrace {
        meta: RunMeta {
            protocol: "prequential".into(),
            ..RunMeta::default()
        },
        records,
        audit,
    })
}

/// Periodic holdout: each cycle of `period` samples trains on the first
/// `period - holdout_size` and scores the last `holdout_size` without ever
/// training on them. One record per cycle; `window_accuracy` is the cycle's
/// holdout accuracy.
pub fn run_holdout(
    src: &mut dyn StreamSource,
    learner: &mut dyn Learner,
    holdout_size: u64,
    period: u64,
    cfg: &EvalConfig,
) -> Result<MetricTrace> {
    cfg.validate()?;
    if holdout_size == 0 {
        return Err(Error::param("holdout_size", "must be at least 1"));
    }
    if period <= holdout_size {
        return Err(Error::param("period", "must exceed holdout_size"));
    }
    if learner.is_frozen() {
        return Err(Error::FrozenLearner);
    }
    let schema = src.schema().clone();
    let train_len = period - holdout_size;
    let mut scorer = Scorer::new(schema.n_classes(), holdout_size as usize);
    let mut audit = cfg.audit.then(Audit::default);
    let mut records = Vec::new();
    let mut events = Vec::new();
    let mut processed = 0u64;
    let mut last_seq = None;
    let mut cycle_scored = 0u64;
    while cfg.max_samples.is_none_or(|m| processed < m) {
        let Some((inst, y)) = next_labeled(src)? else {
            break;
        };
        check_class(&schema, y)?;
        let pos = processed % period;
        processed += 1;
        last_seq = Some(inst.seq);
        if pos < train_len {
            learner.partial_fit(&inst)?;
            if let Some(a) = &mut audit {
                a.trained.push(inst.seq);
            }
            drain_events(learner, inst.seq, &mut events);
        } else {
            let pred = predict_with_fallback(learner, &inst.x, cfg.untrained_fallback)?;
            scorer.score(y, pred)?;
            cycle_scored += 1;
            if let Some(a) = &mut audit {
                a.scored.push((inst.seq, y, pred));
            }
            if pos == period - 1 {
                records.push(scorer.record(inst.seq, &mut events, learner.active_member())?);
                scorer.clear_window();
                cycle_scored = 0;
            }
        }
    }
    let last_seq = last_seq.ok_or(Error::EmptyStream)?;
    if records.is_empty() {
        return Err(Error::StreamTooShort {
            needed: period as usize,
        });
    }
    if !processed.is_multiple_of(period) {
        let mut r = scorer.record(last_seq, &mut events, learner.active_member())?;
        if cycle_scored == 0 {
            r.window_accuracy = f64::NAN;
        }
        r.incomplete = true;
        records.push(r);
    }
    Ok(MetricTrace {
        meta: RunMeta {
            protocol: "holdout".into(),
            ..RunMeta::default()
        },
        records,
        audit,
    })
}

/// Scores a frozen model on every sample; the model is never updated.
pub fn evaluate_pretrained(
    src: &mut dyn StreamSource,
    model: &dyn Learner,
    cfg: &EvalConfig,
) -> Result<MetricTrace> {
    cfg.validate()?;
    if !model.is_frozen() {
        return Err(Error::NotFrozen);
    }
    let schema = src.schema().clone();
    let mut scorer = Scorer::new(schema.n_classes(), cfg.window);
    let mut audit = cfg.audit.then(Audit::default);
    let mut records = Vec::new();
    let mut events = Vec::new();
    let mut processed = 0u64;
    let mut last_seq = None;
    while cfg.max_samples.is_none_or(|m| processed < m) {
        let Some((inst, y)) = next_labeled(src)? else {
            break;
        };
        check_class(&schema, y)?;
        processed += 1;
        let pred = predict_with_fallback(model, &inst.x, cfg.untrained_fallback)?;
        scorer.score(y, pred)?;
        if let Some(a) = &mut audit {
            a.scored.push((inst.seq, y, pred));
        }
        last_seq = Some(inst.seq);
        if processed.is_multiple_of(cfg.report_every) {
            records.push(scorer.record(inst.seq, &mut events, model.active_member())?);
        }
    }
    let last_seq = last_seq.ok_or(Error::EmptyStream)?;
    if records.last().is_none_or(|r| r.seq != last_seq) {
        records.push(scorer.record(last_seq, &mut events, model.active_member())?);
    }
    Ok(MetricTrace {
        meta: RunMeta {
            protocol: "pretrained".into(),
            ..RunMeta::default()
        },
        records,
        audit,
    })
}
