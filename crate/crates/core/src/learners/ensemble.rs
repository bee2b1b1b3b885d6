use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::drift::{Adwin, DriftDetector};
use crate::par::{self, Execution};
use crate::types::{FeatureSchema, Instance, PredictorStatus};
use crate::{sub_seed, Error, Result};

use super::params::Params;
use super::{algorithm_info, argmax, build_learner, Learner, LearnerEvent, LearnerKind};

/// Number of times one member trains on the current instance: `k ~ Poisson(λ)`.
pub fn oza_poisson_weight<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    match Poisson::new(lambda) {
        Ok(p) => p.sample(rng) as u64,
        Err(_) => 0,
    }
}

/// Weighted plurality vote; ties go to the lowest class index.
pub fn ensemble_vote(preds: &[(usize, f64)]) -> Result<usize> {
    let n = preds
        .iter()
        .map(|&(c, _)| c + 1)
        .max()
        .ok_or(Error::Empty("ensemble"))?;
    let mut votes = vec![0.0; n];
    for &(c, w) in preds {
        votes[c] += w;
    }
    Ok(argmax(&votes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaggingConfig {
    pub n_members: usize,
    pub lambda: f64,
    /// Registry name of the member algorithm.
    pub base: String,
    /// Per-member ADWIN on the error stream; the worst member is reset on drift.
    pub adwin: bool,
    pub adwin_delta: f64,
}

impl BaggingConfig {
    /// Defaults for one of `oza_bagging`, `oza_bagging_adwin`, `leveraging_bagging`.
    pub fn defaults(variant: &str) -> Result<Self> {
        let (lambda, adwin) = match variant {
            "oza_bagging" => (1.0, false),
            "oza_bagging_adwin" => (1.0, true),
            "leveraging_bagging" => (6.0, true),
            other => return Err(Error::UnknownAlgorithm(other.to_string())),
        };
        Ok(BaggingConfig {
            n_members: 10,
            lambda,
            base: "hoeffding_tree".into(),
            adwin,
            adwin_delta: 0.002,
        })
    }

    pub fn from_params(variant: &str, params: &Params) -> Result<Self> {
        let d = BaggingConfig::defaults(variant)?;
        let cfg = BaggingConfig {
            n_members: params.usize_or("n_members", d.n_members)?,
            lambda: params.f64_or("lambda", d.lambda)?,
            base: params.str_or("base", &d.base)?.to_string(),
            adwin: d.adwin,
            adwin_delta: params.f64_or("adwin_delta", d.adwin_delta)?,
        };
        if cfg.n_members == 0 {
            return Err(Error::param("n_members", "must be positive"));
        }
        if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
            return Err(Error::param("lambda", "must be positive"));
        }
        if !(cfg.adwin_delta > 0.0 && cfg.adwin_delta < 1.0) {
            return Err(Error::param("adwin_delta", "must lie in (0, 1)"));
        }
        match algorithm_info(&cfg.base) {
            Some(info) if info.kind == LearnerKind::Online => Ok(cfg),
            Some(_) => Err(Error::param(
                "base",
                format!("`{}` is not an online learner", cfg.base),
            )),
            None => Err(Error::UnknownAlgorithm(cfg.base)),
        }
    }
}

struct Member {
    learner: Box<dyn Learner>,
    rng: ChaCha8Rng,
    monitor: Option<Adwin>,
    resets: u64,
    seed: u64,
}

/// Online bagging: each member sees every instance `Poisson(λ)` times.
pub struct BaggingEnsemble {
    name: String,
    schema: FeatureSchema,
    cfg: BaggingConfig,
    exec: Execution,
    members: Vec<Member>,
    events: Vec<LearnerEvent>,
    n_resets: u64,
}

impl std::fmt::Debug for BaggingEnsemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BaggingEnsemble")
            .field("name", &self.name)
            .field("cfg", &self.cfg)
            .field("n_resets", &self.n_resets)
            .finish_non_exhaustive()
    }
}

fn fresh_learner(cfg: &BaggingConfig, schema: &FeatureSchema, seed: u64) -> Result<Box<dyn Learner>> {
    build_learner(&cfg.base, &Params::default(), schema, seed)
}

impl BaggingEnsemble {
    pub fn new(
        name: &str,
        schema: FeatureSchema,
        cfg: BaggingConfig,
        seed: u64,
        exec: Execution,
    ) -> Result<Self> {
        let members = (0..cfg.n_members)
            .map(|i| {
                let member_seed = sub_seed(seed, &format!("member-{i}"));
                Ok(Member {
                    learner: fresh_learner(&cfg, &schema, sub_seed(member_seed, "learner"))?,
                    rng: ChaCha8Rng::seed_from_u64(sub_seed(member_seed, "poisson")),
                    monitor: cfg.adwin.then(|| Adwin::new(cfg.adwin_delta)),
                    resets: 0,
                    seed: member_seed,
                })
            })
            .collect::<Result<_>>()?;
        Ok(BaggingEnsemble {
            name: name.to_string(),
            schema,
            cfg,
            exec,
            members,
            events: Vec::new(),
            n_resets: 0,
        })
    }

    pub fn config(&self) -> &BaggingConfig {
        &self.cfg
    }

    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    /// Members reset after a drift signal so far.
    pub fn n_resets(&self) -> u64 {
        self.n_resets
    }

    /// Each trained member's prediction, `None` for members still untrained.
    pub fn member_predictions(&self, x: &[f64]) -> Vec<Option<usize>> {
        self.members
            .iter()
            .map(|m| m.learner.predict(x).ok())
            .collect()
    }
}

impl Learner for BaggingEnsemble {
    fn name(&self) -> &str {
        &self.name
    }

    fn partial_fit(&mut self, inst: &Instance) -> Result<()> {
        let y = inst.label()?;
        if y >= self.schema.n_classes() {
            return Err(Error::UnknownClass {
                class: y,
                n_classes: self.schema.n_classes(),
            });
        }
        let lambda = self.cfg.lambda;
        let outcomes = par::map_mut(self.exec, &mut self.members, |_, m| -> Result<bool> {
            let mut drift = false;
            if let Some(monitor) = &mut m.monitor {
                let wrong = m.learner.predict(&inst.x).map_or(true, |p| p != y);
                drift = monitor.update(f64::from(u8::from(wrong)))? == PredictorStatus::Drift;
            }
            for _ in 0..oza_poisson_weight(lambda, &mut m.rng) {
                m.learner.partial_fit(inst)?;
            }
            Ok(drift)
        });
        let mut drift = false;
        for o in outcomes {
            drift |= o?;
        }
        if drift {
            let worst = argmax(
                &self
                    .members
                    .iter()
                    .map(|m| m.monitor.as_ref().map_or(0.0, Adwin::mean))
                    .collect::<Vec<_>>(),
            );
            let m = &mut self.members[worst];
            m.resets += 1;
            m.learner = fresh_learner(
                &self.cfg,
                &self.schema,
                sub_seed(m.seed, &format!("learner-{}", m.resets)),
            )?;
            if let Some(monitor) = &mut m.monitor {
                monitor.reset();
            }
            self.n_resets += 1;
            self.events.push(LearnerEvent::Drift {
                detector: "adwin".into(),
                status: PredictorStatus::Drift,
            });
        }
        Ok(())
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        let preds: Vec<(usize, f64)> = self
            .member_predictions(x)
            .into_iter()
            .flatten()
            .map(|c| (c, 1.0))
            .collect();
        if preds.is_empty() {
            return Err(Error::Untrained);
        }
        ensemble_vote(&preds)
    }

    fn take_events(&mut self) -> Vec<LearnerEvent> {
        std::mem::take(&mut self.events)
    }
}
