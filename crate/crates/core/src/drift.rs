//! Concept-drift detectors: Page-Hinkley, DDM, EDDM and ADWIN behind a
//! uniform update/status contract.
//!
//! Input conventions differ: DDM, EDDM and Page-Hinkley watch an error
//! signal (1 = mistake), ADWIN watches a correctness signal (1 = correct) so
//! a drop in accuracy produces a cut. [`DriftDetector::observe_outcome`]
//! applies the right convention for a classifier outcome.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::types::PredictorStatus;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    PageHinkley,
    Ddm,
    Eddm,
    Adwin,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [
        DetectorKind::PageHinkley,
        DetectorKind::Ddm,
        DetectorKind::Eddm,
        DetectorKind::Adwin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::PageHinkley => "page_hinkley",
            DetectorKind::Ddm => "ddm",
            DetectorKind::Eddm => "eddm",
            DetectorKind::Adwin => "adwin",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            DetectorKind::PageHinkley => "delta=0.005 lambda=50 min_instances=30; input: error signal",
            DetectorKind::Ddm => "min_instances=30, warning at 2 sigma, drift at 3 sigma; input: error bit",
            DetectorKind::Eddm => "alpha=0.95 beta=0.90 min_errors=30; input: error bit",
            DetectorKind::Adwin => "delta=0.002 max_buckets=5; input: correctness in [0,1]",
        }
    }

    /// A detector with default parameters.
    pub fn build(self) -> Box<dyn DriftDetector> {
        match self {
            DetectorKind::PageHinkley => Box::new(PageHinkley::default()),
            DetectorKind::Ddm => Box::new(Ddm::default()),
            DetectorKind::Eddm => Box::new(Eddm::default()),
            DetectorKind::Adwin => Box::new(Adwin::default()),
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::param("detector", format!("unknown detector `{s}`")))
    }
}

pub trait DriftDetector: Send {
    fn kind(&self) -> DetectorKind;

    /// Feeds one observation and returns the status after it.
    fn update(&mut self, x: f64) -> Result<PredictorStatus>;

    /// Status produced by the last update.
    fn status(&self) -> PredictorStatus;

    /// Back to the freshly constructed state, parameters kept.
    fn reset(&mut self);

    fn n_observed(&self) -> u64;

    /// Feeds a classifier outcome using the detector's input convention.
    fn observe_outcome(&mut self, correct: bool) -> PredictorStatus {
        let x = match self.kind() {
            DetectorKind::Adwin => f64::from(u8::from(correct)),
            _ => f64::from(u8::from(!correct)),
        };
        self.update(x).expect("binary outcomes are always in range")
    }
}

fn check_bit(x: f64) -> Result<bool> {
    if x == 0.0 {
        Ok(false)
    } else if x == 1.0 {
        Ok(true)
    } else {
        Err(Error::DetectorInput(x))
    }
}

// ---------------------------------------------------------------------------

/// Page-Hinkley test for an increase in the mean of the input.
#[derive(Debug, Clone)]
pub struct PageHinkley {
    pub delta: f64,
    pub lambda: f64,
    pub min_instances: u64,
    n: u64,
    mean: f64,
    cumulative: f64,
    minimum: f64,
    status: PredictorStatus,
}

impl Default for PageHinkley {
    fn default() -> Self {
        PageHinkley::new(0.005, 50.0, 30)
    }
}

impl PageHinkley {
    pub fn new(delta: f64, lambda: f64, min_instances: u64) -> Self {
        PageHinkley {
            delta,
            lambda,
            min_instances,
            n: 0,
            mean: 0.0,
            cumulative: 0.0,
            minimum: 0.0,
            status: PredictorStatus::Stable,
        }
    }

    /// Current `m_t - M_t`.
    pub fn statistic(&self) -> f64 {
        self.cumulative - self.minimum
    }
}

impl DriftDetector for PageHinkley {
    fn kind(&self) -> DetectorKind {
        DetectorKind::PageHinkley
    }

    fn update(&mut self, x: f64) -> Result<PredictorStatus> {
        if !x.is_finite() {
            return Err(Error::DetectorInput(x));
        }
        self.n += 1;
        self.mean += (x - self.mean) / self.n as f64;
        self.cumulative += x - self.mean - self.delta;
        self.minimum = self.minimum.min(self.cumulative);
        self.status = if self.n >= self.min_instances && self.statistic() > self.lambda {
            PredictorStatus::Drift
        } else {
            PredictorStatus::Stable
        };
        if self.status == PredictorStatus::Drift {
            self.reset();
            self.status = PredictorStatus::Drift;
        }
        Ok(self.status)
    }

    fn status(&self) -> PredictorStatus {
        self.status
    }

    fn reset(&mut self) {
        *self = PageHinkley::new(self.delta, self.lambda, self.min_instances);
    }

    fn n_observed(&self) -> u64 {
        self.n
    }
}

// ---------------------------------------------------------------------------

/// Threshold rule of DDM for the current `p + s` against the recorded
/// minimum.
pub fn ddm_level(p_plus_s: f64, p_min: f64, s_min: f64) -> PredictorStatus {
    if p_plus_s > p_min + 3.0 * s_min {
        PredictorStatus::Drift
    } else if p_plus_s > p_min + 2.0 * s_min {
        PredictorStatus::Warning
    } else {
        PredictorStatus::Stable
    }
}

/// Drift Detection Method over the running error rate.
#[derive(Debug, Clone)]
pub struct Ddm {
    pub min_instances: u64,
    n: u64,
    p: f64,
    s: f64,
    p_min: f64,
    s_min: f64,
    ps_min: f64,
    status: PredictorStatus,
}

impl Default for Ddm {
    fn default() -> Self {
        Ddm::new(30)
    }
}

impl Ddm {
    pub fn new(min_instances: u64) -> Self {
        Ddm {
            min_instances,
            n: 0,
            p: 1.0,
            s: 0.0,
            p_min: f64::INFINITY,
            s_min: f64::INFINITY,
            ps_min: f64::INFINITY,
            status: PredictorStatus::Stable,
        }
    }

    pub fn error_rate(&self) -> f64 {
        self.p
    }
}

impl DriftDetector for Ddm {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Ddm
    }

    fn update(&mut self, x: f64) -> Result<PredictorStatus> {
        let error = f64::from(u8::from(check_bit(x)?));
        self.n += 1;
        self.p += (error - self.p) / self.n as f64;
        self.s = (self.p * (1.0 - self.p) / self.n as f64).sqrt();
        if self.n < self.min_instances {
            self.status = PredictorStatus::Stable;
            return Ok(self.status);
        }
        if self.p + self.s <= self.ps_min {
            self.p_min = self.p;
            self.s_min = self.s;
            self.ps_min = self.p + self.s;
        }
        self.status = ddm_level(self.p + self.s, self.p_min, self.s_min);
        if self.status == PredictorStatus::Drift {
            self.reset();
            self.status = PredictorStatus::Drift;
        }
        Ok(self.status)
    }

    fn status(&self) -> PredictorStatus {
        self.status
    }

    fn reset(&mut self) {
        *self = Ddm::new(self.min_instances);
    }

    fn n_observed(&self) -> u64 {
        self.n
    }
}

// ---------------------------------------------------------------------------

/// Early Drift Detection Method over distances between consecutive errors.
#[derive(Debug, Clone)]
pub struct Eddm {
    pub alpha: f64,
    pub beta: f64,
    pub min_errors: u64,
    n: u64,
    n_errors: u64,
    last_error_at: u64,
    mean: f64,
    m2: f64,
    max_level: f64,
    status: PredictorStatus,
}

impl Default for Eddm {
    fn default() -> Self {
        Eddm::new(0.95, 0.90, 30)
    }
}

impl Eddm {
    pub fn new(alpha: f64, beta: f64, min_errors: u64) -> Self {
        Eddm {
            alpha,
            beta,
            min_errors,
            n: 0,
            n_errors: 0,
            last_error_at: 0,
            mean: 0.0,
            m2: 0.0,
            max_level: 0.0,
            status: PredictorStatus::Stable,
        }
    }

    /// Mean distance between errors observed so far.
    pub fn mean_distance(&self) -> f64 {
        self.mean
    }
}

impl DriftDetector for Eddm {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Eddm
    }

    fn update(&mut self, x: f64) -> Result<PredictorStatus> {
        let error = check_bit(x)?;
        self.n += 1;
        self.status = PredictorStatus::Stable;
        if !error {
            return Ok(self.status);
        }
        self.n_errors += 1;
        let distance = (self.n - self.last_error_at) as f64;
        self.last_error_at = self.n;
        let old_mean = self.mean;
        self.mean += (distance - self.mean) / self.n_errors as f64;
        self.m2 += (distance - self.mean) * (distance - old_mean);
        let std = (self.m2 / self.n_errors as f64).sqrt();
        let level = self.mean + 2.0 * std;
        if self.n_errors < self.min_errors {
            return Ok(self.status);
        }
        if level > self.max_level {
            self.max_level = level;
            return Ok(self.status);
        }
        let ratio = level / self.max_level;
        self.status = if ratio < self.beta {
            PredictorStatus::Drift
        } else if ratio < self.alpha {
            PredictorStatus::Warning
        } else {
            PredictorStatus::Stable
        };
        if self.status == PredictorStatus::Drift {
            self.reset();
            self.status = PredictorStatus::Drift;
        }
        Ok(self.status)
    }

    fn status(&self) -> PredictorStatus {
        self.status
    }

    fn reset(&mut self) {
        *self = Eddm::new(self.alpha, self.beta, self.min_errors);
    }

    fn n_observed(&self) -> u64 {
        self.n
    }
}

// ---------------------------------------------------------------------------

/// Cut threshold for sub-windows of `n0` and `n1` samples inside a window of
/// `n` samples: `sqrt(ln(4n/δ) / 2m)` with `m = 1/(1/n0 + 1/n1)`.
pub fn adwin_cut_threshold(n0: f64, n1: f64, delta: f64, n: f64) -> f64 {
    let m = 1.0 / (1.0 / n0 + 1.0 / n1);
    let delta_prime = delta / n;
    ((4.0 / delta_prime).ln() / (2.0 * m)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bucket {
    total: f64,
    count: u64,
}

/// Adaptive windowing over an exponential bucket histogram.
#[derive(Debug, Clone)]
pub struct Adwin {
    pub delta: f64,
    pub max_buckets: usize,
    /// Smallest sub-window on either side of a tested split.
    pub min_side: u64,
    /// `rows[i]` holds buckets of `2^i` samples, newest at the front.
    rows: Vec<VecDeque<Bucket>>,
    total: f64,
    width: u64,
    n: u64,
    n_cuts: u64,
    status: PredictorStatus,
}

impl Default for Adwin {
    fn default() -> Self {
        Adwin::new(0.002)
    }
}

impl Adwin {
    pub fn new(delta: f64) -> Self {
        Adwin {
            delta,
            max_buckets: 5,
            min_side: 5,
            rows: Vec::new(),
            total: 0.0,
            width: 0,
            n: 0,
            n_cuts: 0,
            status: PredictorStatus::Stable,
        }
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    /// Mean of the current window (0 when empty).
    pub fn mean(&self) -> f64 {
        if self.width == 0 {
            0.0
        } else {
            self.total / self.width as f64
        }
    }

    pub fn n_cuts(&self) -> u64 {
        self.n_cuts
    }

    pub fn n_buckets(&self) -> usize {
        self.rows.iter().map(VecDeque::len).sum()
    }

    fn insert(&mut self, x: f64) {
        if self.rows.is_empty() {
            self.rows.push(VecDeque::new());
        }
        self.rows[0].push_front(Bucket { total: x, count: 1 });
        self.width += 1;
        self.total += x;
        let mut i = 0;
        while i < self.rows.len() {
            if self.rows[i].len() <= self.max_buckets {
                break;
            }
            let a = self.rows[i].pop_back().expect("row overfull");
            let b = self.rows[i].pop_back().expect("row overfull");
            let merged = Bucket {
                total: a.total + b.total,
                count: a.count + b.count,
            };
            if i + 1 == self.rows.len() {
                self.rows.push(VecDeque::new());
            }
            self.rows[i + 1].push_front(merged);
            i += 1;
        }
    }

    /// Oldest-first bucket boundaries; returns the size of the older
    /// sub-window at the first boundary where a cut is warranted.
    fn find_cut(&self) -> Option<u64> {
        let n = self.width as f64;
        let mut n0 = 0u64;
        let mut s0 = 0.0;
        for row in self.rows.iter().rev() {
            for b in row.iter().rev() {
                n0 += b.count;
                s0 += b.total;
                let n1 = self.width - n0;
                if n1 < self.min_side {
                    return None;
                }
                if n0 < self.min_side {
                    continue;
                }
                let mu0 = s0 / n0 as f64;
                let mu1 = (self.total - s0) / n1 as f64;
                if (mu0 - mu1).abs() >= adwin_cut_threshold(n0 as f64, n1 as f64, self.delta, n) {
                    return Some(n0);
                }
            }
        }
        None
    }

    fn drop_oldest(&mut self, mut count: u64) {
        while count > 0 {
            let row = self
                .rows
                .iter_mut()
                .rev()
                .find(|r| !r.is_empty())
                .expect("window holds at least `count` samples");
            let b = row.pop_back().expect("nonempty row");
            debug_assert!(b.count <= count, "cuts fall on bucket boundaries");
            count -= b.count;
            self.width -= b.count;
            self.total -= b.total;
        }
        while self.rows.last().is_some_and(VecDeque::is_empty) {
            self.rows.pop();
        }
        if self.width == 0 {
            self.total = 0.0;
        }
    }
}

impl DriftDetector for Adwin {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Adwin
    }

    fn update(&mut self, x: f64) -> Result<PredictorStatus> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::DetectorInput(x));
        }
        self.n += 1;
        self.insert(x);
        let mut cut = false;
        while let Some(n0) = self.find_cut() {
            self.drop_oldest(n0);
            cut = true;
        }
        if cut {
            self.n_cuts += 1;
        }
        self.status = if cut {
            PredictorStatus::Drift
        } else {
            PredictorStatus::Stable
        };
        Ok(self.status)
    }

    fn status(&self) -> PredictorStatus {
        self.status
    }

    fn reset(&mut self) {
        let (max_buckets, min_side) = (self.max_buckets, self.min_side);
        *self = Adwin::new(self.delta);
        self.max_buckets = max_buckets;
        self.min_side = min_side;
    }

    fn n_observed(&self) -> u64 {
        self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bernoulli_stream(seed: u64, parts: &[(usize, f64)]) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        parts
            .iter()
            .flat_map(|&(n, p)| (0..n).map(move |_| p).collect::<Vec<_>>())
            .map(|p| f64::from(u8::from(rng.random::<f64>() < p)))
            .collect()
    }

    fn first_drift(det: &mut dyn DriftDetector, xs: &[f64], from: usize) -> Option<usize> {
        let mut hit = None;
        for (i, &x) in xs.iter().enumerate() {
            if det.update(x).unwrap() == PredictorStatus::Drift && i >= from && hit.is_none() {
                hit = Some(i);
            }
        }
        hit
    }

    #[test]
    fn page_hinkley_constant_stream_is_stable() {
        let mut ph = PageHinkley::default();
        for _ in 0..10_000 {
            assert_eq!(ph.update(0.5).unwrap(), PredictorStatus::Stable);
        }
    }

    #[test]
    fn page_hinkley_detects_error_rate_step() {
        let xs = bernoulli_stream(3, &[(1000, 0.1), (1000, 0.9)]);
        let mut ph = PageHinkley::default();
        let at = first_drift(&mut ph, &xs, 1000).expect("drift");
        assert!(at - 1000 <= 200, "alarm {} samples after the step", at - 1000);
    }

    #[test]
    fn page_hinkley_infinite_lambda_never_drifts() {
        let xs = bernoulli_stream(3, &[(1000, 0.1), (1000, 0.9)]);
        let mut ph = PageHinkley::new(0.005, f64::INFINITY, 30);
        assert!(xs
            .iter()
            .all(|&x| ph.update(x).unwrap() == PredictorStatus::Stable));
    }

    #[test]
    fn ddm_threshold_arithmetic() {
        assert_eq!(ddm_level(0.17, 0.1, 0.03), PredictorStatus::Warning);
        assert_eq!(ddm_level(0.20, 0.1, 0.03), PredictorStatus::Drift);
        assert_eq!(ddm_level(0.15, 0.1, 0.03), PredictorStatus::Stable);
    }

    #[test]
    fn ddm_error_free_stream_is_stable() {
        let mut ddm = Ddm::default();
        for _ in 0..10_000 {
            assert_eq!(ddm.update(0.0).unwrap(), PredictorStatus::Stable);
        }
        assert!(ddm.update(0.5).is_err());
    }

    #[test]
    fn ddm_detects_error_rate_step() {
        let xs = bernoulli_stream(8, &[(2000, 0.1), (1000, 0.5)]);
        let mut ddm = Ddm::default();
        let at = first_drift(&mut ddm, &xs, 2000).expect("drift");
        assert!(at - 2000 <= 500);
    }

    #[test]
    fn eddm_constant_spacing_is_stable() {
        let mut eddm = Eddm::default();
        for i in 1..=5000u32 {
            let x = if i % 10 == 0 { 1.0 } else { 0.0 };
            assert_eq!(eddm.update(x).unwrap(), PredictorStatus::Stable);
        }
        assert_eq!(eddm.mean_distance(), 10.0);
    }

    fn spaced_errors(gaps: &[(usize, u64)]) -> Vec<f64> {
        let mut xs = Vec::new();
        for &(count, gap) in gaps {
            for _ in 0..count {
                xs.extend(std::iter::repeat_n(0.0, gap as usize - 1));
                xs.push(1.0);
            }
        }
        xs
    }

    #[test]
    fn eddm_detects_shrinking_error_distance() {
        let xs = spaced_errors(&[(200, 10), (600, 2)]);
        let step = 200 * 10;
        let mut eddm = Eddm::default();
        let at = first_drift(&mut eddm, &xs, step).expect("drift");
        // With a fraction f of gap-2 errors the level is
        // 10 - 8f + 16 sqrt(f(1-f)), which peaks at f ~ 0.276 (14.94) and
        // drops below 0.9 of that near f ~ 0.56, i.e. ~255 short gaps.
        let short_gaps = (at - step).div_ceil(2);
        let f_peak = (1.0 - 1.0 / 5f64.sqrt()) / 2.0;
        let level = |f: f64| 10.0 - 8.0 * f + 16.0 * (f * (1.0 - f)).sqrt();
        let f = short_gaps as f64 / (200.0 + short_gaps as f64);
        assert!(level(f) < 0.9 * level(f_peak));
        let f_prev = (short_gaps - 1) as f64 / (199.0 + short_gaps as f64);
        assert!(level(f_prev) >= 0.9 * level(f_peak) - 0.05);
    }

    #[test]
    fn eddm_zero_thresholds_never_alarm() {
        let xs = spaced_errors(&[(200, 10), (200, 2)]);
        let mut eddm = Eddm::new(0.0, 0.0, 30);
        assert!(xs
            .iter()
            .all(|&x| eddm.update(x).unwrap() == PredictorStatus::Stable));
    }

    #[test]
    fn adwin_threshold_closed_form() {
        let eps = adwin_cut_threshold(100.0, 100.0, 0.002, 200.0);
        let expected = ((4.0f64 * 200.0 / 0.002).ln() / 100.0).sqrt();
        assert!((eps - expected).abs() < 1e-15);
        assert!((eps - 0.359).abs() < 5e-4, "{eps}");
    }

    #[test]
    fn adwin_rejects_out_of_range() {
        let mut a = Adwin::default();
        assert!(a.update(1.5).is_err());
        assert!(a.update(-0.1).is_err());
    }

    #[test]
    fn adwin_constant_stream_never_cuts() {
        let mut a = Adwin::default();
        for _ in 0..20_000 {
            assert_eq!(a.update(1.0).unwrap(), PredictorStatus::Stable);
        }
        assert_eq!(a.width(), 20_000);
        assert!(a.n_buckets() < 100, "histogram is logarithmic");
    }

    #[test]
    fn adwin_detects_mean_step_and_keeps_suffix() {
        let xs = bernoulli_stream(1, &[(2000, 0.2), (2000, 0.8)]);
        let mut a = Adwin::default();
        let mut first = None;
        for (i, &x) in xs.iter().enumerate() {
            let before = a.width();
            if a.update(x).unwrap() == PredictorStatus::Drift {
                assert!(a.width() <= before + 1);
                first.get_or_insert(i);
            }
        }
        let at = first.expect("drift");
        assert!((2000..=2300).contains(&at), "{at}");
        assert!((a.mean() - 0.8).abs() < 0.05, "{}", a.mean());
        assert!(a.width() < 2100);
    }

    #[test]
    fn kinds_round_trip_names() {
        for k in DetectorKind::ALL {
            assert_eq!(k.name().parse::<DetectorKind>().unwrap(), k);
            assert_eq!(k.build().kind(), k);
        }
    }

    #[test]
    fn outcome_conventions() {
        let mut a = Adwin::default();
        a.observe_outcome(true);
        assert_eq!(a.mean(), 1.0);
        let mut d = Ddm::default();
        d.observe_outcome(false);
        assert_eq!(d.error_rate(), 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn reset_matches_fresh_detector(
            prefix in prop::collection::vec(prop::bool::weighted(0.3), 0..400),
            suffix in prop::collection::vec(prop::bool::weighted(0.3), 0..400),
        ) {
            for kind in DetectorKind::ALL {
                let mut used = kind.build();
                for &b in &prefix {
                    used.update(f64::from(u8::from(b))).unwrap();
                }
                used.reset();
                let mut fresh = kind.build();
                for &b in &suffix {
                    let x = f64::from(u8::from(b));
                    prop_assert_eq!(used.update(x).unwrap(), fresh.update(x).unwrap());
                }
            }
        }

        #[test]
        fn adwin_window_is_a_suffix(bits in prop::collection::vec(prop::bool::weighted(0.5), 1..600)) {
            let mut a = Adwin::default();
            let xs: Vec<f64> = bits.iter().map(|&b| f64::from(u8::from(b))).collect();
            for (i, &x) in xs.iter().enumerate() {
                a.update(x).unwrap();
                let w = a.width() as usize;
                let tail: f64 = xs[i + 1 - w..=i].iter().sum();
                prop_assert!((tail - a.mean() * w as f64).abs() < 1e-9);
            }
        }
    }
}
