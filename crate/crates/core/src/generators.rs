//! Seedable synthetic stream generators and a concept-drift composition
//! operator.
//!
//! Every generator is a [`StreamSource`] with an unbounded output. Cloning a
//! generator forks an identical sub-stream.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::types::{Feature, FeatureSchema, Instance, StreamSource};
use crate::{sub_seed, Error, Result};

fn binary_classes() -> Vec<String> {
    vec!["0".into(), "1".into()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Agrawal,
    Stagger,
    Sea,
    Led,
    Hyperplane,
    Rbf,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Agrawal,
        Family::Stagger,
        Family::Sea,
        Family::Led,
        Family::Hyperplane,
        Family::Rbf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Agrawal => "agrawal",
            Family::Stagger => "stagger",
            Family::Sea => "sea",
            Family::Led => "led",
            Family::Hyperplane => "hyperplane",
            Family::Rbf => "rbf",
        }
    }

    /// Number of selectable concepts.
    pub fn n_concepts(self) -> usize {
        match self {
            Family::Agrawal => 10,
            Family::Stagger => 3,
            Family::Sea => 4,
            Family::Led => 8,
            // concept selects an independent initial hyperplane / centroid layout
            Family::Hyperplane | Family::Rbf => usize::MAX,
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Family::Agrawal => "9 features (6 numeric, 3 categorical), 2 classes, concepts 0-9 select the label function",
            Family::Stagger => "3 categorical features, 2 classes, concepts 0-2",
            Family::Sea => "3 numeric features in [0,10], 2 classes, concepts 0-3 (thresholds 8, 9, 7, 9.5); params: noise",
            Family::Led => "24 binary features (7 segments + 17 irrelevant), 10 classes; concept k swaps k segments with irrelevant columns; params: noise",
            Family::Hyperplane => "10 numeric features in [0,1], 2 classes, rotating hyperplane; params: n_drift, magnitude, reversal, noise",
            Family::Rbf => "10 numeric features, 2 classes, moving gaussian centroids; params: n_centroids, speed, max_stddev",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::param("family", format!("unknown generator family `{s}`")))
    }
}

/// Optional family-specific knobs; `None` means the family default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub noise: Option<f64>,
    pub n_drift: Option<usize>,
    pub magnitude: Option<f64>,
    pub reversal: Option<f64>,
    pub n_centroids: Option<usize>,
    pub speed: Option<f64>,
    pub max_stddev: Option<f64>,
}

/// Builds a boxed generator for `family`.
pub fn build_generator(
    family: Family,
    concept: usize,
    seed: u64,
    params: &GeneratorParams,
) -> Result<Box<dyn StreamSource>> {
    Ok(match family {
        Family::Agrawal => Box::new(AgrawalGenerator::new(concept, seed)?),
        Family::Stagger => Box::new(StaggerGenerator::new(concept, seed)?),
        Family::Sea => Box::new(SeaGenerator::new(concept, seed)?.with_noise(params.noise.unwrap_or(0.0))?),
        Family::Led => Box::new(LedGenerator::new(concept, seed)?.with_noise(params.noise.unwrap_or(0.1))?),
        Family::Hyperplane => {
            let mut cfg = HyperplaneConfig::default();
            if let Some(k) = params.n_drift {
                cfg.n_drift = k;
            }
            if let Some(m) = params.magnitude {
                cfg.magnitude = m;
            }
            if let Some(r) = params.reversal {
                cfg.reversal = r;
            }
            if let Some(n) = params.noise {
                cfg.noise = n;
            }
            Box::new(HyperplaneGenerator::new(concept, seed, cfg)?)
        }
        Family::Rbf => {
            let mut cfg = RbfConfig::default();
            if let Some(n) = params.n_centroids {
                cfg.n_centroids = n;
            }
            if let Some(s) = params.speed {
                cfg.speed = s;
            }
            if let Some(s) = params.max_stddev {
                cfg.max_stddev = s;
            }
            Box::new(RbfGenerator::new(concept, seed, cfg)?)
        }
    })
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::param(name, format!("{p} is not in [0, 1)")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Agrawal

/// Raw Agrawal attributes; categorical values are stored as their natural
/// codes (`car` in 1..=20).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgrawalRecord {
    pub salary: f64,
    pub commission: f64,
    pub age: u32,
    pub elevel: u32,
    pub car: u32,
    pub zipcode: u32,
    pub hvalue: f64,
    pub hyears: u32,
    pub loan: f64,
}

impl AgrawalRecord {
    fn sample<R: Rng>(rng: &mut R) -> Self {
        let salary = 20_000.0 + 130_000.0 * rng.random::<f64>();
        let commission = if salary >= 75_000.0 {
            0.0
        } else {
            10_000.0 + 65_000.0 * rng.random::<f64>()
        };
        let age = 20 + rng.random_range(0..61);
        let elevel = rng.random_range(0..5);
        let car = 1 + rng.random_range(0..20);
        let zipcode = rng.random_range(0..9);
        let hvalue = (9.0 - f64::from(zipcode)) * 100_000.0 * (0.5 + rng.random::<f64>());
        let hyears = 1 + rng.random_range(0..30);
        let loan = rng.random::<f64>() * 500_000.0;
        AgrawalRecord {
            salary,
            commission,
            age,
            elevel,
            car,
            zipcode,
            hvalue,
            hyears,
            loan,
        }
    }

    fn to_features(self) -> Vec<f64> {
        vec![
            self.salary,
            self.commission,
            f64::from(self.age),
            f64::from(self.elevel),
            f64::from(self.car - 1),
            f64::from(self.zipcode),
            self.hvalue,
            f64::from(self.hyears),
            self.loan,
        ]
    }
}

fn within(lo: f64, v: f64, hi: f64) -> bool {
    lo <= v && v <= hi
}

/// Classic Agrawal label functions; class 0 is "group A".
pub fn agrawal_label(function: usize, r: &AgrawalRecord) -> Result<usize> {
    let group_a = |b: bool| if b { 0 } else { 1 };
    let age = r.age;
    let s = r.salary;
    let e = r.elevel;
    let loan = r.loan;
    let label = match function {
        0 => group_a(!(40..60).contains(&age)),
        1 => group_a(if age < 40 {
            within(50_000.0, s, 100_000.0)
        } else if age < 60 {
            within(75_000.0, s, 125_000.0)
        } else {
            within(25_000.0, s, 75_000.0)
        }),
        2 => group_a(if age < 40 {
            e <= 1
        } else if age < 60 {
            (1..=3).contains(&e)
        } else {
            (2..=4).contains(&e)
        }),
        3 => group_a(if age < 40 {
            if e <= 1 {
                within(25_000.0, s, 75_000.0)
            } else {
                within(50_000.0, s, 100_000.0)
            }
        } else if age < 60 {
            if (1..=3).contains(&e) {
                within(50_000.0, s, 100_000.0)
            } else {
                within(75_000.0, s, 125_000.0)
            }
        } else if (2..=4).contains(&e) {
            within(50_000.0, s, 100_000.0)
        } else {
            within(25_000.0, s, 75_000.0)
        }),
        4 => group_a(if age < 40 {
            if within(50_000.0, s, 100_000.0) {
                within(100_000.0, loan, 300_000.0)
            } else {
                within(200_000.0, loan, 400_000.0)
            }
        } else if age < 60 {
            if within(75_000.0, s, 125_000.0) {
                within(200_000.0, loan, 400_000.0)
            } else {
                within(300_000.0, loan, 500_000.0)
            }
        } else if within(25_000.0, s, 75_000.0) {
            within(300_000.0, loan, 500_000.0)
        } else {
            within(100_000.0, loan, 300_000.0)
        }),
        5 => {
            let total = s + r.commission;
            group_a(if age < 40 {
                within(50_000.0, total, 100_000.0)
            } else if age < 60 {
                within(75_000.0, total, 125_000.0)
            } else {
                within(25_000.0, total, 75_000.0)
            })
        }
        6 => group_a(2.0 * (s + r.commission) / 3.0 - loan / 5.0 - 20_000.0 > 0.0),
        7 => group_a(2.0 * (s + r.commission) / 3.0 - 5_000.0 * f64::from(e) - 20_000.0 > 0.0),
        8 => group_a(
            2.0 * (s + r.commission) / 3.0 - 5_000.0 * f64::from(e) - loan / 5.0 - 10_000.0 > 0.0,
        ),
        9 => {
            let equity = if r.hyears >= 20 {
                r.hvalue * (f64::from(r.hyears) - 20.0) / 10.0
            } else {
                0.0
            };
            group_a(
                2.0 * (s + r.commission) / 3.0 - 5_000.0 * f64::from(e) + equity / 5.0 - 10_000.0
                    > 0.0,
            )
        }
        _ => {
            return Err(Error::InvalidConcept {
                family: "agrawal",
                concept: function,
            })
        }
    };
    Ok(label)
}

pub fn agrawal_schema() -> FeatureSchema {
    FeatureSchema {
        features: vec![
            Feature::numeric("salary"),
            Feature::numeric("commission"),
            Feature::numeric("age"),
            Feature::categorical("elevel", (0..5).map(|i| format!("level{i}"))),
            Feature::categorical("car", (1..=20).map(|i| format!("car{i}"))),
            Feature::categorical("zipcode", (0..9).map(|i| format!("zip{i}"))),
            Feature::numeric("hvalue"),
            Feature::numeric("hyears"),
            Feature::numeric("loan"),
        ],
        label: "class".into(),
        classes: binary_classes(),
    }
}

#[derive(Debug, Clone)]
pub struct AgrawalGenerator {
    function: usize,
    rng: ChaCha8Rng,
    seq: u64,
    schema: FeatureSchema,
}

impl AgrawalGenerator {
    pub fn new(concept: usize, seed: u64) -> Result<Self> {
        if concept >= 10 {
            return Err(Error::InvalidConcept {
                family: "agrawal",
                concept,
            });
        }
        Ok(AgrawalGenerator {
            function: concept,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seq: 0,
            schema: agrawal_schema(),
        })
    }

    /// Next raw record and its label.
    pub fn next_record(&mut self) -> (AgrawalRecord, usize) {
        let r = AgrawalRecord::sample(&mut self.rng);
        let y = agrawal_label(self.function, &r).expect("function index checked at construction");
        (r, y)
    }
}

impl StreamSource for AgrawalGenerator {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        let (r, y) = self.next_record();
        let inst = Instance::labeled(r.to_features(), y, self.seq);
        self.seq += 1;
        Ok(Some(inst))
    }
}

// ---------------------------------------------------------------------------
// STAGGER

pub const STAGGER_SIZES: [&str; 3] = ["small", "medium", "large"];
pub const STAGGER_COLORS: [&str; 3] = ["red", "green", "blue"];
pub const STAGGER_SHAPES: [&str; 3] = ["circle", "square", "triangle"];

/// Label of a STAGGER object given value indices into the constant tables.
pub fn stagger_label(concept: usize, size: usize, color: usize, shape: usize) -> Result<usize> {
    let positive = match concept {
        0 => size == 0 && color == 0,
        1 => color == 1 || shape == 0,
        2 => size == 1 || size == 2,
        _ => {
            return Err(Error::InvalidConcept {
                family: "stagger",
                concept,
            })
        }
    };
    Ok(usize::from(positive))
}

pub fn stagger_schema() -> FeatureSchema {
    FeatureSchema {
        features: vec![
            Feature::categorical("size", STAGGER_SIZES),
            Feature::categorical("color", STAGGER_COLORS),
            Feature::categorical("shape", STAGGER_SHAPES),
        ],
        label: "class".into(),
        classes: binary_classes(),
    }
}

#[derive(Debug, Clone)]
pub struct StaggerGenerator {
    concept: usize,
    rng: ChaCha8Rng,
    seq: u64,
    schema: FeatureSchema,
}

impl StaggerGenerator {
    pub fn new(concept: usize, seed: u64) -> Result<Self> {
        stagger_label(concept, 0, 0, 0)?;
        Ok(StaggerGenerator {
            concept,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seq: 0,
            schema: stagger_schema(),
        })
    }
}

impl StreamSource for StaggerGenerator {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        let size = self.rng.random_range(0..3);
        let color = self.rng.random_range(0..3);
        let shape = self.rng.random_range(0..3);
        let y = stagger_label(self.concept, size, color, shape)?;
        let inst = Instance::labeled(vec![size as f64, color as f64, shape as f64], y, self.seq);
        self.seq += 1;
        Ok(Some(inst))
    }
}

// ---------------------------------------------------------------------------
// SEA

pub const SEA_THRESHOLDS: [f64; 4] = [8.0, 9.0, 7.0, 9.5];

/// Class 1 iff `x1 + x2 <= threshold`; the boundary belongs to class 1.
pub fn sea_label(concept: usize, x1: f64, x2: f64) -> Result<usize> {
    let theta = *SEA_THRESHOLDS.get(concept).ok_or(Error::InvalidConcept {
        family: "sea",
        concept,
    })?;
    Ok(usize::from(x1 + x2 <= theta))
}

pub fn sea_schema() -> FeatureSchema {
    FeatureSchema {
        features: (1..=3).map(|i| Feature::numeric(format!("x{i}"))).collect(),
        label: "class".into(),
        classes: binary_classes(),
    }
}

#[derive(Debug, Clone)]
pub struct SeaGenerator {
    concept: usize,
    noise: f64,
    rng: ChaCha8Rng,
    seq: u64,
    schema: FeatureSchema,
}

impl SeaGenerator {
    pub fn new(concept: usize, seed: u64) -> Result<Self> {
        sea_label(concept, 0.0, 0.0)?;
        Ok(SeaGenerator {
            concept,
            noise: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seq: 0,
            schema: sea_schema(),
        })
    }

    /// Probability of flipping each emitted label.
    pub fn with_noise(mut self, noise: f64) -> Result<Self> {
        check_probability("noise", noise)?;
        self.noise = noise;
        Ok(self)
    }
}

impl StreamSource for SeaGenerator {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        let x: Vec<f64> = (0..3).map(|_| 10.0 * self.rng.random::<f64>()).collect();
        let mut y = sea_label(self.concept, x[0], x[1])?;
        if self.noise > 0.0 && self.rng.random::<f64>() < self.noise {
            y = 1 - y;
        }
        let inst = Instance::labeled(x, y, self.seq);
        self.seq += 1;
        Ok(Some(inst))
    }
}

// ---------------------------------------------------------------------------
// LED

/// Seven-segment encoding, segments ordered top, top-left, top-right,
/// middle, bottom-left, bottom-right, bottom.
pub const LED_SEGMENTS: [[u8; 7]; 10] = [
    [1, 1, 1, 0, 1, 1, 1],
    [0, 0, 1, 0, 0, 1, 0],
    [1, 0, 1, 1, 1, 0, 1],
    [1, 0, 1, 1, 0, 1, 1],
    [0, 1, 1, 1, 0, 1, 0],
    [1, 1, 0, 1, 0, 1, 1],
    [1, 1, 0, 1, 1, 1, 1],
    [1, 0, 1, 0, 0, 1, 0],
    [1, 1, 1, 1, 1, 1, 1],
    [1, 1, 1, 1, 0, 1, 1],
];

pub const LED_RELEVANT: usize = 7;
pub const LED_IRRELEVANT: usize = 17;

pub fn led_schema() -> FeatureSchema {
    FeatureSchema {
        features: (0..LED_RELEVANT + LED_IRRELEVANT)
            .map(|i| Feature::categorical(format!("att{i}"), ["off", "on"]))
            .collect(),
        label: "digit".into(),
        classes: (0..10).map(|d| d.to_string()).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct LedGenerator {
    swapped: usize,
    noise: f64,
    rng: ChaCha8Rng,
    seq: u64,
    schema: FeatureSchema,
}

impl LedGenerator {
    /// `concept` is the number of segment columns swapped with irrelevant
    /// columns (0 = canonical layout).
    pub fn new(concept: usize, seed: u64) -> Result<Self> {
        if concept > LED_RELEVANT {
            return Err(Error::InvalidConcept {
                family: "led",
                concept,
            });
        }
        Ok(LedGenerator {
            swapped: concept,
            noise: 0.1,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seq: 0,
            schema: led_schema(),
        })
    }

    pub fn with_noise(mut self, noise: f64) -> Result<Self> {
        check_probability("noise", noise)?;
        self.noise = noise;
        Ok(self)
    }

    /// Draws a digit and its 24 attribute bits before column swapping.
    fn draw(&mut self) -> (usize, [u8; 24]) {
        let digit = self.rng.random_range(0..10);
        let mut bits = [0u8; 24];
        for (j, &seg) in LED_SEGMENTS[digit].iter().enumerate() {
            let flip = self.rng.random::<f64>() < self.noise;
            bits[j] = if flip { 1 - seg } else { seg };
        }
        for b in bits.iter_mut().skip(LED_RELEVANT) {
            *b = u8::from(self.rng.random::<bool>());
        }
        (digit, bits)
    }
}

impl StreamSource for LedGenerator {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        let (digit, mut bits) = self.draw();
        for j in 0..self.swapped {
            bits.swap(j, LED_RELEVANT + j);
        }
        let inst = Instance::labeled(bits.iter().map(|&b| f64::from(b)).collect(), digit, self.seq);
        self.seq += 1;
        Ok(Some(inst))
    }
}

// ---------------------------------------------------------------------------
// Rotating hyperplane

#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneConfig {
    pub n_features: usize,
    /// Number of weights that move.
    pub n_drift: usize,
    /// Weight change per sample.
    pub magnitude: f64,
    /// Probability per sample of reversing a drifting weight's direction.
    pub reversal: f64,
    pub noise: f64,
}

impl Default for HyperplaneConfig {
    fn default() -> Self {
        HyperplaneConfig {
            n_features: 10,
            n_drift: 2,
            magnitude: 0.001,
            reversal: 0.1,
            noise: 0.0,
        }
    }
}

/// Class 1 iff `w·x >= ½ Σ w`.
pub fn hyperplane_label(weights: &[f64], x: &[f64]) -> usize {
    let dot: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum();
    let theta = 0.5 * weights.iter().sum::<f64>();
    usize::from(dot >= theta)
}

#[derive(Debug, Clone)]
pub struct HyperplaneGenerator {
    cfg: HyperplaneConfig,
    weights: Vec<f64>,
    direction: Vec<f64>,
    rng: ChaCha8Rng,
    seq: u64,
    schema: FeatureSchema,
}

impl HyperplaneGenerator {
    /// `concept` selects an independent initial orientation.
    pub fn new(concept: usize, seed: u64, cfg: HyperplaneConfig) -> Result<Self> {
        let mut wrng =
            ChaCha8Rng::seed_from_u64(sub_seed(seed, &format!("hyperplane-weights-{concept}")));
        let weights = (0..cfg.n_features).map(|_| wrng.random::<f64>()).collect();
        Self::with_weights(weights, seed, cfg)
    }

    pub fn with_weights(weights: Vec<f64>, seed: u64, cfg: HyperplaneConfig) -> Result<Self> {
        if weights.len() != cfg.n_features || cfg.n_features == 0 {
            return Err(Error::param("n_features", "weight vector length mismatch"));
        }
        if cfg.n_drift > cfg.n_features {
            return Err(Error::param("n_drift", "more drifting weights than features"));
        }
        if cfg.magnitude < 0.0 {
            return Err(Error::param("magnitude", "must be nonnegative"));
        }
        check_probability("reversal", cfg.reversal)?;
        check_probability("noise", cfg.noise)?;
        let schema = FeatureSchema {
            features: (0..cfg.n_features)
                .map(|i| Feature::numeric(format!("x{i}")))
                .collect(),
            label: "class".into(),
            classes: binary_classes(),
        };
        Ok(HyperplaneGenerator {
            direction: vec![1.0; cfg.n_features],
            cfg,
            weights,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seq: 0,
            schema,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl StreamSource for HyperplaneGenerator {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        let x: Vec<f64> = (0..self.cfg.n_features)
            .map(|_| self.rng.random::<f64>())
            .collect();
        let mut y = hyperplane_label(&self.weights, &x);
        if self.cfg.noise > 0.0 && self.rng.random::<f64>() < self.cfg.noise {
            y = 1 - y;
        }
        for i in 0..self.cfg.n_drift {
            self.weights[i] += self.direction[i] * self.cfg.magnitude;
            if self.rng.random::<f64>() < self.cfg.reversal {
                self.direction[i] = -self.direction[i];
            }
        }
        let inst = Instance::labeled(x, y, self.seq);
        self.seq += 1;
        Ok(Some(inst))
    }
}

// ---------------------------------------------------------------------------
// Random RBF with moving centroids

#[derive(Debug, Clone, PartialEq)]
pub struct Centroid {
    pub center: Vec<f64>,
    pub class: usize,
    pub stddev: f64,
    pub weight: f64,
    /// Unit vector the centroid travels along.
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbfConfig {
    pub n_features: usize,
    pub n_classes: usize,
    pub n_centroids: usize,
    /// Distance travelled by each centroid per sample.
    pub speed: f64,
    /// Per-centroid stddev is drawn uniformly from `[0, max_stddev)`.
    pub max_stddev: f64,
}

impl Default for RbfConfig {
    fn default() -> Self {
        RbfConfig {
            n_features: 10,
            n_classes: 2,
            n_centroids: 50,
            speed: 0.0001,
            max_stddev: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RbfGenerator {
    centroids: Vec<Centroid>,
    cumulative_weights: Vec<f64>,
    speed: f64,
    rng: ChaCha8Rng,
    seq: u64,
    schema: FeatureSchema,
}

impl RbfGenerator {
    /// Centroid `i` carries class `i mod n_classes`; `concept` selects an
    /// independent centroid layout.
    pub fn new(concept: usize, seed: u64, cfg: RbfConfig) -> Result<Self> {
        if cfg.n_centroids < cfg.n_classes {
            return Err(Error::param("n_centroids", "fewer centroids than classes"));
        }
        if cfg.max_stddev < 0.0 {
            return Err(Error::param("max_stddev", "must be nonnegative"));
        }
        let mut mrng =
            ChaCha8Rng::seed_from_u64(sub_seed(seed, &format!("rbf-centroids-{concept}")));
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let centroids = (0..cfg.n_centroids)
            .map(|i| {
                let center = (0..cfg.n_features).map(|_| mrng.random::<f64>()).collect();
                let mut direction: Vec<f64> =
                    (0..cfg.n_features).map(|_| normal.sample(&mut mrng)).collect();
                let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
                direction.iter_mut().for_each(|d| *d /= norm);
                Centroid {
                    center,
                    class: i % cfg.n_classes,
                    stddev: cfg.max_stddev * mrng.random::<f64>(),
                    weight: mrng.random::<f64>(),
                    direction,
                }
            })
            .collect();
        Self::from_centroids(centroids, cfg.n_classes, cfg.speed, seed)
    }

    pub fn from_centroids(
        centroids: Vec<Centroid>,
        n_classes: usize,
        speed: f64,
        seed: u64,
    ) -> Result<Self> {
        let d = centroids
            .first()
            .map(|c| c.center.len())
            .ok_or_else(|| Error::param("n_centroids", "no centroids"))?;
        if centroids.iter().any(|c| c.center.len() != d || c.class >= n_classes) {
            return Err(Error::param("centroids", "inconsistent dimension or class"));
        }
        if speed < 0.0 {
            return Err(Error::param("speed", "must be nonnegative"));
        }
        let mut acc = 0.0;
        let cumulative_weights: Vec<f64> = centroids
            .iter()
            .map(|c| {
                acc += c.weight.max(0.0);
                acc
            })
            .collect();
        if acc <= 0.0 {
            return Err(Error::param("weight", "all centroid weights are zero"));
        }
        let schema = FeatureSchema {
            features: (0..d).map(|i| Feature::numeric(format!("x{i}"))).collect(),
            label: "class".into(),
            classes: (0..n_classes).map(|c| c.to_string()).collect(),
        };
        Ok(RbfGenerator {
            centroids,
            cumulative_weights,
            speed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seq: 0,
            schema,
        })
    }

    pub fn centroids(&self) -> &[Centroid] {
        &self.centroids
    }

    fn pick(&mut self) -> usize {
        let total = *self.cumulative_weights.last().expect("nonempty");
        let r = self.rng.random::<f64>() * total;
        self.cumulative_weights
            .iter()
            .position(|&c| r < c)
            .unwrap_or(self.centroids.len() - 1)
    }

    fn advance_centroids(&mut self) {
        if self.speed == 0.0 {
            return;
        }
        for c in &mut self.centroids {
            for (pos, dir) in c.center.iter_mut().zip(c.direction.iter_mut()) {
                *pos += *dir * self.speed;
                // reflect off the unit-cube walls
                if *pos > 1.0 {
                    *pos = 2.0 - *pos;
                    *dir = -*dir;
                } else if *pos < 0.0 {
                    *pos = -*pos;
                    *dir = -*dir;
                }
            }
        }
    }
}

impl StreamSource for RbfGenerator {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        let idx = self.pick();
        let c = &self.centroids[idx];
        let x: Vec<f64> = if c.stddev > 0.0 {
            let normal = Normal::new(0.0, c.stddev).expect("positive stddev");
            let center = c.center.clone();
            center
                .into_iter()
                .map(|m| m + normal.sample(&mut self.rng))
                .collect()
        } else {
            c.center.clone()
        };
        let y = self.centroids[idx].class;
        self.advance_centroids();
        let inst = Instance::labeled(x, y, self.seq);
        self.seq += 1;
        Ok(Some(inst))
    }
}

// ---------------------------------------------------------------------------
// Drift composition

/// Probability of drawing from the post-drift concept at sample `t`.
pub fn drift_mix_probability(t: f64, position: f64, width: f64) -> f64 {
    1.0 / (1.0 + (-4.0 * (t - position) / width).exp())
}

/// Mixes two sources with a sigmoid transition centred on `position`.
///
/// Only the source actually drawn from advances.
pub struct DriftComposition {
    base: Box<dyn StreamSource>,
    post: Box<dyn StreamSource>,
    position: u64,
    width: u64,
    rng: ChaCha8Rng,
    seq: u64,
}

impl DriftComposition {
    pub fn new(
        base: Box<dyn StreamSource>,
        post: Box<dyn StreamSource>,
        position: u64,
        width: u64,
        seed: u64,
    ) -> Result<Self> {
        if width < 1 {
            return Err(Error::param("width", "must be at least 1"));
        }
        let (a, b) = (base.schema(), post.schema());
        if a.n_features() != b.n_features() || a.n_classes() != b.n_classes() {
            return Err(Error::param(
                "post",
                "post-drift source has a different schema shape",
            ));
        }
        Ok(DriftComposition {
            base,
            post,
            position,
            width,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seq: 0,
        })
    }

    pub fn position(&self) -> u64 {
        self.position
    }
}

impl StreamSource for DriftComposition {
    fn schema(&self) -> &FeatureSchema {
        self.base.schema()
    }

    fn next_instance(&mut self) -> Result<Option<Instance>> {
        let p = drift_mix_probability(self.seq as f64, self.position as f64, self.width as f64);
        let src = if self.rng.random::<f64>() < p {
            &mut self.post
        } else {
            &mut self.base
        };
        let mut inst = src.next_instance()?.ok_or(Error::Exhausted)?;
        inst.seq = self.seq;
        self.seq += 1;
        Ok(Some(inst))
    }
}
