//! Offline learning of the 4x4 fitness matrix.
//!
//! Objects are described by `(d, v, r, c)` tuples which are mapped to the unit
//! cube with every axis oriented so that larger means more informative. The
//! fitness of a tuple `p` is the quadratic form `p M pᵀ`; `M` is stored as
//! `LᵀL` so it is positive semidefinite by construction.
//!
//! Learning maximizes
//!
//! ```text
//! sum_{labels differ} d(pi, pj) - sum_{labels equal} d(pi, pj)
//! ```
//!
//! over unordered pairs, where `d(pi, pj) = (pi - pj) M (pi - pj)ᵀ`, subject to
//! `‖M‖_F <= budget`. The objective is linear in `M`, so without the budget it
//! has no maximum.

mod dataset;
mod persist;

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::informativeness::FeatureTuple;

pub use dataset::{
    parse_dataset_csv, split_holdout, synthetic_heuristic_dataset, two_cluster_dataset, DatasetError,
    LabeledDataset,
};
pub use persist::MatrixFileError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("degenerate range for attribute {attribute}: min {min} >= max {max}")]
    DegenerateRange {
        attribute: &'static str,
        min: f64,
        max: f64,
    },
    #[error("dataset has no tuples labeled {missing}")]
    SingleClassDataset { missing: Label },
    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },
    #[error("non-finite feature at index {index}")]
    NonFiniteFeature { index: usize },
    #[error("invalid learn config: {0}")]
    InvalidConfig(&'static str),
}

/// Object categories as carried in the VDU `label` byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[repr(u8)]
pub enum CategoryCode {
    Car = 0,
    Truck = 1,
    Bus = 2,
    Motorcycle = 3,
    Bicycle = 4,
    Pedestrian = 5,
    TrafficLight = 6,
    StopSign = 7,
    Obstacle = 8,
}

impl CategoryCode {
    pub const ALL: [CategoryCode; 9] = [
        CategoryCode::Car,
        CategoryCode::Truck,
        CategoryCode::Bus,
        CategoryCode::Motorcycle,
        CategoryCode::Bicycle,
        CategoryCode::Pedestrian,
        CategoryCode::TrafficLight,
        CategoryCode::StopSign,
        CategoryCode::Obstacle,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(b: u8) -> Option<Self> {
        Self::ALL.get(b as usize).copied()
    }

    /// Vulnerability rank: pedestrian 3, cyclist 2, vehicle 1, static 0.
    pub fn risk_rank(self) -> f64 {
        match self {
            CategoryCode::Pedestrian => 3.0,
            CategoryCode::Bicycle => 2.0,
            CategoryCode::Car | CategoryCode::Truck | CategoryCode::Bus | CategoryCode::Motorcycle => 1.0,
            CategoryCode::TrafficLight | CategoryCode::StopSign | CategoryCode::Obstacle => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CategoryCode::Car => "car",
            CategoryCode::Truck => "truck",
            CategoryCode::Bus => "bus",
            CategoryCode::Motorcycle => "motorcycle",
            CategoryCode::Bicycle => "bicycle",
            CategoryCode::Pedestrian => "pedestrian",
            CategoryCode::TrafficLight => "traffic-light",
            CategoryCode::StopSign => "stop-sign",
            CategoryCode::Obstacle => "obstacle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    DoesNotRequireAttention = 0,
    RequiresAttention = 1,
}

impl Label {
    pub fn from_bit(b: u8) -> Option<Self> {
        match b {
            0 => Some(Label::DoesNotRequireAttention),
            1 => Some(Label::RequiresAttention),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.bit(), match self {
            Label::DoesNotRequireAttention => "does not require attention",
            Label::RequiresAttention => "requires attention",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledTuple {
    pub features: FeatureTuple,
    pub label: Label,
}

/// Distance below which an object needs attention (safe braking distance at 13 m/s).
pub const ATTENTION_DISTANCE_M: f64 = 23.0;
pub const ATTENTION_SPEED_MPS: f64 = 13.0;

/// Labels an object: attention iff nearer than 23 m, faster than 13 m/s, or a pedestrian.
pub fn label_heuristic(f: &FeatureTuple) -> Label {
    if f.d < ATTENTION_DISTANCE_M
        || f.v > ATTENTION_SPEED_MPS
        || f.c >= CategoryCode::Pedestrian.risk_rank()
    {
        Label::RequiresAttention
    } else {
        Label::DoesNotRequireAttention
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttrRange {
    pub min: f64,
    pub max: f64,
}

impl AttrRange {
    pub const fn new(min: f64, max: f64) -> Self {
        AttrRange { min, max }
    }
}

/// Per-attribute raw ranges in `(d, v, r, c)` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanges(pub [AttrRange; 4]);

impl FeatureRanges {
    pub const NAMES: [&'static str; 4] = ["d", "v", "r", "c"];
    /// Attributes where a smaller raw value is more informative.
    pub const INVERTED: [bool; 4] = [true, false, true, false];

    /// Unit ranges for inputs already scaled to `[0, 1]` (orientation still applies).
    pub fn unit() -> Self {
        FeatureRanges([AttrRange::new(0.0, 1.0); 4])
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        for (i, r) in self.0.iter().enumerate() {
            if !(r.min.is_finite() && r.max.is_finite() && r.max > r.min) {
                return Err(MetricError::DegenerateRange {
                    attribute: Self::NAMES[i],
                    min: r.min,
                    max: r.max,
                });
            }
        }
        Ok(())
    }

    /// Normalizes assuming the ranges were validated.
    pub(crate) fn apply(&self, raw: &FeatureTuple) -> Vector4<f64> {
        let a = raw.as_array();
        Vector4::from_fn(|i, _| {
            let r = self.0[i];
            let t = ((a[i] - r.min) / (r.max - r.min)).clamp(0.0, 1.0);
            if Self::INVERTED[i] {
                1.0 - t
            } else {
                t
            }
        })
    }
}

impl Default for FeatureRanges {
    /// 0-100 m, -10..30 m/s closing speed, 0-180 degrees, risk rank 0-3.
    fn default() -> Self {
        FeatureRanges([
            AttrRange::new(0.0, 100.0),
            AttrRange::new(-10.0, 30.0),
            AttrRange::new(0.0, 180.0),
            AttrRange::new(0.0, 3.0),
        ])
    }
}

/// Maps raw features into `[0, 1]^4`, larger = more informative on every axis.
///
/// Distance and heading angle are inverted; out-of-range inputs are clipped.
pub fn normalize_features(raw: &FeatureTuple, ranges: &FeatureRanges) -> Result<FeatureTuple, MetricError> {
    ranges.validate()?;
    let n = ranges.apply(raw);
    Ok(FeatureTuple::new(n[0], n[1], n[2], n[3]))
}

/// `p M pᵀ`.
pub fn quadratic_form(p: &Vector4<f64>, m: &Matrix4<f64>) -> f64 {
    (p.transpose() * m * p)[(0, 0)]
}

/// Learned fitness model: `M = LᵀL`, normalization ranges and score scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessMatrix {
    factor: Matrix4<f64>,
    m: Matrix4<f64>,
    normalization: FeatureRanges,
    score_scale: f64,
}

impl FitnessMatrix {
    pub fn from_factor(
        factor: Matrix4<f64>,
        normalization: FeatureRanges,
        score_scale: f64,
    ) -> Result<Self, MetricError> {
        normalization.validate()?;
        if !(score_scale.is_finite() && score_scale > 0.0) {
            return Err(MetricError::InvalidConfig("score_scale must be positive"));
        }
        let m = factor.transpose() * factor;
        // exact symmetry regardless of rounding in the product
        let m = (m + m.transpose()) * 0.5;
        Ok(FitnessMatrix {
            factor,
            m,
            normalization,
            score_scale,
        })
    }

    /// Euclidean fitness; the scale is the largest value reachable in the unit cube.
    pub fn identity(normalization: FeatureRanges) -> Self {
        Self::from_factor(Matrix4::identity(), normalization, 4.0).expect("identity is valid")
    }

    pub fn factor(&self) -> &Matrix4<f64> {
        &self.factor
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.m
    }

    pub fn normalization(&self) -> &FeatureRanges {
        &self.normalization
    }

    pub fn score_scale(&self) -> f64 {
        self.score_scale
    }

    pub fn normalize(&self, raw: &FeatureTuple) -> Vector4<f64> {
        self.normalization.apply(raw)
    }

    /// Raw fitness of an already-normalized tuple.
    pub fn raw_fitness(&self, normalized: &Vector4<f64>) -> f64 {
        quadratic_form(normalized, &self.m)
    }

    pub fn with_score_scale(mut self, score_scale: f64) -> Self {
        self.score_scale = score_scale;
        self
    }
}

/// Object-level informativeness in `[0, 1]`.
pub fn fitness_score(p: &FeatureTuple, fm: &FitnessMatrix) -> f64 {
    (fm.raw_fitness(&fm.normalize(p)) / fm.score_scale).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub step_size: f64,
    pub iterations: usize,
    /// Pairs sampled per iteration.
    pub pair_sample_size: usize,
    pub seed: u64,
    /// Bound on `‖M‖_F`.
    pub frobenius_budget: f64,
    /// Iterations between objective checkpoints.
    pub checkpoint_every: usize,
    pub ranges: FeatureRanges,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            step_size: 0.5,
            iterations: 200,
            pair_sample_size: 512,
            seed: 0,
            frobenius_budget: 2.0,
            checkpoint_every: 10,
            ranges: FeatureRanges::default(),
        }
    }
}

impl LearnConfig {
    fn validate(&self) -> Result<(), MetricError> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(MetricError::InvalidConfig("step_size must be positive"));
        }
        if self.iterations == 0 || self.pair_sample_size == 0 || self.checkpoint_every == 0 {
            return Err(MetricError::InvalidConfig(
                "iterations, pair_sample_size and checkpoint_every must be positive",
            ));
        }
        if !(self.frobenius_budget > 0.0 && self.frobenius_budget.is_finite()) {
            return Err(MetricError::InvalidConfig("frobenius_budget must be positive"));
        }
        self.ranges.validate()
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct LearnReport {
    pub matrix: FitnessMatrix,
    /// Exact objective of the best snapshot at each checkpoint; non-decreasing.
    pub checkpoints: Vec<f64>,
    /// Exact objective at the projected identity.
    pub initial_objective: f64,
}

impl LearnReport {
    pub fn objective(&self) -> f64 {
        *self.checkpoints.last().expect("at least the initial checkpoint")
    }
}

/// Pair-sum matrix `C` with `objective(M) = Σ M_ij C_ij`.
///
/// Uses per-class sums and scatter matrices, so it costs one pass over the data.
pub fn objective_matrix(points: &[Vector4<f64>], labels: &[Label]) -> Matrix4<f64> {
    let mut n = [0.0f64; 2];
    let mut s = [Vector4::zeros(); 2];
    let mut scatter = [Matrix4::zeros(); 2];
    for (p, l) in points.iter().zip(labels) {
        let k = l.bit() as usize;
        n[k] += 1.0;
        s[k] += p;
        scatter[k] += p * p.transpose();
    }
    let same = |k: usize| scatter[k] * n[k] - s[k] * s[k].transpose();
    let diff = scatter[0] * n[1] + scatter[1] * n[0] - s[0] * s[1].transpose() - s[1] * s[0].transpose();
    diff - same(0) - same(1)
}

/// Exact pair objective for `m` on normalized points.
pub fn pair_objective(points: &[Vector4<f64>], labels: &[Label], m: &Matrix4<f64>) -> f64 {
    objective_matrix(points, labels).component_mul(m).sum()
}

fn project_to_budget(factor: &mut Matrix4<f64>, budget: f64) {
    let norm = (factor.transpose() * *factor).norm();
    if norm > budget {
        *factor *= (budget / norm).sqrt();
    }
}

pub fn learn_matrix(data: &LabeledDataset, cfg: &LearnConfig) -> Result<FitnessMatrix, MetricError> {
    learn_matrix_report(data, cfg).map(|r| r.matrix)
}

/// Projected stochastic gradient ascent on the factor `L` of `M = LᵀL`.
///
/// Each iteration samples `pair_sample_size` pairs, steps along
/// `2 L Ĉ` where `Ĉ` is the signed mean of `Δ Δᵀ`, and rescales `L` so that
/// `‖LᵀL‖_F` stays within budget. The exact objective is evaluated every
/// `checkpoint_every` iterations and the best snapshot is kept.
pub fn learn_matrix_report(data: &LabeledDataset, cfg: &LearnConfig) -> Result<LearnReport, MetricError> {
    cfg.validate()?;
    for (label, missing) in [
        (Label::DoesNotRequireAttention, Label::DoesNotRequireAttention),
        (Label::RequiresAttention, Label::RequiresAttention),
    ] {
        if !data.tuples.iter().any(|t| t.label == label) {
            return Err(MetricError::SingleClassDataset { missing });
        }
    }
    if let Some(index) = data.tuples.iter().position(|t| !t.features.is_finite()) {
        return Err(MetricError::NonFiniteFeature { index });
    }

    // Canonical order makes the result independent of input order.
    let mut canon: Vec<(Vector4<f64>, Label)> = data
        .tuples
        .iter()
        .map(|t| (cfg.ranges.apply(&t.features), t.label))
        .collect();
    canon.sort_by(|a, b| {
        a.1.cmp(&b.1).then_with(|| {
            a.0.iter()
                .zip(b.0.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let points: Vec<Vector4<f64>> = canon.iter().map(|c| c.0).collect();
    let labels: Vec<Label> = canon.iter().map(|c| c.1).collect();
    let c_exact = objective_matrix(&points, &labels);
    let objective = |f: &Matrix4<f64>| c_exact.component_mul(&(f.transpose() * f)).sum();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = points.len();

    let mut factor = Matrix4::<f64>::identity();
    project_to_budget(&mut factor, cfg.frobenius_budget);
    let initial_objective = objective(&factor);
    let mut best = (initial_objective, factor);
    let mut checkpoints = vec![initial_objective];

    for iteration in 1..=cfg.iterations {
        let mut c_hat = Matrix4::<f64>::zeros();
        for _ in 0..cfg.pair_sample_size {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let delta = points[i] - points[j];
            let outer = delta * delta.transpose();
            if labels[i] != labels[j] {
                c_hat += outer;
            } else {
                c_hat -= outer;
            }
        }
        c_hat /= cfg.pair_sample_size as f64;
        let grad = factor * c_hat * 2.0;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(MetricError::NonFiniteGradient { iteration });
        }
        factor += grad * cfg.step_size;
        project_to_budget(&mut factor, cfg.frobenius_budget);

        if iteration % cfg.checkpoint_every == 0 || iteration == cfg.iterations {
            let value = objective(&factor);
            if value > best.0 {
                best = (value, factor);
            }
            checkpoints.push(best.0);
        }
    }

    let factor = best.1;
    let m = factor.transpose() * factor;
    let max_f = points.iter().map(|p| quadratic_form(p, &m)).fold(0.0, f64::max);
    let score_scale = if max_f > 0.0 { max_f } else { 1.0 };
    Ok(LearnReport {
        matrix: FitnessMatrix::from_factor(factor, cfg.ranges, score_scale)?,
        checkpoints,
        initial_objective,
    })
}

/// Threshold classifier at the midpoint between class mean scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidpointClassifier {
    pub threshold: f64,
    /// True when the attention class has the higher mean score.
    pub attention_above: bool,
}

impl MidpointClassifier {
    pub fn fit(fm: &FitnessMatrix, train: &[LabeledTuple]) -> Self {
        let mut sum = [0.0f64; 2];
        let mut cnt = [0usize; 2];
        for t in train {
            let k = t.label.bit() as usize;
            sum[k] += fitness_score(&t.features, fm);
            cnt[k] += 1;
        }
        let mean = |k: usize| if cnt[k] == 0 { 0.0 } else { sum[k] / cnt[k] as f64 };
        MidpointClassifier {
            threshold: 0.5 * (mean(0) + mean(1)),
            attention_above: mean(1) >= mean(0),
        }
    }

    pub fn predict(&self, fm: &FitnessMatrix, f: &FeatureTuple) -> Label {
        let above = fitness_score(f, fm) > self.threshold;
        if above == self.attention_above {
            Label::RequiresAttention
        } else {
            Label::DoesNotRequireAttention
        }
    }

    pub fn accuracy(&self, fm: &FitnessMatrix, test: &[LabeledTuple]) -> f64 {
        if test.is_empty() {
            return 0.0;
        }
        let hits = test.iter().filter(|t| self.predict(fm, &t.features) == t.label).count();
        hits as f64 / test.len() as f64
    }
}
