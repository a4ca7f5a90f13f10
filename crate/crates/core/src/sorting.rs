//! Application-layer ranking of received objects.
//!
//! Two rankers are provided. [`radix_sort`] orders tuples by attribute
//! priority `D > V > R > C` using one stable LSD pass per attribute, least
//! significant first. [`weighted_fitness_sort`] scores each tuple with the
//! learned quadratic form and orders by that single score, again with a
//! stable radix pass over the score bits.
//!
//! Both return most-informative-first.

use nalgebra::Vector4;
use thiserror::Error;

use crate::informativeness::FeatureTuple;
use crate::metric_learn::{quadratic_form, FeatureRanges, FitnessMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SortError {
    #[error("non-finite feature in tuple {index}")]
    NonFiniteFeature { index: usize },
}

/// Radix keys in `(D, V, R, C)` order; larger key = more informative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct QuantizedTuple {
    pub keys: [u16; 4],
}

impl QuantizedTuple {
    pub const fn new(keys: [u16; 4]) -> Self {
        QuantizedTuple { keys }
    }

    /// Quantizes a raw tuple after orienting and clipping it with `ranges`.
    ///
    /// Nearer, faster-closing, more head-on and riskier objects get larger keys.
    pub fn from_features(f: &FeatureTuple, ranges: &FeatureRanges) -> Self {
        let n = ranges.apply(f);
        QuantizedTuple {
            keys: std::array::from_fn(|i| (n[i] * u16::MAX as f64).round() as u16),
        }
    }
}

/// Stable LSD counting sort on bytes, producing a permutation that orders
/// `keys` descending. `digit(k, pass)` yields the byte for each pass, least
/// significant pass first.
fn lsd_desc_permutation<K>(keys: &[K], passes: usize, digit: impl Fn(&K, usize) -> u8) -> Vec<usize> {
    let n = keys.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut scratch = vec![0usize; n];
    let mut counts = [0usize; 256];
    for pass in 0..passes {
        counts.fill(0);
        for k in keys {
            counts[255 - digit(k, pass) as usize] += 1;
        }
        if counts.contains(&n) {
            // every element shares this digit; the pass is the identity
            continue;
        }
        let mut offset = 0;
        for c in counts.iter_mut() {
            let here = *c;
            *c = offset;
            offset += here;
        }
        for &idx in &perm {
            let bucket = 255 - digit(&keys[idx], pass) as usize;
            scratch[counts[bucket]] = idx;
            counts[bucket] += 1;
        }
        std::mem::swap(&mut perm, &mut scratch);
    }
    perm
}

/// Attribute visited by each radix pass: C, R, V, D.
const PASS_ATTRIBUTE: [usize; 4] = [3, 2, 1, 0];

/// Permutation placing `tuples` in descending lexicographic `(D, V, R, C)` order.
///
/// Stable passes run C, R, V, D (two byte digits each), so equal full keys keep
/// their input order.
pub fn radix_order(tuples: &[QuantizedTuple]) -> Vec<usize> {
    lsd_desc_permutation(tuples, 8, |t, pass| {
        let key = t.keys[PASS_ATTRIBUTE[pass / 2]];
        (key >> (8 * (pass % 2))) as u8
    })
}

pub fn radix_sort(tuples: &[QuantizedTuple]) -> Vec<QuantizedTuple> {
    radix_order(tuples).into_iter().map(|i| tuples[i]).collect()
}

/// Order-preserving map from `f64` to `u64` (matches `total_cmp`).
fn f64_key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Indices of `scores` in descending order; ties keep input order.
pub fn order_scores_desc(scores: &[f64]) -> Vec<usize> {
    let keys: Vec<u64> = scores.iter().map(|&s| f64_key(s)).collect();
    lsd_desc_permutation(&keys, 8, |k, pass| (k >> (8 * pass)) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedTuple {
    /// Position in the input slice.
    pub index: usize,
    /// `F(P)` of the normalized tuple.
    pub fitness: f64,
}

/// Scores every tuple with `P M Pᵀ` (after normalization) and ranks descending.
pub fn weighted_fitness_sort(tuples: &[FeatureTuple], fm: &FitnessMatrix) -> Result<Vec<RankedTuple>, SortError> {
    let mut scores = Vec::with_capacity(tuples.len());
    for (index, t) in tuples.iter().enumerate() {
        if !t.is_finite() {
            return Err(SortError::NonFiniteFeature { index });
        }
        scores.push(fm.raw_fitness(&fm.normalize(t)));
    }
    Ok(order_scores_desc(&scores)
        .into_iter()
        .map(|index| RankedTuple {
            index,
            fitness: scores[index],
        })
        .collect())
}

/// `(p1 - p2) M (p1 - p2)ᵀ` on the tuples as given (callers pass normalized tuples).
pub fn fitness_distance(p1: &FeatureTuple, p2: &FeatureTuple, fm: &FitnessMatrix) -> f64 {
    let delta = Vector4::from(p1.as_array()) - Vector4::from(p2.as_array());
    quadratic_form(&delta, fm.matrix()).max(0.0)
}
