use std::io::Read;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use super::{label_heuristic, CategoryCode, Label, LabeledTuple};
use crate::informativeness::FeatureTuple;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledDataset {
    pub tuples: Vec<LabeledTuple>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.tuples.iter().filter(|t| t.label == label).count()
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Parses `d,v,r,c,label` rows. A non-numeric first row is taken as a header.
pub fn parse_dataset_csv<R: Read>(input: R) -> Result<LabeledDataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut tuples = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(idx as u64 + 1);
        if idx == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() != 5 {
            return Err(DatasetError::Parse {
                line,
                message: format!("expected 5 fields (d,v,r,c,label), found {}", record.len()),
            });
        }
        let mut vals = [0.0f64; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = record[k].parse().map_err(|_| DatasetError::Parse {
                line,
                message: format!("field {} is not a number: {:?}", k + 1, &record[k]),
            })?;
        }
        let label = record[4]
            .parse::<u8>()
            .ok()
            .and_then(Label::from_bit)
            .ok_or_else(|| DatasetError::Parse {
                line,
                message: format!("label must be 0 or 1, found {:?}", &record[4]),
            })?;
        tuples.push(LabeledTuple {
            features: FeatureTuple::from_array(vals),
            label,
        });
    }
    Ok(LabeledDataset { tuples })
}

/// Shuffles with `seed` and moves `fraction` of the rows into a holdout set.
pub fn split_holdout(data: &LabeledDataset, fraction: f64, seed: u64) -> (LabeledDataset, LabeledDataset) {
    let mut rows = data.tuples.clone();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((rows.len() as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
    let test = rows.split_off(rows.len() - n_test);
    (LabeledDataset { tuples: rows }, LabeledDataset { tuples: test })
}

fn gauss(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("finite sd").sample(rng)
}

/// Two Gaussian clusters separated along the distance axis.
///
/// Class 1 sits near the receiver (mean 15 m), class 0 far away (mean 65 m);
/// speed, angle and category follow the same distribution in both classes.
pub fn two_cluster_dataset(per_class: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tuples = Vec::with_capacity(per_class * 2);
    for (label, d_mean) in [(Label::RequiresAttention, 15.0), (Label::DoesNotRequireAttention, 65.0)] {
        for _ in 0..per_class {
            let d = gauss(&mut rng, d_mean, 8.0).clamp(0.0, 100.0);
            let v = gauss(&mut rng, 5.0, 4.0).clamp(-10.0, 30.0);
            let r = gauss(&mut rng, 90.0, 40.0).clamp(0.0, 180.0);
            let c = gauss(&mut rng, 1.5, 0.6).clamp(0.0, 3.0);
            tuples.push(LabeledTuple {
                features: FeatureTuple::new(d, v, r, c),
                label,
            });
        }
    }
    LabeledDataset { tuples }
}

/// Street-scene objects labeled with [`label_heuristic`].
///
/// Mixture of vehicles, cyclists, pedestrians and static objects with
/// category-dependent speed profiles. Roughly 30% of rows need attention.
pub fn synthetic_heuristic_dataset(n: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tuples = Vec::with_capacity(n);
    for _ in 0..n {
        let roll: f64 = rng.gen();
        let (category, v) = if roll < 0.60 {
            let cat = [CategoryCode::Car, CategoryCode::Truck, CategoryCode::Bus, CategoryCode::Motorcycle]
                [rng.gen_range(0..4)];
            (cat, gauss(&mut rng, 6.0, 4.0))
        } else if roll < 0.70 {
            (CategoryCode::Bicycle, gauss(&mut rng, 3.0, 2.0))
        } else if roll < 0.76 {
            (CategoryCode::Pedestrian, gauss(&mut rng, 1.0, 1.0))
        } else {
            let cat = [CategoryCode::TrafficLight, CategoryCode::StopSign, CategoryCode::Obstacle]
                [rng.gen_range(0..3)];
            (cat, gauss(&mut rng, 4.0, 3.0))
        };
        let d = rng.gen_range(0.0..100.0);
        let r = rng.gen_range(0.0..180.0);
        let features = FeatureTuple::new(d, v.clamp(-10.0, 30.0), r, category.risk_rank());
        tuples.push(LabeledTuple {
            features,
            label: label_heuristic(&features),
        });
    }
    LabeledDataset { tuples }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_and_without_header() {
        let with = "d,v,r,c,label\n10,5,0,1,1\n80,2,90,0,0\n";
        let ds = parse_dataset_csv(with.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.tuples[0].label, Label::RequiresAttention);
        let without = "10,5,0,1,1\n";
        assert_eq!(parse_dataset_csv(without.as_bytes()).unwrap().len(), 1);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "d,v,r,c,label\n10,5,0,1,1\n10,x,0,1,0\n";
        match parse_dataset_csv(bad.as_bytes()) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad_label = "10,5,0,1,2\n";
        assert!(matches!(
            parse_dataset_csv(bad_label.as_bytes()),
            Err(DatasetError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn generators_are_seeded() {
        assert_eq!(two_cluster_dataset(50, 3), two_cluster_dataset(50, 3));
        assert_eq!(synthetic_heuristic_dataset(100, 3), synthetic_heuristic_dataset(100, 3));
        assert_ne!(synthetic_heuristic_dataset(100, 3), synthetic_heuristic_dataset(100, 4));
        let ds = two_cluster_dataset(40, 1);
        assert_eq!(ds.count(Label::RequiresAttention), 40);
        assert_eq!(ds.count(Label::DoesNotRequireAttention), 40);
    }

    #[test]
    fn holdout_split_sizes() {
        let ds = two_cluster_dataset(50, 0);
        let (train, test) = split_holdout(&ds, 0.2, 9);
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
    }
}
