//! Standard (non-episodic) classification: filter the labeled training split
//! per class, then classify an untouched test split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::ClassifierConfig;
use crate::denoise::{denoise_dataset, DenoiseConfig};
use crate::episodes::PairedEval;
use crate::error::{Error, Result};
use crate::features::LabeledFeatures;

/// Seeded per-class holdout: `ceil(train_fraction * size)` rows of each class
/// (at least one, and at most `size - 1` when the class has two or more rows)
/// go to training.
pub fn holdout_split(
    data: &LabeledFeatures,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledFeatures, LabeledFeatures)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidRange(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (_, mut rows) in data.class_groups() {
        rows.shuffle(&mut rng);
        let size = rows.len();
        let mut cut = ((train_fraction * size as f64).ceil() as usize).max(1);
        if size >= 2 {
            cut = cut.min(size - 1);
        }
        let (train, test) = rows.split_at(cut);
        train_rows.extend_from_slice(train);
        test_rows.extend_from_slice(test);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok((data.select_rows(&train_rows), data.select_rows(&test_rows)))
}

/// Per-test-sample correctness without and with filtering of `train`.
pub fn run_standard_eval(
    train: &LabeledFeatures,
    test: &LabeledFeatures,
    denoise: &DenoiseConfig,
    classifier: &ClassifierConfig,
    config_echo: serde_json::Value,
) -> Result<PairedEval> {
    let filtered_train = denoise_dataset(train, denoise)?;
    let hits = |predicted: Vec<String>| -> Vec<f64> {
        predicted.iter().zip(test.labels()).map(|(p, t)| if p == t { 1.0 } else { 0.0 }).collect()
    };
    let raw = hits(classifier.predict(train, test.features())?);
    let filtered = hits(classifier.predict(&filtered_train, test.features())?);
    PairedEval::from_paired(&raw, &filtered, config_echo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn split_is_stratified_and_seeded() {
        let labels: Vec<String> = (0..30).map(|i| format!("c{}", i % 3)).collect();
        let data = LabeledFeatures::new(DMatrix::from_fn(30, 2, |i, j| (i + j) as f64), labels).unwrap();
        let (train, test) = holdout_split(&data, 0.8, 7).unwrap();
        assert_eq!((train.n(), test.n()), (24, 6));
        for (_, rows) in test.class_groups() {
            assert_eq!(rows.len(), 2);
        }
        assert_eq!(holdout_split(&data, 0.8, 7).unwrap().0, train);
        assert!(holdout_split(&data, 1.0, 7).is_err());
    }
}
