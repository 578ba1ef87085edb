//! Synthetic Gaussian feature pools standing in for backbone features.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::LabeledFeatures;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub classes: usize,
    pub per_class: usize,
    pub d: usize,
    /// Euclidean distance between any two class means, in units of `sigma`.
    pub separation: f64,
    pub sigma: f64,
    /// Value added to every coordinate of every class mean.
    pub offset: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { classes: 20, per_class: 100, d: 64, separation: 4.0, sigma: 1.0, offset: 0.0, seed: 0 }
    }
}

/// Class `c` has mean `offset·1 + (separation·sigma/√2)·e_c`, so all class means
/// are pairwise exactly `separation·sigma` apart. Rows are grouped by class and
/// labeled `class00`, `class01`, ...
pub fn gaussian_pool(cfg: &SynthConfig) -> Result<LabeledFeatures> {
    if cfg.classes == 0 || cfg.per_class == 0 {
        return Err(Error::InvalidSize("empty synthetic pool".into()));
    }
    if cfg.classes > cfg.d {
        return Err(Error::InvalidSize(format!(
            "{} orthogonal class means need d >= {}, got d={}",
            cfg.classes, cfg.classes, cfg.d
        )));
    }
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::InvalidRange(format!("sigma must be positive, got {}", cfg.sigma)));
    }
    let radius = cfg.separation * cfg.sigma / std::f64::consts::SQRT_2;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.classes * cfg.per_class;
    let mut features = DMatrix::zeros(n, cfg.d);
    let mut labels = Vec::with_capacity(n);
    for row in 0..n {
        let class = row / cfg.per_class;
        for j in 0..cfg.d {
            let z: f64 = StandardNormal.sample(&mut rng);
            let centre = cfg.offset + if j == class { radius } else { 0.0 };
            features[(row, j)] = centre + cfg.sigma * z;
        }
        labels.push(format!("class{class:02}"));
    }
    LabeledFeatures::new(features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn means_are_separated() {
        let cfg = SynthConfig { classes: 3, per_class: 4000, d: 5, separation: 4.0, ..Default::default() };
        let data = gaussian_pool(&cfg).unwrap();
        let groups = data.class_groups();
        let means: Vec<Vec<f64>> =
            groups.iter().map(|(_, rows)| crate::features::row_mean(&data.features().select_rows(rows))).collect();
        let dist: f64 = means[0].iter().zip(&means[1]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!((dist - 4.0).abs() < 0.15, "{dist}");
        assert_eq!(data.labels()[0], "class00");
    }

    #[test]
    fn rejects_too_many_classes() {
        let cfg = SynthConfig { classes: 10, d: 4, ..Default::default() };
        assert!(gaussian_pool(&cfg).is_err());
    }
}
