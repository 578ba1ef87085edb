use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Feature rows with one opaque class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    features: DMatrix<f64>,
    labels: Vec<String>,
}

impl LabeledFeatures {
    pub fn new(features: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.nrows(), actual: labels.len() });
        }
        Ok(Self { features, labels })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn into_parts(self) -> (DMatrix<f64>, Vec<String>) {
        (self.features, self.labels)
    }

    /// Row indices per class, classes in order of first appearance.
    pub fn class_groups(&self) -> Vec<(String, Vec<usize>)> {
        let mut position: HashMap<&str, usize> = HashMap::new();
        let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
        for (row, label) in self.labels.iter().enumerate() {
            let slot = *position.entry(label).or_insert_with(|| {
                groups.push((label.clone(), Vec::new()));
                groups.len() - 1
            });
            groups[slot].1.push(row);
        }
        groups
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r].clone()).collect(),
        }
    }
}

/// Arithmetic mean of the rows of `f`.
pub fn row_mean(f: &DMatrix<f64>) -> Vec<f64> {
    let m = f.nrows() as f64;
    f.column_iter().map(|c| c.sum() / m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn groups_follow_first_appearance() {
        let data =
            LabeledFeatures::new(dmatrix![1.0; 2.0; 3.0; 4.0], vec!["b".into(), "a".into(), "b".into(), "c".into()])
                .unwrap();
        let groups = data.class_groups();
        assert_eq!(groups, vec![("b".to_string(), vec![0, 2]), ("a".to_string(), vec![1]), ("c".to_string(), vec![3])]);
        assert_eq!(data.select_rows(&[2, 1]).features(), &dmatrix![3.0; 2.0]);
    }

    #[test]
    fn label_count_must_match() {
        assert!(LabeledFeatures::new(DMatrix::zeros(2, 3), vec!["x".into()]).is_err());
    }
}
