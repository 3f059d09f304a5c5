//! Datasets, ingestion, scaling and cross-validation folds.

mod arff;
mod csv_file;
mod folds;
pub mod openml;
mod scale;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use arff::{parse_arff, ArffOptions};
pub use csv_file::{load_csv, CsvOptions};
pub use folds::{stratified_kfold, FoldPlan};
pub use scale::{minmax_scale, ColumnScale, Scaler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Numerical,
    /// Values are ids into `categories`.
    Categorical { categories: Vec<String> },
}

impl FeatureKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, FeatureKind::Categorical { .. })
    }

    /// Category ids `0..n` of a categorical feature.
    pub fn category_ids(&self) -> Vec<u32> {
        match self {
            FeatureKind::Categorical { categories } => (0..categories.len() as u32).collect(),
            FeatureKind::Numerical => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
    /// Global `(min, max)` of a numerical feature.
    pub range: (f64, f64),
}

/// A binary-labelled feature matrix, stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    labels: Vec<u8>,
    features: Vec<FeatureInfo>,
    label_names: [String; 2],
}

impl Dataset {
    /// All-numerical dataset named `f0, f1, ...` with observed ranges.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); width];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Parse(format!("row {i} has {} values, expected {width}", row.len())));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        let features = (0..width)
            .map(|j| FeatureInfo {
                name: format!("f{j}"),
                kind: FeatureKind::Numerical,
                range: (0.0, 0.0),
            })
            .collect();
        Dataset::new(columns, labels, features, ["0".into(), "1".into()])
    }

    /// Builds a dataset from columns; numerical ranges are recomputed.
    pub fn new(
        columns: Vec<Vec<f64>>,
        labels: Vec<u8>,
        mut features: Vec<FeatureInfo>,
        label_names: [String; 2],
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if columns.len() != features.len() {
            return Err(Error::Parse(format!(
                "{} columns but {} feature descriptions",
                columns.len(),
                features.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::NonBinaryLabels(format!("label {bad} is not 0 or 1")));
        }
        for (j, (col, info)) in columns.iter().zip(&mut features).enumerate() {
            if col.len() != labels.len() {
                return Err(Error::Parse(format!(
                    "column {j} has {} values, expected {}",
                    col.len(),
                    labels.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::MissingValue {
                    row: i,
                    column: info.name.clone(),
                });
            }
            match &info.kind {
                FeatureKind::Numerical => info.range = observed_range(col),
                FeatureKind::Categorical { categories } => {
                    if let Some(v) = col.iter().find(|&&v| v < 0.0 || v.fract() != 0.0 || v >= categories.len() as f64) {
                        return Err(Error::Parse(format!("feature {}: {v} is not a valid category id", info.name)));
                    }
                    info.range = (0.0, categories.len().saturating_sub(1) as f64);
                }
            }
        }
        Ok(Dataset {
            columns,
            labels,
            features,
            label_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn column(&self, feature: usize) -> &[f64] {
        &self.columns[feature]
    }

    pub fn features(&self) -> &[FeatureInfo] {
        &self.features
    }

    /// Names of the original labels mapped to 0 and 1.
    pub fn label_names(&self) -> &[String; 2] {
        &self.label_names
    }

    pub fn categorical_mask(&self) -> Vec<bool> {
        self.features.iter().map(|f| f.kind.is_categorical()).collect()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Rows `indices`, in that order. Feature ranges are kept as they are.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| indices.iter().map(|&i| c[i]).collect())
                .collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            features: self.features.clone(),
            label_names: self.label_names.clone(),
        }
    }

    pub(crate) fn columns_mut(&mut self) -> (&mut Vec<Vec<f64>>, &mut Vec<FeatureInfo>) {
        (&mut self.columns, &mut self.features)
    }
}

fn observed_range(col: &[f64]) -> (f64, f64) {
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 0.0)
    }
}
