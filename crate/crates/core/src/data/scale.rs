use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind};

/// Affine map of one numerical column onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub min: f64,
    pub max: f64,
}

impl ColumnScale {
    /// Constant columns map to 0; values outside the fitted range are clamped.
    pub fn apply(&self, v: f64) -> f64 {
        let width = self.max - self.min;
        if width <= 0.0 {
            0.0
        } else {
            ((v - self.min) / width).clamp(0.0, 1.0)
        }
    }
}

/// Per-feature min-max statistics; `None` for categorical features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub columns: Vec<Option<ColumnScale>>,
}

impl Scaler {
    pub fn fit(data: &Dataset) -> Scaler {
        let columns = data
            .features()
            .iter()
            .enumerate()
            .map(|(j, info)| match info.kind {
                FeatureKind::Numerical => {
                    let col = data.column(j);
                    Some(ColumnScale {
                        min: col.iter().copied().fold(f64::INFINITY, f64::min),
                        max: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    })
                }
                FeatureKind::Categorical { .. } => None,
            })
            .collect();
        Scaler { columns }
    }

    /// Scales numerical columns and sets their range to `[0, 1]`.
    pub fn transform(&self, data: &Dataset) -> Dataset {
        let mut out = data.clone();
        let (columns, features) = out.columns_mut();
        for ((col, info), scale) in columns.iter_mut().zip(features.iter_mut()).zip(&self.columns) {
            if let Some(scale) = scale {
                col.iter_mut().for_each(|v| *v = scale.apply(*v));
                info.range = (0.0, 1.0);
            }
        }
        out
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for (v, scale) in row.iter_mut().zip(&self.columns) {
            if let Some(scale) = scale {
                *v = scale.apply(*v);
            }
        }
    }
}

/// Fits a scaler on `data` and applies it.
pub fn minmax_scale(data: &Dataset) -> (Dataset, Scaler) {
    let scaler = Scaler::fit(data);
    (scaler.transform(data), scaler)
}
