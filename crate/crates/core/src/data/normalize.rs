use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::data::{ArealFeature, DemandSeries};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Per-column affine map into `[0, 1]`. Columns with `max == min` map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMax {
    /// Fits over the rows of a row-major matrix with `cols` columns.
    pub fn fit(values: &[f64], cols: usize) -> Result<Self> {
        if cols == 0 || values.is_empty() || values.len() % cols != 0 {
            return Err(Error::Contract(
                "min-max fit on an empty or ragged matrix".into(),
            ));
        }
        let mut min = vec![f64::INFINITY; cols];
        let mut max = vec![f64::NEG_INFINITY; cols];
        for row in values.chunks(cols) {
            for (k, &v) in row.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    fn check(&self, cols: usize) -> Result<()> {
        if cols != self.width() {
            return Err(Error::Schema(format!(
                "normalization stats cover {} columns, data has {cols}",
                self.width()
            )));
        }
        Ok(())
    }

    pub fn apply_value(&self, col: usize, x: f64) -> f64 {
        let range = self.max[col] - self.min[col];
        if range > 0.0 {
            (x - self.min[col]) / range
        } else {
            0.0
        }
    }

    pub fn invert_value(&self, col: usize, y: f64) -> f64 {
        let range = self.max[col] - self.min[col];
        if range > 0.0 {
            y * range + self.min[col]
        } else {
            self.min[col]
        }
    }

    /// Normalizes a tensor whose last axis indexes the columns.
    pub fn apply(&self, t: &Tensor) -> Result<Tensor> {
        self.check(t.cols())?;
        let c = t.cols();
        let data = t
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| self.apply_value(i % c, x))
            .collect();
        Tensor::new(t.shape().to_vec(), data)
    }

    pub fn invert(&self, t: &Tensor) -> Result<Tensor> {
        self.check(t.cols())?;
        let c = t.cols();
        let data = t
            .data()
            .iter()
            .enumerate()
            .map(|(i, &y)| self.invert_value(i % c, y))
            .collect();
        Tensor::new(t.shape().to_vec(), data)
    }
}

/// Demand stats per channel (training span only) and per-column feature stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub demand: MinMax,
    pub features: Vec<MinMax>,
}

pub fn fit_minmax(
    series: &DemandSeries,
    train_steps: Range<usize>,
    features: &[ArealFeature],
) -> Result<NormalizationStats> {
    if train_steps.is_empty() || train_steps.end > series.len() {
        return Err(Error::Contract(format!(
            "training span {train_steps:?} is empty or outside the series (len {})",
            series.len()
        )));
    }
    let block = series.n_areas() * series.n_channels();
    let values = &series.values()[train_steps.start * block..train_steps.end * block];
    let demand = MinMax::fit(values, series.n_channels())?;
    let features = features
        .iter()
        .map(|f| MinMax::fit(f.matrix.data(), f.n_components()))
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalizationStats { demand, features })
}

impl NormalizationStats {
    pub fn normalize_features(&self, features: &[ArealFeature]) -> Result<Vec<ArealFeature>> {
        if features.len() != self.features.len() {
            return Err(Error::Schema(format!(
                "stats for {} features, got {}",
                self.features.len(),
                features.len()
            )));
        }
        features
            .iter()
            .zip(&self.features)
            .map(|(f, s)| {
                Ok(ArealFeature {
                    name: f.name.clone(),
                    component_names: f.component_names.clone(),
                    matrix: s.apply(&f.matrix)?,
                })
            })
            .collect()
    }
}
