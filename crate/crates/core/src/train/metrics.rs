use crate::data::{CptSample, MinMax};
use crate::error::{Error, Result};
use crate::model::{predict, Batch, GraphContext, ModelConfig};
use crate::numerics::{ParameterStore, Tensor};

/// Squared and absolute error sums over denormalized values, with every
/// sample, area and channel pooled.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorAccumulator {
    squared: f64,
    absolute: f64,
    count: usize,
}

impl ErrorAccumulator {
    pub fn add(&mut self, prediction: &Tensor, target: &Tensor) {
        debug_assert_eq!(prediction.shape(), target.shape());
        for (p, y) in prediction.data().iter().zip(target.data()) {
            let e = p - y;
            self.squared += e * e;
            self.absolute += e.abs();
            self.count += 1;
        }
    }

    pub fn finish(&self) -> Result<Metrics> {
        if self.count == 0 {
            return Err(Error::Contract("cannot score an empty test split".into()));
        }
        let n = self.count as f64;
        Ok(Metrics {
            rmse: (self.squared / n).sqrt(),
            mae: self.absolute / n,
            count: self.count,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub count: usize,
}

/// Scores the model on `samples`, inverting the demand normalization
/// before comparing with the raw targets.
pub fn evaluate(
    store: &ParameterStore,
    config: &ModelConfig,
    context: &GraphContext,
    stats: &MinMax,
    samples: &[CptSample],
    batch_size: usize,
) -> Result<Metrics> {
    if samples.is_empty() {
        return Err(Error::Contract("cannot score an empty test split".into()));
    }
    let mut acc = ErrorAccumulator::default();
    let (n, c) = (config.areas, config.channels);
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&CptSample> = chunk.iter().collect();
        let batch = Batch::from_samples(&refs, stats, config)?;
        let pred = stats.invert(&predict(store, config, context, &batch)?)?;
        for (b, s) in chunk.iter().enumerate() {
            let block = Tensor::new(vec![n, c], pred.data()[b * n * c..(b + 1) * n * c].to_vec())?;
            acc.add(&block, &s.target);
        }
    }
    acc.finish()
}

/// Metrics of several seeds and their arithmetic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_seed: Vec<(u64, Metrics)>,
    pub mean_rmse: f64,
    pub mean_mae: f64,
}

impl EvalReport {
    pub fn from_runs(per_seed: Vec<(u64, Metrics)>) -> Self {
        let k = per_seed.len().max(1) as f64;
        let mean_rmse = per_seed.iter().map(|(_, m)| m.rmse).sum::<f64>() / k;
        let mean_mae = per_seed.iter().map(|(_, m)| m.mae).sum::<f64>() / k;
        Self {
            per_seed,
            mean_rmse,
            mean_mae,
        }
    }
}
