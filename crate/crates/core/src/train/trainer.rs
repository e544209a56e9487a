use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{CptSample, MinMax};
use crate::error::{Error, Result};
use crate::model::{batch_loss, init_parameters, Batch, GraphContext, ModelConfig};
use crate::numerics::ParameterStore;
use crate::train::{adam_step, fit, AdamState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub seeds: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 32,
            patience: 15,
            max_epochs: 200,
            seeds: 5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.learning_rate > 0.0) {
            errs.push("train.learning_rate must be > 0".to_string());
        }
        if self.batch_size == 0 {
            errs.push("train.batch_size must be ≥ 1".to_string());
        }
        if self.patience == 0 {
            errs.push("train.patience must be ≥ 1".to_string());
        }
        if self.max_epochs == 0 {
            errs.push("train.max_epochs must be ≥ 1".to_string());
        }
        if self.seeds == 0 {
            errs.push("train.seeds must be ≥ 1".to_string());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            errs.push("train.beta1 and train.beta2 must lie in [0, 1)".to_string());
        }
        if !(self.epsilon > 0.0) {
            errs.push("train.epsilon must be > 0".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub epoch: usize,
    /// Absent for epoch 0, which is the untrained model.
    pub train_loss: Option<f64>,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParameterStore,
    pub curve: Vec<CurvePoint>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// Mean normalized L1 loss over `samples`, batch by batch.
pub fn mean_loss(
    store: &ParameterStore,
    config: &ModelConfig,
    context: &GraphContext,
    stats: &MinMax,
    samples: &[CptSample],
    batch_size: usize,
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&CptSample> = chunk.iter().collect();
        let batch = Batch::from_samples(&refs, stats, config)?;
        let (tape, loss) = batch_loss(store, config, context, &batch)?;
        total += tape.value(loss).data()[0] * chunk.len() as f64;
        count += chunk.len();
    }
    Ok(total / count.max(1) as f64)
}

/// Trains from a fresh initialization seeded by `seed`; the same seed also
/// drives the per-epoch shuffle.
pub fn train(
    config: &ModelConfig,
    context: &GraphContext,
    stats: &MinMax,
    train_samples: &[CptSample],
    val_samples: &[CptSample],
    tc: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    tc.validate()?;
    if train_samples.is_empty() || val_samples.is_empty() {
        return Err(Error::Contract(
            "training and validation splits must be non-empty".into(),
        ));
    }
    context.check(config)?;
    let params = init_parameters(config, seed)?;
    let initial_val = mean_loss(&params, config, context, stats, val_samples, tc.batch_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..train_samples.len()).collect();

    let state = (params, AdamState::new());
    let result = fit(
        state,
        tc.max_epochs,
        tc.patience,
        |(store, adam), epoch| {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for (b, chunk) in order.chunks(tc.batch_size).enumerate() {
                let refs: Vec<&CptSample> = chunk.iter().map(|&i| &train_samples[i]).collect();
                let batch = Batch::from_samples(&refs, stats, config)?;
                let (tape, loss) = batch_loss(store, config, context, &batch)?;
                let value = tape.value(loss).data()[0];
                if !value.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        batch: b,
                        loss: value,
                    });
                }
                tape.backward(loss, store)?;
                adam_step(store, adam, tc);
                total += value * chunk.len() as f64;
            }
            Ok(total / train_samples.len() as f64)
        },
        |(store, _), epoch| {
            let v = mean_loss(store, config, context, stats, val_samples, tc.batch_size)?;
            log::debug!("epoch {epoch}: val {v:.6}");
            if !v.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: 0,
                    loss: v,
                });
            }
            Ok(v)
        },
    )?;

    let mut curve = vec![CurvePoint {
        epoch: 0,
        train_loss: None,
        val_loss: initial_val,
    }];
    curve.extend(result.history.iter().map(|&(epoch, t, v)| CurvePoint {
        epoch,
        train_loss: Some(t),
        val_loss: v,
    }));
    Ok(TrainOutcome {
        params: result.best_state.0,
        curve,
        best_epoch: result.best_epoch,
        best_val_loss: result.best_loss,
        stopped_early: result.stopped_early,
    })
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for p in curve {
        let t = p.train_loss.map(|v| format!("{v}")).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", p.epoch, t, p.val_loss));
    }
    out
}
