use crate::data::{CptSample, MinMax, Window, TE_WIDTH};
use crate::error::{Error, Result};
use crate::model::{Batch, ModelConfig};
use crate::numerics::Tensor;

fn unit_steps(
    windows: &[&Window],
    stats: &MinMax,
    chronological: bool,
) -> Result<Vec<(Tensor, Tensor)>> {
    let len = windows[0].len();
    let order: Vec<usize> = if chronological {
        (0..len).rev().collect()
    } else {
        (0..len).collect()
    };
    let mut steps = Vec::with_capacity(len);
    for k in order {
        let mut x = Vec::new();
        let mut te = Vec::with_capacity(windows.len() * TE_WIDTH);
        for w in windows {
            x.extend_from_slice(stats.apply(&w.frames[k])?.data());
            te.extend_from_slice(&w.encodings[k].vector);
        }
        let cols = windows[0].frames[k].cols();
        let rows = x.len() / cols;
        steps.push((
            Tensor::new(vec![rows, cols], x)?,
            Tensor::new(vec![windows.len(), TE_WIDTH], te)?,
        ));
    }
    Ok(steps)
}

impl Batch {
    /// Normalizes and stacks samples. Windows are stored newest first and
    /// fed oldest first unless the config asks otherwise.
    pub fn from_samples(
        samples: &[&CptSample],
        stats: &MinMax,
        config: &ModelConfig,
    ) -> Result<Batch> {
        if samples.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        for s in samples {
            if s.closeness.len() != config.closeness
                || s.period.len() != config.period
                || s.trend.len() != config.trend
            {
                return Err(Error::Schema(format!(
                    "sample windows {}/{}/{} do not match model windows {}/{}/{}",
                    s.closeness.len(),
                    s.period.len(),
                    s.trend.len(),
                    config.closeness,
                    config.period,
                    config.trend
                )));
            }
            if s.target.shape() != [config.areas, config.channels] {
                return Err(Error::dim(
                    "sample target",
                    s.target.shape(),
                    &[config.areas, config.channels],
                ));
            }
        }
        let c: Vec<&Window> = samples.iter().map(|s| &s.closeness).collect();
        let p: Vec<&Window> = samples.iter().map(|s| &s.period).collect();
        let q: Vec<&Window> = samples.iter().map(|s| &s.trend).collect();
        let mut target = Vec::with_capacity(samples.len() * config.areas * config.channels);
        for s in samples {
            target.extend_from_slice(stats.apply(&s.target)?.data());
        }
        Ok(Batch {
            size: samples.len(),
            units: [
                unit_steps(&c, stats, config.chronological)?,
                unit_steps(&p, stats, config.chronological)?,
                unit_steps(&q, stats, config.chronological)?,
            ],
            target: Tensor::new(vec![samples.len() * config.areas, config.channels], target)?,
        })
    }
}
