use std::fmt;
use std::str::FromStr;

use crate::data::{CptSample, Window};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::train::{ErrorAccumulator, Metrics};

/// Calendar heuristics computed from the same windows the model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Mean of the weekly (trend) window.
    TrendMean,
    /// Mean of the daily (period) window.
    PeriodMean,
    /// Mean of the closeness window.
    ClosenessMean,
    /// The most recent closeness step, `X_{t-1}`.
    LastRepeat,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::TrendMean,
        BaselineKind::PeriodMean,
        BaselineKind::ClosenessMean,
        BaselineKind::LastRepeat,
    ];
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::TrendMean => "trend_mean",
            BaselineKind::PeriodMean => "period_mean",
            BaselineKind::ClosenessMean => "closeness_mean",
            BaselineKind::LastRepeat => "last_repeat",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::Parse(format!("unknown baseline {s:?}")))
    }
}

fn window_mean(w: &Window) -> Tensor {
    let mut out = Tensor::zeros(w.frames[0].shape());
    for f in &w.frames {
        out.add_assign(f);
    }
    let k = w.frames.len() as f64;
    out.map(|v| v / k)
}

pub fn heuristic_baseline(kind: BaselineKind, sample: &CptSample) -> Tensor {
    match kind {
        BaselineKind::TrendMean => window_mean(&sample.trend),
        BaselineKind::PeriodMean => window_mean(&sample.period),
        BaselineKind::ClosenessMean => window_mean(&sample.closeness),
        // windows are newest first
        BaselineKind::LastRepeat => sample.closeness.frames[0].clone(),
    }
}

pub fn evaluate_baseline(kind: BaselineKind, samples: &[CptSample]) -> Result<Metrics> {
    let mut acc = ErrorAccumulator::default();
    for s in samples {
        acc.add(&heuristic_baseline(kind, s), &s.target);
    }
    acc.finish()
}
