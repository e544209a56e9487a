//! Optimization, early stopping, scoring and calendar baselines.

mod adam;
mod baselines;
mod metrics;
mod stopping;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use baselines::{evaluate_baseline, heuristic_baseline, BaselineKind};
pub use metrics::{evaluate, ErrorAccumulator, EvalReport, Metrics};
pub use stopping::{fit, EarlyStopping, FitResult, StopDecision};
pub use trainer::{curve_csv, mean_loss, train, CurvePoint, TrainConfig, TrainOutcome};
