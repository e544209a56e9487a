use crate::error::Result;

/// Patience-based early stopping on a validation loss. Any strictly lower
/// loss counts as an improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    since_best: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        Self {
            patience,
            best: None,
            since_best: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        match self.best {
            Some((_, best)) if !(loss < best) => {
                self.since_best += 1;
                if self.since_best >= self.patience {
                    StopDecision::Stop
                } else {
                    StopDecision::Continue
                }
            }
            _ => {
                self.best = Some((epoch, loss));
                self.since_best = 0;
                StopDecision::Improved
            }
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Debug, Clone)]
pub struct FitResult<S> {
    /// State restored to the best validation epoch.
    pub best_state: S,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// `(epoch, train_loss, val_loss)` for epochs `1..=epochs_run`.
    pub history: Vec<(usize, f64, f64)>,
}

/// Runs `train_epoch` then `validate` for up to `max_epochs` epochs,
/// snapshotting the state at every improvement and stopping after
/// `patience` epochs without one.
pub fn fit<S: Clone>(
    mut state: S,
    max_epochs: usize,
    patience: usize,
    mut train_epoch: impl FnMut(&mut S, usize) -> Result<f64>,
    mut validate: impl FnMut(&S, usize) -> Result<f64>,
) -> Result<FitResult<S>> {
    let mut stopper = EarlyStopping::new(patience);
    let mut best_state = state.clone();
    let mut history = Vec::new();
    let mut stopped_early = false;
    for epoch in 1..=max_epochs {
        let train_loss = train_epoch(&mut state, epoch)?;
        let val_loss = validate(&state, epoch)?;
        history.push((epoch, train_loss, val_loss));
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => best_state = state.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stopped_early = true;
                break;
            }
        }
    }
    let (best_epoch, best_loss) = stopper.best().unwrap_or((0, f64::INFINITY));
    Ok(FitResult {
        best_state,
        best_epoch,
        best_loss,
        epochs_run: history.len(),
        stopped_early,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_one_worsening() {
        let losses = [1.0, 2.0, 3.0, 4.0];
        let r = fit(
            0usize,
            100,
            1,
            |s, e| {
                *s = e;
                Ok(0.0)
            },
            |_, e| Ok(losses[e - 1]),
        )
        .unwrap();
        assert_eq!(r.epochs_run, 2);
        assert_eq!(r.best_epoch, 1);
        assert_eq!(r.best_state, 1);
        assert!(r.stopped_early);
    }

    #[test]
    fn equal_loss_is_not_improvement() {
        let mut es = EarlyStopping::new(2);
        assert_eq!(es.observe(1, 1.0), StopDecision::Improved);
        assert_eq!(es.observe(2, 1.0), StopDecision::Continue);
        assert_eq!(es.observe(3, 1.0), StopDecision::Stop);
    }

    #[test]
    fn runs_to_max_when_improving() {
        let r = fit((), 5, 3, |_, _| Ok(0.0), |_, e| Ok(10.0 - e as f64)).unwrap();
        assert_eq!(r.epochs_run, 5);
        assert!(!r.stopped_early);
        assert_eq!(r.best_epoch, 5);
    }
}
