use std::collections::BTreeMap;

use crate::numerics::{ParameterStore, Tensor};
use crate::train::TrainConfig;

/// First and second moment estimates per slot.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    step: u64,
    moments: BTreeMap<String, (Tensor, Tensor)>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected ADAM update from the gradients held in `store`.
pub fn adam_step(store: &mut ParameterStore, state: &mut AdamState, config: &TrainConfig) {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (path, slot) in store.iter_mut() {
        let (m, v) = state.moments.entry(path.to_string()).or_insert_with(|| {
            (
                Tensor::zeros(slot.value.shape()),
                Tensor::zeros(slot.value.shape()),
            )
        });
        let g = slot.grad.data();
        let (md, vd) = (m.data_mut(), v.data_mut());
        for (i, w) in slot.value.data_mut().iter_mut().enumerate() {
            md[i] = b1 * md[i] + (1.0 - b1) * g[i];
            vd[i] = b2 * vd[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = md[i] / c1;
            let v_hat = vd[i] / c2;
            *w -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert("theta", Tensor::scalar(v)).unwrap();
        s
    }

    fn set_grad(s: &mut ParameterStore, g: f64) {
        s.iter_mut().next().unwrap().1.grad.data_mut()[0] = g;
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut s = scalar_store(1.5);
        let mut st = AdamState::new();
        for _ in 0..10 {
            adam_step(&mut s, &mut st, &TrainConfig::default());
        }
        assert_eq!(s.get("theta").unwrap().data()[0], 1.5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = TrainConfig::default();
        let mut s = scalar_store(0.0);
        set_grad(&mut s, 1.0);
        adam_step(&mut s, &mut AdamState::new(), &cfg);
        let expect = -cfg.learning_rate / (1.0 + cfg.epsilon);
        assert!((s.get("theta").unwrap().data()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn converges_on_quadratic() {
        // f(θ) = (θ − 3)², optimum 3
        let cfg = TrainConfig {
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let mut s = scalar_store(0.0);
        let mut st = AdamState::new();
        for _ in 0..500 {
            let theta = s.get("theta").unwrap().data()[0];
            set_grad(&mut s, 2.0 * (theta - 3.0));
            adam_step(&mut s, &mut st, &cfg);
        }
        assert!((s.get("theta").unwrap().data()[0] - 3.0).abs() < 1e-3);
    }
}
