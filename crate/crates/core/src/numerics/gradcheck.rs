//! Central finite differences over every scalar of a [`ParameterStore`].

use std::collections::BTreeMap;

use crate::error::Result;
use crate::numerics::{ParameterStore, Tensor};

/// `(f(θ+h) − f(θ−h)) / 2h` for each scalar entry of each slot.
pub fn finite_diff_gradient<F>(
    mut f: F,
    store: &ParameterStore,
    h: f64,
) -> Result<BTreeMap<String, Tensor>>
where
    F: FnMut(&ParameterStore) -> Result<f64>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut work = store.clone();
    let mut out = BTreeMap::new();
    let paths: Vec<String> = store.paths().map(str::to_string).collect();
    for path in paths {
        let len = store.get(&path)?.len();
        let mut grad = Tensor::zeros(store.get(&path)?.shape());
        for i in 0..len {
            let original = work.get(&path)?.data()[i];
            work.get_mut(&path)?.data_mut()[i] = original + h;
            let plus = f(&work)?;
            work.get_mut(&path)?.data_mut()[i] = original - h;
            let minus = f(&work)?;
            work.get_mut(&path)?.data_mut()[i] = original;
            grad.data_mut()[i] = (plus - minus) / (2.0 * h);
        }
        out.insert(path, grad);
    }
    Ok(out)
}

/// `|a − b| / max(|a|, |b|, 1e-8)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[derive(Debug, Clone)]
pub struct SlotCheck {
    pub path: String,
    pub max_relative_error: f64,
    pub entries: usize,
}

impl SlotCheck {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_error <= tolerance
    }
}

/// Compares the analytic gradients held in `store` against `numeric`.
pub fn compare_gradients(
    store: &ParameterStore,
    numeric: &BTreeMap<String, Tensor>,
) -> Result<Vec<SlotCheck>> {
    let mut checks = Vec::new();
    for (path, num) in numeric {
        let analytic = store.grad(path)?;
        let max = analytic
            .data()
            .iter()
            .zip(num.data())
            .map(|(&a, &b)| relative_error(a, b))
            .fold(0.0, f64::max);
        checks.push(SlotCheck {
            path: path.clone(),
            max_relative_error: max,
            entries: num.len(),
        });
    }
    Ok(checks)
}
