use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::TE_WIDTH;
use crate::error::Result;
use crate::model::{ModelConfig, TimeUnit};
use crate::numerics::{ParameterStore, Tensor};

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

fn two_layer(
    store: &mut ParameterStore,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    input: usize,
    hidden: usize,
    output: usize,
) -> Result<()> {
    store.insert(format!("{prefix}.l1.w"), glorot(rng, input, hidden))?;
    store.insert(format!("{prefix}.l1.b"), Tensor::zeros(&[1, hidden]))?;
    store.insert(format!("{prefix}.l2.w"), glorot(rng, hidden, output))?;
    store.insert(format!("{prefix}.l2.b"), Tensor::zeros(&[1, output]))?;
    Ok(())
}

pub fn gru_prefix(unit: TimeUnit) -> String {
    format!("gru.{}", unit.tag())
}

/// Fresh parameters: Glorot-uniform weights, zero biases, `N(0, 0.01²)` for
/// the spatial embedding.
pub fn init_parameters(config: &ModelConfig, seed: u64) -> Result<ParameterStore> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParameterStore::new();
    let d = config.hidden;

    let se_dist = Normal::new(0.0, 0.01).expect("valid normal");
    store.insert(
        "se",
        Tensor::from_fn(config.areas, d, |_, _| se_dist.sample(&mut rng)),
    )?;
    two_layer(&mut store, &mut rng, "f_te", TE_WIDTH, d, d)?;
    for unit in TimeUnit::ALL {
        two_layer(
            &mut store,
            &mut rng,
            &format!("f_in.{}", unit.tag()),
            config.channels,
            d,
            d,
        )?;
    }
    for f in &config.features {
        let prefix = format!("attn.{}", f.name);
        store.insert(format!("{prefix}.w1"), glorot(&mut rng, d, f.components))?;
        store.insert(format!("{prefix}.w2"), glorot(&mut rng, d, f.components))?;
        two_layer(
            &mut store,
            &mut rng,
            &format!("{prefix}.sent"),
            f.components + d,
            d,
            1,
        )?;
    }
    for unit in TimeUnit::ALL {
        let prefix = gru_prefix(unit);
        for k in 0..config.graph_count() {
            for gate in ["w_r", "w_u", "w_c"] {
                store.insert(format!("{prefix}.g{k}.{gate}"), glorot(&mut rng, 2 * d, d))?;
            }
        }
        for bias in ["b_r", "b_u", "b_c"] {
            store.insert(format!("{prefix}.{bias}"), Tensor::zeros(&[1, d]))?;
        }
    }
    for unit in TimeUnit::ALL {
        store.insert(format!("fusion.w_{}", unit.tag()), glorot(&mut rng, 1, d))?;
    }
    two_layer(&mut store, &mut rng, "f_fusion", d, d, config.channels)?;
    Ok(store)
}
