//! Forward graph of the network, recorded on a [`Tape`].
//!
//! Batches are laid out area-major inside each sample: row `b·N + i` holds
//! area `i` of sample `b`. Graph convolutions act on each `N`-row block.

use crate::error::{Error, Result};
use crate::model::params::gru_prefix;
use crate::model::{ModelConfig, TimeUnit};
use crate::numerics::{ParameterStore, Tape, Tensor, Var};

/// `x·W + b`
pub fn linear(tape: &mut Tape, store: &ParameterStore, prefix: &str, x: Var) -> Result<Var> {
    let w = tape.param(store, &format!("{prefix}.w"))?;
    let b = tape.param(store, &format!("{prefix}.b"))?;
    let y = tape.matmul(x, w)?;
    tape.add_row_bias(y, b)
}

/// Linear → ReLU → Linear.
pub fn two_layer(tape: &mut Tape, store: &ParameterStore, prefix: &str, x: Var) -> Result<Var> {
    let h = linear(tape, store, &format!("{prefix}.l1"), x)?;
    let h = tape.relu(h);
    linear(tape, store, &format!("{prefix}.l2"), h)
}

/// `SE` tiled over the batch plus `f_TE(te)` broadcast over areas.
///
/// `te` is `B × 36`; the result is `(B·N) × D`.
pub fn spatio_temporal_embedding(
    tape: &mut Tape,
    store: &ParameterStore,
    te: Var,
    se: Var,
) -> Result<Var> {
    let batch = tape.value(te).rows();
    let areas = tape.value(se).rows();
    let fte = two_layer(tape, store, "f_te", te)?;
    let fte = tape.repeat_rows(fte, areas);
    let se_tiled = tape.tile_rows(se, batch);
    tape.add(se_tiled, fte)
}

/// `f_in^{(unit)}(X) + STE`
pub fn embed_input(
    tape: &mut Tape,
    store: &ParameterStore,
    x: Var,
    ste: Var,
    unit: TimeUnit,
) -> Result<Var> {
    let xin = two_layer(tape, store, &format!("f_in.{}", unit.tag()), x)?;
    tape.add(xin, ste)
}

/// Learned adjacency for one areal feature, with its sentinel column.
#[derive(Debug, Clone, Copy)]
pub struct Attention {
    pub adjacency: Var,
    pub sentinel: Var,
    pub scores: Var,
}

/// Feature-similarity attention with a non-negative per-area sentinel in
/// the row denominator. `feature` is `N × V`, `se` is `N × D`.
pub fn sentinel_attention(
    tape: &mut Tape,
    store: &ParameterStore,
    name: &str,
    feature: Var,
    se: Var,
    use_sentinel: bool,
) -> Result<Attention> {
    let prefix = format!("attn.{name}");
    let w1 = tape.param(store, &format!("{prefix}.w1"))?;
    let w2 = tape.param(store, &format!("{prefix}.w2"))?;
    let d = tape.value(w1).rows() as f64;
    let u1 = tape.matmul_bt(feature, w1)?;
    let u1 = tape.relu(u1);
    let u2 = tape.matmul_bt(feature, w2)?;
    let u2 = tape.relu(u2);
    let e = tape.matmul_bt(u1, u2)?;
    let scores = tape.scale(e, 1.0 / d.sqrt());

    let fs = tape.concat_cols(&[feature, se])?;
    let s = two_layer(tape, store, &format!("{prefix}.sent"), fs)?;
    let sentinel = tape.relu(s);
    let adjacency = if use_sentinel {
        tape.sentinel_softmax(scores, sentinel)?
    } else {
        tape.row_softmax(scores)?
    };
    Ok(Attention {
        adjacency,
        sentinel,
        scores,
    })
}

/// A graph entering the recurrent cell.
#[derive(Debug, Clone, Copy)]
pub enum GraphInput {
    /// `A = I`, applied without a product.
    Identity,
    Dense(Var),
}

fn convolve(tape: &mut Tape, graph: GraphInput, z: Var) -> Result<Var> {
    match graph {
        GraphInput::Identity => Ok(z),
        GraphInput::Dense(a) => tape.graph_conv(a, z),
    }
}

/// `(1/K) Σ_k A_k Z W_k` for the gate weights named `gate`.
fn mean_graph_conv(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    graphs: &[GraphInput],
    convolved: &[Var],
    gate: &str,
) -> Result<Var> {
    let mut total: Option<Var> = None;
    for (k, &gz) in convolved.iter().enumerate() {
        let w = tape.param(store, &format!("{prefix}.g{k}.{gate}"))?;
        let term = tape.matmul(gz, w)?;
        total = Some(match total {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    let total = total.expect("at least one graph");
    Ok(tape.scale(total, 1.0 / graphs.len() as f64))
}

/// One step of the multi-graph convolutional GRU.
pub fn mfgcgru_step(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    x: Var,
    h_prev: Var,
    graphs: &[GraphInput],
) -> Result<Var> {
    if graphs.is_empty() {
        return Err(Error::Contract(
            "recurrent cell needs at least one graph".into(),
        ));
    }
    if store.contains(&format!("{prefix}.g{}.w_r", graphs.len()))
        || !store.contains(&format!("{prefix}.g{}.w_r", graphs.len() - 1))
    {
        return Err(Error::Contract(format!(
            "{} graphs supplied but {prefix} holds a different number of weight banks",
            graphs.len()
        )));
    }
    let z = tape.concat_cols(&[x, h_prev])?;
    let gz = graphs
        .iter()
        .map(|&g| convolve(tape, g, z))
        .collect::<Result<Vec<_>>>()?;

    let b_r = tape.param(store, &format!("{prefix}.b_r"))?;
    let b_u = tape.param(store, &format!("{prefix}.b_u"))?;
    let b_c = tape.param(store, &format!("{prefix}.b_c"))?;

    let r = mean_graph_conv(tape, store, prefix, graphs, &gz, "w_r")?;
    let r = tape.add_row_bias(r, b_r)?;
    let r = tape.sigmoid(r);
    let u = mean_graph_conv(tape, store, prefix, graphs, &gz, "w_u")?;
    let u = tape.add_row_bias(u, b_u)?;
    let u = tape.sigmoid(u);

    let rh = tape.mul(r, h_prev)?;
    let z2 = tape.concat_cols(&[x, rh])?;
    let gz2 = graphs
        .iter()
        .map(|&g| convolve(tape, g, z2))
        .collect::<Result<Vec<_>>>()?;
    let c = mean_graph_conv(tape, store, prefix, graphs, &gz2, "w_c")?;
    let c = tape.add_row_bias(c, b_c)?;
    let c = tape.tanh(c);

    let keep = tape.mul(u, h_prev)?;
    let one_minus_u = tape.affine(u, -1.0, 1.0);
    let fresh = tape.mul(one_minus_u, c)?;
    tape.add(keep, fresh)
}

/// Folds the cell over `inputs` from a zero state and returns the last state.
pub fn encode_sequence(
    tape: &mut Tape,
    store: &ParameterStore,
    prefix: &str,
    inputs: &[Var],
    graphs: &[GraphInput],
) -> Result<Var> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::Contract("cannot encode an empty sequence".into()))?;
    let shape = tape.value(*first).shape().to_vec();
    let mut h = tape.constant(Tensor::zeros(&shape));
    for &x in inputs {
        h = mfgcgru_step(tape, store, prefix, x, h, graphs)?;
    }
    Ok(h)
}

/// Per-area softmax weighting of the three encoder outputs, then `f_fusion`.
/// Returns the prediction and the `R × 3` weights.
pub fn weighted_fusion(
    tape: &mut Tape,
    store: &ParameterStore,
    hidden: [Var; 3],
) -> Result<(Var, Var)> {
    let mut scores = Vec::with_capacity(3);
    for (unit, &h) in TimeUnit::ALL.iter().zip(&hidden) {
        let w = tape.param(store, &format!("fusion.w_{}", unit.tag()))?;
        scores.push(tape.matmul_bt(h, w)?);
    }
    let scores = tape.concat_cols(&scores)?;
    let alpha = tape.row_softmax(scores)?;
    let mut fused: Option<Var> = None;
    for (m, &h) in hidden.iter().enumerate() {
        let part = tape.scale_rows_by_col(h, alpha, m)?;
        fused = Some(match fused {
            None => part,
            Some(acc) => tape.add(acc, part)?,
        });
    }
    let y = two_layer(tape, store, "f_fusion", fused.expect("three parts"))?;
    Ok((y, alpha))
}

/// Graph-side inputs that do not depend on the demand sample.
#[derive(Debug, Clone)]
pub struct GraphContext {
    pub proximity: Option<Tensor>,
    /// Normalized feature matrices, in `ModelConfig::features` order.
    pub features: Vec<Tensor>,
}

impl GraphContext {
    pub fn check(&self, config: &ModelConfig) -> Result<()> {
        let n = config.areas;
        if config.use_proximity {
            match &self.proximity {
                Some(p) if p.shape() == [n, n] => {}
                Some(p) => return Err(Error::dim("proximity graph", p.shape(), &[n, n])),
                None => {
                    return Err(Error::Contract(
                        "proximity graph enabled but not supplied".into(),
                    ))
                }
            }
        }
        if self.features.len() != config.features.len() {
            return Err(Error::Schema(format!(
                "model expects {} areal features, {} supplied",
                config.features.len(),
                self.features.len()
            )));
        }
        for (spec, f) in config.features.iter().zip(&self.features) {
            if f.shape() != [n, spec.components] {
                return Err(Error::dim(
                    "areal feature",
                    f.shape(),
                    &[n, spec.components],
                ));
            }
        }
        Ok(())
    }
}

/// Model-ready inputs for `B` samples.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    /// Per unit (closeness, period, trend): steps in feed order, each a
    /// `(B·N) × C` demand block and a `B × 36` calendar block.
    pub units: [Vec<(Tensor, Tensor)>; 3],
    /// `(B·N) × C`
    pub target: Tensor,
}

/// Every tape handle of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub prediction: Var,
    pub alpha: Var,
    pub hidden: [Var; 3],
    pub attention: Vec<Attention>,
}

pub fn forward(
    tape: &mut Tape,
    store: &ParameterStore,
    config: &ModelConfig,
    context: &GraphContext,
    batch: &Batch,
) -> Result<ForwardOutput> {
    context.check(config)?;
    let se = tape.param(store, "se")?;
    if tape.value(se).rows() != config.areas {
        return Err(Error::dim(
            "spatial embedding",
            tape.value(se).shape(),
            &[config.areas, config.hidden],
        ));
    }

    let mut graphs = Vec::with_capacity(config.graph_count());
    if config.use_identity {
        graphs.push(GraphInput::Identity);
    }
    if config.use_proximity {
        let p = context.proximity.clone().expect("checked above");
        graphs.push(GraphInput::Dense(tape.constant(p)));
    }
    let mut attention = Vec::with_capacity(config.features.len());
    for (spec, f) in config.features.iter().zip(&context.features) {
        let fv = tape.constant(f.clone());
        let att = sentinel_attention(tape, store, &spec.name, fv, se, config.sentinel)?;
        graphs.push(GraphInput::Dense(att.adjacency));
        attention.push(att);
    }

    let mut hidden = Vec::with_capacity(3);
    for (unit, steps) in TimeUnit::ALL.iter().zip(&batch.units) {
        let mut inputs = Vec::with_capacity(steps.len());
        for (x, te) in steps {
            if x.shape() != [batch.size * config.areas, config.channels] {
                return Err(Error::dim(
                    "batch input",
                    x.shape(),
                    &[batch.size * config.areas, config.channels],
                ));
            }
            let te = tape.constant(te.clone());
            let ste = spatio_temporal_embedding(tape, store, te, se)?;
            let x = tape.constant(x.clone());
            inputs.push(embed_input(tape, store, x, ste, *unit)?);
        }
        hidden.push(encode_sequence(
            tape,
            store,
            &gru_prefix(*unit),
            &inputs,
            &graphs,
        )?);
    }
    let hidden = [hidden[0], hidden[1], hidden[2]];
    let (prediction, alpha) = weighted_fusion(tape, store, hidden)?;
    Ok(ForwardOutput {
        prediction,
        alpha,
        hidden,
        attention,
    })
}

/// Mean absolute error over every area, channel and batch element.
pub fn l1_loss(tape: &mut Tape, prediction: Var, target: &Tensor) -> Result<Var> {
    tape.l1_loss(prediction, target)
}

/// Forward plus loss; returns the tape and the loss handle.
pub fn batch_loss(
    store: &ParameterStore,
    config: &ModelConfig,
    context: &GraphContext,
    batch: &Batch,
) -> Result<(Tape, Var)> {
    let mut tape = Tape::new();
    let out = forward(&mut tape, store, config, context, batch)?;
    let loss = l1_loss(&mut tape, out.prediction, &batch.target)?;
    Ok((tape, loss))
}

/// Plain prediction without keeping the tape.
pub fn predict(
    store: &ParameterStore,
    config: &ModelConfig,
    context: &GraphContext,
    batch: &Batch,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let out = forward(&mut tape, store, config, context, batch)?;
    Ok(tape.value(out.prediction).clone())
}
