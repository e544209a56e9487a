use mfgcrn::data::TE_WIDTH;
use mfgcrn::model::{
    embed_input, encode_sequence, forward, init_parameters, l1_loss, mfgcgru_step,
    sentinel_attention, spatio_temporal_embedding, two_layer, weighted_fusion, Batch, FeatureSpec,
    GraphContext, GraphInput, ModelConfig, TimeUnit,
};
use mfgcrn::numerics::{ParameterStore, Tape, Tensor};
use mfgcrn::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Tensor {
    Tensor::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

fn set(store: &mut ParameterStore, path: &str, value: Tensor) {
    *store.get_mut(path).unwrap() = value;
}

fn zero(store: &mut ParameterStore, path: &str) {
    let shape = store.get(path).unwrap().shape().to_vec();
    set(store, path, Tensor::zeros(&shape));
}

fn config(n: usize, d: usize, features: &[(&str, usize)]) -> ModelConfig {
    let specs = features
        .iter()
        .map(|(name, v)| FeatureSpec {
            name: name.to_string(),
            components: *v,
        })
        .collect();
    let mut c = ModelConfig::new(n, 2, d, specs);
    c.closeness = 3;
    c.period = 2;
    c.trend = 2;
    c
}

fn one_hot_te(hot: &[usize]) -> Tensor {
    let mut t = Tensor::zeros(&[1, TE_WIDTH]);
    for &h in hot {
        t.set(0, h, 1.0);
    }
    t
}

#[test]
fn ste_zero_se_broadcasts_fte() {
    let cfg = config(3, 4, &[]);
    let mut store = init_parameters(&cfg, 1).unwrap();
    zero(&mut store, "se");
    let mut tape = Tape::new();
    let te = tape.constant(one_hot_te(&[2, 7 + 8, 31 + 1]));
    let se = tape.param(&store, "se").unwrap();
    let ste = spatio_temporal_embedding(&mut tape, &store, te, se).unwrap();
    let v = two_layer(&mut tape, &store, "f_te", te).unwrap();
    let (out, v) = (tape.value(ste), tape.value(v));
    for i in 0..3 {
        assert_eq!(out.row(i), v.row(0));
    }
}

#[test]
fn ste_zero_fte_is_se() {
    let cfg = config(3, 4, &[]);
    let mut store = init_parameters(&cfg, 2).unwrap();
    zero(&mut store, "f_te.l2.w");
    let mut tape = Tape::new();
    let te = tape.constant(one_hot_te(&[0, 7, 31]));
    let se = tape.param(&store, "se").unwrap();
    let ste = spatio_temporal_embedding(&mut tape, &store, te, se).unwrap();
    assert_eq!(tape.value(ste), store.get("se").unwrap());
}

#[test]
fn ste_equal_encodings_equal_output() {
    let cfg = config(4, 5, &[]);
    let store = init_parameters(&cfg, 3).unwrap();
    let mut tape = Tape::new();
    let se = tape.param(&store, "se").unwrap();
    let a = tape.constant(one_hot_te(&[4, 7 + 17, 31 + 3, 35]));
    let b = tape.constant(one_hot_te(&[4, 7 + 17, 31 + 3, 35]));
    let sa = spatio_temporal_embedding(&mut tape, &store, a, se).unwrap();
    let sb = spatio_temporal_embedding(&mut tape, &store, b, se).unwrap();
    assert_eq!(tape.value(sa), tape.value(sb));
}

#[test]
fn embed_input_zero_map_is_ste() {
    let cfg = config(3, 4, &[]);
    let mut store = init_parameters(&cfg, 4).unwrap();
    zero(&mut store, "f_in.c.l2.w");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tape = Tape::new();
    let x = tape.constant(random(&mut rng, 3, 2, 1.0));
    let ste = tape.constant(random(&mut rng, 3, 4, 1.0));
    let out = embed_input(&mut tape, &store, x, ste, TimeUnit::Closeness).unwrap();
    assert_eq!(tape.value(out), tape.value(ste));
}

#[test]
fn embed_input_units_have_their_own_weights() {
    let cfg = config(3, 4, &[]);
    let store = init_parameters(&cfg, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tape = Tape::new();
    let x = tape.constant(random(&mut rng, 3, 2, 1.0));
    let ste = tape.constant(Tensor::zeros(&[3, 4]));
    let c = embed_input(&mut tape, &store, x, ste, TimeUnit::Closeness).unwrap();
    let p = embed_input(&mut tape, &store, x, ste, TimeUnit::Period).unwrap();
    assert!(tape.value(c).max_abs_diff(tape.value(p)) > 1e-6);
}

#[test]
fn embed_input_scalar_evaluation() {
    // one area, C=2, D=2
    let mut cfg = config(1, 2, &[]);
    cfg.channels = 2;
    let mut store = init_parameters(&cfg, 6).unwrap();
    set(
        &mut store,
        "f_in.q.l1.w",
        Tensor::from_rows(&[vec![1.0, -1.0], vec![2.0, 0.5]]),
    );
    set(
        &mut store,
        "f_in.q.l1.b",
        Tensor::from_rows(&[vec![0.1, -0.2]]),
    );
    set(
        &mut store,
        "f_in.q.l2.w",
        Tensor::from_rows(&[vec![3.0, 0.0], vec![-1.0, 1.0]]),
    );
    set(
        &mut store,
        "f_in.q.l2.b",
        Tensor::from_rows(&[vec![0.0, 0.5]]),
    );
    let (x0, x1) = (0.4, 0.3);
    let h0 = (x0 * 1.0 + x1 * 2.0 + 0.1f64).max(0.0);
    let h1 = (x0 * -1.0 + x1 * 0.5 - 0.2f64).max(0.0);
    let expect = [h0 * 3.0 + h1 * -1.0 + 0.25, h1 + 0.5 - 0.75];
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::from_rows(&[vec![x0, x1]]));
    let ste = tape.constant(Tensor::from_rows(&[vec![0.25, -0.75]]));
    let out = embed_input(&mut tape, &store, x, ste, TimeUnit::Trend).unwrap();
    for (a, b) in tape.value(out).data().iter().zip(expect) {
        assert!((a - b).abs() < 1e-15, "{a} vs {b}");
    }
}

#[test]
fn attention_without_sentinel_mass_is_softmax() {
    let cfg = config(5, 4, &[("poi", 3)]);
    let mut store = init_parameters(&cfg, 7).unwrap();
    // f_sent ends in ReLU; a large negative bias forces S = 0
    set(&mut store, "attn.poi.sent.l2.b", Tensor::scalar(-1e6));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut tape = Tape::new();
    let f = tape.constant(Tensor::from_fn(5, 3, |_, _| rng.random::<f64>()));
    let se = tape.param(&store, "se").unwrap();
    let att = sentinel_attention(&mut tape, &store, "poi", f, se, true).unwrap();
    let plain = sentinel_attention(&mut tape, &store, "poi", f, se, false).unwrap();
    let a = tape.value(att.adjacency);
    for i in 0..5 {
        assert!((a.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert!(a.max_abs_diff(tape.value(plain.adjacency)) < 1e-9);
}

#[test]
fn attention_identical_rows_uniform() {
    let cfg = config(4, 3, &[("lu", 2)]);
    let mut store = init_parameters(&cfg, 8).unwrap();
    set(&mut store, "attn.lu.sent.l2.b", Tensor::scalar(-1e6));
    let mut tape = Tape::new();
    let f = tape.constant(Tensor::full(&[4, 2], 0.3));
    let se = tape.param(&store, "se").unwrap();
    let att = sentinel_attention(&mut tape, &store, "lu", f, se, true).unwrap();
    for v in tape.value(att.adjacency).data() {
        assert!((v - 0.25).abs() < 1e-12);
    }
}

#[test]
fn sentinel_rows_sum_below_one() {
    let cfg = config(6, 4, &[("poi", 3)]);
    let mut store = init_parameters(&cfg, 9).unwrap();
    set(&mut store, "attn.poi.sent.l2.b", Tensor::scalar(0.5));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut tape = Tape::new();
    let f = tape.constant(Tensor::from_fn(6, 3, |_, _| rng.random::<f64>()));
    let se = tape.param(&store, "se").unwrap();
    let att = sentinel_attention(&mut tape, &store, "poi", f, se, true).unwrap();
    let (a, s, e) = (
        tape.value(att.adjacency),
        tape.value(att.sentinel),
        tape.value(att.scores),
    );
    for i in 0..6 {
        let big_e: f64 = e.row(i).iter().map(|v| v.exp()).sum();
        let row: f64 = a.row(i).iter().sum();
        assert!(s.get(i, 0) > 0.0);
        assert!((row - big_e / (s.get(i, 0) + big_e)).abs() < 1e-12);
        assert!(row < 1.0);
    }
}

#[test]
fn saturated_update_gate_keeps_state() {
    let cfg = config(3, 4, &[]);
    let mut store = init_parameters(&cfg, 10).unwrap();
    set(&mut store, "gru.c.b_u", Tensor::full(&[1, 4], 20.0));
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut tape = Tape::new();
    let x = tape.constant(random(&mut rng, 3, 4, 1.0));
    let h = tape.constant(random(&mut rng, 3, 4, 1.0));
    let prox = tape.constant(Tensor::full(&[3, 3], 1.0 / 3.0));
    let out = mfgcgru_step(
        &mut tape,
        &store,
        "gru.c",
        x,
        h,
        &[GraphInput::Identity, GraphInput::Dense(prox)],
    )
    .unwrap();
    assert!(tape.value(out).max_abs_diff(tape.value(h)) < 1e-6);
}

#[test]
fn graph_count_mismatch_is_contract_error() {
    let cfg = config(3, 4, &[]);
    let store = init_parameters(&cfg, 11).unwrap();
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(&[3, 4]));
    let h = tape.constant(Tensor::zeros(&[3, 4]));
    let err = mfgcgru_step(&mut tape, &store, "gru.c", x, h, &[GraphInput::Identity]).unwrap_err();
    assert!(matches!(err, Error::Contract(_)), "{err}");
    let three = [GraphInput::Identity; 3];
    assert!(matches!(
        mfgcgru_step(&mut tape, &store, "gru.c", x, h, &three),
        Err(Error::Contract(_))
    ));
}

fn two_graph_setup(seed: u64) -> (ParameterStore, Tape, [GraphInput; 2], ChaCha8Rng) {
    let cfg = config(3, 4, &[]);
    let store = init_parameters(&cfg, seed).unwrap();
    let mut tape = Tape::new();
    let prox = tape.constant(Tensor::from_rows(&[
        vec![0.5, 0.3, 0.2],
        vec![0.3, 0.4, 0.3],
        vec![0.1, 0.2, 0.7],
    ]));
    (
        store,
        tape,
        [GraphInput::Identity, GraphInput::Dense(prox)],
        ChaCha8Rng::seed_from_u64(seed),
    )
}

#[test]
fn single_step_sequence_is_one_step() {
    let (store, mut tape, graphs, mut rng) = two_graph_setup(12);
    let x = tape.constant(random(&mut rng, 3, 4, 1.0));
    let enc = encode_sequence(&mut tape, &store, "gru.p", &[x], &graphs).unwrap();
    let h0 = tape.constant(Tensor::zeros(&[3, 4]));
    let step = mfgcgru_step(&mut tape, &store, "gru.p", x, h0, &graphs).unwrap();
    assert_eq!(tape.value(enc), tape.value(step));
}

#[test]
fn two_step_sequence_is_composition() {
    let (store, mut tape, graphs, mut rng) = two_graph_setup(13);
    let x1 = tape.constant(random(&mut rng, 3, 4, 1.0));
    let x2 = tape.constant(random(&mut rng, 3, 4, 1.0));
    let enc = encode_sequence(&mut tape, &store, "gru.q", &[x1, x2], &graphs).unwrap();
    let h0 = tape.constant(Tensor::zeros(&[3, 4]));
    let h1 = mfgcgru_step(&mut tape, &store, "gru.q", x1, h0, &graphs).unwrap();
    let h2 = mfgcgru_step(&mut tape, &store, "gru.q", x2, h1, &graphs).unwrap();
    assert_eq!(tape.value(enc), tape.value(h2));
}

#[test]
fn empty_sequence_is_contract_error() {
    let (store, mut tape, graphs, _) = two_graph_setup(14);
    assert!(matches!(
        encode_sequence(&mut tape, &store, "gru.c", &[], &graphs),
        Err(Error::Contract(_))
    ));
}

#[test]
fn hidden_state_stays_in_unit_box() {
    let (mut store, _, _, mut rng) = two_graph_setup(15);
    for rollout in 0..1000 {
        // parameters bounded by 1, inputs in [0, 1]
        for k in 0..2 {
            for gate in ["w_r", "w_u", "w_c"] {
                set(
                    &mut store,
                    &format!("gru.c.g{k}.{gate}"),
                    random(&mut rng, 8, 4, 1.0),
                );
            }
        }
        for b in ["b_r", "b_u", "b_c"] {
            set(
                &mut store,
                &format!("gru.c.{b}"),
                random(&mut rng, 1, 4, 1.0),
            );
        }
        let mut tape = Tape::new();
        let prox = tape.constant(Tensor::full(&[3, 3], 1.0 / 3.0));
        let graphs = [GraphInput::Identity, GraphInput::Dense(prox)];
        let steps = 1 + rollout % 12;
        let xs: Vec<_> = (0..steps)
            .map(|_| tape.constant(Tensor::from_fn(3, 4, |_, _| rng.random::<f64>())))
            .collect();
        let h = encode_sequence(&mut tape, &store, "gru.c", &xs, &graphs).unwrap();
        assert!(tape.value(h).data().iter().all(|v| v.abs() <= 1.0));
    }
}

#[test]
fn fusion_symmetric_inputs() {
    let cfg = config(4, 3, &[]);
    let mut store = init_parameters(&cfg, 16).unwrap();
    let w = store.get("fusion.w_c").unwrap().clone();
    set(&mut store, "fusion.w_p", w.clone());
    set(&mut store, "fusion.w_q", w);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut tape = Tape::new();
    let h = tape.constant(random(&mut rng, 4, 3, 1.0));
    let (y, alpha) = weighted_fusion(&mut tape, &store, [h, h, h]).unwrap();
    for v in tape.value(alpha).data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }
    let direct = two_layer(&mut tape, &store, "f_fusion", h).unwrap();
    assert!(tape.value(y).max_abs_diff(tape.value(direct)) < 1e-12);
}

#[test]
fn fusion_saturates_to_one_unit() {
    // N=1, D=1: scores 20, -10, -16
    let cfg = config(1, 1, &[]);
    let mut store = init_parameters(&cfg, 17).unwrap();
    set(&mut store, "fusion.w_c", Tensor::scalar(20.0));
    set(&mut store, "fusion.w_p", Tensor::scalar(-20.0));
    set(&mut store, "fusion.w_q", Tensor::scalar(-20.0));
    let mut tape = Tape::new();
    let hc = tape.constant(Tensor::scalar(1.0));
    let hp = tape.constant(Tensor::scalar(0.5));
    let hq = tape.constant(Tensor::scalar(0.8));
    let (y, alpha) = weighted_fusion(&mut tape, &store, [hc, hp, hq]).unwrap();
    assert!(tape.value(alpha).get(0, 0) > 1.0 - 1e-12);
    let direct = two_layer(&mut tape, &store, "f_fusion", hc).unwrap();
    assert!(tape.value(y).max_abs_diff(tape.value(direct)) < 1e-10);
}

#[test]
fn fusion_scalar_evaluation() {
    // N=1, D=2, C=2
    let cfg = config(1, 2, &[]);
    let mut store = init_parameters(&cfg, 18).unwrap();
    set(
        &mut store,
        "fusion.w_c",
        Tensor::from_rows(&[vec![1.0, 0.0]]),
    );
    set(
        &mut store,
        "fusion.w_p",
        Tensor::from_rows(&[vec![0.0, 1.0]]),
    );
    set(
        &mut store,
        "fusion.w_q",
        Tensor::from_rows(&[vec![0.5, 0.5]]),
    );
    set(
        &mut store,
        "f_fusion.l1.w",
        Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
    );
    set(
        &mut store,
        "f_fusion.l1.b",
        Tensor::from_rows(&[vec![0.0, 0.0]]),
    );
    set(
        &mut store,
        "f_fusion.l2.w",
        Tensor::from_rows(&[vec![1.0, 2.0], vec![-1.0, 1.0]]),
    );
    set(
        &mut store,
        "f_fusion.l2.b",
        Tensor::from_rows(&[vec![0.1, 0.0]]),
    );
    let hc: [f64; 2] = [0.2, 0.4];
    let hp = [0.6, -0.2];
    let hq = [0.0, 1.0];
    let e: [f64; 3] = [hc[0], hp[1], 0.5 * (hq[0] + hq[1])];
    let z: f64 = e.iter().map(|v| v.exp()).sum();
    let a: Vec<f64> = e.iter().map(|v| v.exp() / z).collect();
    let fused = [
        a[0] * hc[0] + a[1] * hp[0] + a[2] * hq[0],
        a[0] * hc[1] + a[1] * hp[1] + a[2] * hq[1],
    ];
    let r = [fused[0].max(0.0), fused[1].max(0.0)];
    let expect = [r[0] - r[1] + 0.1, 2.0 * r[0] + r[1]];

    let mut tape = Tape::new();
    let vc = tape.constant(Tensor::from_rows(&[hc.to_vec()]));
    let vp = tape.constant(Tensor::from_rows(&[hp.to_vec()]));
    let vq = tape.constant(Tensor::from_rows(&[hq.to_vec()]));
    let (y, alpha) = weighted_fusion(&mut tape, &store, [vc, vp, vq]).unwrap();
    for (got, want) in tape.value(alpha).data().iter().zip(&a) {
        assert!((got - want).abs() < 1e-15);
    }
    for (got, want) in tape.value(y).data().iter().zip(expect) {
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
    }
}

fn random_batch(cfg: &ModelConfig, b: usize, rng: &mut ChaCha8Rng) -> Batch {
    let rows = b * cfg.areas;
    let unit = |len: usize, rng: &mut ChaCha8Rng| {
        (0..len)
            .map(|_| {
                let x = Tensor::from_fn(rows, cfg.channels, |_, _| rng.random::<f64>());
                let mut te = Tensor::zeros(&[b, TE_WIDTH]);
                for s in 0..b {
                    te.set(s, rng.random_range(0..7), 1.0);
                    te.set(s, 7 + rng.random_range(0..24), 1.0);
                    te.set(s, 31 + rng.random_range(0..4), 1.0);
                }
                (x, te)
            })
            .collect::<Vec<_>>()
    };
    Batch {
        size: b,
        units: [
            unit(cfg.closeness, rng),
            unit(cfg.period, rng),
            unit(cfg.trend, rng),
        ],
        target: Tensor::from_fn(rows, cfg.channels, |_, _| rng.random::<f64>()),
    }
}

fn random_context(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> GraphContext {
    let n = cfg.areas;
    let mut prox = Tensor::from_fn(n, n, |_, _| rng.random_range(0.1..1.0));
    for i in 0..n {
        let s: f64 = prox.row(i).iter().sum();
        for j in 0..n {
            prox.set(i, j, prox.get(i, j) / s);
        }
    }
    GraphContext {
        proximity: cfg.use_proximity.then_some(prox),
        features: cfg
            .features
            .iter()
            .map(|f| Tensor::from_fn(n, f.components, |_, _| rng.random::<f64>()))
            .collect(),
    }
}

#[test]
fn forward_is_deterministic() {
    let cfg = config(4, 3, &[("poi", 2)]);
    let store = init_parameters(&cfg, 19).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let batch = random_batch(&cfg, 2, &mut rng);
    let ctx = random_context(&cfg, &mut rng);
    let run = || {
        let mut tape = Tape::new();
        let out = forward(&mut tape, &store, &cfg, &ctx, &batch).unwrap();
        tape.value(out.prediction).clone()
    };
    assert_eq!(run().data(), run().data());
}

#[test]
fn identity_only_model_runs() {
    let mut cfg = config(3, 4, &[]);
    cfg.use_proximity = false;
    let store = init_parameters(&cfg, 20).unwrap();
    assert!(!store.contains("gru.c.g1.w_r"));
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let batch = random_batch(&cfg, 3, &mut rng);
    let ctx = GraphContext {
        proximity: None,
        features: vec![],
    };
    let mut tape = Tape::new();
    let out = forward(&mut tape, &store, &cfg, &ctx, &batch).unwrap();
    assert_eq!(tape.value(out.prediction).shape(), [9, 2]);
    assert!(tape.value(out.prediction).is_finite());
}

#[test]
fn permuting_areas_permutes_prediction() {
    let cfg = config(5, 4, &[("poi", 3), ("lu", 2)]);
    let store = init_parameters(&cfg, 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let batch = random_batch(&cfg, 1, &mut rng);
    let ctx = random_context(&cfg, &mut rng);
    let perm = [3usize, 0, 4, 1, 2];
    let rows = |t: &Tensor| Tensor::from_fn(t.rows(), t.cols(), |i, j| t.get(perm[i], j));
    let both = |t: &Tensor| Tensor::from_fn(t.rows(), t.cols(), |i, j| t.get(perm[i], perm[j]));

    let mut pstore = store.clone();
    set(&mut pstore, "se", rows(store.get("se").unwrap()));
    let pctx = GraphContext {
        proximity: ctx.proximity.as_ref().map(both),
        features: ctx.features.iter().map(rows).collect(),
    };
    let punits = batch
        .units
        .clone()
        .map(|steps| steps.into_iter().map(|(x, te)| (rows(&x), te)).collect());
    let pbatch = Batch {
        size: 1,
        units: punits,
        target: rows(&batch.target),
    };

    let mut tape = Tape::new();
    let y = forward(&mut tape, &store, &cfg, &ctx, &batch)
        .unwrap()
        .prediction;
    let y = tape.value(y).clone();
    let mut tape = Tape::new();
    let py = forward(&mut tape, &pstore, &cfg, &pctx, &pbatch)
        .unwrap()
        .prediction;
    assert!(tape.value(py).max_abs_diff(&rows(&y)) < 1e-10);
}

#[test]
fn every_parameter_receives_gradient() {
    let cfg = config(4, 3, &[("poi", 2)]);
    let mut store = init_parameters(&cfg, 22).unwrap();
    // non-zero biases keep ReLU units alive and sentinels positive
    for path in store.paths().map(str::to_string).collect::<Vec<_>>() {
        if path.ends_with(".b")
            || path.ends_with("b_r")
            || path.ends_with("b_u")
            || path.ends_with("b_c")
        {
            let shape = store.get(&path).unwrap().shape().to_vec();
            set(&mut store, &path, Tensor::full(&shape, 0.1));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut batch = random_batch(&cfg, 2, &mut rng);
    batch.target = batch.target.map(|v| v + 5.0);
    let ctx = random_context(&cfg, &mut rng);
    let mut tape = Tape::new();
    let out = forward(&mut tape, &store, &cfg, &ctx, &batch).unwrap();
    let loss = l1_loss(&mut tape, out.prediction, &batch.target).unwrap();
    tape.backward(loss, &mut store).unwrap();
    for (path, slot) in store.iter() {
        let norm: f64 = slot.grad.data().iter().map(|g| g.abs()).sum();
        assert!(norm > 0.0, "{path} has zero gradient");
    }
}

#[test]
fn l1_examples() {
    let mut tape = Tape::new();
    let y = Tensor::from_rows(&[vec![1.0, 1.0]]);
    let same = tape.constant(y.clone());
    let zero = l1_loss(&mut tape, same, &y).unwrap();
    assert_eq!(tape.value(zero).data(), &[0.0]);
    let p = tape.constant(Tensor::from_rows(&[vec![0.0, 3.0]]));
    let l = l1_loss(&mut tape, p, &y).unwrap();
    assert_eq!(tape.value(l).data(), &[1.5]);
}

#[test]
fn l1_is_area_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let p = random(&mut rng, 6, 2, 3.0);
    let y = random(&mut rng, 6, 2, 3.0);
    let perm = [5usize, 2, 0, 1, 4, 3];
    let rows = |t: &Tensor| Tensor::from_fn(6, 2, |i, j| t.get(perm[i], j));
    let mut tape = Tape::new();
    let a = tape.constant(p.clone());
    let la = l1_loss(&mut tape, a, &y).unwrap();
    let b = tape.constant(rows(&p));
    let lb = l1_loss(&mut tape, b, &rows(&y)).unwrap();
    assert!((tape.value(la).data()[0] - tape.value(lb).data()[0]).abs() < 1e-15);
}
