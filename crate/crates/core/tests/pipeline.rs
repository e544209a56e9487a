use mfgcrn::data::{write_demand, write_feature, write_holidays, write_registry, ScenarioConfig};
use mfgcrn::experiment::{
    prepare, run_ablation, run_seed, DataSettings, Dataset, ModelSettings, PreparedData, Variant,
};
use mfgcrn::model::{load_checkpoint, save_checkpoint};
use mfgcrn::train::{evaluate, fit, train, TrainConfig};
use proptest::prelude::*;

fn small_data(seed: u64) -> PreparedData {
    let scenario = ScenarioConfig {
        areas: 5,
        weeks: 4,
        interval_minutes: 60,
        ..ScenarioConfig::default()
    };
    let settings = DataSettings {
        closeness: 3,
        period: 2,
        trend: 1,
        ..DataSettings::default()
    };
    prepare(&Dataset::synthetic(&scenario, seed).unwrap(), &settings).unwrap()
}

fn small_model() -> ModelSettings {
    ModelSettings {
        hidden: 6,
        ..ModelSettings::default()
    }
}

fn quick(max_epochs: usize) -> TrainConfig {
    TrainConfig {
        max_epochs,
        batch_size: 16,
        patience: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn patience_one_stops_after_first_worse_epoch() {
    let r = fit(
        0usize,
        50,
        1,
        |s, e| {
            *s = e;
            Ok(0.0)
        },
        |_, e| Ok(e as f64),
    )
    .unwrap();
    assert_eq!((r.best_epoch, r.epochs_run, r.best_state), (1, 2, 1));
    assert!(r.stopped_early);
}

#[test]
fn equal_losses_do_not_count_as_improvement() {
    let r = fit(
        0usize,
        50,
        2,
        |s, e| {
            *s = e;
            Ok(0.0)
        },
        |_, _| Ok(1.0),
    )
    .unwrap();
    assert_eq!((r.best_epoch, r.epochs_run, r.best_state), (1, 3, 1));
}

#[test]
fn trainer_restores_best_epoch_and_reports_curve() {
    let data = small_data(1);
    let cfg = data.model_config(&small_model()).unwrap();
    let ctx = data.context(&cfg).unwrap();
    let tc = quick(6);
    let out = train(
        &cfg,
        &ctx,
        &data.stats.demand,
        &data.train,
        &data.val,
        &tc,
        3,
    )
    .unwrap();
    assert_eq!(out.curve[0].epoch, 0);
    assert!(out.curve[0].train_loss.is_none());
    assert!(out.curve.len() <= 7);
    let best = out
        .curve
        .iter()
        .map(|p| p.val_loss)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(out.best_val_loss, best);
    // the returned weights are the best epoch's: their validation loss matches
    let again =
        mfgcrn::train::mean_loss(&out.params, &cfg, &ctx, &data.stats.demand, &data.val, 16)
            .unwrap();
    assert!((again - out.best_val_loss).abs() < 1e-12);
}

#[test]
fn validation_loss_drops_early() {
    let data = small_data(2);
    let cfg = data.model_config(&small_model()).unwrap();
    let ctx = data.context(&cfg).unwrap();
    let tc = TrainConfig {
        max_epochs: 20,
        patience: 20,
        ..quick(20)
    };
    let out = train(
        &cfg,
        &ctx,
        &data.stats.demand,
        &data.train,
        &data.val,
        &tc,
        0,
    )
    .unwrap();
    let start = out.curve[0].val_loss;
    assert!(
        out.best_val_loss <= 0.7 * start,
        "{start} -> {}",
        out.best_val_loss
    );
}

#[test]
fn same_seed_same_curve_different_seed_differs() {
    let data = small_data(3);
    let cfg = data.model_config(&small_model()).unwrap();
    let a = run_seed(&data, &cfg, &quick(3), 5).unwrap();
    let b = run_seed(&data, &cfg, &quick(3), 5).unwrap();
    let c = run_seed(&data, &cfg, &quick(3), 6).unwrap();
    let bits = |r: &mfgcrn::experiment::SeedRun| {
        r.outcome
            .curve
            .iter()
            .map(|p| p.val_loss.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.test, b.test);
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn evaluation_ignores_batch_partitioning() {
    let data = small_data(4);
    let cfg = data.model_config(&small_model()).unwrap();
    let ctx = data.context(&cfg).unwrap();
    let params = mfgcrn::model::init_parameters(&cfg, 8).unwrap();
    let whole = evaluate(
        &params,
        &cfg,
        &ctx,
        &data.stats.demand,
        &data.test,
        data.test.len(),
    )
    .unwrap();
    for bs in [1, 7, 32] {
        let m = evaluate(&params, &cfg, &ctx, &data.stats.demand, &data.test, bs).unwrap();
        assert!((m.rmse - whole.rmse).abs() < 1e-9 && (m.mae - whole.mae).abs() < 1e-9);
        assert_eq!(m.count, whole.count);
    }
}

#[test]
fn ablation_duplicate_and_single_subsets() {
    let data = small_data(5);
    let v = |name: &str, f: &[&str]| Variant {
        name: name.into(),
        features: f.iter().map(|s| s.to_string()).collect(),
        use_proximity: true,
        use_identity: true,
    };
    let rows = run_ablation(
        &data,
        &small_model(),
        &[v("a", &["info0"]), v("b", &["info0"])],
        &quick(2),
        &[0, 1],
        2,
    )
    .unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].report.per_seed, rows[1].report.per_seed);

    let single = run_ablation(
        &data,
        &small_model(),
        &[v("only", &["noise0"])],
        &quick(2),
        &[0],
        1,
    )
    .unwrap();
    assert_eq!(single.len(), 1);
    assert_eq!(
        single[0].report.mean_rmse,
        single[0].report.per_seed[0].1.rmse
    );

    let unknown = run_ablation(
        &data,
        &small_model(),
        &[v("x", &["nope"])],
        &quick(2),
        &[0],
        1,
    );
    assert_eq!(unknown.unwrap_err().category(), "schema");
}

#[test]
fn checkpoint_file_round_trip_scores_identically() {
    let data = small_data(6);
    let cfg = data.model_config(&small_model()).unwrap();
    let run = run_seed(&data, &cfg, &quick(2), 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    save_checkpoint(&path, &cfg, &run.outcome.params).unwrap();
    let (cfg2, params2) = load_checkpoint(&path).unwrap();
    assert_eq!(cfg2, cfg);
    let m = mfgcrn::experiment::score(&data, &cfg2, &params2, 16).unwrap();
    assert_eq!(m, run.test);
}

#[test]
fn written_dataset_loads_back_identically() {
    let scenario = ScenarioConfig {
        areas: 4,
        weeks: 3,
        interval_minutes: 30,
        ..ScenarioConfig::default()
    };
    let ds = Dataset::synthetic(&scenario, 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| dir.path().join(f);
    write_registry(&p("registry.csv"), &ds.registry).unwrap();
    write_demand(&p("demand.csv"), &ds.series).unwrap();
    write_holidays(&p("holidays.csv"), &ds.calendar).unwrap();
    let mut features = Vec::new();
    for f in &ds.features {
        let path = p(&format!("{}.csv", f.name));
        write_feature(&path, f, &ds.registry.ids).unwrap();
        features.push((f.name.clone(), path));
    }
    let back = Dataset::from_files(
        &p("registry.csv"),
        &p("demand.csv"),
        &features,
        Some(&p("holidays.csv")),
        None,
    )
    .unwrap();
    assert_eq!(back.registry, ds.registry);
    assert_eq!(back.series.values(), ds.series.values());
    assert_eq!(back.series.interval_minutes(), 30);
    assert_eq!(
        back.calendar.dates().collect::<Vec<_>>(),
        ds.calendar.dates().collect::<Vec<_>>()
    );
    for (a, b) in back.features.iter().zip(&ds.features) {
        assert_eq!(a.matrix, b.matrix);
    }
}

#[test]
fn target_hour_filter_and_stride_shrink_splits() {
    let scenario = ScenarioConfig {
        areas: 3,
        weeks: 4,
        interval_minutes: 60,
        ..ScenarioConfig::default()
    };
    let ds = Dataset::synthetic(&scenario, 1).unwrap();
    let base = DataSettings {
        closeness: 2,
        period: 1,
        trend: 1,
        ..DataSettings::default()
    };
    let all = prepare(&ds, &base).unwrap();
    let hours = prepare(
        &ds,
        &DataSettings {
            target_hours: Some(mfgcrn::data::HourRange { first: 6, last: 21 }),
            ..base.clone()
        },
    )
    .unwrap();
    assert_eq!(all.test.len(), 7 * 24);
    assert_eq!(hours.test.len(), 7 * 16);
    assert_eq!(hours.val.len(), 7 * 16);
    let strided = prepare(
        &ds,
        &DataSettings {
            train_stride: 3,
            ..base
        },
    )
    .unwrap();
    assert_eq!(strided.train.len(), all.train.len().div_ceil(3));
    assert_eq!(strided.test.len(), all.test.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normalized_training_inputs_lie_in_unit_box(seed in 0u64..1000) {
        let data = small_data(seed);
        for s in &data.train {
            let x = data.stats.demand.apply(&s.closeness.frames[0]).unwrap();
            prop_assert!(x.data().iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
        }
        for f in &data.features {
            prop_assert!(f.matrix.data().iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
        }
    }
}
