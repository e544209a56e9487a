//! End-to-end pipeline: split a dataset, normalize, build graphs, train and
//! score a model per seed, and sweep feature subsets.

use std::path::{Path, PathBuf};
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::data::TE_WIDTH;
use crate::data::{
    eligible_targets, fit_minmax, generate_synthetic, load_demand, load_feature, load_holidays,
    load_registry, slice_cpt, AreaRegistry, ArealFeature, CptConfig, CptSample, DateRange,
    DemandSeries, HolidayCalendar, HourRange, NormalizationStats, ScenarioConfig,
};
use crate::error::{Error, Result};
use crate::graphs::{distance_matrix, gaussian_proximity};
use crate::model::{
    batch_loss, init_parameters, predict, Batch, FeatureSpec, GraphContext, ModelConfig,
};
use crate::numerics::{compare_gradients, finite_diff_gradient, ParameterStore, SlotCheck, Tensor};
use crate::train::{
    evaluate, evaluate_baseline, train, BaselineKind, EvalReport, Metrics, TrainConfig,
    TrainOutcome,
};

/// Raw inputs of one city (or one synthetic scenario).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub series: DemandSeries,
    pub registry: AreaRegistry,
    pub features: Vec<ArealFeature>,
    pub calendar: HolidayCalendar,
}

impl Dataset {
    pub fn synthetic(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        let s = generate_synthetic(config, seed)?;
        Ok(Self {
            series: s.series,
            registry: s.registry,
            features: s.features,
            calendar: s.calendar,
        })
    }

    /// Loads a registry, a demand file, named feature files and an optional
    /// holiday list.
    pub fn from_files(
        registry: &Path,
        demand: &Path,
        features: &[(String, PathBuf)],
        holidays: Option<&Path>,
        interval_minutes: Option<u32>,
    ) -> Result<Self> {
        let registry = load_registry(registry)?;
        let series = load_demand(demand, &registry, interval_minutes)?;
        let features = features
            .iter()
            .map(|(name, path)| load_feature(path, name, &registry))
            .collect::<Result<Vec<_>>>()?;
        let calendar = match holidays {
            Some(path) => load_holidays(path)?,
            None => HolidayCalendar::new([]),
        };
        Ok(Self {
            series,
            registry,
            features,
            calendar,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSettings {
    pub closeness: usize,
    pub period: usize,
    pub trend: usize,
    /// Inclusive hour range of targets; `None` keeps every hour.
    pub target_hours: Option<HourRange>,
    /// Apply `target_hours` to the training split as well as to evaluation.
    pub filter_training_hours: bool,
    /// Date spans of the three splits. Unset spans default to: last week
    /// test, the week before validation, everything earlier training.
    pub train: Option<DateRange>,
    pub val: Option<DateRange>,
    pub test: Option<DateRange>,
    pub include_diagonal_in_sigma: bool,
    /// Keep every `train_stride`-th training target.
    pub train_stride: usize,
}

impl Default for DataSettings {
    fn default() -> Self {
        Self {
            closeness: 6,
            period: 7,
            trend: 3,
            target_hours: None,
            filter_training_hours: true,
            train: None,
            val: None,
            test: None,
            include_diagonal_in_sigma: true,
            train_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub hidden: usize,
    /// Feature names to attend over; `None` uses every feature of the dataset.
    pub features: Option<Vec<String>>,
    pub use_proximity: bool,
    pub use_identity: bool,
    pub chronological: bool,
    pub sentinel: bool,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            hidden: 64,
            features: None,
            use_proximity: true,
            use_identity: true,
            chronological: true,
            sentinel: true,
        }
    }
}

/// Everything that is fixed across seeds and feature subsets.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub area_ids: Vec<String>,
    pub channels: usize,
    pub cpt: CptConfig,
    pub stats: NormalizationStats,
    pub proximity: Tensor,
    /// Normalized features, dataset order.
    pub features: Vec<ArealFeature>,
    pub train: Vec<CptSample>,
    pub val: Vec<CptSample>,
    pub test: Vec<CptSample>,
    pub splits: [DateRange; 3],
}

fn default_splits(series: &DemandSeries) -> Result<[DateRange; 3]> {
    let first = series.timestamp(0).date();
    let last = series.timestamp(series.len() - 1).date();
    let days = (last - first).num_days() + 1;
    if days < 15 {
        return Err(Error::Contract(format!(
            "default splits need at least 15 days of data, series covers {days}"
        )));
    }
    let test = DateRange {
        first: last - Duration::days(6),
        last,
    };
    let val = DateRange {
        first: test.first - Duration::days(7),
        last: test.first - Duration::days(1),
    };
    let train = DateRange {
        first,
        last: val.first - Duration::days(1),
    };
    Ok([train, val, test])
}

fn split_samples(
    series: &DemandSeries,
    cpt: &CptConfig,
    calendar: &HolidayCalendar,
    hours: Option<HourRange>,
    dates: DateRange,
    stride: usize,
) -> Result<Vec<CptSample>> {
    eligible_targets(series, cpt, hours, Some(dates))
        .into_iter()
        .step_by(stride.max(1))
        .map(|t| slice_cpt(series, t, cpt, calendar))
        .collect()
}

pub fn prepare(dataset: &Dataset, settings: &DataSettings) -> Result<PreparedData> {
    let series = &dataset.series;
    if series.is_empty() {
        return Err(Error::Schema("demand series is empty".into()));
    }
    if dataset.registry.ids != series.area_ids() {
        return Err(Error::Schema(
            "registry and demand list different areas".into(),
        ));
    }
    for f in &dataset.features {
        if f.matrix.rows() != series.n_areas() {
            return Err(Error::dim(
                "areal feature",
                f.matrix.shape(),
                &[series.n_areas(), f.n_components()],
            ));
        }
    }
    let cpt = CptConfig::new(
        settings.closeness,
        settings.period,
        settings.trend,
        series.interval_minutes(),
    )?;
    let defaults = default_splits(series);
    let pick = |given: Option<DateRange>, k: usize| -> Result<DateRange> {
        match given {
            Some(d) => Ok(d),
            None => defaults
                .as_ref()
                .map(|d| d[k])
                .map_err(|e| Error::Contract(e.to_string())),
        }
    };
    let splits = [
        pick(settings.train, 0)?,
        pick(settings.val, 1)?,
        pick(settings.test, 2)?,
    ];

    let train_steps = series.steps_between(splits[0].first, splits[0].last);
    let stats = fit_minmax(series, train_steps, &dataset.features)?;
    let features = stats.normalize_features(&dataset.features)?;
    let distances = distance_matrix(&dataset.registry)?;
    let proximity = gaussian_proximity(&distances, settings.include_diagonal_in_sigma)?.matrix;

    let train_hours = if settings.filter_training_hours {
        settings.target_hours
    } else {
        None
    };
    let cal = &dataset.calendar;
    let train = split_samples(
        series,
        &cpt,
        cal,
        train_hours,
        splits[0],
        settings.train_stride,
    )?;
    let val = split_samples(series, &cpt, cal, settings.target_hours, splits[1], 1)?;
    let test = split_samples(series, &cpt, cal, settings.target_hours, splits[2], 1)?;
    log::info!(
        "samples: train {} / val {} / test {}",
        train.len(),
        val.len(),
        test.len()
    );
    Ok(PreparedData {
        area_ids: series.area_ids().to_vec(),
        channels: series.n_channels(),
        cpt,
        stats,
        proximity,
        features,
        train,
        val,
        test,
        splits,
    })
}

impl PreparedData {
    fn selected(&self, names: &Option<Vec<String>>) -> Result<Vec<&ArealFeature>> {
        match names {
            None => Ok(self.features.iter().collect()),
            Some(names) => names
                .iter()
                .map(|n| {
                    self.features
                        .iter()
                        .find(|f| &f.name == n)
                        .ok_or_else(|| Error::Schema(format!("unknown areal feature {n:?}")))
                })
                .collect(),
        }
    }

    pub fn model_config(&self, m: &ModelSettings) -> Result<ModelConfig> {
        let specs = self
            .selected(&m.features)?
            .into_iter()
            .map(|f| FeatureSpec {
                name: f.name.clone(),
                components: f.n_components(),
            })
            .collect();
        let mut cfg = ModelConfig::new(self.area_ids.len(), self.channels, m.hidden, specs);
        cfg.closeness = self.cpt.closeness;
        cfg.period = self.cpt.period;
        cfg.trend = self.cpt.trend;
        cfg.use_proximity = m.use_proximity;
        cfg.use_identity = m.use_identity;
        cfg.chronological = m.chronological;
        cfg.sentinel = m.sentinel;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Graph inputs for `config`, matching its feature list by name.
    pub fn context(&self, config: &ModelConfig) -> Result<GraphContext> {
        let names = Some(config.features.iter().map(|f| f.name.clone()).collect());
        let features = self
            .selected(&names)?
            .into_iter()
            .map(|f| f.matrix.clone())
            .collect();
        Ok(GraphContext {
            proximity: config.use_proximity.then(|| self.proximity.clone()),
            features,
        })
    }
}

/// Result of one seed: the trained weights and their test score.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub outcome: TrainOutcome,
    pub test: Metrics,
}

pub fn run_seed(
    data: &PreparedData,
    config: &ModelConfig,
    tc: &TrainConfig,
    seed: u64,
) -> Result<SeedRun> {
    let context = data.context(config)?;
    let outcome = train(
        config,
        &context,
        &data.stats.demand,
        &data.train,
        &data.val,
        tc,
        seed,
    )?;
    let test = evaluate(
        &outcome.params,
        config,
        &context,
        &data.stats.demand,
        &data.test,
        tc.batch_size,
    )?;
    log::info!(
        "seed {seed}: best epoch {} val {:.5} test rmse {:.4} mae {:.4}",
        outcome.best_epoch,
        outcome.best_val_loss,
        test.rmse,
        test.mae
    );
    Ok(SeedRun {
        seed,
        outcome,
        test,
    })
}

pub fn score(
    data: &PreparedData,
    config: &ModelConfig,
    params: &ParameterStore,
    batch_size: usize,
) -> Result<Metrics> {
    let context = data.context(config)?;
    evaluate(
        params,
        config,
        &context,
        &data.stats.demand,
        &data.test,
        batch_size,
    )
}

pub fn baseline_table(data: &PreparedData) -> Result<Vec<(BaselineKind, Metrics)>> {
    BaselineKind::ALL
        .into_iter()
        .map(|k| Ok((k, evaluate_baseline(k, &data.test)?)))
        .collect()
}

/// Maps `f` over `items` on at most `jobs` threads, keeping input order.
pub fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&f).collect();
    }
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let chunk = items.len().div_ceil(jobs);
    thread::scope(|scope| {
        for (part, out) in items.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            let f = &f;
            scope.spawn(move || {
                for (item, slot) in part.iter().zip(out.iter_mut()) {
                    *slot = Some(f(item));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

/// One row of the ablation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    pub features: Vec<String>,
    pub use_proximity: bool,
    pub use_identity: bool,
}

/// Standard sweep: no features, each feature alone, all features, and all
/// but one.
pub fn standard_variants(feature_names: &[String]) -> Vec<Variant> {
    let v = |name: String, features: Vec<String>| Variant {
        name,
        features,
        use_proximity: true,
        use_identity: true,
    };
    let mut out = vec![v("none".into(), vec![])];
    for f in feature_names {
        out.push(v(format!("+{f}"), vec![f.clone()]));
    }
    if feature_names.len() > 1 {
        out.push(v("all".into(), feature_names.to_vec()));
        for f in feature_names {
            let rest = feature_names.iter().filter(|g| *g != f).cloned().collect();
            out.push(v(format!("-{f}"), rest));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub variant: Variant,
    pub report: EvalReport,
}

/// Trains every variant for every seed and returns rows sorted by mean RMSE.
pub fn run_ablation(
    data: &PreparedData,
    base: &ModelSettings,
    variants: &[Variant],
    tc: &TrainConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<AblationRow>> {
    let mut configs = Vec::with_capacity(variants.len());
    for v in variants {
        let settings = ModelSettings {
            features: Some(v.features.clone()),
            use_proximity: v.use_proximity,
            use_identity: v.use_identity,
            ..base.clone()
        };
        configs.push(data.model_config(&settings)?);
    }
    let tasks: Vec<(usize, u64)> = (0..variants.len())
        .flat_map(|v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results = parallel_map(&tasks, jobs, |&(v, seed)| {
        run_seed(data, &configs[v], tc, seed)
    });
    let mut per_variant: Vec<Vec<(u64, Metrics)>> = vec![Vec::new(); variants.len()];
    for (&(v, seed), r) in tasks.iter().zip(results) {
        per_variant[v].push((seed, r?.test));
    }
    let mut rows: Vec<AblationRow> = variants
        .iter()
        .zip(per_variant)
        .map(|(variant, runs)| AblationRow {
            variant: variant.clone(),
            report: EvalReport::from_runs(runs),
        })
        .collect();
    rows.sort_by(|a, b| a.report.mean_rmse.total_cmp(&b.report.mean_rmse));
    Ok(rows)
}

/// `run_id,subset,seed,rmse,mae`, one line per variant and seed.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("run_id,subset,seed,rmse,mae\n");
    for row in rows {
        let subset = if row.variant.features.is_empty() {
            "-".to_string()
        } else {
            row.variant.features.join("+")
        };
        for (seed, m) in &row.report.per_seed {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.variant.name, subset, seed, m.rmse, m.mae
            ));
        }
    }
    out
}

/// Random parameters, graphs and a batch of `batch` samples shaped by
/// `config`. Inputs lie in `[0, 1]`; each target sits 0.001 to 0.002 away
/// from the initial prediction, clear of the L1 kink and with a loss small
/// enough that finite differences resolve tiny gradients.
pub fn random_instance(
    config: &ModelConfig,
    batch: usize,
    seed: u64,
) -> Result<(ParameterStore, GraphContext, Batch)> {
    let mut store = init_parameters(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00c0_ffee);
    // non-zero biases so that no unit sits exactly on a ReLU kink
    for (path, slot) in store.iter_mut() {
        if path.ends_with(".b") || path.contains(".b_") {
            slot.value
                .data_mut()
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.1..0.1));
        }
    }
    let n = config.areas;
    let mut prox = Tensor::from_fn(n, n, |_, _| rng.random_range(0.05..1.0));
    for i in 0..n {
        let total: f64 = prox.row(i).iter().sum();
        for j in 0..n {
            prox.set(i, j, prox.get(i, j) / total);
        }
    }
    let features = config
        .features
        .iter()
        .map(|f| Tensor::from_fn(n, f.components, |_, _| rng.random::<f64>()))
        .collect();
    let context = GraphContext {
        proximity: config.use_proximity.then_some(prox),
        features,
    };
    let rows = batch * n;
    let mut unit = |len: usize| {
        (0..len)
            .map(|_| {
                let x = Tensor::from_fn(rows, config.channels, |_, _| rng.random::<f64>());
                let mut te = Tensor::zeros(&[batch, TE_WIDTH]);
                for b in 0..batch {
                    te.set(b, rng.random_range(0..7), 1.0);
                    te.set(b, 7 + rng.random_range(0..24), 1.0);
                    te.set(b, 31 + rng.random_range(0..4), 1.0);
                }
                (x, te)
            })
            .collect::<Vec<_>>()
    };
    let units = [
        unit(config.closeness),
        unit(config.period),
        unit(config.trend),
    ];
    let mut batch = Batch {
        size: batch,
        units,
        target: Tensor::zeros(&[rows, config.channels]),
    };
    let prediction = predict(&store, config, &context, &batch)?;
    batch.target = Tensor::from_fn(rows, config.channels, |r, c| {
        let offset = rng.random_range(0.001..0.002);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        prediction.get(r, c) + sign * offset
    });
    Ok((store, context, batch))
}

/// Compares reverse-mode gradients of the batch loss with central finite
/// differences of step `h`, slot by slot.
pub fn gradient_check(
    config: &ModelConfig,
    batch: usize,
    seed: u64,
    h: f64,
) -> Result<Vec<SlotCheck>> {
    let (mut store, context, batch) = random_instance(config, batch, seed)?;
    let (tape, loss) = batch_loss(&store, config, &context, &batch)?;
    tape.backward(loss, &mut store)?;
    let numeric = finite_diff_gradient(
        |s| {
            let (tape, loss) = batch_loss(s, config, &context, &batch)?;
            Ok(tape.value(loss).data()[0])
        },
        &store,
        h,
    )?;
    compare_gradients(&store, &numeric)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_sweep_shape() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let v = standard_variants(&names);
        let labels: Vec<&str> = v.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(labels, ["none", "+a", "+b", "+c", "all", "-a", "-b", "-c"]);
        assert_eq!(v[5].features, ["b", "c"]);
    }

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<u32> = (0..17).collect();
        for jobs in [1, 2, 4, 40] {
            assert_eq!(
                parallel_map(&items, jobs, |x| x * 3),
                items.iter().map(|x| x * 3).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn default_splits_cover_last_two_weeks() {
        let ds = Dataset::synthetic(
            &ScenarioConfig {
                areas: 3,
                weeks: 4,
                interval_minutes: 60,
                ..ScenarioConfig::default()
            },
            1,
        )
        .unwrap();
        let [train, val, test] = default_splits(&ds.series).unwrap();
        assert_eq!((test.last - test.first).num_days(), 6);
        assert_eq!((val.last - val.first).num_days(), 6);
        assert_eq!(train.last + Duration::days(1), val.first);
        assert_eq!(val.last + Duration::days(1), test.first);
        assert_eq!(train.first, ds.series.start().date());
    }
}
