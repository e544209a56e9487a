use std::fs;
use std::path::{Path, PathBuf};

use mfgcrn::data::{
    generate_synthetic, write_demand, write_feature, write_holidays, write_registry,
};
use mfgcrn::experiment::{
    ablation_csv, baseline_table, gradient_check, parallel_map, prepare, run_ablation, run_seed,
    score, standard_variants, Dataset, PreparedData,
};
use mfgcrn::graphs::dump_matrix;
use mfgcrn::model::{
    load_checkpoint, save_checkpoint, sentinel_attention, FeatureSpec, ModelConfig,
};
use mfgcrn::numerics::Tape;
use mfgcrn::train::{curve_csv, EvalReport, Metrics};
use mfgcrn::{Error, Result};

use crate::config::{FeaturePath, Paths, RunConfig};
use crate::logging;

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Creates `run_<id>/`, stores the effective config and starts the log.
fn open_run(config: &RunConfig, verb: &str, quiet: bool) -> Result<PathBuf> {
    let dir = config.run_dir(verb);
    create_dir(&dir)?;
    write(&dir.join("config.toml"), &config.to_toml())?;
    let log_path = dir.join("log.txt");
    logging::attach_file(quiet, &log_path).map_err(|e| Error::Io {
        path: log_path,
        source: e,
    })?;
    log::info!("{verb}: writing to {}", dir.display());
    Ok(dir)
}

fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    match &config.paths {
        Some(p) => {
            let features: Vec<(String, PathBuf)> = p
                .features
                .iter()
                .map(|f| (f.name.clone(), f.path.clone()))
                .collect();
            Dataset::from_files(
                &p.registry,
                &p.demand,
                &features,
                p.holidays.as_deref(),
                p.interval_minutes,
            )
        }
        None => Dataset::synthetic(&config.synth, config.seed),
    }
}

fn load_data(config: &RunConfig) -> Result<PreparedData> {
    let dataset = load_dataset(config)?;
    log::info!(
        "{} areas, {} steps of {} min, {} features",
        dataset.series.n_areas(),
        dataset.series.len(),
        dataset.series.interval_minutes(),
        dataset.features.len()
    );
    let data = prepare(&dataset, &config.data)?;
    log::info!(
        "samples: {} train, {} val, {} test",
        data.train.len(),
        data.val.len(),
        data.test.len()
    );
    Ok(data)
}

fn metrics_csv(run_id: &str, subset: &str, rows: &[(u64, Metrics)]) -> String {
    let mut out = String::from("run_id,subset,seed,rmse,mae\n");
    for (seed, m) in rows {
        out.push_str(&format!("{run_id},{subset},{seed},{},{}\n", m.rmse, m.mae));
    }
    out
}

fn run_id(dir: &Path) -> String {
    let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or("run");
    name.strip_prefix("run_").unwrap_or(name).to_string()
}

fn subset_label(config: &ModelConfig) -> String {
    if config.features.is_empty() {
        "-".into()
    } else {
        config
            .features
            .iter()
            .map(|f| f.name.as_str())
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// Writes the dataset files and a config that trains on them.
pub fn synth(config: &RunConfig, out: &Path) -> Result<()> {
    create_dir(out)?;
    let s = generate_synthetic(&config.synth, config.seed)?;
    write_registry(&out.join("registry.csv"), &s.registry)?;
    write_demand(&out.join("demand.csv"), &s.series)?;
    let mut features = Vec::new();
    for f in &s.features {
        let file = format!("feature_{}.csv", f.name);
        write_feature(&out.join(&file), f, &s.registry.ids)?;
        features.push(FeaturePath {
            name: f.name.clone(),
            path: PathBuf::from(file),
        });
    }
    write_holidays(&out.join("holidays.csv"), &s.calendar)?;
    let mut effective = config.clone();
    effective.paths = Some(Paths {
        registry: "registry.csv".into(),
        demand: "demand.csv".into(),
        features,
        holidays: Some("holidays.csv".into()),
        interval_minutes: Some(config.synth.interval_minutes),
    });
    write(&out.join("config.toml"), &effective.to_toml())?;
    println!(
        "wrote {} areas × {} steps to {}",
        s.series.n_areas(),
        s.series.len(),
        out.display()
    );
    Ok(())
}

pub fn train(config: &RunConfig, quiet: bool) -> Result<()> {
    let dir = open_run(config, "train", quiet)?;
    let data = load_data(config)?;
    let model = data.model_config(&config.model)?;
    let seeds = config.model_seeds();
    let runs = parallel_map(&seeds, config.jobs, |&seed| {
        run_seed(&data, &model, &config.train, seed)
    });
    let mut rows = Vec::new();
    for run in runs {
        let run = run?;
        save_checkpoint(
            &dir.join(format!("checkpoint_seed{}.bin", run.seed)),
            &model,
            &run.outcome.params,
        )?;
        write(
            &dir.join(format!("curve_seed{}.csv", run.seed)),
            &curve_csv(&run.outcome.curve),
        )?;
        rows.push((run.seed, run.test));
    }
    write(
        &dir.join("metrics.csv"),
        &metrics_csv(&run_id(&dir), &subset_label(&model), &rows),
    )?;
    print_report(&EvalReport::from_runs(rows));
    Ok(())
}

fn print_report(report: &EvalReport) {
    println!("{:>6}  {:>10}  {:>10}", "seed", "rmse", "mae");
    for (seed, m) in &report.per_seed {
        println!("{seed:>6}  {:>10.4}  {:>10.4}", m.rmse, m.mae);
    }
    println!(
        "{:>6}  {:>10.4}  {:>10.4}",
        "mean", report.mean_rmse, report.mean_mae
    );
}

pub fn eval(config: &RunConfig, checkpoint: &Path, quiet: bool) -> Result<()> {
    let dir = open_run(config, "eval", quiet)?;
    let (model, params) = load_checkpoint(checkpoint)?;
    let data = load_data(config)?;
    if model.areas != data.area_ids.len() || model.channels != data.channels {
        return Err(Error::Schema(format!(
            "checkpoint expects {} areas × {} channels, data has {} × {}",
            model.areas,
            model.channels,
            data.area_ids.len(),
            data.channels
        )));
    }
    let m = score(&data, &model, &params, config.train.batch_size)?;
    let seed = config.seed;
    write(
        &dir.join("metrics.csv"),
        &metrics_csv(&run_id(&dir), &subset_label(&model), &[(seed, m)]),
    )?;
    print_report(&EvalReport::from_runs(vec![(seed, m)]));
    Ok(())
}

pub fn baseline(config: &RunConfig, quiet: bool) -> Result<()> {
    let dir = open_run(config, "baseline", quiet)?;
    let data = load_data(config)?;
    let table = baseline_table(&data)?;
    let mut csv = String::from("baseline,rmse,mae\n");
    println!("{:<16}  {:>10}  {:>10}", "baseline", "rmse", "mae");
    for (kind, m) in &table {
        csv.push_str(&format!("{kind},{},{}\n", m.rmse, m.mae));
        println!(
            "{:<16}  {:>10.4}  {:>10.4}",
            kind.to_string(),
            m.rmse,
            m.mae
        );
    }
    write(&dir.join("metrics.csv"), &csv)
}

pub fn gradcheck(config: &RunConfig) -> Result<()> {
    let g = &config.gradcheck;
    let specs = g
        .features
        .iter()
        .enumerate()
        .map(|(k, &v)| FeatureSpec {
            name: format!("f{k}"),
            components: v,
        })
        .collect();
    let mut model = ModelConfig::new(g.areas, g.channels, g.hidden, specs);
    model.closeness = g.window;
    model.period = g.window;
    model.trend = g.window;
    model.use_proximity = config.model.use_proximity;
    model.use_identity = config.model.use_identity;
    model.chronological = config.model.chronological;
    model.sentinel = config.model.sentinel;
    let checks = gradient_check(&model, g.batch, g.instance_seed, g.step)?;
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed(g.tolerance) {
            "PASS"
        } else {
            "FAIL"
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!(
            "{tag}  {:<24} {:>6} entries  max rel err {:.3e}",
            c.path, c.entries, c.max_relative_error
        );
    }
    if failed > 0 {
        return Err(Error::Contract(format!(
            "{failed} of {} parameter slots exceed the tolerance {:e}",
            checks.len(),
            g.tolerance
        )));
    }
    println!("all {} slots within {:e}", checks.len(), g.tolerance);
    Ok(())
}

pub fn ablate(config: &RunConfig, quiet: bool) -> Result<()> {
    let dir = open_run(config, "ablate", quiet)?;
    let data = load_data(config)?;
    let variants = match &config.ablation.variants {
        Some(v) => v.clone(),
        None => {
            let names: Vec<String> = data.features.iter().map(|f| f.name.clone()).collect();
            standard_variants(&names)
        }
    };
    let rows = run_ablation(
        &data,
        &config.model,
        &variants,
        &config.train,
        &config.model_seeds(),
        config.jobs,
    )?;
    write(&dir.join("metrics.csv"), &ablation_csv(&rows))?;
    println!("{:<16}  {:>10}  {:>10}", "variant", "mean rmse", "mean mae");
    for row in &rows {
        println!(
            "{:<16}  {:>10.4}  {:>10.4}",
            row.variant.name, row.report.mean_rmse, row.report.mean_mae
        );
    }
    Ok(())
}

/// Proximity graph and, given a checkpoint, the learned attention graphs.
pub fn graph_dump(config: &RunConfig, checkpoint: Option<&Path>, quiet: bool) -> Result<()> {
    let dir = open_run(config, "graph", quiet)?;
    let data = load_data(config)?;
    let prox = dir.join("proximity.csv");
    write(&prox, &dump_matrix(&data.proximity, &data.area_ids))?;
    println!("{}", prox.display());
    if let Some(path) = checkpoint {
        let (model, params) = load_checkpoint(path)?;
        let context = data.context(&model)?;
        context.check(&model)?;
        for (spec, feature) in model.features.iter().zip(&context.features) {
            let mut tape = Tape::new();
            let f = tape.constant(feature.clone());
            let se = tape.param(&params, "se")?;
            let att = sentinel_attention(&mut tape, &params, &spec.name, f, se, model.sentinel)?;
            let out = dir.join(format!("attention_{}.csv", spec.name));
            write(
                &out,
                &dump_matrix(tape.value(att.adjacency), &data.area_ids),
            )?;
            println!("{}", out.display());
        }
    }
    Ok(())
}
