//! Run configuration: one TOML file, dotted-path overrides, validation.

use std::fs;
use std::path::{Path, PathBuf};

use mfgcrn::data::{DateRange, ScenarioConfig};
use mfgcrn::experiment::{DataSettings, ModelSettings, Variant};
use mfgcrn::train::TrainConfig;
use mfgcrn::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePath {
    pub name: String,
    pub path: PathBuf,
}

/// Input files. Relative paths resolve against the config file's directory
/// and are stored absolute in the effective config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub registry: PathBuf,
    pub demand: PathBuf,
    #[serde(default)]
    pub features: Vec<FeaturePath>,
    #[serde(default)]
    pub holidays: Option<PathBuf>,
    /// Grid interval; inferred from the demand file when unset.
    #[serde(default)]
    pub interval_minutes: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSettings {
    pub areas: usize,
    pub channels: usize,
    pub hidden: usize,
    /// Component count of each random areal feature.
    pub features: Vec<usize>,
    pub window: usize,
    pub batch: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Seed of the random instance.
    pub instance_seed: u64,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        Self {
            areas: 4,
            channels: 2,
            hidden: 8,
            features: vec![3, 2],
            window: 2,
            batch: 2,
            step: 1e-5,
            tolerance: 1e-4,
            instance_seed: 17,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSettings {
    /// Explicit variants; the standard sweep over the dataset's features
    /// when unset.
    pub variants: Option<Vec<Variant>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of synthetic data and of the first model; model `k` uses
    /// `seed + k`.
    pub seed: u64,
    pub jobs: usize,
    pub precision: u32,
    pub output_dir: PathBuf,
    pub run_id: Option<String>,
    /// Input files; the synthetic scenario is generated in memory when unset.
    pub paths: Option<Paths>,
    pub synth: ScenarioConfig,
    pub data: DataSettings,
    pub model: ModelSettings,
    pub train: TrainConfig,
    pub gradcheck: GradcheckSettings,
    pub ablation: AblationSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 1,
            precision: 64,
            output_dir: PathBuf::from("runs"),
            run_id: None,
            paths: None,
            synth: ScenarioConfig::default(),
            data: DataSettings::default(),
            model: ModelSettings::default(),
            train: TrainConfig::default(),
            gradcheck: GradcheckSettings::default(),
            ablation: AblationSettings::default(),
        }
    }
}

fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets `dotted` (e.g. `train.patience`) in `table`, creating tables on the way.
pub fn set_path(table: &mut Table, dotted: &str, value: Value) -> Result<()> {
    let keys: Vec<&str> = dotted.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(vec![format!(
            "malformed override key {dotted:?}"
        )]));
    }
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut node = table;
    for key in parents {
        let entry = node
            .entry(key.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(Error::Config(vec![format!(
                    "override {dotted:?}: {key} is not a table"
                )]))
            }
        };
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// Parses `key=value` into a dotted key and a TOML value; bare words become
/// strings.
pub fn parse_override(raw: &str) -> Result<(String, Value)> {
    let (key, value) = raw.split_once('=').ok_or_else(|| {
        Error::Config(vec![format!(
            "override {raw:?} is not of the form key=value"
        )])
    })?;
    Ok((key.trim().to_string(), parse_value(value.trim())))
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies overrides in order and
    /// resolves relative input paths.
    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                text.parse::<Table>()
                    .map_err(|e| Error::Config(vec![format!("{}: {e}", p.display())]))?
            }
            None => Table::new(),
        };
        for (key, value) in overrides {
            set_path(&mut table, key, value.clone())?;
        }
        let mut config: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))?;
        if let (Some(paths), Some(base)) = (config.paths.as_mut(), path.and_then(Path::parent)) {
            paths.resolve(base);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Every violated constraint, reported together.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        match self.precision {
            64 => {}
            32 => errs.push("precision: 32-bit arithmetic is not supported, use 64".to_string()),
            p => errs.push(format!("precision: {p} is not one of 32, 64")),
        }
        if self.jobs == 0 {
            errs.push("jobs must be ≥ 1".into());
        }
        collect(&mut errs, self.train.validate());
        if self.paths.is_none() {
            collect(&mut errs, self.synth.validate());
        }
        let d = &self.data;
        for (name, v) in [
            ("closeness", d.closeness),
            ("period", d.period),
            ("trend", d.trend),
        ] {
            if v == 0 {
                errs.push(format!("data.{name} must be ≥ 1"));
            }
        }
        if d.train_stride == 0 {
            errs.push("data.train_stride must be ≥ 1".into());
        }
        if let Some(h) = d.target_hours {
            if h.first > h.last || h.last > 23 {
                errs.push(format!(
                    "data.target_hours {}..{} is not a range within 0..23",
                    h.first, h.last
                ));
            }
        }
        let spans = [("train", d.train), ("val", d.val), ("test", d.test)];
        for (name, span) in spans {
            if let Some(r) = span {
                if r.first > r.last {
                    errs.push(format!("data.{name} ends before it starts"));
                }
            }
        }
        let set: Vec<(&str, DateRange)> = spans
            .iter()
            .filter_map(|(n, r)| r.map(|r| (*n, r)))
            .collect();
        if !set.is_empty() && set.len() != 3 {
            errs.push("data.train, data.val and data.test must be given together".into());
        }
        for pair in set.windows(2) {
            if pair[0].1.last >= pair[1].1.first {
                errs.push(format!(
                    "data.{} must end before data.{} starts",
                    pair[0].0, pair[1].0
                ));
            }
        }
        if self.model.hidden == 0 {
            errs.push("model.hidden must be ≥ 1".into());
        }
        if let Some(paths) = &self.paths {
            let mut files: Vec<(String, &Path)> = vec![
                ("paths.registry".into(), paths.registry.as_path()),
                ("paths.demand".into(), paths.demand.as_path()),
            ];
            files.extend(
                paths
                    .features
                    .iter()
                    .map(|f| (format!("paths.features.{}", f.name), f.path.as_path())),
            );
            if let Some(h) = &paths.holidays {
                files.push(("paths.holidays".into(), h.as_path()));
            }
            for (field, file) in files {
                if !file.is_file() {
                    errs.push(format!("{field}: {} does not exist", file.display()));
                }
            }
        }
        let g = &self.gradcheck;
        if !(g.step > 0.0) || !(g.tolerance > 0.0) {
            errs.push("gradcheck.step and gradcheck.tolerance must be positive".into());
        }
        if g.areas == 0 || g.channels == 0 || g.hidden == 0 || g.window == 0 || g.batch == 0 {
            errs.push("gradcheck sizes must be ≥ 1".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// `run_<id>`, the id defaulting to the verb and a digest of the
    /// effective config.
    pub fn run_dir(&self, verb: &str) -> PathBuf {
        let id = match &self.run_id {
            Some(id) => id.clone(),
            None => {
                let digest = Sha256::digest(self.to_toml().as_bytes());
                let short: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
                format!("{verb}-{short}")
            }
        };
        self.output_dir.join(format!("run_{id}"))
    }

    pub fn model_seeds(&self) -> Vec<u64> {
        (0..self.train.seeds as u64)
            .map(|k| self.seed + k)
            .collect()
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                let joined = base.join(&*p);
                *p = std::path::absolute(&joined).unwrap_or(joined);
            }
        };
        fix(&mut self.registry);
        fix(&mut self.demand);
        self.features.iter_mut().for_each(|f| fix(&mut f.path));
        if let Some(h) = self.holidays.as_mut() {
            fix(h);
        }
    }
}

fn collect(errs: &mut Vec<String>, r: Result<()>) {
    match r {
        Ok(()) => {}
        Err(Error::Config(list)) => errs.extend(list),
        Err(e) => errs.push(e.to_string()),
    }
}
