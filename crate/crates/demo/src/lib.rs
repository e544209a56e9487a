//! Browser bindings for a small synthetic city: the proximity graph, the
//! sentinel attention of each areal feature at initialization, and demand
//! profiles with their closeness/period/trend windows.
//!
//! Every exported method has a plain Rust counterpart so the logic runs in
//! native tests.

use mfgcrn::data::ScenarioConfig;
use mfgcrn::data::{CoordKind, CptConfig};
use mfgcrn::experiment::{prepare, DataSettings, Dataset, PreparedData};
use mfgcrn::model::{init_parameters, sentinel_attention, FeatureSpec, ModelConfig};
use mfgcrn::numerics::{Tape, Tensor};
use wasm_bindgen::prelude::*;

const HIDDEN: usize = 8;

#[wasm_bindgen]
pub struct City {
    dataset: Dataset,
    prepared: PreparedData,
}

/// Attention rows followed by the share each row leaves to its sentinel.
pub struct AttentionView {
    pub areas: usize,
    /// `N × N`, row-major.
    pub adjacency: Vec<f64>,
    /// `1 − Σ_j A[i, j]` per row.
    pub sentinel_share: Vec<f64>,
}

fn js(e: mfgcrn::Error) -> JsError {
    JsError::new(&format!("{}: {e}", e.category()))
}

impl City {
    /// Three weeks of hourly demand over `areas` areas.
    pub fn build(areas: usize, seed: u32) -> mfgcrn::Result<City> {
        let scenario = ScenarioConfig {
            areas,
            weeks: 3,
            interval_minutes: 60,
            ..ScenarioConfig::default()
        };
        let dataset = Dataset::synthetic(&scenario, seed as u64)?;
        let settings = DataSettings {
            closeness: 3,
            period: 2,
            trend: 1,
            ..DataSettings::default()
        };
        let prepared = prepare(&dataset, &settings)?;
        Ok(City { dataset, prepared })
    }

    /// Sentinel attention of feature `index` under freshly initialized
    /// weights, with the sentinel's output bias set to `sentinel_bias`.
    pub fn attention_view(
        &self,
        index: usize,
        sentinel_bias: f64,
        seed: u32,
    ) -> mfgcrn::Result<AttentionView> {
        let feature = self
            .prepared
            .features
            .get(index)
            .ok_or_else(|| mfgcrn::Error::Contract(format!("no feature at index {index}")))?;
        let n = self.areas();
        let spec = FeatureSpec {
            name: feature.name.clone(),
            components: feature.n_components(),
        };
        let config = ModelConfig::new(n, self.dataset.series.n_channels(), HIDDEN, vec![spec]);
        let mut params = init_parameters(&config, seed as u64)?;
        *params.get_mut(&format!("attn.{}.sent.l2.b", feature.name))? =
            Tensor::scalar(sentinel_bias);
        let mut tape = Tape::new();
        let f = tape.constant(feature.matrix.clone());
        let se = tape.param(&params, "se")?;
        let att = sentinel_attention(&mut tape, &params, &feature.name, f, se, true)?;
        let a = tape.value(att.adjacency);
        let sentinel_share = (0..n).map(|i| 1.0 - a.row(i).iter().sum::<f64>()).collect();
        Ok(AttentionView {
            areas: n,
            adjacency: a.data().to_vec(),
            sentinel_share,
        })
    }

    /// Window indices for target `t`: closeness, then period, then trend,
    /// each newest first.
    pub fn window_indices(
        &self,
        t: usize,
        closeness: usize,
        period: usize,
        trend: usize,
    ) -> mfgcrn::Result<Vec<u32>> {
        let cfg = CptConfig::new(
            closeness,
            period,
            trend,
            self.dataset.series.interval_minutes(),
        )?;
        if t >= self.dataset.series.len() {
            return Err(mfgcrn::Error::Contract(format!(
                "target {t} is past the end of the series"
            )));
        }
        let idx = cfg.indices(t)?;
        Ok(idx
            .closeness
            .iter()
            .chain(&idx.period)
            .chain(&idx.trend)
            .map(|&i| i as u32)
            .collect())
    }
}

#[wasm_bindgen]
impl City {
    #[wasm_bindgen(constructor)]
    pub fn new(areas: usize, seed: u32) -> Result<City, JsError> {
        City::build(areas, seed).map_err(js)
    }

    pub fn areas(&self) -> usize {
        self.dataset.series.n_areas()
    }

    pub fn steps(&self) -> usize {
        self.dataset.series.len()
    }

    #[wasm_bindgen(js_name = stepsPerDay)]
    pub fn steps_per_day(&self) -> usize {
        self.dataset.series.steps_per_day()
    }

    /// Area positions in meters as `x0, y0, x1, y1, …`.
    pub fn coords(&self) -> Vec<f64> {
        let r = &self.dataset.registry;
        debug_assert_eq!(r.kind, CoordKind::Xy);
        r.coords.iter().flat_map(|&(x, y)| [x, y]).collect()
    }

    /// Row-normalized Gaussian proximity, `N × N` row-major.
    pub fn proximity(&self) -> Vec<f64> {
        self.prepared.proximity.data().to_vec()
    }

    #[wasm_bindgen(js_name = featureNames)]
    pub fn feature_names(&self) -> Vec<String> {
        self.prepared
            .features
            .iter()
            .map(|f| f.name.clone())
            .collect()
    }

    /// `N × (N + 1)` row-major: attention weights, then the sentinel share.
    pub fn attention(
        &self,
        feature: usize,
        sentinel_bias: f64,
        seed: u32,
    ) -> Result<Vec<f64>, JsError> {
        let view = self
            .attention_view(feature, sentinel_bias, seed)
            .map_err(js)?;
        let n = view.areas;
        Ok((0..n)
            .flat_map(|i| {
                view.adjacency[i * n..(i + 1) * n]
                    .iter()
                    .copied()
                    .chain([view.sentinel_share[i]])
                    .collect::<Vec<_>>()
            })
            .collect())
    }

    /// Demand of one area and channel over the whole series.
    pub fn demand(&self, area: usize, channel: usize) -> Vec<f64> {
        (0..self.steps())
            .map(|t| self.dataset.series.value(t, area, channel))
            .collect()
    }

    pub fn timestamp(&self, t: usize) -> String {
        mfgcrn::data::format_timestamp(self.dataset.series.timestamp(t))
    }

    /// See [`City::window_indices`].
    pub fn windows(
        &self,
        t: usize,
        closeness: usize,
        period: usize,
        trend: usize,
    ) -> Result<Vec<u32>, JsError> {
        self.window_indices(t, closeness, period, trend).map_err(js)
    }
}
