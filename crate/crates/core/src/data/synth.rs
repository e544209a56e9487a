//! Synthetic demand with known structure.
//!
//! Each area is a mixture of three latent land-use classes. Demand is the
//! mixture of class-specific daily profiles, modulated by a per-class
//! random shock process shared by every area of that class, plus a spatially
//! smooth component driven by a few moving hotspots, plus observation noise.
//! Informative areal features are noisy linear views of the class mixture,
//! so feature-similar areas really do share demand dynamics; noise features
//! are independent of everything.

use chrono::{Datelike, NaiveDate, TimeDelta, Timelike, Weekday};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{AreaRegistry, ArealFeature, CoordKind, DemandSeries, HolidayCalendar};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreaClass {
    Office,
    Residential,
    Commercial,
}

impl AreaClass {
    pub const ALL: [AreaClass; 3] = [
        AreaClass::Office,
        AreaClass::Residential,
        AreaClass::Commercial,
    ];
}

/// Hourly demand levels `[class][channel][hour]` for working days. Channel 0
/// is inflow (alighting), channel 1 outflow (boarding).
const WORKDAY: [[[f64; 24]; 2]; 3] = [
    // office
    [
        [
            1., 1., 1., 1., 1., 3., 10., 26., 42., 20., 10., 9., 12., 10., 8., 7., 6., 5., 5., 3.,
            2., 1., 1., 1.,
        ],
        [
            1., 1., 1., 1., 1., 1., 2., 3., 4., 5., 6., 8., 12., 8., 7., 9., 14., 28., 40., 18.,
            9., 5., 2., 1.,
        ],
    ],
    // residential
    [
        [
            1., 1., 1., 1., 1., 1., 2., 4., 5., 5., 5., 6., 7., 6., 6., 8., 13., 24., 33., 22.,
            14., 9., 5., 2.,
        ],
        [
            1., 1., 1., 1., 1., 4., 14., 30., 36., 16., 8., 7., 7., 6., 6., 6., 7., 9., 8., 6., 4.,
            3., 2., 1.,
        ],
    ],
    // commercial
    [
        [
            1., 1., 1., 1., 1., 1., 2., 3., 5., 8., 12., 16., 20., 17., 15., 15., 16., 19., 22.,
            20., 14., 8., 4., 2.,
        ],
        [
            1., 1., 1., 1., 1., 1., 1., 2., 3., 4., 6., 9., 14., 18., 16., 15., 15., 17., 20., 22.,
            21., 15., 8., 3.,
        ],
    ],
];

/// Weekend and holiday levels, same layout.
const RESTDAY: [[[f64; 24]; 2]; 3] = [
    [
        [
            1., 1., 1., 1., 1., 1., 1., 2., 3., 4., 5., 5., 5., 5., 4., 4., 3., 3., 2., 2., 1., 1.,
            1., 1.,
        ],
        [
            1., 1., 1., 1., 1., 1., 1., 1., 2., 3., 4., 4., 5., 5., 5., 5., 4., 4., 3., 2., 2., 1.,
            1., 1.,
        ],
    ],
    [
        [
            1., 1., 1., 1., 1., 1., 1., 2., 3., 4., 5., 6., 7., 7., 8., 9., 10., 12., 13., 11., 9.,
            6., 4., 2.,
        ],
        [
            1., 1., 1., 1., 1., 1., 2., 4., 7., 10., 12., 12., 11., 9., 8., 7., 7., 6., 5., 4., 3.,
            2., 1., 1.,
        ],
    ],
    [
        [
            1., 1., 1., 1., 1., 1., 1., 2., 4., 9., 16., 22., 27., 26., 24., 23., 23., 24., 24.,
            19., 12., 7., 3., 1.,
        ],
        [
            1., 1., 1., 1., 1., 1., 1., 1., 2., 4., 7., 12., 18., 22., 24., 24., 25., 26., 27.,
            26., 21., 14., 7., 3.,
        ],
    ],
];

/// Hourly level from the generator's profile table.
pub fn profile_level(class: AreaClass, channel: usize, rest_day: bool, hour: u32) -> f64 {
    let table = if rest_day { &RESTDAY } else { &WORKDAY };
    table[class as usize][channel][hour as usize]
}

/// Profile at a fractional time of day, linear between hour centres.
fn profile_at(class: AreaClass, channel: usize, rest_day: bool, hour_of_day: f64) -> f64 {
    let pos = hour_of_day - 0.5;
    let lo = pos.floor();
    let frac = pos - lo;
    let h0 = lo.rem_euclid(24.0) as u32;
    let h1 = (h0 + 1) % 24;
    (1.0 - frac) * profile_level(class, channel, rest_day, h0)
        + frac * profile_level(class, channel, rest_day, h1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub areas: usize,
    pub weeks: usize,
    pub interval_minutes: u32,
    /// First day of the series; a Monday keeps weeks aligned.
    pub start_date: NaiveDate,
    pub informative_features: usize,
    pub noise_features: usize,
    /// Relative standard deviation of per-observation noise.
    pub noise: f64,
    /// Innovation standard deviation of the per-class log-shock AR(1).
    pub class_shock: f64,
    /// AR(1) coefficient per step shared by class and hotspot processes.
    pub persistence: f64,
    /// Peak amplitude of the spatial hotspot component.
    pub spatial_amplitude: f64,
    pub hotspots: usize,
    /// Spread of per-area demand scale around 1.
    pub scale_spread: f64,
    /// Side of the square the areas are scattered over, meters.
    pub extent_m: f64,
    /// Relative noise on informative feature observations.
    pub feature_noise: f64,
    pub holidays: usize,
    /// Replace all demand with a constant (for baseline checks).
    pub constant_demand: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            areas: 20,
            weeks: 8,
            interval_minutes: 15,
            start_date: NaiveDate::from_ymd_opt(2019, 3, 4).expect("valid date"),
            informative_features: 2,
            noise_features: 1,
            noise: 0.3,
            class_shock: 0.2,
            persistence: 0.98,
            spatial_amplitude: 8.0,
            hotspots: 3,
            scale_spread: 0.3,
            extent_m: 8_000.0,
            feature_noise: 0.05,
            holidays: 2,
            constant_demand: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.areas == 0 {
            errs.push("synth.areas must be ≥ 1".to_string());
        }
        if self.weeks == 0 {
            errs.push("synth.weeks must be ≥ 1".to_string());
        }
        if self.interval_minutes == 0
            || 1440 % self.interval_minutes != 0
            || self.interval_minutes > 60
        {
            errs.push("synth.interval_minutes must divide a day and be ≤ 60".to_string());
        }
        if !(0.0..1.0).contains(&self.persistence) {
            errs.push("synth.persistence must lie in [0, 1)".to_string());
        }
        for (name, v) in [
            ("noise", self.noise),
            ("class_shock", self.class_shock),
            ("spatial_amplitude", self.spatial_amplitude),
            ("scale_spread", self.scale_spread),
            ("feature_noise", self.feature_noise),
        ] {
            if !(v >= 0.0) {
                errs.push(format!("synth.{name} must be ≥ 0"));
            }
        }
        if self.scale_spread >= 1.0 {
            errs.push("synth.scale_spread must be < 1".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn steps(&self) -> usize {
        self.weeks * 7 * (1440 / self.interval_minutes) as usize
    }
}

/// Generated dataset plus the latent ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub series: DemandSeries,
    pub registry: AreaRegistry,
    pub features: Vec<ArealFeature>,
    pub calendar: HolidayCalendar,
    /// Class mixture per area, `N × 3`.
    pub mixtures: Tensor,
}

fn draw_mixture(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let dominant = rng.random_range(0..3);
    let mut w = [0.0; 3];
    let mut rest = 0.0;
    for (k, slot) in w.iter_mut().enumerate() {
        if k != dominant {
            *slot = rng.random::<f64>();
            rest += *slot;
        }
    }
    let strength = rng.random_range(0.6..0.9);
    for (k, slot) in w.iter_mut().enumerate() {
        *slot = if k == dominant {
            strength
        } else {
            (1.0 - strength) * *slot / rest
        };
    }
    w
}

struct Latent {
    coords: Vec<(f64, f64)>,
    mixtures: Vec<[f64; 3]>,
    scales: Vec<f64>,
    /// Kernel weight of every hotspot at every area.
    hotspot_weight: Vec<Vec<f64>>,
    calendar: HolidayCalendar,
}

fn sample_latent(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Latent {
    let n = config.areas;
    let coords: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.random_range(0.0..config.extent_m).round(),
                rng.random_range(0.0..config.extent_m).round(),
            )
        })
        .collect();
    let mixtures: Vec<[f64; 3]> = (0..n).map(|_| draw_mixture(rng)).collect();
    let scales: Vec<f64> = (0..n)
        .map(|_| 1.0 + config.scale_spread * rng.random_range(-1.0..1.0))
        .collect();

    let hotspots: Vec<(f64, f64)> = (0..config.hotspots)
        .map(|_| {
            (
                rng.random_range(0.0..config.extent_m),
                rng.random_range(0.0..config.extent_m),
            )
        })
        .collect();
    let length_scale = config.extent_m / 4.0;
    let hotspot_weight = coords
        .iter()
        .map(|&(x, y)| {
            hotspots
                .iter()
                .map(|&(hx, hy)| {
                    let d2 = (x - hx).powi(2) + (y - hy).powi(2);
                    (-d2 / (length_scale * length_scale)).exp()
                })
                .collect()
        })
        .collect();

    // Holidays land on working days after the first two weeks.
    let mut candidate_days: Vec<NaiveDate> = (14..config.weeks * 7)
        .map(|d| config.start_date + TimeDelta::days(d as i64))
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect();
    candidate_days.shuffle(rng);
    let calendar = HolidayCalendar::new(candidate_days.into_iter().take(config.holidays));

    Latent {
        coords,
        mixtures,
        scales,
        hotspot_weight,
        calendar,
    }
}

/// Demand values `T × N × 2` for the given latent structure.
fn render(config: &ScenarioConfig, latent: &Latent, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let n = latent.mixtures.len();
    let steps = config.steps();
    let start = config.start_date.and_hms_opt(0, 0, 0).expect("midnight");
    let channels = 2;
    let phi = config.persistence;
    let stationary = (1.0 - phi * phi).sqrt();
    let mut shocks = [0.0f64; 3];
    let mut hotspot_state: Vec<f64> = vec![0.0; config.hotspots];
    let mut values = Vec::with_capacity(steps * n * channels);

    for t in 0..steps {
        let ts = start + TimeDelta::minutes(config.interval_minutes as i64 * t as i64);
        let rest_day = matches!(ts.weekday(), Weekday::Sat | Weekday::Sun)
            || latent.calendar.contains(ts.date());
        let hour = ts.hour() as f64 + ts.minute() as f64 / 60.0;
        for s in shocks.iter_mut() {
            *s = phi * *s + config.class_shock * stationary * unit.sample(rng);
        }
        for h in hotspot_state.iter_mut() {
            *h = phi * *h + stationary * unit.sample(rng);
        }
        // hotspots follow overall daytime activity
        let activity = (profile_at(AreaClass::Commercial, 0, rest_day, hour) / 27.0).min(1.0);
        for i in 0..n {
            let spatial: f64 = latent.hotspot_weight[i]
                .iter()
                .zip(&hotspot_state)
                .map(|(w, h)| w * h.max(0.0))
                .sum::<f64>()
                * config.spatial_amplitude
                * activity;
            for c in 0..channels {
                let base: f64 = AreaClass::ALL
                    .iter()
                    .enumerate()
                    .map(|(k, &class)| {
                        latent.mixtures[i][k]
                            * profile_at(class, c, rest_day, hour)
                            * shocks[k].exp()
                    })
                    .sum();
                let mean = latent.scales[i] * base + spatial;
                let noisy = mean * (1.0 + config.noise * unit.sample(rng));
                values.push(match config.constant_demand {
                    Some(level) => level,
                    None => noisy.max(0.0),
                });
            }
        }
    }
    values
}

pub fn generate_synthetic(config: &ScenarioConfig, seed: u64) -> Result<SyntheticDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latent = sample_latent(config, &mut rng);
    let values = render(config, &latent, &mut rng);
    let n = config.areas;
    let area_ids: Vec<String> = (0..n).map(|i| format!("A{i:03}")).collect();
    let series = DemandSeries::new(
        area_ids.clone(),
        vec!["in".to_string(), "out".to_string()],
        config.start_date.and_hms_opt(0, 0, 0).expect("midnight"),
        config.interval_minutes,
        values,
    )?;

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut features = Vec::new();
    for k in 0..config.informative_features {
        let v = 3 + k;
        // positive mixing of the class weights into `v` observable columns
        let mix: Vec<[f64; 3]> = (0..v)
            .map(|_| {
                [
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..10.0),
                    rng.random_range(0.0..10.0),
                ]
            })
            .collect();
        let mut data = Vec::with_capacity(n * v);
        for w in &latent.mixtures {
            for m in &mix {
                let clean: f64 = m.iter().zip(w).map(|(a, b)| a * b).sum();
                data.push((clean * (1.0 + config.feature_noise * unit.sample(&mut rng))).max(0.0));
            }
        }
        let names = (0..v).map(|j| format!("c{j}")).collect();
        features.push(ArealFeature::new(
            format!("info{k}"),
            names,
            Tensor::new(vec![n, v], data)?,
        )?);
    }
    for k in 0..config.noise_features {
        let v = 3;
        let data = (0..n * v).map(|_| rng.random_range(0.0..10.0)).collect();
        let names = (0..v).map(|j| format!("c{j}")).collect();
        features.push(ArealFeature::new(
            format!("noise{k}"),
            names,
            Tensor::new(vec![n, v], data)?,
        )?);
    }

    let mixtures = Tensor::new(
        vec![n, 3],
        latent.mixtures.iter().flatten().copied().collect(),
    )?;
    Ok(SyntheticDataset {
        series,
        registry: AreaRegistry {
            ids: area_ids,
            coords: latent.coords,
            kind: CoordKind::Xy,
        },
        features,
        calendar: latent.calendar,
        mixtures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argmax(v: impl Iterator<Item = f64>) -> usize {
        v.enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, x)| {
                if x > best.1 {
                    (i, x)
                } else {
                    best
                }
            })
            .0
    }

    #[test]
    fn office_peaks() {
        let inflow = argmax((0..24).map(|h| profile_level(AreaClass::Office, 0, false, h)));
        let outflow = argmax((0..24).map(|h| profile_level(AreaClass::Office, 1, false, h)));
        assert_eq!((inflow, outflow), (8, 18));
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = ScenarioConfig {
            areas: 5,
            weeks: 1,
            ..ScenarioConfig::default()
        };
        let a = generate_synthetic(&cfg, 9).unwrap();
        let b = generate_synthetic(&cfg, 9).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.features, b.features);
        let c = generate_synthetic(&cfg, 10).unwrap();
        assert_ne!(a.series, c.series);
    }

    #[test]
    fn same_mixture_same_curve_without_noise() {
        let cfg = ScenarioConfig {
            areas: 4,
            weeks: 1,
            noise: 0.0,
            spatial_amplitude: 0.0,
            scale_spread: 0.0,
            ..ScenarioConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut latent = sample_latent(&cfg, &mut rng);
        latent.mixtures[2] = latent.mixtures[0];
        let values = render(&cfg, &latent, &mut rng);
        let mut differs = false;
        for frame in values.chunks(4 * 2) {
            assert_eq!(frame[0..2], frame[4..6]);
            differs |= frame[0..2] != frame[2..4];
        }
        assert!(differs);
    }

    #[test]
    fn office_area_peaks_in_generated_series() {
        let cfg = ScenarioConfig {
            areas: 30,
            weeks: 2,
            noise: 0.0,
            spatial_amplitude: 0.0,
            ..ScenarioConfig::default()
        };
        let d = generate_synthetic(&cfg, 4).unwrap();
        let office = (0..30)
            .max_by(|&a, &b| d.mixtures.get(a, 0).total_cmp(&d.mixtures.get(b, 0)))
            .unwrap();
        assert!(d.mixtures.get(office, 0) > 0.6);
        let mut hourly = [[0.0; 24]; 2];
        for t in 0..d.series.len() {
            let ts = d.series.timestamp(t);
            if matches!(ts.weekday(), Weekday::Sat | Weekday::Sun) || d.calendar.contains(ts.date())
            {
                continue;
            }
            for (c, row) in hourly.iter_mut().enumerate() {
                row[ts.hour() as usize] += d.series.value(t, office, c);
            }
        }
        assert_eq!(argmax(hourly[0].iter().copied()), 8);
        assert_eq!(argmax(hourly[1].iter().copied()), 18);
    }

    #[test]
    fn constant_scenario() {
        let cfg = ScenarioConfig {
            areas: 3,
            weeks: 1,
            constant_demand: Some(7.0),
            ..ScenarioConfig::default()
        };
        let d = generate_synthetic(&cfg, 0).unwrap();
        assert!(d.series.values().iter().all(|&v| v == 7.0));
    }
}
