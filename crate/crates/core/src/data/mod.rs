//! Demand ingestion, calendar encodings, CPT windows, normalization and the
//! synthetic scenario generator.

mod cpt;
mod normalize;
mod series;
mod synth;
mod temporal;

pub use cpt::{
    eligible_targets, enumerate_samples, slice_cpt, CptConfig, CptSample, DateRange, HourRange,
    Window, WindowIndices,
};
pub use normalize::{fit_minmax, MinMax, NormalizationStats};
pub use series::{
    format_timestamp, load_demand, load_feature, load_holidays, load_registry, parse_timestamp,
    write_demand, write_feature, write_holidays, write_registry, AreaRegistry, ArealFeature,
    CoordKind, DemandSeries, HolidayCalendar,
};
pub use synth::{generate_synthetic, profile_level, AreaClass, ScenarioConfig, SyntheticDataset};
pub use temporal::{TemporalEncoding, TE_WIDTH};
