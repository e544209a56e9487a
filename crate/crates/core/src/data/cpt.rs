//! Closeness / period / trend windows.

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::data::{DemandSeries, HolidayCalendar, TemporalEncoding};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Window lengths plus the daily and weekly strides, both derived from the
/// series interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CptConfig {
    pub closeness: usize,
    pub period: usize,
    pub trend: usize,
    pub steps_per_day: usize,
}

impl CptConfig {
    pub fn new(
        closeness: usize,
        period: usize,
        trend: usize,
        interval_minutes: u32,
    ) -> Result<Self> {
        if interval_minutes == 0 || 1440 % interval_minutes != 0 {
            return Err(Error::Schema(format!(
                "interval of {interval_minutes} minutes does not divide a day"
            )));
        }
        if closeness == 0 || period == 0 || trend == 0 {
            return Err(Error::Contract("window lengths must be ≥ 1".into()));
        }
        Ok(Self {
            closeness,
            period,
            trend,
            steps_per_day: (1440 / interval_minutes) as usize,
        })
    }

    /// Steps between period samples (one day).
    pub fn period_stride(&self) -> usize {
        self.steps_per_day
    }

    /// Steps between trend samples (one week).
    pub fn trend_stride(&self) -> usize {
        7 * self.steps_per_day
    }

    /// Smallest `t` whose windows all have non-negative indices.
    pub fn min_target_index(&self) -> usize {
        self.closeness
            .max(self.period * self.period_stride())
            .max(self.trend * self.trend_stride())
    }

    /// Window indices for target `t`, newest first.
    pub fn indices(&self, t: usize) -> Result<WindowIndices> {
        let min_t = self.min_target_index();
        if t < min_t {
            return Err(Error::History { t, min_t });
        }
        let closeness = (1..=self.closeness).map(|k| t - k).collect();
        let period = (1..=self.period)
            .map(|k| t - k * self.period_stride())
            .collect();
        let trend = (1..=self.trend)
            .map(|k| t - k * self.trend_stride())
            .collect();
        Ok(WindowIndices {
            closeness,
            period,
            trend,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowIndices {
    pub closeness: Vec<usize>,
    pub period: Vec<usize>,
    pub trend: Vec<usize>,
}

/// One input window: frames are `N × C`, newest first.
#[derive(Debug, Clone)]
pub struct Window {
    pub indices: Vec<usize>,
    pub frames: Vec<Tensor>,
    pub encodings: Vec<TemporalEncoding>,
}

impl Window {
    fn gather(series: &DemandSeries, calendar: &HolidayCalendar, indices: Vec<usize>) -> Self {
        let frames = indices.iter().map(|&i| series.frame(i)).collect();
        let encodings = indices
            .iter()
            .map(|&i| TemporalEncoding::build(series.timestamp(i), calendar))
            .collect();
        Self {
            indices,
            frames,
            encodings,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// A single training example with its target frame.
#[derive(Debug, Clone)]
pub struct CptSample {
    pub t: usize,
    pub target_timestamp: NaiveDateTime,
    pub closeness: Window,
    pub period: Window,
    pub trend: Window,
    pub target: Tensor,
}

pub fn slice_cpt(
    series: &DemandSeries,
    t: usize,
    config: &CptConfig,
    calendar: &HolidayCalendar,
) -> Result<CptSample> {
    if t >= series.len() {
        return Err(Error::Contract(format!(
            "target index {t} beyond series length {}",
            series.len()
        )));
    }
    let idx = config.indices(t)?;
    Ok(CptSample {
        t,
        target_timestamp: series.timestamp(t),
        closeness: Window::gather(series, calendar, idx.closeness),
        period: Window::gather(series, calendar, idx.period),
        trend: Window::gather(series, calendar, idx.trend),
        target: series.frame(t),
    })
}

/// Inclusive range of target hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourRange {
    pub first: u32,
    pub last: u32,
}

impl HourRange {
    pub const ALL_DAY: HourRange = HourRange { first: 0, last: 23 };

    pub fn contains(&self, hour: u32) -> bool {
        self.first <= hour && hour <= self.last
    }
}

/// Inclusive date span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub first: NaiveDate,
    pub last: NaiveDate,
}

impl DateRange {
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.first <= d && d <= self.last
    }
}

/// Every target `t` with full history whose timestamp falls in `hours`
/// (and, when given, in `dates`).
pub fn eligible_targets(
    series: &DemandSeries,
    config: &CptConfig,
    hours: Option<HourRange>,
    dates: Option<DateRange>,
) -> Vec<usize> {
    (config.min_target_index()..series.len())
        .filter(|&t| {
            let ts = series.timestamp(t);
            hours.is_none_or(|h| h.contains(ts.hour()))
                && dates.is_none_or(|d| d.contains(ts.date()))
        })
        .collect()
}

pub fn enumerate_samples(
    series: &DemandSeries,
    config: &CptConfig,
    calendar: &HolidayCalendar,
    hours: Option<HourRange>,
    dates: Option<DateRange>,
) -> Result<Vec<CptSample>> {
    let targets = eligible_targets(series, config, hours, dates);
    if targets.is_empty() {
        log::warn!("no eligible CPT samples for hours {hours:?} and dates {dates:?}");
    }
    targets
        .into_iter()
        .map(|t| slice_cpt(series, t, config, calendar))
        .collect()
}
