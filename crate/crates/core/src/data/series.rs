use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
];

pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim().trim_end_matches('Z');
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .ok_or_else(|| Error::Parse(format!("not an ISO-8601 timestamp: {s:?}")))
}

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:%M:%S").to_string()
}

/// Dense `T × N × C` demand counts on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSeries {
    area_ids: Vec<String>,
    channels: Vec<String>,
    start: NaiveDateTime,
    interval_minutes: u32,
    steps: usize,
    values: Vec<f64>,
}

impl DemandSeries {
    pub fn new(
        area_ids: Vec<String>,
        channels: Vec<String>,
        start: NaiveDateTime,
        interval_minutes: u32,
        values: Vec<f64>,
    ) -> Result<Self> {
        let (n, c) = (area_ids.len(), channels.len());
        if n == 0 || c == 0 || interval_minutes == 0 {
            return Err(Error::Schema(
                "demand series needs ≥1 area, ≥1 channel and a positive interval".into(),
            ));
        }
        if values.len() % (n * c) != 0 {
            return Err(Error::dim("demand series", &[n, c], &[values.len()]));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Schema(
                "demand values must be finite and non-negative".into(),
            ));
        }
        let steps = values.len() / (n * c);
        Ok(Self {
            area_ids,
            channels,
            start,
            interval_minutes,
            steps,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }

    pub fn n_areas(&self) -> usize {
        self.area_ids.len()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn area_ids(&self) -> &[String] {
        &self.area_ids
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn interval_minutes(&self) -> u32 {
        self.interval_minutes
    }

    pub fn steps_per_day(&self) -> usize {
        (24 * 60 / self.interval_minutes) as usize
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.start + TimeDelta::minutes(self.interval_minutes as i64 * t as i64)
    }

    /// Index of `ts` on the grid, if it lies on it.
    pub fn index_of(&self, ts: NaiveDateTime) -> Option<usize> {
        let minutes = (ts - self.start).num_minutes();
        let step = self.interval_minutes as i64;
        if minutes < 0 || minutes % step != 0 || (ts - self.start).num_seconds() % 60 != 0 {
            return None;
        }
        let t = (minutes / step) as usize;
        (t < self.steps).then_some(t)
    }

    pub fn value(&self, t: usize, area: usize, channel: usize) -> f64 {
        let (n, c) = (self.n_areas(), self.n_channels());
        self.values[(t * n + area) * c + channel]
    }

    /// The `N × C` slice at step `t`.
    pub fn frame_slice(&self, t: usize) -> &[f64] {
        let block = self.n_areas() * self.n_channels();
        &self.values[t * block..(t + 1) * block]
    }

    pub fn frame(&self, t: usize) -> Tensor {
        Tensor::new(
            vec![self.n_areas(), self.n_channels()],
            self.frame_slice(t).to_vec(),
        )
        .expect("frame shape")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Step indices whose date lies in `[first, last]`.
    pub fn steps_between(&self, first: NaiveDate, last: NaiveDate) -> std::ops::Range<usize> {
        let lo = (0..self.steps)
            .find(|&t| self.timestamp(t).date() >= first)
            .unwrap_or(self.steps);
        let hi = (lo..self.steps)
            .find(|&t| self.timestamp(t).date() > last)
            .unwrap_or(self.steps);
        lo..hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordKind {
    /// Degrees, columns `lat,lon`.
    LatLon,
    /// Meters, columns `x,y`.
    Xy,
}

/// Area ids with coordinates, in registry order.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaRegistry {
    pub ids: Vec<String>,
    /// `(lat, lon)` or `(x, y)` depending on `kind`.
    pub coords: Vec<(f64, f64)>,
    pub kind: CoordKind,
}

impl AreaRegistry {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    fn index_map(&self) -> HashMap<&str, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }
}

/// Static per-area descriptor matrix `N × V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArealFeature {
    pub name: String,
    pub component_names: Vec<String>,
    pub matrix: Tensor,
}

impl ArealFeature {
    pub fn new(
        name: impl Into<String>,
        component_names: Vec<String>,
        matrix: Tensor,
    ) -> Result<Self> {
        let name = name.into();
        if component_names.is_empty()
            || matrix.cols() != component_names.len()
            || matrix.shape().len() != 2
        {
            return Err(Error::Schema(format!(
                "feature {name}: {} component names for matrix {:?}",
                component_names.len(),
                matrix.shape()
            )));
        }
        if matrix.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Schema(format!(
                "feature {name}: values must be finite and non-negative"
            )));
        }
        Ok(Self {
            name,
            component_names,
            matrix,
        })
    }

    pub fn n_components(&self) -> usize {
        self.component_names.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HolidayCalendar {
    dates: BTreeSet<NaiveDate>,
}

impl HolidayCalendar {
    pub fn new(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        Self {
            dates: dates.into_iter().collect(),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.dates.contains(&date)
    }

    pub fn dates(&self) -> impl Iterator<Item = &NaiveDate> {
        self.dates.iter()
    }
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        Error::Parse(format!(
            "{}:{line}: not a number: {field:?}",
            path.display()
        ))
    })
}

/// Reads `area_id,lat,lon` or `area_id,x,y`.
pub fn load_registry(path: &Path) -> Result<AreaRegistry> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let kind = match cols.as_slice() {
        ["area_id", "lat", "lon"] => CoordKind::LatLon,
        ["area_id", "x", "y"] => CoordKind::Xy,
        other => {
            return Err(Error::Schema(format!(
                "{}: registry header must be area_id,lat,lon or area_id,x,y, got {other:?}",
                path.display()
            )))
        }
    };
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let (a, b) = match (rec.get(1), rec.get(2)) {
            (Some(a), Some(b)) if !a.is_empty() && !b.is_empty() => {
                (parse_f64(path, line + 2, a)?, parse_f64(path, line + 2, b)?)
            }
            _ => {
                return Err(Error::Schema(format!(
                    "{}: area {id} is missing a coordinate",
                    path.display()
                )))
            }
        };
        if ids.contains(&id) {
            return Err(Error::Schema(format!(
                "{}: duplicate area id {id}",
                path.display()
            )));
        }
        ids.push(id);
        coords.push((a, b));
    }
    Ok(AreaRegistry { ids, coords, kind })
}

/// Reads long-format demand `timestamp,area_id,<channel…>` into a dense
/// series ordered by `registry`. Every area must have a row at every grid
/// step; the grid interval is the smallest gap between distinct timestamps
/// unless `interval_minutes` fixes it.
pub fn load_demand(
    path: &Path,
    registry: &AreaRegistry,
    interval_minutes: Option<u32>,
) -> Result<DemandSeries> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    if headers.len() < 3 || &headers[0] != "timestamp" || &headers[1] != "area_id" {
        return Err(Error::Schema(format!(
            "{}: demand header must start with timestamp,area_id and name at least one channel",
            path.display()
        )));
    }
    let channels: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    let c = channels.len();
    let index = registry.index_map();

    let mut rows: Vec<(NaiveDateTime, usize, Vec<f64>)> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = line + 2;
        let ts = parse_timestamp(&rec[0])?;
        let area = *index.get(&rec[1]).ok_or_else(|| {
            Error::Schema(format!(
                "{}:{line}: unknown area id {:?}",
                path.display(),
                &rec[1]
            ))
        })?;
        if rec.len() != c + 2 {
            return Err(Error::Schema(format!(
                "{}:{line}: expected {} fields",
                path.display(),
                c + 2
            )));
        }
        let vals = (0..c)
            .map(|k| parse_f64(path, line, &rec[k + 2]))
            .collect::<Result<Vec<_>>>()?;
        rows.push((ts, area, vals));
    }
    if rows.is_empty() {
        return Err(Error::Schema(format!("{}: no demand rows", path.display())));
    }

    let distinct: BTreeSet<NaiveDateTime> = rows.iter().map(|r| r.0).collect();
    let start = *distinct.first().expect("non-empty");
    let end = *distinct.last().expect("non-empty");
    let interval = match interval_minutes {
        Some(i) => i as i64,
        None => distinct
            .iter()
            .zip(distinct.iter().skip(1))
            .map(|(a, b)| (*b - *a).num_minutes())
            .min()
            .unwrap_or(60),
    };
    if interval <= 0 {
        return Err(Error::Schema(format!(
            "{}: non-positive interval",
            path.display()
        )));
    }
    let span = (end - start).num_minutes();
    let steps = (span / interval) as usize + 1;

    let n = registry.len();
    let mut values = vec![f64::NAN; steps * n * c];
    for (ts, area, vals) in rows {
        let offset = (ts - start).num_minutes();
        if offset % interval != 0 || (ts - start).num_seconds() % 60 != 0 {
            return Err(Error::Schema(format!(
                "{}: timestamp {} is off the {interval}-minute grid",
                path.display(),
                format_timestamp(ts)
            )));
        }
        let t = (offset / interval) as usize;
        let base = (t * n + area) * c;
        if !values[base].is_nan() {
            return Err(Error::Schema(format!(
                "{}: duplicate row for area {} at {}",
                path.display(),
                registry.ids[area],
                format_timestamp(ts)
            )));
        }
        values[base..base + c].copy_from_slice(&vals);
    }
    for t in 0..steps {
        for (i, id) in registry.ids.iter().enumerate() {
            if values[(t * n + i) * c].is_nan() {
                return Err(Error::Gap {
                    area: id.clone(),
                    timestamp: format_timestamp(start + TimeDelta::minutes(interval * t as i64)),
                });
            }
        }
    }
    DemandSeries::new(
        registry.ids.clone(),
        channels,
        start,
        interval as u32,
        values,
    )
}

/// Reads a wide `area_id,<component…>` file, reordered to `registry`.
pub fn load_feature(path: &Path, name: &str, registry: &AreaRegistry) -> Result<ArealFeature> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    if headers.len() < 2 || &headers[0] != "area_id" {
        return Err(Error::Schema(format!(
            "{}: feature header must be area_id followed by at least one component",
            path.display()
        )));
    }
    let comps: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let v = comps.len();
    let index = registry.index_map();
    let n = registry.len();
    let mut data = vec![f64::NAN; n * v];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = line + 2;
        let area = *index.get(&rec[0]).ok_or_else(|| {
            Error::Schema(format!(
                "{}:{line}: unknown area id {:?}",
                path.display(),
                &rec[0]
            ))
        })?;
        if rec.len() != v + 1 {
            return Err(Error::Schema(format!(
                "{}:{line}: expected {} fields",
                path.display(),
                v + 1
            )));
        }
        for k in 0..v {
            data[area * v + k] = parse_f64(path, line, &rec[k + 1])?;
        }
    }
    if let Some(i) = (0..n).find(|&i| data[i * v].is_nan()) {
        return Err(Error::Schema(format!(
            "{}: feature {name} has no row for area {}",
            path.display(),
            registry.ids[i]
        )));
    }
    ArealFeature::new(name, comps, Tensor::new(vec![n, v], data)?)
}

/// One ISO date per line; blank lines and `#` comments are skipped.
pub fn load_holidays(path: &Path) -> Result<HolidayCalendar> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut dates = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let d = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|_| {
            Error::Parse(format!(
                "{}:{}: not an ISO date: {line:?}",
                path.display(),
                i + 1
            ))
        })?;
        dates.insert(d);
    }
    Ok(HolidayCalendar { dates })
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn fmt_value(v: f64) -> String {
    // Shortest representation that parses back to the same f64.
    format!("{v}")
}

pub fn write_registry(path: &Path, registry: &AreaRegistry) -> Result<()> {
    let mut w = writer(path)?;
    let header = match registry.kind {
        CoordKind::LatLon => ["area_id", "lat", "lon"],
        CoordKind::Xy => ["area_id", "x", "y"],
    };
    w.write_record(header).map_err(csv_err(path))?;
    for (id, (a, b)) in registry.ids.iter().zip(&registry.coords) {
        w.write_record([id.as_str(), &fmt_value(*a), &fmt_value(*b)])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_demand(path: &Path, series: &DemandSeries) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["timestamp".to_string(), "area_id".to_string()];
    header.extend(series.channels().iter().cloned());
    w.write_record(&header).map_err(csv_err(path))?;
    let mut rec = Vec::with_capacity(header.len());
    for t in 0..series.len() {
        let ts = format_timestamp(series.timestamp(t));
        for (i, id) in series.area_ids().iter().enumerate() {
            rec.clear();
            rec.push(ts.clone());
            rec.push(id.clone());
            for c in 0..series.n_channels() {
                rec.push(fmt_value(series.value(t, i, c)));
            }
            w.write_record(&rec).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_feature(path: &Path, feature: &ArealFeature, area_ids: &[String]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["area_id".to_string()];
    header.extend(feature.component_names.iter().cloned());
    w.write_record(&header).map_err(csv_err(path))?;
    for (i, id) in area_ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(feature.matrix.row(i).iter().map(|v| fmt_value(*v)));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_holidays(path: &Path, calendar: &HolidayCalendar) -> Result<()> {
    let mut text = String::new();
    for d in calendar.dates() {
        text.push_str(&d.format("%Y-%m-%d").to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
