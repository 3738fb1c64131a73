//! Weather observations and the NWS perceived-temperature formulas.
//!
//! Storage is metric; the NWS regressions are evaluated in °F / mph and
//! converted back.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{column_index, csv_reader, parse_cell, record_line, Timestamp};

/// Tolerance when checking hourly temperatures against the reported daily extremes.
pub const DAILY_RANGE_TOLERANCE_C: f64 = 0.5;

pub fn c_to_f(c: f64) -> f64 {
    c * 9.0 / 5.0 + 32.0
}

pub fn f_to_c(f: f64) -> f64 {
    (f - 32.0) * 5.0 / 9.0
}

pub fn kmh_to_mph(kmh: f64) -> f64 {
    kmh / 1.609344
}

/// NWS wind chill in °F. Returns `temp_f` unchanged outside T ≤ 50 °F, V > 3 mph.
pub fn wind_chill_f(temp_f: f64, wind_mph: f64) -> f64 {
    if temp_f > 50.0 || wind_mph <= 3.0 {
        return temp_f;
    }
    let v = wind_mph.powf(0.16);
    35.74 + 0.6215 * temp_f + (0.4275 * temp_f - 35.75) * v
}

/// Wind chill in °C from °C and km/h.
pub fn wind_chill(temp_c: f64, wind_kmh: f64) -> f64 {
    let t = c_to_f(temp_c);
    let v = kmh_to_mph(wind_kmh);
    if t > 50.0 || v <= 3.0 {
        return temp_c;
    }
    f_to_c(wind_chill_f(t, v))
}

/// Steadman's simple formula, used when the heat index is below about 80 °F.
pub fn heat_index_simple_f(temp_f: f64, rh: f64) -> f64 {
    0.5 * (temp_f + 61.0 + (temp_f - 68.0) * 1.2 + rh * 0.094)
}

/// Rothfusz regression without adjustments.
pub fn rothfusz_f(t: f64, rh: f64) -> f64 {
    -42.379 + 2.049_015_23 * t + 10.143_331_27 * rh
        - 0.224_755_41 * t * rh
        - 0.006_837_83 * t * t
        - 0.054_817_17 * rh * rh
        + 0.001_228_74 * t * t * rh
        + 0.000_852_82 * t * rh * rh
        - 0.000_001_99 * t * t * rh * rh
}

/// NWS heat index in °F.
///
/// The simple formula is averaged with the temperature; below 80 °F the simple
/// value is returned. Otherwise the Rothfusz regression applies, minus the
/// low-humidity adjustment (RH < 13 %, 80–112 °F) or plus the high-humidity
/// adjustment (RH > 85 %, 80–87 °F).
pub fn heat_index_f(temp_f: f64, rh: f64) -> f64 {
    let simple = heat_index_simple_f(temp_f, rh);
    if (simple + temp_f) / 2.0 < 80.0 {
        return simple;
    }
    let mut hi = rothfusz_f(temp_f, rh);
    if rh < 13.0 && (80.0..=112.0).contains(&temp_f) {
        hi -= ((13.0 - rh) / 4.0) * ((17.0 - (temp_f - 95.0).abs()) / 17.0).sqrt();
    } else if rh > 85.0 && (80.0..=87.0).contains(&temp_f) {
        hi += ((rh - 85.0) / 10.0) * ((87.0 - temp_f) / 5.0);
    }
    hi
}

/// Heat index in °C. Relative humidity must lie in [0, 100].
pub fn heat_index(temp_c: f64, rh_pct: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&rh_pct) {
        return Err(Error::InvalidValue(format!(
            "relative humidity {rh_pct} outside [0, 100]"
        )));
    }
    Ok(f_to_c(heat_index_f(c_to_f(temp_c), rh_pct)))
}

/// One row of the weather file; any field may be missing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeatherObservation {
    pub timestamp: Timestamp,
    pub temp_c: Option<f64>,
    pub wind_kmh: Option<f64>,
    pub rh_pct: Option<f64>,
    pub daily_max_c: Option<f64>,
    pub daily_min_c: Option<f64>,
}

impl WeatherObservation {
    /// The complete record, or `None` if any field is missing.
    pub fn complete(&self) -> Option<WeatherRecord> {
        Some(WeatherRecord {
            timestamp: self.timestamp,
            temp_c: self.temp_c?,
            wind_kmh: self.wind_kmh?,
            rh_pct: self.rh_pct?,
            daily_max_c: self.daily_max_c?,
            daily_min_c: self.daily_min_c?,
        })
    }
}

impl From<WeatherRecord> for WeatherObservation {
    fn from(w: WeatherRecord) -> Self {
        WeatherObservation {
            timestamp: w.timestamp,
            temp_c: Some(w.temp_c),
            wind_kmh: Some(w.wind_kmh),
            rh_pct: Some(w.rh_pct),
            daily_max_c: Some(w.daily_max_c),
            daily_min_c: Some(w.daily_min_c),
        }
    }
}

/// A complete hourly weather record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub timestamp: Timestamp,
    pub temp_c: f64,
    pub wind_kmh: f64,
    pub rh_pct: f64,
    pub daily_max_c: f64,
    pub daily_min_c: f64,
}

impl WeatherRecord {
    pub fn wind_chill_c(&self) -> f64 {
        wind_chill(self.temp_c, self.wind_kmh)
    }

    pub fn heat_index_c(&self) -> f64 {
        f_to_c(heat_index_f(
            c_to_f(self.temp_c),
            self.rh_pct.clamp(0.0, 100.0),
        ))
    }
}

fn check_ranges(wind: Option<f64>, rh: Option<f64>) -> std::result::Result<(), String> {
    if let Some(w) = wind.filter(|w| *w < 0.0) {
        return Err(format!("negative wind speed {w}"));
    }
    if let Some(h) = rh.filter(|h| !(0.0..=100.0).contains(h)) {
        return Err(format!("relative humidity {h} outside [0, 100]"));
    }
    Ok(())
}

/// Days whose hourly temperatures fall outside the reported daily min/max
/// (beyond [`DAILY_RANGE_TOLERANCE_C`]), or whose min exceeds max.
pub fn check_daily_ranges(records: &[WeatherRecord]) -> Vec<NaiveDate> {
    let mut bad = std::collections::BTreeSet::new();
    for r in records {
        let lo = r.daily_min_c - DAILY_RANGE_TOLERANCE_C;
        let hi = r.daily_max_c + DAILY_RANGE_TOLERANCE_C;
        if r.daily_min_c > r.daily_max_c + DAILY_RANGE_TOLERANCE_C || r.temp_c < lo || r.temp_c > hi
        {
            bad.insert(r.timestamp.date());
        }
    }
    bad.into_iter().collect()
}

/// Daily (max, min) temperature per date, as reported on the records.
pub fn daily_temperatures<'a>(
    records: impl IntoIterator<Item = &'a WeatherRecord>,
) -> BTreeMap<NaiveDate, (f64, f64)> {
    records
        .into_iter()
        .map(|r| (r.timestamp.date(), (r.daily_max_c, r.daily_min_c)))
        .collect()
}

const WEATHER_COLUMNS: [&str; 6] = [
    "timestamp",
    "temp_c",
    "wind_kmh",
    "rh_pct",
    "daily_max_c",
    "daily_min_c",
];

/// Reads `timestamp,temp_c,wind_kmh,rh_pct,daily_max_c,daily_min_c`.
/// Empty cells are kept as missing fields; out-of-range values are schema errors.
pub fn read_weather_csv<R: Read>(reader: R, path: &str) -> Result<Vec<WeatherObservation>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(WEATHER_COLUMNS) {
        *slot = column_index(&headers, name, path)?;
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let timestamp = Timestamp::parse(record.get(idx[0]).unwrap_or(""))
            .map_err(|e| Error::schema(path, line, e.to_string()))?;
        let cell = |k: usize| parse_cell(&record, idx[k], WEATHER_COLUMNS[k], path);
        let obs = WeatherObservation {
            timestamp,
            temp_c: cell(1)?,
            wind_kmh: cell(2)?,
            rh_pct: cell(3)?,
            daily_max_c: cell(4)?,
            daily_min_c: cell(5)?,
        };
        check_ranges(obs.wind_kmh, obs.rh_pct).map_err(|m| Error::schema(path, line, m))?;
        out.push(obs);
    }
    Ok(out)
}

pub fn read_weather_file(path: &Path) -> Result<Vec<WeatherObservation>> {
    let file = std::fs::File::open(path)?;
    read_weather_csv(file, &path.display().to_string())
}

pub fn write_weather_csv<W: Write>(writer: W, rows: &[WeatherObservation]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(WEATHER_COLUMNS)?;
    let cell = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        wtr.write_record([
            r.timestamp.to_string(),
            cell(r.temp_c),
            cell(r.wind_kmh),
            cell(r.rh_pct),
            cell(r.daily_max_c),
            cell(r.daily_min_c),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
