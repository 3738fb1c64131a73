//! Reporting ACE, clock-minute compliance factors and monthly CPS1.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDateTime, Timelike};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{column_index, csv_reader, optional_column, parse_cell, record_line};

/// Sanity band for telemetered frequencies, Hz.
pub const FREQ_BAND_HZ: (f64, f64) = (59.0, 61.0);
pub const NOMINAL_FREQ_HZ: f64 = 60.0;

/// One raw telemetry scan (any resolution down to seconds).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub timestamp: NaiveDateTime,
    pub ni_actual_mw: f64,
    pub ni_scheduled_mw: f64,
    pub freq_hz: f64,
    pub freq_sched_hz: f64,
}

/// Clock-minute averages of telemetry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinuteTelemetry {
    /// Start of the clock minute.
    pub minute: NaiveDateTime,
    pub ni_actual_mw: f64,
    pub ni_scheduled_mw: f64,
    pub freq_hz: f64,
    pub freq_sched_hz: f64,
}

impl MinuteTelemetry {
    /// F_A − F_S
    pub fn delta_f(&self) -> f64 {
        self.freq_hz - self.freq_sched_hz
    }

    /// "YYYY-MM" of the minute.
    pub fn month_label(&self) -> String {
        month_label(self.minute)
    }
}

fn month_label(t: NaiveDateTime) -> String {
    format!("{:04}-{:02}", t.year(), t.month())
}

fn in_band(f: f64) -> bool {
    (FREQ_BAND_HZ.0..=FREQ_BAND_HZ.1).contains(&f)
}

/// Minute series built from raw samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MinuteSeries {
    pub minutes: Vec<MinuteTelemetry>,
    /// Samples dropped for a frequency outside [`FREQ_BAND_HZ`].
    pub rejected: usize,
}

/// Averages samples into clock minutes. Samples with an out-of-band frequency
/// are dropped and counted; minutes with no samples are absent.
pub fn to_minutes(samples: &[TelemetrySample]) -> MinuteSeries {
    let mut acc: BTreeMap<NaiveDateTime, ([f64; 4], usize)> = BTreeMap::new();
    let mut rejected = 0;
    for s in samples {
        if !in_band(s.freq_hz) || !in_band(s.freq_sched_hz) {
            rejected += 1;
            continue;
        }
        let minute = s
            .timestamp
            .with_second(0)
            .and_then(|t| t.with_nanosecond(0))
            .expect("valid minute");
        let e = acc.entry(minute).or_insert(([0.0; 4], 0));
        e.0[0] += s.ni_actual_mw;
        e.0[1] += s.ni_scheduled_mw;
        e.0[2] += s.freq_hz;
        e.0[3] += s.freq_sched_hz;
        e.1 += 1;
    }
    let minutes = acc
        .into_iter()
        .map(|(minute, (sum, n))| {
            let n = n as f64;
            MinuteTelemetry {
                minute,
                ni_actual_mw: sum[0] / n,
                ni_scheduled_mw: sum[1] / n,
                freq_hz: sum[2] / n,
                freq_sched_hz: sum[3] / n,
            }
        })
        .collect();
    MinuteSeries { minutes, rejected }
}

/// Balancing-authority constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaSettings {
    /// Frequency bias, MW per 0.1 Hz (negative).
    pub bias_b: f64,
    /// Interconnection frequency target ε1, Hz.
    pub epsilon1: f64,
}

impl Default for BaSettings {
    fn default() -> Self {
        BaSettings {
            bias_b: -41.9,
            epsilon1: 0.018,
        }
    }
}

impl BaSettings {
    pub fn new(bias_b: f64, epsilon1: f64) -> Result<Self> {
        if !(bias_b < 0.0 && bias_b.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "frequency bias must be negative, got {bias_b}"
            )));
        }
        if !(epsilon1 > 0.0 && epsilon1.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "epsilon1 must be positive, got {epsilon1}"
            )));
        }
        Ok(BaSettings { bias_b, epsilon1 })
    }
}

/// Reporting ACE, MW: (NI_A − NI_S) − 10·B·(F_A − F_S).
pub fn race(m: &MinuteTelemetry, s: &BaSettings) -> f64 {
    (m.ni_actual_mw - m.ni_scheduled_mw) - 10.0 * s.bias_b * m.delta_f()
}

/// Minute compliance factor, Hz²: RACE/(−10·B) · ΔF.
pub fn cf_minute(race_mw: f64, delta_f: f64, s: &BaSettings) -> f64 {
    race_mw / (-10.0 * s.bias_b) * delta_f
}

/// CPS1 (%) from a monthly mean compliance factor.
pub fn cps1_from_cf_month(cf_month: f64, epsilon1: f64) -> f64 {
    (2.0 - cf_month / (epsilon1 * epsilon1)) * 100.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cps1Report {
    /// "YYYY-MM"
    pub month: String,
    pub n_minutes: usize,
    /// Mean minute compliance factor, Hz².
    pub cf_month: f64,
    /// cf_month / ε1²
    pub cf: f64,
    pub cps1_pct: f64,
}

/// CPS1 for the minutes of a single civil month.
pub fn cps1_month(minutes: &[MinuteTelemetry], s: &BaSettings) -> Result<Cps1Report> {
    let Some(first) = minutes.first() else {
        return Err(Error::Empty("telemetry minutes"));
    };
    let month = first.month_label();
    if let Some(other) = minutes.iter().find(|m| m.month_label() != month) {
        return Err(Error::InvalidValue(format!(
            "minutes span more than one month ({month} and {})",
            other.month_label()
        )));
    }
    let cf_sum: f64 = minutes
        .iter()
        .map(|m| cf_minute(race(m, s), m.delta_f(), s))
        .sum();
    let cf_month = cf_sum / minutes.len() as f64;
    let eps2 = s.epsilon1 * s.epsilon1;
    Ok(Cps1Report {
        month,
        n_minutes: minutes.len(),
        cf_month,
        cf: cf_month / eps2,
        cps1_pct: cps1_from_cf_month(cf_month, s.epsilon1),
    })
}

/// One report per month present in `minutes`, in calendar order.
pub fn cps1_by_month(minutes: &[MinuteTelemetry], s: &BaSettings) -> Vec<Cps1Report> {
    let mut groups: BTreeMap<String, Vec<MinuteTelemetry>> = BTreeMap::new();
    for m in minutes {
        groups.entry(m.month_label()).or_default().push(*m);
    }
    let groups: Vec<Vec<MinuteTelemetry>> = groups.into_values().collect();
    groups
        .par_iter()
        .map(|g| cps1_month(g, s).expect("nonempty single-month group"))
        .collect()
}

/// Relative CPS1 of `test` against `baseline`, in percent; positive means
/// `test` performed worse.
pub fn cps1_relative(baseline: &Cps1Report, test: &Cps1Report) -> f64 {
    (baseline.cps1_pct - test.cps1_pct) / baseline.cps1_pct * 100.0
}

fn parse_telemetry_time(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M"))
        .ok()
}

/// Reads `timestamp,ni_actual_mw,ni_scheduled_mw,freq_hz[,freq_sched_hz]`.
/// A missing `freq_sched_hz` column means nominal 60 Hz.
pub fn read_telemetry_csv<R: Read>(reader: R, path: &str) -> Result<Vec<TelemetrySample>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    let ts_col = column_index(&headers, "timestamp", path)?;
    let na_col = column_index(&headers, "ni_actual_mw", path)?;
    let ns_col = column_index(&headers, "ni_scheduled_mw", path)?;
    let fa_col = column_index(&headers, "freq_hz", path)?;
    let fs_col = optional_column(&headers, "freq_sched_hz");
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let raw_ts = record.get(ts_col).unwrap_or("");
        let timestamp = parse_telemetry_time(raw_ts)
            .ok_or_else(|| Error::schema(path, line, format!("bad timestamp `{raw_ts}`")))?;
        let num = |col: usize, name: &str| -> Result<f64> {
            parse_cell(&record, col, name, path)?
                .ok_or_else(|| Error::schema(path, line, format!("empty `{name}`")))
        };
        let freq_sched_hz = match fs_col {
            Some(c) => num(c, "freq_sched_hz")?,
            None => NOMINAL_FREQ_HZ,
        };
        out.push(TelemetrySample {
            timestamp,
            ni_actual_mw: num(na_col, "ni_actual_mw")?,
            ni_scheduled_mw: num(ns_col, "ni_scheduled_mw")?,
            freq_hz: num(fa_col, "freq_hz")?,
            freq_sched_hz,
        });
    }
    Ok(out)
}

pub fn read_telemetry_file(path: &Path) -> Result<Vec<TelemetrySample>> {
    let f = std::fs::File::open(path)?;
    read_telemetry_csv(f, &path.display().to_string())
}

pub fn write_telemetry_csv<W: Write>(writer: W, samples: &[TelemetrySample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "timestamp",
        "ni_actual_mw",
        "ni_scheduled_mw",
        "freq_hz",
        "freq_sched_hz",
    ])?;
    for s in samples {
        w.write_record([
            s.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            s.ni_actual_mw.to_string(),
            s.ni_scheduled_mw.to_string(),
            s.freq_hz.to_string(),
            s.freq_sched_hz.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
