//! Seeded synthetic load, weather and telemetry with known ground truth.
//!
//! Every random draw is keyed by `(seed, stream, hour index)`, so any hour can be
//! regenerated on its own and parallel generation gives the same bytes as serial.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate, NaiveDateTime, TimeDelta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{BaSettings, TelemetrySample, NOMINAL_FREQ_HZ};
use crate::error::{Error, Result};
use crate::features::{block, build_matrix, FeatureMatrix, WIDTH};
use crate::timeseries::{CalendarConfig, HourlySeries, JoinedRow, Timestamp};
use crate::weather::WeatherRecord;

const STREAM_TEMP: u64 = 1;
const STREAM_WIND: u64 = 2;
const STREAM_RH: u64 = 3;
const STREAM_LOAD: u64 = 4;
const STREAM_FORECAST: u64 = 5;

pub const TEMP_RANGE_C: (f64, f64) = (-40.0, 35.0);

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for one `(stream, index)` cell under `seed`.
pub fn cell_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(stream)));
    rng.set_stream(stream);
    let mut key = [0u8; 32];
    rng.set_word_pos(u128::from(index) * 4);
    rng.fill(&mut key);
    ChaCha8Rng::from_seed(key)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Planted trend per year and coefficient vector in the standard design layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedModel {
    pub trend_by_year: BTreeMap<i32, f64>,
    pub coefficients: Vec<f64>,
}

impl PlantedModel {
    /// A prairie-utility-like model around 2500 MW with the same trend every year.
    pub fn typical(first_year: i32, last_year: i32) -> Self {
        let trend_by_year = (first_year..=last_year).map(|y| (y, 2450.0)).collect();
        let mut b = vec![0.0; WIDTH];
        let month = [
            60.0, 40.0, 20.0, 0.0, -20.0, -30.0, 0.0, 0.0, -20.0, -10.0, 20.0, 50.0,
        ];
        for (i, v) in month.iter().enumerate() {
            b[block::MONTH.start + i] = *v;
        }
        for h in 0..24 {
            let phase = 2.0 * PI * (h as f64 - 4.0) / 24.0;
            b[block::HOUR.start + h] = -180.0 * phase.cos();
            b[block::WINDCHILL_HOUR.start + h] = -4.0;
            b[block::HEATINDEX_HOUR.start + h] = 6.0;
            b[block::TEMP_HOUR.start + h] = -2.0;
            b[block::TEMP2_HOUR.start + h] = 0.12;
        }
        for d in 0..7 {
            for h in 8..18 {
                b[block::WEEKDAY_HOUR.start + d * 24 + h] = if d < 5 { 25.0 } else { -40.0 };
            }
        }
        b[block::WEEKEND] = -120.0;
        for m in 0..12 {
            b[block::HOLIDAY.start + m] = -100.0;
            b[block::TMAX_HOLIDAY.start + m] = 2.0;
            b[block::TMIN_HOLIDAY.start + m] = 1.0;
        }
        PlantedModel {
            trend_by_year,
            coefficients: b,
        }
    }

    fn validate(&self, years: impl Iterator<Item = i32>) -> Result<()> {
        if self.coefficients.len() != WIDTH {
            return Err(Error::InvalidValue(format!(
                "planted coefficient vector has {} entries, expected {WIDTH}",
                self.coefficients.len()
            )));
        }
        for y in years {
            if !self.trend_by_year.contains_key(&y) {
                return Err(Error::InvalidValue(format!(
                    "planted trend has no entry for {y}"
                )));
            }
        }
        Ok(())
    }

    /// Adds `mw_per_year` to each year's trend for every year after the first.
    pub fn with_trend_growth(mut self, mw_per_year: f64) -> Self {
        if let Some(&first) = self.trend_by_year.keys().next() {
            for (y, v) in self.trend_by_year.iter_mut() {
                *v += mw_per_year * f64::from(y - first);
            }
        }
        self
    }

    /// trend(year) + a·b*
    pub fn predict(&self, t: Timestamp, row: &[f64]) -> f64 {
        self.trend_by_year[&t.year()]
            + row
                .iter()
                .zip(&self.coefficients)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }
}

/// Multiplies true load by `1 − fraction` on `[from, to)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suppression {
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    /// First day (inclusive).
    pub start: NaiveDate,
    /// Last day (exclusive).
    pub end: NaiveDate,
    pub model: PlantedModel,
    /// Standard deviation of independent Gaussian load noise, MW.
    pub noise_std: f64,
    pub suppression: Vec<Suppression>,
}

impl ScenarioSpec {
    /// Typical model, no noise, no suppression.
    pub fn new(seed: u64, start: NaiveDate, end: NaiveDate) -> Self {
        ScenarioSpec {
            seed,
            start,
            end,
            model: PlantedModel::typical(start.year(), end.year()),
            noise_std: 0.0,
            suppression: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.end <= self.start {
            return Err(Error::InvalidValue(format!(
                "scenario end {} is not after start {}",
                self.end, self.start
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidValue(format!("noise_std {}", self.noise_std)));
        }
        for s in &self.suppression {
            if !(0.0..1.0).contains(&s.fraction) {
                return Err(Error::InvalidValue(format!(
                    "suppression fraction {} outside [0, 1)",
                    s.fraction
                )));
            }
            if s.from >= s.to || s.from < self.start || s.to > self.end {
                return Err(Error::InvalidValue(format!(
                    "suppression window {}..{} not inside {}..{}",
                    s.from, s.to, self.start, self.end
                )));
            }
        }
        let last_hour = self.end - TimeDelta::days(1);
        self.model.validate(self.start.year()..=last_hour.year())
    }

    pub fn hours(&self) -> usize {
        (self.end - self.start).num_days() as usize * 24
    }

    /// Total suppression fraction at `t` (overlapping windows add).
    pub fn suppression_at(&self, t: Timestamp) -> f64 {
        let d = t.date();
        self.suppression
            .iter()
            .filter(|s| s.from <= d && d < s.to)
            .map(|s| s.fraction)
            .sum()
    }
}

/// What the generator planted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub noise_std: f64,
    pub model: PlantedModel,
    pub suppression: Vec<Suppression>,
    /// Σ suppression(t) · unsuppressed load(t), MWh.
    pub suppressed_energy_mwh: f64,
    pub suppressed_hours: usize,
}

impl Truth {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    /// Observed load (suppressed, noisy).
    pub load: HourlySeries,
    /// trend + a·b*, before suppression and noise.
    pub expected: HourlySeries,
    pub weather: Vec<WeatherRecord>,
    pub truth: Truth,
}

impl Scenario {
    pub fn joined_rows(&self) -> Vec<JoinedRow> {
        self.weather
            .iter()
            .zip(self.load.values())
            .map(|(w, y)| JoinedRow {
                timestamp: w.timestamp,
                load_mw: y.expect("generated load is complete"),
                weather: *w,
            })
            .collect()
    }
}

/// Hourly temperature: seasonal and diurnal sinusoids plus Gaussian noise.
fn temperature(seed: u64, t: Timestamp, index: u64) -> f64 {
    let doy = f64::from(t.date().ordinal0());
    let seasonal = 3.0 - 20.0 * (2.0 * PI * (doy - 15.0) / 365.25).cos();
    let diurnal = 6.0 * (2.0 * PI * (f64::from(t.hour()) - 9.0) / 24.0).sin();
    let noise = 2.0 * normal(&mut cell_rng(seed, STREAM_TEMP, index));
    (seasonal + diurnal + noise).clamp(TEMP_RANGE_C.0, TEMP_RANGE_C.1)
}

/// Synthetic hourly weather for `[start, end)`; daily extremes come from the day's hours.
pub fn generate_weather(seed: u64, start: NaiveDate, end: NaiveDate) -> Vec<WeatherRecord> {
    let t0 = Timestamp::midnight(start);
    let n = (end - start).num_days().max(0) as usize * 24;
    let mut records: Vec<WeatherRecord> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = t0.add_hours(i as i64);
            let idx = i as u64;
            let temp_c = temperature(seed, t, idx);
            let wind_kmh = (15.0 + 9.0 * normal(&mut cell_rng(seed, STREAM_WIND, idx))).abs();
            let diurnal_rh = -20.0 * (2.0 * PI * (f64::from(t.hour()) - 9.0) / 24.0).sin();
            let rh_pct = (60.0 + diurnal_rh + 12.0 * normal(&mut cell_rng(seed, STREAM_RH, idx)))
                .clamp(5.0, 100.0);
            WeatherRecord {
                timestamp: t,
                temp_c,
                wind_kmh,
                rh_pct,
                daily_max_c: f64::NAN,
                daily_min_c: f64::NAN,
            }
        })
        .collect();
    for day in records.chunks_mut(24) {
        let max = day
            .iter()
            .map(|r| r.temp_c)
            .fold(f64::NEG_INFINITY, f64::max);
        let min = day.iter().map(|r| r.temp_c).fold(f64::INFINITY, f64::min);
        for r in day {
            r.daily_max_c = max;
            r.daily_min_c = min;
        }
    }
    records
}

/// Generates a scenario; `cal` decides holidays and seasons of the planted features.
pub fn generate(spec: &ScenarioSpec, cal: &CalendarConfig) -> Result<Scenario> {
    spec.validate()?;
    let weather = generate_weather(spec.seed, spec.start, spec.end);
    let rows: Vec<JoinedRow> = weather
        .iter()
        .map(|w| JoinedRow {
            timestamp: w.timestamp,
            load_mw: 0.0,
            weather: *w,
        })
        .collect();
    let matrix = build_matrix(&rows, cal)?;
    let expected = planted_predictions(&spec.model, &matrix);

    let noisy: Vec<(f64, f64)> = expected
        .par_iter()
        .enumerate()
        .map(|(i, clean)| {
            let t = matrix.timestamps()[i];
            let s = spec.suppression_at(t);
            let noise = if spec.noise_std > 0.0 {
                spec.noise_std * normal(&mut cell_rng(spec.seed, STREAM_LOAD, i as u64))
            } else {
                0.0
            };
            (clean * (1.0 - s) + noise, s * clean)
        })
        .collect();

    let mut suppressed_energy_mwh = 0.0;
    let mut suppressed_hours = 0;
    for (_, lost) in &noisy {
        if *lost != 0.0 {
            suppressed_hours += 1;
        }
        suppressed_energy_mwh += lost;
    }
    let start = Timestamp::midnight(spec.start);
    Ok(Scenario {
        load: HourlySeries::new(start, noisy.iter().map(|(y, _)| Some(*y)).collect())?,
        expected: HourlySeries::new(start, expected.into_iter().map(Some).collect())?,
        weather,
        truth: Truth {
            seed: spec.seed,
            noise_std: spec.noise_std,
            model: spec.model.clone(),
            suppression: spec.suppression.clone(),
            suppressed_energy_mwh,
            suppressed_hours,
        },
    })
}

/// trend + a·b* for every row of `matrix`.
pub fn planted_predictions(model: &PlantedModel, matrix: &FeatureMatrix) -> Vec<f64> {
    (0..matrix.nrows())
        .into_par_iter()
        .map(|i| model.predict(matrix.timestamps()[i], matrix.row(i)))
        .collect()
}

/// A forecast of `actual` with independent relative Gaussian error.
pub fn synthetic_forecast(actual: &HourlySeries, seed: u64, rel_std: f64) -> Result<HourlySeries> {
    let values = actual
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            v.map(|y| y * (1.0 + rel_std * normal(&mut cell_rng(seed, STREAM_FORECAST, i as u64))))
        })
        .collect();
    HourlySeries::new(actual.start(), values)
}

/// Fixed-date public holidays in each year of `[first_year, last_year]`.
pub fn fixed_holidays(first_year: i32, last_year: i32) -> Vec<NaiveDate> {
    let days = [(1, 1), (7, 1), (11, 11), (12, 25), (12, 26)];
    (first_year..=last_year)
        .flat_map(|y| {
            days.iter()
                .map(move |&(m, d)| NaiveDate::from_ymd_opt(y, m, d).expect("fixed date"))
        })
        .collect()
}

/// Minutes of constant RACE and frequency error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryBlock {
    pub minutes: u32,
    pub race_mw: f64,
    pub delta_f_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySpec {
    pub start: NaiveDateTime,
    pub settings: BaSettings,
    pub blocks: Vec<TelemetryBlock>,
    /// Raw scans per clock minute (1 to 60).
    pub samples_per_minute: u32,
    pub ni_scheduled_mw: f64,
}

impl TelemetrySpec {
    pub fn new(start: NaiveDateTime, blocks: Vec<TelemetryBlock>) -> Self {
        TelemetrySpec {
            start,
            settings: BaSettings::default(),
            blocks,
            samples_per_minute: 1,
            ni_scheduled_mw: 100.0,
        }
    }

    /// Mean minute compliance factor implied by the blocks, Hz².
    pub fn analytic_cf_month(&self) -> f64 {
        let minutes: f64 = self.blocks.iter().map(|b| f64::from(b.minutes)).sum();
        let total: f64 = self
            .blocks
            .iter()
            .map(|b| f64::from(b.minutes) * b.race_mw * b.delta_f_hz)
            .sum();
        total / (-10.0 * self.settings.bias_b) / minutes
    }
}

/// Telemetry scans whose minute averages reproduce the blocks exactly.
pub fn generate_telemetry(spec: &TelemetrySpec) -> Result<Vec<TelemetrySample>> {
    if !(1..=60).contains(&spec.samples_per_minute) {
        return Err(Error::InvalidValue(format!(
            "samples_per_minute {} outside 1..=60",
            spec.samples_per_minute
        )));
    }
    let step = 60 / spec.samples_per_minute as i64;
    let b10 = 10.0 * spec.settings.bias_b;
    let mut out = Vec::new();
    let mut minute = 0i64;
    for blk in &spec.blocks {
        for _ in 0..blk.minutes {
            let t = spec.start + TimeDelta::minutes(minute);
            for k in 0..i64::from(spec.samples_per_minute) {
                out.push(TelemetrySample {
                    timestamp: t + TimeDelta::seconds(k * step),
                    ni_actual_mw: spec.ni_scheduled_mw + blk.race_mw + b10 * blk.delta_f_hz,
                    ni_scheduled_mw: spec.ni_scheduled_mw,
                    freq_hz: NOMINAL_FREQ_HZ + blk.delta_f_hz,
                    freq_sched_hz: NOMINAL_FREQ_HZ,
                });
            }
            minute += 1;
        }
    }
    Ok(out)
}
