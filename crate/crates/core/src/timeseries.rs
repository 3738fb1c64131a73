//! Calendar-aware hourly containers and the calendar facts the model consumes.
//!
//! Every timestamp is a civil (local wall-clock) hour in the zone configured
//! on [`CalendarConfig`]. Series are stored on a dense hourly grid; a gap is an
//! explicit `None`, never a skipped slot.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, TimeZone, Timelike};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weather::{WeatherObservation, WeatherRecord};

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

/// A civil hour: `YYYY-MM-DDTHH:00` in the configured local zone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Timestamp(NaiveDateTime);

impl Timestamp {
    pub fn new(year: i32, month: u32, day: u32, hour: u32) -> Result<Self> {
        let date = NaiveDate::from_ymd_opt(year, month, day).ok_or_else(|| {
            Error::InvalidValue(format!("no such date {year:04}-{month:02}-{day:02}"))
        })?;
        let dt = date
            .and_hms_opt(hour, 0, 0)
            .ok_or_else(|| Error::InvalidValue(format!("hour {hour} out of range")))?;
        Ok(Timestamp(dt))
    }

    /// Midnight starting `date`.
    pub fn midnight(date: NaiveDate) -> Self {
        Timestamp(date.and_hms_opt(0, 0, 0).expect("midnight exists"))
    }

    pub fn from_datetime(dt: NaiveDateTime) -> Result<Self> {
        if dt.minute() != 0 || dt.second() != 0 || dt.nanosecond() != 0 {
            return Err(Error::InvalidValue(format!(
                "{dt} is not aligned to the start of an hour"
            )));
        }
        Ok(Timestamp(dt))
    }

    /// Parses `YYYY-MM-DDTHH:00`.
    pub fn parse(s: &str) -> Result<Self> {
        let dt = NaiveDateTime::parse_from_str(s.trim(), TIMESTAMP_FORMAT)
            .map_err(|e| Error::InvalidValue(format!("bad timestamp `{s}`: {e}")))?;
        Self::from_datetime(dt)
    }

    pub fn datetime(self) -> NaiveDateTime {
        self.0
    }

    pub fn date(self) -> NaiveDate {
        self.0.date()
    }

    pub fn year(self) -> i32 {
        self.0.year()
    }

    pub fn month(self) -> u32 {
        self.0.month()
    }

    pub fn day(self) -> u32 {
        self.0.day()
    }

    pub fn hour(self) -> u32 {
        self.0.hour()
    }

    /// Day of week, Monday = 0.
    pub fn weekday(self) -> u8 {
        self.0.weekday().num_days_from_monday() as u8
    }

    pub fn is_weekend(self) -> bool {
        self.weekday() >= 5
    }

    pub fn add_hours(self, hours: i64) -> Self {
        Timestamp(self.0 + Duration::hours(hours))
    }

    /// Whole hours from `self` to `later` (negative when `later` precedes).
    pub fn hours_until(self, later: Timestamp) -> i64 {
        (later.0 - self.0).num_hours()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format(TIMESTAMP_FORMAT))
    }
}

impl FromStr for Timestamp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Timestamp::parse(s)
    }
}

impl TryFrom<String> for Timestamp {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Timestamp::parse(&s)
    }
}

impl From<Timestamp> for String {
    fn from(t: Timestamp) -> String {
        t.to_string()
    }
}

/// Hourly MW samples on a dense 1-hour grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HourlySeries {
    start: Timestamp,
    values: Vec<Option<f64>>,
}

impl HourlySeries {
    /// Builds a series from `start` with one slot per hour. Present values must be finite.
    pub fn new(start: Timestamp, values: Vec<Option<f64>>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find_map(|(i, v)| v.filter(|x| !x.is_finite()).map(|x| (i, x)))
        {
            return Err(Error::InvalidValue(format!(
                "non-finite value {v} at {}",
                start.add_hours(i as i64)
            )));
        }
        Ok(HourlySeries { start, values })
    }

    /// Builds a series from strictly increasing points; hours between points become gaps.
    pub fn from_points<I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Timestamp, f64)>,
    {
        let mut iter = points.into_iter();
        let (start, first) = iter.next().ok_or(Error::Empty("hourly series"))?;
        let mut values = vec![Some(first)];
        let mut last = start;
        for (t, v) in iter {
            if t <= last {
                return Err(Error::InvalidValue(format!(
                    "timestamps not strictly increasing: {t} after {last}"
                )));
            }
            let offset = start.hours_until(t) as usize;
            values.resize(offset, None);
            values.push(Some(v));
            last = t;
        }
        HourlySeries::new(start, values)
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    /// Last slot of the grid (inclusive). Equals `start` for an empty series.
    pub fn end(&self) -> Timestamp {
        self.start
            .add_hours(self.values.len().saturating_sub(1) as i64)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn get(&self, t: Timestamp) -> Option<f64> {
        let offset = self.start.hours_until(t);
        if offset < 0 {
            return None;
        }
        self.values.get(offset as usize).copied().flatten()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Timestamp, Option<f64>)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.start.add_hours(i as i64), *v))
    }

    /// Present samples only.
    pub fn observed(&self) -> impl Iterator<Item = (Timestamp, f64)> + '_ {
        self.iter().filter_map(|(t, v)| v.map(|v| (t, v)))
    }

    /// Sub-series covering `[from, to)`, clipped to the grid.
    pub fn slice(&self, from: Timestamp, to: Timestamp) -> HourlySeries {
        let lo = self.start.hours_until(from).clamp(0, self.len() as i64) as usize;
        let hi = self
            .start
            .hours_until(to)
            .clamp(lo as i64, self.len() as i64) as usize;
        HourlySeries {
            start: self.start.add_hours(lo as i64),
            values: self.values[lo..hi].to_vec(),
        }
    }
}

/// Calendar facts the feature builder needs: holidays, seasons and the civil time zone.
#[derive(Clone, Debug)]
pub struct CalendarConfig {
    holidays: BTreeSet<NaiveDate>,
    windchill_months: BTreeSet<u32>,
    heat_months: BTreeSet<u32>,
    timezone: Tz,
}

pub const DEFAULT_WINDCHILL_MONTHS: [u32; 6] = [11, 12, 1, 2, 3, 4];
pub const DEFAULT_HEAT_MONTHS: [u32; 6] = [5, 6, 7, 8, 9, 10];
pub const DEFAULT_TIMEZONE: Tz = chrono_tz::America::Regina;

impl Default for CalendarConfig {
    fn default() -> Self {
        CalendarConfig {
            holidays: BTreeSet::new(),
            windchill_months: DEFAULT_WINDCHILL_MONTHS.into_iter().collect(),
            heat_months: DEFAULT_HEAT_MONTHS.into_iter().collect(),
            timezone: DEFAULT_TIMEZONE,
        }
    }
}

impl CalendarConfig {
    pub fn new(
        holidays: impl IntoIterator<Item = NaiveDate>,
        windchill_months: impl IntoIterator<Item = u32>,
        heat_months: impl IntoIterator<Item = u32>,
        timezone: Tz,
    ) -> Result<Self> {
        let windchill_months: BTreeSet<u32> = windchill_months.into_iter().collect();
        let heat_months: BTreeSet<u32> = heat_months.into_iter().collect();
        if let Some(m) = windchill_months
            .iter()
            .chain(heat_months.iter())
            .find(|m| !(1..=12).contains(*m))
        {
            return Err(Error::InvalidValue(format!("month {m} out of range 1-12")));
        }
        if let Some(m) = windchill_months.intersection(&heat_months).next() {
            return Err(Error::InvalidValue(format!(
                "month {m} is in both the wind-chill and heat seasons"
            )));
        }
        Ok(CalendarConfig {
            holidays: holidays.into_iter().collect(),
            windchill_months,
            heat_months,
            timezone,
        })
    }

    pub fn with_holidays(mut self, holidays: impl IntoIterator<Item = NaiveDate>) -> Self {
        self.holidays.extend(holidays);
        self
    }

    pub fn holidays(&self) -> &BTreeSet<NaiveDate> {
        &self.holidays
    }

    pub fn windchill_months(&self) -> &BTreeSet<u32> {
        &self.windchill_months
    }

    pub fn heat_months(&self) -> &BTreeSet<u32> {
        &self.heat_months
    }

    pub fn timezone(&self) -> Tz {
        self.timezone
    }

    /// Length of the civil day in hours: 24, or 23/25 across a DST transition.
    pub fn civil_day_hours(&self, date: NaiveDate) -> i64 {
        let start = self.local_midnight(date);
        let end = date.succ_opt().and_then(|d| self.local_midnight(d));
        match (start, end) {
            (Some(s), Some(e)) => (e - s).num_hours(),
            // midnight itself skipped by a transition; never a regular day
            _ => 0,
        }
    }

    fn local_midnight(&self, date: NaiveDate) -> Option<chrono::DateTime<Tz>> {
        self.timezone
            .from_local_datetime(&date.and_hms_opt(0, 0, 0)?)
            .earliest()
    }
}

/// Calendar flags for one hour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CalendarFlags {
    /// Monday = 0.
    pub weekday: u8,
    pub weekend: bool,
    /// Month (1-12) of the statutory holiday containing this hour.
    pub holiday_month: Option<u8>,
    pub windchill_season: bool,
    pub heat_season: bool,
}

pub fn calendar_flags(t: Timestamp, cal: &CalendarConfig) -> CalendarFlags {
    let month = t.month();
    CalendarFlags {
        weekday: t.weekday(),
        weekend: t.is_weekend(),
        holiday_month: cal.holidays.contains(&t.date()).then_some(month as u8),
        windchill_season: cal.windchill_months.contains(&month),
        heat_season: cal.heat_months.contains(&month),
    }
}

/// One hour where load and every weather field are present.
#[derive(Clone, Debug, PartialEq)]
pub struct JoinedRow {
    pub timestamp: Timestamp,
    pub load_mw: f64,
    pub weather: WeatherRecord,
}

/// Output of [`align`]: complete rows plus the number of overlap hours dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct JoinedTable {
    pub rows: Vec<JoinedRow>,
    pub dropped: usize,
}

impl JoinedTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn load_series(&self) -> Result<HourlySeries> {
        HourlySeries::from_points(self.rows.iter().map(|r| (r.timestamp, r.load_mw)))
    }

    pub fn weather(&self) -> impl Iterator<Item = &WeatherRecord> {
        self.rows.iter().map(|r| &r.weather)
    }

    /// Rows with `from <= timestamp < to`.
    pub fn window(&self, from: Timestamp, to: Timestamp) -> &[JoinedRow] {
        let lo = self.rows.partition_point(|r| r.timestamp < from);
        let hi = self.rows.partition_point(|r| r.timestamp < to);
        &self.rows[lo..hi.max(lo)]
    }
}

/// Joins load with weather over their common hours.
///
/// Only hours inside the overlap of the two inputs are considered. An overlap
/// hour without load, without a weather observation, or with any weather field
/// missing is dropped and counted.
pub fn align(load: &HourlySeries, weather: &[WeatherObservation]) -> Result<JoinedTable> {
    let by_hour: BTreeMap<Timestamp, &WeatherObservation> =
        weather.iter().map(|w| (w.timestamp, w)).collect();
    let (Some(w_first), Some(w_last)) = (by_hour.keys().next(), by_hour.keys().next_back()) else {
        return Err(Error::NoCommonRange {
            left: "load",
            right: "weather",
        });
    };
    if load.is_empty() {
        return Err(Error::NoCommonRange {
            left: "load",
            right: "weather",
        });
    }
    let from = load.start().max(*w_first);
    let to = load.end().min(*w_last);
    if from > to {
        return Err(Error::NoCommonRange {
            left: "load",
            right: "weather",
        });
    }

    let mut rows = Vec::new();
    let mut dropped = 0;
    let mut t = from;
    while t <= to {
        let joined = load.get(t).and_then(|load_mw| {
            by_hour
                .get(&t)
                .and_then(|w| w.complete())
                .map(|weather| JoinedRow {
                    timestamp: t,
                    load_mw,
                    weather,
                })
        });
        match joined {
            Some(row) => rows.push(row),
            None => dropped += 1,
        }
        t = t.add_hours(1);
    }
    Ok(JoinedTable { rows, dropped })
}

/// Energy of one complete civil day (sum of 24 hourly MW values, MWh).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DailyEnergy {
    pub date: NaiveDate,
    pub energy_mwh: f64,
}

/// Days that passed the completeness rule, and those that did not.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DailyRollup {
    pub days: Vec<DailyEnergy>,
    pub excluded: Vec<NaiveDate>,
}

/// Sums each complete civil day of `series`.
///
/// A day is excluded (and listed) when any of its hours is missing or when the
/// configured zone makes it other than 24 hours long.
pub fn daily_rollup(series: &HourlySeries, cal: &CalendarConfig) -> DailyRollup {
    let mut by_day: BTreeMap<NaiveDate, (usize, f64)> = BTreeMap::new();
    let mut seen: BTreeSet<NaiveDate> = BTreeSet::new();
    for (t, v) in series.iter() {
        seen.insert(t.date());
        if let Some(v) = v {
            let entry = by_day.entry(t.date()).or_insert((0, 0.0));
            entry.0 += 1;
            entry.1 += v;
        }
    }
    let mut rollup = DailyRollup::default();
    for date in seen {
        match by_day.get(&date) {
            Some(&(24, energy)) if cal.civil_day_hours(date) == 24 => {
                rollup.days.push(DailyEnergy {
                    date,
                    energy_mwh: energy,
                });
            }
            _ => rollup.excluded.push(date),
        }
    }
    rollup
}

/// Actual and estimated energy of one civil day, with that day's temperature extremes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DailyAggregate {
    pub date: NaiveDate,
    pub energy_actual: f64,
    pub energy_estimated: f64,
    pub max_temp: Option<f64>,
    pub min_temp: Option<f64>,
}

/// Pairs the daily rollups of `actual` and `estimated`; only days complete in both survive.
pub fn daily_aggregates(
    actual: &HourlySeries,
    estimated: &HourlySeries,
    temperatures: &BTreeMap<NaiveDate, (f64, f64)>,
    cal: &CalendarConfig,
) -> Vec<DailyAggregate> {
    let est: BTreeMap<NaiveDate, f64> = daily_rollup(estimated, cal)
        .days
        .into_iter()
        .map(|d| (d.date, d.energy_mwh))
        .collect();
    daily_rollup(actual, cal)
        .days
        .into_iter()
        .filter_map(|d| {
            let e = *est.get(&d.date)?;
            let temps = temperatures.get(&d.date);
            Some(DailyAggregate {
                date: d.date,
                energy_actual: d.energy_mwh,
                energy_estimated: e,
                max_temp: temps.map(|t| t.0),
                min_temp: temps.map(|t| t.1),
            })
        })
        .collect()
}

/// Result of reading a load CSV.
#[derive(Clone, Debug)]
pub struct LoadFile {
    pub series: HourlySeries,
    /// Exact repeats of the previous timestamp (the second copy of a fall-back hour).
    pub duplicate_hours: usize,
}

pub(crate) fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader)
}

pub(crate) fn column_index(headers: &csv::StringRecord, name: &str, path: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::schema(path, 1, format!("missing column `{name}`")))
}

pub(crate) fn optional_column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

pub(crate) fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Parses an optional numeric cell; empty means missing.
pub(crate) fn parse_cell(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    path: &str,
) -> Result<Option<f64>> {
    let raw = record.get(idx).unwrap_or("");
    if raw.is_empty() {
        return Ok(None);
    }
    let v: f64 = raw.parse().map_err(|_| {
        Error::schema(
            path,
            record_line(record),
            format!("bad `{name}` value `{raw}`"),
        )
    })?;
    if !v.is_finite() {
        return Err(Error::schema(
            path,
            record_line(record),
            format!("non-finite `{name}` value"),
        ));
    }
    Ok(Some(v))
}

/// Reads a `timestamp,load_mw` CSV. Empty `load_mw` cells are explicit gaps.
pub fn read_load_csv<R: Read>(reader: R, path: &str) -> Result<LoadFile> {
    read_hourly_csv(reader, path, "load_mw")
}

/// Reads any `timestamp,<column>` hourly CSV (used for load and forecast files).
pub fn read_hourly_csv<R: Read>(reader: R, path: &str, column: &str) -> Result<LoadFile> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    let ts_idx = column_index(&headers, "timestamp", path)?;
    let val_idx = column_index(&headers, column, path)?;

    let mut points: Vec<(Timestamp, Option<f64>)> = Vec::new();
    let mut duplicate_hours = 0;
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let t = Timestamp::parse(record.get(ts_idx).unwrap_or(""))
            .map_err(|e| Error::schema(path, line, e.to_string()))?;
        let v = parse_cell(&record, val_idx, column, path)?;
        if let Some(&(last, _)) = points.last() {
            if t == last {
                duplicate_hours += 1;
                continue;
            }
            if t < last {
                return Err(Error::schema(
                    path,
                    line,
                    format!("timestamp {t} goes backwards (previous {last})"),
                ));
            }
        }
        points.push((t, v));
    }
    let Some(&(start, _)) = points.first() else {
        return Err(Error::schema(path, 1, "no data rows"));
    };
    let mut values = Vec::new();
    for (t, v) in points {
        values.resize(start.hours_until(t) as usize, None);
        values.push(v);
    }
    Ok(LoadFile {
        series: HourlySeries::new(start, values)?,
        duplicate_hours,
    })
}

pub fn read_load_file(path: &Path) -> Result<LoadFile> {
    let file = std::fs::File::open(path)?;
    read_load_csv(file, &path.display().to_string())
}

/// Writes `timestamp,<column>`; gaps are written as empty cells.
pub fn write_hourly_csv<W: Write>(writer: W, series: &HourlySeries, column: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["timestamp", column])?;
    for (t, v) in series.iter() {
        let cell = v.map(|v| v.to_string()).unwrap_or_default();
        wtr.write_record([t.to_string(), cell])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a holiday CSV with a `date` column of `YYYY-MM-DD`.
pub fn read_holidays_csv<R: Read>(reader: R, path: &str) -> Result<Vec<NaiveDate>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx = column_index(&headers, "date", path)?;
    let mut dates = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let raw = record.get(idx).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|_| {
            Error::schema(
                path,
                record_line(&record),
                format!("bad holiday date `{raw}`"),
            )
        })?;
        dates.push(date);
    }
    Ok(dates)
}

pub fn write_holidays_csv<W: Write>(writer: W, dates: &[NaiveDate]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["date"])?;
    for d in dates {
        wtr.write_record([d.format("%Y-%m-%d").to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
