//! The 345-wide hourly design row and the stacked design matrix.
//!
//! Column order follows the block listing below and is part of the model file
//! format; do not reorder.
//!
//! | block                         | width |
//! |-------------------------------|-------|
//! | weekday one-hot               | 7     |
//! | month one-hot                 | 12    |
//! | hour one-hot                  | 24    |
//! | weekday×hour one-hot          | 168   |
//! | weekend flag                  | 1     |
//! | holiday-month one-hot         | 12    |
//! | daily max temp × holiday      | 12    |
//! | daily min temp × holiday      | 12    |
//! | wind chill × hour × cold season | 24  |
//! | heat index × hour × hot season  | 24  |
//! | temp × hour                   | 24    |
//! | temp² × hour                  | 24    |
//! | intercept                     | 1     |
//!
//! Interaction blocks place the scalar in the column selected by the one-hot
//! factor and leave the other columns zero.

use std::io::Write;
use std::ops::Range;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{calendar_flags, CalendarConfig, JoinedRow, Timestamp};
use crate::weather::WeatherRecord;

pub const WIDTH: usize = 345;

/// Column ranges of each block.
pub mod block {
    use std::ops::Range;

    pub const WEEKDAY: Range<usize> = 0..7;
    pub const MONTH: Range<usize> = 7..19;
    pub const HOUR: Range<usize> = 19..43;
    pub const WEEKDAY_HOUR: Range<usize> = 43..211;
    pub const WEEKEND: usize = 211;
    pub const HOLIDAY: Range<usize> = 212..224;
    pub const TMAX_HOLIDAY: Range<usize> = 224..236;
    pub const TMIN_HOLIDAY: Range<usize> = 236..248;
    pub const WINDCHILL_HOUR: Range<usize> = 248..272;
    pub const HEATINDEX_HOUR: Range<usize> = 272..296;
    pub const TEMP_HOUR: Range<usize> = 296..320;
    pub const TEMP2_HOUR: Range<usize> = 320..344;
    pub const INTERCEPT: usize = 344;
}

const DAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

/// Named column index shared by every row of a matrix and stored with fitted models.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureLayout {
    names: Vec<String>,
}

impl FeatureLayout {
    /// The standard 345-column layout.
    pub fn standard() -> Arc<FeatureLayout> {
        static LAYOUT: OnceLock<Arc<FeatureLayout>> = OnceLock::new();
        LAYOUT
            .get_or_init(|| Arc::new(FeatureLayout::build()))
            .clone()
    }

    fn build() -> FeatureLayout {
        let mut names = Vec::with_capacity(WIDTH);
        names.extend(DAYS.iter().map(|d| format!("weekday[{d}]")));
        names.extend((1..=12).map(|m| format!("month[{m:02}]")));
        names.extend((0..24).map(|h| format!("hour[{h:02}]")));
        for d in DAYS {
            names.extend((0..24).map(|h| format!("weekday_hour[{d},{h:02}]")));
        }
        names.push("weekend".to_string());
        names.extend((1..=12).map(|m| format!("holiday[{m:02}]")));
        names.extend((1..=12).map(|m| format!("tmax_holiday[{m:02}]")));
        names.extend((1..=12).map(|m| format!("tmin_holiday[{m:02}]")));
        names.extend((0..24).map(|h| format!("windchill_hour[{h:02}]")));
        names.extend((0..24).map(|h| format!("heatindex_hour[{h:02}]")));
        names.extend((0..24).map(|h| format!("temp_hour[{h:02}]")));
        names.extend((0..24).map(|h| format!("temp2_hour[{h:02}]")));
        names.push("intercept".to_string());
        debug_assert_eq!(names.len(), WIDTH);
        FeatureLayout { names }
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// One design row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Arc<FeatureLayout>,
}

impl FeatureVector {
    pub fn block(&self, range: Range<usize>) -> &[f64] {
        &self.values[range]
    }
}

fn fill_row(row: &mut [f64], t: Timestamp, w: &WeatherRecord, cal: &CalendarConfig) {
    let flags = calendar_flags(t, cal);
    let hour = t.hour() as usize;
    let weekday = flags.weekday as usize;
    let temp = w.temp_c;

    row[block::WEEKDAY.start + weekday] = 1.0;
    row[block::MONTH.start + t.month() as usize - 1] = 1.0;
    row[block::HOUR.start + hour] = 1.0;
    row[block::WEEKDAY_HOUR.start + weekday * 24 + hour] = 1.0;
    row[block::WEEKEND] = if flags.weekend { 1.0 } else { 0.0 };
    if let Some(m) = flags.holiday_month {
        let m = m as usize - 1;
        row[block::HOLIDAY.start + m] = 1.0;
        row[block::TMAX_HOLIDAY.start + m] = w.daily_max_c;
        row[block::TMIN_HOLIDAY.start + m] = w.daily_min_c;
    }
    if flags.windchill_season {
        row[block::WINDCHILL_HOUR.start + hour] = w.wind_chill_c();
    }
    if flags.heat_season {
        row[block::HEATINDEX_HOUR.start + hour] = w.heat_index_c();
    }
    row[block::TEMP_HOUR.start + hour] = temp;
    row[block::TEMP2_HOUR.start + hour] = temp * temp;
    row[block::INTERCEPT] = 1.0;
}

/// Builds the design row for hour `t` from its weather record.
pub fn build_row(t: Timestamp, w: &WeatherRecord, cal: &CalendarConfig) -> Result<FeatureVector> {
    if w.timestamp != t {
        return Err(Error::InvalidValue(format!(
            "weather record {} does not match hour {t}",
            w.timestamp
        )));
    }
    let mut values = vec![0.0; WIDTH];
    fill_row(&mut values, t, w, cal);
    Ok(FeatureVector {
        values,
        layout: FeatureLayout::standard(),
    })
}

/// Stacked design rows (row-major) with their timestamps and optional targets.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    timestamps: Vec<Timestamp>,
    targets: Option<Vec<f64>>,
    layout: Arc<FeatureLayout>,
}

impl FeatureMatrix {
    /// Raw row-major construction in the standard layout.
    #[cfg(test)]
    pub(crate) fn from_parts(
        data: Vec<f64>,
        timestamps: Vec<Timestamp>,
        targets: Option<Vec<f64>>,
    ) -> Result<Self> {
        if data.len() != timestamps.len() * WIDTH
            || targets
                .as_ref()
                .is_some_and(|t| t.len() != timestamps.len())
        {
            return Err(Error::InvalidValue("inconsistent matrix dimensions".into()));
        }
        Ok(FeatureMatrix {
            data,
            timestamps,
            targets,
            layout: FeatureLayout::standard(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn ncols(&self) -> usize {
        self.layout.width()
    }

    pub fn layout(&self) -> &Arc<FeatureLayout> {
        &self.layout
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn targets(&self) -> Option<&[f64]> {
        self.targets.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.ncols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.ncols())
    }

    /// Rows `range` as a new matrix (targets carried along).
    pub fn select(&self, range: Range<usize>) -> FeatureMatrix {
        let w = self.ncols();
        FeatureMatrix {
            data: self.data[range.start * w..range.end * w].to_vec(),
            timestamps: self.timestamps[range.clone()].to_vec(),
            targets: self.targets.as_ref().map(|t| t[range].to_vec()),
            layout: self.layout.clone(),
        }
    }

    /// Replaces the targets; length must match the row count.
    pub fn with_targets(mut self, targets: Vec<f64>) -> Result<Self> {
        if targets.len() != self.nrows() {
            return Err(Error::InvalidValue(format!(
                "{} targets for {} rows",
                targets.len(),
                self.nrows()
            )));
        }
        self.targets = Some(targets);
        Ok(self)
    }

    /// Debug dump: `timestamp,<column names...>[,target]`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.layout.names().iter().cloned());
        if self.targets.is_some() {
            header.push("target".to_string());
        }
        wtr.write_record(&header)?;
        for (i, row) in self.rows().enumerate() {
            let mut rec = vec![self.timestamps[i].to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            if let Some(t) = &self.targets {
                rec.push(t[i].to_string());
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Builds the design matrix from joined rows, in timestamp order, with load as targets.
pub fn build_matrix(rows: &[JoinedRow], cal: &CalendarConfig) -> Result<FeatureMatrix> {
    if rows.is_empty() {
        return Err(Error::Empty("joined table"));
    }
    if rows.windows(2).any(|w| w[0].timestamp >= w[1].timestamp) {
        return Err(Error::InvalidValue(
            "joined rows not in strictly increasing timestamp order".into(),
        ));
    }
    let mut data = vec![0.0; rows.len() * WIDTH];
    data.par_chunks_exact_mut(WIDTH)
        .zip(rows.par_iter())
        .for_each(|(out, r)| fill_row(out, r.timestamp, &r.weather, cal));
    Ok(FeatureMatrix {
        data,
        timestamps: rows.iter().map(|r| r.timestamp).collect(),
        targets: Some(rows.iter().map(|r| r.load_mw).collect()),
        layout: FeatureLayout::standard(),
    })
}
