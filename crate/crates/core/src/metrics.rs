//! Error statistics between actual and estimated (or forecast) load.
//!
//! Sign convention throughout: `error_t = y_t − ŷ_t`, so a negative bias means
//! the model expected more load than was consumed.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::timeseries::{DailyAggregate, HourlySeries, Timestamp};

/// Default ratio a bias shift must exceed, relative to its noise scale, to be flagged.
pub const DEFAULT_GATE_K: f64 = 10.0;

/// Hours where both series have a value: `(t, actual, other)`.
pub fn paired(actual: &HourlySeries, other: &HourlySeries) -> Vec<(Timestamp, f64, f64)> {
    actual
        .observed()
        .filter_map(|(t, y)| other.get(t).map(|o| (t, y, o)))
        .collect()
}

/// Mean squared error with its variance and bias parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub label: String,
    pub n_hours: usize,
    pub mse: f64,
    /// Population variance of the error.
    pub var: f64,
    /// Mean error (signed).
    pub bias: f64,
    pub bias_sq: f64,
}

impl ScenarioReport {
    pub fn from_errors(label: impl Into<String>, errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::Empty("error series"));
        }
        let n = errors.len() as f64;
        let bias = errors.iter().sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - bias).powi(2)).sum::<f64>() / n;
        let mse = errors.iter().map(|e| e * e).sum::<f64>() / n;
        Ok(ScenarioReport {
            label: label.into(),
            n_hours: errors.len(),
            mse,
            var,
            bias,
            bias_sq: bias * bias,
        })
    }

    /// A report from published summary values (no error series).
    pub fn from_summary(label: impl Into<String>, n_hours: usize, var: f64, bias: f64) -> Self {
        ScenarioReport {
            label: label.into(),
            n_hours,
            mse: var + bias * bias,
            var,
            bias,
            bias_sq: bias * bias,
        }
    }
}

pub fn scenario_report(
    actual: &HourlySeries,
    estimated: &HourlySeries,
    label: impl Into<String>,
) -> Result<ScenarioReport> {
    let errors: Vec<f64> = paired(actual, estimated)
        .into_iter()
        .map(|(_, y, yh)| y - yh)
        .collect();
    if errors.is_empty() {
        return Err(Error::Empty("aligned actual/estimated hours"));
    }
    ScenarioReport::from_errors(label, &errors)
}

/// Bias shift between two scenarios against the larger standard error of the mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyGateResult {
    pub reference: String,
    pub test: String,
    /// |bias_ref − bias_test|, MW
    pub lhs: f64,
    /// max(√(var_ref/n_ref), √(var_test/n_test)), MW
    pub rhs: f64,
    /// lhs / rhs; `None` when rhs is zero.
    pub ratio: Option<f64>,
    pub k: f64,
    pub flagged: bool,
}

pub fn anomaly_gate(
    reference: &ScenarioReport,
    test: &ScenarioReport,
    k: f64,
) -> Result<AnomalyGateResult> {
    if reference.n_hours == 0 || test.n_hours == 0 {
        return Err(Error::Empty("scenario report"));
    }
    let lhs = (reference.bias - test.bias).abs();
    let sem = |r: &ScenarioReport| (r.var / r.n_hours as f64).sqrt();
    let rhs = sem(reference).max(sem(test));
    Ok(AnomalyGateResult {
        reference: reference.label.clone(),
        test: test.label.clone(),
        lhs,
        rhs,
        ratio: (rhs > 0.0).then(|| lhs / rhs),
        k,
        flagged: lhs > 0.0 && lhs >= k * rhs,
    })
}

/// Energy variation index: percent of the estimated daily energy not consumed.
pub fn evi(day: &DailyAggregate) -> Result<f64> {
    if day.energy_estimated <= 0.0 {
        return Err(Error::InvalidValue(format!(
            "estimated energy {} MWh on {} is not positive",
            day.energy_estimated, day.date
        )));
    }
    Ok((day.energy_estimated - day.energy_actual) / day.energy_estimated * 100.0)
}

/// Running sum of (ŷ − y) over the paired hours, in GWh.
pub fn accumulated_difference(
    actual: &HourlySeries,
    estimated: &HourlySeries,
) -> Vec<(Timestamp, f64)> {
    let mut total_mwh = 0.0;
    paired(actual, estimated)
        .into_iter()
        .map(|(t, y, yh)| {
            total_mwh += yh - y;
            (t, total_mwh / 1000.0)
        })
        .collect()
}

/// Σ_d EVI_d/100 · estimated energy_d, in GWh; equals the final accumulated
/// difference when every hour belongs to one of `days`.
pub fn evi_weighted_difference(days: &[DailyAggregate]) -> Result<f64> {
    let mut total = 0.0;
    for d in days {
        total += evi(d)? / 100.0 * d.energy_estimated;
    }
    Ok(total / 1000.0)
}

/// Quantile by linear interpolation between order statistics of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Box-and-whisker summary; whiskers are the extremes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<FiveNumber> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(FiveNumber {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

/// A month/day range applied to every year, both ends inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonalWindow {
    pub start: (u32, u32),
    pub end: (u32, u32),
}

impl SeasonalWindow {
    pub fn contains(&self, date: NaiveDate) -> bool {
        let md = (date.month(), date.day());
        if self.start <= self.end {
            self.start <= md && md <= self.end
        } else {
            md >= self.start || md <= self.end
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayRamp {
    pub date: NaiveDate,
    /// Largest hour-over-hour increase, MW/h (0 if none).
    pub ramp_up: f64,
    /// Largest hour-over-hour decrease as a magnitude, MW/h (0 if none).
    pub ramp_down: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearRamps {
    pub year: i32,
    pub days: Vec<DayRamp>,
    pub ramp_up: FiveNumber,
    pub ramp_down: FiveNumber,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampStats {
    pub years: Vec<YearRamps>,
    /// Days in the window skipped for missing hours.
    pub excluded_days: usize,
}

/// Daily max ramp-up/down from 24 consecutive hourly values.
pub fn day_ramp(date: NaiveDate, hours: &[f64]) -> DayRamp {
    let (up, down) = hours.windows(2).fold((0.0f64, 0.0f64), |(up, down), w| {
        let d = w[1] - w[0];
        (up.max(d), down.max(-d))
    });
    DayRamp {
        date,
        ramp_up: up,
        ramp_down: down,
    }
}

/// Per-year daily ramp statistics for the days of `series` inside `window`.
pub fn ramp_stats(series: &HourlySeries, window: SeasonalWindow) -> RampStats {
    let mut by_day: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    for (t, v) in series.iter() {
        if window.contains(t.date()) {
            let slots = by_day.entry(t.date()).or_insert_with(|| vec![None; 24]);
            slots[t.hour() as usize] = v;
        }
    }
    let mut excluded_days = 0;
    let mut by_year: BTreeMap<i32, Vec<DayRamp>> = BTreeMap::new();
    for (date, slots) in by_day {
        match slots.into_iter().collect::<Option<Vec<f64>>>() {
            Some(hours) => by_year
                .entry(date.year())
                .or_default()
                .push(day_ramp(date, &hours)),
            None => excluded_days += 1,
        }
    }
    let years = by_year
        .into_iter()
        .map(|(year, days)| {
            let ups: Vec<f64> = days.iter().map(|d| d.ramp_up).collect();
            let downs: Vec<f64> = days.iter().map(|d| d.ramp_down).collect();
            YearRamps {
                year,
                ramp_up: FiveNumber::of(&ups).expect("nonempty year"),
                ramp_down: FiveNumber::of(&downs).expect("nonempty year"),
                days,
            }
        })
        .collect();
    RampStats {
        years,
        excluded_days,
    }
}

/// Mean absolute error and mean absolute percentage error of a forecast.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastScore {
    pub n: usize,
    pub mae: f64,
    /// `None` when some actual value is zero (MAPE undefined).
    pub mape: Option<f64>,
}

impl ForecastScore {
    pub fn mape_pct(&self) -> Result<f64> {
        self.mape
            .ok_or_else(|| Error::MapeUndefined("one or more hours".into()))
    }
}

/// MAE (MW) and MAPE (%) over the hours where both series are present.
pub fn mae_mape(actual: &HourlySeries, forecast: &HourlySeries) -> Result<ForecastScore> {
    let pairs = paired(actual, forecast);
    score_pairs(pairs.iter().map(|(_, y, f)| (*y, *f)))
}

pub(crate) fn score_pairs(pairs: impl Iterator<Item = (f64, f64)>) -> Result<ForecastScore> {
    let mut n = 0usize;
    let mut abs = 0.0;
    let mut pct = 0.0;
    let mut mape_defined = true;
    for (y, f) in pairs {
        n += 1;
        abs += (y - f).abs();
        if y == 0.0 {
            mape_defined = false;
        } else {
            pct += (y - f).abs() / y;
        }
    }
    if n == 0 {
        return Err(Error::Empty("aligned actual/forecast hours"));
    }
    Ok(ForecastScore {
        n,
        mae: abs / n as f64,
        mape: mape_defined.then(|| pct / n as f64 * 100.0),
    })
}

/// Relative change of `test` against `baseline`, in percent.
pub fn relative_change(baseline: f64, test: f64) -> f64 {
    (test - baseline) / baseline * 100.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub n: usize,
    pub r: f64,
    /// t = r·√((n−2)/(1−r²))
    pub t: f64,
    /// Two-sided p-value from Student's t with n−2 degrees of freedom.
    pub p_value: f64,
}

/// Sample Pearson correlation with a two-sided t-test p-value.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::InvalidValue(format!(
            "sequence lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidValue(format!(
            "need at least 3 pairs for a correlation test, got {n}"
        )));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y"));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let (t, p_value) = if r.abs() >= 1.0 {
        (f64::INFINITY.copysign(r), 0.0)
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (t, 2.0 * (1.0 - dist.cdf(t.abs())))
    };
    Ok(Correlation { n, r, t, p_value })
}

/// r and p for a given r and n, without data (for checking reported values).
pub fn pearson_significance(r: f64, n: usize) -> Result<(f64, f64)> {
    if n < 3 || !(-1.0..=1.0).contains(&r) {
        return Err(Error::InvalidValue(format!("r = {r}, n = {n}")));
    }
    let df = (n - 2) as f64;
    if r.abs() == 1.0 {
        return Ok((f64::INFINITY.copysign(r), 0.0));
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    Ok((t, 2.0 * (1.0 - dist.cdf(t.abs()))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn series(start: &str, values: &[f64]) -> HourlySeries {
        HourlySeries::new(
            Timestamp::parse(start).unwrap(),
            values.iter().copied().map(Some).collect(),
        )
        .unwrap()
    }

    fn day(actual: f64, estimated: f64) -> DailyAggregate {
        DailyAggregate {
            date: NaiveDate::from_ymd_opt(2020, 5, 1).unwrap(),
            energy_actual: actual,
            energy_estimated: estimated,
            max_temp: None,
            min_temp: None,
        }
    }

    #[test]
    fn symmetric_errors() {
        let r = ScenarioReport::from_errors("s", &[1.0, -1.0]).unwrap();
        assert_eq!((r.bias, r.var, r.mse), (0.0, 1.0, 1.0));
    }

    #[test]
    fn pure_bias() {
        let r = ScenarioReport::from_errors("s", &[5.0; 100]).unwrap();
        assert_eq!((r.bias, r.var, r.mse), (5.0, 0.0, 25.0));
    }

    #[test]
    fn table_one_scenario_three_decomposes() {
        // Var + Bias² from the published row, against the published MSE (3 s.f.)
        let r = ScenarioReport::from_summary("III", 4008, 1.53e4, -127.28);
        assert_abs_diff_eq!(r.var + r.bias_sq, 15_300.0 + 16_200.1984, epsilon = 1e-6);
        assert_abs_diff_eq!(r.mse, 3.15e4, epsilon = 0.005e4);
    }

    #[test]
    fn scenario_report_uses_paired_hours() {
        let a = series("2020-01-01T00:00", &[10.0, 12.0, 14.0]);
        let mut e = vec![Some(9.0), None, Some(15.0)];
        e.push(Some(1.0));
        let e = HourlySeries::new(Timestamp::parse("2020-01-01T00:00").unwrap(), e).unwrap();
        let r = scenario_report(&a, &e, "x").unwrap();
        assert_eq!(r.n_hours, 2);
        assert_eq!(r.bias, 0.0);
        let empty = series("2021-01-01T00:00", &[1.0]);
        assert!(scenario_report(&a, &empty, "x").is_err());
    }

    #[test]
    fn gate_reproduces_published_ratios() {
        // hours from the scenario date ranges
        let n1 = (NaiveDate::from_ymd_opt(2020, 3, 18).unwrap()
            - NaiveDate::from_ymd_opt(2017, 3, 1).unwrap())
        .num_days() as usize
            * 24;
        let n3 = (NaiveDate::from_ymd_opt(2020, 9, 1).unwrap()
            - NaiveDate::from_ymd_opt(2020, 3, 18).unwrap())
        .num_days() as usize
            * 24;
        assert_eq!((n1, n3), (26_712, 4008));
        let s1 = ScenarioReport::from_summary("I", n1, 1.26e4, -13.04);
        let s2 = ScenarioReport::from_summary("II", n3, 0.85e4, 16.60);
        let s3 = ScenarioReport::from_summary("III", n3, 1.53e4, -127.28);
        let g = anomaly_gate(&s1, &s3, 10.0).unwrap();
        assert_abs_diff_eq!(g.lhs, 114.24, epsilon = 1e-9);
        assert_abs_diff_eq!(g.rhs, 1.95, epsilon = 0.01);
        assert!(g.flagged);
        let g = anomaly_gate(&s2, &s3, 10.0).unwrap();
        assert_abs_diff_eq!(g.lhs, 143.88, epsilon = 1e-9);
        assert_abs_diff_eq!(g.rhs, 1.95, epsilon = 0.01);
        assert!(g.flagged);
    }

    #[test]
    fn gate_self_comparison() {
        let s = ScenarioReport::from_summary("a", 100, 4.0, -3.0);
        let g = anomaly_gate(&s, &s, 10.0).unwrap();
        assert_eq!(g.lhs, 0.0);
        assert!(!g.flagged);
        let flat = ScenarioReport::from_summary("b", 100, 0.0, 0.0);
        assert!(!anomaly_gate(&flat, &flat, 10.0).unwrap().flagged);
        assert!(anomaly_gate(&ScenarioReport::from_summary("z", 0, 1.0, 0.0), &s, 1.0).is_err());
    }

    #[test]
    fn gate_symmetry() {
        let a = ScenarioReport::from_summary("a", 300, 40.0, 5.0);
        let b = ScenarioReport::from_summary("b", 900, 90.0, -2.0);
        let ab = anomaly_gate(&a, &b, 10.0).unwrap();
        let ba = anomaly_gate(&b, &a, 10.0).unwrap();
        assert_eq!(ab.lhs, ba.lhs);
        assert_eq!(ab.rhs, ba.rhs);
    }

    #[test]
    fn evi_cases() {
        assert_eq!(evi(&day(2400.0, 2400.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            evi(&day(0.9 * 2400.0, 2400.0)).unwrap(),
            10.0,
            epsilon = 1e-12
        );
        // (2400 − 2280) / 2400 × 100
        assert_abs_diff_eq!(evi(&day(2280.0, 2400.0)).unwrap(), 5.0, epsilon = 1e-12);
        assert!(evi(&day(10.0, 0.0)).is_err());
    }

    #[test]
    fn accumulated_identity_and_shortfall() {
        let y = series("2020-04-01T00:00", &[100.0; 720]);
        let flat = accumulated_difference(&y, &y);
        assert!(flat.iter().all(|(_, v)| *v == 0.0));
        let est = series("2020-04-01T00:00", &[200.0; 720]);
        let acc = accumulated_difference(&y, &est);
        // 100 MW × 720 h / 1000
        assert_abs_diff_eq!(acc.last().unwrap().1, 72.0, epsilon = 1e-9);
    }

    #[test]
    fn ramps() {
        let w = SeasonalWindow {
            start: (1, 1),
            end: (12, 31),
        };
        let up: Vec<f64> = (0..24).map(|h| 1000.0 + 10.0 * h as f64).collect();
        let r = ramp_stats(&series("2020-03-18T00:00", &up), w);
        assert_eq!(r.years[0].days[0].ramp_up, 10.0);
        assert_eq!(r.years[0].days[0].ramp_down, 0.0);

        let r = ramp_stats(&series("2020-03-18T00:00", &[500.0; 24]), w);
        assert_eq!(
            (r.years[0].days[0].ramp_up, r.years[0].days[0].ramp_down),
            (0.0, 0.0)
        );

        let mut shaped = vec![100.0, 150.0, 120.0, 180.0];
        shaped.resize(24, 180.0);
        // brute force over consecutive differences
        let diffs: Vec<f64> = shaped.windows(2).map(|w| w[1] - w[0]).collect();
        let up = diffs.iter().cloned().fold(0.0, f64::max);
        let down = diffs.iter().map(|d| -d).fold(0.0, f64::max);
        assert_eq!((up, down), (60.0, 30.0));
        let r = ramp_stats(&series("2020-03-18T00:00", &shaped), w);
        assert_eq!(
            (r.years[0].days[0].ramp_up, r.years[0].days[0].ramp_down),
            (up, down)
        );
    }

    #[test]
    fn ramps_window_and_missing_hours() {
        let w = SeasonalWindow {
            start: (3, 18),
            end: (7, 15),
        };
        let mut values: Vec<Option<f64>> = (0..24 * 4).map(|h| Some(h as f64)).collect();
        values[24 * 2 + 5] = None;
        let s = HourlySeries::new(Timestamp::parse("2020-03-16T00:00").unwrap(), values).unwrap();
        let r = ramp_stats(&s, w);
        // 16th and 17th outside; 18th missing an hour; 19th kept
        assert_eq!(r.excluded_days, 1);
        assert_eq!(r.years[0].days.len(), 1);
        assert_eq!(
            r.years[0].days[0].date,
            NaiveDate::from_ymd_opt(2020, 3, 19).unwrap()
        );
    }

    #[test]
    fn five_number_linear_interpolation() {
        let f = FiveNumber::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(f.min, 1.0);
        assert_eq!(f.q1, 1.75);
        assert_eq!(f.median, 2.5);
        assert_eq!(f.q3, 3.25);
        assert_eq!(f.max, 4.0);
    }

    #[test]
    fn forecast_scores() {
        let y = series("2020-01-01T00:00", &[100.0; 10]);
        let s = mae_mape(&y, &y).unwrap();
        assert_eq!((s.mae, s.mape), (0.0, Some(0.0)));
        let f = series("2020-01-01T00:00", &[102.0; 10]);
        let s = mae_mape(&y, &f).unwrap();
        assert_abs_diff_eq!(s.mae, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.mape.unwrap(), 2.0, epsilon = 1e-12);

        let z = series("2020-01-01T00:00", &[0.0, 100.0]);
        let s = mae_mape(&z, &series("2020-01-01T00:00", &[1.0, 101.0])).unwrap();
        assert_eq!(s.mae, 1.0);
        assert!(matches!(s.mape_pct(), Err(Error::MapeUndefined(_))));
    }

    #[test]
    fn table_two_march_relative_mae() {
        assert_abs_diff_eq!(relative_change(47.52, 80.23), 68.83, epsilon = 0.005);
    }

    #[test]
    fn pearson_perfect_and_orthogonal() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let c = pearson(&x, &y).unwrap();
        assert_abs_diff_eq!(c.r, 1.0, epsilon = 1e-12);
        assert_eq!(c.p_value, 0.0);

        let a = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let b = [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let c = pearson(&a, &b).unwrap();
        assert_eq!(c.r, 0.0);
        assert_abs_diff_eq!(c.p_value, 1.0, epsilon = 1e-12);

        assert!(matches!(
            pearson(&[1.0; 5], &x[..5]),
            Err(Error::ZeroVariance(_))
        ));
        assert!(pearson(&x[..2], &y[..2]).is_err());
    }

    /// Two-sided tail of Student's t by Simpson quadrature of the density.
    fn t_two_sided_tail(t: f64, df: f64) -> f64 {
        fn ln_gamma(x: f64) -> f64 {
            // Lanczos, g = 7
            const C: [f64; 9] = [
                0.999_999_999_999_809_9,
                676.520_368_121_885_1,
                -1_259.139_216_722_402_8,
                771.323_428_777_653_1,
                -176.615_029_162_140_6,
                12.507_343_278_686_905,
                -0.138_571_095_265_720_12,
                9.984_369_578_019_572e-6,
                1.505_632_735_149_311_6e-7,
            ];
            let x = x - 1.0;
            let mut a = C[0];
            let tt = x + 7.5;
            for (i, c) in C.iter().enumerate().skip(1) {
                a += c / (x + i as f64);
            }
            0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * tt.ln() - tt + a.ln()
        }
        let norm = (ln_gamma((df + 1.0) / 2.0)
            - ln_gamma(df / 2.0)
            - 0.5 * (df * std::f64::consts::PI).ln())
        .exp();
        let pdf = |x: f64| norm * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
        // ∫_0^t pdf, then tail = 1 − 2·that
        let steps = 20_000;
        let h = t / steps as f64;
        let mut s = pdf(0.0) + pdf(t);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(i as f64 * h);
        }
        1.0 - 2.0 * s * h / 3.0
    }

    #[test]
    fn pearson_significance_matches_quadrature() {
        let (t, p) = pearson_significance(0.63, 31).unwrap();
        assert_abs_diff_eq!(t, 4.37, epsilon = 0.005);
        let oracle = t_two_sided_tail(t, 29.0);
        assert_abs_diff_eq!(p, oracle, epsilon = 1e-8);
        // r = 0.63 at n = 31 sits just above 1e-4 (≈1.46e-4)
        assert_abs_diff_eq!(p, 1.4589e-4, epsilon = 2e-8);
        assert!(p < 2e-4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mse_decomposition(errors in prop::collection::vec(-1e4f64..1e4, 2..500)) {
                let r = ScenarioReport::from_errors("p", &errors).unwrap();
                prop_assert!((r.mse - (r.var + r.bias_sq)).abs() <= 1e-9 * r.mse.max(1e-300));
            }

            #[test]
            fn evi_scale_invariant(a in 1.0f64..1e5, e in 1.0f64..1e5, c in 1e-3f64..1e3) {
                let d1 = day(a, e);
                let d2 = day(a * c, e * c);
                prop_assert!((evi(&d1).unwrap() - evi(&d2).unwrap()).abs() < 1e-9 * (1.0 + evi(&d1).unwrap().abs()));
            }

            #[test]
            fn evi_matches_accumulated_difference(
                n_days in 1usize..20,
                base in prop::collection::vec(500.0f64..3000.0, 24 * 20),
                cut in prop::collection::vec(-0.2f64..0.3, 24 * 20),
            ) {
                let n = n_days * 24;
                let start = Timestamp::parse("2020-03-02T00:00").unwrap();
                let est = HourlySeries::new(start, base[..n].iter().map(|v| Some(*v)).collect()).unwrap();
                let act = HourlySeries::new(
                    start,
                    base[..n].iter().zip(&cut).map(|(v, c)| Some(v * (1.0 - c))).collect(),
                ).unwrap();
                let cal = crate::timeseries::CalendarConfig::default();
                let days = crate::timeseries::daily_aggregates(&act, &est, &BTreeMap::new(), &cal);
                prop_assert_eq!(days.len(), n_days);
                let acc = accumulated_difference(&act, &est).last().unwrap().1;
                let weighted = evi_weighted_difference(&days).unwrap();
                prop_assert!((acc - weighted).abs() <= 1e-9 * acc.abs().max(1e-3));
            }

            #[test]
            fn mape_nonnegative_and_zero_iff_exact(
                ys in prop::collection::vec(1.0f64..5000.0, 1..100),
                off in prop::collection::vec(-50.0f64..50.0, 100),
                exact in any::<bool>(),
            ) {
                let fs: Vec<f64> = ys.iter().zip(&off).map(|(y, o)| if exact { *y } else { y + o }).collect();
                let s = score_pairs(ys.iter().copied().zip(fs.iter().copied())).unwrap();
                let mape = s.mape.unwrap();
                prop_assert!(mape >= 0.0);
                prop_assert_eq!(mape == 0.0, s.mae == 0.0);
            }
        }
    }
}
