use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{Datelike, Days, Months, NaiveDate};
use log::{info, warn};
use serde::Serialize;

use super::config::{RunConfig, ScenarioWindow};
use super::Output;
use crate::control::{
    cps1_by_month, cps1_relative, read_telemetry_file, to_minutes, write_telemetry_csv, Cps1Report,
    TelemetrySample,
};
use crate::error::{Error, Result};
use crate::estimator::{rolling_estimate, RollingEstimate, SolveMethod, ValidityInterval};
use crate::metrics::{
    accumulated_difference, anomaly_gate, evi, pearson, ramp_stats, relative_change,
    scenario_report, score_pairs, AnomalyGateResult, Correlation, ForecastScore, RampStats,
    ScenarioReport,
};
use crate::synth::{
    fixed_holidays, generate, generate_telemetry, synthetic_forecast, PlantedModel, ScenarioSpec,
    TelemetryBlock, TelemetrySpec,
};
use crate::timeseries::{
    align, daily_aggregates, read_holidays_csv, read_hourly_csv, read_load_file,
    write_holidays_csv, write_hourly_csv, CalendarConfig, HourlySeries, JoinedTable, Timestamp,
};
use crate::weather::{
    daily_temperatures, read_weather_file, write_weather_csv, WeatherObservation,
};

fn required<'a>(path: &'a Option<std::path::PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("`{key}` is required for this command")))
}

fn read_holidays(cfg: &RunConfig) -> Result<Vec<NaiveDate>> {
    match &cfg.holiday_csv {
        None => Ok(Vec::new()),
        Some(p) => read_holidays_csv(std::fs::File::open(p)?, &p.display().to_string()),
    }
}

struct Inputs {
    load: HourlySeries,
    duplicate_hours: usize,
    table: JoinedTable,
    cal: CalendarConfig,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let load_file = read_load_file(required(&cfg.load_csv, "load_csv")?)?;
    let weather = read_weather_file(required(&cfg.weather_csv, "weather_csv")?)?;
    let cal = cfg.calendar(read_holidays(cfg)?)?;
    let table = align(&load_file.series, &weather)?;
    if load_file.duplicate_hours > 0 {
        warn!("skipped {} repeated load hours", load_file.duplicate_hours);
    }
    if table.dropped > 0 {
        warn!(
            "dropped {} hours without complete load and weather",
            table.dropped
        );
    }
    Ok(Inputs {
        load: load_file.series,
        duplicate_hours: load_file.duplicate_hours,
        table,
        cal,
    })
}

fn fit_all(cfg: &RunConfig, inputs: &Inputs) -> Result<RollingEstimate> {
    let rolling = rolling_estimate(&inputs.table, &inputs.cal, &cfg.schedule, &cfg.fit)?;
    for m in &rolling.models {
        if m.model.train_end >= m.interval.valid_from {
            return Err(Error::Data(format!(
                "model {} trained on hours inside its own validity interval",
                m.interval.id
            )));
        }
    }
    if rolling.extrapolated_hours > 0 {
        warn!(
            "{} estimated hours used a trend carried from an earlier year",
            rolling.extrapolated_hours
        );
    }
    Ok(rolling)
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Serialize)]
struct ModelDoc<'a> {
    interval: &'a ValidityInterval,
    model: &'a crate::estimator::FittedModel,
}

#[derive(Serialize)]
struct ModelSummary {
    id: usize,
    file: String,
    train_from: Timestamp,
    train_end: Timestamp,
    valid_from: Timestamp,
    valid_to: Timestamp,
    n_train: usize,
    solve_method: SolveMethod,
    ridge_lambda: f64,
    residual_mean: f64,
    residual_std: f64,
    trend_by_year: BTreeMap<i32, f64>,
}

#[derive(Serialize)]
struct FitSummary {
    load_hours: usize,
    duplicate_hours: usize,
    joined_hours: usize,
    dropped_hours: usize,
    estimated_hours: usize,
    extrapolated_hours: usize,
    models: Vec<ModelSummary>,
}

pub fn fit(cfg: &RunConfig, out: &Output) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let rolling = fit_all(cfg, &inputs)?;
    let mut models = Vec::new();
    for m in &rolling.models {
        let file = format!("models/model_{:03}.json", m.interval.id);
        out.json(
            &file,
            &ModelDoc {
                interval: &m.interval,
                model: &m.model,
            },
        )?;
        models.push(ModelSummary {
            id: m.interval.id,
            file,
            train_from: m.interval.train_from,
            train_end: m.model.train_end,
            valid_from: m.interval.valid_from,
            valid_to: m.interval.valid_to,
            n_train: m.model.n_train,
            solve_method: m.model.solve_method,
            ridge_lambda: m.model.ridge_lambda,
            residual_mean: m.model.residual_mean,
            residual_std: m.model.residual_std,
            trend_by_year: m.model.trend_by_year.clone(),
        });
    }
    let summary = FitSummary {
        load_hours: inputs.load.len() - inputs.load.missing_count(),
        duplicate_hours: inputs.duplicate_hours,
        joined_hours: inputs.table.len(),
        dropped_hours: inputs.table.dropped,
        estimated_hours: rolling.estimate.len() - rolling.estimate.missing_count(),
        extrapolated_hours: rolling.extrapolated_hours,
        models,
    };
    out.json("fit_summary.json", &summary)?;

    let mut w = out.csv("fit_summary.csv")?;
    w.write_record([
        "id",
        "train_from",
        "train_end",
        "valid_from",
        "valid_to",
        "n_train",
        "solve_method",
        "ridge_lambda",
        "residual_mean",
        "residual_std",
    ])?;
    for m in &summary.models {
        w.write_record([
            m.id.to_string(),
            m.train_from.to_string(),
            m.train_end.to_string(),
            m.valid_from.to_string(),
            m.valid_to.to_string(),
            m.n_train.to_string(),
            format!("{:?}", m.solve_method).to_lowercase(),
            num(m.ridge_lambda),
            num(m.residual_mean),
            num(m.residual_std),
        ])?;
    }
    w.flush()?;

    let mut w = out.csv("estimate.csv")?;
    w.write_record(["timestamp", "actual_mw", "estimated_mw", "model_id"])?;
    for ((t, e), id) in rolling.estimate.iter().zip(&rolling.model_ids) {
        w.write_record([
            t.to_string(),
            opt(inputs.load.get(t)),
            opt(e),
            id.map(|i| i.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    println!(
        "fitted {} models; estimates {} .. {}",
        summary.models.len(),
        rolling.estimate.start(),
        rolling.estimate.end()
    );
    info!("wrote fit outputs to {}", out.dir().display());
    Ok(())
}

#[derive(Serialize)]
struct ScenarioOutput {
    label: String,
    from: NaiveDate,
    to: NaiveDate,
    note: String,
    report: ScenarioReport,
    days: usize,
    accumulated_difference_gwh: f64,
    evi_max_temp_correlation: Option<Correlation>,
    daily_csv: String,
    hourly_csv: String,
}

#[derive(Serialize)]
struct ReportDoc {
    estimable_from: Timestamp,
    estimable_to: Timestamp,
    scenarios: Vec<ScenarioOutput>,
    gates: Vec<AnomalyGateResult>,
    ramps: RampStats,
}

fn check_window(s: &ScenarioWindow, est: &HourlySeries) -> Result<(Timestamp, Timestamp)> {
    let (from, to) = (Timestamp::midnight(s.from), Timestamp::midnight(s.to));
    let end = est.end().add_hours(1);
    if from < est.start() || to > end {
        return Err(Error::Data(format!(
            "scenario `{}` [{}, {}) lies outside the estimable range [{}, {})",
            s.label,
            s.from,
            s.to,
            est.start(),
            end
        )));
    }
    Ok((from, to))
}

pub fn report(cfg: &RunConfig, out: &Output) -> Result<()> {
    if cfg.scenarios.is_empty() {
        return Err(Error::Config(
            "`report` needs at least one `scenario`".into(),
        ));
    }
    let inputs = load_inputs(cfg)?;
    let rolling = fit_all(cfg, &inputs)?;
    let est = &rolling.estimate;
    let temps = daily_temperatures(inputs.table.weather());

    let mut scenarios = Vec::new();
    for s in &cfg.scenarios {
        let (from, to) = check_window(s, est)?;
        let actual = inputs.load.slice(from, to);
        let estimated = est.slice(from, to);
        let report = scenario_report(&actual, &estimated, s.label.clone())?;
        let days = daily_aggregates(&actual, &estimated, &temps, &inputs.cal);
        let acc = accumulated_difference(&actual, &estimated);
        let day_end: BTreeMap<NaiveDate, f64> = acc.iter().map(|(t, v)| (t.date(), *v)).collect();

        let mut evis = Vec::with_capacity(days.len());
        for d in &days {
            evis.push(evi(d)?);
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = days
            .iter()
            .zip(&evis)
            .filter_map(|(d, e)| d.max_temp.map(|t| (*e, t)))
            .unzip();
        let correlation = match pearson(&xs, &ys) {
            Ok(c) => Some(c),
            Err(e) => {
                warn!(
                    "scenario `{}`: no EVI/temperature correlation ({e})",
                    s.label
                );
                None
            }
        };

        let daily_csv = format!("scenario_{}_daily.csv", s.label);
        let mut w = out.csv(&daily_csv)?;
        w.write_record([
            "date",
            "actual_mwh",
            "estimated_mwh",
            "evi_pct",
            "cumulative_gwh",
            "max_temp_c",
            "min_temp_c",
        ])?;
        for (d, e) in days.iter().zip(&evis) {
            w.write_record([
                d.date.to_string(),
                num(d.energy_actual),
                num(d.energy_estimated),
                num(*e),
                opt(day_end.get(&d.date).copied()),
                opt(d.max_temp),
                opt(d.min_temp),
            ])?;
        }
        w.flush()?;

        let hourly_csv = format!("scenario_{}_hourly.csv", s.label);
        let mut w = out.csv(&hourly_csv)?;
        w.write_record(["timestamp", "actual_mw", "estimated_mw", "cumulative_gwh"])?;
        let mut cum = acc.iter().peekable();
        for (t, e) in estimated.iter() {
            let c = match cum.peek() {
                Some((ct, v)) if *ct == t => {
                    let v = *v;
                    cum.next();
                    Some(v)
                }
                _ => None,
            };
            w.write_record([t.to_string(), opt(actual.get(t)), opt(e), opt(c)])?;
        }
        w.flush()?;

        println!(
            "scenario {}: n={} mse={:.6} var={:.6} bias={:.6} bias^2={:.6}",
            s.label, report.n_hours, report.mse, report.var, report.bias, report.bias_sq
        );
        scenarios.push(ScenarioOutput {
            label: s.label.clone(),
            from: s.from,
            to: s.to,
            note: s.note.clone(),
            report,
            days: days.len(),
            accumulated_difference_gwh: acc.last().map(|x| x.1).unwrap_or(0.0),
            evi_max_temp_correlation: correlation,
            daily_csv,
            hourly_csv,
        });
    }

    let mut gates = Vec::new();
    if let Some(test_label) = &cfg.gate_test {
        let find = |label: &str| {
            scenarios
                .iter()
                .find(|s| s.label == label)
                .map(|s| &s.report)
                .ok_or_else(|| Error::Config(format!("unknown scenario `{label}`")))
        };
        let test = find(test_label)?;
        for r in &cfg.gate_references {
            let g = anomaly_gate(find(r)?, test, cfg.gate_k)?;
            println!(
                "gate {} vs {}: lhs={:.6} rhs={:.6} k={} flagged={}",
                g.reference, g.test, g.lhs, g.rhs, g.k, g.flagged
            );
            gates.push(g);
        }
    }

    let ramps = ramp_stats(&inputs.load, cfg.ramp_window);
    let mut w = out.csv("ramps.csv")?;
    w.write_record(["date", "ramp_up_mw", "ramp_down_mw"])?;
    for y in &ramps.years {
        for d in &y.days {
            w.write_record([d.date.to_string(), num(d.ramp_up), num(d.ramp_down)])?;
        }
    }
    w.flush()?;

    out.json(
        "report.json",
        &ReportDoc {
            estimable_from: est.start(),
            estimable_to: est.end().add_hours(1),
            scenarios,
            gates,
            ramps,
        },
    )
}

#[derive(Serialize)]
struct MonthScore {
    month: String,
    #[serde(flatten)]
    score: ForecastScore,
    baseline_month: Option<String>,
    mae_change_pct: Option<f64>,
    mape_change_pct: Option<f64>,
}

#[derive(Serialize)]
struct ForecastDoc {
    baseline_year: Option<i32>,
    months: Vec<MonthScore>,
}

fn month_key(year: i32, month: u32) -> String {
    format!("{year:04}-{month:02}")
}

pub fn forecast_eval(cfg: &RunConfig, out: &Output) -> Result<()> {
    let actual = read_load_file(required(&cfg.load_csv, "load_csv")?)?.series;
    let fpath = required(&cfg.forecast_csv, "forecast_csv")?;
    let forecast = read_hourly_csv(
        std::fs::File::open(fpath)?,
        &fpath.display().to_string(),
        "forecast_mw",
    )?
    .series;

    let mut by_month: BTreeMap<(i32, u32), Vec<(f64, f64)>> = BTreeMap::new();
    let mut seen: BTreeMap<(i32, u32), ()> = BTreeMap::new();
    for (t, y) in actual.observed() {
        seen.insert((t.year(), t.month()), ());
        if let Some(f) = forecast.get(t) {
            by_month
                .entry((t.year(), t.month()))
                .or_default()
                .push((y, f));
        }
    }
    for key in seen.keys().filter(|k| !by_month.contains_key(k)) {
        warn!(
            "month {} has no hours with both actual and forecast; skipped",
            month_key(key.0, key.1)
        );
    }
    let mut scores = BTreeMap::new();
    for (key, pairs) in &by_month {
        let s = score_pairs(pairs.iter().copied())?;
        if s.mape.is_none() {
            warn!(
                "month {}: MAPE undefined (zero actual load)",
                month_key(key.0, key.1)
            );
        }
        scores.insert(*key, s);
    }

    let mut months = Vec::new();
    for (&(year, month), score) in &scores {
        let base = cfg
            .forecast_baseline_year
            .filter(|&b| b != year)
            .and_then(|b| scores.get(&(b, month)).map(|s| (b, s)));
        let change = |b: Option<f64>, t: Option<f64>| match (b, t) {
            (Some(b), Some(t)) if b != 0.0 => Some(relative_change(b, t)),
            _ => None,
        };
        months.push(MonthScore {
            month: month_key(year, month),
            score: *score,
            baseline_month: base.map(|(b, _)| month_key(b, month)),
            mae_change_pct: base.and_then(|(_, s)| change(Some(s.mae), Some(score.mae))),
            mape_change_pct: base.and_then(|(_, s)| change(s.mape, score.mape)),
        });
    }

    let mut w = out.csv("forecast_eval.csv")?;
    w.write_record([
        "month",
        "n_hours",
        "mae_mw",
        "mape_pct",
        "baseline_month",
        "mae_change_pct",
        "mape_change_pct",
    ])?;
    for m in &months {
        w.write_record([
            m.month.clone(),
            m.score.n.to_string(),
            num(m.score.mae),
            opt(m.score.mape),
            m.baseline_month.clone().unwrap_or_default(),
            opt(m.mae_change_pct),
            opt(m.mape_change_pct),
        ])?;
        println!(
            "{}: n={} mae={:.3} mape={}",
            m.month,
            m.score.n,
            m.score.mae,
            m.score
                .mape
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "undefined".into())
        );
    }
    w.flush()?;
    out.json(
        "forecast_eval.json",
        &ForecastDoc {
            baseline_year: cfg.forecast_baseline_year,
            months,
        },
    )
}

#[derive(Serialize)]
struct Cps1Month {
    #[serde(flatten)]
    report: Cps1Report,
    baseline_month: Option<String>,
    relative_pct: Option<f64>,
}

#[derive(Serialize)]
struct Cps1Doc {
    bias_b: f64,
    epsilon1: f64,
    baseline_year: Option<i32>,
    rejected_samples: usize,
    months: Vec<Cps1Month>,
}

pub fn cps1(cfg: &RunConfig, out: &Output) -> Result<()> {
    let samples = read_telemetry_file(required(&cfg.telemetry_csv, "telemetry_csv")?)?;
    let series = to_minutes(&samples);
    if series.rejected > 0 {
        warn!(
            "rejected {} samples outside the frequency band",
            series.rejected
        );
    }
    let reports = cps1_by_month(&series.minutes, &cfg.ba);
    let sample_months: BTreeMap<String, ()> = samples
        .iter()
        .map(|s| (month_key(s.timestamp.year(), s.timestamp.month()), ()))
        .collect();
    for m in sample_months.keys() {
        if !reports.iter().any(|r| &r.month == m) {
            warn!("month {m} has no valid minutes; skipped");
        }
    }
    let by_label: BTreeMap<&str, &Cps1Report> =
        reports.iter().map(|r| (r.month.as_str(), r)).collect();
    let months: Vec<Cps1Month> = reports
        .iter()
        .map(|r| {
            let base = cfg.cps1_baseline_year.and_then(|b| {
                let label = format!("{b:04}{}", &r.month[4..]);
                (label != r.month)
                    .then(|| by_label.get(label.as_str()).copied())
                    .flatten()
            });
            Cps1Month {
                report: r.clone(),
                baseline_month: base.map(|b| b.month.clone()),
                relative_pct: base.map(|b| cps1_relative(b, r)),
            }
        })
        .collect();

    let mut w = out.csv("cps1.csv")?;
    w.write_record([
        "month",
        "n_minutes",
        "cf_month_hz2",
        "cf",
        "cps1_pct",
        "baseline_month",
        "relative_pct",
    ])?;
    for m in &months {
        w.write_record([
            m.report.month.clone(),
            m.report.n_minutes.to_string(),
            num(m.report.cf_month),
            num(m.report.cf),
            num(m.report.cps1_pct),
            m.baseline_month.clone().unwrap_or_default(),
            opt(m.relative_pct),
        ])?;
        println!("{}: cps1={:.4}%", m.report.month, m.report.cps1_pct);
    }
    w.flush()?;
    out.json(
        "cps1.json",
        &Cps1Doc {
            bias_b: cfg.ba.bias_b,
            epsilon1: cfg.ba.epsilon1,
            baseline_year: cfg.cps1_baseline_year,
            rejected_samples: series.rejected,
            months,
        },
    )
}

pub fn synth(cfg: &RunConfig, out: &Output, seed: u64) -> Result<()> {
    let sc = &cfg.synth;
    let last_day = sc
        .end
        .checked_sub_days(Days::new(1))
        .ok_or_else(|| Error::Config("synth_end is out of range".into()))?;
    let (y0, y1) = (sc.start.year(), last_day.year());
    let holidays = fixed_holidays(y0, y1);
    let cal = cfg.calendar(holidays.clone())?;
    let mut spec = ScenarioSpec::new(seed, sc.start, sc.end);
    spec.model = PlantedModel::typical(y0, y1).with_trend_growth(sc.trend_growth);
    spec.noise_std = sc.noise_std;
    spec.suppression = sc.suppression.clone();
    let scenario = generate(&spec, &cal)?;

    write_hourly_csv(out.stamped("load.csv")?, &scenario.load, "load_mw")?;
    write_hourly_csv(
        out.stamped("expected.csv")?,
        &scenario.expected,
        "expected_mw",
    )?;
    let obs: Vec<WeatherObservation> = scenario.weather.iter().copied().map(Into::into).collect();
    write_weather_csv(out.stamped("weather.csv")?, &obs)?;
    write_holidays_csv(out.stamped("holidays.csv")?, &holidays)?;
    let forecast = synthetic_forecast(&scenario.load, seed, sc.forecast_rel_std)?;
    write_hourly_csv(out.stamped("forecast.csv")?, &forecast, "forecast_mw")?;

    let mut files = vec![
        ("load_csv", "load.csv"),
        ("weather_csv", "weather.csv"),
        ("holiday_csv", "holidays.csv"),
        ("forecast_csv", "forecast.csv"),
    ];
    if !sc.telemetry.is_empty() {
        let mut samples: Vec<TelemetrySample> = Vec::new();
        for m in &sc.telemetry {
            let first = NaiveDate::from_ymd_opt(m.year, m.month, 1).ok_or_else(|| {
                Error::Config(format!("bad telemetry month {}-{}", m.year, m.month))
            })?;
            let days = (first + Months::new(1) - first).num_days() as u32;
            let mut tspec = TelemetrySpec::new(
                first.and_hms_opt(0, 0, 0).expect("midnight"),
                vec![TelemetryBlock {
                    minutes: days * 1440,
                    race_mw: m.race_mw,
                    delta_f_hz: m.delta_f_hz,
                }],
            );
            tspec.settings = cfg.ba;
            tspec.samples_per_minute = sc.samples_per_minute;
            samples.extend(generate_telemetry(&tspec)?);
        }
        samples.sort_by_key(|s| s.timestamp);
        write_telemetry_csv(out.stamped("telemetry.csv")?, &samples)?;
        files.push(("telemetry_csv", "telemetry.csv"));
    }

    let mut truth = serde_json::to_value(&scenario.truth)?;
    if let serde_json::Value::Object(map) = &mut truth {
        map.insert("start".into(), serde_json::to_value(sc.start)?);
        map.insert("end".into(), serde_json::to_value(sc.end)?);
    }
    out.json("truth.json", &truth)?;

    let mut conf = format!("# synthetic dataset, seed {seed}\n");
    conf.push_str(&cfg.derived_config(&files));
    out.plain("loadkit.conf", &conf)?;

    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "synth seed {seed}: {} hours, suppressed energy {:.3} MWh",
        scenario.load.len(),
        scenario.truth.suppressed_energy_mwh
    )?;
    Ok(())
}
