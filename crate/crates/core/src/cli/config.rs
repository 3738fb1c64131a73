//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! load_csv = data/load.csv
//! scenario = covid | 2020-03-18 | 2020-09-01 | state of emergency
//! ```
//!
//! Paths are relative to the config file. Date ranges are half-open `[from, to)`.
//! Keys marked repeatable may appear more than once; any other key at most once.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use chrono_tz::Tz;
use sha2::{Digest, Sha256};

use crate::control::BaSettings;
use crate::error::{Error, Result};
use crate::estimator::{FitOptions, RetrainSchedule, RidgePolicy, DEFAULT_RIDGE_SCALE};
use crate::metrics::{SeasonalWindow, DEFAULT_GATE_K};
use crate::synth::Suppression;
use crate::timeseries::{
    CalendarConfig, DEFAULT_HEAT_MONTHS, DEFAULT_TIMEZONE, DEFAULT_WINDCHILL_MONTHS,
};

const PATH_KEYS: [&str; 5] = [
    "load_csv",
    "weather_csv",
    "holiday_csv",
    "forecast_csv",
    "telemetry_csv",
];
const REPEATABLE: [&str; 4] = [
    "scenario",
    "gate_reference",
    "synth_suppression",
    "synth_telemetry",
];
const KEYS: [&str; 27] = [
    "load_csv",
    "weather_csv",
    "holiday_csv",
    "forecast_csv",
    "telemetry_csv",
    "output_dir",
    "timezone",
    "windchill_months",
    "heat_months",
    "update_period_days",
    "window_months",
    "schedule_anchor",
    "ridge_scale",
    "ridge_lambda",
    "max_refinements",
    "max_condition",
    "gate_k",
    "scenario",
    "gate_test",
    "gate_reference",
    "ramp_window",
    "forecast_baseline_year",
    "cps1_baseline_year",
    "bias_b",
    "epsilon1",
    "synth_suppression",
    "synth_telemetry",
];
const SYNTH_KEYS: [&str; 7] = [
    "synth_seed",
    "synth_start",
    "synth_end",
    "synth_noise_std",
    "synth_trend_growth",
    "synth_forecast_rel_std",
    "synth_samples_per_minute",
];

/// A labelled analysis window `[from, to)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioWindow {
    pub label: String,
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub note: String,
}

/// One synthetic telemetry month of constant RACE and frequency error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TelemetryMonth {
    pub year: i32,
    pub month: u32,
    pub race_mw: f64,
    pub delta_f_hz: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub noise_std: f64,
    /// MW added to the planted trend per year.
    pub trend_growth: f64,
    pub suppression: Vec<Suppression>,
    pub forecast_rel_std: f64,
    pub telemetry: Vec<TelemetryMonth>,
    pub samples_per_minute: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            start: NaiveDate::from_ymd_opt(2016, 1, 1).expect("date"),
            end: NaiveDate::from_ymd_opt(2020, 5, 1).expect("date"),
            noise_std: 30.0,
            trend_growth: 0.0,
            suppression: Vec::new(),
            forecast_rel_std: 0.02,
            telemetry: Vec::new(),
            samples_per_minute: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Directory the config was read from; relative paths resolve against it.
    pub base_dir: PathBuf,
    /// sha256 of the config file bytes, hex.
    pub hash: String,
    /// The config lines that are not file locations or generator settings.
    pub analysis_lines: Vec<String>,
    pub load_csv: Option<PathBuf>,
    pub weather_csv: Option<PathBuf>,
    pub holiday_csv: Option<PathBuf>,
    pub forecast_csv: Option<PathBuf>,
    pub telemetry_csv: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub timezone: Tz,
    pub windchill_months: Vec<u32>,
    pub heat_months: Vec<u32>,
    pub schedule: RetrainSchedule,
    pub fit: FitOptions,
    pub gate_k: f64,
    pub scenarios: Vec<ScenarioWindow>,
    pub gate_test: Option<String>,
    pub gate_references: Vec<String>,
    pub ramp_window: SeasonalWindow,
    pub forecast_baseline_year: Option<i32>,
    pub cps1_baseline_year: Option<i32>,
    pub ba: BaSettings,
    pub synth: SynthConfig,
}

fn err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn parse_num<T: std::str::FromStr>(v: &str, line: usize, key: &str) -> Result<T> {
    v.parse()
        .map_err(|_| err(line, format!("`{key}` expects a number, got `{v}`")))
}

fn parse_date(v: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(v, "%Y-%m-%d")
        .map_err(|_| err(line, format!("bad date `{v}` (want YYYY-MM-DD)")))
}

fn parse_months(v: &str, line: usize, key: &str) -> Result<Vec<u32>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|m| parse_num::<u32>(m.trim(), line, key))
        .collect()
}

fn parts(v: &str, n: usize, line: usize, key: &str) -> Result<Vec<String>> {
    let p: Vec<String> = v.split('|').map(|s| s.trim().to_string()).collect();
    if p.len() < n {
        return Err(err(
            line,
            format!("`{key}` expects {n} `|`-separated fields, got {}", p.len()),
        ));
    }
    Ok(p)
}

fn parse_month_day(v: &str, line: usize) -> Result<(u32, u32)> {
    let (m, d) = v
        .split_once('-')
        .ok_or_else(|| err(line, format!("bad month-day `{v}` (want MM-DD)")))?;
    let md = (
        parse_num(m, line, "ramp_window")?,
        parse_num(d, line, "ramp_window")?,
    );
    NaiveDate::from_ymd_opt(2020, md.0, md.1)
        .ok_or_else(|| err(line, format!("bad month-day `{v}`")))?;
    Ok(md)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let hash = hex::encode(Sha256::digest(text.as_bytes()));
        let mut cfg = RunConfig {
            base_dir: base_dir.to_path_buf(),
            hash,
            analysis_lines: Vec::new(),
            load_csv: None,
            weather_csv: None,
            holiday_csv: None,
            forecast_csv: None,
            telemetry_csv: None,
            output_dir: base_dir.join("out"),
            timezone: DEFAULT_TIMEZONE,
            windchill_months: DEFAULT_WINDCHILL_MONTHS.to_vec(),
            heat_months: DEFAULT_HEAT_MONTHS.to_vec(),
            schedule: RetrainSchedule::default(),
            fit: FitOptions::default(),
            gate_k: DEFAULT_GATE_K,
            scenarios: Vec::new(),
            gate_test: None,
            gate_references: Vec::new(),
            ramp_window: SeasonalWindow {
                start: (3, 18),
                end: (7, 15),
            },
            forecast_baseline_year: None,
            cps1_baseline_year: None,
            ba: BaSettings::default(),
            synth: SynthConfig::default(),
        };
        let mut seen = BTreeSet::new();
        let mut ridge_scale = None;
        let mut ridge_lambda = None;
        let mut bias_b = cfg.ba.bias_b;
        let mut epsilon1 = cfg.ba.epsilon1;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split_once('#').map_or(raw, |(c, _)| c).trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) && !SYNTH_KEYS.contains(&key) {
                return Err(err(line, format!("unknown key `{key}`")));
            }
            if !REPEATABLE.contains(&key) && !seen.insert(key.to_string()) {
                return Err(err(line, format!("`{key}` given twice")));
            }
            if !PATH_KEYS.contains(&key) && key != "output_dir" && !key.starts_with("synth_") {
                cfg.analysis_lines.push(content.to_string());
            }
            let path = || Some(base_dir.join(value));
            match key {
                "load_csv" => cfg.load_csv = path(),
                "weather_csv" => cfg.weather_csv = path(),
                "holiday_csv" => cfg.holiday_csv = path(),
                "forecast_csv" => cfg.forecast_csv = path(),
                "telemetry_csv" => cfg.telemetry_csv = path(),
                "output_dir" => cfg.output_dir = base_dir.join(value),
                "timezone" => {
                    cfg.timezone = value
                        .parse()
                        .map_err(|_| err(line, format!("unknown time zone `{value}`")))?
                }
                "windchill_months" => cfg.windchill_months = parse_months(value, line, key)?,
                "heat_months" => cfg.heat_months = parse_months(value, line, key)?,
                "update_period_days" => {
                    cfg.schedule.update_period_days = parse_num(value, line, key)?
                }
                "window_months" => cfg.schedule.window_months = parse_num(value, line, key)?,
                "schedule_anchor" => cfg.schedule.anchor = Some(parse_date(value, line)?),
                "ridge_scale" => ridge_scale = Some(parse_num::<f64>(value, line, key)?),
                "ridge_lambda" => ridge_lambda = Some(parse_num::<f64>(value, line, key)?),
                "max_refinements" => cfg.fit.max_refinements = parse_num(value, line, key)?,
                "max_condition" => cfg.fit.max_condition = parse_num(value, line, key)?,
                "gate_k" => cfg.gate_k = parse_num(value, line, key)?,
                "scenario" => {
                    let p = parts(value, 3, line, key)?;
                    let w = ScenarioWindow {
                        label: p[0].clone(),
                        from: parse_date(&p[1], line)?,
                        to: parse_date(&p[2], line)?,
                        note: p.get(3).cloned().unwrap_or_default(),
                    };
                    if w.label.is_empty()
                        || w.label.contains(|c: char| c.is_whitespace() || c == '/')
                    {
                        return Err(err(
                            line,
                            format!("scenario label `{}` must be a single word", w.label),
                        ));
                    }
                    if w.from >= w.to {
                        return Err(err(
                            line,
                            format!("scenario `{}` is empty or reversed", w.label),
                        ));
                    }
                    if cfg.scenarios.iter().any(|s| s.label == w.label) {
                        return Err(err(line, format!("scenario `{}` defined twice", w.label)));
                    }
                    cfg.scenarios.push(w);
                }
                "gate_test" => cfg.gate_test = Some(value.to_string()),
                "gate_reference" => cfg.gate_references.push(value.to_string()),
                "ramp_window" => {
                    let p = parts(value, 2, line, key)?;
                    cfg.ramp_window = SeasonalWindow {
                        start: parse_month_day(&p[0], line)?,
                        end: parse_month_day(&p[1], line)?,
                    };
                }
                "forecast_baseline_year" => {
                    cfg.forecast_baseline_year = Some(parse_num(value, line, key)?)
                }
                "cps1_baseline_year" => cfg.cps1_baseline_year = Some(parse_num(value, line, key)?),
                "bias_b" => bias_b = parse_num(value, line, key)?,
                "epsilon1" => epsilon1 = parse_num(value, line, key)?,
                "synth_seed" => cfg.synth.seed = parse_num(value, line, key)?,
                "synth_start" => cfg.synth.start = parse_date(value, line)?,
                "synth_end" => cfg.synth.end = parse_date(value, line)?,
                "synth_noise_std" => cfg.synth.noise_std = parse_num(value, line, key)?,
                "synth_trend_growth" => cfg.synth.trend_growth = parse_num(value, line, key)?,
                "synth_forecast_rel_std" => {
                    cfg.synth.forecast_rel_std = parse_num(value, line, key)?
                }
                "synth_samples_per_minute" => {
                    cfg.synth.samples_per_minute = parse_num(value, line, key)?
                }
                "synth_suppression" => {
                    let p = parts(value, 3, line, key)?;
                    cfg.synth.suppression.push(Suppression {
                        from: parse_date(&p[0], line)?,
                        to: parse_date(&p[1], line)?,
                        fraction: parse_num(&p[2], line, key)?,
                    });
                }
                "synth_telemetry" => {
                    let p = parts(value, 3, line, key)?;
                    let month = NaiveDate::parse_from_str(&format!("{}-01", p[0]), "%Y-%m-%d")
                        .map_err(|_| err(line, format!("bad month `{}` (want YYYY-MM)", p[0])))?;
                    cfg.synth.telemetry.push(TelemetryMonth {
                        year: chrono::Datelike::year(&month),
                        month: chrono::Datelike::month(&month),
                        race_mw: parse_num(&p[1], line, key)?,
                        delta_f_hz: parse_num(&p[2], line, key)?,
                    });
                }
                _ => unreachable!("key list checked above"),
            }
        }

        cfg.fit.ridge = match (ridge_scale, ridge_lambda) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give at most one of `ridge_scale` and `ridge_lambda`".into(),
                ))
            }
            (_, Some(l)) => RidgePolicy::Fixed(l),
            (s, None) => RidgePolicy::TraceScaled(s.unwrap_or(DEFAULT_RIDGE_SCALE)),
        };
        cfg.ba = BaSettings::new(bias_b, epsilon1).map_err(|e| Error::Config(e.to_string()))?;
        cfg.calendar(Vec::new())
            .map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schedule.update_period_days == 0 || cfg.schedule.window_months == 0 {
            return Err(Error::Config(
                "`update_period_days` and `window_months` must be positive".into(),
            ));
        }
        if !(cfg.gate_k > 0.0) {
            return Err(Error::Config("`gate_k` must be positive".into()));
        }
        for label in cfg.gate_references.iter().chain(&cfg.gate_test) {
            if !cfg.scenarios.iter().any(|s| &s.label == label) {
                return Err(Error::Config(format!(
                    "gate names unknown scenario `{label}`"
                )));
            }
        }
        Ok(cfg)
    }

    pub fn calendar(&self, holidays: Vec<NaiveDate>) -> Result<CalendarConfig> {
        CalendarConfig::new(
            holidays,
            self.windchill_months.iter().copied(),
            self.heat_months.iter().copied(),
            self.timezone,
        )
    }

    /// `key = value` lines pointing at files in `dir`, followed by the analysis settings.
    pub fn derived_config(&self, files: &[(&str, &str)]) -> String {
        let mut out = String::new();
        for (k, v) in files {
            out.push_str(&format!("{k} = {v}\n"));
        }
        for l in &self.analysis_lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}
