//! Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture --test-threads=1`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::{NaiveDate, NaiveDateTime};
use loadkit::control::{cps1_from_cf_month, cps1_month, to_minutes, BaSettings};
use loadkit::estimator::{fit_coefficients, rolling_estimate, FitOptions, RetrainSchedule};
use loadkit::features::build_matrix;
use loadkit::metrics::{
    accumulated_difference, anomaly_gate, evi_weighted_difference, mae_mape, relative_change,
    scenario_report, ScenarioReport, DEFAULT_GATE_K,
};
use loadkit::synth::{
    fixed_holidays, generate, generate_telemetry, planted_predictions, PlantedModel, ScenarioSpec,
    Suppression, TelemetryBlock, TelemetrySpec,
};
use loadkit::timeseries::{daily_aggregates, CalendarConfig, HourlySeries, JoinedTable, Timestamp};
use loadkit::weather::{heat_index_f, wind_chill_f};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!(
        "criterion {id} {} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn hours_between(from: NaiveDate, to: NaiveDate) -> usize {
    (to - from).num_hours() as usize
}

fn secs(d: Duration) -> String {
    format!("{:.3}s", d.as_secs_f64())
}

#[test]
fn criterion_1_scenario_gate_reproduction() {
    let t0 = Instant::now();
    let n1 = hours_between(date(2017, 3, 1), date(2020, 3, 18));
    let n2 = hours_between(date(2019, 3, 18), date(2019, 9, 1));
    let n3 = hours_between(date(2020, 3, 18), date(2020, 9, 1));
    let s1 = ScenarioReport::from_summary("I", n1, 1.26e4, -13.04);
    let s2 = ScenarioReport::from_summary("II", n2, 0.85e4, 16.60);
    let s3 = ScenarioReport::from_summary("III", n3, 1.53e4, -127.28);
    let g1 = anomaly_gate(&s1, &s3, DEFAULT_GATE_K).unwrap();
    let g2 = anomaly_gate(&s2, &s3, DEFAULT_GATE_K).unwrap();
    let elapsed = t0.elapsed();
    let pass = (g1.lhs - 114.24).abs() < 1e-9
        && (g2.lhs - 143.88).abs() < 1e-9
        && (g1.rhs - 1.95).abs() <= 0.01
        && (g2.rhs - 1.95).abs() <= 0.01
        && g1.flagged
        && g2.flagged
        && elapsed < Duration::from_secs(1);
    verdict(
        1,
        "scenario gate reproduction",
        pass,
        format!(
            "N = ({n1}, {n2}, {n3}); lhs = {:.2}, {:.2}; rhs = {:.4}, {:.4}; {}",
            g1.lhs,
            g2.lhs,
            g1.rhs,
            g2.rhs,
            secs(elapsed)
        ),
    );
}

#[test]
fn criterion_2_mse_decomposition_identity() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.random_range(2..=5000);
        let scale = 10f64.powf(rng.random_range(-2.0..3.0));
        let shift = rng.random_range(-200.0..200.0);
        let errors: Vec<f64> = (0..n)
            .map(|_| shift + scale * rng.random_range(-1.0..1.0))
            .collect();
        let r = ScenarioReport::from_errors("x", &errors).unwrap();
        let mse = errors.iter().map(|e| e * e).sum::<f64>() / n as f64;
        let rel = ((r.var + r.bias * r.bias) - mse).abs() / mse;
        worst = worst.max(rel).max((r.mse - mse).abs() / mse);
    }
    let elapsed = t0.elapsed();
    verdict(
        2,
        "mse decomposition identity",
        worst <= 1e-9 && elapsed < Duration::from_secs(5),
        format!(
            "worst relative gap {worst:.3e} over 10000 series; {}",
            secs(elapsed)
        ),
    );
}

#[test]
fn criterion_3_forecast_relative_errors() {
    let t0 = Instant::now();
    // (month, MAE 2019, MAPE 2019, MAE 2020, MAPE 2020, printed rel MAE, printed rel MAPE)
    let rows = [
        ("March", 47.52, 1.61, 80.23, 2.86, 68.83, 77.64),
        ("April", 50.05, 1.86, 66.29, 2.60, 32.45, 39.78),
        ("June", 50.30, 1.87, 59.15, 2.37, 17.59, 26.74),
        ("July", 56.87, 2.08, 75.76, 2.80, 33.22, 34.62),
        ("August", 47.60, 1.80, 66.01, 2.56, 38.68, 42.22),
    ];
    let mut worst = 0.0f64;
    for (_, mae0, mape0, mae1, mape1, rel_mae, rel_mape) in rows {
        worst = worst
            .max((relative_change(mae0, mae1) - rel_mae).abs())
            .max((relative_change(mape0, mape1) - rel_mape).abs());
    }
    let may_mae = relative_change(65.28, 66.16);
    let may_mape = relative_change(2.51, 2.81);
    let may_ok = (may_mae - 1.35).abs() <= 0.02
        && (may_mape - 11.95).abs() <= 0.02
        && (may_mape - 11.59).abs() > 0.3;
    let elapsed = t0.elapsed();
    verdict(
        3,
        "forecast relative errors",
        worst <= 0.02 && may_ok && elapsed < Duration::from_secs(1),
        format!(
            "worst deviation {worst:.4}; May MAE {may_mae:.2}, May MAPE computes to {may_mape:.2} (printed 11.59); {}",
            secs(elapsed)
        ),
    );
}

fn telemetry_cps1(blocks: Vec<TelemetryBlock>, samples_per_minute: u32) -> f64 {
    let start = NaiveDateTime::parse_from_str("2020-04-01T00:00:00", "%Y-%m-%dT%H:%M:%S").unwrap();
    let mut spec = TelemetrySpec::new(start, blocks);
    spec.samples_per_minute = samples_per_minute;
    let samples = generate_telemetry(&spec).unwrap();
    let minutes = to_minutes(&samples);
    assert_eq!(minutes.rejected, 0);
    cps1_month(&minutes.minutes, &spec.settings)
        .unwrap()
        .cps1_pct
}

#[test]
fn criterion_4_cps1_boundary_cases() {
    let t0 = Instant::now();
    let month = 30 * 1440;
    let zero = telemetry_cps1(
        vec![TelemetryBlock {
            minutes: month,
            race_mw: 0.0,
            delta_f_hz: 0.0,
        }],
        4,
    );
    let eps = BaSettings::default().epsilon1;
    let floor = cps1_from_cf_month(eps * eps, eps);
    let worked = telemetry_cps1(
        vec![TelemetryBlock {
            minutes: month,
            race_mw: 4.19,
            delta_f_hz: 0.01,
        }],
        6,
    );
    let elapsed = t0.elapsed();
    verdict(
        4,
        "cps1 boundary cases",
        zero == 200.0
            && floor == 100.0
            && (worked - 169.1).abs() <= 0.1
            && elapsed < Duration::from_secs(1),
        format!(
            "zero ACE {zero}%, CF = eps1^2 {floor}%, worked month {worked:.4}%; {}",
            secs(elapsed)
        ),
    );
}

fn calendar(first: i32, last: i32) -> CalendarConfig {
    CalendarConfig::default().with_holidays(fixed_holidays(first, last))
}

#[test]
fn criterion_5_fit_recovery() {
    let t0 = Instant::now();

    // Noiseless: one 26-month window, coefficient stage against the planted a·b*.
    let (start, end) = (date(2016, 1, 1), date(2018, 3, 1));
    let cal = calendar(2016, 2018);
    let mut spec = ScenarioSpec::new(5, start, end);
    spec.model = PlantedModel::typical(2016, 2018);
    spec.noise_std = 0.0;
    let sc = generate(&spec, &cal).unwrap();
    let matrix = build_matrix(&sc.joined_rows(), &cal).unwrap();
    let planted = planted_predictions(&spec.model, &matrix);
    let trend: Vec<f64> = matrix
        .timestamps()
        .iter()
        .map(|t| spec.model.trend_by_year[&t.year()])
        .collect();
    let detrended: Vec<f64> = planted.iter().zip(&trend).map(|(p, t)| p - t).collect();
    let fit = fit_coefficients(&matrix, &detrended, &FitOptions::default()).unwrap();
    let worst = matrix
        .rows()
        .zip(planted.iter().zip(&trend))
        .map(|(row, (p, t))| {
            let yhat = t + row
                .iter()
                .zip(&fit.coefficients)
                .map(|(a, b)| a * b)
                .sum::<f64>();
            ((yhat - p) / p).abs()
        })
        .fold(0.0f64, f64::max);

    // Noisy: rolling out-of-sample estimates over 52 months.
    let (start, end) = (date(2016, 1, 1), date(2020, 5, 1));
    let cal = calendar(2016, 2020);
    let mut spec = ScenarioSpec::new(6, start, end);
    spec.model = PlantedModel::typical(2016, 2020);
    spec.noise_std = 30.0;
    let sc = generate(&spec, &cal).unwrap();
    let table = JoinedTable {
        rows: sc.joined_rows(),
        dropped: 0,
    };
    let rolling = rolling_estimate(
        &table,
        &cal,
        &RetrainSchedule::default(),
        &FitOptions::default(),
    )
    .unwrap();
    let score = mae_mape(&sc.load, &rolling.estimate).unwrap();
    let mape = score.mape.unwrap();
    let mean_load = sc.load.observed().map(|(_, v)| v).sum::<f64>() / sc.load.len() as f64;

    let elapsed = t0.elapsed();
    verdict(
        5,
        "fit recovery",
        worst < 1e-6 && mape < 2.5 && elapsed < Duration::from_secs(60),
        format!(
            "noiseless {} rows: max relative error {worst:.3e} ({:?}, {} refinements); \
             noisy: out-of-sample MAPE {mape:.3}% over {} hours, mean load {mean_load:.0} MW; {}",
            matrix.nrows(),
            fit.method,
            fit.refinements,
            score.n,
            secs(elapsed)
        ),
    );
}

struct GateRun {
    reference: ScenarioReport,
    test: ScenarioReport,
    recovered_gwh: f64,
    truth_gwh: f64,
}

fn suppression_run(fraction: f64) -> GateRun {
    let (start, end) = (date(2016, 1, 1), date(2020, 5, 1));
    let (test_from, test_to) = (date(2019, 11, 16), date(2020, 5, 1));
    let (ref_from, ref_to) = (date(2018, 11, 16), date(2019, 5, 1));
    let cal = calendar(2016, 2020);
    let mut spec = ScenarioSpec::new(11, start, end);
    spec.model = PlantedModel::typical(2016, 2020);
    spec.noise_std = 30.0;
    if fraction > 0.0 {
        spec.suppression = vec![Suppression {
            from: test_from,
            to: test_to,
            fraction,
        }];
    }
    let sc = generate(&spec, &cal).unwrap();
    let table = JoinedTable {
        rows: sc.joined_rows(),
        dropped: 0,
    };
    let schedule = RetrainSchedule {
        anchor: Some(test_from),
        ..RetrainSchedule::default()
    };
    let rolling = rolling_estimate(&table, &cal, &schedule, &FitOptions::default()).unwrap();
    let window = |a: NaiveDate, b: NaiveDate| {
        (
            sc.load
                .slice(Timestamp::midnight(a), Timestamp::midnight(b)),
            rolling
                .estimate
                .slice(Timestamp::midnight(a), Timestamp::midnight(b)),
        )
    };
    let (ra, re) = window(ref_from, ref_to);
    let (ta, te) = window(test_from, test_to);
    let acc = accumulated_difference(&ta, &te);
    GateRun {
        reference: scenario_report(&ra, &re, "reference").unwrap(),
        test: scenario_report(&ta, &te, "test").unwrap(),
        recovered_gwh: acc.last().unwrap().1,
        truth_gwh: sc.truth.suppressed_energy_mwh / 1000.0,
    }
}

#[test]
fn criterion_6_anomaly_detection_end_to_end() {
    let t0 = Instant::now();
    let run = suppression_run(0.08);
    let gate = anomaly_gate(&run.reference, &run.test, 10.0).unwrap();
    let recovery = (run.recovered_gwh - run.truth_gwh).abs() / run.truth_gwh;
    let control = suppression_run(0.0);
    let control_gate = anomaly_gate(&control.reference, &control.test, 10.0).unwrap();
    let elapsed = t0.elapsed();
    verdict(
        6,
        "anomaly detection end to end",
        gate.flagged
            && recovery <= 0.05
            && !control_gate.flagged
            && elapsed < Duration::from_secs(90),
        format!(
            "suppressed: lhs {:.2} vs k*rhs {:.2} flagged={}; recovered {:.1} of {:.1} GWh ({:.2}% off); \
             control: lhs {:.2} vs k*rhs {:.2} flagged={}; {}",
            gate.lhs,
            gate.k * gate.rhs,
            gate.flagged,
            run.recovered_gwh,
            run.truth_gwh,
            recovery * 100.0,
            control_gate.lhs,
            control_gate.k * control_gate.rhs,
            control_gate.flagged,
            secs(elapsed)
        ),
    );
}

fn wind_chill_oracle(t: f64, v: f64) -> f64 {
    35.74 + 0.6215 * t - 35.75 * v.powf(0.16) + 0.4275 * t * v.powf(0.16)
}

fn rothfusz_oracle(t: f64, r: f64) -> f64 {
    let terms = [
        -42.379,
        2.04901523 * t,
        10.14333127 * r,
        -0.22475541 * t * r,
        -6.83783e-3 * t * t,
        -5.481717e-2 * r * r,
        1.22874e-3 * t * t * r,
        8.5282e-4 * t * r * r,
        -1.99e-6 * t * t * r * r,
    ];
    terms.iter().sum()
}

/// Largest jump of `f` across `x = edge` along each grid line.
fn seam(edge: f64, grid: impl Iterator<Item = f64>, f: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let h = 1e-7;
    grid.map(|y| ((f(edge + h, y) - f(edge - h, y)).abs(), y))
        .fold((0.0, f64::NAN), |a, b| if b.0 > a.0 { b } else { a })
}

#[test]
fn criterion_7_weather_formulas() {
    let wc = wind_chill_f(0.0, 15.0);
    let hi = heat_index_f(90.0, 50.0);
    let wc_ok = (wc - wind_chill_oracle(0.0, 15.0)).abs() < 1e-9 && (wc + 19.0).abs() <= 1.0;
    let hi_ok = (hi - rothfusz_oracle(90.0, 50.0)).abs() < 1e-9 && (hi - 94.6).abs() <= 1.0;

    let steps =
        |lo: f64, hi: f64, n: usize| (0..=n).map(move |i| lo + (hi - lo) * i as f64 / n as f64);
    let seams = [
        (
            "wind chill T = 50 F",
            seam(50.0, steps(3.5, 60.0, 565), |t, v| wind_chill_f(t, v)),
        ),
        (
            "wind chill V = 3 mph",
            seam(3.0, steps(-40.0, 50.0, 900), |v, t| wind_chill_f(t, v)),
        ),
        (
            "heat index RH = 13%",
            seam(13.0, steps(80.0, 112.0, 320), |r, t| heat_index_f(t, r)),
        ),
        (
            "heat index RH = 85%",
            seam(85.0, steps(80.0, 87.0, 70), |r, t| heat_index_f(t, r)),
        ),
        (
            "heat index T = 80 F",
            seam(80.0, steps(85.5, 100.0, 145), |t, r| heat_index_f(t, r)),
        ),
        (
            "heat index T = 87 F",
            seam(87.0, steps(85.5, 100.0, 145), |t, r| heat_index_f(t, r)),
        ),
        (
            "heat index T = 112 F",
            seam(112.0, steps(0.0, 12.9, 129), |t, r| heat_index_f(t, r)),
        ),
    ];
    // The simple/regression switch sits where (simple + T)/2 = 80 °F; solve for T per RH.
    let switch = steps(0.0, 100.0, 1000)
        .map(|r| {
            let t = (170.3 - 0.047 * r) / 2.1;
            (
                (heat_index_f(t + 1e-7, r) - heat_index_f(t - 1e-7, r)).abs(),
                r,
            )
        })
        .fold((0.0, f64::NAN), |a, b| if b.0 > a.0 { b } else { a });
    let mut worst = switch.0;
    let mut lines = vec![format!(
        "heat index switch {:.3} F at RH {:.1}",
        switch.0, switch.1
    )];
    for (name, (jump, at)) in seams {
        worst = worst.max(jump);
        lines.push(format!("{name} {jump:.3} F at {at:.1}"));
    }
    verdict(
        7,
        "weather formulas",
        wc_ok && hi_ok && worst <= 1.5,
        format!(
            "wind chill(0 F, 15 mph) = {wc:.3} F, heat index(90 F, 50%) = {hi:.3} F; largest seam {worst:.3} F [{}]",
            lines.join("; ")
        ),
    );
}

#[test]
fn criterion_8_evi_cumulative_cross_check() {
    let cal = CalendarConfig::default();
    let strategy = (1usize..60, any::<u64>(), 100.0f64..5000.0, 0.0f64..0.4);
    let mut runner = TestRunner::new(Config::with_cases(256));
    let worst = std::cell::Cell::new(0.0f64);
    let result = runner.run(&strategy, |(days, seed, level, spread)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = days * 24;
        let mut draw = |_| level * (1.0 + spread * rng.random_range(-1.0..1.0));
        let actual: Vec<Option<f64>> = (0..n).map(|i| Some(draw(i))).collect();
        let estimated: Vec<Option<f64>> = (0..n).map(|i| Some(draw(i))).collect();
        let t0 = Timestamp::midnight(date(2019, 6, 1));
        let a = HourlySeries::new(t0, actual).unwrap();
        let e = HourlySeries::new(t0, estimated).unwrap();
        let aggregates = daily_aggregates(&a, &e, &BTreeMap::new(), &cal);
        prop_assert_eq!(aggregates.len(), days);
        let weighted = evi_weighted_difference(&aggregates).unwrap();
        let last = accumulated_difference(&a, &e).last().unwrap().1;
        let rel = (weighted - last).abs() / last.abs().max(weighted.abs()).max(1e-12);
        worst.set(worst.get().max(rel));
        prop_assert!(rel <= 1e-9, "relative gap {}", rel);
        Ok(())
    });
    verdict(
        8,
        "evi cumulative cross-check",
        result.is_ok(),
        match result {
            Ok(()) => format!(
                "256 random complete-day datasets, worst relative gap {:.3e}",
                worst.get()
            ),
            Err(e) => e.to_string(),
        },
    );
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn cli(args: &[&str]) -> i32 {
    loadkit::cli::run(std::iter::once("loadkit").chain(args.iter().copied()))
}

#[test]
fn criterion_9_cli_determinism() {
    let root = tempfile::tempdir().unwrap();
    let conf = root.path().join("base.conf");
    std::fs::write(
        &conf,
        "synth_start = 2016-01-01\n\
         synth_end = 2018-09-01\n\
         synth_suppression = 2018-06-01 | 2018-09-01 | 0.08\n\
         synth_telemetry = 2017-04 | 20 | -0.01\n\
         synth_telemetry = 2018-04 | 30 | -0.012\n\
         scenario = a | 2018-03-01 | 2018-06-01 | before\n\
         scenario = b | 2018-06-01 | 2018-09-01 | suppressed\n\
         gate_test = b\n\
         gate_reference = a\n\
         forecast_baseline_year = 2017\n\
         cps1_baseline_year = 2017\n",
    )
    .unwrap();
    let conf = conf.to_str().unwrap();
    let mut lines = Vec::new();
    let mut all_same = true;
    let mut outputs = |cmd: &str, conf: &str| {
        let dirs = [
            root.path().join(format!("{cmd}-1")),
            root.path().join(format!("{cmd}-2")),
        ];
        let codes: Vec<i32> = dirs
            .iter()
            .map(|d| cli(&[cmd, "--config", conf, "--out", d.to_str().unwrap()]))
            .collect();
        let (a, b) = (snapshot(&dirs[0]), snapshot(&dirs[1]));
        let same = codes == [0, 0] && !a.is_empty() && a == b;
        all_same &= same;
        lines.push(format!(
            "{cmd}: exit {codes:?}, {} files, identical={same}",
            a.len()
        ));
        dirs[0].clone()
    };
    let data = outputs("synth", conf);
    let derived = data.join("loadkit.conf");
    let derived = derived.to_str().unwrap();
    for cmd in ["fit", "report", "forecast-eval", "cps1"] {
        outputs(cmd, derived);
    }
    verdict(9, "cli determinism", all_same, lines.join("; "));
}
