//! Plants an 8% load reduction, then detects and sizes it.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use loadkit::estimator::{rolling_estimate, FitOptions, RetrainSchedule};
use loadkit::metrics::{accumulated_difference, anomaly_gate, evi, pearson, scenario_report};
use loadkit::synth::{fixed_holidays, generate, PlantedModel, ScenarioSpec, Suppression};
use loadkit::timeseries::{daily_aggregates, CalendarConfig, JoinedTable, Timestamp};
use loadkit::weather::daily_temperatures;

fn main() -> loadkit::Result<()> {
    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
    let cal = CalendarConfig::default().with_holidays(fixed_holidays(2016, 2020));
    let mut spec = ScenarioSpec::new(21, d(2016, 1, 1), d(2020, 5, 1));
    spec.model = PlantedModel::typical(2016, 2020);
    spec.suppression = vec![Suppression {
        from: d(2019, 11, 16),
        to: d(2020, 5, 1),
        fraction: 0.08,
    }];
    let scenario = generate(&spec, &cal)?;
    let table = JoinedTable {
        rows: scenario.joined_rows(),
        dropped: 0,
    };
    let schedule = RetrainSchedule {
        anchor: Some(d(2019, 11, 16)),
        ..RetrainSchedule::default()
    };
    let est = rolling_estimate(&table, &cal, &schedule, &FitOptions::default())?.estimate;

    let window = |from: NaiveDate, to: NaiveDate| {
        let (a, b) = (Timestamp::midnight(from), Timestamp::midnight(to));
        (scenario.load.slice(a, b), est.slice(a, b))
    };
    let (ra, re) = window(d(2018, 11, 16), d(2019, 5, 1));
    let (ta, te) = window(d(2019, 11, 16), d(2020, 5, 1));
    let reference = scenario_report(&ra, &re, "last year")?;
    let test = scenario_report(&ta, &te, "suppressed")?;
    let gate = anomaly_gate(&reference, &test, 10.0)?;
    println!(
        "bias {:.1} vs {:.1} MW: lhs {:.2}, rhs {:.3}, flagged {}",
        reference.bias, test.bias, gate.lhs, gate.rhs, gate.flagged
    );

    let acc = accumulated_difference(&ta, &te);
    println!(
        "accumulated difference {:.1} GWh, planted {:.1} GWh",
        acc.last().map(|x| x.1).unwrap_or(0.0),
        scenario.truth.suppressed_energy_mwh / 1000.0
    );

    let temps: BTreeMap<_, _> = daily_temperatures(&scenario.weather);
    let days = daily_aggregates(&ta, &te, &temps, &cal);
    let evis: Vec<f64> = days.iter().map(evi).collect::<loadkit::Result<_>>()?;
    let maxes: Vec<f64> = days.iter().filter_map(|d| d.max_temp).collect();
    let mean_evi = evis.iter().sum::<f64>() / evis.len() as f64;
    let c = pearson(&evis, &maxes)?;
    println!(
        "{} days, mean EVI {mean_evi:.2}%, r(EVI, max temp) = {:.3} (p = {:.3})",
        days.len(),
        c.r,
        c.p_value
    );
    Ok(())
}
