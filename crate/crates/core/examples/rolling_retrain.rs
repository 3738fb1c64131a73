//! Out-of-sample estimates from a model refitted every 167 days on the last 26 months.

use chrono::NaiveDate;
use loadkit::estimator::{rolling_estimate, FitOptions, RetrainSchedule};
use loadkit::metrics::mae_mape;
use loadkit::synth::{fixed_holidays, generate, PlantedModel, ScenarioSpec};
use loadkit::timeseries::{CalendarConfig, JoinedTable};

fn main() -> loadkit::Result<()> {
    let start = NaiveDate::from_ymd_opt(2016, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2020, 5, 1).unwrap();
    let cal = CalendarConfig::default().with_holidays(fixed_holidays(2016, 2020));
    let mut spec = ScenarioSpec::new(8, start, end);
    spec.model = PlantedModel::typical(2016, 2020);
    let scenario = generate(&spec, &cal)?;
    let table = JoinedTable {
        rows: scenario.joined_rows(),
        dropped: 0,
    };

    let schedule = RetrainSchedule::default();
    let rolling = rolling_estimate(&table, &cal, &schedule, &FitOptions::default())?;
    for m in &rolling.models {
        println!(
            "model {}: trained {} .. {}, valid {} .. {}",
            m.interval.id,
            m.interval.train_from,
            m.model.train_end,
            m.interval.valid_from,
            m.interval.valid_to
        );
    }
    let score = mae_mape(&scenario.load, &rolling.estimate)?;
    println!(
        "out-of-sample MAE {:.1} MW over {} hours",
        score.mae, score.n
    );
    Ok(())
}
