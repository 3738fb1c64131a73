//! Monthly MAE/MAPE of a day-ahead forecast and the change against the prior year.

use chrono::NaiveDate;
use loadkit::metrics::{mae_mape, relative_change};
use loadkit::synth::{fixed_holidays, generate, synthetic_forecast, PlantedModel, ScenarioSpec};
use loadkit::timeseries::{CalendarConfig, Timestamp};

fn main() -> loadkit::Result<()> {
    let d = |y, m| NaiveDate::from_ymd_opt(y, m, 1).unwrap();
    let cal = CalendarConfig::default().with_holidays(fixed_holidays(2019, 2020));
    let mut spec = ScenarioSpec::new(2, d(2019, 1), d(2021, 1));
    spec.model = PlantedModel::typical(2019, 2020);
    let load = generate(&spec, &cal)?.load;
    let f2019 = synthetic_forecast(
        &load.slice(
            Timestamp::midnight(d(2019, 1)),
            Timestamp::midnight(d(2020, 1)),
        ),
        2,
        0.02,
    )?;
    let f2020 = synthetic_forecast(
        &load.slice(
            Timestamp::midnight(d(2020, 1)),
            Timestamp::midnight(d(2021, 1)),
        ),
        3,
        0.03,
    )?;

    for month in 3..=8 {
        let score = |year: i32, f: &loadkit::timeseries::HourlySeries| {
            let (a, b) = (
                Timestamp::midnight(d(year, month)),
                Timestamp::midnight(d(year, month + 1)),
            );
            mae_mape(&load.slice(a, b), &f.slice(a, b))
        };
        let (s0, s1) = (score(2019, &f2019)?, score(2020, &f2020)?);
        println!(
            "month {month}: MAE {:.1} -> {:.1} MW ({:+.1}%), MAPE {:.2} -> {:.2}% ({:+.1}%)",
            s0.mae,
            s1.mae,
            relative_change(s0.mae, s1.mae),
            s0.mape_pct()?,
            s1.mape_pct()?,
            relative_change(s0.mape_pct()?, s1.mape_pct()?)
        );
    }
    Ok(())
}
