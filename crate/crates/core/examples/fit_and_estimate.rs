//! Fits one model on 26 months of synthetic data and scores the next six months.
//!
//! The split falls in December so the last training year's trend covers nearly the whole year.

use chrono::NaiveDate;
use loadkit::estimator::{estimate, fit, FitOptions};
use loadkit::features::build_matrix;
use loadkit::metrics::{mae_mape, scenario_report};
use loadkit::synth::{fixed_holidays, generate, PlantedModel, ScenarioSpec};
use loadkit::timeseries::{CalendarConfig, Timestamp};

fn main() -> loadkit::Result<()> {
    let start = NaiveDate::from_ymd_opt(2016, 10, 1).unwrap();
    let split = NaiveDate::from_ymd_opt(2018, 12, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2019, 6, 1).unwrap();
    let cal = CalendarConfig::default().with_holidays(fixed_holidays(2016, 2019));
    let mut spec = ScenarioSpec::new(3, start, end);
    spec.model = PlantedModel::typical(2016, 2019);
    let scenario = generate(&spec, &cal)?;

    let rows = scenario.joined_rows();
    let cut = rows.partition_point(|r| r.timestamp < Timestamp::midnight(split));
    let train = build_matrix(&rows[..cut], &cal)?;
    let test = build_matrix(&rows[cut..], &cal)?;

    let model = fit(&train, &FitOptions::default())?;
    println!(
        "trained on {} hours ({:?}, lambda {:.3e}); trend {:?}",
        model.n_train, model.solve_method, model.ridge_lambda, model.trend_by_year
    );
    let est = estimate(&model, &test)?;
    let actual = scenario
        .load
        .slice(Timestamp::midnight(split), Timestamp::midnight(end));
    let report = scenario_report(&actual, &est.series, "holdout")?;
    let score = mae_mape(&actual, &est.series)?;
    println!(
        "holdout: bias {:.2} MW, var {:.1}, MAE {:.2} MW, MAPE {:.2}%, carried trend for {:?}",
        report.bias,
        report.var,
        score.mae,
        score.mape_pct()?,
        est.extrapolated_years
    );
    Ok(())
}
