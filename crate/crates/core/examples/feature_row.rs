//! Builds one 345-wide design row and lists its non-zero entries.

use loadkit::features::build_row;
use loadkit::timeseries::{CalendarConfig, Timestamp};
use loadkit::weather::WeatherRecord;

fn main() -> loadkit::Result<()> {
    let t = Timestamp::parse("2020-07-01T17:00")?;
    let cal = CalendarConfig::default()
        .with_holidays([chrono::NaiveDate::from_ymd_opt(2020, 7, 1).unwrap()]);
    let weather = WeatherRecord {
        timestamp: t,
        temp_c: 31.0,
        wind_kmh: 12.0,
        rh_pct: 35.0,
        daily_max_c: 33.0,
        daily_min_c: 17.0,
    };
    let row = build_row(t, &weather, &cal)?;
    println!("{} columns", row.values.len());
    for (name, v) in row.layout.names().iter().zip(&row.values) {
        if *v != 0.0 {
            println!("{name:>20} = {v:.3}");
        }
    }
    Ok(())
}
