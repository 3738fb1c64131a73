//! Monthly CPS1 from minute telemetry, with the relative change between two months.

use chrono::NaiveDate;
use loadkit::control::{cps1_by_month, cps1_relative, to_minutes};
use loadkit::synth::{generate_telemetry, TelemetryBlock, TelemetrySpec};

fn main() -> loadkit::Result<()> {
    let month = |y, m, race_mw, delta_f_hz| {
        let start = NaiveDate::from_ymd_opt(y, m, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        let mut spec = TelemetrySpec::new(
            start,
            vec![TelemetryBlock {
                minutes: 30 * 1440,
                race_mw,
                delta_f_hz,
            }],
        );
        spec.samples_per_minute = 6;
        generate_telemetry(&spec)
    };
    let mut samples = month(2019, 4, 4.19, 0.01)?;
    samples.extend(month(2020, 4, 6.0, 0.012)?);

    let series = to_minutes(&samples);
    let settings = Default::default();
    let reports = cps1_by_month(&series.minutes, &settings);
    for r in &reports {
        println!(
            "{}: {} minutes, CF {:.4}, CPS1 {:.2}%",
            r.month, r.n_minutes, r.cf, r.cps1_pct
        );
    }
    println!(
        "2020-04 vs 2019-04: {:+.2}% (positive is worse)",
        cps1_relative(&reports[0], &reports[1])
    );
    Ok(())
}
