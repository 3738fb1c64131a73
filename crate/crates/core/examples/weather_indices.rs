//! Wind chill and heat index in both unit systems.

use loadkit::weather::{heat_index, heat_index_f, wind_chill, wind_chill_f};

fn main() -> loadkit::Result<()> {
    println!(
        "wind chill at 0 F, 15 mph: {:.2} F",
        wind_chill_f(0.0, 15.0)
    );
    println!(
        "heat index at 90 F, 50%:   {:.2} F",
        heat_index_f(90.0, 50.0)
    );

    for (t, wind) in [(-25.0, 30.0), (-5.0, 10.0), (5.0, 2.0)] {
        println!(
            "{t:>6} C, {wind:>4} km/h -> wind chill {:.1} C",
            wind_chill(t, wind)
        );
    }
    for (t, rh) in [(20.0, 40.0), (30.0, 60.0), (35.0, 30.0)] {
        println!(
            "{t:>6} C, {rh:>4}% -> heat index {:.1} C",
            heat_index(t, rh)?
        );
    }
    Ok(())
}
