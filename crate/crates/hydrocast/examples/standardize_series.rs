//! Fit day-of-year/subbasin statistics on a training split and standardize
//! with them: values become z-scores relative to the seasonal norm.
//!
//! ```bash
//! cargo run --release --example standardize_series
//! ```

use hydrocast::standardize::{fit_stats, standardize};
use hydrocast::synth::{generate, SynthConfig};

fn main() -> hydrocast::Result<()> {
    let series = generate(&SynthConfig {
        n_days: 4018, // eleven years
        n_subbasins: 2,
        seed: 7,
        ..SynthConfig::default()
    })?;

    // Fit on the first nine years only; the rest stays unseen.
    let split = series.fractional_split(0.82, 0.09)?;
    let parts = series.split_by_date(&split)?;
    let stats = fit_stats(&parts.train)?;

    let soil = 3; // feature position of soil_water
    println!("seasonal soil_water statistics for subbasin 1:");
    println!("{:>6} {:>10} {:>10} {:>7}", "doy", "mean", "std", "count");
    for doy in [1u16, 60, 121, 182, 244, 305, 366] {
        println!(
            "{doy:>6} {:>10.3} {:>10.3} {:>7}",
            stats.mean_at(doy, 0, soil),
            stats.std_at(doy, 0, soil),
            stats.count_at(doy, 0)
        );
    }

    // Standardize the held-out test split with the training statistics.
    let z = standardize(&parts.test, &stats)?;
    let extreme_days = (0..z.num_days())
        .filter(|&t| z.value(t, 0, soil).abs() > 2.0)
        .count();
    println!();
    println!(
        "test split: {} days, {extreme_days} with |z| > 2 on soil_water",
        z.num_days()
    );

    // Round trip: destandardizing recovers the raw values.
    let t = z.num_days() / 2;
    let doy = z.day_of_year_at(t);
    let back = stats.destandardize(&[z.value(t, 0, soil)], doy, 1, "soil_water")?[0];
    println!(
        "round trip at {}: raw {:.6} -> z {:+.4} -> raw {:.6}",
        z.date_at(t),
        parts.test.value(t, 0, soil),
        z.value(t, 0, soil),
        back
    );
    Ok(())
}
