//! Generate a synthetic multi-subbasin daily series and write it as CSV.
//!
//! ```bash
//! cargo run --release --example generate_data -- [output.csv]
//! ```

use hydrocast::synth::{generate, SynthConfig};

fn main() -> hydrocast::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic.csv".to_string());

    let config = SynthConfig {
        n_days: 3653, // ten years
        n_subbasins: 3,
        seed: 42,
        subbasin_scales: vec![1.0, 2.5, 0.6],
        ..SynthConfig::default()
    };
    let series = generate(&config)?;
    series.write_csv_file(&out)?;

    println!(
        "wrote {out}: {} days x {} subbasins x {} features",
        series.num_days(),
        series.num_subbasins(),
        series.num_features()
    );
    println!("dates {} .. {}", series.start_date(), series.end_date());
    println!();
    println!("first week of subbasin 1:");
    println!("{:<12} {:>10} {:>9} {:>9} {:>11} {:>12}", "date", "precip", "temp_min", "temp_max", "soil_water", "stream_flow");
    for t in 0..7 {
        print!("{:<12}", series.date_at(t));
        for f in 0..series.num_features() {
            print!(" {:>9.3}", series.value(t, 0, f));
        }
        println!();
    }
    Ok(())
}
