//! Sliding-window sample extraction from reduced channels, plus
//! deterministic mini-batch iteration.
//!
//! ```bash
//! cargo run --release --example extract_windows
//! ```

use hydrocast::reduce::{reduce, ReductionConfig};
use hydrocast::standardize::{fit_stats, standardize};
use hydrocast::synth::{generate, SynthConfig};
use hydrocast::window::{extract_windows, WindowSpec};

fn main() -> hydrocast::Result<()> {
    let series = generate(&SynthConfig { n_days: 1461, seed: 11, ..SynthConfig::default() })?;
    let stats = fit_stats(&series)?;
    let z = standardize(&series, &stats)?;
    let channels = reduce(&z, &ReductionConfig::new(7, 1)?)?;

    let spec = WindowSpec::new(
        12,
        4,
        hydrocast::default_predictors(),
        hydrocast::default_responses(),
    )?;
    let dataset = extract_windows(&channels, &spec)?;

    println!(
        "{} samples pooled from {} channels (I={} steps x P={} predictors in, \
         O={} x R={} out)",
        dataset.len(),
        channels.channels.len(),
        dataset.input_steps(),
        dataset.num_predictors(),
        dataset.output_steps(),
        dataset.num_responses()
    );

    let n = dataset.len() / 2;
    let prov = dataset.provenance(n);
    println!();
    println!(
        "sample {n}: channel {}, subbasin {}, starts {} at reduced index {}",
        prov.channel_id, prov.subbasin_id, prov.start_date, prov.start_index
    );
    println!(
        "  covers {} input days, predicts {} output days starting {}",
        dataset.input_steps() * dataset.window_days(),
        dataset.output_steps() * dataset.window_days(),
        dataset.output_date(n, 0)
    );
    let input = dataset.input(n);
    let p = dataset.num_predictors();
    println!("  first input step: {:?}", &input[..p]);
    println!("  targets: {:?}", dataset.target(n));

    println!();
    let batches = dataset.batches(128, 9)?;
    let sizes: Vec<usize> = batches.iter().map(Vec::len).collect();
    println!("batch sizes with seed 9: {sizes:?}");
    Ok(())
}
