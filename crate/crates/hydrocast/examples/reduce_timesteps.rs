//! Channelized timestep reduction: coarsen a daily series into w-day means
//! while keeping sliding-window contiguity through w/s offset channels.
//!
//! ```bash
//! cargo run --release --example reduce_timesteps
//! ```

use hydrocast::reduce::{operation_ratio, reduce, ReductionConfig};
use hydrocast::synth::{generate, SynthConfig};

fn main() -> hydrocast::Result<()> {
    let series = generate(&SynthConfig { n_days: 730, seed: 3, ..SynthConfig::default() })?;

    let config = ReductionConfig::new(7, 1)?;
    let reduced = reduce(&series, &config)?;
    println!(
        "daily series of {} days -> {} channels at weekly granularity:",
        series.num_days(),
        reduced.channels.len()
    );
    for channel in &reduced.channels {
        println!(
            "  channel {} starts {} (day offset {}), {} reduced timesteps",
            channel.channel_id,
            channel.start_date,
            channel.offset_days,
            channel.len()
        );
    }

    println!();
    println!("per-epoch training cost relative to daily data:");
    println!("{:>4} {:>4} {:>12} {:>10}", "w", "s", "timesteps", "ratio");
    for (w, s) in [(1, 1), (7, 1), (7, 7), (14, 1), (14, 14), (28, 1), (28, 28)] {
        let ratio = operation_ratio(w, s)?;
        println!("{w:>4} {s:>4} {:>12} {:>10}", format!("{}->{}", 84 / w, 28 / w), ratio);
    }
    Ok(())
}
