//! Verify the hand-written backpropagation through time against central
//! finite differences on a small random model.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use hydrocast::nn::{BlstmConfig, BlstmModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hydrocast::Result<()> {
    let config = BlstmConfig {
        num_predictors: 4,
        hidden: 6,
        input_steps: 8,
        output_steps: 3,
        num_responses: 2,
    };
    let mut model = BlstmModel::init(config, 123)?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inputs: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let targets: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let input_refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let target_refs: Vec<&[f64]> = targets.iter().map(Vec::as_slice).collect();

    let (grads, loss) = model.backward(&input_refs, &target_refs)?;
    println!("batch of 3, loss {loss:.6}; comparing every analytic gradient");
    println!("against (loss(p+h) - loss(p-h)) / 2h with h = 1e-5:");
    println!();

    let analytic: Vec<(String, Vec<f64>)> = grads
        .param_entries()
        .iter()
        .map(|entry| (entry.name.clone(), entry.values.to_vec()))
        .collect();

    let step = 1e-5;
    let mut total = 0usize;
    let mut worst = 0.0_f64;
    let mut worst_name = String::new();
    for (p_idx, (name, grad)) in analytic.iter().enumerate() {
        let mut param_worst = 0.0_f64;
        for v_idx in 0..grad.len() {
            let original = model.param_entries()[p_idx].values[v_idx];
            model.param_entries_mut()[p_idx].values[v_idx] = original + step;
            let up = model.batch_loss(&input_refs, &target_refs)?;
            model.param_entries_mut()[p_idx].values[v_idx] = original - step;
            let down = model.batch_loss(&input_refs, &target_refs)?;
            model.param_entries_mut()[p_idx].values[v_idx] = original;

            let numeric = (up - down) / (2.0 * step);
            let diff = (grad[v_idx] - numeric).abs();
            let rel = diff / grad[v_idx].abs().max(numeric.abs()).max(1e-8);
            param_worst = param_worst.max(rel);
            total += 1;
        }
        if param_worst > worst {
            worst = param_worst;
            worst_name = name.clone();
        }
        println!("  {name:<14} max relative error {param_worst:.3e}");
    }
    println!();
    println!("{total} parameters checked; worst {worst:.3e} ({worst_name})");
    Ok(())
}
