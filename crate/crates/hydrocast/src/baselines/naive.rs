//! Naive last-timestep baseline: repeat the final observed response values
//! for every output step.

use crate::error::{Error, Result};
use crate::window::WindowSpec;

/// Persistence forecast: every output row equals the response components of
/// the last input timestep. Requires the responses to be present among the
/// predictors (otherwise the window does not carry them).
pub fn naive_forecast(window: &[f64], spec: &WindowSpec) -> Result<Vec<f64>> {
    let p = spec.num_predictors();
    let expect = spec.input_steps * p;
    if window.len() != expect {
        return Err(Error::DimensionMismatch(format!(
            "window has {} values, spec implies {expect}",
            window.len()
        )));
    }
    let mut positions = Vec::with_capacity(spec.responses.len());
    for response in &spec.responses {
        let pos = spec
            .predictors
            .iter()
            .position(|name| name == response)
            .ok_or_else(|| Error::ResponseNotInPredictors(response.clone()))?;
        positions.push(pos);
    }
    let last = &window[(spec.input_steps - 1) * p..];
    let row: Vec<f64> = positions.iter().map(|&pos| last[pos]).collect();
    let mut out = Vec::with_capacity(spec.output_steps * row.len());
    for _ in 0..spec.output_steps {
        out.extend_from_slice(&row);
    }
    Ok(out)
}
