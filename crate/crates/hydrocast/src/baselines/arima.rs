//! Autoregressive forecasting with differencing: AR(p) coefficients fitted
//! by conditional least squares on a d-times differenced series, recursive
//! multi-step forecasts integrated back to the original scale.
//!
//! The moving-average order is fixed to zero; estimating MA terms needs
//! nonlinear optimization and adds nothing to the model's comparative role
//! here.

use crate::error::{Error, Result};

/// (p, d, q) order with q pinned to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidConfig("AR order p must be >= 1".into()));
        }
        if d > 2 {
            return Err(Error::InvalidConfig(format!("differencing order d={d} exceeds 2")));
        }
        if q != 0 {
            return Err(Error::InvalidConfig("moving-average order q must be 0".into()));
        }
        Ok(Self { p, d, q })
    }

    /// Parse a `p,d,q` flag value.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(format!("order '{text}' is not 'p,d,q'")));
        }
        let mut nums = [0usize; 3];
        for (slot, part) in nums.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|e| Error::InvalidConfig(format!("bad order component '{part}': {e}")))?;
        }
        Self::new(nums[0], nums[1], nums[2])
    }

    /// Minimum history length accepted by [`arima_fit`]: at least ten
    /// regression rows after lagging and differencing.
    pub fn min_history(&self) -> usize {
        self.p + self.d + 10
    }
}

impl Default for ArimaOrder {
    fn default() -> Self {
        Self { p: 5, d: 1, q: 0 }
    }
}

/// A fitted AR-with-differencing model for a single series.
#[derive(Debug, Clone, PartialEq)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    /// AR coefficients, lag 1 first.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

fn difference(series: &[f64], times: usize) -> Vec<f64> {
    let mut z = series.to_vec();
    for _ in 0..times {
        z = z.windows(2).map(|w| w[1] - w[0]).collect();
    }
    z
}

/// Fit by ordinary least squares on lagged values of the differenced series.
pub fn arima_fit(history: &[f64], order: ArimaOrder) -> Result<ArimaModel> {
    let order = ArimaOrder::new(order.p, order.d, order.q)?;
    if history.len() < order.min_history() {
        return Err(Error::HistoryTooShort {
            required: order.min_history(),
            actual: history.len(),
        });
    }
    if history.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("AR fit history".into()));
    }
    let z = difference(history, order.d);
    let p = order.p;

    // A fully differenced-away series (constant input under d >= 1) has an
    // exactly zero regression problem: the zero model is its least-squares
    // solution.
    if z.iter().all(|&v| v == 0.0) {
        return Ok(ArimaModel { order, coefficients: vec![0.0; p], intercept: 0.0 });
    }

    // Normal equations for the design [1, z_{t-1}, ..., z_{t-p}].
    let dim = p + 1;
    let mut ata = vec![0.0; dim * dim];
    let mut atb = vec![0.0; dim];
    let mut row = vec![0.0; dim];
    for t in p..z.len() {
        row[0] = 1.0;
        for lag in 1..=p {
            row[lag] = z[t - lag];
        }
        for i in 0..dim {
            atb[i] += row[i] * z[t];
            for j in 0..dim {
                ata[i * dim + j] += row[i] * row[j];
            }
        }
    }

    let solution = solve_symmetric(&mut ata, &mut atb, dim)?;
    Ok(ArimaModel { order, coefficients: solution[1..].to_vec(), intercept: solution[0] })
}

/// Gaussian elimination with partial pivoting; `a` is `dim x dim` row-major.
fn solve_symmetric(a: &mut [f64], b: &mut [f64], dim: usize) -> Result<Vec<f64>> {
    let scale = a
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..dim {
        let pivot_row = (col..dim)
            .max_by(|&r1, &r2| {
                a[r1 * dim + col]
                    .abs()
                    .partial_cmp(&a[r2 * dim + col].abs())
                    .expect("finite pivots")
            })
            .expect("nonempty range");
        if a[pivot_row * dim + col].abs() < 1e-12 * scale {
            return Err(Error::SingularFit);
        }
        if pivot_row != col {
            for k in 0..dim {
                a.swap(col * dim + k, pivot_row * dim + k);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * dim + col];
        for r in (col + 1)..dim {
            let factor = a[r * dim + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..dim {
                a[r * dim + k] -= factor * a[col * dim + k];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; dim];
    for col in (0..dim).rev() {
        let mut acc = b[col];
        for k in (col + 1)..dim {
            acc -= a[col * dim + k] * x[k];
        }
        x[col] = acc / a[col * dim + col];
    }
    Ok(x)
}

/// Recursive multi-step forecast: predictions feed back as inputs, then the
/// differencing is inverted to return forecasts on the original scale.
pub fn arima_forecast(model: &ArimaModel, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let (p, d) = (model.order.p, model.order.d);
    if history.len() < p + d {
        return Err(Error::HistoryTooShort { required: p + d, actual: history.len() });
    }

    // Differenced levels 0..=d; level 0 is the raw history.
    let mut levels = Vec::with_capacity(d + 1);
    levels.push(history.to_vec());
    for k in 0..d {
        let next = difference(&levels[k], 1);
        levels.push(next);
    }

    // Forecast the fully differenced series.
    let z = &levels[d];
    let mut state: Vec<f64> = z[z.len() - p..].to_vec();
    let mut forecast = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let mut next = model.intercept;
        for (lag, phi) in model.coefficients.iter().enumerate() {
            next += phi * state[state.len() - 1 - lag];
        }
        state.push(next);
        state.remove(0);
        forecast.push(next);
    }

    // Integrate back up through the differencing levels.
    for k in (0..d).rev() {
        let mut value = *levels[k].last().expect("nonempty level");
        for f in &mut forecast {
            value += *f;
            *f = value;
        }
    }
    Ok(forecast)
}
