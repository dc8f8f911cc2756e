//! Reference baselines evaluated on the same standardized, reduced,
//! windowed data as the recurrent model.

pub mod arima;
pub mod naive;

pub use arima::{arima_fit, arima_forecast, ArimaModel, ArimaOrder};
pub use naive::naive_forecast;
