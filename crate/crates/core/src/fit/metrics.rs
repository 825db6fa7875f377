use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum MetricError {
    #[error("length mismatch: {0} targets, {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("no data")]
    Empty,
    #[error("R² is undefined for a target with zero variance")]
    ZeroVariance,
}

fn check(y: &[f64], yhat: &[f64]) -> Result<(), MetricError> {
    if y.len() != yhat.len() {
        return Err(MetricError::LengthMismatch(y.len(), yhat.len()));
    }
    if y.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

fn total_sum_of_squares(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// `1 - Σ(y-ŷ)² / Σ(y-ȳ)²`.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat)?;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    r_squared_from_sse(y, sse).ok_or(MetricError::ZeroVariance)
}

pub(crate) fn r_squared_from_sse(y: &[f64], sse: f64) -> Option<f64> {
    let sst = total_sum_of_squares(y);
    (sst > 0.0).then(|| 1.0 - sse / sst)
}

pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}
