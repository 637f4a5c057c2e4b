use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("actual and predicted lengths differ ({actual} vs {predicted})")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("cannot score an empty prediction set")]
    Empty,
    #[error("actual values are constant; R² is undefined")]
    ZeroVariance,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("malformed metrics record: {0}")]
    Parse(String),
}

/// Scores of predicted against exact negativity.
///
/// `r2 = 1 − SS_res/SS_tot`, `mu` is the mean residual `N_A − N_p`, `tau`
/// the population standard deviation of the residuals and `mse` the mean
/// squared residual, so `tau² + mu² = mse`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub r2: f64,
    pub tau: f64,
    pub mu: f64,
    pub mse: f64,
    pub n: usize,
}

impl Metrics {
    pub fn compute(actual: &[f64], predicted: &[f64]) -> Result<Self, MetricsError> {
        if actual.len() != predicted.len() {
            return Err(MetricsError::LengthMismatch {
                actual: actual.len(),
                predicted: predicted.len(),
            });
        }
        if actual.is_empty() {
            return Err(MetricsError::Empty);
        }
        if let Some(i) = actual
            .iter()
            .zip(predicted)
            .position(|(a, p)| !a.is_finite() || !p.is_finite())
        {
            return Err(MetricsError::NonFinite(i));
        }
        let n = actual.len() as f64;
        let mean_actual = actual.iter().sum::<f64>() / n;
        let ss_tot: f64 = actual.iter().map(|a| (a - mean_actual).powi(2)).sum();
        if ss_tot == 0.0 {
            return Err(MetricsError::ZeroVariance);
        }
        let residuals: Vec<f64> = actual.iter().zip(predicted).map(|(a, p)| a - p).collect();
        let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
        let mu = residuals.iter().sum::<f64>() / n;
        let variance = residuals.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / n;
        Ok(Self {
            r2: 1.0 - ss_res / ss_tot,
            tau: variance.sqrt(),
            mu,
            mse: ss_res / n,
            n: actual.len(),
        })
    }
}

impl fmt::Display for Metrics {
    /// One-line `key=value` record.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "r2={:.17e} tau={:.17e} mu={:.17e} mse={:.17e} n={}",
            self.r2, self.tau, self.mu, self.mse, self.n
        )
    }
}

impl FromStr for Metrics {
    type Err = MetricsError;

    /// Reads the keys written by `Display`; other keys are ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fields = parse_key_values(s);
        let get = |key: &str| -> Result<&str, MetricsError> {
            fields
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| MetricsError::Parse(format!("missing key `{key}`")))
        };
        let float = |key: &str| -> Result<f64, MetricsError> {
            get(key)?
                .parse()
                .map_err(|_| MetricsError::Parse(format!("bad value for `{key}`")))
        };
        Ok(Self {
            r2: float("r2")?,
            tau: float("tau")?,
            mu: float("mu")?,
            mse: float("mse")?,
            n: get("n")?
                .parse()
                .map_err(|_| MetricsError::Parse("bad value for `n`".into()))?,
        })
    }
}

/// Splits `a=1 b=x` into pairs, skipping tokens without `=`.
pub fn parse_key_values(line: &str) -> Vec<(&str, &str)> {
    line.split_whitespace().filter_map(|tok| tok.split_once('=')).collect()
}
