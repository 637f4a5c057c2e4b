//! Quadratic regression `N_p = θ · x⃗` over the expanded feature vector
//! `x⃗ = (1, x1..xB, x1², x1x2, .., x1xB, x2², .., xB²)`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::measurement::{MAX_FEATURES, MIN_FEATURES};

/// Ridge penalty added to the least-squares objective for conditioning.
pub const RIDGE: f64 = 1e-10;
/// Upper bound on `‖Xᵀ(Xθ − y)‖∞ / n` accepted after a fit.
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadraticError {
    #[error("feature count {0} outside {MIN_FEATURES}..={MAX_FEATURES}")]
    FeatureCount(usize),
    #[error("theta has {actual} entries, expected {expected} for b={b}")]
    ThetaLength { b: usize, expected: usize, actual: usize },
    #[error("input has {actual} features, model expects at least {expected}")]
    InputLength { expected: usize, actual: usize },
    #[error("need at least {needed} training rows for b={b}, got {actual}")]
    TooFewRows { b: usize, needed: usize, actual: usize },
    #[error("{rows} rows but {targets} targets")]
    TargetCount { rows: usize, targets: usize },
    #[error("non-finite value in training row {0}")]
    NonFinite(usize),
    #[error("design matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },
    #[error("least-squares residual gradient {gradient:e} exceeds tolerance")]
    Conditioning { gradient: f64 },
    #[error("malformed theta list: {0}")]
    Parse(String),
}

/// Length of the expanded vector for `b` features: `1 + b + b(b+1)/2`.
pub fn parameter_count(b: usize) -> usize {
    1 + b + b * (b + 1) / 2
}

/// Writes the expansion of `x` into `out`, which must have length
/// `parameter_count(x.len())`.
pub fn expand_into(x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), parameter_count(x.len()));
    out[0] = 1.0;
    out[1..=x.len()].copy_from_slice(x);
    let mut k = 1 + x.len();
    for i in 0..x.len() {
        for j in i..x.len() {
            out[k] = x[i] * x[j];
            k += 1;
        }
    }
}

pub fn expand_quadratic(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; parameter_count(x.len())];
    expand_into(x, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    b: usize,
    theta: Vec<f64>,
}

impl QuadraticModel {
    pub fn new(b: usize, theta: Vec<f64>) -> Result<Self, QuadraticError> {
        check_b(b)?;
        let expected = parameter_count(b);
        if theta.len() != expected {
            return Err(QuadraticError::ThetaLength {
                b,
                expected,
                actual: theta.len(),
            });
        }
        Ok(Self { b, theta })
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Least-squares fit using the first `b` entries of every row.
    ///
    /// Solves the ridge-augmented system `[X; √λ I] θ ≈ [y; 0]` with
    /// Householder QR, `λ = RIDGE`.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R], targets: &[f64], b: usize) -> Result<Self, QuadraticError> {
        check_b(b)?;
        let p = parameter_count(b);
        let n = rows.len();
        if targets.len() != n {
            return Err(QuadraticError::TargetCount { rows: n, targets: targets.len() });
        }
        if n < 2 * p {
            return Err(QuadraticError::TooFewRows { b, needed: 2 * p, actual: n });
        }

        // Column-major (n + p) × p design with the ridge block underneath.
        let m = n + p;
        let mut design = vec![0.0; m * p];
        let mut rhs = vec![0.0; m];
        let mut expanded = vec![0.0; p];
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() < b {
                return Err(QuadraticError::InputLength { expected: b, actual: row.len() });
            }
            if !row[..b].iter().all(|v| v.is_finite()) || !targets[i].is_finite() {
                return Err(QuadraticError::NonFinite(i));
            }
            expand_into(&row[..b], &mut expanded);
            for (j, &v) in expanded.iter().enumerate() {
                design[j * m + i] = v;
            }
            rhs[i] = targets[i];
        }
        let ridge = RIDGE.sqrt();
        for j in 0..p {
            design[j * m + n + j] = ridge;
        }

        let theta = householder_solve(&mut design, &mut rhs, m, p)?;
        let model = Self { b, theta };
        let gradient = model.residual_gradient(rows, targets);
        if !(gradient < GRADIENT_TOLERANCE) {
            return Err(QuadraticError::Conditioning { gradient });
        }
        Ok(model)
    }

    /// `‖Xᵀ(Xθ − y)‖∞ / n` on the given data.
    pub fn residual_gradient<R: AsRef<[f64]>>(&self, rows: &[R], targets: &[f64]) -> f64 {
        let p = self.theta.len();
        let mut grad = vec![0.0; p];
        let mut expanded = vec![0.0; p];
        for (row, &y) in rows.iter().zip(targets) {
            expand_into(&row.as_ref()[..self.b], &mut expanded);
            let r = dot(&expanded, &self.theta) - y;
            for (g, &x) in grad.iter_mut().zip(&expanded) {
                *g += x * r;
            }
        }
        let n = rows.len().max(1) as f64;
        grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs())) / n
    }

    /// Unclipped `θ · x⃗`; used for scoring.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64, QuadraticError> {
        if x.len() < self.b {
            return Err(QuadraticError::InputLength { expected: self.b, actual: x.len() });
        }
        Ok(dot(&expand_quadratic(&x[..self.b]), &self.theta))
    }

    /// Prediction clipped into `[0, 1]`.
    pub fn predict(&self, x: &[f64]) -> Result<f64, QuadraticError> {
        Ok(self.predict_raw(x)?.clamp(0.0, 1.0))
    }

    /// Plain-text θ list: a `#` header line, then one value per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("# quadratic negativity model b={} params={}\n", self.b, self.theta.len());
        for t in &self.theta {
            let _ = writeln!(out, "{t:.17e}");
        }
        out
    }

    /// Parses a θ list. Values may be separated by commas, whitespace or
    /// newlines and optionally wrapped in parentheses; lines starting with
    /// `#` are comments. `b` is inferred from the number of values.
    pub fn from_text(text: &str) -> Result<Self, QuadraticError> {
        let mut theta = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.starts_with('#') {
                continue;
            }
            for tok in line
                .split(|c: char| c == ',' || c.is_whitespace() || c == '(' || c == ')')
                .filter(|t| !t.is_empty())
            {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| QuadraticError::Parse(format!("not a number: `{tok}`")))?;
                theta.push(v);
            }
        }
        let b = (MIN_FEATURES..=MAX_FEATURES)
            .find(|&b| parameter_count(b) == theta.len())
            .ok_or_else(|| QuadraticError::Parse(format!("{} values match no feature count", theta.len())))?;
        Self::new(b, theta)
    }
}

fn check_b(b: usize) -> Result<(), QuadraticError> {
    if (MIN_FEATURES..=MAX_FEATURES).contains(&b) {
        Ok(())
    } else {
        Err(QuadraticError::FeatureCount(b))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `‖A θ − y‖` for column-major `A` (m × p, m ≥ p). Overwrites
/// both inputs.
fn householder_solve(a: &mut [f64], y: &mut [f64], m: usize, p: usize) -> Result<Vec<f64>, QuadraticError> {
    let mut diag = vec![0.0; p];
    for k in 0..p {
        let col = &mut a[k * m..(k + 1) * m];
        let norm = col[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(QuadraticError::RankDeficient { column: k });
        }
        let alpha = if col[k] > 0.0 { -norm } else { norm };
        // v = x − α e_k stored in place; H = I − 2 v vᵀ / (vᵀ v)
        col[k] -= alpha;
        let vtv = col[k..].iter().map(|v| v * v).sum::<f64>();
        diag[k] = alpha;

        let (head, tail) = a.split_at_mut((k + 1) * m);
        let v = &head[k * m + k..(k + 1) * m];
        for j in 0..(p - k - 1) {
            let target = &mut tail[j * m + k..(j + 1) * m];
            let s = 2.0 * dot(v, target) / vtv;
            for (t, &vi) in target.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
        let s = 2.0 * dot(v, &y[k..]) / vtv;
        for (t, &vi) in y[k..].iter_mut().zip(v) {
            *t -= s * vi;
        }
    }

    let mut theta = vec![0.0; p];
    for k in (0..p).rev() {
        let mut acc = y[k];
        for j in (k + 1)..p {
            acc -= a[j * m + k] * theta[j];
        }
        theta[k] = acc / diag[k];
    }
    Ok(theta)
}
