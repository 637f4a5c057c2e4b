//! Histograms, scatter data and the results table.

use std::fmt::Write as _;

use crate::models::metrics::{parse_key_values, Metrics, MetricsError};

/// Published `(R², τ)` per feature count 5..=10 for the network.
pub const PUBLISHED_ANN: [(f64, f64); 6] = [
    (0.832, 0.08),
    (0.957, 0.04),
    (0.973, 0.03),
    (0.986, 0.02),
    (0.992, 0.02),
    (0.996, 0.01),
];

/// Published `(R², τ)` per feature count 5..=10 for quadratic regression.
pub const PUBLISHED_REG: [(f64, f64); 6] = [
    (0.809, 0.09),
    (0.926, 0.06),
    (0.939, 0.05),
    (0.947, 0.05),
    (0.959, 0.04),
    (0.966, 0.04),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Ann,
    Reg,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Ann => "ann",
            ModelKind::Reg => "reg",
        }
    }

    pub fn published(&self, b: usize) -> Option<(f64, f64)> {
        let table = match self {
            ModelKind::Ann => &PUBLISHED_ANN,
            ModelKind::Reg => &PUBLISHED_REG,
        };
        b.checked_sub(5).and_then(|k| table.get(k)).copied()
    }
}

impl std::str::FromStr for ModelKind {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ann" => Ok(ModelKind::Ann),
            "reg" => Ok(ModelKind::Reg),
            other => Err(MetricsError::Parse(format!("unknown model kind `{other}`"))),
        }
    }
}

/// One line of a metrics file: `model=<kind> b=<b> r2=… tau=… mu=… mse=… n=…`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub kind: ModelKind,
    pub b: usize,
    pub metrics: Metrics,
}

impl MetricsRecord {
    pub fn to_line(&self) -> String {
        format!("model={} b={} {}", self.kind.as_str(), self.b, self.metrics)
    }

    pub fn parse(line: &str) -> Result<Self, MetricsError> {
        let fields = parse_key_values(line);
        let get = |key: &str| {
            fields
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| MetricsError::Parse(format!("missing key `{key}`")))
        };
        Ok(Self {
            kind: get("model")?.parse()?,
            b: get("b")?
                .parse()
                .map_err(|_| MetricsError::Parse("bad value for `b`".into()))?,
            metrics: line.parse()?,
        })
    }
}

/// Table with columns B, model, R², τ, μ, MSE, n and the published
/// `R²`/`τ` for comparison; rows sorted by B then model kind.
pub fn results_table(records: &[MetricsRecord]) -> String {
    let mut rows: Vec<&MetricsRecord> = records.iter().collect();
    rows.sort_by_key(|r| (r.b, r.kind));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>3}  {:<5} {:>8} {:>8} {:>9} {:>10} {:>9}  {:>9} {:>9}",
        "B", "model", "R2", "tau", "mu", "MSE", "n", "pub_R2", "pub_tau"
    );
    for r in rows {
        let m = &r.metrics;
        let (pub_r2, pub_tau) = r
            .kind
            .published(r.b)
            .map(|(a, b)| (format!("{a:.3}"), format!("{b:.2}")))
            .unwrap_or_else(|| ("-".into(), "-".into()));
        let _ = writeln!(
            out,
            "{:>3}  {:<5} {:>8.4} {:>8.4} {:>9.5} {:>10.3e} {:>9}  {:>9} {:>9}",
            r.b,
            r.kind.as_str(),
            m.r2,
            m.tau,
            m.mu,
            m.mse,
            m.n,
            pub_r2,
            pub_tau
        );
    }
    out
}

/// Fixed-width histogram over `[lo, hi]`; values outside are clamped into
/// the first or last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: impl IntoIterator<Item = f64>, bins: usize, lo: f64, hi: f64) -> Self {
        assert!(bins > 0 && hi > lo, "histogram needs bins and a non-empty range");
        let mut counts = vec![0u64; bins];
        let width = (hi - lo) / bins as f64;
        for v in values {
            if !v.is_finite() {
                continue;
            }
            let k = ((v - lo) / width).floor();
            let k = if k < 0.0 { 0 } else { (k as usize).min(bins - 1) };
            counts[k] += 1;
        }
        Self { lo, hi, counts }
    }

    /// Symmetric range `[-m, m]` around zero with `m` the largest magnitude.
    pub fn symmetric(values: &[f64], bins: usize) -> Self {
        let m = values
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(1e-12);
        Self::new(values.iter().copied(), bins, -m, m)
    }

    pub fn bin_edges(&self, k: usize) -> (f64, f64) {
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + width * k as f64, self.lo + width * (k + 1) as f64)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `bin_lo,bin_hi,count` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            let (a, b) = self.bin_edges(k);
            let _ = writeln!(out, "{a},{b},{c}");
        }
        out
    }

    /// Text bar chart, one line per bin.
    pub fn render(&self, width: usize) -> String {
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1);
        let mut out = String::new();
        for (k, &c) in self.counts.iter().enumerate() {
            let (a, b) = self.bin_edges(k);
            let bar = "#".repeat((c as usize * width).div_ceil(max as usize));
            let _ = writeln!(out, "[{a:>6.3}, {b:>6.3}) {c:>9} {bar}");
        }
        out
    }
}

/// `n_a,n_p` rows with a header.
pub fn scatter_csv(actual: &[f64], predicted: &[f64]) -> String {
    let mut out = String::from("n_a,n_p\n");
    for (a, p) in actual.iter().zip(predicted) {
        let _ = writeln!(out, "{a},{p}");
    }
    out
}

/// Fraction of values below `threshold`.
pub fn fraction_below(values: &[f64], threshold: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v < threshold).count() as f64 / values.len() as f64
}
