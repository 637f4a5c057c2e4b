//! Predictors from collective probabilities to negativity, and the
//! metrics used to score them.

pub mod metrics;
pub mod mlp;
pub mod quadratic;
pub mod reference;

pub use metrics::{Metrics, MetricsError};
pub use mlp::{MlpError, MlpModel, TrainConfig, TrainedMlp};
pub use quadratic::{QuadraticError, QuadraticModel};
