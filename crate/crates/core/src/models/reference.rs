//! Published quadratic coefficient vectors, bundled as data files.

use super::quadratic::{QuadraticError, QuadraticModel};

const THETA_TEXT: [&str; 6] = [
    include_str!("../../data/theta_05.txt"),
    include_str!("../../data/theta_06.txt"),
    include_str!("../../data/theta_07.txt"),
    include_str!("../../data/theta_08.txt"),
    include_str!("../../data/theta_09.txt"),
    include_str!("../../data/theta_10.txt"),
];

/// Raw text of the bundled θ list for `b` features.
pub fn published_theta_text(b: usize) -> Option<&'static str> {
    (5..=10).contains(&b).then(|| THETA_TEXT[b - 5])
}

/// Published model for `b` features.
pub fn published_model(b: usize) -> Result<QuadraticModel, QuadraticError> {
    let text = published_theta_text(b).ok_or(QuadraticError::FeatureCount(b))?;
    QuadraticModel::from_text(text)
}
