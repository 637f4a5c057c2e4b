//! Two-copy collective measurements.
//!
//! A configuration picks one tetrahedral element `Π_x` for the outer qubit
//! of the first copy and one `Π_y` for the outer qubit of the second copy,
//! while the two inner qubits are projected onto the singlet. The recorded
//! value is the conditional probability
//!
//! ```text
//! P_xy = Tr[ρ4 (Π_x ⊗ Π_Bell ⊗ Π_y)] / Tr[ρ4 (Π_x ⊗ 1 ⊗ Π_y)]
//! ```

use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{pauli, ComplexMatrix};
use crate::states::{build_rho4, singlet_ket, DensityMatrix, FourQubitState};

/// Denominators below this are treated as a vanishing local projection.
pub const DENOMINATOR_THRESHOLD: f64 = 1e-12;
/// Slack allowed when checking that a probability lies in `[0, 1]`.
pub const RANGE_TOLERANCE: f64 = 1e-12;

pub const MIN_FEATURES: usize = 5;
pub const MAX_FEATURES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasurementError {
    #[error("configuration {cfg}: local projections annihilate the state (denominator {denominator:e})")]
    VanishingDenominator { cfg: MeasurementConfig, denominator: f64 },
    #[error("projector index {0} outside 1..=4")]
    ProjectorIndex(u8),
    #[error("feature count {0} outside {MIN_FEATURES}..={MAX_FEATURES}")]
    FeatureCount(usize),
    #[error("probability {value} at position {position} is not finite or outside [0, 1]")]
    ProbabilityRange { position: usize, value: f64 },
    #[error("operator of dimension {0} cannot act on a single qubit")]
    NotSingleQubit(usize),
}

/// Tetrahedral single-qubit POVM element `(σ0 + n·σ/√3)/4`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalProjector {
    pub index: u8,
    pub mat: ComplexMatrix,
}

/// Sign patterns of `(σx, σy, σz)` for `Π_1..Π_4`.
const TETRAHEDRON: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];

pub fn tetrahedral_projectors() -> [LocalProjector; 4] {
    let inv_sqrt3 = 1.0 / 3f64.sqrt();
    let paulis = [pauli::x(), pauli::y(), pauli::z()];
    std::array::from_fn(|k| {
        let mut mat = pauli::identity();
        for (sign, sigma) in TETRAHEDRON[k].iter().zip(&paulis) {
            mat = mat
                .add(&sigma.scale(Complex64::new(sign * inv_sqrt3, 0.0)))
                .expect("2x2");
        }
        LocalProjector {
            index: k as u8 + 1,
            mat: mat.scale(Complex64::new(0.25, 0.0)),
        }
    })
}

/// Projector onto `|Ψ⁻⟩ = (|01⟩ − |10⟩)/√2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BellProjector {
    pub mat: ComplexMatrix,
}

pub fn bell_projector() -> BellProjector {
    BellProjector {
        mat: ComplexMatrix::projector(&singlet_ket()),
    }
}

/// Unordered pair of projector indices, stored with `x <= y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MeasurementConfig {
    x: u8,
    y: u8,
}

impl MeasurementConfig {
    pub fn new(x: u8, y: u8) -> Result<Self, MeasurementError> {
        for i in [x, y] {
            if !(1..=4).contains(&i) {
                return Err(MeasurementError::ProjectorIndex(i));
            }
        }
        Ok(Self {
            x: x.min(y),
            y: x.max(y),
        })
    }

    const fn pair(x: u8, y: u8) -> Self {
        Self { x, y }
    }

    pub fn x(&self) -> u8 {
        self.x
    }

    pub fn y(&self) -> u8 {
        self.y
    }

    /// Column label used in dataset files, e.g. `p13`.
    pub fn label(&self) -> String {
        format!("p{}{}", self.x, self.y)
    }
}

impl fmt::Display for MeasurementConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Π{}⊗Π{}", self.x, self.y)
    }
}

/// All ten configurations in feature order. The first `b` entries are the
/// configurations used for `b` features.
pub const FEATURE_ORDER: [MeasurementConfig; 10] = [
    MeasurementConfig::pair(1, 1),
    MeasurementConfig::pair(2, 2),
    MeasurementConfig::pair(3, 3),
    MeasurementConfig::pair(4, 4),
    MeasurementConfig::pair(1, 3),
    MeasurementConfig::pair(2, 4),
    MeasurementConfig::pair(1, 4),
    MeasurementConfig::pair(1, 2),
    MeasurementConfig::pair(2, 3),
    MeasurementConfig::pair(3, 4),
];

/// Ordered collective probabilities fed to a model.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    /// Validates length and range; values within [`RANGE_TOLERANCE`] of the
    /// unit interval are clamped onto it.
    pub fn new(mut values: Vec<f64>) -> Result<Self, MeasurementError> {
        if !(MIN_FEATURES..=MAX_FEATURES).contains(&values.len()) {
            return Err(MeasurementError::FeatureCount(values.len()));
        }
        for (position, v) in values.iter_mut().enumerate() {
            *v = checked_probability(*v).ok_or(MeasurementError::ProbabilityRange { position, value: *v })?;
        }
        Ok(Self { values })
    }

    pub fn b(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn checked_probability(v: f64) -> Option<f64> {
    if v.is_finite() && (-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&v) {
        Some(v.clamp(0.0, 1.0))
    } else {
        None
    }
}

/// Projector set plus the 16×16 numerator and denominator operators for
/// every configuration, built once.
pub struct CollectiveMeasurement {
    projectors: [LocalProjector; 4],
    bell: BellProjector,
    numerators: Vec<ComplexMatrix>,
    denominators: Vec<ComplexMatrix>,
}

impl CollectiveMeasurement {
    pub fn new() -> Self {
        let projectors = tetrahedral_projectors();
        let bell = bell_projector();
        let identity4 = ComplexMatrix::identity(4);
        let mut numerators = Vec::with_capacity(16);
        let mut denominators = Vec::with_capacity(16);
        for x in &projectors {
            for y in &projectors {
                numerators.push(x.mat.kron(&bell.mat).kron(&y.mat));
                denominators.push(x.mat.kron(&identity4).kron(&y.mat));
            }
        }
        Self {
            projectors,
            bell,
            numerators,
            denominators,
        }
    }

    /// Process-wide shared instance.
    pub fn shared() -> &'static Self {
        static SHARED: OnceLock<CollectiveMeasurement> = OnceLock::new();
        SHARED.get_or_init(Self::new)
    }

    pub fn projectors(&self) -> &[LocalProjector; 4] {
        &self.projectors
    }

    pub fn bell(&self) -> &BellProjector {
        &self.bell
    }

    /// `P_xy` for ordered local projector indices.
    pub fn probability(&self, rho4: &FourQubitState, cfg: MeasurementConfig) -> Result<f64, MeasurementError> {
        let slot = (cfg.x as usize - 1) * 4 + (cfg.y as usize - 1);
        ratio(rho4, &self.numerators[slot], &self.denominators[slot], cfg)
    }

    /// All ten probabilities in [`FEATURE_ORDER`].
    pub fn all_probabilities(&self, rho: &DensityMatrix) -> Result<[f64; 10], MeasurementError> {
        let rho4 = build_rho4(rho);
        let mut out = [0.0; 10];
        for (slot, cfg) in out.iter_mut().zip(FEATURE_ORDER) {
            *slot = self.probability(&rho4, cfg)?;
        }
        Ok(out)
    }
}

impl Default for CollectiveMeasurement {
    fn default() -> Self {
        Self::new()
    }
}

fn ratio(
    rho4: &FourQubitState,
    numerator_op: &ComplexMatrix,
    denominator_op: &ComplexMatrix,
    cfg: MeasurementConfig,
) -> Result<f64, MeasurementError> {
    let mat = rho4.matrix();
    let numerator = mat.trace_of_product(numerator_op).expect("16x16").re;
    let denominator = mat.trace_of_product(denominator_op).expect("16x16").re;
    if !(denominator > DENOMINATOR_THRESHOLD) {
        return Err(MeasurementError::VanishingDenominator { cfg, denominator });
    }
    let p = numerator / denominator;
    checked_probability(p).ok_or(MeasurementError::ProbabilityRange { position: 0, value: p })
}

/// `P_xy` for one configuration.
pub fn collective_probability(rho4: &FourQubitState, cfg: MeasurementConfig) -> Result<f64, MeasurementError> {
    CollectiveMeasurement::shared().probability(rho4, cfg)
}

/// `P_xy` with arbitrary single-qubit operators in the local slots.
pub fn collective_probability_with(
    rho4: &FourQubitState,
    local_x: &ComplexMatrix,
    local_y: &ComplexMatrix,
) -> Result<f64, MeasurementError> {
    for op in [local_x, local_y] {
        if op.dim() != 2 {
            return Err(MeasurementError::NotSingleQubit(op.dim()));
        }
    }
    let bell = bell_projector();
    let numerator = local_x.kron(&bell.mat).kron(local_y);
    let denominator = local_x.kron(&ComplexMatrix::identity(4)).kron(local_y);
    // the config only labels errors here
    ratio(rho4, &numerator, &denominator, MeasurementConfig::pair(0, 0))
}

/// First `b` probabilities of [`FEATURE_ORDER`] for `rho`.
pub fn feature_vector(rho: &DensityMatrix, b: usize) -> Result<FeatureVector, MeasurementError> {
    if !(MIN_FEATURES..=MAX_FEATURES).contains(&b) {
        return Err(MeasurementError::FeatureCount(b));
    }
    let all = CollectiveMeasurement::shared().all_probabilities(rho)?;
    FeatureVector::new(all[..b].to_vec())
}
