//! Random two-qubit density matrices, negativity, and the two-copy state.
//!
//! # Random stream layout
//!
//! Every state consumes exactly 28 uniform `f64` draws from its generator,
//! in this order: `r1, r2, r3, r4`, then for each block `j = 1..=6` the
//! tuple `ξ_j, α_j, ψ_j, χ_j`. Angles are the unit draws scaled by `2π`.
//! [`state_rng`] derives an independent ChaCha8 stream per state index, so
//! record `i` of a dataset depends only on `(seed, i)`.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{self, partial_transpose, ComplexMatrix, LinalgError, Subsystem};

/// Tolerance for Hermiticity, unit trace and PSD checks on 4×4 states.
pub const STATE_TOLERANCE: f64 = 1e-10;
/// Same checks for the 16×16 two-copy state.
pub const FOUR_QUBIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("density matrix trace is {trace}, expected 1")]
    Trace { trace: f64 },
    #[error("density matrix has negative eigenvalue {eigenvalue:e}")]
    NotPositive { eigenvalue: f64 },
    #[error("Werner mixing parameter {0} outside [0, 1]")]
    WernerParameter(f64),
}

/// Generator for state number `index` under the master `seed`.
pub fn state_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Trace-one, Hermitian, positive-semidefinite 4×4 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates `mat` as a two-qubit density matrix.
    pub fn new(mat: ComplexMatrix) -> Result<Self, StateError> {
        if mat.dim() != 4 {
            return Err(LinalgError::WrongDimension {
                expected: 4,
                actual: mat.dim(),
            }
            .into());
        }
        check_density(&mat, STATE_TOLERANCE)?;
        Ok(Self { mat })
    }

    pub(crate) fn new_unchecked(mat: ComplexMatrix) -> Self {
        debug_assert_eq!(mat.dim(), 4);
        Self { mat }
    }

    pub fn maximally_mixed() -> Self {
        Self::new_unchecked(ComplexMatrix::diagonal(&[0.25; 4]))
    }

    /// `|Ψ⁻⟩⟨Ψ⁻|` with `|Ψ⁻⟩ = (|01⟩ − |10⟩)/√2`.
    pub fn singlet() -> Self {
        Self::new_unchecked(ComplexMatrix::projector(&singlet_ket()))
    }

    /// `p |Ψ⁻⟩⟨Ψ⁻| + (1 − p) I/4`.
    pub fn werner(p: f64) -> Result<Self, StateError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(StateError::WernerParameter(p));
        }
        let singlet = Self::singlet().mat.scale(Complex64::new(p, 0.0));
        let noise = ComplexMatrix::identity(4).scale(Complex64::new((1.0 - p) / 4.0, 0.0));
        Ok(Self::new_unchecked(singlet.add(&noise)?))
    }

    /// Pure state from a (not necessarily normalized) ket of length 4.
    pub fn pure(ket: &[Complex64]) -> Result<Self, StateError> {
        if ket.len() != 4 {
            return Err(LinalgError::WrongDimension {
                expected: 4,
                actual: ket.len(),
            }
            .into());
        }
        let norm = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let normalized: Vec<Complex64> = ket.iter().map(|z| z / norm).collect();
        Self::new(ComplexMatrix::projector(&normalized))
    }

    /// `ρ_a ⊗ ρ_b` from two single-qubit density matrices.
    pub fn product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Self, StateError> {
        Self::new(a.kron(b))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, unitary: &ComplexMatrix) -> Result<Self, StateError> {
        let rotated = unitary.matmul(&self.mat)?.matmul(&unitary.dagger())?;
        Ok(Self::new_unchecked(rotated))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>, StateError> {
        Ok(linalg::hermitian_eigenvalues(&self.mat)?)
    }
}

pub(crate) fn singlet_ket() -> [Complex64; 4] {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    [zero, h, -h, zero]
}

fn check_density(mat: &ComplexMatrix, tol: f64) -> Result<(), StateError> {
    let eigenvalues = linalg::hermitian_eigenvalues(mat)?;
    let trace = mat.trace();
    if (trace.re - 1.0).abs() > tol || trace.im.abs() > tol {
        return Err(StateError::Trace { trace: trace.re });
    }
    if eigenvalues[0] < -tol {
        return Err(StateError::NotPositive {
            eigenvalue: eigenvalues[0],
        });
    }
    Ok(())
}

/// Uniform draws that set the diagonal spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumParams {
    pub r: [f64; 4],
}

impl SpectrumParams {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            r: std::array::from_fn(|_| rng.random::<f64>()),
        }
    }

    /// Diagonal entries `ρ11 = r1`, `ρ22 = r2(1 − ρ11)`, `ρ33 = r3(1 − ρ11 − ρ22)`
    /// and `ρ44 = 1 − ρ11 − ρ22 − ρ33`. `r4` is drawn but unused.
    pub fn diagonal(&self) -> [f64; 4] {
        let [r1, r2, r3, _] = self.r;
        let d1 = r1;
        let d2 = r2 * (1.0 - d1);
        let d3 = r3 * (1.0 - d1 - d2);
        let d4 = (1.0 - d1 - d2 - d3).max(0.0);
        [d1, d2, d3, d4]
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(ComplexMatrix::diagonal(&self.diagonal()))
    }
}

/// Parameters of one 2×2 block of the random unitary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockAngles {
    /// Uniform in `[0, 1]`; the mixing angle is `φ = arcsin √ξ`.
    pub xi: f64,
    pub alpha: f64,
    pub psi: f64,
    pub chi: f64,
}

impl BlockAngles {
    pub fn phi(&self) -> f64 {
        self.xi.sqrt().asin()
    }

    /// `e^{iα} [[e^{iψ} cos φ, e^{iχ} sin φ], [−e^{−iχ} sin φ, e^{−iψ} cos φ]]`.
    pub fn block(&self) -> [[Complex64; 2]; 2] {
        let (sin, cos) = self.phi().sin_cos();
        let global = Complex64::from_polar(1.0, self.alpha);
        [
            [
                global * Complex64::from_polar(cos, self.psi),
                global * Complex64::from_polar(sin, self.chi),
            ],
            [
                -global * Complex64::from_polar(sin, -self.chi),
                global * Complex64::from_polar(cos, -self.psi),
            ],
        ]
    }
}

/// Zero-based offset of the 2×2 block inside each of the six factors,
/// left to right: rows/cols {3,4}, {2,3}, {1,2}, {3,4}, {2,3}, {3,4}.
const BLOCK_OFFSETS: [usize; 6] = [2, 1, 0, 2, 1, 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitaryParams {
    pub blocks: [BlockAngles; 6],
}

impl UnitaryParams {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            blocks: std::array::from_fn(|_| {
                let xi = rng.random::<f64>();
                let alpha = TAU * rng.random::<f64>();
                let psi = TAU * rng.random::<f64>();
                let chi = TAU * rng.random::<f64>();
                BlockAngles { xi, alpha, psi, chi }
            }),
        }
    }

    /// Ordered product of the six block-embedded factors.
    pub fn unitary(&self) -> ComplexMatrix {
        let mut u = ComplexMatrix::identity(4);
        for (angles, &offset) in self.blocks.iter().zip(&BLOCK_OFFSETS) {
            let mut factor = ComplexMatrix::identity(4);
            let block = angles.block();
            for r in 0..2 {
                for c in 0..2 {
                    factor[(offset + r, offset + c)] = block[r][c];
                }
            }
            u = u.matmul(&factor).expect("4x4 factors");
        }
        u
    }
}

/// Diagonal random spectrum.
pub fn sample_spectrum<R: Rng + ?Sized>(rng: &mut R) -> DensityMatrix {
    SpectrumParams::draw(rng).density()
}

pub fn sample_unitary<R: Rng + ?Sized>(rng: &mut R) -> ComplexMatrix {
    UnitaryParams::draw(rng).unitary()
}

/// `U ρ_i U†` from a fresh spectrum and unitary.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R) -> DensityMatrix {
    let diagonal = sample_spectrum(rng);
    let u = sample_unitary(rng);
    diagonal.conjugate(&u).expect("4x4 conjugation")
}

/// `max(0, −2 λ_min(ρ^{T_A}))`.
pub fn negativity(rho: &DensityMatrix) -> Result<f64, StateError> {
    let pt = partial_transpose(rho.matrix(), Subsystem::A)?;
    let min = linalg::hermitian_eigenvalues(&pt)?[0];
    Ok((-2.0 * min).clamp(0.0, 1.0))
}

/// 16×16 state of two copies.
///
/// Qubit order is (copy-1 qubit 1, copy-1 qubit 2, copy-2 qubit 2,
/// copy-2 qubit 1): the middle pair meets at the Bell projection and the
/// outer pair is measured locally.
#[derive(Debug, Clone, PartialEq)]
pub struct FourQubitState {
    mat: ComplexMatrix,
}

impl FourQubitState {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    /// Checks Hermiticity, unit trace and positivity to `1e-9`.
    pub fn validate(&self) -> Result<(), StateError> {
        check_density(&self.mat, FOUR_QUBIT_TOLERANCE)
    }
}

/// `ρ ⊗ SWAP ρ SWAP†`.
pub fn build_rho4(rho: &DensityMatrix) -> FourQubitState {
    let swap = linalg::swap();
    let swapped = rho
        .conjugate(&swap)
        .expect("4x4 conjugation")
        .into_matrix();
    FourQubitState {
        mat: rho.matrix().kron(&swapped),
    }
}
