//! Dense complex matrices for the small systems used here (2×2, 4×4, 16×16).
//!
//! Storage is row-major and square. Everything is a plain value: operations
//! return new matrices and never mutate their inputs.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use thiserror::Error;

/// Maximum entrywise deviation from Hermiticity accepted by the eigensolver.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

const JACOBI_OFF_DIAGONAL_THRESHOLD: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {op} on {left}x{left} and {right}x{right}")]
    DimensionMismatch {
        op: &'static str,
        left: usize,
        right: usize,
    },
    #[error("expected a {expected}x{expected} matrix, got {actual}x{actual}")]
    WrongDimension { expected: usize, actual: usize },
    #[error("entry array of length {len} is not a square of a positive dimension")]
    NotSquare { len: usize },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not Hermitian: max |h - h^dagger| = {deviation:e}")]
    NotHermitian { deviation: f64 },
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
}

/// Square complex matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries, validating shape and finiteness.
    pub fn from_row_major(data: Vec<Complex64>) -> Result<Self, LinalgError> {
        let len = data.len();
        let dim = (len as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != len {
            return Err(LinalgError::NotSquare { len });
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_real_rows<const N: usize>(rows: [[f64; N]; N]) -> Self {
        let data = rows
            .iter()
            .flat_map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)))
            .collect();
        Self { dim: N, data }
    }

    pub fn from_rows<const N: usize>(rows: [[Complex64; N]; N]) -> Self {
        let data = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Self { dim: N, data }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Outer product `|v><v|`.
    pub fn projector(ket: &[Complex64]) -> Self {
        let dim = ket.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = ket[i] * ket[j].conj();
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_dim("matmul", other)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j];
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// `Tr[self · other]` without forming the product.
    pub fn trace_of_product(&self, other: &Self) -> Result<Complex64, LinalgError> {
        self.check_same_dim("trace_of_product", other)?;
        let n = self.dim;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.data[i * n + j] * other.data[j * n + i];
            }
        }
        Ok(acc)
    }

    /// Kronecker product; entry `(i·n + k, j·n + l)` is `a[i,j]·b[k,l]` with `n = dim(b)`.
    pub fn kron(&self, other: &Self) -> Self {
        let (m, n) = (self.dim, other.dim);
        let dim = m * n;
        let mut out = Self::zeros(dim);
        for i in 0..m {
            for j in 0..m {
                let a = self.data[i * m + j];
                for k in 0..n {
                    for l in 0..n {
                        out.data[(i * n + k) * dim + (j * n + l)] = a * other.data[k * n + l];
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_dim("add", other)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.check_same_dim("sub", other)?;
        Ok(Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, LinalgError> {
        self.check_same_dim("max_abs_diff", other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Largest entrywise modulus of `self - self†`.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                if d.is_nan() {
                    return f64::NAN;
                }
                worst = worst.max(d);
            }
        }
        worst
    }

    /// `(self + self†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[i * n + j] = (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_same_dim(&self, op: &'static str, other: &Self) -> Result<(), LinalgError> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch {
                op,
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (row, col): (usize, usize)) -> &Complex64 {
        assert!(row < self.dim && col < self.dim, "index out of range");
        &self.data[row * self.dim + col]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (row, col): (usize, usize)) -> &mut Complex64 {
        assert!(row < self.dim && col < self.dim, "index out of range");
        &mut self.data[row * self.dim + col]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{}) [", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  ")?;
            for j in 0..self.dim {
                let z = self.data[i * self.dim + j];
                write!(f, "{:+.6}{:+.6}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

pub mod pauli {
    use super::ComplexMatrix;
    use num_complex::Complex64;

    pub fn identity() -> ComplexMatrix {
        ComplexMatrix::identity(2)
    }

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows([[0.0, 1.0], [1.0, 0.0]])
    }

    pub fn y() -> ComplexMatrix {
        let i = Complex64::new(0.0, 1.0);
        let zero = Complex64::new(0.0, 0.0);
        ComplexMatrix::from_rows([[zero, -i], [i, zero]])
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_real_rows([[1.0, 0.0], [0.0, -1.0]])
    }
}

/// Two-qubit operator exchanging the subsystems.
pub fn swap() -> ComplexMatrix {
    ComplexMatrix::from_real_rows([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
}

/// Qubit of a two-qubit system; `A` is the more significant index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Transposes the indices of one qubit of a 4×4 operator.
///
/// With the basis index `2·a + b`, entry `((a,b),(a',b'))` moves to
/// `((a',b),(a,b'))` for subsystem A and to `((a,b'),(a',b))` for B.
pub fn partial_transpose(m: &ComplexMatrix, subsystem: Subsystem) -> Result<ComplexMatrix, LinalgError> {
    if m.dim() != 4 {
        return Err(LinalgError::WrongDimension {
            expected: 4,
            actual: m.dim(),
        });
    }
    let mut out = ComplexMatrix::zeros(4);
    for a in 0..2 {
        for b in 0..2 {
            for ap in 0..2 {
                for bp in 0..2 {
                    let (r, c) = match subsystem {
                        Subsystem::A => (2 * ap + b, 2 * a + bp),
                        Subsystem::B => (2 * a + bp, 2 * ap + b),
                    };
                    out[(r, c)] = m[(2 * a + b, 2 * ap + bp)];
                }
            }
        }
    }
    Ok(out)
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: ComplexMatrix,
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(h: &ComplexMatrix) -> Result<Vec<f64>, LinalgError> {
    hermitian_eigen(h).map(|e| e.values)
}

/// Cyclic complex Jacobi eigensolver.
///
/// The input is symmetrized as `(h + h†)/2` after checking it is Hermitian
/// to [`HERMITIAN_TOLERANCE`]. Sweeps stop once the off-diagonal Frobenius
/// norm drops below `1e-13 · max(1, ‖h‖_F)`.
pub fn hermitian_eigen(h: &ComplexMatrix) -> Result<HermitianEigen, LinalgError> {
    let deviation = h.hermitian_deviation();
    if !(deviation <= HERMITIAN_TOLERANCE) {
        return Err(LinalgError::NotHermitian { deviation });
    }
    let n = h.dim();
    let mut a = h.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let threshold = JACOBI_OFF_DIAGONAL_THRESHOLD * a.frobenius_norm().max(1.0);

    let mut converged = false;
    let mut off = off_diagonal_norm(&a);
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off < threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        off = off_diagonal_norm(&a);
    }
    if !converged && off >= threshold {
        return Err(LinalgError::NoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
            off_norm: off,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = v[(row, src)];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Annihilates `a[p,q]` with the unitary `J = diag-phase · real rotation`,
/// replacing `a` by `J† a J` and `v` by `v J`.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let magnitude = apq.norm();
    if magnitude == 0.0 {
        return;
    }
    let phase = apq / magnitude;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (2.0 * magnitude);
    let t = if theta >= 0.0 {
        1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // J restricted to (p, q): [[c, s], [-s·conj(u), c·conj(u)]] with u = phase.
    let jpp = Complex64::new(c, 0.0);
    let jpq = Complex64::new(s, 0.0);
    let jqp = -phase.conj() * s;
    let jqq = phase.conj() * c;

    let n = a.dim();
    // a ← a J (columns p, q)
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * jpp + akq * jqp;
        a[(k, q)] = akp * jpq + akq * jqq;
    }
    // a ← J† a (rows p, q)
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
        a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * jpp + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * jqq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pauli_algebra() {
        let x = pauli::x();
        assert_eq!(x.matmul(&x).unwrap(), pauli::identity());
        assert_eq!(pauli::y().dagger(), pauli::y());
        assert_eq!(pauli::z().trace(), c(0.0, 0.0));
    }

    #[test]
    fn matmul_rejects_mismatched_dimensions() {
        let err = pauli::x().matmul(&ComplexMatrix::identity(4)).unwrap_err();
        assert!(matches!(err, LinalgError::DimensionMismatch { left: 2, right: 4, .. }));
    }

    #[test]
    fn from_row_major_validates() {
        assert!(matches!(
            ComplexMatrix::from_row_major(vec![c(1.0, 0.0); 3]),
            Err(LinalgError::NotSquare { len: 3 })
        ));
        let mut data = vec![c(0.0, 0.0); 4];
        data[3] = c(f64::NAN, 0.0);
        assert!(matches!(
            ComplexMatrix::from_row_major(data),
            Err(LinalgError::NonFinite { row: 1, col: 1 })
        ));
    }

    #[test]
    fn kron_examples() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(i2.kron(&i2), ComplexMatrix::identity(4));
        assert_eq!(pauli::z().kron(&pauli::z()), ComplexMatrix::diagonal(&[1.0, -1.0, -1.0, 1.0]));
        let big = pauli::x().kron(&ComplexMatrix::identity(4)).kron(&pauli::z());
        assert_eq!(big.dim(), 16);
    }

    #[test]
    fn partial_transpose_of_diagonal_is_identity_map() {
        let d = ComplexMatrix::diagonal(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(partial_transpose(&d, Subsystem::A).unwrap(), d);
        assert_eq!(partial_transpose(&d, Subsystem::B).unwrap(), d);
    }

    #[test]
    fn partial_transpose_is_an_involution() {
        let m = ComplexMatrix::from_row_major((0..16).map(|k| c(k as f64, (k * k) as f64 * 0.1)).collect()).unwrap();
        for s in [Subsystem::A, Subsystem::B] {
            let twice = partial_transpose(&partial_transpose(&m, s).unwrap(), s).unwrap();
            assert_eq!(twice, m);
        }
        let both = partial_transpose(&partial_transpose(&m, Subsystem::A).unwrap(), Subsystem::B).unwrap();
        assert_eq!(both, m.transpose());
    }

    #[test]
    fn partial_transpose_rejects_wrong_dimension() {
        assert!(matches!(
            partial_transpose(&pauli::x(), Subsystem::A),
            Err(LinalgError::WrongDimension { expected: 4, actual: 2 })
        ));
    }

    #[test]
    fn singlet_partial_transpose_spectrum() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = ComplexMatrix::projector(&[c(0.0, 0.0), c(h, 0.0), c(-h, 0.0), c(0.0, 0.0)]);
        let ev = hermitian_eigenvalues(&partial_transpose(&singlet, Subsystem::A).unwrap()).unwrap();
        for (got, want) in ev.iter().zip([-0.5, 0.5, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-14, "{ev:?}");
        }
    }

    #[test]
    fn eigenvalues_of_simple_matrices() {
        assert_eq!(hermitian_eigenvalues(&ComplexMatrix::identity(4)).unwrap(), vec![1.0; 4]);
        assert_eq!(hermitian_eigenvalues(&pauli::z()).unwrap(), vec![-1.0, 1.0]);
        let ev = hermitian_eigenvalues(&pauli::y()).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-15 && (ev[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows([[1.0, 1.0], [0.0, 1.0]]);
        assert!(matches!(hermitian_eigen(&m), Err(LinalgError::NotHermitian { .. })));
        let mut nan = ComplexMatrix::identity(2);
        nan[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(hermitian_eigen(&nan), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn eigen_tolerates_tiny_asymmetry() {
        let mut m = pauli::x();
        m[(0, 1)] = c(1.0 + 5e-11, 0.0);
        assert!(hermitian_eigen(&m).is_ok());
    }

    #[test]
    fn eigenvectors_satisfy_residual_bound() {
        let m = ComplexMatrix::from_rows([
            [c(2.0, 0.0), c(0.5, -1.0), c(0.0, 0.3), c(-1.0, 0.0)],
            [c(0.5, 1.0), c(-1.0, 0.0), c(0.2, 0.2), c(0.0, -0.7)],
            [c(0.0, -0.3), c(0.2, -0.2), c(0.5, 0.0), c(1.5, 0.1)],
            [c(-1.0, 0.0), c(0.0, 0.7), c(1.5, -0.1), c(3.0, 0.0)],
        ]);
        let eig = hermitian_eigen(&m).unwrap();
        for (k, &lambda) in eig.values.iter().enumerate() {
            for i in 0..4 {
                let hv: Complex64 = (0..4).map(|j| m[(i, j)] * eig.vectors[(j, k)]).sum();
                assert!((hv - eig.vectors[(i, k)] * lambda).norm() < 1e-12);
            }
        }
        let sum: f64 = eig.values.iter().sum();
        assert!((sum - m.trace().re).abs() < 1e-12);
    }

    #[test]
    fn handles_degenerate_and_sixteen_dimensional_input() {
        let big = pauli::x().kron(&pauli::y()).kron(&pauli::z()).kron(&pauli::x());
        let ev = hermitian_eigenvalues(&big).unwrap();
        assert_eq!(ev.len(), 16);
        for (k, v) in ev.iter().enumerate() {
            let want = if k < 8 { -1.0 } else { 1.0 };
            assert!((v - want).abs() < 1e-12);
        }
    }
}
