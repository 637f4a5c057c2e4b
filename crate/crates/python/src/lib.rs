//! Python bindings. Matrices cross the boundary as nested lists of complex
//! numbers and feature rows as lists of floats.

use std::path::PathBuf;

use collneg::datasets::{self, feature_matrix, negativities, DatasetFormat};
use collneg::linalg::ComplexMatrix;
use collneg::measurement;
use collneg::models::mlp::{self, TrainConfig};
use collneg::models::{reference, Metrics, MlpModel, QuadraticModel};
use collneg::states;
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "DensityMatrix", frozen)]
struct PyDensityMatrix {
    inner: states::DensityMatrix,
}

#[pymethods]
impl PyDensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    #[new]
    fn new(rows: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(PyValueError::new_err("matrix must be square"));
        }
        let mat = ComplexMatrix::from_row_major(rows.into_iter().flatten().collect()).map_err(value_err)?;
        Ok(Self { inner: states::DensityMatrix::new(mat).map_err(value_err)? })
    }

    #[staticmethod]
    fn werner(p: f64) -> PyResult<Self> {
        Ok(Self { inner: states::DensityMatrix::werner(p).map_err(value_err)? })
    }

    #[staticmethod]
    fn singlet() -> Self {
        Self { inner: states::DensityMatrix::singlet() }
    }

    #[staticmethod]
    fn maximally_mixed() -> Self {
        Self { inner: states::DensityMatrix::maximally_mixed() }
    }

    /// State `index` of the stream for `seed`.
    #[staticmethod]
    fn random(seed: u64, index: u64) -> Self {
        random_state(seed, index)
    }

    fn negativity(&self) -> PyResult<f64> {
        states::negativity(&self.inner).map_err(value_err)
    }

    fn eigenvalues(&self) -> PyResult<Vec<f64>> {
        self.inner.eigenvalues().map_err(value_err)
    }

    #[pyo3(signature = (b = 10))]
    fn features(&self, b: usize) -> PyResult<Vec<f64>> {
        feature_vector(self, b)
    }

    fn to_list(&self) -> Vec<Vec<Complex64>> {
        let m = self.inner.matrix();
        (0..m.dim()).map(|i| (0..m.dim()).map(|j| m[(i, j)]).collect()).collect()
    }

    fn __repr__(&self) -> String {
        format!("DensityMatrix({:?})", self.to_list())
    }
}

#[pyfunction]
fn random_state(seed: u64, index: u64) -> PyDensityMatrix {
    PyDensityMatrix { inner: states::random_state(&mut states::state_rng(seed, index)) }
}

#[pyfunction]
fn negativity(rho: &PyDensityMatrix) -> PyResult<f64> {
    rho.negativity()
}

/// First `b` collective probabilities in the fixed configuration order.
#[pyfunction]
#[pyo3(signature = (rho, b = 10))]
fn feature_vector(rho: &PyDensityMatrix, b: usize) -> PyResult<Vec<f64>> {
    Ok(measurement::feature_vector(&rho.inner, b).map_err(value_err)?.into_values())
}

#[pyclass(name = "QuadraticModel", frozen)]
struct PyQuadraticModel {
    inner: QuadraticModel,
}

#[pymethods]
impl PyQuadraticModel {
    #[new]
    fn new(b: usize, theta: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: QuadraticModel::new(b, theta).map_err(value_err)? })
    }

    #[staticmethod]
    fn fit(rows: Vec<Vec<f64>>, targets: Vec<f64>, b: usize) -> PyResult<Self> {
        Ok(Self { inner: QuadraticModel::fit(&rows, &targets, b).map_err(value_err)? })
    }

    /// Bundled reference coefficients for `b`.
    #[staticmethod]
    fn published(b: usize) -> PyResult<Self> {
        Ok(Self { inner: reference::published_model(b).map_err(value_err)? })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: QuadraticModel::from_text(text).map_err(value_err)? })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn b(&self) -> usize {
        self.inner.b()
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta().to_vec()
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.predict(&x).map_err(value_err)
    }

    fn predict_raw(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.predict_raw(&x).map_err(value_err)
    }
}

#[pyclass(name = "MlpModel", frozen)]
struct PyMlpModel {
    inner: MlpModel,
}

#[pymethods]
impl PyMlpModel {
    #[staticmethod]
    fn zeros(dims: Vec<usize>) -> PyResult<Self> {
        Ok(Self { inner: MlpModel::zeros(&dims).map_err(value_err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: MlpModel::load(&path).map_err(|e| PyIOError::new_err(e.to_string()))? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims()
    }

    /// Raw network output (predicted N²).
    fn forward(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.forward(&x).map_err(value_err)
    }

    fn predict_negativity(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.predict_negativity(&x).map_err(value_err)
    }

    /// Trains on `features` against N² of `negativity`; returns the model
    /// and its loss history.
    #[staticmethod]
    #[pyo3(signature = (features, negativity, epochs = 100, batch_size = 256, learning_rate = 1e-3, hidden = vec![256, 128], seed = 0xC011EC7))]
    fn train(
        py: Python<'_>,
        features: Vec<Vec<f64>>,
        negativity: Vec<f64>,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        hidden: Vec<usize>,
        seed: u64,
    ) -> PyResult<(Self, Vec<f64>)> {
        let cols = features.first().map_or(0, Vec::len);
        if features.iter().any(|r| r.len() != cols) {
            return Err(PyValueError::new_err("feature rows differ in length"));
        }
        let x = Array2::from_shape_vec((features.len(), cols), features.concat()).map_err(value_err)?;
        let y = Array1::from(negativity).mapv(|n| n * n);
        let cfg = TrainConfig { epochs, batch_size, learning_rate, hidden, seed, ..TrainConfig::default() };
        let trained = py.detach(|| mlp::train(x.view(), y.view(), &cfg)).map_err(value_err)?;
        Ok((Self { inner: trained.model }, trained.loss_history))
    }
}

/// `R²`, `τ`, `μ`, MSE and count as a dict.
#[pyfunction]
fn metrics<'py>(py: Python<'py>, actual: Vec<f64>, predicted: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let m = Metrics::compute(&actual, &predicted).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("r2", m.r2)?;
    d.set_item("tau", m.tau)?;
    d.set_item("mu", m.mu)?;
    d.set_item("mse", m.mse)?;
    d.set_item("n", m.n)?;
    Ok(d)
}

#[pyclass(name = "Dataset", frozen)]
struct PyDataset {
    inner: datasets::Dataset,
}

#[pymethods]
impl PyDataset {
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.header.seed
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Rows of the first `b` probabilities.
    #[pyo3(signature = (b = 10))]
    fn features(&self, b: usize) -> PyResult<Vec<Vec<f64>>> {
        if !(measurement::MIN_FEATURES..=measurement::MAX_FEATURES).contains(&b) {
            return Err(PyValueError::new_err(format!("b={b} outside 5..=10")));
        }
        Ok(feature_matrix(&self.inner.records, b).outer_iter().map(|r| r.to_vec()).collect())
    }

    fn negativity(&self) -> Vec<f64> {
        negativities(&self.inner.records)
    }

    /// `format` is `"csv"` or `"bin"`.
    #[pyo3(signature = (path, format = "bin"))]
    fn save(&self, path: PathBuf, format: &str) -> PyResult<()> {
        let format = match format {
            "csv" => DatasetFormat::Csv,
            "bin" => DatasetFormat::Binary,
            other => return Err(PyValueError::new_err(format!("unknown format `{other}`"))),
        };
        self.inner.save(&path, format).map_err(|e| PyIOError::new_err(e.to_string()))
    }
}

#[pyfunction]
#[pyo3(signature = (n, seed = 0xC011EC7, threads = 0))]
fn generate(py: Python<'_>, n: u64, seed: u64, threads: usize) -> PyResult<PyDataset> {
    let inner = py.detach(|| datasets::generate(n, seed, threads)).map_err(value_err)?;
    Ok(PyDataset { inner })
}

#[pyfunction]
fn load_dataset(path: PathBuf) -> PyResult<PyDataset> {
    let inner = datasets::Dataset::load(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok(PyDataset { inner })
}

#[pymodule]
fn collneg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PyQuadraticModel>()?;
    m.add_class::<PyMlpModel>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(random_state, m)?)?;
    m.add_function(wrap_pyfunction!(negativity, m)?)?;
    m.add_function(wrap_pyfunction!(feature_vector, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    Ok(())
}
