//! Fully connected network `affine → ReLU → … → affine → SoftPlus`
//! trained with minibatch Adam on a mean-squared-error loss.
//!
//! The network is trained on squared negativity; [`MlpModel::predict_negativity`]
//! maps the output back with a square root.

use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Magic prefix of serialized networks.
pub const MODEL_MAGIC: &[u8; 8] = b"CNEGMLP\0";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("layer dimensions {0:?} must have at least two positive entries ending in 1")]
    Dims(Vec<usize>),
    #[error("input has {actual} features, network expects {expected}")]
    InputLength { expected: usize, actual: usize },
    #[error("{features} feature rows but {labels} labels")]
    LabelCount { features: usize, labels: usize },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("parameter vector has {actual} entries, expected {expected}")]
    ParameterCount { expected: usize, actual: usize },
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// `ln(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    /// `inputs × outputs`
    weights: Array2<f64>,
    bias: Array1<f64>,
}

/// Gradient of the loss with respect to one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Dense>,
}

impl MlpModel {
    /// Network with every weight and bias zero.
    pub fn zeros(dims: &[usize]) -> Result<Self, MlpError> {
        check_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| Dense {
                weights: Array2::zeros((w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Ok(Self { layers })
    }

    /// He-uniform weights for the ReLU layers, Glorot-uniform for the
    /// output layer, zero biases.
    pub fn initialized<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self, MlpError> {
        let mut model = Self::zeros(dims)?;
        let last = model.layers.len() - 1;
        for (k, layer) in model.layers.iter_mut().enumerate() {
            let (fan_in, fan_out) = layer.weights.dim();
            let limit = if k == last {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            layer.weights.mapv_inplace(|_| rng.random_range(-limit..=limit));
        }
        Ok(model)
    }

    pub fn from_parameters(dims: &[usize], params: &[f64]) -> Result<Self, MlpError> {
        let mut model = Self::zeros(dims)?;
        model.set_parameters(params)?;
        Ok(model)
    }

    /// `(inputs, hidden…, 1)`
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.bias.len()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flat parameters: per layer, row-major weights then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for layer in &self.layers {
            out.extend(layer.weights.iter());
            out.extend(layer.bias.iter());
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<(), MlpError> {
        let expected = self.parameter_count();
        if params.len() != expected {
            return Err(MlpError::ParameterCount { expected, actual: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(MlpError::Format("non-finite parameter".into()));
        }
        let mut rest = params;
        for layer in &mut self.layers {
            for (dst, src) in layer.weights.iter_mut().zip(rest) {
                *dst = *src;
            }
            rest = &rest[layer.weights.len()..];
            for (dst, src) in layer.bias.iter_mut().zip(rest) {
                *dst = *src;
            }
            rest = &rest[layer.bias.len()..];
        }
        Ok(())
    }

    /// Network output for one input; always positive.
    pub fn forward(&self, x: &[f64]) -> Result<f64, MlpError> {
        self.check_input(x.len())?;
        let batch = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.forward_batch(batch)[0])
    }

    /// Outputs for each row of `x`.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let mut act = x.to_owned();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = act.dot(&layer.weights);
            z += &layer.bias;
            if k == last {
                z.mapv_inplace(softplus);
            } else {
                z.mapv_inplace(relu);
            }
            act = z;
        }
        act.index_axis_move(Axis(1), 0)
    }

    /// `min(1, √output)`.
    pub fn predict_negativity(&self, x: &[f64]) -> Result<f64, MlpError> {
        Ok(output_to_negativity(self.forward(x)?))
    }

    /// Mean squared error of the outputs against `labels`.
    pub fn mse(&self, x: ArrayView2<f64>, labels: ArrayView1<f64>) -> f64 {
        let out = self.forward_batch(x);
        (&out - &labels).mapv(|r| r * r).mean().unwrap_or(0.0)
    }

    /// MSE loss over the batch and its gradient for every layer.
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, labels: ArrayView1<f64>) -> (f64, Vec<LayerGradient>) {
        let batch = x.nrows() as f64;
        let last = self.layers.len() - 1;
        // activations[k] is the input to layer k; pre[k] its pre-activation
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        activations.push(x.to_owned());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = activations[k].dot(&layer.weights);
            z += &layer.bias;
            let a = if k == last { z.mapv(softplus) } else { z.mapv(relu) };
            pre.push(z);
            activations.push(a);
        }
        let out = activations[last + 1].column(0);
        let residual = &out - &labels;
        let loss = residual.mapv(|r| r * r).sum() / batch;

        let mut delta: Array2<f64> = (residual.mapv(|r| 2.0 * r / batch))
            .insert_axis(Axis(1))
            * pre[last].mapv(sigmoid);
        let mut grads = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let weights = activations[k].t().dot(&delta);
            let bias = delta.sum_axis(Axis(0));
            if k > 0 {
                let mut back = delta.dot(&self.layers[k].weights.t());
                back.zip_mut_with(&pre[k - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(LayerGradient { weights, bias });
        }
        grads.reverse();
        (loss, grads)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dims = self.dims();
        let mut out = Vec::with_capacity(24 + 4 * dims.len() + 8 * self.parameter_count());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.input_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in &dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for p in self.parameters() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    /// Parses the layout written by [`MlpModel::to_bytes`]: magic, version
    /// u32, b u32, layer count u32, dims u32 each, then f64 parameters, all
    /// little-endian.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MlpError> {
        let mut reader = ByteReader { bytes, pos: 0 };
        if reader.take(8)? != MODEL_MAGIC {
            return Err(MlpError::Format("bad magic".into()));
        }
        let version = reader.u32()?;
        if version != MODEL_VERSION {
            return Err(MlpError::Format(format!("unsupported version {version}")));
        }
        let b = reader.u32()? as usize;
        let count = reader.u32()? as usize;
        if count > 64 {
            return Err(MlpError::Format(format!("implausible layer count {count}")));
        }
        let dims = (0..count)
            .map(|_| reader.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if dims.first() != Some(&b) {
            return Err(MlpError::Format("feature count disagrees with input dimension".into()));
        }
        let mut model = Self::zeros(&dims)?;
        let n = model.parameter_count();
        let raw = reader.take(8 * n)?;
        let params: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if reader.pos != bytes.len() {
            return Err(MlpError::Format("trailing bytes".into()));
        }
        model.set_parameters(&params)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), MlpError> {
        fs::write(path, self.to_bytes()).map_err(|source| MlpError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, MlpError> {
        let bytes = fs::read(path).map_err(|source| MlpError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    fn check_input(&self, len: usize) -> Result<(), MlpError> {
        if len != self.input_dim() {
            return Err(MlpError::InputLength {
                expected: self.input_dim(),
                actual: len,
            });
        }
        Ok(())
    }
}

/// Maps a network output (predicted `N²`) to negativity: `min(1, √y)`.
pub fn output_to_negativity(output: f64) -> f64 {
    output.max(0.0).sqrt().min(1.0)
}

fn check_dims(dims: &[usize]) -> Result<(), MlpError> {
    if dims.len() < 2 || dims.contains(&0) || dims.last() != Some(&1) {
        return Err(MlpError::Dims(dims.to_vec()));
    }
    Ok(())
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MlpError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| MlpError::Format("truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, MlpError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 256,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0xC011EC7,
            hidden: vec![256, 128],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |msg: &str| Err(MlpError::Config(msg.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        Ok(())
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainedMlp {
    pub model: MlpModel,
    /// Entry 0 is the full training-set loss before the first update;
    /// entry `e` is the mean minibatch loss of epoch `e`.
    pub loss_history: Vec<f64>,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

/// Minibatch Adam on `features` (rows) against `labels`.
///
/// Runs single-threaded with a fixed reduction order, so a given seed
/// reproduces the same parameters bit for bit. Initialization draws from
/// ChaCha8 stream 0 of `cfg.seed`, shuffling from stream 1.
pub fn train(features: ArrayView2<f64>, labels: ArrayView1<f64>, cfg: &TrainConfig) -> Result<TrainedMlp, MlpError> {
    cfg.validate()?;
    let n = features.nrows();
    if n == 0 {
        return Err(MlpError::EmptyDataset);
    }
    if labels.len() != n {
        return Err(MlpError::LabelCount { features: n, labels: labels.len() });
    }
    let mut dims = vec![features.ncols()];
    dims.extend(&cfg.hidden);
    dims.push(1);

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);

    let mut model = MlpModel::initialized(&dims, &mut init_rng)?;
    let mut adam = AdamState {
        m: vec![0.0; model.parameter_count()],
        v: vec![0.0; model.parameter_count()],
        step: 0,
    };

    let mut history = vec![model.mse(features, labels)];
    let batch_size = cfg.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch_x = Array2::<f64>::zeros((batch_size, features.ncols()));
    let mut batch_y = Array1::<f64>::zeros(batch_size);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch, chunk) in order.chunks(batch_size).enumerate() {
            let rows = chunk.len();
            for (r, &i) in chunk.iter().enumerate() {
                batch_x.row_mut(r).assign(&features.row(i));
                batch_y[r] = labels[i];
            }
            let (loss, grads) = model.loss_and_gradient(batch_x.slice(s![..rows, ..]), batch_y.slice(s![..rows]));
            if !loss.is_finite() {
                return Err(MlpError::NonFiniteLoss { epoch, batch });
            }
            adam_step(&mut model, &grads, &mut adam, cfg);
            epoch_loss += loss;
            batches += 1;
        }
        history.push(epoch_loss / batches as f64);
    }
    Ok(TrainedMlp { model, loss_history: history })
}

fn adam_step(model: &mut MlpModel, grads: &[LayerGradient], state: &mut AdamState, cfg: &TrainConfig) {
    state.step += 1;
    let bias1 = 1.0 - cfg.beta1.powi(state.step);
    let bias2 = 1.0 - cfg.beta2.powi(state.step);
    let mut offset = 0;
    for (layer, grad) in model.layers.iter_mut().zip(grads) {
        let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
        let gs = grad.weights.iter().chain(grad.bias.iter());
        for (k, (p, &g)) in params.zip(gs).enumerate() {
            let m = &mut state.m[offset + k];
            let v = &mut state.v[offset + k];
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
        offset += layer.weights.len() + layer.bias.len();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;

    #[test]
    fn zero_network_outputs_ln2() {
        let model = MlpModel::zeros(&[7, 4, 3, 1]).unwrap();
        let out = model.forward(&[0.3; 7]).unwrap();
        assert!((out - std::f64::consts::LN_2).abs() < 1e-15);
        let n = model.predict_negativity(&[0.3; 7]).unwrap();
        assert!((n - std::f64::consts::LN_2.sqrt()).abs() < 1e-15);
        assert!((n - 0.8326).abs() < 1e-4);
    }

    #[test]
    fn negativity_mapping() {
        assert_eq!(output_to_negativity(0.25), 0.5);
        assert_eq!(output_to_negativity(4.0), 1.0);
    }

    #[test]
    fn softplus_is_stable_and_bounds_relu() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        for k in 0..=2000 {
            let x = -10.0 + k as f64 * 0.01;
            assert!(softplus(x) > relu(x));
            assert!(softplus(x) >= relu(x) - std::f64::consts::LN_2);
            assert!(softplus(x) <= relu(x) + std::f64::consts::LN_2 + 1e-15);
        }
    }

    #[test]
    fn dims_and_inputs_are_validated() {
        assert!(matches!(MlpModel::zeros(&[5]), Err(MlpError::Dims(_))));
        assert!(matches!(MlpModel::zeros(&[5, 0, 1]), Err(MlpError::Dims(_))));
        assert!(matches!(MlpModel::zeros(&[5, 3, 2]), Err(MlpError::Dims(_))));
        let model = MlpModel::zeros(&[5, 3, 1]).unwrap();
        assert!(matches!(model.forward(&[0.0; 4]), Err(MlpError::InputLength { expected: 5, actual: 4 })));
        assert_eq!(model.dims(), vec![5, 3, 1]);
        assert_eq!(model.parameter_count(), 5 * 3 + 3 + 3 + 1);
    }

    #[test]
    fn train_rejects_bad_input() {
        let x = Array2::<f64>::zeros((0, 5));
        let y = Array1::<f64>::zeros(0);
        assert!(matches!(train(x.view(), y.view(), &TrainConfig::default()), Err(MlpError::EmptyDataset)));
        let x = Array2::<f64>::zeros((3, 5));
        let y = Array1::<f64>::zeros(2);
        assert!(matches!(train(x.view(), y.view(), &TrainConfig::default()), Err(MlpError::LabelCount { .. })));
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        assert!(matches!(train(x.view(), y.view(), &cfg), Err(MlpError::Config(_))));
    }

    #[test]
    fn diverging_training_reports_context() {
        let x = Array::from_shape_fn((8, 5), |(i, j)| (i * 5 + j) as f64);
        let y = Array1::from_elem(8, f64::NAN);
        let cfg = TrainConfig { epochs: 2, batch_size: 4, hidden: vec![3], ..TrainConfig::default() };
        assert!(matches!(
            train(x.view(), y.view(), &cfg),
            Err(MlpError::NonFiniteLoss { epoch: 1, batch: 0 })
        ));
    }

    #[test]
    fn serialization_round_trip_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = MlpModel::initialized(&[6, 5, 4, 1], &mut rng).unwrap();
        let bytes = model.to_bytes();
        assert_eq!(MlpModel::from_bytes(&bytes).unwrap(), model);
        assert!(MlpModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(MlpModel::from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[8] = 2;
        assert!(MlpModel::from_bytes(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(MlpModel::from_bytes(&long).is_err());
    }
}
