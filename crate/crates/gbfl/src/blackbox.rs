//! Black-box classifier abstraction.
//!
//! The explainer and the metrics only ever see confidence scores, so a model
//! is anything that maps a feature vector to a probability vector over K
//! classes. Three kinds are provided: a built-in multinomial logistic model,
//! a built-in MLP (dense + relu + softmax head, trained by deterministic
//! mini-batch SGD), and an adapter around an external process speaking a
//! line-oriented CSV protocol on stdio.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Mutex;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{GbflError, Result};

const MODEL_MAGIC: &[u8; 7] = b"GBFLBB1";

/// Architecture and trainer settings for the built-in reference models.
/// An empty `hidden_layer_widths` gives a plain multinomial logistic model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    #[serde(default)]
    pub hidden_layer_widths: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    /// Train-time dropout rate after each hidden layer (same length as
    /// `hidden_layer_widths`, or empty for no dropout). Inference never
    /// applies dropout.
    #[serde(default)]
    pub dropout_rates: Vec<f64>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    /// Fit an input standardizer (per-feature mean/std) on the training data
    /// and bake it into the model, so callers always pass raw features.
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_epochs() -> usize {
    100
}
fn default_batch_size() -> usize {
    32
}
fn default_learning_rate() -> f64 {
    0.05
}
fn default_momentum() -> f64 {
    0.9
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_layer_widths: Vec::new(),
            activation: Activation::Relu,
            dropout_rates: Vec::new(),
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            momentum: default_momentum(),
            standardize: false,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn logistic() -> Self {
        MlpConfig::default()
    }

    pub fn mlp(hidden: Vec<usize>) -> Self {
        MlpConfig {
            hidden_layer_widths: hidden,
            ..MlpConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden_layer_widths.iter().any(|&w| w == 0) {
            return Err(GbflError::InvalidArgument(
                "hidden layer widths must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) && self.learning_rate != 0.0 {
            return Err(GbflError::InvalidArgument(
                "learning rate must be non-negative and finite".into(),
            ));
        }
        if !self.dropout_rates.is_empty()
            && self.dropout_rates.len() != self.hidden_layer_widths.len()
        {
            return Err(GbflError::InvalidArgument(format!(
                "got {} dropout rates for {} hidden layers",
                self.dropout_rates.len(),
                self.hidden_layer_widths.len()
            )));
        }
        if self.dropout_rates.iter().any(|&p| !(0.0..1.0).contains(&p)) {
            return Err(GbflError::InvalidArgument(
                "dropout rates must lie in [0, 1)".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(GbflError::InvalidArgument("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    /// Stable hash of the config used as model provenance.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex_prefix(&hasher.finalize(), 16)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

/// Feed-forward net: dense layers with relu between them and a softmax head.
/// Weights are row-major `(out, in)` per layer.
#[derive(Debug, Clone)]
struct Network {
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    /// Optional input standardizer (means, stds) applied before the first
    /// layer; stds have a 1e-12 floor.
    scaler: Option<(Array1<f64>, Array1<f64>)>,
}

impl Network {
    fn layer_widths(&self) -> Vec<usize> {
        let mut widths = vec![self.weights[0].ncols()];
        for w in &self.weights {
            widths.push(w.nrows());
        }
        widths
    }

    fn apply_scaler(&self, x: &Array2<f64>) -> Array2<f64> {
        match &self.scaler {
            None => x.clone(),
            Some((mean, std)) => {
                let mut out = x.clone();
                for mut row in out.rows_mut() {
                    row -= mean;
                    row /= std;
                }
                out
            }
        }
    }

    /// Forward pass returning softmax probabilities, optionally keeping the
    /// per-layer activations for backprop. `dropout` carries per-hidden-layer
    /// keep masks already scaled by 1/(1-p) (inverted dropout).
    fn forward(
        &self,
        x: &Array2<f64>,
        keep_activations: bool,
        dropout: Option<&[Array2<f64>]>,
    ) -> (Array2<f64>, Vec<Array2<f64>>) {
        let mut activations = Vec::new();
        let mut current = self.apply_scaler(x);
        if keep_activations {
            activations.push(current.clone());
        }
        let n_layers = self.weights.len();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = current.dot(&w.t());
            for mut row in z.rows_mut() {
                row += b;
            }
            if l + 1 < n_layers {
                z.mapv_inplace(|v| v.max(0.0));
                if let Some(masks) = dropout {
                    z *= &masks[l];
                }
            } else {
                softmax_rows(&mut z);
            }
            current = z;
            if keep_activations {
                activations.push(current.clone());
            }
        }
        (current, activations)
    }

    /// Mean cross-entropy over the batch plus gradients w.r.t. every weight
    /// and bias. Dropout masks, when given, must match the forward pass.
    fn loss_and_grads(
        &self,
        x: &Array2<f64>,
        labels: &[usize],
        dropout: Option<&[Array2<f64>]>,
    ) -> (f64, Vec<Array2<f64>>, Vec<Array1<f64>>) {
        let n = x.nrows() as f64;
        let (probs, activations) = self.forward(x, true, dropout);
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            loss -= probs[[i, y]].max(1e-300).ln();
        }
        loss /= n;

        // delta starts as (softmax - onehot) / n at the output layer.
        let mut delta = probs;
        for (i, &y) in labels.iter().enumerate() {
            delta[[i, y]] -= 1.0;
        }
        delta /= n;

        let n_layers = self.weights.len();
        let mut grad_w = vec![Array2::zeros((0, 0)); n_layers];
        let mut grad_b = vec![Array1::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            let input = &activations[l];
            grad_w[l] = delta.t().dot(input);
            grad_b[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l]);
                // Through dropout, then through relu.
                if let Some(masks) = dropout {
                    back *= &masks[l - 1];
                }
                let hidden = &activations[l];
                // activations[l] is post-relu (and post-dropout); relu
                // gradient gates on the pre-dropout sign, which matches the
                // post-relu sign since masks are non-negative.
                ndarray::Zip::from(&mut back)
                    .and(hidden)
                    .for_each(|g, &h| {
                        if h <= 0.0 {
                            *g = 0.0;
                        }
                    });
                delta = back;
            }
        }
        (loss, grad_w, grad_b)
    }
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(chars);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
        if s.len() >= chars {
            break;
        }
    }
    s.truncate(chars);
    s
}

/// Identifying metadata carried by every model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelMeta {
    pub kind: String,
    pub n_features: usize,
    pub n_classes: usize,
    pub layer_widths: Vec<usize>,
    pub config_hash: String,
}

enum ModelInner {
    Builtin(Network),
    External(Mutex<ExternalIo>),
}

/// An opaque classifier exposing `confidence(x)`: a probability vector over
/// K classes. Built-in models are immutable and pure; the external adapter
/// serializes access to its child process, so the model is safe to share
/// across threads either way.
pub struct BlackBoxModel {
    inner: ModelInner,
    meta: ModelMeta,
}

impl std::fmt::Debug for BlackBoxModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlackBoxModel").field("meta", &self.meta).finish()
    }
}

impl BlackBoxModel {
    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn n_features(&self) -> usize {
        self.meta.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.meta.n_classes
    }

    /// Probability vector for one input.
    pub fn confidence(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let batch = x.insert_axis(Axis(0));
        let out = self.confidence_batch(batch)?;
        Ok(out.row(0).to_owned())
    }

    /// Probability vectors for a batch of inputs, row-aligned.
    pub fn confidence_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.meta.n_features {
            return Err(GbflError::DimensionMismatch {
                expected: self.meta.n_features,
                got: x.ncols(),
            });
        }
        let out = match &self.inner {
            ModelInner::Builtin(net) => {
                let owned = x.to_owned();
                net.forward(&owned, false, None).0
            }
            ModelInner::External(io) => {
                let mut guard = io.lock().map_err(|_| {
                    GbflError::ExternalModel("adapter mutex poisoned".into())
                })?;
                guard.query(x, self.meta.n_classes)?
            }
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(GbflError::NonFiniteConfidence);
        }
        Ok(out)
    }

    /// Predicted class: argmax of the confidence vector, lowest index on ties.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        Ok(argmax(self.confidence(x)?.view()))
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let probs = self.confidence_batch(x)?;
        Ok(probs.rows().into_iter().map(argmax).collect())
    }

    pub fn is_external(&self) -> bool {
        matches!(self.inner, ModelInner::External(_))
    }

    /// Clone a built-in model. External adapters own a child process and
    /// cannot be duplicated.
    pub fn try_clone(&self) -> Result<BlackBoxModel> {
        match &self.inner {
            ModelInner::Builtin(net) => Ok(BlackBoxModel {
                inner: ModelInner::Builtin(net.clone()),
                meta: self.meta.clone(),
            }),
            ModelInner::External(_) => Err(GbflError::ExternalModel(
                "external models cannot be cloned".into(),
            )),
        }
    }
}

/// Lowest-index argmax, used for every prediction tie-break.
pub fn argmax(v: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Train a built-in reference model with mini-batch SGD (optional momentum)
/// on cross-entropy. Deterministic for a fixed `(config, data, seed)`: the
/// seed drives initialization, epoch shuffling and dropout masks.
pub fn train_reference_model(
    config: &MlpConfig,
    train: &Dataset,
    seed: u64,
) -> Result<BlackBoxModel> {
    config.validate()?;
    let d = train.n_features();
    let k = train.n_classes();
    let mut widths = vec![d];
    widths.extend_from_slice(&config.hidden_layer_widths);
    widths.push(k);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..widths.len() - 1 {
        let (fan_in, fan_out) = (widths[l], widths[l + 1]);
        let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("valid normal");
        let w = Array2::from_shape_fn((fan_out, fan_in), |_| normal.sample(&mut rng));
        weights.push(w);
        biases.push(Array1::zeros(fan_out));
    }

    let scaler = if config.standardize {
        let mut mean = Array1::zeros(d);
        let mut std = Array1::zeros(d);
        for j in 0..d {
            let col = train.features().column(j);
            let m = col.sum() / col.len() as f64;
            let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64;
            mean[j] = m;
            std[j] = var.sqrt().max(1e-12);
        }
        Some((mean, std))
    } else {
        None
    };

    let mut net = Network {
        weights,
        biases,
        scaler,
    };
    let n_hidden = config.hidden_layer_widths.len();
    let mut velocity_w: Vec<Array2<f64>> =
        net.weights.iter().map(|w| Array2::zeros(w.dim())).collect();
    let mut velocity_b: Vec<Array1<f64>> =
        net.biases.iter().map(|b| Array1::zeros(b.len())).collect();

    let n = train.n_samples();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let mut batch_x = Array2::zeros((chunk.len(), d));
            let mut batch_y = Vec::with_capacity(chunk.len());
            for (r, &i) in chunk.iter().enumerate() {
                batch_x.row_mut(r).assign(&train.row(i));
                batch_y.push(train.labels()[i]);
            }
            let masks: Option<Vec<Array2<f64>>> = if config
                .dropout_rates
                .iter()
                .any(|&p| p > 0.0)
            {
                Some(
                    (0..n_hidden)
                        .map(|l| {
                            let p = config.dropout_rates.get(l).copied().unwrap_or(0.0);
                            let keep = 1.0 - p;
                            Array2::from_shape_fn((chunk.len(), net.weights[l].nrows()), |_| {
                                if p == 0.0 || rng.gen::<f64>() < keep {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            })
                        })
                        .collect(),
                )
            } else {
                None
            };
            let (loss, grad_w, grad_b) = net.loss_and_grads(&batch_x, &batch_y, masks.as_deref());
            if !loss.is_finite() {
                return Err(GbflError::Divergence { epoch });
            }
            for l in 0..net.weights.len() {
                velocity_w[l] = &velocity_w[l] * config.momentum - &grad_w[l] * config.learning_rate;
                velocity_b[l] = &velocity_b[l] * config.momentum - &grad_b[l] * config.learning_rate;
                net.weights[l] += &velocity_w[l];
                net.biases[l] += &velocity_b[l];
            }
        }
    }

    let kind = if config.hidden_layer_widths.is_empty() {
        "logistic"
    } else {
        "mlp"
    };
    let meta = ModelMeta {
        kind: kind.into(),
        n_features: d,
        n_classes: k,
        layer_widths: net.layer_widths(),
        config_hash: config.config_hash(),
    };
    Ok(BlackBoxModel {
        inner: ModelInner::Builtin(net),
        meta,
    })
}

/// Build a logistic model directly from weights (K x d) and intercepts,
/// bypassing training. Used for fixtures and wrappers.
pub fn logistic_from_weights(weights: Array2<f64>, intercepts: Array1<f64>) -> Result<BlackBoxModel> {
    let k = weights.nrows();
    let d = weights.ncols();
    if intercepts.len() != k || k == 0 || d == 0 {
        return Err(GbflError::InvalidArgument(
            "weights must be K x d with K intercepts".into(),
        ));
    }
    let net = Network {
        weights: vec![weights],
        biases: vec![intercepts],
        scaler: None,
    };
    let meta = ModelMeta {
        kind: "logistic".into(),
        n_features: d,
        n_classes: k,
        layer_widths: net.layer_widths(),
        config_hash: "manual".into(),
    };
    Ok(BlackBoxModel {
        inner: ModelInner::Builtin(net),
        meta,
    })
}

// ---------------------------------------------------------------------------
// Serialization: magic bytes, JSON header, little-endian f64 weight blob.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModelFileHeader {
    schema: u32,
    kind: String,
    n_features: usize,
    n_classes: usize,
    layer_widths: Vec<usize>,
    has_scaler: bool,
    config_hash: String,
    blob_len: usize,
    blob_sha256: String,
}

pub fn save_model(model: &BlackBoxModel, path: impl AsRef<Path>) -> Result<()> {
    let path_str = path.as_ref().display().to_string();
    let net = match &model.inner {
        ModelInner::Builtin(net) => net,
        ModelInner::External(_) => {
            return Err(GbflError::ModelFile {
                path: path_str,
                message: "external models cannot be serialized".into(),
            })
        }
    };
    let mut values: Vec<f64> = Vec::new();
    if let Some((mean, std)) = &net.scaler {
        values.extend(mean.iter());
        values.extend(std.iter());
    }
    for (w, b) in net.weights.iter().zip(&net.biases) {
        values.extend(w.iter());
        values.extend(b.iter());
    }
    let mut blob = Vec::with_capacity(values.len() * 8);
    for v in &values {
        blob.extend_from_slice(&v.to_le_bytes());
    }
    let mut hasher = Sha256::new();
    hasher.update(&blob);
    let header = ModelFileHeader {
        schema: 1,
        kind: model.meta.kind.clone(),
        n_features: model.meta.n_features,
        n_classes: model.meta.n_classes,
        layer_widths: model.meta.layer_widths.clone(),
        has_scaler: net.scaler.is_some(),
        config_hash: model.meta.config_hash.clone(),
        blob_len: blob.len(),
        blob_sha256: hex_prefix(&hasher.finalize(), 64),
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    out.extend_from_slice(&blob);
    std::fs::write(path.as_ref(), out).map_err(|e| GbflError::io(path_str, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<BlackBoxModel> {
    let path_str = path.as_ref().display().to_string();
    let bytes = std::fs::read(path.as_ref()).map_err(|e| GbflError::io(path_str.clone(), e))?;
    let fail = |message: &str| GbflError::ModelFile {
        path: path_str.clone(),
        message: message.into(),
    };
    if bytes.len() < MODEL_MAGIC.len() + 4 {
        return Err(fail("file too short"));
    }
    if &bytes[..MODEL_MAGIC.len()] != MODEL_MAGIC {
        return Err(fail("bad magic bytes (unknown format or version)"));
    }
    let mut off = MODEL_MAGIC.len();
    let header_len = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    off += 4;
    if bytes.len() < off + header_len {
        return Err(fail("truncated header"));
    }
    let header: ModelFileHeader = serde_json::from_slice(&bytes[off..off + header_len])?;
    if header.schema != 1 {
        return Err(fail(&format!("unsupported schema version {}", header.schema)));
    }
    off += header_len;
    let blob = &bytes[off..];
    if blob.len() != header.blob_len {
        return Err(fail(&format!(
            "checksum error: blob is {} bytes, header says {}",
            blob.len(),
            header.blob_len
        )));
    }
    let mut hasher = Sha256::new();
    hasher.update(blob);
    if hex_prefix(&hasher.finalize(), 64) != header.blob_sha256 {
        return Err(fail("checksum error: blob hash mismatch"));
    }

    let mut values = Vec::with_capacity(blob.len() / 8);
    for chunk in blob.chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let widths = &header.layer_widths;
    if widths.len() < 2 || widths[0] != header.n_features || *widths.last().unwrap() != header.n_classes {
        return Err(fail("inconsistent layer widths"));
    }
    let mut cursor = 0usize;
    let mut take = |n: usize| -> Result<&[f64]> {
        if cursor + n > values.len() {
            return Err(GbflError::ModelFile {
                path: path_str.clone(),
                message: "checksum error: weight blob shorter than architecture".into(),
            });
        }
        let s = &values[cursor..cursor + n];
        cursor += n;
        Ok(s)
    };
    let scaler = if header.has_scaler {
        let mean = Array1::from_vec(take(header.n_features)?.to_vec());
        let std = Array1::from_vec(take(header.n_features)?.to_vec());
        Some((mean, std))
    } else {
        None
    };
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..widths.len() - 1 {
        let (fan_in, fan_out) = (widths[l], widths[l + 1]);
        let w = Array2::from_shape_vec((fan_out, fan_in), take(fan_out * fan_in)?.to_vec())
            .expect("shape matches");
        weights.push(w);
        biases.push(Array1::from_vec(take(fan_out)?.to_vec()));
    }
    if cursor != values.len() {
        return Err(fail("trailing bytes after weights"));
    }
    let net = Network {
        weights,
        biases,
        scaler,
    };
    let meta = ModelMeta {
        kind: header.kind,
        n_features: header.n_features,
        n_classes: header.n_classes,
        layer_widths: header.layer_widths,
        config_hash: header.config_hash,
    };
    Ok(BlackBoxModel {
        inner: ModelInner::Builtin(net),
        meta,
    })
}

// ---------------------------------------------------------------------------
// External process adapter.
// ---------------------------------------------------------------------------

struct ExternalIo {
    child: Child,
    stdin: std::process::ChildStdin,
    stdout: BufReader<std::process::ChildStdout>,
}

impl ExternalIo {
    fn query(&mut self, x: ArrayView2<'_, f64>, k: usize) -> Result<Array2<f64>> {
        let mut request = String::new();
        for row in x.rows() {
            let fields: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            request.push_str(&fields.join(","));
            request.push('\n');
        }
        self.stdin
            .write_all(request.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| self.fail(format!("write to child failed: {e}")))?;

        let mut out = Array2::zeros((x.nrows(), k));
        for i in 0..x.nrows() {
            let mut line = String::new();
            let read = self
                .stdout
                .read_line(&mut line)
                .map_err(|e| self.fail(format!("read from child failed: {e}")))?;
            if read == 0 {
                return Err(self.fail("child closed stdout before answering".into()));
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != k {
                return Err(GbflError::ExternalModel(format!(
                    "expected {k} probabilities, got {} in `{}`",
                    fields.len(),
                    line.trim()
                )));
            }
            let mut sum = 0.0;
            for (j, f) in fields.iter().enumerate() {
                let v: f64 = f.trim().parse().map_err(|_| {
                    GbflError::ExternalModel(format!("malformed probability `{f}`"))
                })?;
                if !v.is_finite() || v < 0.0 {
                    return Err(GbflError::ExternalModel(format!(
                        "probability `{v}` is negative or non-finite"
                    )));
                }
                out[[i, j]] = v;
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(GbflError::ExternalModel(format!(
                    "probabilities sum to {sum}, not a simplex"
                )));
            }
        }
        Ok(out)
    }

    fn fail(&mut self, message: String) -> GbflError {
        // Bubble the exit status up if the child already died.
        if let Ok(Some(status)) = self.child.try_wait() {
            return GbflError::ExternalModel(format!(
                "child exited with {status}: {message}"
            ));
        }
        GbflError::ExternalModel(message)
    }
}

impl Drop for ExternalIo {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Wrap an external process as a black-box model. The process must read CSV
/// feature rows on stdin and answer one CSV row of `n_classes` probabilities
/// per input on stdout, flushing after each answer. Queries are batched and
/// serialized; concurrent callers queue on an internal lock.
pub fn external_model(
    program: &str,
    args: &[String],
    n_features: usize,
    n_classes: usize,
) -> Result<BlackBoxModel> {
    if n_features == 0 || n_classes == 0 {
        return Err(GbflError::InvalidArgument(
            "external model needs n_features >= 1 and n_classes >= 1".into(),
        ));
    }
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| GbflError::ExternalModel(format!("failed to spawn `{program}`: {e}")))?;
    let stdin = child
        .stdin
        .take()
        .ok_or_else(|| GbflError::ExternalModel("child stdin unavailable".into()))?;
    let stdout = child
        .stdout
        .take()
        .ok_or_else(|| GbflError::ExternalModel("child stdout unavailable".into()))?;
    let meta = ModelMeta {
        kind: "external".into(),
        n_features,
        n_classes,
        layer_widths: Vec::new(),
        config_hash: {
            let mut hasher = Sha256::new();
            hasher.update(program.as_bytes());
            for a in args {
                hasher.update(a.as_bytes());
            }
            hex_prefix(&hasher.finalize(), 16)
        },
    };
    Ok(BlackBoxModel {
        inner: ModelInner::External(Mutex::new(ExternalIo {
            child,
            stdin,
            stdout: BufReader::new(stdout),
        })),
        meta,
    })
}

/// Serve a built-in model over the stdio protocol (the other end of
/// `external_model`). Reads CSV feature rows until EOF.
pub fn serve_stdio(model: &BlackBoxModel, input: &mut dyn Read, output: &mut dyn Write) -> Result<()> {
    let reader = BufReader::new(input);
    for line in reader.lines() {
        let line = line.map_err(|e| GbflError::ExternalModel(e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let values: std::result::Result<Vec<f64>, _> =
            trimmed.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let values = values
            .map_err(|_| GbflError::ExternalModel(format!("malformed input row `{trimmed}`")))?;
        let x = Array1::from_vec(values);
        let probs = model.confidence(x.view())?;
        let fields: Vec<String> = probs.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(output, "{}", fields.join(","))
            .and_then(|_| output.flush())
            .map_err(|e| GbflError::ExternalModel(e.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn blob_dataset(n_per_class: usize, seed: u64) -> Dataset {
        // Two well-separated gaussian blobs in 2-D: class 0 near (0,0),
        // class 1 near (6,6).
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.5).unwrap();
        let mut features = Array2::zeros((2 * n_per_class, 2));
        let mut labels = Vec::new();
        for i in 0..2 * n_per_class {
            let class = i % 2;
            let center = if class == 0 { 0.0 } else { 6.0 };
            features[[i, 0]] = center + normal.sample(&mut rng);
            features[[i, 1]] = center + normal.sample(&mut rng);
            labels.push(class);
        }
        Dataset::from_parts(features, labels).unwrap()
    }

    /// Independent linear-separability oracle: a perceptron must converge on
    /// separable data within a generous pass budget.
    fn perceptron_separates(data: &Dataset) -> bool {
        let mut w = vec![0.0; data.n_features() + 1];
        for _ in 0..200 {
            let mut mistakes = 0;
            for i in 0..data.n_samples() {
                let x = data.row(i);
                let score: f64 =
                    w[0] + x.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>();
                let y = if data.labels()[i] == 1 { 1.0 } else { -1.0 };
                if score * y <= 0.0 {
                    mistakes += 1;
                    w[0] += y;
                    for (j, v) in x.iter().enumerate() {
                        w[j + 1] += y * v;
                    }
                }
            }
            if mistakes == 0 {
                return true;
            }
        }
        false
    }

    #[test]
    fn logistic_fits_separable_blobs() {
        let data = blob_dataset(50, 11);
        assert!(perceptron_separates(&data), "fixture must be separable");
        let cfg = MlpConfig {
            epochs: 200,
            ..MlpConfig::logistic()
        };
        let model = train_reference_model(&cfg, &data, 0).unwrap();
        let preds = model.predict_batch(data.features().view()).unwrap();
        let correct = preds
            .iter()
            .zip(data.labels())
            .filter(|(p, l)| p == l)
            .count();
        assert!(correct as f64 / data.n_samples() as f64 >= 0.99);
    }

    #[test]
    fn sky_survey_shaped_mlp_trains() {
        let data = blob_dataset(10, 3);
        let cfg = MlpConfig {
            hidden_layer_widths: vec![128, 256, 256, 128, 64],
            dropout_rates: vec![0.5, 0.0, 0.5, 0.5, 0.5],
            epochs: 1,
            ..MlpConfig::default()
        };
        let model = train_reference_model(&cfg, &data, 0).unwrap();
        assert_eq!(model.meta().layer_widths, vec![2, 128, 256, 256, 128, 64, 2]);
        let probs = model.confidence_batch(data.features().view()).unwrap();
        for row in probs.rows() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let data = blob_dataset(10, 5);
        let init = MlpConfig {
            epochs: 0,
            ..MlpConfig::logistic()
        };
        let frozen = MlpConfig {
            epochs: 1,
            learning_rate: 0.0,
            ..MlpConfig::logistic()
        };
        let m0 = train_reference_model(&init, &data, 42).unwrap();
        let m1 = train_reference_model(&frozen, &data, 42).unwrap();
        let p0 = m0.confidence_batch(data.features().view()).unwrap();
        let p1 = m1.confidence_batch(data.features().view()).unwrap();
        assert_eq!(p0, p1);
    }

    #[test]
    fn training_is_deterministic() {
        let data = blob_dataset(20, 9);
        let cfg = MlpConfig {
            hidden_layer_widths: vec![8],
            dropout_rates: vec![0.2],
            epochs: 5,
            ..MlpConfig::default()
        };
        let a = train_reference_model(&cfg, &data, 7).unwrap();
        let b = train_reference_model(&cfg, &data, 7).unwrap();
        let pa = a.confidence_batch(data.features().view()).unwrap();
        let pb = b.confidence_batch(data.features().view()).unwrap();
        assert_eq!(pa, pb);
    }

    #[test]
    fn confidence_is_simplex_and_batched() {
        let model = logistic_from_weights(array![[0.0, 0.0], [0.0, 0.0]], array![0.0, 0.0]).unwrap();
        let p = model.confidence(array![3.0, -1.0].view()).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-12);

        let one_d = logistic_from_weights(array![[0.0], [1.0]], array![0.0, 0.0]).unwrap();
        let p = one_d.confidence(array![0.0].view()).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);

        let batch = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let rows = model.confidence_batch(batch.view()).unwrap();
        for i in 0..3 {
            let single = model.confidence(batch.row(i)).unwrap();
            assert_eq!(rows.row(i).to_owned(), single);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let model = logistic_from_weights(array![[1.0, 2.0]], array![0.0]).unwrap();
        assert!(model.confidence(array![1.0].view()).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        // 5-unit toy network, relative error <= 1e-4 against central
        // differences of the full loss.
        let data = Dataset::from_parts(
            array![[0.5, -1.0], [1.5, 2.0], [-0.5, 0.3], [0.1, 0.9]],
            vec![0, 1, 2, 1],
        )
        .unwrap();
        let cfg = MlpConfig {
            hidden_layer_widths: vec![5],
            epochs: 0,
            ..MlpConfig::default()
        };
        let model = train_reference_model(&cfg, &data, 1).unwrap();
        let mut net = match &model.inner {
            ModelInner::Builtin(n) => n.clone(),
            _ => unreachable!(),
        };
        let x = data.features().clone();
        let y = data.labels().to_vec();
        let (_, grad_w, grad_b) = net.loss_and_grads(&x, &y, None);
        let h = 1e-5;
        for l in 0..net.weights.len() {
            for idx in 0..net.weights[l].len() {
                let flat = net.weights[l].as_slice_mut().unwrap();
                let orig = flat[idx];
                flat[idx] = orig + h;
                let (lp, _, _) = net.loss_and_grads(&x, &y, None);
                net.weights[l].as_slice_mut().unwrap()[idx] = orig - h;
                let (lm, _, _) = net.loss_and_grads(&x, &y, None);
                net.weights[l].as_slice_mut().unwrap()[idx] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let analytic = grad_w[l].as_slice().unwrap()[idx];
                let scale = analytic.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (analytic - fd).abs() / scale <= 1e-4,
                    "layer {l} weight {idx}: analytic {analytic}, fd {fd}"
                );
            }
            for idx in 0..net.biases[l].len() {
                let orig = net.biases[l][idx];
                net.biases[l][idx] = orig + h;
                let (lp, _, _) = net.loss_and_grads(&x, &y, None);
                net.biases[l][idx] = orig - h;
                let (lm, _, _) = net.loss_and_grads(&x, &y, None);
                net.biases[l][idx] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let analytic = grad_b[l][idx];
                let scale = analytic.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (analytic - fd).abs() / scale <= 1e-4,
                    "layer {l} bias {idx}: analytic {analytic}, fd {fd}"
                );
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let data = blob_dataset(15, 2);
        let cfg = MlpConfig {
            hidden_layer_widths: vec![4],
            epochs: 3,
            standardize: true,
            ..MlpConfig::default()
        };
        let model = train_reference_model(&cfg, &data, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.meta(), model.meta());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let probes = Array2::from_shape_fn((100, 2), |_| rng.gen_range(-5.0..10.0));
        let a = model.confidence_batch(probes.view()).unwrap();
        let b = loaded.confidence_batch(probes.view()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn load_rejects_truncation_and_bad_magic() {
        let data = blob_dataset(5, 2);
        let model = train_reference_model(&MlpConfig::logistic(), &data, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let truncated = dir.path().join("truncated.bin");
        std::fs::write(&truncated, &bytes[..bytes.len() - 9]).unwrap();
        let err = load_model(&truncated).unwrap_err().to_string();
        assert!(err.contains("checksum"), "got: {err}");

        let mut wrong = bytes.clone();
        wrong[6] = b'2';
        let bad_magic = dir.path().join("bad.bin");
        std::fs::write(&bad_magic, &wrong).unwrap();
        assert!(load_model(&bad_magic).is_err());
    }

    #[test]
    fn external_stub_constant_class() {
        let model = external_model(
            "/bin/sh",
            &["-c".into(), "while read line; do echo 1,0; done".into()],
            2,
            2,
        )
        .unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let preds = model.predict_batch(x.view()).unwrap();
        assert_eq!(preds, vec![0, 0]);
    }

    #[test]
    fn external_adapter_round_trips_a_builtin_logistic() {
        // The same logistic model, reached directly and through a child
        // process speaking the stdio protocol, must agree everywhere.
        if Command::new("python3").arg("--version").output().is_err() {
            eprintln!("python3 unavailable; skipping adapter round-trip");
            return;
        }
        let direct =
            logistic_from_weights(array![[0.0, 0.0], [1.2, -0.7]], array![0.0, -1.0]).unwrap();
        let script = r#"
import math, sys
for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    x = [float(v) for v in line.split(",")]
    s0, s1 = 0.0, 1.2 * x[0] - 0.7 * x[1] - 1.0
    m = max(s0, s1)
    e0, e1 = math.exp(s0 - m), math.exp(s1 - m)
    z = e0 + e1
    print(f"{e0 / z:.17g},{e1 / z:.17g}", flush=True)
"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.py");
        std::fs::write(&path, script).unwrap();
        let wrapped =
            external_model("python3", &[path.display().to_string()], 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let probes = Array2::from_shape_fn((50, 2), |_| rng.gen_range(-10.0..10.0));
        let a = direct.confidence_batch(probes.view()).unwrap();
        let b = wrapped.confidence_batch(probes.view()).unwrap();
        for i in 0..probes.nrows() {
            assert_eq!(
                argmax(a.row(i)),
                argmax(b.row(i)),
                "prediction diverged on probe {i}"
            );
            for k in 0..2 {
                assert!(
                    (a[[i, k]] - b[[i, k]]).abs() < 1e-12,
                    "confidence diverged on probe {i}"
                );
            }
        }
    }

    #[test]
    fn serve_stdio_speaks_the_protocol() {
        let model =
            logistic_from_weights(array![[0.5, 0.0], [0.0, 0.5]], array![0.0, 0.0]).unwrap();
        let mut input = std::io::Cursor::new("1.0,2.0\n-3.0,0.5\n");
        let mut output = Vec::new();
        serve_stdio(&model, &mut input, &mut output).unwrap();
        let text = String::from_utf8(output).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        for (line, x) in lines.iter().zip([array![1.0, 2.0], array![-3.0, 0.5]]) {
            let parsed: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            let direct = model.confidence(x.view()).unwrap();
            assert!((parsed[0] - direct[0]).abs() < 1e-15);
            assert!((parsed[1] - direct[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn external_stub_non_simplex_is_error() {
        let model = external_model(
            "/bin/sh",
            &["-c".into(), "while read line; do echo 0.3,0.8; done".into()],
            2,
            2,
        )
        .unwrap();
        let x = array![[1.0, 2.0]];
        let err = model.confidence_batch(x.view()).unwrap_err().to_string();
        assert!(err.contains("simplex"), "got: {err}");
    }
}
