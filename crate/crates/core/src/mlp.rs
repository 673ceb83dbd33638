//! One-hidden-layer sigmoid perceptron with a regularized MSE objective.
//!
//! Parameters are kept as one flat vector laid out `w1 | b1 | w2 | b2`, with
//! both weight matrices row-major (`w1` is hidden x input, `w2` is
//! output x hidden). The objective is
//! `(1 - reg_ratio) * MSE + reg_ratio * MSW`, where MSW averages the squares of
//! every parameter, biases included.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phoneme::VowelLabel;
use crate::pipeline::FrontendConfig;
use crate::scg::TrainOptions;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("input has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("model file format_version {found}, expected {expected}")]
    VersionMismatch { found: u64, expected: u32 },
    #[error("malformed model file: {0}")]
    MalformedModelFile(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub reg_ratio: f64,
    pub msw_includes_biases: bool,
    #[serde(default)]
    pub train: Option<TrainOptions>,
    #[serde(default)]
    pub frontend: Option<FrontendConfig>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            reg_ratio: 0.5,
            msw_includes_biases: true,
            train: None,
            frontend: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub n_outputs: usize,
    params: Vec<f64>,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
    pub labels: Vec<VowelLabel>,
    pub config: ModelConfig,
}

/// Inputs and targets, one row per example.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, input: Vec<f64>, target: Vec<f64>) {
        self.inputs.push(input);
        self.targets.push(target);
    }
}

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Per-parameter-block bookkeeping for the flat layout.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n_in: usize,
    n_hid: usize,
    n_out: usize,
}

impl Layout {
    fn w1(&self) -> std::ops::Range<usize> {
        0..self.n_hid * self.n_in
    }
    fn b1(&self) -> std::ops::Range<usize> {
        let s = self.n_hid * self.n_in;
        s..s + self.n_hid
    }
    fn w2(&self) -> std::ops::Range<usize> {
        let s = self.b1().end;
        s..s + self.n_out * self.n_hid
    }
    fn b2(&self) -> std::ops::Range<usize> {
        let s = self.w2().end;
        s..s + self.n_out
    }
    fn total(&self) -> usize {
        self.b2().end
    }
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases, identity normalization.
    pub fn init(n_inputs: usize, n_hidden: usize, n_outputs: usize, seed: u64) -> Self {
        assert!(
            n_inputs >= 1 && n_hidden >= 1 && n_outputs >= 1,
            "layer sizes must be positive"
        );
        let layout = Layout {
            n_in: n_inputs,
            n_hid: n_hidden,
            n_out: n_outputs,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; layout.total()];
        let r1 = glorot_bound(n_inputs, n_hidden);
        for w in &mut params[layout.w1()] {
            *w = rng.random_range(-r1..=r1);
        }
        let r2 = glorot_bound(n_hidden, n_outputs);
        for w in &mut params[layout.w2()] {
            *w = rng.random_range(-r2..=r2);
        }
        Self {
            n_inputs,
            n_hidden,
            n_outputs,
            params,
            norm_mean: vec![0.0; n_inputs],
            norm_std: vec![1.0; n_inputs],
            labels: VowelLabel::ALL.iter().copied().take(n_outputs).collect(),
            config: ModelConfig::default(),
        }
    }

    fn layout(&self) -> Layout {
        Layout {
            n_in: self.n_inputs,
            n_hid: self.n_hidden,
            n_out: self.n_outputs,
        }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.params.len(), "parameter count");
        self.params.copy_from_slice(params);
    }

    pub fn w1(&self) -> &[f64] {
        &self.params[self.layout().w1()]
    }
    pub fn b1(&self) -> &[f64] {
        &self.params[self.layout().b1()]
    }
    pub fn w2(&self) -> &[f64] {
        &self.params[self.layout().w2()]
    }
    pub fn b2(&self) -> &[f64] {
        &self.params[self.layout().b2()]
    }

    /// Sets z-score statistics from `inputs`; zero-variance features get std 1.
    pub fn fit_normalization(&mut self, inputs: &[Vec<f64>]) {
        let n = inputs.len() as f64;
        if inputs.is_empty() {
            return;
        }
        for j in 0..self.n_inputs {
            let mean = inputs.iter().map(|x| x[j]).sum::<f64>() / n;
            let var = inputs.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            self.norm_mean[j] = mean;
            self.norm_std[j] = if std > 1e-12 { std } else { 1.0 };
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<(), MlpError> {
        if x.len() != self.n_inputs {
            return Err(MlpError::DimensionMismatch {
                expected: self.n_inputs,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.norm_mean.iter().zip(&self.norm_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// `(hidden activations, outputs)` for a raw feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>), MlpError> {
        self.check_input(x)?;
        Ok(forward_normalized(&self.params, self.layout(), &self.normalize(x)))
    }

    /// Arg-max label and the raw output scores; ties go to the lower index.
    pub fn predict(&self, x: &[f64]) -> Result<(VowelLabel, Vec<f64>), MlpError> {
        let (_, y) = self.forward(x)?;
        if self.labels.len() != y.len() {
            return Err(MlpError::MalformedModelFile(format!(
                "{} labels for {} outputs",
                self.labels.len(),
                y.len()
            )));
        }
        Ok((self.labels[argmax(&y)], y))
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Index of the largest score; first index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn forward_normalized(params: &[f64], l: Layout, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w1 = &params[l.w1()];
    let b1 = &params[l.b1()];
    let w2 = &params[l.w2()];
    let b2 = &params[l.b2()];
    let h: Vec<f64> = (0..l.n_hid)
        .map(|i| {
            let row = &w1[i * l.n_in..(i + 1) * l.n_in];
            sigmoid(b1[i] + row.iter().zip(z).map(|(w, v)| w * v).sum::<f64>())
        })
        .collect();
    let y = (0..l.n_out)
        .map(|k| {
            let row = &w2[k * l.n_hid..(k + 1) * l.n_hid];
            sigmoid(b2[k] + row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>())
        })
        .collect();
    (h, y)
}

/// Batch with inputs already z-scored, ready for repeated objective evaluation.
#[derive(Debug, Clone)]
pub struct PreparedBatch {
    z: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl PreparedBatch {
    pub fn new(model: &MlpModel, batch: &Batch) -> Result<Self, MlpError> {
        if batch.is_empty() {
            return Err(MlpError::EmptyBatch);
        }
        for (x, t) in batch.inputs.iter().zip(&batch.targets) {
            model.check_input(x)?;
            if t.len() != model.n_outputs {
                return Err(MlpError::DimensionMismatch {
                    expected: model.n_outputs,
                    got: t.len(),
                });
            }
        }
        Ok(Self {
            z: batch.inputs.iter().map(|x| model.normalize(x)).collect(),
            targets: batch.targets.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// Objective pieces at a parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub mse: f64,
    pub msw: f64,
    pub perf: f64,
}

pub fn mean_square(params: &[f64]) -> f64 {
    params.iter().map(|w| w * w).sum::<f64>() / params.len() as f64
}

fn mse_at(params: &[f64], l: Layout, data: &PreparedBatch) -> f64 {
    let mut sse = 0.0;
    for (z, t) in data.z.iter().zip(&data.targets) {
        let (_, y) = forward_normalized(params, l, z);
        sse += y.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    sse / (data.len() * l.n_out) as f64
}

/// Gradient of the plain MSE term, accumulated in example order.
fn mse_grad_at(params: &[f64], l: Layout, data: &PreparedBatch, grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let scale = 2.0 / (data.len() * l.n_out) as f64;
    let (w2_range, b1_range, b2_range) = (l.w2(), l.b1(), l.b2());
    let w2 = &params[w2_range.clone()];
    let mut delta2 = vec![0.0; l.n_out];
    let mut delta1 = vec![0.0; l.n_hid];
    let mut sse = 0.0;
    for (z, t) in data.z.iter().zip(&data.targets) {
        let (h, y) = forward_normalized(params, l, z);
        for k in 0..l.n_out {
            let e = y[k] - t[k];
            sse += e * e;
            delta2[k] = scale * e * y[k] * (1.0 - y[k]);
        }
        for i in 0..l.n_hid {
            let back: f64 = (0..l.n_out).map(|k| w2[k * l.n_hid + i] * delta2[k]).sum();
            delta1[i] = back * h[i] * (1.0 - h[i]);
        }
        for k in 0..l.n_out {
            let row = &mut grad[w2_range.start + k * l.n_hid..w2_range.start + (k + 1) * l.n_hid];
            for (g, hv) in row.iter_mut().zip(&h) {
                *g += delta2[k] * hv;
            }
            grad[b2_range.start + k] += delta2[k];
        }
        for i in 0..l.n_hid {
            let row = &mut grad[i * l.n_in..(i + 1) * l.n_in];
            for (g, zv) in row.iter_mut().zip(z) {
                *g += delta1[i] * zv;
            }
            grad[b1_range.start + i] += delta1[i];
        }
    }
    sse / (data.len() * l.n_out) as f64
}

/// Evaluates the objective at `params` without touching the model's own parameters.
pub fn objective_at(model: &MlpModel, params: &[f64], data: &PreparedBatch, reg_ratio: f64) -> Objective {
    let l = model.layout();
    let mse = if reg_ratio < 1.0 { mse_at(params, l, data) } else { 0.0 };
    let msw = mean_square(params);
    Objective {
        mse,
        msw,
        perf: (1.0 - reg_ratio) * mse + reg_ratio * msw,
    }
}

/// Objective and its gradient at `params`; `grad` is overwritten.
pub fn objective_grad_at(
    model: &MlpModel,
    params: &[f64],
    data: &PreparedBatch,
    reg_ratio: f64,
    grad: &mut [f64],
) -> Objective {
    let l = model.layout();
    let mse = mse_grad_at(params, l, data, grad);
    let msw = mean_square(params);
    let p = params.len() as f64;
    for (g, w) in grad.iter_mut().zip(params) {
        *g = (1.0 - reg_ratio) * *g + reg_ratio * 2.0 * w / p;
    }
    Objective {
        mse,
        msw,
        perf: (1.0 - reg_ratio) * mse + reg_ratio * msw,
    }
}

/// `(1 - reg_ratio) * MSE + reg_ratio * MSW` on raw features.
pub fn performance(model: &MlpModel, batch: &Batch, reg_ratio: f64) -> Result<f64, MlpError> {
    let data = PreparedBatch::new(model, batch)?;
    Ok(objective_at(model, &model.params, &data, reg_ratio).perf)
}

/// Analytic gradient of [`performance`] over the flat parameter vector.
pub fn gradient(model: &MlpModel, batch: &Batch, reg_ratio: f64) -> Result<Vec<f64>, MlpError> {
    let data = PreparedBatch::new(model, batch)?;
    let mut grad = vec![0.0; model.n_params()];
    objective_grad_at(model, &model.params, &data, reg_ratio, &mut grad);
    Ok(grad)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    n_inputs: usize,
    n_hidden: usize,
    n_outputs: usize,
    labels: Vec<VowelLabel>,
    config: ModelConfig,
    norm_mean: Vec<f64>,
    norm_std: Vec<f64>,
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
}

impl MlpModel {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            n_inputs: self.n_inputs,
            n_hidden: self.n_hidden,
            n_outputs: self.n_outputs,
            labels: self.labels.clone(),
            config: self.config.clone(),
            norm_mean: self.norm_mean.clone(),
            norm_std: self.norm_std.clone(),
            w1: self.w1().chunks(self.n_inputs).map(<[f64]>::to_vec).collect(),
            b1: self.b1().to_vec(),
            w2: self.w2().chunks(self.n_hidden).map(<[f64]>::to_vec).collect(),
            b2: self.b2().to_vec(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, MlpError> {
        let malformed = |m: String| MlpError::MalformedModelFile(m);
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| malformed("missing format_version".into()))?;
        if version != FORMAT_VERSION as u64 {
            return Err(MlpError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let f: ModelFile = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        let rows_ok = |m: &[Vec<f64>], rows: usize, cols: usize| m.len() == rows && m.iter().all(|r| r.len() == cols);
        if f.n_inputs == 0
            || f.n_hidden == 0
            || f.n_outputs == 0
            || !rows_ok(&f.w1, f.n_hidden, f.n_inputs)
            || !rows_ok(&f.w2, f.n_outputs, f.n_hidden)
            || f.b1.len() != f.n_hidden
            || f.b2.len() != f.n_outputs
            || f.norm_mean.len() != f.n_inputs
            || f.norm_std.len() != f.n_inputs
            || f.labels.len() != f.n_outputs
        {
            return Err(malformed("array dimensions disagree with layer sizes".into()));
        }
        if f.norm_std.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(malformed("non-positive normalization std".into()));
        }
        let params: Vec<f64> =
            f.w1.into_iter()
                .flatten()
                .chain(f.b1)
                .chain(f.w2.into_iter().flatten())
                .chain(f.b2)
                .collect();
        Ok(Self {
            n_inputs: f.n_inputs,
            n_hidden: f.n_hidden,
            n_outputs: f.n_outputs,
            params,
            norm_mean: f.norm_mean,
            norm_std: f.norm_std,
            labels: f.labels,
            config: f.config,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MlpError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| MlpError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MlpError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| MlpError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}
