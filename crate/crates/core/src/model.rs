//! Dense feed-forward classifier with hand-written backpropagation.
//!
//! Parameters live in one flat vector. Each layer stores its weight matrix
//! row-major (`out x in`) followed by its bias, layers in order.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    /// Input dimension, hidden widths, class count.
    pub layer_sizes: Vec<usize>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_activation() -> Activation {
    Activation::Tanh
}

fn default_init_scale() -> f64 {
    0.5
}

impl MlpConfig {
    /// The 2 -> 32 -> 32 -> `classes` tanh network.
    pub fn toy(classes: usize, seed: u64) -> Self {
        MlpConfig {
            layer_sizes: vec![2, 32, 32, classes],
            activation: Activation::Tanh,
            init_scale: default_init_scale(),
            seed,
        }
    }
}

/// Flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Params(pub Vec<f64>);

impl Params {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    /// Offset of the weight block; the bias follows at `offset + inputs * outputs`.
    offset: usize,
}

impl LayerShape {
    fn bias_offset(&self) -> usize {
        self.offset + self.inputs * self.outputs
    }

    fn end(&self) -> usize {
        self.bias_offset() + self.outputs
    }
}

/// Network architecture: config plus the derived parameter layout.
#[derive(Debug, Clone)]
pub struct Mlp {
    config: MlpConfig,
    layers: Vec<LayerShape>,
    n_params: usize,
}

impl Mlp {
    pub fn new(config: MlpConfig) -> Result<Self> {
        if config.layer_sizes.len() < 2 {
            return Err(Error::config(
                "model.layer_sizes",
                "needs at least input and output sizes",
            ));
        }
        if config.layer_sizes.contains(&0) {
            return Err(Error::config("model.layer_sizes", "sizes must be >= 1"));
        }
        if !(config.init_scale > 0.0 && config.init_scale.is_finite()) {
            return Err(Error::config("model.init_scale", "must be finite and > 0"));
        }
        let mut offset = 0;
        let layers: Vec<_> = config
            .layer_sizes
            .windows(2)
            .map(|w| {
                let shape = LayerShape {
                    inputs: w[0],
                    outputs: w[1],
                    offset,
                };
                offset = shape.end();
                shape
            })
            .collect();
        Ok(Mlp {
            config,
            layers,
            n_params: offset,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.layer_sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.config.layer_sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Parameter index range of layer `l` (weights then bias).
    pub fn layer_range(&self, l: usize) -> std::ops::Range<usize> {
        self.layers[l].offset..self.layers[l].end()
    }

    /// Uniform initialization in `[-init_scale, init_scale]`, seeded by the config.
    pub fn init(&self) -> Params {
        let mut rng = rng::stream(self.config.seed, &[purpose::INIT]);
        let s = self.config.init_scale;
        Params((0..self.n_params).map(|_| rng.gen_range(-s..=s)).collect())
    }

    pub fn zeros(&self) -> Params {
        Params(vec![0.0; self.n_params])
    }

    fn check(&self, theta: &Params, x: &[f64]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::DimensionMismatch {
                expected: self.n_params,
                got: theta.len(),
            });
        }
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn activate(&self, z: f64) -> f64 {
        match self.config.activation {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn activation_slope(&self, a: f64) -> f64 {
        match self.config.activation {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn affine(theta: &[f64], shape: &LayerShape, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let w = &theta[shape.offset..shape.bias_offset()];
        let b = &theta[shape.bias_offset()..shape.end()];
        for (row, bias) in w.chunks_exact(shape.inputs).zip(b) {
            out.push(bias + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>());
        }
    }

    /// Logits for one input.
    pub fn forward(&self, theta: &Params, x: &[f64]) -> Result<Vec<f64>> {
        self.check(theta, x)?;
        let mut current = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, shape) in self.layers.iter().enumerate() {
            Self::affine(&theta.0, shape, &current, &mut next);
            if l < last {
                next.iter_mut().for_each(|z| *z = self.activate(*z));
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Cross-entropy of `forward(theta, x)` against `y`.
    pub fn sample_loss(&self, theta: &Params, x: &[f64], y: usize) -> Result<f64> {
        loss(&self.forward(theta, x)?, y)
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_grad(&self, theta: &Params, x: &[f64], y: usize) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.n_params];
        let value = self.accumulate_loss_grad(theta, x, y, 1.0, &mut grad)?;
        Ok((value, grad))
    }

    /// Adds `scale * d loss / d theta` into `grad` and returns the loss.
    pub fn accumulate_loss_grad(
        &self,
        theta: &Params,
        x: &[f64],
        y: usize,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        self.check(theta, x)?;
        if grad.len() != self.n_params {
            return Err(Error::DimensionMismatch {
                expected: self.n_params,
                got: grad.len(),
            });
        }
        let last = self.layers.len() - 1;
        // activations[0] = x, activations[l + 1] = output of layer l
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for (l, shape) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(shape.outputs);
            Self::affine(&theta.0, shape, &activations[l], &mut out);
            if l < last {
                out.iter_mut().for_each(|z| *z = self.activate(*z));
            }
            activations.push(out);
        }
        let logits = &activations[last + 1];
        let value = loss(logits, y)?;

        // d loss / d logits = softmax - onehot
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let mut delta: Vec<f64> = exps.iter().map(|e| e / total).collect();
        delta[y] -= 1.0;

        for l in (0..self.layers.len()).rev() {
            let shape = self.layers[l];
            let input = &activations[l];
            let bias = shape.bias_offset();
            for (o, &d) in delta.iter().enumerate() {
                let row = shape.offset + o * shape.inputs;
                for (i, &a) in input.iter().enumerate() {
                    grad[row + i] += scale * d * a;
                }
                grad[bias + o] += scale * d;
            }
            if l > 0 {
                let w = &theta.0[shape.offset..shape.bias_offset()];
                delta = input
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| {
                        let back: f64 = delta
                            .iter()
                            .enumerate()
                            .map(|(o, &d)| d * w[o * shape.inputs + i])
                            .sum();
                        back * self.activation_slope(a)
                    })
                    .collect();
            }
        }
        Ok(value)
    }

    /// Mean loss and mean gradient over `(x, y)` pairs.
    ///
    /// Per-sample work runs in parallel; the reduction is a left fold in
    /// input order, so the result does not depend on the thread count.
    pub fn mean_loss_grad<'a, I>(&self, theta: &Params, batch: I) -> Result<(f64, Vec<f64>)>
    where
        I: IntoParallelIterator<Item = (&'a [f64], usize)>,
        I::Iter: IndexedParallelIterator,
    {
        let per_sample: Vec<(f64, Vec<f64>)> = batch
            .into_par_iter()
            .map(|(x, y)| self.loss_grad(theta, x, y))
            .collect::<Result<_>>()?;
        if per_sample.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let n = per_sample.len() as f64;
        let mut grad = vec![0.0; self.n_params];
        let mut total = 0.0;
        for (value, g) in &per_sample {
            total += value;
            grad.iter_mut().zip(g).for_each(|(acc, v)| *acc += v);
        }
        grad.iter_mut().for_each(|v| *v /= n);
        Ok((total / n, grad))
    }
}

/// Cross-entropy `-log softmax(logits)[y]`, max-subtracted.
pub fn loss(logits: &[f64], y: usize) -> Result<f64> {
    if y >= logits.len() {
        return Err(Error::InvalidArgument(format!("label {y} outside 0..{}", logits.len())));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite("logits".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    Ok(lse - logits[y])
}

/// `theta - lr * grad`.
pub fn sgd_step(theta: &Params, grad: &[f64], lr: f64) -> Result<Params> {
    if theta.len() != grad.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: grad.len(),
        });
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {lr}")));
    }
    Ok(Params(theta.0.iter().zip(grad).map(|(t, g)| t - lr * g).collect()))
}

const CHECKPOINT_MAGIC: &str = "invaug-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Text checkpoint: a versioned header, the config, then one parameter per
/// line as the hex bit pattern of the `f64`, so it round-trips exactly.
pub fn write_checkpoint(config: &MlpConfig, theta: &Params) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}");
    let sizes: Vec<String> = config.layer_sizes.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(s, "layer_sizes {}", sizes.join(" "));
    let _ = writeln!(s, "activation {}", config.activation.name());
    let _ = writeln!(s, "init_scale {:016x}", config.init_scale.to_bits());
    let _ = writeln!(s, "seed {}", config.seed);
    let _ = writeln!(s, "params {}", theta.len());
    for v in &theta.0 {
        let _ = writeln!(s, "{:016x}", v.to_bits());
    }
    s
}

pub fn read_checkpoint(text: &str) -> Result<(MlpConfig, Params)> {
    let bad = |what: &str| Error::Checkpoint(what.to_string());
    let mut lines = text.lines();
    let mut field = |name: &str| -> Result<String> {
        let line = lines.next().ok_or_else(|| bad(&format!("missing `{name}`")))?;
        line.strip_prefix(name)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(&format!("expected `{name}`, found `{line}`")))
    };
    let version = field(CHECKPOINT_MAGIC)?;
    if version != format!("v{CHECKPOINT_VERSION}") {
        return Err(bad(&format!("unsupported version `{version}`")));
    }
    let layer_sizes = field("layer_sizes")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("layer size")))
        .collect::<Result<Vec<usize>>>()?;
    let activation = field("activation")?.parse()?;
    let init_scale = f64::from_bits(u64::from_str_radix(&field("init_scale")?, 16).map_err(|_| bad("init_scale"))?);
    let seed = field("seed")?.parse().map_err(|_| bad("seed"))?;
    let n: usize = field("params")?.parse().map_err(|_| bad("params count"))?;
    let values = lines
        .map(|l| {
            u64::from_str_radix(l.trim(), 16)
                .map(f64::from_bits)
                .map_err(|_| bad("parameter"))
        })
        .collect::<Result<Vec<f64>>>()?;
    let config = MlpConfig {
        layer_sizes,
        activation,
        init_scale,
        seed,
    };
    let mlp = Mlp::new(config.clone())?;
    if values.len() != n || n != mlp.n_params() {
        return Err(bad(&format!(
            "expected {} parameters, found {}",
            mlp.n_params(),
            values.len()
        )));
    }
    Ok((config, Params(values)))
}

/// Result of comparing analytic gradients against central differences.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub probes: usize,
    pub step: f64,
    pub max_relative_error: f64,
    /// Worst error per layer, indexed like [`Mlp::layer_range`].
    pub per_layer: Vec<f64>,
}

/// Relative error with a unit floor on the scale.
///
/// Below |g| = 1 it becomes an absolute error, so entries whose true value
/// is zero do not blow up the ratio.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// Central finite difference of the loss with respect to each parameter.
pub fn numeric_grad(mlp: &Mlp, theta: &Params, x: &[f64], y: usize, h: f64) -> Result<Vec<f64>> {
    let mut probe = theta.clone();
    (0..theta.len())
        .map(|i| {
            let base = probe.0[i];
            probe.0[i] = base + h;
            let up = mlp.sample_loss(&probe, x, y)?;
            probe.0[i] = base - h;
            let down = mlp.sample_loss(&probe, x, y)?;
            probe.0[i] = base;
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// Runs `probes` random (theta, x, y) comparisons between `grad_fn` and
/// central differences with step `h`.
pub fn gradient_check<F>(mlp: &Mlp, probes: usize, h: f64, seed: u64, grad_fn: F) -> Result<GradCheckReport>
where
    F: Fn(&Mlp, &Params, &[f64], usize) -> Result<Vec<f64>>,
{
    let mut per_layer = vec![0.0f64; mlp.n_layers()];
    for probe in 0..probes {
        let mut rng = rng::stream(seed, &[purpose::PROBE, probe as u64]);
        let s = mlp.config.init_scale.max(0.5);
        let theta = Params((0..mlp.n_params()).map(|_| rng.gen_range(-s..=s)).collect());
        let x: Vec<f64> = (0..mlp.input_dim()).map(|_| rng.gen_range(-2.0..=2.0)).collect();
        let y = rng::index(&mut rng, mlp.classes());
        let analytic = grad_fn(mlp, &theta, &x, y)?;
        let numeric = numeric_grad(mlp, &theta, &x, y, h)?;
        for (l, worst) in per_layer.iter_mut().enumerate() {
            for i in mlp.layer_range(l) {
                *worst = worst.max(relative_error(analytic[i], numeric[i]));
            }
        }
    }
    Ok(GradCheckReport {
        probes,
        step: h,
        max_relative_error: per_layer.iter().copied().fold(0.0, f64::max),
        per_layer,
    })
}
