//! Primal-dual augmentation training and its baselines.
//!
//! Per batch: draw `m` transformations per sample, measure the constraint
//! slack `s = mean augmented loss - epsilon`, take an SGD step on the
//! Lagrangian `clean loss + gamma * s`, then move the dual variable by
//! `gamma <- max(0, gamma + eta_d * s)`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::model::{Mlp, Params};
use crate::oracle::empirical_entropy;
use crate::rng::{self, purpose};
use crate::sampler::{orbit_loss_fn, run_chain, SamplerConfig};
use crate::transform::{Transform, TransformSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Loss-proportional sampling with dual ascent on gamma.
    PrimalDual,
    /// Loss-proportional sampling with gamma held at `fixed_gamma`.
    Penalized,
    /// Clean data only.
    Erm,
    /// Uniform sampling with dual ascent on gamma.
    UniformConstrained,
}

impl Mode {
    pub fn samples_transforms(self) -> bool {
        self != Mode::Erm
    }

    fn ascends_dual(self) -> bool {
        matches!(self, Mode::PrimalDual | Mode::UniformConstrained)
    }
}

fn default_eta_d() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    pub mode: Mode,
    /// Constraint level. Required by `primal_dual` and `uniform_constrained`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub eta_p: f64,
    #[serde(default = "default_eta_d")]
    pub eta_d: f64,
    /// Penalty weight; required by `penalized` and rejected elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_gamma: Option<f64>,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// Heavy-ball momentum on the primal step; 0 is plain SGD.
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub seed: u64,
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("trainer.eta_p", self.eta_p)?;
        positive("trainer.eta_d", self.eta_d)?;
        if self.batch_size == 0 {
            return Err(Error::config("trainer.batch_size", "must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("trainer.epochs", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("trainer.momentum", "must lie in [0, 1)"));
        }
        match self.epsilon {
            Some(e) if !(e >= 0.0 && e.is_finite()) => {
                return Err(Error::config(
                    "trainer.epsilon",
                    format!("must be finite and >= 0, got {e}"),
                ))
            }
            None if self.mode.ascends_dual() => {
                return Err(Error::config(
                    "trainer.epsilon",
                    format!("required by mode {:?}", self.mode),
                ))
            }
            _ => {}
        }
        match (self.mode, self.fixed_gamma) {
            (Mode::Penalized, None) => return Err(Error::config("trainer.fixed_gamma", "required by mode penalized")),
            (Mode::Penalized, Some(g)) if !(g >= 0.0 && g.is_finite()) => {
                return Err(Error::config(
                    "trainer.fixed_gamma",
                    format!("must be finite and >= 0, got {g}"),
                ))
            }
            (Mode::Penalized, Some(_)) => {}
            (_, Some(_)) => return Err(Error::config("trainer.fixed_gamma", "only valid in mode penalized")),
            (_, None) => {}
        }
        self.sampler.validate()
    }

    fn epsilon_or_zero(&self) -> f64 {
        self.epsilon.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualState {
    pub gamma: f64,
    pub eta_d: f64,
}

impl DualState {
    pub fn new(eta_d: f64) -> Self {
        DualState { gamma: 0.0, eta_d }
    }

    /// Projected ascent step `max(0, gamma + eta_d * slack)`.
    pub fn update(self, slack: f64) -> DualState {
        DualState {
            gamma: (self.gamma + self.eta_d * slack).max(0.0),
            eta_d: self.eta_d,
        }
    }
}

pub fn dual_update(d: DualState, slack: f64) -> DualState {
    d.update(slack)
}

pub fn lagrangian(clean_loss: f64, gamma: f64, slack: f64) -> f64 {
    clean_loss + gamma * slack
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    /// Mean batch slack; NaN in `erm` mode, which samples nothing.
    pub slack: f64,
    pub gamma: f64,
    /// Entropy of the epoch's sampled transformations; NaN in `erm` mode.
    pub entropy: f64,
    pub transform_histogram: Vec<usize>,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub gamma_start: f64,
    pub min_batch_slack: f64,
    pub max_batch_slack: f64,
}

impl EpochMetrics {
    /// Mean augmented loss of the epoch (`slack + epsilon`).
    pub fn augmented_loss(&self, epsilon: f64) -> f64 {
        self.slack + epsilon
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub epochs: Vec<EpochMetrics>,
    pub theta: Params,
    pub config: TrainerConfig,
    pub wall_seconds: f64,
}

impl RunResult {
    pub fn last(&self) -> &EpochMetrics {
        self.epochs.last().expect("at least one epoch")
    }
}

fn check_transforms(batch: &[&Sample], transforms: &[Vec<Transform>]) -> Result<usize> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if transforms.len() != batch.len() {
        return Err(Error::DimensionMismatch {
            expected: batch.len(),
            got: transforms.len(),
        });
    }
    let m = transforms[0].len();
    if m == 0 || transforms.iter().any(|t| t.len() != m) {
        return Err(Error::InvalidArgument(
            "every sample needs the same number (>= 1) of transforms".into(),
        ));
    }
    Ok(m)
}

fn mean_over_transforms(mlp: &Mlp, theta: &Params, s: &Sample, ts: &[Transform]) -> Result<f64> {
    let mut total = 0.0;
    for g in ts {
        total += mlp.sample_loss(theta, &g.apply(&s.x)?, s.y)?;
    }
    Ok(total / ts.len() as f64)
}

/// Mean over the batch of the mean augmented loss, minus `epsilon`.
pub fn constraint_slack(
    mlp: &Mlp,
    theta: &Params,
    batch: &[&Sample],
    transforms: &[Vec<Transform>],
    epsilon: f64,
) -> Result<f64> {
    check_transforms(batch, transforms)?;
    let per_sample: Vec<f64> = batch
        .par_iter()
        .zip(transforms)
        .map(|(s, ts)| mean_over_transforms(mlp, theta, s, ts))
        .collect::<Result<_>>()?;
    Ok(per_sample.iter().sum::<f64>() / batch.len() as f64 - epsilon)
}

/// Batch quantities of the Lagrangian at fixed transformations.
#[derive(Debug, Clone)]
pub struct LagrangianGrad {
    pub clean_loss: f64,
    /// Mean augmented loss; `None` when no transforms were given.
    pub augmented_loss: Option<f64>,
    pub grad: Vec<f64>,
}

struct SampleTerms {
    clean: f64,
    clean_grad: Vec<f64>,
    augmented: f64,
    augmented_grad: Option<Vec<f64>>,
}

/// Gradient of `mean clean loss + gamma * mean augmented loss`.
///
/// Transformations are held fixed. With `gamma == 0` the augmented
/// gradient is skipped entirely (only its loss is measured), so the step
/// equals a clean-data step bit for bit.
pub fn lagrangian_grad(
    mlp: &Mlp,
    theta: &Params,
    batch: &[&Sample],
    transforms: Option<&[Vec<Transform>]>,
    gamma: f64,
) -> Result<LagrangianGrad> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if let Some(ts) = transforms {
        check_transforms(batch, ts)?;
    }
    let need_aug_grad = transforms.is_some() && gamma != 0.0;
    let terms: Vec<SampleTerms> = batch
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let (clean, clean_grad) = mlp.loss_grad(theta, &s.x, s.y)?;
            let mut augmented = 0.0;
            let mut augmented_grad = None;
            if let Some(ts) = transforms {
                let ts = &ts[i];
                let m = ts.len() as f64;
                if need_aug_grad {
                    let mut g = vec![0.0; mlp.n_params()];
                    for t in ts {
                        augmented += mlp.accumulate_loss_grad(theta, &t.apply(&s.x)?, s.y, 1.0 / m, &mut g)? / m;
                    }
                    augmented_grad = Some(g);
                } else {
                    augmented = mean_over_transforms(mlp, theta, s, ts)?;
                }
            }
            Ok(SampleTerms {
                clean,
                clean_grad,
                augmented,
                augmented_grad,
            })
        })
        .collect::<Result<_>>()?;

    let n = batch.len() as f64;
    let mut clean = 0.0;
    let mut augmented = 0.0;
    let mut grad = vec![0.0; mlp.n_params()];
    for t in &terms {
        clean += t.clean;
        augmented += t.augmented;
        grad.iter_mut().zip(&t.clean_grad).for_each(|(a, g)| *a += g);
    }
    grad.iter_mut().for_each(|v| *v /= n);
    if need_aug_grad {
        let mut aug = vec![0.0; mlp.n_params()];
        for t in &terms {
            let g = t.augmented_grad.as_ref().expect("computed when needed");
            aug.iter_mut().zip(g).for_each(|(a, g)| *a += g);
        }
        grad.iter_mut().zip(&aug).for_each(|(a, g)| *a += gamma * (g / n));
    }
    Ok(LagrangianGrad {
        clean_loss: clean / n,
        augmented_loss: transforms.map(|_| augmented / n),
        grad,
    })
}

/// One SGD step on the Lagrangian at fixed transformations.
pub fn primal_update(
    mlp: &Mlp,
    theta: &Params,
    batch: &[&Sample],
    transforms: &[Vec<Transform>],
    gamma: f64,
    eta_p: f64,
) -> Result<Params> {
    if gamma < 0.0 {
        return Err(Error::InvalidArgument(format!("gamma must be >= 0, got {gamma}")));
    }
    let lg = lagrangian_grad(mlp, theta, batch, Some(transforms), gamma)?;
    crate::model::sgd_step(theta, &lg.grad, eta_p)
}

/// Mean clean loss and accuracy (argmax, lowest index on ties).
pub fn evaluate(mlp: &Mlp, theta: &Params, dataset: &Dataset) -> Result<(f64, f64)> {
    let per_sample: Vec<(f64, bool)> = dataset
        .samples
        .par_iter()
        .map(|s| {
            let logits = mlp.forward(theta, &s.x)?;
            let mut best = 0;
            for (i, z) in logits.iter().enumerate() {
                if *z > logits[best] {
                    best = i;
                }
            }
            Ok((crate::model::loss(&logits, s.y)?, best == s.y))
        })
        .collect::<Result<_>>()?;
    let n = per_sample.len() as f64;
    let loss = per_sample.iter().map(|p| p.0).sum::<f64>() / n;
    let correct = per_sample.iter().filter(|p| p.1).count() as f64;
    Ok((loss, correct / n))
}

/// Stream for chain `chain` of the sample at `position` in batch `batch`.
pub fn chain_stream(seed: u64, epoch: usize, batch: usize, position: usize, chain: usize) -> rng::StreamRng {
    rng::stream(
        seed,
        &[
            purpose::CHAIN,
            epoch as u64,
            batch as u64,
            position as u64,
            chain as u64,
        ],
    )
}

/// Draws `m` transformations per sample for the given mode.
///
/// `primal_dual` and `penalized` use MH chains; `uniform_constrained` takes
/// the first uniform draw of the same stream, which is exactly a zero-step
/// chain.
#[allow(clippy::too_many_arguments)]
pub fn sample_batch_transforms(
    mode: Mode,
    mlp: &Mlp,
    theta: &Params,
    batch: &[&Sample],
    space: &TransformSpace,
    cfg: &SamplerConfig,
    seed: u64,
    epoch: usize,
    batch_index: usize,
) -> Result<Vec<Vec<Transform>>> {
    batch
        .par_iter()
        .enumerate()
        .map(|(pos, s)| {
            (0..cfg.m)
                .map(|chain| {
                    let mut r = chain_stream(seed, epoch, batch_index, pos, chain);
                    match mode {
                        Mode::UniformConstrained => Ok(space.uniform_sample(&mut r)),
                        Mode::PrimalDual | Mode::Penalized => {
                            let loss_at = orbit_loss_fn(mlp, theta, &s.x, s.y)?;
                            Ok(run_chain(space, cfg.n_steps, cfg.zero_loss_epsilon, loss_at, &mut r, None)?.g)
                        }
                        Mode::Erm => Err(Error::InvalidArgument("erm samples no transforms".into())),
                    }
                })
                .collect()
        })
        .collect()
}

/// Trains from the model's seeded initialization.
pub fn train(
    train_set: &Dataset,
    test_set: &Dataset,
    space: &TransformSpace,
    mlp: &Mlp,
    tc: &TrainerConfig,
) -> Result<RunResult> {
    train_with(train_set, test_set, space, mlp, tc, |_| Ok(()))
}

/// As [`train`], calling `on_epoch` after every epoch.
pub fn train_with<F>(
    train_set: &Dataset,
    test_set: &Dataset,
    space: &TransformSpace,
    mlp: &Mlp,
    tc: &TrainerConfig,
    mut on_epoch: F,
) -> Result<RunResult>
where
    F: FnMut(&EpochMetrics) -> Result<()>,
{
    tc.validate()?;
    for ds in [train_set, test_set] {
        if ds.d != mlp.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: mlp.input_dim(),
                got: ds.d,
            });
        }
        if ds.k != mlp.classes() {
            return Err(Error::DimensionMismatch {
                expected: mlp.classes(),
                got: ds.k,
            });
        }
    }
    if tc.mode.samples_transforms() && space.is_empty() {
        return Err(Error::EmptySpace);
    }

    let started = Instant::now();
    let epsilon = tc.epsilon_or_zero();
    let mut theta = mlp.init();
    let mut velocity = vec![0.0; mlp.n_params()];
    let mut dual = DualState::new(tc.eta_d);
    if let (Mode::Penalized, Some(g)) = (tc.mode, tc.fixed_gamma) {
        dual.gamma = g;
    }
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(tc.epochs);

    for epoch in 1..=tc.epochs {
        let gamma_start = dual.gamma;
        let mut histogram = vec![0usize; space.len()];
        let (mut loss_sum, mut slack_sum, mut batches) = (0.0, 0.0, 0usize);
        let (mut min_slack, mut max_slack) = (f64::INFINITY, f64::NEG_INFINITY);
        order.shuffle(&mut rng::stream(tc.seed, &[purpose::SHUFFLE, epoch as u64]));

        for (b, chunk) in order.chunks(tc.batch_size).enumerate() {
            let abort = |e: Error| Error::TrainingAborted {
                epoch,
                batch: b,
                source: Box::new(e),
            };
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set.samples[i]).collect();
            let transforms = if tc.mode.samples_transforms() {
                let ts = sample_batch_transforms(tc.mode, mlp, &theta, &batch, space, &tc.sampler, tc.seed, epoch, b)
                    .map_err(abort)?;
                for g in ts.iter().flatten() {
                    histogram[g.index] += 1;
                }
                Some(ts)
            } else {
                None
            };

            let lg = lagrangian_grad(mlp, &theta, &batch, transforms.as_deref(), dual.gamma).map_err(abort)?;
            if lg.grad.iter().any(|g| !g.is_finite()) {
                return Err(abort(Error::NonFinite("gradient".into())));
            }
            theta = if tc.momentum > 0.0 {
                velocity
                    .iter_mut()
                    .zip(&lg.grad)
                    .for_each(|(v, g)| *v = tc.momentum * *v + g);
                crate::model::sgd_step(&theta, &velocity, tc.eta_p).map_err(abort)?
            } else {
                crate::model::sgd_step(&theta, &lg.grad, tc.eta_p).map_err(abort)?
            };

            loss_sum += lg.clean_loss;
            batches += 1;
            if let Some(aug) = lg.augmented_loss {
                let slack = aug - epsilon;
                slack_sum += slack;
                min_slack = min_slack.min(slack);
                max_slack = max_slack.max(slack);
                if tc.mode.ascends_dual() {
                    dual = dual.update(slack);
                }
            }
        }

        let (test_loss, test_accuracy) = evaluate(mlp, &theta, test_set).map_err(|e| Error::TrainingAborted {
            epoch,
            batch: batches,
            source: Box::new(e),
        })?;
        let sampled = tc.mode.samples_transforms();
        let metrics = EpochMetrics {
            epoch,
            train_loss: loss_sum / batches as f64,
            slack: if sampled { slack_sum / batches as f64 } else { f64::NAN },
            gamma: dual.gamma,
            entropy: if sampled {
                empirical_entropy(&histogram)?
            } else {
                f64::NAN
            },
            transform_histogram: histogram,
            test_loss,
            test_accuracy,
            gamma_start,
            min_batch_slack: if sampled { min_slack } else { f64::NAN },
            max_batch_slack: if sampled { max_slack } else { f64::NAN },
        };
        on_epoch(&metrics)?;
        history.push(metrics);
    }

    Ok(RunResult {
        epochs: history,
        theta,
        config: tc.clone(),
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}
