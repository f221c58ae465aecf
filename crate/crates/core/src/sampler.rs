//! Independent Metropolis-Hastings over the transformation set.
//!
//! The target is the loss-proportional distribution over the orbit of one
//! sample; proposals are uniform and state independent, so each step needs
//! one forward pass and no gradients with respect to the transformation.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Mlp, Params};
use crate::rng::{self, purpose};
use crate::transform::{Transform, TransformSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_zero_loss_epsilon")]
    pub zero_loss_epsilon: f64,
}

fn default_steps() -> usize {
    2
}

fn default_m() -> usize {
    1
}

fn default_zero_loss_epsilon() -> f64 {
    1e-12
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_steps: default_steps(),
            m: default_m(),
            zero_loss_epsilon: default_zero_loss_epsilon(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::config("trainer.sampler.m", "must be >= 1"));
        }
        if !(self.zero_loss_epsilon > 0.0 && self.zero_loss_epsilon.is_finite()) {
            return Err(Error::config(
                "trainer.sampler.zero_loss_epsilon",
                "must be finite and > 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainState {
    pub g: Transform,
    /// Unclamped loss at `g`.
    pub cached_loss: f64,
    pub steps_taken: usize,
    pub accepts: usize,
}

/// One proposal of a traced chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub kind: &'static str,
    pub level: usize,
    pub loss: f64,
    pub accepted: bool,
}

/// `min(1, proposed / previous)` with both losses clamped below at `floor`.
pub fn acceptance_probability(proposed: f64, previous: f64, floor: f64) -> f64 {
    (proposed.max(floor) / previous.max(floor)).min(1.0)
}

pub fn acceptance_rate(state: &ChainState) -> Result<f64> {
    if state.steps_taken == 0 {
        return Err(Error::InvalidArgument(
            "acceptance rate of a chain with no steps".into(),
        ));
    }
    Ok(state.accepts as f64 / state.steps_taken as f64)
}

fn checked(loss: f64) -> Result<f64> {
    if loss.is_finite() && loss >= 0.0 {
        Ok(loss)
    } else {
        Err(Error::NonFinite(format!("chain loss {loss}")))
    }
}

/// Runs one chain: uniform initial state, then `n_steps` uniform proposals
/// accepted with [`acceptance_probability`].
///
/// Every step consumes exactly two 64-bit draws (proposal, accept test).
pub fn run_chain<F>(
    space: &TransformSpace,
    n_steps: usize,
    zero_loss_epsilon: f64,
    mut loss_at: F,
    rng: &mut impl RngCore,
    mut trace: Option<&mut Vec<TraceStep>>,
) -> Result<ChainState>
where
    F: FnMut(&Transform) -> Result<f64>,
{
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    let g = space.uniform_sample(rng);
    let mut state = ChainState {
        g,
        cached_loss: checked(loss_at(&g)?)?,
        steps_taken: 0,
        accepts: 0,
    };
    if let Some(t) = trace.as_deref_mut() {
        t.push(TraceStep {
            step: 0,
            kind: g.op.name(),
            level: g.level,
            loss: state.cached_loss,
            accepted: true,
        });
    }
    for step in 1..=n_steps {
        let proposal = space.uniform_sample(rng);
        let proposed_loss = checked(loss_at(&proposal)?)?;
        let p = acceptance_probability(proposed_loss, state.cached_loss, zero_loss_epsilon);
        let accepted = rng::unit(rng) < p;
        if accepted {
            state.g = proposal;
            state.cached_loss = proposed_loss;
            state.accepts += 1;
        }
        state.steps_taken += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceStep {
                step,
                kind: proposal.op.name(),
                level: proposal.level,
                loss: proposed_loss,
                accepted,
            });
        }
    }
    Ok(state)
}

/// Loss of the model at the transformed sample `g x`.
pub fn orbit_loss_fn<'a>(
    mlp: &'a Mlp,
    theta: &'a Params,
    x: &'a [f64],
    y: usize,
) -> Result<impl Fn(&Transform) -> Result<f64> + 'a> {
    let x: [f64; 2] = x.try_into().map_err(|_| Error::DimensionMismatch {
        expected: 2,
        got: x.len(),
    })?;
    Ok(move |g: &Transform| mlp.sample_loss(theta, &g.apply2(&x), y))
}

/// `m` independent chains for one sample; returns each chain's final state.
///
/// A child stream per chain is split off `rng` up front, so chains can run in
/// any order (or in parallel) without changing their outputs.
pub fn mh_chain_states(
    mlp: &Mlp,
    theta: &Params,
    x: &[f64],
    y: usize,
    space: &TransformSpace,
    cfg: &SamplerConfig,
    rng: &mut impl RngCore,
) -> Result<Vec<ChainState>> {
    cfg.validate()?;
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    let loss_at = orbit_loss_fn(mlp, theta, x, y)?;
    let seeds: Vec<u64> = (0..cfg.m).map(|_| rng.next_u64()).collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let mut chain_rng = rng::stream(seed, &[purpose::CHAIN]);
            run_chain(
                space,
                cfg.n_steps,
                cfg.zero_loss_epsilon,
                &loss_at,
                &mut chain_rng,
                None,
            )
        })
        .collect()
}

/// The transformations kept by [`mh_chain_states`].
pub fn mh_chain(
    mlp: &Mlp,
    theta: &Params,
    x: &[f64],
    y: usize,
    space: &TransformSpace,
    cfg: &SamplerConfig,
    rng: &mut impl RngCore,
) -> Result<Vec<Transform>> {
    Ok(mh_chain_states(mlp, theta, x, y, space, cfg, rng)?
        .into_iter()
        .map(|s| s.g)
        .collect())
}

/// Inverse-CDF categorical draw over the canonical enumeration.
pub fn exact_sample(space: &TransformSpace, probs: &[f64], rng: &mut impl RngCore) -> Result<Transform> {
    if probs.len() != space.len() {
        return Err(Error::DimensionMismatch {
            expected: space.len(),
            got: probs.len(),
        });
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidArgument("probabilities must be finite and >= 0".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("probabilities sum to {total}, not 1")));
    }
    let u = rng::unit(rng);
    let mut cumulative = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return Ok(space.enumerate()[i]);
        }
    }
    // u fell in the rounding gap above the last partial sum
    let last = probs.iter().rposition(|&p| p > 0.0).expect("total is ~1");
    Ok(space.enumerate()[last])
}
