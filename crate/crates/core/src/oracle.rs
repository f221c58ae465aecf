//! Exact computations over the enumerated transformation set.
//!
//! Integrals over transformations become finite sums under the counting
//! measure, so the worst-case loss, the smoothed distribution and its
//! normalizer, and the invariance risk are all computed by enumeration.
//! Stochastic components are tested against these values.

use rand::RngCore;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Mlp, Params};
use crate::sampler::acceptance_probability;
use crate::transform::TransformSpace;

/// Losses `l(f(g x), y)` for every `g`, in canonical enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitLosses(Vec<f64>);

impl OrbitLosses {
    pub fn new(losses: Vec<f64>) -> Result<Self> {
        if let Some(bad) = losses.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(Error::NonFinite(format!("orbit loss {bad}")));
        }
        Ok(OrbitLosses(losses))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The loss-proportional distribution and its normalizer `c* = sum(l) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothedDistribution {
    pub probs: Vec<f64>,
    pub c_star: f64,
}

pub fn orbit_losses(mlp: &Mlp, theta: &Params, x: &[f64], y: usize, space: &TransformSpace) -> Result<OrbitLosses> {
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    let losses = space
        .enumerate()
        .iter()
        .map(|g| mlp.sample_loss(theta, &g.apply(x)?, y))
        .collect::<Result<Vec<_>>>()?;
    OrbitLosses::new(losses)
}

/// Worst-case loss over the orbit and the first index attaining it.
pub fn adversarial_loss(ol: &OrbitLosses) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &l) in ol.0.iter().enumerate() {
        if l > best.0 {
            best = (l, i);
        }
    }
    best
}

/// Maximizer of the linear objective `sum(lambda * l)` over the simplex: a
/// point mass at the adversarial argmax.
pub fn lambda_star_pointmass(ol: &OrbitLosses) -> Vec<f64> {
    let (_, argmax) = adversarial_loss(ol);
    let mut lambda = vec![0.0; ol.len()];
    if !lambda.is_empty() {
        lambda[argmax] = 1.0;
    }
    lambda
}

/// Closed-form smoothed distribution `l / sum(l)` with `c* = sum(l) / 2`.
///
/// Losses are non-negative, so no positive-part projection is needed.
pub fn smoothed_lambda(ol: &OrbitLosses) -> Result<SmoothedDistribution> {
    let total: f64 = ol.0.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroOrbitLoss);
    }
    Ok(SmoothedDistribution {
        probs: ol.0.iter().map(|l| l / total).collect(),
        c_star: 0.5 * total,
    })
}

/// `sum(probs * losses)`.
pub fn expected_loss(ol: &OrbitLosses, probs: &[f64]) -> Result<f64> {
    if probs.len() != ol.len() {
        return Err(Error::DimensionMismatch {
            expected: ol.len(),
            got: probs.len(),
        });
    }
    Ok(ol.0.iter().zip(probs).map(|(l, p)| l * p).sum())
}

pub fn expected_smoothed_loss(ol: &OrbitLosses, sd: &SmoothedDistribution) -> Result<f64> {
    expected_loss(ol, &sd.probs)
}

/// `measure / 2 * mean(draws)`, written as `(measure / n) * sum / 2` so that
/// an exhaustive draw reproduces the exact normalizer.
pub fn c_star_estimate(draw_losses: &[f64], measure: f64) -> Result<f64> {
    if draw_losses.is_empty() {
        return Err(Error::InvalidArgument("c* estimate needs at least one draw".into()));
    }
    let sum: f64 = draw_losses.iter().sum();
    Ok(0.5 * (measure / draw_losses.len() as f64) * sum)
}

/// Monte-Carlo estimate of `c*` from `n_draws` uniform transformations.
pub fn c_star_mc(
    mlp: &Mlp,
    theta: &Params,
    x: &[f64],
    y: usize,
    space: &TransformSpace,
    n_draws: usize,
    rng: &mut impl RngCore,
) -> Result<McEstimate> {
    if n_draws == 0 {
        return Err(Error::InvalidArgument("n_draws must be >= 1".into()));
    }
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    let draws = (0..n_draws)
        .map(|_| {
            let g = space.uniform_sample(rng);
            mlp.sample_loss(theta, &g.apply(x)?, y)
        })
        .collect::<Result<Vec<_>>>()?;
    McEstimate::from_draws(&draws, space.measure())
}

/// A Monte-Carlo normalizer estimate with its CLT standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_draws: usize,
}

impl McEstimate {
    pub fn from_draws(draws: &[f64], measure: f64) -> Result<Self> {
        let value = c_star_estimate(draws, measure)?;
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = if draws.len() > 1 {
            draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(McEstimate {
            value,
            std_error: 0.5 * measure * (var / n).sqrt(),
            n_draws: draws.len(),
        })
    }
}

/// Mean over the dataset of `max_g |l(x) - l(g x)|`.
pub fn invariance_risk(mlp: &Mlp, theta: &Params, dataset: &Dataset, space: &TransformSpace) -> Result<f64> {
    let mut total = 0.0;
    for s in &dataset.samples {
        total += sample_invariance_gap(mlp, theta, &s.x, s.y, space)?;
    }
    Ok(total / dataset.len() as f64)
}

/// `max_g |l(x) - l(g x)|` for one sample.
pub fn sample_invariance_gap(mlp: &Mlp, theta: &Params, x: &[f64], y: usize, space: &TransformSpace) -> Result<f64> {
    let clean = mlp.sample_loss(theta, x, y)?;
    let ol = orbit_losses(mlp, theta, x, y, space)?;
    Ok(ol.0.iter().map(|l| (clean - l).abs()).fold(0.0, f64::max))
}

/// Mean clean loss over a dataset.
pub fn clean_risk(mlp: &Mlp, theta: &Params, dataset: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for s in &dataset.samples {
        total += mlp.sample_loss(theta, &s.x, s.y)?;
    }
    Ok(total / dataset.len() as f64)
}

/// Mean worst-case loss over a dataset.
pub fn adversarial_risk(mlp: &Mlp, theta: &Params, dataset: &Dataset, space: &TransformSpace) -> Result<f64> {
    let mut total = 0.0;
    for s in &dataset.samples {
        total += adversarial_loss(&orbit_losses(mlp, theta, &s.x, s.y, space)?).0;
    }
    Ok(total / dataset.len() as f64)
}

/// Both sides of the mixture identity for augmentation that keeps the clean
/// sample with probability `gamma` and otherwise draws uniformly from the
/// non-identity transformations.
///
/// `lhs` is the risk under the mixture, weight by weight; `rhs` is
/// `gamma * clean risk + (1 - gamma) * uniform-augmented risk`.
pub fn mixture_decomposition_check(
    mlp: &Mlp,
    theta: &Params,
    dataset: &Dataset,
    space: &TransformSpace,
    gamma: f64,
) -> Result<(f64, f64)> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let identity = space
        .identity_index()
        .ok_or_else(|| Error::InvalidArgument("space has no identity transformation".into()))?;
    let others = space.len() - 1;
    if others == 0 && gamma < 1.0 {
        return Err(Error::InvalidArgument(
            "mixture needs a non-identity transformation when gamma < 1".into(),
        ));
    }
    let weight = if others == 0 {
        0.0
    } else {
        (1.0 - gamma) / others as f64
    };

    let n = dataset.len() as f64;
    let (mut lhs, mut clean, mut augmented) = (0.0, 0.0, 0.0);
    for s in &dataset.samples {
        let ol = orbit_losses(mlp, theta, &s.x, s.y, space)?;
        let mut mixed = 0.0;
        let mut rest = 0.0;
        for (i, &l) in ol.0.iter().enumerate() {
            if i == identity {
                mixed += gamma * l;
            } else {
                mixed += weight * l;
                rest += l;
            }
        }
        lhs += mixed;
        clean += ol.0[identity];
        if others > 0 {
            augmented += rest / others as f64;
        }
    }
    Ok((lhs / n, gamma * clean / n + (1.0 - gamma) * augmented / n))
}

/// Uniform-weight simplex point (Dirichlet(1, ..., 1)).
pub fn random_simplex(n: usize, rng: &mut impl RngCore) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

pub fn squared_norm(lambda: &[f64]) -> f64 {
    lambda.iter().map(|v| v * v).sum()
}

/// Checks that the uniform distribution attains `sum(lambda^2) = 1/|G|` and
/// that `n_random` random simplex points all satisfy `sum(lambda^2) >= 1/|G|`.
pub fn l2_feasibility_check(space: &TransformSpace, n_random: usize, rng: &mut impl RngCore) -> Result<bool> {
    if n_random == 0 {
        return Err(Error::InvalidArgument("n_random must be >= 1".into()));
    }
    let n = space.len();
    let floor = 1.0 / space.measure();
    let uniform = vec![floor; n];
    if (squared_norm(&uniform) - floor).abs() > 1e-15 {
        return Ok(false);
    }
    // Rounding in the sum can dip an ulp or two below the bound near uniform.
    let slack = 4.0 * f64::EPSILON * floor;
    Ok((0..n_random).all(|_| squared_norm(&random_simplex(n, rng)) >= floor - slack))
}

/// Shannon entropy (natural log) of a histogram, with `0 ln 0 = 0`.
pub fn empirical_entropy(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("entropy of an empty histogram".into()));
    }
    let total = total as f64;
    Ok(-counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * p.ln()
        })
        .sum::<f64>())
}

/// Shannon entropy of a probability vector.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Exact distribution of an independent MH chain with uniform proposals
/// after `n_steps` steps from a uniform start, by propagating the
/// transition matrix.
pub fn mh_marginal(ol: &OrbitLosses, n_steps: usize, zero_loss_epsilon: f64) -> Vec<f64> {
    let n = ol.len();
    let q = 1.0 / n as f64;
    let mut dist = vec![q; n];
    let accept: Vec<Vec<f64>> =
        ol.0.iter()
            .map(|&from| {
                ol.0.iter()
                    .map(|&to| q * acceptance_probability(to, from, zero_loss_epsilon))
                    .collect()
            })
            .collect();
    for _ in 0..n_steps {
        let mut next = vec![0.0; n];
        for (i, row) in accept.iter().enumerate() {
            let mut leave = 0.0;
            for (j, &t) in row.iter().enumerate() {
                if j != i {
                    next[j] += dist[i] * t;
                    leave += t;
                }
            }
            next[i] += dist[i] * (1.0 - leave);
        }
        dist = next;
    }
    dist
}

/// Total-variation distance between two distributions.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Per-sample oracle dump used by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub sample_index: usize,
    pub x: Vec<f64>,
    pub y: usize,
    pub transforms: Vec<String>,
    pub losses: Vec<f64>,
    pub probs: Vec<f64>,
    pub c_star: f64,
    pub max_loss: f64,
    pub argmax: usize,
    pub argmax_transform: String,
    pub expected_smoothed_loss: f64,
    pub clean_loss: f64,
    pub invariance_gap: f64,
}

pub fn oracle_report(
    mlp: &Mlp,
    theta: &Params,
    dataset: &Dataset,
    index: usize,
    space: &TransformSpace,
) -> Result<OracleReport> {
    let sample = dataset
        .samples
        .get(index)
        .ok_or_else(|| Error::InvalidArgument(format!("sample index {index} outside 0..{}", dataset.len())))?;
    let ol = orbit_losses(mlp, theta, &sample.x, sample.y, space)?;
    let sd = smoothed_lambda(&ol)?;
    let total: f64 = sd.probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::NonFinite(format!("smoothed probabilities sum to {total}")));
    }
    let (max_loss, argmax) = adversarial_loss(&ol);
    Ok(OracleReport {
        sample_index: index,
        x: sample.x.clone(),
        y: sample.y,
        transforms: space.enumerate().iter().map(|g| g.to_string()).collect(),
        expected_smoothed_loss: expected_smoothed_loss(&ol, &sd)?,
        clean_loss: mlp.sample_loss(theta, &sample.x, sample.y)?,
        invariance_gap: sample_invariance_gap(mlp, theta, &sample.x, sample.y, space)?,
        losses: ol.0,
        probs: sd.probs,
        c_star: sd.c_star,
        max_loss,
        argmax,
        argmax_transform: space.enumerate()[argmax].to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use crate::model::MlpConfig;
    use crate::rng;
    use crate::transform::Op;
    use approx::assert_abs_diff_eq;

    fn ol(v: &[f64]) -> OrbitLosses {
        OrbitLosses::new(v.to_vec()).unwrap()
    }

    fn small_dataset() -> Dataset {
        Dataset::new(
            "t",
            2,
            2,
            vec![
                Sample {
                    x: vec![1.0, 0.3],
                    y: 0,
                },
                Sample {
                    x: vec![-0.4, 1.9],
                    y: 1,
                },
                Sample {
                    x: vec![0.2, -1.1],
                    y: 0,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn orbit_losses_validate_entries() {
        assert!(OrbitLosses::new(vec![0.1, -0.2]).is_err());
        assert!(OrbitLosses::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn constant_model_has_constant_orbit() {
        let mlp = Mlp::new(MlpConfig::toy(2, 0)).unwrap();
        let space = TransformSpace::from_ops(&[Op::Identity, Op::Rotate, Op::Scale], 30).unwrap();
        let losses = orbit_losses(&mlp, &mlp.zeros(), &[0.4, 1.0], 1, &space).unwrap();
        assert_eq!(losses.len(), 61);
        assert!(losses.values().iter().all(|&l| l == 2f64.ln()));
    }

    #[test]
    fn identity_orbit_is_clean_loss() {
        let mlp = Mlp::new(MlpConfig::toy(2, 3)).unwrap();
        let theta = mlp.init();
        let space = TransformSpace::from_ops(&[Op::Identity], 30).unwrap();
        let losses = orbit_losses(&mlp, &theta, &[0.4, 1.0], 1, &space).unwrap();
        assert_eq!(losses.values(), &[mlp.sample_loss(&theta, &[0.4, 1.0], 1).unwrap()]);
    }

    #[test]
    fn orbit_matches_componentwise_recomputation() {
        let mlp = Mlp::new(MlpConfig::toy(3, 3)).unwrap();
        let theta = mlp.init();
        let space = TransformSpace::from_ops(&Op::ALL, 5).unwrap();
        let x = [0.7, -1.2];
        let losses = orbit_losses(&mlp, &theta, &x, 2, &space).unwrap();
        for (g, l) in space.enumerate().iter().zip(losses.values()) {
            let gx = g.apply(&x).unwrap();
            let logits = mlp.forward(&theta, &gx).unwrap();
            assert_eq!(*l, crate::model::loss(&logits, 2).unwrap());
        }
    }

    #[test]
    fn adversarial_examples() {
        assert_eq!(adversarial_loss(&ol(&[0.1, 0.7, 0.3])), (0.7, 1));
        assert_eq!(adversarial_loss(&ol(&[0.4, 0.4, 0.4])), (0.4, 0));
        assert_eq!(lambda_star_pointmass(&ol(&[0.1, 0.7, 0.3])), vec![0.0, 1.0, 0.0]);
        let losses = ol(&[0.1, 0.7, 0.3]);
        let e = expected_loss(&losses, &lambda_star_pointmass(&losses)).unwrap();
        assert_eq!(e, 0.7);
    }

    #[test]
    fn smoothed_examples() {
        let sd = smoothed_lambda(&ol(&[1.0, 1.0, 2.0])).unwrap();
        assert_eq!(sd.probs, vec![0.25, 0.25, 0.5]);
        assert_eq!(sd.c_star, 2.0);
        let sd = smoothed_lambda(&ol(&[0.0, 0.0, 5.0])).unwrap();
        assert_eq!(sd.probs, vec![0.0, 0.0, 1.0]);
        assert_eq!(sd.c_star, 2.5);
        let sd = smoothed_lambda(&ol(&[0.3; 7])).unwrap();
        assert!(sd.probs.iter().all(|&p| (p - 1.0 / 7.0).abs() < 1e-15));
        assert!(matches!(smoothed_lambda(&ol(&[0.0, 0.0])), Err(Error::ZeroOrbitLoss)));
    }

    #[test]
    fn expectation_examples() {
        let losses = ol(&[1.0, 1.0, 2.0]);
        let sd = smoothed_lambda(&losses).unwrap();
        assert_eq!(expected_smoothed_loss(&losses, &sd).unwrap(), 1.5);
        let u = expected_loss(&ol(&[0.1, 0.7, 0.3]), &[1.0 / 3.0; 3]).unwrap();
        assert_abs_diff_eq!(u, 1.1 / 3.0, epsilon = 1e-15);
        assert!(expected_loss(&losses, &[1.0]).is_err());
    }

    #[test]
    fn c_star_estimator_cases() {
        let exact = smoothed_lambda(&ol(&[0.2, 1.3, 0.5, 2.0])).unwrap().c_star;
        assert_eq!(c_star_estimate(&[0.2, 1.3, 0.5, 2.0], 4.0).unwrap(), exact);
        // Constant loss: any draw count gives measure * c / 2.
        let mlp = Mlp::new(MlpConfig::toy(2, 0)).unwrap();
        let space = TransformSpace::from_ops(&[Op::Identity, Op::Rotate, Op::Scale], 30).unwrap();
        for n in [1, 7, 100] {
            let est = c_star_mc(&mlp, &mlp.zeros(), &[1.0, 1.0], 0, &space, n, &mut rng::stream(0, &[])).unwrap();
            assert_abs_diff_eq!(est.value, 0.5 * 61.0 * 2f64.ln(), epsilon = 1e-12);
        }
        assert!(c_star_estimate(&[], 3.0).is_err());
    }

    #[test]
    fn invariance_risk_vanishes_for_constant_model_and_identity_space() {
        let mlp = Mlp::new(MlpConfig::toy(2, 0)).unwrap();
        let ds = small_dataset();
        let full = TransformSpace::from_ops(&Op::ALL, 6).unwrap();
        assert_eq!(invariance_risk(&mlp, &mlp.zeros(), &ds, &full).unwrap(), 0.0);
        let ident = TransformSpace::from_ops(&[Op::Identity], 6).unwrap();
        assert_eq!(invariance_risk(&mlp, &mlp.init(), &ds, &ident).unwrap(), 0.0);
    }

    #[test]
    fn mixture_identity_cases() {
        let mlp = Mlp::new(MlpConfig::toy(2, 8)).unwrap();
        let theta = mlp.init();
        let ds = small_dataset();
        let space = TransformSpace::from_ops(&[Op::Identity, Op::Rotate], 30).unwrap();
        let (lhs, rhs) = mixture_decomposition_check(&mlp, &theta, &ds, &space, 1.0).unwrap();
        let clean = clean_risk(&mlp, &theta, &ds).unwrap();
        assert_abs_diff_eq!(lhs, clean, epsilon = 1e-15);
        assert_abs_diff_eq!(rhs, clean, epsilon = 1e-15);

        let pair = TransformSpace::from_ops(&[Op::Identity, Op::ReflectX], 30).unwrap();
        let one = Dataset::new("one", 2, 2, vec![ds.samples[0].clone()]).unwrap();
        let (lhs, rhs) = mixture_decomposition_check(&mlp, &theta, &one, &pair, 0.5).unwrap();
        let x = &one.samples[0].x;
        let expect =
            0.5 * mlp.sample_loss(&theta, x, 0).unwrap() + 0.5 * mlp.sample_loss(&theta, &[-x[0], x[1]], 0).unwrap();
        assert_abs_diff_eq!(lhs, expect, epsilon = 1e-15);
        assert_abs_diff_eq!(rhs, expect, epsilon = 1e-15);
    }

    #[test]
    fn mixture_requires_identity_and_valid_gamma() {
        let mlp = Mlp::new(MlpConfig::toy(2, 8)).unwrap();
        let ds = small_dataset();
        let no_id = TransformSpace::from_ops(&[Op::Rotate], 30).unwrap();
        assert!(mixture_decomposition_check(&mlp, &mlp.init(), &ds, &no_id, 0.5).is_err());
        let space = TransformSpace::from_ops(&[Op::Identity, Op::Rotate], 30).unwrap();
        assert!(mixture_decomposition_check(&mlp, &mlp.init(), &ds, &space, 0.0).is_err());
        assert!(mixture_decomposition_check(&mlp, &mlp.init(), &ds, &space, 1.5).is_err());
    }

    #[test]
    fn l2_examples() {
        let four = TransformSpace::from_ops(&[Op::Identity, Op::ReflectX, Op::ReflectY, Op::Rotate], 1).unwrap();
        assert_eq!(four.len(), 4);
        assert_eq!(squared_norm(&[0.25; 4]), 0.25);
        assert_eq!(squared_norm(&[0.0, 1.0, 0.0, 0.0]), 1.0);
        assert!(l2_feasibility_check(&four, 100, &mut rng::stream(0, &[])).unwrap());
        assert!(l2_feasibility_check(&four, 0, &mut rng::stream(0, &[])).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(empirical_entropy(&[3; 14]).unwrap(), 14f64.ln(), epsilon = 1e-12);
        assert_eq!(empirical_entropy(&[0, 9, 0]).unwrap(), 0.0);
        assert_abs_diff_eq!(empirical_entropy(&[2, 2]).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert!(empirical_entropy(&[0, 0]).is_err());
        assert!(empirical_entropy(&[]).is_err());
    }

    #[test]
    fn mh_marginal_limits() {
        let losses = ol(&[0.2, 1.0, 3.0, 0.05]);
        assert_eq!(mh_marginal(&losses, 0, 1e-12), vec![0.25; 4]);
        let target = smoothed_lambda(&losses).unwrap().probs;
        let far = mh_marginal(&losses, 2000, 1e-12);
        assert!(total_variation(&far, &target) < 1e-10);
        // stationarity: one step from the target stays at the target
        let constant = mh_marginal(&ol(&[0.5; 5]), 10, 1e-12);
        assert!(constant.iter().all(|&p| (p - 0.2).abs() < 1e-15));
    }

    #[test]
    fn report_for_zero_model_is_uniform() {
        let mlp = Mlp::new(MlpConfig::toy(2, 0)).unwrap();
        let space = TransformSpace::from_ops(&[Op::Identity, Op::Rotate], 30).unwrap();
        let r = oracle_report(&mlp, &mlp.zeros(), &small_dataset(), 1, &space).unwrap();
        assert!(r.probs.iter().all(|&p| p == r.probs[0]));
        assert_eq!(r.argmax, 0);
        assert!(oracle_report(&mlp, &mlp.zeros(), &small_dataset(), 3, &space).is_err());
    }
}
