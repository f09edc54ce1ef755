//! Weight optimization on the probability simplex.
//!
//! Weights are searched in an unconstrained space and mapped to the simplex
//! through the softmax, so every candidate is feasible. The search is
//! differential evolution (rand/1/bin) maximizing the compound coefficient.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctc::{CtcEstimate, ExtremeCount, ExtremeWindows, Variant};
use crate::error::{CtcError, Result};
use crate::impact::ImpactParams;
use crate::rng;
use crate::series::Series;

/// Initialization box for the unconstrained weights.
pub const INIT_BOX: f64 = 10.0;
/// Generations over which the best objective must improve to keep going.
pub const STAGNATION_WINDOW: usize = 20;

/// Differential evolution settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    /// `None` means ten times the dimension.
    pub population_size: Option<usize>,
    pub max_generations: usize,
    pub differential_weight: f64,
    pub crossover_rate: f64,
    pub seed: u64,
    /// Relative improvement of the best objective required over the stagnation window.
    pub tolerance: f64,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            population_size: None,
            max_generations: 200,
            differential_weight: 0.8,
            crossover_rate: 0.9,
            seed: 0,
            tolerance: 1e-8,
        }
    }
}

impl DeConfig {
    pub fn with_seed(seed: u64) -> Self {
        DeConfig {
            seed,
            ..Default::default()
        }
    }

    fn validate(&self, dim: usize) -> Result<usize> {
        let np = self.population_size.unwrap_or(10 * dim);
        if np < 4 {
            return Err(CtcError::usage(format!("population size must be at least 4, got {np}")));
        }
        if !(self.differential_weight > 0.0 && self.differential_weight <= 2.0) {
            return Err(CtcError::usage("differential weight must lie in (0, 2]"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(CtcError::usage("crossover rate must lie in [0, 1]"));
        }
        if self.max_generations == 0 {
            return Err(CtcError::usage("max_generations must be positive"));
        }
        Ok(np)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// No search was needed (a single weight).
    Trivial,
    MaxGenerations,
    Stagnation,
}

/// Result of a weight search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightOptimum {
    pub weights: Vec<f64>,
    pub estimate: CtcEstimate,
    pub generations: usize,
    pub stop: StopReason,
    /// Best objective after each generation (generation 0 first).
    pub history: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(CtcError::usage("softmax of an empty vector"));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(CtcError::domain("softmax input must be finite"));
    }
    Ok(softmax_unchecked(raw))
}

fn softmax_unchecked(raw: &[f64]) -> Vec<f64> {
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut w: Vec<f64> = exps.iter().map(|e| e / total).collect();
    // Push rounding drift onto the largest entry so the sum is 1 to machine precision.
    let drift = 1.0 - w.iter().sum::<f64>();
    if let Some(i) = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])) {
        w[i] += drift;
    }
    w
}

/// Maximizes the compound coefficient of `x` on `effects` over simplex weights.
///
/// Accepts one or more effect series; the weight vector has
/// `effects.len() * p` entries.
pub fn optimize_weights_multi(
    x: &Series,
    effects: &[Series],
    p: usize,
    k: impl Into<ExtremeCount>,
    alpha: f64,
    cfg: &DeConfig,
) -> Result<WeightOptimum> {
    let k = k.into().resolve(x.len())?;
    let slices: Vec<&[f64]> = effects.iter().map(|e| e.values()).collect();
    let windows = ExtremeWindows::build(x.values(), &slices, p, k)?;
    let dim = windows.width();
    let variant = if effects.len() == 1 {
        Variant::Compound
    } else {
        Variant::MultivariateCompound
    };
    let estimate = |value: f64| CtcEstimate {
        value,
        cause: x.name().to_string(),
        effect: effects.iter().map(|e| e.name()).collect::<Vec<_>>().join("+"),
        p,
        k,
        variant,
        effective_k: k,
    };
    let objective = |raw: &[f64]| -> Result<f64> {
        let params = ImpactParams::new(alpha, softmax_unchecked(raw))?;
        windows.compound(&params)
    };

    if dim == 1 {
        let value = objective(&[0.0])?;
        return Ok(WeightOptimum {
            weights: vec![1.0],
            estimate: estimate(value),
            generations: 0,
            stop: StopReason::Trivial,
            history: vec![value],
        });
    }

    let np = cfg.validate(dim)?;
    let mut rng = rng::stream(cfg.seed, 0);
    let mut population: Vec<Vec<f64>> = Vec::with_capacity(np);
    population.push(vec![0.0; dim]);
    for _ in 1..np {
        population.push((0..dim).map(|_| rng.random_range(-INIT_BOX..=INIT_BOX)).collect());
    }
    let mut fitness: Vec<f64> = population
        .par_iter()
        .map(|c| objective(c))
        .collect::<Result<_>>()?;

    let best_of = |fit: &[f64]| {
        (0..fit.len())
            .max_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(b.cmp(&a)))
            .unwrap_or(0)
    };
    let mut history = vec![fitness[best_of(&fitness)]];
    let mut stop = StopReason::MaxGenerations;
    let mut generations = 0;

    for _ in 0..cfg.max_generations {
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let mut pick = || loop {
                    let r = rng.random_range(0..np);
                    if r != i {
                        break r;
                    }
                };
                let a = pick();
                let b = loop {
                    let r = pick();
                    if r != a {
                        break r;
                    }
                };
                let c = loop {
                    let r = pick();
                    if r != a && r != b {
                        break r;
                    }
                };
                let forced = rng.random_range(0..dim);
                (0..dim)
                    .map(|j| {
                        if j == forced || rng.random::<f64>() < cfg.crossover_rate {
                            population[a][j]
                                + cfg.differential_weight * (population[b][j] - population[c][j])
                        } else {
                            population[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_fitness: Vec<f64> = trials
            .par_iter()
            .map(|c| objective(c))
            .collect::<Result<_>>()?;
        for (i, (trial, f)) in trials.into_iter().zip(trial_fitness).enumerate() {
            if f >= fitness[i] {
                population[i] = trial;
                fitness[i] = f;
            }
        }
        generations += 1;
        history.push(fitness[best_of(&fitness)]);

        if history.len() > STAGNATION_WINDOW {
            let now = history[history.len() - 1];
            let then = history[history.len() - 1 - STAGNATION_WINDOW];
            if now - then <= cfg.tolerance * then.abs().max(f64::MIN_POSITIVE) {
                stop = StopReason::Stagnation;
                break;
            }
        }
    }

    let best = best_of(&fitness);
    Ok(WeightOptimum {
        weights: softmax_unchecked(&population[best]),
        estimate: estimate(fitness[best]),
        generations,
        stop,
        history,
    })
}

/// Maximizes the compound coefficient of `x` on the lagged window of `y`.
pub fn optimize_weights(
    x: &Series,
    y: &Series,
    p: usize,
    k: impl Into<ExtremeCount>,
    alpha: f64,
    cfg: &DeConfig,
) -> Result<WeightOptimum> {
    optimize_weights_multi(x, std::slice::from_ref(y), p, k, alpha, cfg)
}

/// Shannon entropy (nats) of a probability vector.
pub fn entropy(weights: &[f64]) -> f64 {
    -weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|w| w * w.ln())
        .sum::<f64>()
}
