use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{DecisionProblem, Evaluator, ObjectiveWeights, PlanOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaConfig {
    /// Total objective evaluations, including the initial one.
    pub budget: usize,
    pub initial_temperature: f64,
    pub final_temperature: f64,
    /// Standard deviation of the Gaussian key perturbation.
    pub step_sigma: f64,
    /// Fraction of keys perturbed per proposal.
    pub mutation_fraction: f64,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            budget: 12_000,
            initial_temperature: 1.0,
            final_temperature: 1e-3,
            step_sigma: 0.1,
            mutation_fraction: 0.1,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::config("sa.budget", "must be at least 1"));
        }
        if !(self.initial_temperature > 0.0 && self.final_temperature > 0.0) {
            return Err(Error::config("sa.temperature", "must be positive"));
        }
        if self.final_temperature > self.initial_temperature {
            return Err(Error::config(
                "sa.final_temperature",
                "must not exceed the initial temperature",
            ));
        }
        if self.step_sigma.is_nan() || self.step_sigma <= 0.0 {
            return Err(Error::config("sa.step_sigma", "must be positive"));
        }
        if !(self.mutation_fraction > 0.0 && self.mutation_fraction <= 1.0) {
            return Err(Error::config("sa.mutation_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Per-step geometric cooling factor reaching the final temperature on
    /// the last evaluation.
    pub fn cooling_factor(&self) -> f64 {
        if self.budget <= 1 {
            1.0
        } else {
            (self.final_temperature / self.initial_temperature).powf(1.0 / (self.budget - 1) as f64)
        }
    }
}

/// Metropolis acceptance: improvements always, worsening moves with
/// probability `exp(-delta / temperature)`.
pub fn accepts<R: Rng + ?Sized>(delta: f64, temperature: f64, rng: &mut R) -> bool {
    delta < 0.0 || rng.random::<f64>() < (-delta / temperature).exp()
}

/// Single-chain annealing over the same key encoding as the swarm. Starts
/// from `start` when given, otherwise from a uniform sample.
pub fn sa_optimize<R: Rng + ?Sized>(
    problem: &DecisionProblem,
    config: &SaConfig,
    weights: &ObjectiveWeights,
    start: Option<&[f64]>,
    rng: &mut R,
) -> Result<PlanOutcome> {
    config.validate()?;
    let dim = problem.dimension();
    let mut ev = Evaluator::new(problem, *weights);
    let mut current: Vec<f64> = match start {
        Some(s) if s.len() == dim => s.to_vec(),
        _ => (0..dim).map(|_| rng.random::<f64>()).collect(),
    };
    let mut current_score = ev.score(&current);
    let mut best = current.clone();
    let mut best_score = current_score;
    let mut trace = Vec::with_capacity(config.budget);
    trace.push(best_score);

    let noise = Normal::new(0.0, config.step_sigma).expect("positive sigma");
    let flips = ((config.mutation_fraction * dim as f64).round() as usize).clamp(1, dim.max(1));
    let alpha = config.cooling_factor();
    let mut temperature = config.initial_temperature;
    let mut candidate = current.clone();
    for _ in 1..config.budget {
        temperature *= alpha;
        candidate.copy_from_slice(&current);
        if dim > 0 {
            for d in sample(rng, dim, flips) {
                candidate[d] = (candidate[d] + noise.sample(rng)).clamp(0.0, 1.0);
            }
        }
        let score = ev.score(&candidate);
        if accepts(score - current_score, temperature, rng) {
            std::mem::swap(&mut current, &mut candidate);
            current_score = score;
            if score < best_score {
                best_score = score;
                best.copy_from_slice(&current);
            }
        }
        trace.push(best_score);
    }

    let plan = ev.decode(&best);
    Ok(PlanOutcome {
        plan,
        score: best_score,
        trace,
        best_position: best,
    })
}
