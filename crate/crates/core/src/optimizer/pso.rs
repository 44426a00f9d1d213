use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{DecisionProblem, Evaluator, ObjectiveWeights, PlanOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmConfig {
    pub particle_count: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity bound as a fraction of the unit position range.
    pub velocity_clamp: f64,
    pub seed: u64,
    /// Evaluate particles on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        SwarmConfig {
            particle_count: 120,
            iterations: 100,
            inertia: 0.7,
            cognitive: 2.0,
            social: 2.0,
            velocity_clamp: 0.25,
            seed: 0,
            parallel: true,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particle_count == 0 {
            return Err(Error::config("swarm.particle_count", "must be at least 1"));
        }
        for (f, v) in [
            ("swarm.inertia", self.inertia),
            ("swarm.cognitive", self.cognitive),
            ("swarm.social", self.social),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(f, "must be non-negative"));
            }
        }
        if !(self.velocity_clamp.is_finite() && self.velocity_clamp > 0.0) {
            return Err(Error::config("swarm.velocity_clamp", "must be positive"));
        }
        Ok(())
    }

    /// Matched evaluation budget for baselines.
    pub fn evaluations(&self) -> usize {
        self.particle_count * self.iterations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_score: f64,
}

impl Particle {
    pub fn at(position: Vec<f64>) -> Self {
        Particle {
            velocity: vec![0.0; position.len()],
            best_position: position.clone(),
            best_score: f64::INFINITY,
            position,
        }
    }
}

/// Canonical velocity and position update for one particle; `draw` supplies
/// the uniform coefficients, cognitive first, per dimension.
pub fn update_particle(
    particle: &mut Particle,
    gbest: &[f64],
    config: &SwarmConfig,
    mut draw: impl FnMut() -> f64,
) {
    let clamp = config.velocity_clamp;
    let Particle {
        position,
        velocity,
        best_position,
        ..
    } = particle;
    for d in 0..position.len() {
        let r1 = draw();
        let r2 = draw();
        let x = position[d];
        let v = config.inertia * velocity[d]
            + config.cognitive * r1 * (best_position[d] - x)
            + config.social * r2 * (gbest[d] - x);
        let v = v.clamp(-clamp, clamp);
        velocity[d] = v;
        position[d] = (x + v).clamp(0.0, 1.0);
    }
}

/// [`update_particle`] with coefficients taken from 32-bit words, two per
/// dimension, cognitive first. A straight loop the compiler can vectorise.
fn update_with_coefficients(particle: &mut Particle, gbest: &[f64], config: &SwarmConfig, words: &[u32]) {
    const SCALE: f64 = 1.0 / 4_294_967_296.0;
    let (w, c1, c2, clamp) = (config.inertia, config.cognitive, config.social, config.velocity_clamp);
    let Particle {
        position,
        velocity,
        best_position,
        ..
    } = particle;
    let lanes = position
        .iter_mut()
        .zip(velocity.iter_mut())
        .zip(best_position.iter())
        .zip(gbest.iter())
        .zip(words.chunks_exact(2));
    for ((((x, v), &pb), &gb), r) in lanes {
        let r1 = r[0] as f64 * SCALE;
        let r2 = r[1] as f64 * SCALE;
        let nv = (w * *v + c1 * r1 * (pb - *x) + c2 * r2 * (gb - *x)).clamp(-clamp, clamp);
        *v = nv;
        *x = (*x + nv).clamp(0.0, 1.0);
    }
}

/// One synchronous swarm update. Each particle gets its own stream seeded
/// from `rng`, so the result is the same with or without parallelism.
pub fn pso_step<R: Rng + ?Sized>(
    swarm: &mut [Particle],
    gbest: &[f64],
    config: &SwarmConfig,
    rng: &mut R,
) -> Result<()> {
    let dim = gbest.len();
    if let Some(bad) = swarm.iter().position(|p| {
        p.position.len() != dim || p.velocity.len() != dim || p.best_position.len() != dim
    }) {
        return Err(Error::Contract(format!(
            "particle {bad} does not have dimension {dim}"
        )));
    }
    let seeds: Vec<u64> = swarm.iter().map(|_| rng.next_u64()).collect();
    let update = |(p, seed): (&mut Particle, u64)| {
        let mut stream = SmallRng::seed_from_u64(seed);
        let mut coeffs = vec![0u32; 2 * dim];
        stream.fill(&mut coeffs[..]);
        update_with_coefficients(p, gbest, config, &coeffs);
    };
    if config.parallel {
        swarm.par_iter_mut().zip(seeds).for_each(update);
    } else {
        swarm.iter_mut().zip(seeds).for_each(update);
    }
    Ok(())
}

fn evaluate_all(
    swarm: &[Particle],
    problem: &DecisionProblem,
    weights: ObjectiveWeights,
    parallel: bool,
) -> Vec<f64> {
    if parallel {
        swarm
            .par_iter()
            .map_init(
                || Evaluator::new(problem, weights),
                |ev, p| ev.score(&p.position),
            )
            .collect()
    } else {
        let mut ev = Evaluator::new(problem, weights);
        swarm.iter().map(|p| ev.score(&p.position)).collect()
    }
}

/// Particle swarm search from uniform random positions.
pub fn pso_optimize<R: Rng + ?Sized>(
    problem: &DecisionProblem,
    config: &SwarmConfig,
    weights: &ObjectiveWeights,
    rng: &mut R,
) -> Result<PlanOutcome> {
    pso_optimize_seeded(problem, config, weights, &[], rng)
}

/// As [`pso_optimize`], but the first particles start at `seeds` instead of
/// random positions (warm start from an incumbent plan).
pub fn pso_optimize_seeded<R: Rng + ?Sized>(
    problem: &DecisionProblem,
    config: &SwarmConfig,
    weights: &ObjectiveWeights,
    seeds: &[Vec<f64>],
    rng: &mut R,
) -> Result<PlanOutcome> {
    config.validate()?;
    let dim = problem.dimension();
    let mut swarm: Vec<Particle> = (0..config.particle_count)
        .map(|i| {
            let random: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            match seeds.get(i) {
                Some(s) if s.len() == dim => Particle::at(s.clone()),
                _ => Particle::at(random),
            }
        })
        .collect();

    let scores = evaluate_all(&swarm, problem, *weights, config.parallel);
    let mut gbest = 0;
    for (i, (p, &s)) in swarm.iter_mut().zip(&scores).enumerate() {
        p.best_score = s;
        if s < scores[gbest] {
            gbest = i;
        }
    }
    let mut gbest_position = swarm[gbest].best_position.clone();
    let mut gbest_score = swarm[gbest].best_score;
    let mut trace = Vec::with_capacity(config.iterations + 1);
    trace.push(gbest_score);

    for _ in 0..config.iterations {
        pso_step(&mut swarm, &gbest_position, config, rng)?;
        let scores = evaluate_all(&swarm, problem, *weights, config.parallel);
        // Fold in particle order so ties resolve identically every run.
        for (p, &s) in swarm.iter_mut().zip(&scores) {
            if s < p.best_score {
                p.best_score = s;
                p.best_position.copy_from_slice(&p.position);
            }
            if s < gbest_score {
                gbest_score = s;
                gbest_position.copy_from_slice(&p.position);
            }
        }
        trace.push(gbest_score);
    }

    let plan = Evaluator::new(problem, *weights).decode(&gbest_position);
    Ok(PlanOutcome {
        plan,
        score: gbest_score,
        trace,
        best_position: gbest_position,
    })
}
