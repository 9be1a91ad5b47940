//! Penalty-aware particle swarm optimization over flat real coordinates.
//!
//! The engine maximizes a [`Fitness`] callback. Constraints are not projected:
//! the callback subtracts a penalty and the engine only clamps positions to a
//! padded box so particles cannot drift off to infinity.
//!
//! Randomness is drawn from per-particle streams derived from
//! `(run stream, iteration, particle)`, so results are identical whether the
//! fitness evaluations run sequentially or on a thread pool.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::stream::SeedStream;

/// Attempts per particle before the feasible sampler is declared broken.
pub const MAX_SAMPLER_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub num_particles: usize,
    pub num_iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Penalty weight applied by the fitness callbacks; the engine itself ignores it.
    pub penalty_coefficient: f64,
    /// Velocity bound as a fraction of each coordinate's initialization range.
    pub velocity_clamp: f64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            num_particles: 300,
            num_iterations: 200,
            inertia: 0.9,
            cognitive: 2.0,
            social: 2.0,
            penalty_coefficient: 1e6,
            velocity_clamp: 0.2,
        }
    }
}

impl SwarmConfig {
    pub fn desk() -> Self {
        Self {
            num_particles: 60,
            num_iterations: 60,
            ..Self::default()
        }
    }

    pub fn with_budget(self, num_particles: usize, num_iterations: usize) -> Self {
        Self {
            num_particles,
            num_iterations,
            ..self
        }
    }

    /// Fitness evaluations performed by one [`run`].
    pub fn evaluations(&self) -> usize {
        self.num_particles * self.num_iterations
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_particles == 0 || self.num_iterations == 0 {
            return Err(Error::InvalidArgument(
                "swarm needs at least one particle and one iteration".into(),
            ));
        }
        if !(self.velocity_clamp > 0.0 && self.velocity_clamp <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "velocity clamp must lie in (0, 1], got {}",
                self.velocity_clamp
            )));
        }
        if !(self.penalty_coefficient >= 0.0) {
            return Err(Error::InvalidArgument(
                "penalty coefficient must be nonnegative".into(),
            ));
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len("box upper bounds", lower.len(), upper.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("box lower bound exceeds upper".into()));
        }
        Ok(Self { lower, upper })
    }

    /// Box with the same bounds on every coordinate.
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn padded(&self, pad: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|l| l - pad).collect(),
            upper: self.upper.iter().map(|u| u + pad).collect(),
        }
    }

    pub fn concat(&self, other: &Self) -> Self {
        Self {
            lower: [self.lower.as_slice(), &other.lower].concat(),
            upper: [self.upper.as_slice(), &other.upper].concat(),
        }
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }
}

/// Where particles start and where they may roam.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    /// Sets the velocity bound; feasible samples should fall inside it.
    pub init_box: SearchBox,
    /// Positions are clamped to this box after every move.
    pub position_box: SearchBox,
}

impl SearchSpace {
    pub fn new(init_box: SearchBox, padding: f64) -> Self {
        let position_box = init_box.padded(padding);
        Self {
            init_box,
            position_box,
        }
    }

    pub fn dim(&self) -> usize {
        self.init_box.dim()
    }
}

/// Objective maximized by the swarm.
pub trait Fitness: Sync {
    /// Penalized objective value.
    fn fitness(&self, x: &[f64]) -> Result<f64>;

    /// Constraint violation at `x`; zero means feasible.
    fn penalty(&self, _x: &[f64]) -> f64 {
        0.0
    }
}

impl<F> Fitness for F
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    fn fitness(&self, x: &[f64]) -> Result<f64> {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub penalty: f64,
}

impl Evaluation {
    pub fn of<F: Fitness + ?Sized>(objective: &F, x: &[f64]) -> Result<Self> {
        let fitness = objective.fitness(x)?;
        Ok(Self {
            // NaN would never win a comparison and would silently pin a pbest.
            fitness: if fitness.is_nan() {
                f64::NEG_INFINITY
            } else {
                fitness
            },
            penalty: objective.penalty(x),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub best_penalty: f64,
    /// Iteration at which the personal best was recorded; 0 before any evaluation.
    pub best_iteration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub best_fitness: f64,
    pub best_penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasiblePoint {
    pub position: Vec<f64>,
    pub fitness: f64,
}

#[derive(Debug, Clone)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    /// Particle whose personal best is the global best.
    pub global_best: Option<usize>,
    /// Best zero-penalty position evaluated so far.
    pub best_feasible: Option<FeasiblePoint>,
    pub trace: Vec<TraceRecord>,
    pub velocity_bound: Vec<f64>,
    pub position_box: SearchBox,
}

impl Swarm {
    pub fn global_best_particle(&self) -> Option<&Particle> {
        self.global_best.map(|i| &self.particles[i])
    }
}

/// Builds the initial swarm. `injected` positions take the first particle
/// slots verbatim; the rest come from `sampler`, retried until the objective
/// reports zero penalty.
pub fn init_swarm<F, S>(
    config: &SwarmConfig,
    space: &SearchSpace,
    objective: &F,
    sampler: S,
    injected: &[Vec<f64>],
    stream: &SeedStream,
) -> Result<Swarm>
where
    F: Fitness + ?Sized,
    S: Fn(&mut ChaCha8Rng) -> Option<Vec<f64>>,
{
    config.validate()?;
    let dim = space.dim();
    check_len("position box", dim, space.position_box.dim())?;
    let velocity_bound: Vec<f64> = space
        .init_box
        .lower
        .iter()
        .zip(&space.init_box.upper)
        .map(|(l, u)| config.velocity_clamp * (u - l))
        .collect();

    let init_stream = stream.child(0);
    let mut particles = Vec::with_capacity(config.num_particles);
    for i in 0..config.num_particles {
        let mut rng = init_stream.child(i as u64).rng();
        let position = match injected.get(i) {
            Some(x) => {
                check_len("injected position", dim, x.len())?;
                x.clone()
            }
            None => sample_feasible(&sampler, objective, dim, &mut rng)?,
        };
        let velocity = velocity_bound
            .iter()
            .map(|&v| if v > 0.0 { rng.random_range(-v..=v) } else { 0.0 })
            .collect();
        particles.push(Particle {
            best_position: position.clone(),
            position,
            velocity,
            best_fitness: f64::NEG_INFINITY,
            best_penalty: f64::INFINITY,
            best_iteration: 0,
        });
    }
    Ok(Swarm {
        particles,
        global_best: None,
        best_feasible: None,
        trace: Vec::new(),
        velocity_bound,
        position_box: space.position_box.clone(),
    })
}

fn sample_feasible<F, S>(sampler: &S, objective: &F, dim: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>
where
    F: Fitness + ?Sized,
    S: Fn(&mut ChaCha8Rng) -> Option<Vec<f64>>,
{
    for _ in 0..MAX_SAMPLER_ATTEMPTS {
        if let Some(x) = sampler(rng) {
            check_len("sampled position", dim, x.len())?;
            if objective.penalty(&x) == 0.0 {
                return Ok(x);
            }
        }
    }
    Err(Error::SamplerExhausted {
        attempts: MAX_SAMPLER_ATTEMPTS,
    })
}

/// Evaluates every particle at its current position, in parallel.
pub fn evaluate<F: Fitness + ?Sized>(swarm: &Swarm, objective: &F) -> Result<Vec<Evaluation>> {
    swarm
        .particles
        .par_iter()
        .map(|p| Evaluation::of(objective, &p.position))
        .collect()
}

/// Records the evaluations of `iteration`: strict-improvement personal bests,
/// then the global best as the argmax over personal bests (ties go to the
/// earliest record, then the lowest particle index).
pub fn update_bests(swarm: &mut Swarm, iteration: usize, evals: &[Evaluation]) -> Result<()> {
    check_len("fitness values", swarm.particles.len(), evals.len())?;
    for (p, e) in swarm.particles.iter_mut().zip(evals) {
        if e.fitness > p.best_fitness {
            p.best_fitness = e.fitness;
            p.best_penalty = e.penalty;
            p.best_position.clone_from(&p.position);
            p.best_iteration = iteration;
        }
        if e.penalty == 0.0
            && swarm
                .best_feasible
                .as_ref()
                .is_none_or(|b| e.fitness > b.fitness)
        {
            swarm.best_feasible = Some(FeasiblePoint {
                position: p.position.clone(),
                fitness: e.fitness,
            });
        }
    }

    let mut best: Option<usize> = None;
    for (i, p) in swarm.particles.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let q = &swarm.particles[b];
                p.best_fitness > q.best_fitness
                    || (p.best_fitness == q.best_fitness && p.best_iteration < q.best_iteration)
            }
        };
        if better {
            best = Some(i);
        }
    }
    swarm.global_best = best;
    if let Some(g) = best {
        let p = &swarm.particles[g];
        swarm.trace.push(TraceRecord {
            iteration,
            best_fitness: p.best_fitness,
            best_penalty: p.best_penalty,
        });
    }
    Ok(())
}

/// Velocity update for one particle given its random weight vectors, before clamping.
pub fn velocity_update(
    config: &SwarmConfig,
    velocity: &[f64],
    position: &[f64],
    personal_best: &[f64],
    global_best: &[f64],
    r1: &[f64],
    r2: &[f64],
) -> Vec<f64> {
    (0..velocity.len())
        .map(|j| {
            config.inertia * velocity[j]
                + config.cognitive * r1[j] * (personal_best[j] - position[j])
                + config.social * r2[j] * (global_best[j] - position[j])
        })
        .collect()
}

/// Moves every particle once using fresh per-particle random weights from
/// `iteration_stream`.
pub fn step_velocity_position(swarm: &mut Swarm, config: &SwarmConfig, iteration_stream: &SeedStream) {
    let Some(g) = swarm.global_best else {
        return;
    };
    let global_best = swarm.particles[g].best_position.clone();
    let dim = global_best.len();
    for (i, p) in swarm.particles.iter_mut().enumerate() {
        let mut rng = iteration_stream.child(i as u64).rng();
        let r1: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let r2: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let mut v = velocity_update(
            config,
            &p.velocity,
            &p.position,
            &p.best_position,
            &global_best,
            &r1,
            &r2,
        );
        for (vj, &bound) in v.iter_mut().zip(&swarm.velocity_bound) {
            *vj = vj.clamp(-bound, bound);
        }
        for (x, vj) in p.position.iter_mut().zip(&v) {
            *x += vj;
        }
        swarm.position_box.clamp(&mut p.position);
        p.velocity = v;
    }
}

#[derive(Debug, Clone)]
pub struct SwarmRunResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Best fitness after each iteration; never decreases.
    pub fitness_trace: Vec<f64>,
    pub trace: Vec<TraceRecord>,
    pub best_feasible: Option<FeasiblePoint>,
    pub evaluations: usize,
}

/// Runs `num_iterations` rounds of evaluate, update bests, move. The last
/// round skips the move since its positions would never be evaluated.
pub fn run<F, S>(
    config: &SwarmConfig,
    space: &SearchSpace,
    objective: &F,
    sampler: S,
    injected: &[Vec<f64>],
    stream: &SeedStream,
) -> Result<SwarmRunResult>
where
    F: Fitness + ?Sized,
    S: Fn(&mut ChaCha8Rng) -> Option<Vec<f64>>,
{
    let mut swarm = init_swarm(config, space, objective, sampler, injected, stream)?;
    let mut evaluations = 0;
    for t in 1..=config.num_iterations {
        let evals = evaluate(&swarm, objective)?;
        evaluations += evals.len();
        update_bests(&mut swarm, t, &evals)?;
        if t < config.num_iterations {
            step_velocity_position(&mut swarm, config, &stream.child(t as u64));
        }
    }
    let best = swarm
        .global_best_particle()
        .expect("at least one particle and one iteration");
    Ok(SwarmRunResult {
        best_position: best.best_position.clone(),
        best_fitness: best.best_fitness,
        fitness_trace: swarm.trace.iter().map(|r| r.best_fitness).collect(),
        trace: swarm.trace,
        best_feasible: swarm.best_feasible,
        evaluations,
    })
}

/// Writes `iteration,best_fitness,best_penalty` rows for convergence plots.
pub fn write_trace_csv<W: Write>(trace: &[TraceRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for record in trace {
        w.serialize(record)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neg_sq(x: &[f64]) -> Result<f64> {
        Ok(-x.iter().map(|v| v * v).sum::<f64>())
    }

    fn unit_box_space(dim: usize) -> SearchSpace {
        SearchSpace::new(SearchBox::uniform(dim, -1.0, 1.0).unwrap(), 1.0)
    }

    fn box_sampler(dim: usize) -> impl Fn(&mut ChaCha8Rng) -> Option<Vec<f64>> {
        move |rng| Some((0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
    }

    #[test]
    fn velocity_arithmetic() {
        let cfg = SwarmConfig::default();
        let v = velocity_update(&cfg, &[0.0], &[0.0], &[1.0], &[2.0], &[0.5], &[0.5]);
        assert_eq!(v, vec![3.0]);
        let v = velocity_update(&cfg, &[0.0], &[0.0], &[1.0], &[2.0], &[0.0], &[0.0]);
        assert_eq!(v, vec![0.0]);
    }

    #[test]
    fn stationary_particle_stays_put() {
        let cfg = SwarmConfig::default().with_budget(1, 10);
        let space = unit_box_space(2);
        let mut swarm = init_swarm(&cfg, &space, &neg_sq, box_sampler(2), &[vec![0.3, -0.2]], &SeedStream::root(1)).unwrap();
        swarm.particles[0].velocity = vec![0.0, 0.0];
        for t in 1..10 {
            let evals = evaluate(&swarm, &neg_sq).unwrap();
            update_bests(&mut swarm, t, &evals).unwrap();
            step_velocity_position(&mut swarm, &cfg, &SeedStream::root(1).child(t as u64));
            assert_eq!(swarm.particles[0].position, vec![0.3, -0.2]);
        }
    }

    #[test]
    fn update_bests_argmax_and_strictness() {
        let cfg = SwarmConfig::default().with_budget(3, 1);
        let space = unit_box_space(1);
        let injected = vec![vec![0.1], vec![0.2], vec![0.3]];
        let mut swarm = init_swarm(&cfg, &space, &neg_sq, box_sampler(1), &injected, &SeedStream::root(0)).unwrap();
        let e = |f: f64| Evaluation { fitness: f, penalty: 0.0 };
        update_bests(&mut swarm, 1, &[e(1.0), e(3.0), e(2.0)]).unwrap();
        assert_eq!(swarm.global_best, Some(1));
        assert_eq!(swarm.particles[1].best_position, vec![0.2]);

        // equal fitness later does not replace the personal best
        swarm.particles[0].position = vec![0.9];
        update_bests(&mut swarm, 2, &[e(1.0), e(0.0), e(0.0)]).unwrap();
        assert_eq!(swarm.particles[0].best_position, vec![0.1]);
        assert_eq!(swarm.particles[0].best_iteration, 1);

        // a later tie with the global best loses to the earlier record
        update_bests(&mut swarm, 3, &[e(3.0), e(0.0), e(0.0)]).unwrap();
        assert_eq!(swarm.global_best, Some(1));
        let trace: Vec<f64> = swarm.trace.iter().map(|r| r.best_fitness).collect();
        assert_eq!(trace, vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn lowest_index_wins_same_iteration_tie() {
        let cfg = SwarmConfig::default().with_budget(3, 1);
        let mut swarm = init_swarm(&cfg, &unit_box_space(1), &neg_sq, box_sampler(1), &[], &SeedStream::root(0)).unwrap();
        let e = |f: f64| Evaluation { fitness: f, penalty: 0.0 };
        update_bests(&mut swarm, 1, &[e(1.0), e(2.0), e(2.0)]).unwrap();
        assert_eq!(swarm.global_best, Some(1));
    }

    #[test]
    fn converges_on_sphere() {
        let cfg = SwarmConfig::default().with_budget(30, 200);
        let res = run(&cfg, &unit_box_space(2), &neg_sq, box_sampler(2), &[], &SeedStream::root(3)).unwrap();
        assert!(res.best_fitness >= -1e-3, "{}", res.best_fitness);
        assert_eq!(res.evaluations, 30 * 200);
        assert_eq!(res.fitness_trace.len(), 200);
        assert!(res.fitness_trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(neg_sq(&res.best_position).unwrap(), res.best_fitness);
    }

    #[test]
    fn constant_fitness() {
        let cfg = SwarmConfig::default().with_budget(5, 4);
        let f = |_: &[f64]| -> Result<f64> { Ok(7.5) };
        let res = run(&cfg, &unit_box_space(3), &f, box_sampler(3), &[], &SeedStream::root(3)).unwrap();
        assert_eq!(res.fitness_trace, vec![7.5; 4]);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = SwarmConfig::default().with_budget(10, 30);
        let a = run(&cfg, &unit_box_space(2), &neg_sq, box_sampler(2), &[], &SeedStream::root(8)).unwrap();
        let b = run(&cfg, &unit_box_space(2), &neg_sq, box_sampler(2), &[], &SeedStream::root(8)).unwrap();
        assert_eq!(a.best_position, b.best_position);
        assert_eq!(a.fitness_trace, b.fitness_trace);
        let c = run(&cfg, &unit_box_space(2), &neg_sq, box_sampler(2), &[], &SeedStream::root(9)).unwrap();
        assert_ne!(a.best_position, c.best_position);
    }

    #[test]
    fn sampler_failure_is_reported() {
        struct Never;
        impl Fitness for Never {
            fn fitness(&self, _: &[f64]) -> Result<f64> {
                Ok(0.0)
            }
            fn penalty(&self, _: &[f64]) -> f64 {
                1.0
            }
        }
        let cfg = SwarmConfig::default().with_budget(2, 1);
        let err = init_swarm(&cfg, &unit_box_space(1), &Never, box_sampler(1), &[], &SeedStream::root(0));
        assert!(matches!(err, Err(Error::SamplerExhausted { .. })));
    }

    #[test]
    fn trace_csv_has_header() {
        let mut buf = Vec::new();
        let trace = [TraceRecord { iteration: 1, best_fitness: 2.5, best_penalty: 0.0 }];
        write_trace_csv(&trace, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,best_fitness,best_penalty\n1,2.5,0.0\n");
    }
}
