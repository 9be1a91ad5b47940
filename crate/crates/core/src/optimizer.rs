//! Position optimizers: the alternating two-layer scheme and its benchmarks.
//!
//! Every swarm is seeded with the current incumbent, so a subproblem can never
//! return a worse layout than the one it started from and the alternating
//! loop's sum-rate trace is monotone by construction.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beamforming::sum_rate_optimal;
use crate::channel::Scenario;
use crate::error::{check_len, Error, Result};
use crate::geometry::{
    check_feasible, l1_distance, uniform_initial_layout, unflatten_offsets, ArrayArchitecture,
    SpacedInterval, TwoLayerLayout, HALF_WAVELENGTH, QUARTER_WAVELENGTH,
};
use crate::pso::{self, Fitness, SearchBox, SearchSpace, SwarmConfig, TraceRecord};
use crate::stream::SeedStream;

/// Settings of the alternating loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoConfig {
    pub max_rounds: usize,
    /// Stop once a full round improves the sum-rate by less than this (bps/Hz).
    pub epsilon: f64,
    pub subarray_swarm: SwarmConfig,
    pub antenna_swarm: SwarmConfig,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            max_rounds: 10,
            epsilon: 1e-3,
            subarray_swarm: SwarmConfig::default(),
            antenna_swarm: SwarmConfig::default(),
        }
    }
}

impl AoConfig {
    pub fn desk() -> Self {
        Self {
            subarray_swarm: SwarmConfig::desk(),
            antenna_swarm: SwarmConfig::desk(),
            ..Self::default()
        }
    }

    /// Evaluations spent by one full round.
    pub fn round_evaluations(&self) -> usize {
        self.subarray_swarm.evaluations() + self.antenna_swarm.evaluations()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Alternating subarray/antenna optimization of the two-layer array.
    #[serde(rename = "tl-ma")]
    TwoLayer,
    /// Every antenna moves independently over the whole region.
    #[serde(rename = "sl-ma")]
    SingleLayer,
    /// Rigid subarrays on the half-wavelength grid; only origins move.
    #[serde(rename = "array-wise")]
    ArrayWise,
    /// Fixed half-wavelength uniform linear array.
    #[serde(rename = "fpa")]
    FixedPosition,
    /// One swarm over subarray origins and offsets jointly.
    #[serde(rename = "all-at-once")]
    AllAtOnce,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::SingleLayer,
        Scheme::TwoLayer,
        Scheme::ArrayWise,
        Scheme::FixedPosition,
        Scheme::AllAtOnce,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Scheme::TwoLayer => "tl-ma",
            Scheme::SingleLayer => "sl-ma",
            Scheme::ArrayWise => "array-wise",
            Scheme::FixedPosition => "fpa",
            Scheme::AllAtOnce => "all-at-once",
        }
    }

    /// Whether the scheme's geometry depends on the subarray-length ratio.
    pub fn uses_alpha(&self) -> bool {
        matches!(self, Scheme::TwoLayer | Scheme::AllAtOnce)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.label() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FinalLayout {
    TwoLayer(TwoLayerLayout),
    /// Absolute positions of schemes without a subarray structure.
    Flat(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    /// Displacement baseline.
    pub initial_layout: FinalLayout,
    pub layout: FinalLayout,
    /// Absolute antenna positions of `layout`.
    pub positions: Vec<f64>,
    pub sum_rate: f64,
    /// Subarray travel `C_S` in wavelengths.
    pub subarray_displacement: f64,
    /// Antenna travel `C_A` in wavelengths; single-layer schemes book all travel here.
    pub antenna_displacement: f64,
    /// Incumbent sum-rate at the start and after every round.
    pub rate_trace: Vec<f64>,
    pub rounds: usize,
    pub evaluations: usize,
}

impl SchemeResult {
    pub fn total_displacement(&self) -> f64 {
        self.subarray_displacement + self.antenna_displacement
    }
}

/// Outcome of one swarm run on a subproblem.
#[derive(Debug, Clone)]
pub struct SubproblemResult {
    /// Best feasible point found, in the subproblem's coordinates.
    pub position: Vec<f64>,
    pub sum_rate: f64,
    pub evaluations: usize,
    pub trace: Vec<TraceRecord>,
}

fn compose_positions(q: &[f64], flat_offsets: &[f64], per_subarray: usize) -> Vec<f64> {
    q.iter()
        .zip(flat_offsets.chunks(per_subarray))
        .flat_map(|(&qs, row)| row.iter().map(move |&d| qs + d))
        .collect()
}

fn rate_at(positions: &[f64], scenario: &Scenario) -> Result<f64> {
    Ok(sum_rate_optimal(positions, scenario)?.sum_rate)
}

fn check_scenario(scenario: &Scenario) -> Result<()> {
    scenario.validate()
}

fn flat_antenna_penalty(flat: &[f64], arch: &ArrayArchitecture) -> f64 {
    let ant = arch.antenna_interval();
    flat.chunks(arch.antennas_per_subarray())
        .map(|row| ant.penalty(row))
        .sum()
}

/// `R̃(q, d) - κ P_S(q)` for fixed offsets.
pub fn fitness_subarray(
    q: &[f64],
    offsets: &[Vec<f64>],
    scenario: &Scenario,
    arch: &ArrayArchitecture,
    kappa: f64,
) -> Result<f64> {
    let layout = TwoLayerLayout::new(q.to_vec(), offsets.to_vec());
    let positions = layout.absolute_positions(arch)?;
    Ok(rate_at(&positions, scenario)? - kappa * arch.subarray_interval().penalty(q))
}

/// `R̃(q, d) - κ P_A(d)` for fixed subarray origins; `d` is the flat offset vector.
pub fn fitness_antenna(
    flat_offsets: &[f64],
    q: &[f64],
    scenario: &Scenario,
    arch: &ArrayArchitecture,
    kappa: f64,
) -> Result<f64> {
    let layout = TwoLayerLayout::from_flat(q, flat_offsets, arch)?;
    let positions = layout.absolute_positions(arch)?;
    Ok(rate_at(&positions, scenario)? - kappa * flat_antenna_penalty(flat_offsets, arch))
}

struct SubarrayObjective<'a> {
    flat_offsets: Vec<f64>,
    scenario: &'a Scenario,
    arch: &'a ArrayArchitecture,
    kappa: f64,
}

impl Fitness for SubarrayObjective<'_> {
    fn fitness(&self, q: &[f64]) -> Result<f64> {
        let positions = compose_positions(q, &self.flat_offsets, self.arch.antennas_per_subarray());
        Ok(rate_at(&positions, self.scenario)? - self.kappa * self.penalty(q))
    }

    fn penalty(&self, q: &[f64]) -> f64 {
        self.arch.subarray_interval().penalty(q)
    }
}

struct AntennaObjective<'a> {
    q: &'a [f64],
    scenario: &'a Scenario,
    arch: &'a ArrayArchitecture,
    kappa: f64,
}

impl Fitness for AntennaObjective<'_> {
    fn fitness(&self, d: &[f64]) -> Result<f64> {
        let positions = compose_positions(self.q, d, self.arch.antennas_per_subarray());
        Ok(rate_at(&positions, self.scenario)? - self.kappa * self.penalty(d))
    }

    fn penalty(&self, d: &[f64]) -> f64 {
        flat_antenna_penalty(d, self.arch)
    }
}

struct JointObjective<'a> {
    scenario: &'a Scenario,
    arch: &'a ArrayArchitecture,
    kappa: f64,
}

impl Fitness for JointObjective<'_> {
    fn fitness(&self, x: &[f64]) -> Result<f64> {
        let (q, d) = x.split_at(self.arch.num_subarrays());
        let positions = compose_positions(q, d, self.arch.antennas_per_subarray());
        Ok(rate_at(&positions, self.scenario)? - self.kappa * self.penalty(x))
    }

    fn penalty(&self, x: &[f64]) -> f64 {
        let (q, d) = x.split_at(self.arch.num_subarrays());
        self.arch.subarray_interval().penalty(q) + flat_antenna_penalty(d, self.arch)
    }
}

struct SingleLayerObjective<'a> {
    interval: SpacedInterval,
    scenario: &'a Scenario,
    kappa: f64,
}

impl Fitness for SingleLayerObjective<'_> {
    fn fitness(&self, x: &[f64]) -> Result<f64> {
        Ok(rate_at(x, self.scenario)? - self.kappa * self.penalty(x))
    }

    fn penalty(&self, x: &[f64]) -> f64 {
        self.interval.penalty(x)
    }
}

fn interval_box(interval: &SpacedInterval, n: usize) -> Result<SearchBox> {
    SearchBox::uniform(n, interval.lower, interval.upper)
}

fn offsets_sampler(arch: &ArrayArchitecture) -> impl Fn(&mut ChaCha8Rng) -> Option<Vec<f64>> + '_ {
    let ant = arch.antenna_interval();
    move |rng| {
        let mut d = Vec::with_capacity(arch.num_antennas());
        for _ in 0..arch.num_subarrays() {
            d.extend(ant.sample(arch.antennas_per_subarray(), rng)?);
        }
        Some(d)
    }
}

fn best_feasible(run: pso::SwarmRunResult) -> Result<SubproblemResult> {
    let best = run.best_feasible.ok_or_else(|| {
        Error::InvalidArgument("swarm never evaluated a feasible point".into())
    })?;
    Ok(SubproblemResult {
        position: best.position,
        sum_rate: best.fitness,
        evaluations: run.evaluations,
        trace: run.trace,
    })
}

/// Optimizes the subarray origins with the offsets held fixed.
///
/// `incumbent`, when given, is injected as the first particle.
pub fn optimize_subarrays(
    offsets: &[Vec<f64>],
    incumbent: Option<&[f64]>,
    scenario: &Scenario,
    arch: &ArrayArchitecture,
    config: &SwarmConfig,
    stream: &SeedStream,
) -> Result<SubproblemResult> {
    check_scenario(scenario)?;
    TwoLayerLayout::new(vec![0.0; arch.num_subarrays()], offsets.to_vec()).check_dims(arch)?;
    let flat_offsets = offsets.concat();
    let objective = SubarrayObjective {
        flat_offsets,
        scenario,
        arch,
        kappa: config.penalty_coefficient,
    };
    let interval = arch.subarray_interval();
    let space = SearchSpace::new(
        interval_box(&interval, arch.num_subarrays())?,
        arch.subarray_length(),
    );
    let injected: Vec<Vec<f64>> = incumbent.map(|q| vec![q.to_vec()]).unwrap_or_default();
    let n = arch.num_subarrays();
    let run = pso::run(
        config,
        &space,
        &objective,
        |rng| interval.sample(n, rng),
        &injected,
        stream,
    )?;
    best_feasible(run)
}

/// The unique feasible offsets when each subarray is exactly `M_A` half wavelengths long.
pub fn half_wavelength_grid(arch: &ArrayArchitecture) -> Vec<Vec<f64>> {
    let row: Vec<f64> = (0..arch.antennas_per_subarray())
        .map(|a| QUARTER_WAVELENGTH + a as f64 * HALF_WAVELENGTH)
        .collect();
    vec![row; arch.num_subarrays()]
}

/// Optimizes the flat offset vector with the subarray origins held fixed.
///
/// When the offsets have a single feasible value the grid is returned
/// without running a swarm.
pub fn optimize_antennas(
    q: &[f64],
    incumbent: Option<&[f64]>,
    scenario: &Scenario,
    arch: &ArrayArchitecture,
    config: &SwarmConfig,
    stream: &SeedStream,
) -> Result<SubproblemResult> {
    check_scenario(scenario)?;
    check_len("subarray origins", arch.num_subarrays(), q.len())?;
    if arch.is_array_wise() {
        let d: Vec<f64> = half_wavelength_grid(arch).concat();
        let sum_rate = rate_at(&compose_positions(q, &d, arch.antennas_per_subarray()), scenario)?;
        return Ok(SubproblemResult {
            position: d,
            sum_rate,
            evaluations: 0,
            trace: Vec::new(),
        });
    }
    let objective = AntennaObjective {
        q,
        scenario,
        arch,
        kappa: config.penalty_coefficient,
    };
    let space = SearchSpace::new(
        interval_box(&arch.antenna_interval(), arch.num_antennas())?,
        arch.subarray_length(),
    );
    let injected: Vec<Vec<f64>> = incumbent.map(|d| vec![d.to_vec()]).unwrap_or_default();
    let run = pso::run(config, &space, &objective, offsets_sampler(arch), &injected, stream)?;
    best_feasible(run)
}

/// Alternating optimization from the uniform reference layout.
pub fn ao_optimize(
    scenario: &Scenario,
    arch: &ArrayArchitecture,
    config: &AoConfig,
    stream: &SeedStream,
) -> Result<SchemeResult> {
    ao_optimize_from(scenario, arch, config, &uniform_initial_layout(arch)?, stream)
}

/// Alternating optimization from a given feasible layout, which also serves
/// as the displacement baseline. Subproblem `i` uses stream child `i`.
pub fn ao_optimize_from(
    scenario: &Scenario,
    arch: &ArrayArchitecture,
    config: &AoConfig,
    initial: &TwoLayerLayout,
    stream: &SeedStream,
) -> Result<SchemeResult> {
    let report = check_feasible(initial, arch)?;
    if !report.is_feasible() {
        return Err(Error::InvalidArgument(format!(
            "initial layout is infeasible: {}",
            report.violations[0]
        )));
    }
    let mut q = initial.subarray_origins.clone();
    let mut d = initial.flat_offsets();
    let mut rate = rate_at(&initial.absolute_positions(arch)?, scenario)?;
    let mut rate_trace = vec![rate];
    let mut evaluations = 0;
    let mut rounds = 0;

    for round in 0..config.max_rounds as u64 {
        let offsets = unflatten_offsets(&d, arch)?;
        let sub = optimize_subarrays(
            &offsets,
            Some(&q),
            scenario,
            arch,
            &config.subarray_swarm,
            &stream.child(2 * round),
        )?;
        q = sub.position;
        let ant = optimize_antennas(
            &q,
            Some(&d),
            scenario,
            arch,
            &config.antenna_swarm,
            &stream.child(2 * round + 1),
        )?;
        d = ant.position;
        evaluations += sub.evaluations + ant.evaluations;
        rounds += 1;

        let improvement = ant.sum_rate - rate;
        rate = ant.sum_rate;
        rate_trace.push(rate);
        if improvement < config.epsilon {
            break;
        }
    }

    let layout = TwoLayerLayout::from_flat(&q, &d, arch)?;
    two_layer_result(
        Scheme::TwoLayer,
        initial,
        layout,
        arch,
        rate,
        rate_trace,
        rounds,
        evaluations,
    )
}

#[allow(clippy::too_many_arguments)]
fn two_layer_result(
    scheme: Scheme,
    initial: &TwoLayerLayout,
    layout: TwoLayerLayout,
    arch: &ArrayArchitecture,
    sum_rate: f64,
    rate_trace: Vec<f64>,
    rounds: usize,
    evaluations: usize,
) -> Result<SchemeResult> {
    let (c_s, c_a) = crate::geometry::sum_displacement(initial, &layout)?;
    Ok(SchemeResult {
        scheme,
        initial_layout: FinalLayout::TwoLayer(initial.clone()),
        positions: layout.absolute_positions(arch)?,
        layout: FinalLayout::TwoLayer(layout),
        sum_rate,
        subarray_displacement: c_s,
        antenna_displacement: c_a,
        rate_trace,
        rounds,
        evaluations,
    })
}

/// Reference layout of the single-layer scheme: antennas spread evenly over the region.
pub fn single_layer_initial_positions(arch: &ArrayArchitecture) -> Vec<f64> {
    arch.single_layer_interval().uniform(arch.num_antennas())
}

/// Element-wise benchmark: one swarm over all absolute positions.
pub fn sl_ma_optimize(
    scenario: &Scenario,
    arch: &ArrayArchitecture,
    config: &SwarmConfig,
    stream: &SeedStream,
) -> Result<SchemeResult> {
    check_scenario(scenario)?;
    let m = arch.num_antennas();
    let interval = arch.single_layer_interval();
    let initial = single_layer_initial_positions(arch);
    let initial_rate = rate_at(&initial, scenario)?;
    let objective = SingleLayerObjective {
        interval,
        scenario,
        kappa: config.penalty_coefficient,
    };
    let space = SearchSpace::new(interval_box(&interval, m)?, arch.subarray_length());
    let run = pso::run(
        config,
        &space,
        &objective,
        |rng| interval.sample(m, rng),
        std::slice::from_ref(&initial),
        stream,
    )?;
    let best = best_feasible(run)?;
    Ok(SchemeResult {
        scheme: Scheme::SingleLayer,
        antenna_displacement: l1_distance(&initial, &best.position),
        initial_layout: FinalLayout::Flat(initial),
        layout: FinalLayout::Flat(best.position.clone()),
        positions: best.position,
        sum_rate: best.sum_rate,
        subarray_displacement: 0.0,
        rate_trace: vec![initial_rate, best.sum_rate],
        rounds: 1,
        evaluations: best.evaluations,
    })
}

/// Rigid-subarray benchmark: offsets pinned to the half-wavelength grid and
/// only the origins optimized, once.
pub fn array_wise_optimize(
    scenario: &Scenario,
    arch: &ArrayArchitecture,
    config: &SwarmConfig,
    stream: &SeedStream,
) -> Result<SchemeResult> {
    let rigid = ArrayArchitecture::array_wise(
        arch.num_subarrays(),
        arch.antennas_per_subarray(),
        arch.region_length(),
    )?;
    let grid = half_wavelength_grid(&rigid);
    let initial = TwoLayerLayout::new(uniform_initial_layout(&rigid)?.subarray_origins, grid.clone());
    let initial_rate = rate_at(&initial.absolute_positions(&rigid)?, scenario)?;
    let sub = optimize_subarrays(
        &grid,
        Some(&initial.subarray_origins),
        scenario,
        &rigid,
        config,
        stream,
    )?;
    let layout = TwoLayerLayout::new(sub.position, grid);
    two_layer_result(
        Scheme::ArrayWise,
        &initial,
        layout,
        &rigid,
        sub.sum_rate,
        vec![initial_rate, sub.sum_rate],
        1,
        sub.evaluations,
    )
}

/// Uniform half-wavelength array of `m` antennas centered at the origin.
pub fn fpa_positions(m: usize) -> Vec<f64> {
    let first = -((m as f64 - 1.0) * HALF_WAVELENGTH) / 2.0;
    (0..m).map(|i| first + i as f64 * HALF_WAVELENGTH).collect()
}

/// Fixed-position benchmark; consumes no randomness.
pub fn fpa_layout(scenario: &Scenario, arch: &ArrayArchitecture) -> Result<SchemeResult> {
    check_scenario(scenario)?;
    let positions = fpa_positions(arch.num_antennas());
    let sum_rate = rate_at(&positions, scenario)?;
    Ok(SchemeResult {
        scheme: Scheme::FixedPosition,
        initial_layout: FinalLayout::Flat(positions.clone()),
        layout: FinalLayout::Flat(positions.clone()),
        positions,
        sum_rate,
        subarray_displacement: 0.0,
        antenna_displacement: 0.0,
        rate_trace: vec![sum_rate],
        rounds: 0,
        evaluations: 0,
    })
}

/// Joint benchmark: one swarm over `(q, d)` with both penalties.
pub fn all_at_once_optimize(
    scenario: &Scenario,
    arch: &ArrayArchitecture,
    config: &SwarmConfig,
    stream: &SeedStream,
) -> Result<SchemeResult> {
    check_scenario(scenario)?;
    let initial = uniform_initial_layout(arch)?;
    let initial_rate = rate_at(&initial.absolute_positions(arch)?, scenario)?;
    let objective = JointObjective {
        scenario,
        arch,
        kappa: config.penalty_coefficient,
    };
    let ms = arch.num_subarrays();
    let sub = arch.subarray_interval();
    let space = SearchSpace::new(
        interval_box(&sub, ms)?.concat(&interval_box(&arch.antenna_interval(), arch.num_antennas())?),
        arch.subarray_length(),
    );
    let sample_offsets = offsets_sampler(arch);
    let sampler = |rng: &mut ChaCha8Rng| {
        let mut x = sub.sample(ms, rng)?;
        x.extend(sample_offsets(rng)?);
        Some(x)
    };
    let start: Vec<f64> = [initial.subarray_origins.as_slice(), &initial.flat_offsets()].concat();
    let run = pso::run(config, &space, &objective, sampler, &[start], stream)?;
    let best = best_feasible(run)?;
    let (q, d) = best.position.split_at(ms);
    let layout = TwoLayerLayout::from_flat(q, d, arch)?;
    two_layer_result(
        Scheme::AllAtOnce,
        &initial,
        layout,
        arch,
        best.sum_rate,
        vec![initial_rate, best.sum_rate],
        1,
        best.evaluations,
    )
}
