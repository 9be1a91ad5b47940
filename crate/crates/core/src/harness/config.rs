//! Experiment configuration.
//!
//! Values are resolved in three layers: a profile supplies defaults, a flat
//! TOML file overrides the profile, and command-line flags override the file.
//! Every key is optional in the file and on the command line; the file keys
//! match the field names of [`ConfigOverrides`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ArrayArchitecture;
use crate::optimizer::{AoConfig, Scheme};
use crate::pso::SwarmConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Full-scale swarms: 300 particles, 200 iterations.
    #[default]
    Table1,
    /// Reduced swarms and trial count for quick runs.
    Desk,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1" => Ok(Profile::Table1),
            "desk" => Ok(Profile::Desk),
            _ => Err(Error::Config(format!(
                "unknown profile `{s}` (expected table1 or desk)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Vary the number of subarrays over `subarray_counts`.
    #[default]
    Subarrays,
    /// Vary the region length over `lengths`.
    Length,
}

impl SweepAxis {
    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::Subarrays => "subarrays",
            SweepAxis::Length => "length",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subarrays" => Ok(SweepAxis::Subarrays),
            "length" => Ok(SweepAxis::Length),
            _ => Err(Error::Config(format!(
                "unknown sweep axis `{s}` (expected subarrays or length)"
            ))),
        }
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub profile: Profile,
    /// Carrier frequency in GHz; recorded only, all lengths are in wavelengths.
    pub carrier_frequency_ghz: f64,
    /// Receive SNR including the average path power, in dB.
    pub snr_db: f64,
    pub region_length: f64,
    pub num_antennas: usize,
    pub num_users: usize,
    pub num_paths: usize,
    /// Subarray count used when sweeping over length.
    pub num_subarrays: usize,
    pub subarray_counts: Vec<usize>,
    pub alphas: Vec<f64>,
    pub lengths: Vec<f64>,
    pub sweep_axis: SweepAxis,
    pub subarray_swarm: SwarmConfig,
    pub antenna_swarm: SwarmConfig,
    pub all_at_once_swarm: SwarmConfig,
    pub ao_max_rounds: usize,
    pub ao_epsilon: f64,
    pub num_trials: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub output: PathBuf,
    /// When set, every trial's scenario is written here as JSON.
    pub scenario_dir: Option<PathBuf>,
}

/// Optional values from a config file or the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub profile: Option<Profile>,
    pub carrier_frequency_ghz: Option<f64>,
    pub snr_db: Option<f64>,
    pub region_length: Option<f64>,
    pub num_antennas: Option<usize>,
    pub num_users: Option<usize>,
    pub num_paths: Option<usize>,
    pub num_subarrays: Option<usize>,
    pub subarray_counts: Option<Vec<usize>>,
    pub alphas: Option<Vec<f64>>,
    pub lengths: Option<Vec<f64>>,
    pub sweep_axis: Option<SweepAxis>,
    pub subarray_particles: Option<usize>,
    pub subarray_iterations: Option<usize>,
    pub antenna_particles: Option<usize>,
    pub antenna_iterations: Option<usize>,
    /// Defaults to one alternating round's budget: the sum of both particle counts.
    pub all_at_once_particles: Option<usize>,
    pub all_at_once_iterations: Option<usize>,
    pub inertia: Option<f64>,
    pub cognitive: Option<f64>,
    pub social: Option<f64>,
    pub penalty: Option<f64>,
    pub velocity_clamp: Option<f64>,
    pub ao_max_rounds: Option<usize>,
    pub ao_epsilon: Option<f64>,
    pub num_trials: Option<usize>,
    pub seed: Option<u64>,
    pub schemes: Option<Vec<Scheme>>,
    pub output: Option<PathBuf>,
    pub scenario_dir: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident, $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl ConfigOverrides {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` win.
    pub fn merged_with(&self, other: &Self) -> Self {
        let mut out = self.clone();
        merge_fields!(
            out, other, profile, carrier_frequency_ghz, snr_db, region_length, num_antennas,
            num_users, num_paths, num_subarrays, subarray_counts, alphas, lengths, sweep_axis,
            subarray_particles, subarray_iterations, antenna_particles, antenna_iterations,
            all_at_once_particles, all_at_once_iterations, inertia, cognitive, social, penalty,
            velocity_clamp, ao_max_rounds, ao_epsilon, num_trials, seed, schemes, output,
            scenario_dir,
        );
        out
    }
}

impl ExperimentConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let (swarm, trials) = match profile {
            Profile::Table1 => (SwarmConfig::default(), 100),
            Profile::Desk => (SwarmConfig::desk(), 50),
        };
        let ao = AoConfig::default();
        Self {
            profile,
            carrier_frequency_ghz: 10.0,
            snr_db: 9.78,
            region_length: 24.0,
            num_antennas: 12,
            num_users: 3,
            num_paths: 3,
            num_subarrays: 4,
            subarray_counts: vec![4],
            alphas: vec![0.375],
            lengths: vec![24.0],
            sweep_axis: SweepAxis::Subarrays,
            subarray_swarm: swarm,
            antenna_swarm: swarm,
            all_at_once_swarm: swarm.with_budget(2 * swarm.num_particles, swarm.num_iterations),
            ao_max_rounds: ao.max_rounds,
            ao_epsilon: ao.epsilon,
            num_trials: trials,
            seed: 1,
            schemes: vec![
                Scheme::SingleLayer,
                Scheme::TwoLayer,
                Scheme::ArrayWise,
                Scheme::FixedPosition,
            ],
            output: PathBuf::from("results.csv"),
            scenario_dir: None,
        }
    }

    /// Applies overrides on top of the profile they select (or the default one).
    pub fn resolve(overrides: &ConfigOverrides) -> Result<Self> {
        let mut c = Self::for_profile(overrides.profile.unwrap_or_default());
        let o = overrides;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &o.$f { c.$f = v.clone(); } )* };
        }
        set!(
            carrier_frequency_ghz, snr_db, region_length, num_antennas, num_users, num_paths,
            num_subarrays, subarray_counts, alphas, lengths, sweep_axis, ao_max_rounds,
            ao_epsilon, num_trials, seed, schemes, output
        );
        if o.scenario_dir.is_some() {
            c.scenario_dir = o.scenario_dir.clone();
        }

        for swarm in [&mut c.subarray_swarm, &mut c.antenna_swarm, &mut c.all_at_once_swarm] {
            if let Some(v) = o.inertia {
                swarm.inertia = v;
            }
            if let Some(v) = o.cognitive {
                swarm.cognitive = v;
            }
            if let Some(v) = o.social {
                swarm.social = v;
            }
            if let Some(v) = o.penalty {
                swarm.penalty_coefficient = v;
            }
            if let Some(v) = o.velocity_clamp {
                swarm.velocity_clamp = v;
            }
        }
        if let Some(v) = o.subarray_particles {
            c.subarray_swarm.num_particles = v;
        }
        if let Some(v) = o.subarray_iterations {
            c.subarray_swarm.num_iterations = v;
        }
        if let Some(v) = o.antenna_particles {
            c.antenna_swarm.num_particles = v;
        }
        if let Some(v) = o.antenna_iterations {
            c.antenna_swarm.num_iterations = v;
        }
        c.all_at_once_swarm.num_particles = o
            .all_at_once_particles
            .unwrap_or(c.subarray_swarm.num_particles + c.antenna_swarm.num_particles);
        c.all_at_once_swarm.num_iterations = o
            .all_at_once_iterations
            .unwrap_or(c.subarray_swarm.num_iterations.max(c.antenna_swarm.num_iterations));

        c.validate()?;
        Ok(c)
    }

    /// Linear SNR `γ` with the average path power folded in.
    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn ao_config(&self) -> AoConfig {
        AoConfig {
            max_rounds: self.ao_max_rounds,
            epsilon: self.ao_epsilon,
            subarray_swarm: self.subarray_swarm,
            antenna_swarm: self.antenna_swarm,
        }
    }

    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        match self.sweep_axis {
            SweepAxis::Subarrays => self
                .subarray_counts
                .iter()
                .map(|&ms| SweepPoint {
                    axis: SweepAxis::Subarrays,
                    value: ms as f64,
                    num_subarrays: ms,
                    region_length: self.region_length,
                })
                .collect(),
            SweepAxis::Length => self
                .lengths
                .iter()
                .map(|&l| SweepPoint {
                    axis: SweepAxis::Length,
                    value: l,
                    num_subarrays: self.num_subarrays,
                    region_length: l,
                })
                .collect(),
        }
    }

    /// Scheme runs per sweep point; alpha-dependent schemes run once per alpha.
    pub fn scheme_runs(&self) -> Vec<SchemeRun> {
        let mut runs = Vec::new();
        for &scheme in &self.schemes {
            if scheme.uses_alpha() {
                for &alpha in &self.alphas {
                    runs.push(SchemeRun::new(scheme, Some(alpha)));
                }
            } else {
                runs.push(SchemeRun::new(scheme, None));
            }
        }
        runs
    }

    /// Geometry for one scheme at one sweep point. Schemes that ignore alpha
    /// use the first configured value.
    pub fn architecture(&self, point: &SweepPoint, run: &SchemeRun) -> Result<ArrayArchitecture> {
        let alpha = run.alpha.unwrap_or(self.alphas[0]);
        let ms = point.num_subarrays;
        ArrayArchitecture::new(ms, self.num_antennas / ms, point.region_length, alpha)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_antennas == 0 || self.num_users == 0 || self.num_paths == 0 {
            return bad("num_antennas, num_users and num_paths must be positive".into());
        }
        if self.num_trials == 0 {
            return bad("num_trials must be positive".into());
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        if self.schemes.is_empty() {
            return bad("schemes must not be empty".into());
        }
        if self.alphas.is_empty() || self.subarray_counts.is_empty() || self.lengths.is_empty() {
            return bad("alphas, subarray_counts and lengths must not be empty".into());
        }
        if !(self.ao_epsilon >= 0.0) || self.ao_max_rounds == 0 {
            return bad("ao_epsilon must be nonnegative and ao_max_rounds positive".into());
        }
        for swarm in [&self.subarray_swarm, &self.antenna_swarm, &self.all_at_once_swarm] {
            swarm.validate().map_err(|e| Error::Config(e.to_string()))?;
        }

        for point in self.sweep_points() {
            let ms = point.num_subarrays;
            if ms == 0 || !self.num_antennas.is_multiple_of(ms) {
                return bad(format!(
                    "{} antennas cannot be split into {ms} equal subarrays",
                    self.num_antennas
                ));
            }
            let min_alpha = ArrayArchitecture::min_alpha(self.num_antennas, point.region_length);
            for &alpha in &self.alphas {
                // Relative slack for decimal inputs such as 0.375 that sit exactly on the bound.
                if !(alpha <= 1.0 && alpha >= min_alpha * (1.0 - 1e-12)) {
                    return bad(format!(
                        "alpha {alpha} outside [{min_alpha}, 1] for region length {}: subarrays \
                         could not host their antennas at half-wavelength spacing",
                        point.region_length
                    ));
                }
            }
            for run in self.scheme_runs() {
                self.architecture(&point, &run)
                    .map_err(|e| Error::Config(format!("{}: {e}", run.label)))?;
            }
        }
        Ok(())
    }
}

/// Loads a config file (if any) and applies command-line overrides on top.
pub fn load_config(path: Option<&Path>, flags: &ConfigOverrides) -> Result<ExperimentConfig> {
    let file = match path {
        Some(p) => ConfigOverrides::from_file(p)?,
        None => ConfigOverrides::default(),
    };
    ExperimentConfig::resolve(&file.merged_with(flags))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub value: f64,
    pub num_subarrays: usize,
    pub region_length: f64,
}

/// One scheme at one alpha, with the label used in output files and seed derivation.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub alpha: Option<f64>,
    pub label: String,
}

impl SchemeRun {
    pub fn new(scheme: Scheme, alpha: Option<f64>) -> Self {
        let label = match alpha {
            Some(a) => format!("{}@{a}", scheme.label()),
            None => scheme.label().to_string(),
        };
        Self {
            scheme,
            alpha,
            label,
        }
    }
}

impl FromStr for SchemeRun {
    type Err = Error;

    /// Parses `scheme` or `scheme@alpha`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('@') {
            Some((name, alpha)) => {
                let alpha: f64 = alpha
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad alpha in `{s}`")))?;
                Ok(Self::new(name.parse()?, Some(alpha)))
            }
            None => Ok(Self::new(s.parse()?, None)),
        }
    }
}
