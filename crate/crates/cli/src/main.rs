use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tlma_core::harness::{
    load_config, read_scenario, replay, run_scheme, run_sweep, sample_trial_scenario,
    ConfigOverrides, ExperimentConfig, Profile, SchemeRun, SweepAxis, SweepPoint,
};
use tlma_core::{SchemeResult, Scheme};

#[derive(Parser)]
#[command(name = "tlma", version, about = "Two-layer movable-antenna uplink experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo sweep over schemes and sweep points; writes detail and aggregate CSV.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Rerun one scheme on a stored scenario file.
    Replay {
        /// Scenario JSON written by `sweep --scenario-dir`.
        scenario: PathBuf,
        /// Scheme label, e.g. `tl-ma@0.375` or `fpa`.
        #[arg(long)]
        run: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run one scheme on one sampled scenario and print the result as JSON.
    Single {
        /// Scheme label, e.g. `tl-ma@0.375` or `fpa`.
        #[arg(long)]
        run: String,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Flags mirror the config file keys; flags win over the file.
#[derive(Args)]
struct CommonArgs {
    /// Flat TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
    #[arg(long)]
    seed: Option<u64>,
    /// Detail CSV path; the aggregate file is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    carrier_frequency_ghz: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    snr_db: Option<f64>,
    #[arg(long)]
    region_length: Option<f64>,
    #[arg(long)]
    num_antennas: Option<usize>,
    #[arg(long)]
    num_users: Option<usize>,
    #[arg(long)]
    num_paths: Option<usize>,
    #[arg(long)]
    num_subarrays: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    subarray_counts: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_axis)]
    sweep_axis: Option<SweepAxis>,
    #[arg(long)]
    subarray_particles: Option<usize>,
    #[arg(long)]
    subarray_iterations: Option<usize>,
    #[arg(long)]
    antenna_particles: Option<usize>,
    #[arg(long)]
    antenna_iterations: Option<usize>,
    #[arg(long)]
    all_at_once_particles: Option<usize>,
    #[arg(long)]
    all_at_once_iterations: Option<usize>,
    #[arg(long)]
    inertia: Option<f64>,
    #[arg(long)]
    cognitive: Option<f64>,
    #[arg(long)]
    social: Option<f64>,
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    velocity_clamp: Option<f64>,
    #[arg(long)]
    ao_max_rounds: Option<usize>,
    #[arg(long)]
    ao_epsilon: Option<f64>,
    #[arg(long)]
    num_trials: Option<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    schemes: Option<Vec<Scheme>>,
    /// Also store each trial's scenario as JSON in this directory.
    #[arg(long)]
    scenario_dir: Option<PathBuf>,
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse().map_err(|e: tlma_core::Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: tlma_core::Error| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: tlma_core::Error| e.to_string())
}

impl CommonArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            profile: self.profile,
            carrier_frequency_ghz: self.carrier_frequency_ghz,
            snr_db: self.snr_db,
            region_length: self.region_length,
            num_antennas: self.num_antennas,
            num_users: self.num_users,
            num_paths: self.num_paths,
            num_subarrays: self.num_subarrays,
            subarray_counts: self.subarray_counts.clone(),
            alphas: self.alphas.clone(),
            lengths: self.lengths.clone(),
            sweep_axis: self.sweep_axis,
            subarray_particles: self.subarray_particles,
            subarray_iterations: self.subarray_iterations,
            antenna_particles: self.antenna_particles,
            antenna_iterations: self.antenna_iterations,
            all_at_once_particles: self.all_at_once_particles,
            all_at_once_iterations: self.all_at_once_iterations,
            inertia: self.inertia,
            cognitive: self.cognitive,
            social: self.social,
            penalty: self.penalty,
            velocity_clamp: self.velocity_clamp,
            ao_max_rounds: self.ao_max_rounds,
            ao_epsilon: self.ao_epsilon,
            num_trials: self.num_trials,
            seed: self.seed,
            schemes: self.schemes.clone(),
            output: self.out.clone(),
            scenario_dir: self.scenario_dir.clone(),
        }
    }

    fn resolve(&self) -> Result<ExperimentConfig> {
        Ok(load_config(self.config.as_deref(), &self.overrides())?)
    }
}

/// The single point a `replay` or `single` run uses: the first configured one.
fn first_point(config: &ExperimentConfig) -> Result<SweepPoint> {
    match config.sweep_points().into_iter().next() {
        Some(p) => Ok(p),
        None => bail!("config has no sweep points"),
    }
}

fn parse_run(label: &str, config: &ExperimentConfig) -> Result<SchemeRun> {
    let run: SchemeRun = label.parse()?;
    if run.scheme.uses_alpha() && run.alpha.is_none() {
        return Ok(SchemeRun::new(run.scheme, Some(config.alphas[0])));
    }
    Ok(run)
}

fn result_json(run: &SchemeRun, result: &SchemeResult) -> serde_json::Value {
    json!({
        "scheme": run.label,
        "sum_rate_bps_hz": result.sum_rate,
        "C_S_wavelengths": result.subarray_displacement,
        "C_A_wavelengths": result.antenna_displacement,
        "ao_rounds": result.rounds,
        "evaluations": result.evaluations,
        "rate_trace": result.rate_trace,
        "layout": result.layout,
        "positions": result.positions,
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sweep { common } => {
            let config = common.resolve()?;
            let outcome = run_sweep(&config)?;
            let failed = outcome.rows.iter().filter(|r| !r.is_ok()).count();
            eprintln!(
                "wrote {} rows to {} ({failed} failed)",
                outcome.rows.len(),
                config.output.display()
            );
            for a in &outcome.aggregates {
                eprintln!(
                    "{}={} {:<16} rate {:.4} ± {:.4}  displacement {:.3}",
                    a.sweep_axis,
                    a.sweep_value,
                    a.scheme,
                    a.mean_sum_rate.unwrap_or(f64::NAN),
                    a.se_sum_rate.unwrap_or(f64::NAN),
                    a.mean_total_displacement.unwrap_or(f64::NAN),
                );
            }
        }
        Command::Replay {
            scenario,
            run,
            common,
        } => {
            let config = common.resolve()?;
            let record = read_scenario(&scenario)
                .with_context(|| format!("reading {}", scenario.display()))?;
            let run = parse_run(&run, &config)?;
            let result = replay(&record, &run, &first_point(&config)?, &config)?;
            println!("{}", serde_json::to_string_pretty(&result_json(&run, &result))?);
        }
        Command::Single { run, trial, common } => {
            let config = common.resolve()?;
            let run = parse_run(&run, &config)?;
            let scenario = sample_trial_scenario(&config, trial)?;
            let result = run_scheme(&config, &scenario, &first_point(&config)?, &run, trial)?;
            println!("{}", serde_json::to_string_pretty(&result_json(&run, &result))?);
        }
    }
    Ok(())
}
