use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SchemeRun, SweepPoint};
use super::replay::{write_scenario, ScenarioRecord};
use super::seed::{scenario_stream, scheme_stream, trial_stream};
use crate::channel::{sample_scenario, Scenario};
use crate::error::Result;
use crate::optimizer::{
    all_at_once_optimize, ao_optimize, array_wise_optimize, fpa_layout, sl_ma_optimize, Scheme,
    SchemeResult,
};

/// First line of every detail file.
pub const DETAIL_SCHEMA: &str = "# tlma detail v1";
/// First line of every aggregate file.
pub const AGGREGATE_SCHEMA: &str = "# tlma aggregate v1";
pub const STATUS_OK: &str = "ok";

/// One scheme run on one trial at one sweep point. Numeric fields are empty
/// when the run failed; `status` then carries the error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailRow {
    pub sweep_axis: String,
    pub sweep_value: f64,
    pub trial: u64,
    pub scheme: String,
    pub seed: u64,
    pub sum_rate_bps_hz: Option<f64>,
    #[serde(rename = "C_S_wavelengths")]
    pub subarray_displacement: Option<f64>,
    #[serde(rename = "C_A_wavelengths")]
    pub antenna_displacement: Option<f64>,
    pub ao_rounds: Option<usize>,
    pub evaluations: Option<usize>,
    pub status: String,
}

impl DetailRow {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }

    pub fn total_displacement(&self) -> Option<f64> {
        Some(self.subarray_displacement? + self.antenna_displacement?)
    }
}

/// Mean and standard error over the successful trials of one scheme at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub sweep_axis: String,
    pub sweep_value: f64,
    pub scheme: String,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub mean_sum_rate: Option<f64>,
    pub se_sum_rate: Option<f64>,
    #[serde(rename = "mean_C_S")]
    pub mean_subarray_displacement: Option<f64>,
    #[serde(rename = "mean_C_A")]
    pub mean_antenna_displacement: Option<f64>,
    pub mean_total_displacement: Option<f64>,
    pub se_total_displacement: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Ordered by sweep point, then trial, then scheme run.
    pub rows: Vec<DetailRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl SweepOutcome {
    pub fn aggregate_for(&self, sweep_value: f64, scheme: &str) -> Option<&AggregateRow> {
        self.aggregates
            .iter()
            .find(|a| a.sweep_value == sweep_value && a.scheme == scheme)
    }
}

/// The scenario every scheme sees in trial `trial`.
pub fn sample_trial_scenario(config: &ExperimentConfig, trial: u64) -> Result<Scenario> {
    let mut rng = scenario_stream(config.seed, trial).rng();
    sample_scenario(
        config.num_users,
        config.num_paths,
        1.0,
        config.snr_linear(),
        &mut rng,
    )
}

/// Runs one scheme on one scenario with the streams of trial `trial`.
pub fn run_scheme(
    config: &ExperimentConfig,
    scenario: &Scenario,
    point: &SweepPoint,
    run: &SchemeRun,
    trial: u64,
) -> Result<SchemeResult> {
    let arch = config.architecture(point, run)?;
    let stream = scheme_stream(config.seed, trial, &run.label);
    match run.scheme {
        Scheme::TwoLayer => ao_optimize(scenario, &arch, &config.ao_config(), &stream),
        Scheme::SingleLayer => {
            sl_ma_optimize(scenario, &arch, &config.subarray_swarm, &stream.child(0))
        }
        Scheme::ArrayWise => {
            array_wise_optimize(scenario, &arch, &config.subarray_swarm, &stream.child(0))
        }
        Scheme::FixedPosition => fpa_layout(scenario, &arch),
        Scheme::AllAtOnce => {
            all_at_once_optimize(scenario, &arch, &config.all_at_once_swarm, &stream.child(0))
        }
    }
}

fn detail_row(
    point: &SweepPoint,
    run: &SchemeRun,
    trial: u64,
    seed: u64,
    result: Result<SchemeResult>,
) -> DetailRow {
    let mut row = DetailRow {
        sweep_axis: point.axis.label().to_string(),
        sweep_value: point.value,
        trial,
        scheme: run.label.clone(),
        seed,
        sum_rate_bps_hz: None,
        subarray_displacement: None,
        antenna_displacement: None,
        ao_rounds: None,
        evaluations: None,
        status: STATUS_OK.to_string(),
    };
    match result {
        Ok(r) => {
            row.sum_rate_bps_hz = Some(r.sum_rate);
            row.subarray_displacement = Some(r.subarray_displacement);
            row.antenna_displacement = Some(r.antenna_displacement);
            row.ao_rounds = Some(r.rounds);
            row.evaluations = Some(r.evaluations);
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

/// Runs every trial in memory. Trials run in parallel; rows come back in a
/// fixed order independent of scheduling. Failed runs become error rows.
pub fn execute_sweep(config: &ExperimentConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let points = config.sweep_points();
    let runs = config.scheme_runs();

    // per_trial[t][p][r]
    let per_trial: Vec<Vec<Vec<DetailRow>>> = (0..config.num_trials as u64)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_stream(config.seed, trial).summary();
            let scenario = sample_trial_scenario(config, trial);
            if let (Ok(s), Some(dir)) = (&scenario, &config.scenario_dir) {
                let record = ScenarioRecord::new(config.seed, trial, s.clone());
                // A failed write is reported on every row of this trial.
                if let Err(e) = write_scenario(&dir.join(format!("trial_{trial}.json")), &record) {
                    return points
                        .iter()
                        .map(|p| {
                            runs.iter()
                                .map(|r| detail_row(p, r, trial, seed, Err(clone_err(&e))))
                                .collect()
                        })
                        .collect();
                }
            }
            points
                .iter()
                .map(|p| {
                    runs.iter()
                        .map(|r| {
                            let result = match &scenario {
                                Ok(s) => run_scheme(config, s, p, r, trial),
                                Err(e) => Err(clone_err(e)),
                            };
                            detail_row(p, r, trial, seed, result)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(points.len() * config.num_trials * runs.len());
    for p in 0..points.len() {
        for trial in &per_trial {
            rows.extend(trial[p].iter().cloned());
        }
    }
    let aggregates = aggregate(&rows);
    Ok(SweepOutcome { rows, aggregates })
}

fn clone_err(e: &crate::Error) -> crate::Error {
    crate::Error::InvalidArgument(e.to_string())
}

/// Runs the sweep and writes the detail file to `config.output` and the
/// aggregate file next to it (see [`aggregate_path`]).
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutcome> {
    if let Some(dir) = &config.scenario_dir {
        std::fs::create_dir_all(dir)?;
    }
    let outcome = execute_sweep(config)?;
    if let Some(parent) = config.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_detail_csv(&outcome.rows, BufWriter::new(File::create(&config.output)?))?;
    write_aggregate_csv(
        &outcome.aggregates,
        BufWriter::new(File::create(aggregate_path(&config.output))?),
    )?;
    Ok(outcome)
}

/// `results.csv` → `results_aggregate.csv`.
pub fn aggregate_path(detail: &Path) -> PathBuf {
    let stem = detail
        .file_stem()
        .map_or_else(|| "results".into(), |s| s.to_string_lossy().into_owned());
    let ext = detail
        .extension()
        .map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
    detail.with_file_name(format!("{stem}_aggregate.{ext}"))
}

fn write_rows<W: Write, T: Serialize>(schema: &str, rows: &[T], mut writer: W) -> Result<()> {
    writeln!(writer, "{schema}")?;
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_detail_csv<W: Write>(rows: &[DetailRow], writer: W) -> Result<()> {
    write_rows(DETAIL_SCHEMA, rows, writer)
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], writer: W) -> Result<()> {
    write_rows(AGGREGATE_SCHEMA, rows, writer)
}

pub fn read_detail_csv<R: Read>(reader: R) -> Result<Vec<DetailRow>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn mean_se(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = xs.len();
    if n == 0 {
        return (None, None);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

/// Mean and standard error per (sweep point, scheme), in first-seen order.
pub fn aggregate(rows: &[DetailRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(String, f64, String)> = Vec::new();
    for r in rows {
        let key = (r.sweep_axis.clone(), r.sweep_value, r.scheme.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(axis, value, scheme)| {
            let group: Vec<&DetailRow> = rows
                .iter()
                .filter(|r| r.sweep_axis == axis && r.sweep_value == value && r.scheme == scheme)
                .collect();
            let ok: Vec<&DetailRow> = group.iter().copied().filter(|r| r.is_ok()).collect();
            let collect = |f: fn(&DetailRow) -> Option<f64>| -> Vec<f64> {
                ok.iter().filter_map(|r| f(r)).collect()
            };
            let (mean_rate, se_rate) = mean_se(&collect(|r| r.sum_rate_bps_hz));
            let (mean_total, se_total) = mean_se(&collect(DetailRow::total_displacement));
            AggregateRow {
                sweep_axis: axis,
                sweep_value: value,
                scheme,
                trials_ok: ok.len(),
                trials_failed: group.len() - ok.len(),
                mean_sum_rate: mean_rate,
                se_sum_rate: se_rate,
                mean_subarray_displacement: mean_se(&collect(|r| r.subarray_displacement)).0,
                mean_antenna_displacement: mean_se(&collect(|r| r.antenna_displacement)).0,
                mean_total_displacement: mean_total,
                se_total_displacement: se_total,
            }
        })
        .collect()
}
