use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SchemeRun, SweepPoint};
use super::sweep::run_scheme;
use crate::channel::Scenario;
use crate::error::{Error, Result};
use crate::optimizer::SchemeResult;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// A stored scenario together with the seed coordinates it was drawn under,
/// enough to rerun any scheme on it with the original streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub schema_version: u32,
    pub master_seed: u64,
    pub trial: u64,
    pub scenario: Scenario,
}

impl ScenarioRecord {
    pub fn new(master_seed: u64, trial: u64, scenario: Scenario) -> Self {
        Self {
            schema_version: SCENARIO_SCHEMA_VERSION,
            master_seed,
            trial,
            scenario,
        }
    }
}

pub fn write_scenario(path: &Path, record: &ScenarioRecord) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, record)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_scenario(path: &Path) -> Result<ScenarioRecord> {
    let record: ScenarioRecord = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if record.schema_version != SCENARIO_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            expected: SCENARIO_SCHEMA_VERSION,
            found: record.schema_version,
        });
    }
    record.scenario.validate()?;
    Ok(record)
}

/// Reruns one scheme on a stored scenario. The record's master seed and trial
/// select the streams, so the result matches the original sweep row.
pub fn replay(
    record: &ScenarioRecord,
    run: &SchemeRun,
    point: &SweepPoint,
    config: &ExperimentConfig,
) -> Result<SchemeResult> {
    if record.schema_version != SCENARIO_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            expected: SCENARIO_SCHEMA_VERSION,
            found: record.schema_version,
        });
    }
    let s = &record.scenario;
    s.validate()?;
    if s.num_users != config.num_users || s.num_paths != config.num_paths {
        return Err(Error::Config(format!(
            "scenario has {} users and {} paths but the config expects {} and {}",
            s.num_users, s.num_paths, config.num_users, config.num_paths
        )));
    }
    let config = ExperimentConfig {
        seed: record.master_seed,
        ..config.clone()
    };
    run_scheme(&config, s, point, run, record.trial)
}
