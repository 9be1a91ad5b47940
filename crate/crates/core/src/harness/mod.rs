//! Seeded Monte-Carlo experiment runner.

mod config;
mod replay;
mod seed;
mod sweep;

pub use config::{
    load_config, ConfigOverrides, ExperimentConfig, Profile, SchemeRun, SweepAxis, SweepPoint,
};
pub use replay::{read_scenario, replay, write_scenario, ScenarioRecord, SCENARIO_SCHEMA_VERSION};
pub use seed::{scenario_stream, scheme_stream, seed_derivation, trial_stream, SCENARIO_LABEL};
pub use sweep::{
    aggregate, aggregate_path, execute_sweep, read_detail_csv, run_scheme, run_sweep,
    sample_trial_scenario, write_aggregate_csv, write_detail_csv, AggregateRow, DetailRow,
    SweepOutcome, DETAIL_SCHEMA, AGGREGATE_SCHEMA, STATUS_OK,
};
