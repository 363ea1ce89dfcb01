//! Scenario runner, error matching, summaries and on-disk artefacts.

pub mod config;
pub mod emit;
pub mod matching;
pub mod noise;
pub mod scenario;
pub mod summary;
pub mod svg;

pub use config::{ExperimentConfig, InitSpec, NoiseSpec, OffsetUnit, ScenarioKind, StabilitySpec, PRESETS};
pub use emit::{emit, load_trials_csv, read_trials_csv, save_trials_csv, write_trials_csv, Format};
pub use matching::{hungarian, match_errors, model_errors, GroupErrors, Matching};
pub use noise::{gen_noise, snr_db};
pub use scenario::{run_scenario, run_trial, snr_sweep, ScenarioOutput, StabilityCheck, TrialResult};
pub use summary::{BoxStats, Summary};
