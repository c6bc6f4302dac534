//! Simulation harness: built-in scenarios, study presets, replicated
//! trials and their operating characteristics.

pub mod error;
pub mod metrics;
pub mod preset;
pub mod report;
pub mod scenario;
pub mod study;
pub mod trial;

pub use error::{Result, SimError};
pub use metrics::{aggregate, classify_dose, is_overtoxic, Category, OperatingCharacteristics};
pub use preset::{preset, Preset, PresetName, DEFAULT_DELTA, SIMULATION_CHAIN};
pub use scenario::{builtin_scenarios, find_scenario, study_of, study_scenarios, Scenario, ScenarioFile, Study};
pub use study::{run_study, ScenarioReport, StudyReport, StudySpec};
pub use trial::{simulate_trial, TrialResult};
