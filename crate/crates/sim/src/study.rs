//! Replicated studies over a bounded worker pool.

use nbcd_core::TrialSeed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::metrics::{aggregate, OperatingCharacteristics};
use crate::preset::Preset;
use crate::scenario::Scenario;
use crate::trial::{simulate_trial, TrialResult};

#[derive(Debug, Clone)]
pub struct StudySpec {
    pub preset: Preset,
    pub scenarios: Vec<Scenario>,
    pub replicates: usize,
    pub master_seed: u64,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub design: String,
    pub oc: OperatingCharacteristics,
}

/// Machine-readable study output. Deliberately excludes the worker count
/// and timing so that it is a pure function of the spec and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub preset: Preset,
    pub replicates: usize,
    pub master_seed: u64,
    pub scenarios: Vec<ScenarioReport>,
}

/// Replicate `r` of every scenario uses `TrialSeed::new(master_seed, r)`.
pub fn replicate_trials(spec: &StudySpec, scenario: &Scenario, pool: &rayon::ThreadPool) -> Result<Vec<TrialResult>> {
    let p = &spec.preset;
    // the scenario's own target drives the design
    let design = nbcd_core::DesignConfig { theta: scenario.theta, ..p.design.clone() };
    pool.install(|| {
        (0..spec.replicates)
            .into_par_iter()
            .map(|r| simulate_trial(scenario, &design, &p.prior, &p.recommender, TrialSeed::new(spec.master_seed, r as u64)))
            .collect()
    })
}

pub fn run_study(spec: &StudySpec) -> Result<StudyReport> {
    if spec.replicates == 0 {
        return Err(SimError::Config("replicates must be at least 1".into()));
    }
    if spec.workers == 0 {
        return Err(SimError::Config("workers must be at least 1".into()));
    }
    if spec.scenarios.is_empty() {
        return Err(SimError::Config("no scenarios selected".into()));
    }
    spec.preset.design.validate()?;
    for s in &spec.scenarios {
        if s.dims != spec.preset.dims {
            return Err(SimError::Config(format!(
                "scenario {} is {} but preset {} is {}",
                s.name,
                s.dims,
                spec.preset.name.as_str(),
                spec.preset.dims
            )));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.workers).build()?;
    let mut scenarios = Vec::with_capacity(spec.scenarios.len());
    for s in &spec.scenarios {
        let results = replicate_trials(spec, s, &pool)?;
        let oc = aggregate(&results, s, spec.preset.delta)?;
        scenarios.push(ScenarioReport { scenario: s.clone(), design: "NBCD".into(), oc });
    }
    Ok(StudyReport { preset: spec.preset.clone(), replicates: spec.replicates, master_seed: spec.master_seed, scenarios })
}
