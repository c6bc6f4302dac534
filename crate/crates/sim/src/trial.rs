//! One simulated trial against a known truth.

use nbcd_core::{
    advance, final_recommendation, record_outcomes, start_trial, DesignConfig, DoseIndex, RecommenderConfig, ShapeGrid,
    StreamKind, TrialSeed, TrialStatus,
};
use nbcd_core::recommender::SelectionPath;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub recommended: Vec<DoseIndex>,
    /// Patients per dose, raster order.
    pub allocation: Vec<u32>,
    pub dlts: Vec<u32>,
    pub dlt_total: u32,
    pub enrolled: u32,
    pub stopped_early: bool,
    /// How the final window rule ended (also computed for stopped trials).
    pub path: SelectionPath,
    pub seed: TrialSeed,
}

/// Runs the design to termination, drawing each patient's DLT from the
/// scenario truth. Outcomes of cohort c come from stream (c, Outcomes).
pub fn simulate_trial(
    scenario: &Scenario,
    cfg: &DesignConfig,
    prior: &ShapeGrid,
    rec_cfg: &RecommenderConfig,
    seed: TrialSeed,
) -> Result<TrialResult> {
    let dims = scenario.dims;
    if prior.len() != dims.len() {
        return Err(SimError::Config(format!(
            "prior has {} doses but scenario {} is {dims}",
            prior.len(),
            scenario.name
        )));
    }
    let mut state = start_trial(cfg, prior, dims)?;
    loop {
        let mut rng = seed.stream(state.cohort_index, StreamKind::Outcomes);
        let outcomes: Vec<(DoseIndex, bool)> = state
            .pending_doses()
            .into_iter()
            .map(|d| (d, rng.random_bool(scenario.at(d.i, d.j))))
            .collect();
        record_outcomes(&mut state, &outcomes)?;
        let step = advance(&mut state, cfg, prior, seed)?;
        if step.status.is_terminal() {
            let rec = final_recommendation(&state, &step.posterior, cfg.theta, rec_cfg)?;
            return Ok(TrialResult {
                recommended: rec.doses,
                allocation: state.data.n.clone(),
                dlts: state.data.z.clone(),
                dlt_total: state.data.total_dlts(),
                enrolled: state.enrolled,
                stopped_early: state.status == TrialStatus::StoppedForToxicity,
                path: rec.path,
                seed,
            });
        }
    }
}
