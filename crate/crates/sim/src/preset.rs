//! Named design configurations for the three built-in studies.

use std::str::FromStr;

use nbcd_core::{DesignConfig, GibbsConfig, GridDims, RecommenderConfig, ShapeGrid};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::scenario::Study;

/// δ for the overtoxic and excess-DLT metrics.
pub const DEFAULT_DELTA: f64 = 0.1;

/// Chain length used for replicated simulation unless overridden.
pub const SIMULATION_CHAIN: GibbsConfig = GibbsConfig { n_samples: 5_000, burn_in: 500, seed: 0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Study1,
    Study2,
    Trial,
}

impl FromStr for PresetName {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "study1" => Ok(Self::Study1),
            "study2" => Ok(Self::Study2),
            "trial" => Ok(Self::Trial),
            _ => Err(SimError::Config(format!("unknown preset {s:?}; expected study1, study2 or trial"))),
        }
    }
}

impl PresetName {
    pub fn study(self) -> Study {
        match self {
            Self::Study1 => Study::Study1,
            Self::Study2 => Study::Study2,
            Self::Trial => Study::Trial,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Study1 => "study1",
            Self::Study2 => "study2",
            Self::Trial => "trial",
        }
    }
}

/// Everything a replicated study needs besides the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: PresetName,
    pub dims: GridDims,
    pub design: DesignConfig,
    pub prior: ShapeGrid,
    pub recommender: RecommenderConfig,
    pub delta: f64,
}

/// `[first, interior…, last]` shape vector.
fn corners(k: usize, first: f64, interior: f64, last: f64) -> Vec<f64> {
    let mut v = vec![interior; k];
    v[0] = first;
    v[k - 1] = last;
    v
}

/// 4×4, θ = 0.2, 50 patients, corner prior medians 0.04 / 0.34.
pub fn study1_prior() -> ShapeGrid {
    ShapeGrid::new(corners(16, 4.52, 0.4, 0.2), corners(16, 0.74, 2.23, 13.77)).expect("static prior")
}

/// 4×5, corner prior medians 0.05 / 0.50; frozen output of the grid search
/// (`nbcd hyperparam --dims 4x5 --target-min 0.05 --target-max 0.5 --ranges wide`).
pub fn study2_prior() -> ShapeGrid {
    ShapeGrid::new(corners(20, STUDY2_PRIOR.0[0], STUDY2_PRIOR.0[1], STUDY2_PRIOR.0[2]), corners(20, STUDY2_PRIOR.1[0], STUDY2_PRIOR.1[1], STUDY2_PRIOR.1[2]))
        .expect("static prior")
}

/// 2×3, corner prior medians 0.05 / 0.30; frozen output of the grid search
/// (`nbcd hyperparam --dims 2x3 --target-min 0.05 --target-max 0.3 --ranges wide`).
pub fn trial_prior() -> ShapeGrid {
    ShapeGrid::new(corners(6, TRIAL_PRIOR.0[0], TRIAL_PRIOR.0[1], TRIAL_PRIOR.0[2]), corners(6, TRIAL_PRIOR.1[0], TRIAL_PRIOR.1[1], TRIAL_PRIOR.1[2]))
        .expect("static prior")
}

// (α first/interior/last, β first/interior/last)
const STUDY2_PRIOR: ([f64; 3], [f64; 3]) = (
    [7.617600506150438, 0.315025197681032, 0.5928201447270329],
    [0.9153532176433318, 2.8352267791292878, 5.707683808893607],
);
const TRIAL_PRIOR: ([f64; 3], [f64; 3]) = (
    [2.373279755486277, 0.13292300056185868, 0.18864721102650764],
    [0.2851802557508968, 1.1963070050567282, 6.728417193278773],
);

pub fn preset(name: PresetName) -> Preset {
    let (dims, design, prior) = match name {
        PresetName::Study1 => (GridDims::new(4, 4), DesignConfig::new(0.2, 50), study1_prior()),
        PresetName::Study2 => {
            (GridDims::new(4, 5), DesignConfig { early_stopping: false, ..DesignConfig::new(0.3, 50) }, study2_prior())
        }
        PresetName::Trial => (GridDims::new(2, 3), DesignConfig::new(0.33, 36), trial_prior()),
    };
    Preset {
        name,
        dims: dims.expect("static dims"),
        design: DesignConfig { gibbs: SIMULATION_CHAIN, ..design },
        prior,
        recommender: RecommenderConfig::default(),
        delta: DEFAULT_DELTA,
    }
}
