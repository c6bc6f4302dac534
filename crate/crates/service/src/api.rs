//! Request and response bodies of the /v1 API.

use nbcd_core::engine::{Allocation, StopCheck};
use nbcd_core::recommender::SelectionPath;
use nbcd_core::{
    DesignConfig, DoseIndex, GibbsConfig, GridDims, RecommenderConfig, SafetyScreen, ShapeGrid, TrialEvent, TrialStatus,
};
use nbcd_sim::{preset, PresetName};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, FieldError};

/// Design settings; anything left out comes from the preset (or the
/// built-in defaults when no preset is named).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignInput {
    pub theta: Option<f64>,
    pub n_max: Option<u32>,
    pub first_cohort_size: Option<u32>,
    pub second_cohort_size: Option<u32>,
    pub later_cohort_size: Option<u32>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub rho: Option<f64>,
    pub early_stopping: Option<bool>,
    pub screen_ratio: Option<f64>,
    pub safety_screen: Option<SafetyScreen>,
    pub n_samples: Option<usize>,
    pub burn_in: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorInput {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateTrialRequest {
    pub preset: Option<PresetName>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    #[serde(default)]
    pub design: DesignInput,
    pub prior: Option<PriorInput>,
    pub recommender: Option<RecommenderConfig>,
    /// Seed of every random stream of the trial; drawn at random if absent.
    pub seed: Option<u64>,
    pub label: Option<String>,
}

/// Fully resolved trial definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDefinition {
    pub dims: GridDims,
    pub design: DesignConfig,
    pub prior: ShapeGrid,
    pub recommender: RecommenderConfig,
}

fn push(errors: &mut Vec<FieldError>, field: &str, message: impl Into<String>) {
    errors.push(FieldError { field: field.into(), message: message.into() });
}

impl CreateTrialRequest {
    /// Merges the request over its preset and checks every field.
    pub fn resolve(&self, default_gibbs: GibbsConfig) -> Result<TrialDefinition, ApiError> {
        let mut errors = Vec::new();
        let base = self.preset.map(preset);
        let d = &self.design;

        let dims = match (base.as_ref().map(|p| p.dims), self.rows, self.cols) {
            (Some(pd), r, c) => {
                if r.is_some_and(|r| r != pd.rows()) || c.is_some_and(|c| c != pd.cols()) {
                    push(&mut errors, "rows", format!("preset lattice is {pd}"));
                }
                Some(pd)
            }
            (None, Some(r), Some(c)) => match GridDims::new(r, c) {
                Ok(g) => Some(g),
                Err(e) => {
                    push(&mut errors, "rows", e.to_string());
                    None
                }
            },
            (None, _, _) => {
                push(&mut errors, "rows", "rows and cols are required without a preset");
                None
            }
        };

        let mut design = match &base {
            Some(p) => DesignConfig { gibbs: default_gibbs, ..p.design.clone() },
            None => {
                if d.theta.is_none() {
                    push(&mut errors, "design.theta", "required without a preset");
                }
                if d.n_max.is_none() {
                    push(&mut errors, "design.n_max", "required without a preset");
                }
                DesignConfig { gibbs: default_gibbs, ..DesignConfig::new(0.25, 30) }
            }
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = d.$f { design.$f = v; } )* };
        }
        set!(theta, n_max, first_cohort_size, second_cohort_size, later_cohort_size, gamma, epsilon, rho, early_stopping, screen_ratio, safety_screen);
        if let Some(v) = d.n_samples {
            design.gibbs.n_samples = v;
        }
        if let Some(v) = d.burn_in {
            design.gibbs.burn_in = v;
        }

        let unit_open = |x: f64| x > 0.0 && x < 1.0;
        if !unit_open(design.theta) {
            push(&mut errors, "design.theta", format!("must lie in (0, 1), got {}", design.theta));
        }
        if !(design.epsilon > 0.0 && design.epsilon <= 1.0) {
            push(&mut errors, "design.epsilon", format!("must lie in (0, 1], got {}", design.epsilon));
        }
        for (field, v) in [("design.gamma", design.gamma), ("design.rho", design.rho)] {
            if !(v >= 0.0 && v.is_finite()) {
                push(&mut errors, field, format!("must be non-negative, got {v}"));
            }
        }
        if !(design.screen_ratio > 0.0 && design.screen_ratio.is_finite()) {
            push(&mut errors, "design.screen_ratio", "must be positive");
        }
        if design.first_cohort_size == 0 {
            push(&mut errors, "design.first_cohort_size", "must be at least 1");
        }
        for (field, v) in [
            ("design.second_cohort_size", design.second_cohort_size),
            ("design.later_cohort_size", design.later_cohort_size),
        ] {
            if v == 0 || v % 2 != 0 {
                push(&mut errors, field, format!("must be a positive even number, got {v}"));
            }
        }
        if design.n_max < design.first_cohort_size + design.second_cohort_size {
            push(&mut errors, "design.n_max", "must cover at least the first two cohorts");
        }
        if design.gibbs.n_samples == 0 {
            push(&mut errors, "design.n_samples", "must be at least 1");
        }

        let prior = match (&self.prior, &base) {
            (Some(p), _) => Some(ShapeGrid { alpha: p.alpha.clone(), beta: p.beta.clone() }),
            (None, Some(b)) => Some(b.prior.clone()),
            (None, None) => {
                push(&mut errors, "prior", "required without a preset");
                None
            }
        };
        if let (Some(p), Some(dims)) = (&prior, dims) {
            for (field, v) in [("prior.alpha", &p.alpha), ("prior.beta", &p.beta)] {
                if v.len() != dims.len() {
                    push(&mut errors, field, format!("expected {} values for a {dims} lattice, got {}", dims.len(), v.len()));
                } else if let Some(x) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                    push(&mut errors, field, format!("shape parameters must be positive and finite, got {x}"));
                }
            }
        }

        let recommender = self.recommender.unwrap_or_default();
        if let Err(e) = recommender.validate() {
            push(&mut errors, "recommender", e.to_string());
        }

        match (errors.is_empty(), dims, prior) {
            (true, Some(dims), Some(prior)) => {
                // backstop for anything the field checks missed
                design.validate().map_err(|e| ApiError::invalid("design", e.to_string()))?;
                Ok(TrialDefinition { dims, design, prior, recommender })
            }
            _ => Err(ApiError::Invalid(errors)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoseOutcome {
    pub i: usize,
    pub j: usize,
    pub dlt: bool,
}

impl DoseOutcome {
    pub fn dose(&self) -> DoseIndex {
        DoseIndex::new(self.i, self.j)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortRequest {
    pub outcomes: Vec<DoseOutcome>,
}

/// Trial metadata and engine state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialView {
    pub trial_id: String,
    pub label: Option<String>,
    pub created_at: String,
    pub updated_at: String,
    pub version: u64,
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub design: DesignConfig,
    pub prior: ShapeGrid,
    pub recommender: RecommenderConfig,
    pub status: TrialStatus,
    pub cohort: u32,
    pub enrolled: u32,
    pub allocated: u32,
    pub pending: Vec<Allocation>,
    /// Patients and DLTs per dose, rows of the lattice.
    pub patients: Vec<Vec<u32>>,
    pub dlts: Vec<Vec<u32>>,
    pub last_stop_check: Option<StopCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial_id: String,
    pub label: Option<String>,
    pub status: TrialStatus,
    pub enrolled: u32,
    pub updated_at: String,
}

/// State of the chain behind a posterior payload. Chains run inside the
/// request, so a delivered payload is always complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainProgress {
    pub status: String,
    pub n_samples: usize,
    pub burn_in: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorView {
    pub version: u64,
    /// Cohorts of data behind the chain (0: prior only).
    pub cohorts_observed: u32,
    /// Likelihood weight; null for the prior.
    pub omega: Option<f64>,
    pub samples_kept: usize,
    pub median: Vec<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
    pub lower_95: Vec<Vec<f64>>,
    pub upper_95: Vec<Vec<f64>>,
    /// Posterior probability that the lowest dose exceeds θ + γ.
    pub tail_probability: f64,
    pub tail_threshold: f64,
    pub hypothetical: bool,
    pub chain: ChainProgress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationView {
    pub version: u64,
    /// True once the trial has terminated.
    #[serde(rename = "final")]
    pub is_final: bool,
    pub status: TrialStatus,
    pub doses: Vec<DoseIndex>,
    pub toxic: bool,
    pub lower_margin: f64,
    pub upper_margin: f64,
    pub iterations: usize,
    pub window: Vec<DoseIndex>,
    pub path: SelectionPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortResponse {
    pub trial_id: String,
    pub version: u64,
    pub status: TrialStatus,
    pub stop_check: Option<StopCheck>,
    pub posterior: PosteriorView,
    /// Doses for the next cohort; empty once the trial ends.
    pub next_allocation: Vec<Allocation>,
    /// Present once the trial has terminated.
    pub recommendation: Option<RecommendationView>,
    pub hypothetical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateResponse {
    pub trial: TrialView,
    /// Allocation of the first cohort.
    pub allocation: Vec<Allocation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsView {
    pub trial_id: String,
    pub version: u64,
    pub events: Vec<TrialEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetView {
    pub name: PresetName,
    pub rows: usize,
    pub cols: usize,
    pub design: DesignConfig,
    pub prior: ShapeGrid,
    pub recommender: RecommenderConfig,
}

/// Splits a raster-ordered vector into lattice rows.
pub fn rows_of<T: Clone>(v: &[T], dims: GridDims) -> Vec<Vec<T>> {
    v.chunks(dims.cols()).map(<[T]>::to_vec).collect()
}
