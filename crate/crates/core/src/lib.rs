//! Nonparametric Bayesian dose finding for two-agent combination trials.
//!
//! Toxicity probabilities on an I×J dose lattice get independent beta priors
//! truncated to the partial order (toxicity increases in each agent). The
//! posterior is sampled with a Gibbs sampler whose full conditionals are
//! truncated betas; an adaptive cohort design allocates doses from posterior
//! medians and a windowed rule recommends the MTD set at the end.
//!
//! The numerical core is generic over the scalar type (`f32`/`f64` via
//! [`Real`]); the aliases below fix it to `f64`.

pub mod engine;
pub mod error;
pub mod hyperparam;
pub mod lattice;
pub mod recommender;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod special;

pub use engine::{
    advance, final_recommendation, record_outcomes, start_trial, DesignConfig, Direction, EventKind, SafetyScreen,
    TrialEvent, TrialState, TrialStatus,
};
pub use error::{Error, Result};
pub use lattice::{DoseIndex, GridDims};
pub use rng::{StreamKind, TrialSeed};
pub use sampler::{GibbsConfig, ObservedData};
pub use scalar::Real;

pub type ProbGrid = lattice::ProbGrid<f64>;
pub type ShapeGrid = lattice::ShapeGrid<f64>;
pub type ChainSummary = sampler::ChainSummary<f64>;
pub type Posterior = sampler::Posterior<f64>;

pub type ShapeTemplate = hyperparam::ShapeTemplate<f64>;
pub type PriorCriteria = hyperparam::PriorCriteria<f64>;
pub type GridSearchConfig = hyperparam::GridSearchConfig<f64>;
pub type SearchOutcome = hyperparam::SearchOutcome<f64>;
pub type RecommenderConfig = recommender::RecommenderConfig<f64>;
pub type Recommendation = recommender::Recommendation<f64>;

pub type ProbGridF32 = lattice::ProbGrid<f32>;
pub type ShapeGridF32 = lattice::ShapeGrid<f32>;
pub type PosteriorF32 = sampler::Posterior<f32>;
