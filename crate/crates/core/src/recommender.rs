//! End-of-trial MTD(δ) recommendation.
//!
//! A window `[θ − l, θ + u]` around the target is widened step by step
//! until it captures at least one posterior median or both margins exhaust
//! their budgets. The upper margin grows more slowly when the posterior
//! says most doses are too toxic. Only doses that were actually given are
//! recommended, preferring those given to more than one patient.
//!
//! Needs only ordered field arithmetic, so it runs on floats and on exact
//! rationals alike.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::lattice::{DoseIndex, GridDims};
use crate::sampler::ObservedData;

/// Scalar for the recommender: an ordered field.
pub trait Field: Num + FromPrimitive + Copy + PartialOrd + Debug {}
impl<T: Num + FromPrimitive + Copy + PartialOrd + Debug> Field for T {}

fn ratio<T: Field>(num: u32, den: u32) -> T {
    T::from_u32(num).expect("small integer") / T::from_u32(den).expect("small integer")
}

/// Window parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecommenderConfig<T = f64> {
    pub delta_l: T,
    pub delta_u: T,
    pub l0: T,
    pub u0: T,
    pub gamma_l: T,
    pub gamma_u: T,
    /// Upper-margin step when the toxic flag is set.
    pub eta_u: T,
}

impl<T: Field> Default for RecommenderConfig<T> {
    fn default() -> Self {
        let delta_l: T = ratio(1, 10);
        let delta_u: T = ratio(1, 20);
        let two: T = ratio(2, 1);
        Self {
            delta_l,
            delta_u,
            l0: ratio(1, 20),
            u0: T::zero(),
            gamma_l: delta_l / two,
            gamma_u: delta_u / two,
            eta_u: delta_u / ratio(5, 1),
        }
    }
}

impl<T: Field> RecommenderConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        let all = [self.delta_l, self.delta_u, self.l0, self.u0, self.gamma_l, self.gamma_u, self.eta_u];
        if all.iter().any(|x| !(*x >= z)) {
            return domain(format!("recommender parameters must be non-negative: {self:?}"));
        }
        if self.delta_u > self.delta_l {
            return domain("delta_u must not exceed delta_l");
        }
        // with a zero step a margin under budget never grows and the loop would not end
        if (self.l0 <= self.delta_l && self.gamma_l == z) || (self.u0 <= self.delta_u && (self.gamma_u == z || self.eta_u == z)) {
            return domain("window steps must be positive while a margin is within budget");
        }
        Ok(())
    }
}

/// Which rule produced the recommended set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPath {
    /// Window doses given to more than one patient.
    Experimented,
    /// None of those; window doses given to exactly one patient.
    ExperimentedOnce,
    /// The window caught only untried doses.
    Untried,
    /// The window never caught any dose.
    EmptyWindow,
}

/// Recommended doses plus how they were found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation<T = f64> {
    /// In raster order; empty means no recommendation.
    pub doses: Vec<DoseIndex>,
    pub toxic: bool,
    /// Margins of the last window evaluated.
    pub lower_margin: T,
    pub upper_margin: T,
    pub iterations: usize,
    /// Doses inside the last window before the exposure filter.
    pub window: Vec<DoseIndex>,
    pub path: SelectionPath,
}

/// At least half the doses have posterior median above θ.
pub fn is_toxic_scenario<T: Field>(medians: &[T], theta: T) -> bool {
    let above = medians.iter().filter(|&&p| p > theta).count();
    2 * above >= medians.len()
}

/// Runs the widening-window rule over posterior medians.
pub fn recommend<T: Field>(
    medians: &[T],
    data: &ObservedData,
    dims: GridDims,
    theta: T,
    cfg: &RecommenderConfig<T>,
) -> Result<Recommendation<T>> {
    if medians.len() != dims.len() || data.n.len() != dims.len() {
        return domain(format!(
            "{} medians and {} counts for a {dims} lattice",
            medians.len(),
            data.n.len()
        ));
    }
    cfg.validate()?;
    let toxic = is_toxic_scenario(medians, theta);
    let up_step = if toxic { cfg.eta_u } else { cfg.gamma_u };

    // margins are l0 + k·step rather than running sums
    let (mut kl, mut ku) = (0u32, 0u32);
    let at = |start: T, k: u32, step: T| start + T::from_u32(k).expect("step count") * step;
    let (mut l, mut u) = (cfg.l0, cfg.u0);
    let mut window = Vec::new();
    let (mut used_l, mut used_u) = (l, u);
    let mut iterations = 0;
    while window.is_empty() && (l <= cfg.delta_l || u <= cfg.delta_u) {
        window = (0..dims.len())
            .filter(|&k| {
                let d = medians[k] - theta;
                T::zero() - l <= d && d <= u
            })
            .collect();
        used_l = l;
        used_u = u;
        iterations += 1;
        if l <= cfg.delta_l {
            kl += 1;
            l = at(cfg.l0, kl, cfg.gamma_l);
        }
        if u <= cfg.delta_u {
            ku += 1;
            u = at(cfg.u0, ku, up_step);
        }
    }

    let pick = |keep: &dyn Fn(u32) -> bool| -> Vec<usize> { window.iter().copied().filter(|&k| keep(data.n[k])).collect() };
    let (chosen, path) = if window.is_empty() {
        (Vec::new(), SelectionPath::EmptyWindow)
    } else {
        let many = pick(&|n| n > 1);
        if !many.is_empty() {
            (many, SelectionPath::Experimented)
        } else {
            let once = pick(&|n| n == 1);
            if once.is_empty() {
                (once, SelectionPath::Untried)
            } else {
                (once, SelectionPath::ExperimentedOnce)
            }
        }
    };
    Ok(Recommendation {
        doses: chosen.iter().map(|&k| dims.dose_at(k)).collect(),
        toxic,
        lower_margin: used_l,
        upper_margin: used_u,
        iterations,
        window: window.iter().map(|&k| dims.dose_at(k)).collect(),
        path,
    })
}
