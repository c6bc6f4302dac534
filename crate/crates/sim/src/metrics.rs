//! Operating characteristics over replicated trials.

use nbcd_core::recommender::SelectionPath;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::scenario::Scenario;
use crate::trial::TrialResult;

/// Slack on the δ boundaries so that two-decimal table values such as
/// 0.40 vs θ = 0.30 land on the intended side despite binary rounding.
const BOUNDARY_SLACK: f64 = 1e-9;

/// Window used for the "1-10%" column.
pub const CATEGORY_WIDTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    AtTheta,
    Within10,
    Beyond10,
}

/// At θ by exact equality; within if the distance is at most 0.1.
pub fn classify_dose(p_star: f64, theta: f64) -> Category {
    if p_star == theta {
        Category::AtTheta
    } else if (p_star - theta).abs() <= CATEGORY_WIDTH + BOUNDARY_SLACK {
        Category::Within10
    } else {
        Category::Beyond10
    }
}

/// True toxicity above θ + δ.
pub fn is_overtoxic(p_star: f64, theta: f64, delta: f64) -> bool {
    p_star - theta > delta + BOUNDARY_SLACK
}

/// All values are percentages except `replicates`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub rec_at_theta: f64,
    pub rec_within_10: f64,
    pub rec_beyond_10: f64,
    pub rec_none: f64,
    pub exp_at_theta: f64,
    pub exp_within_10: f64,
    pub exp_beyond_10: f64,
    pub exp_none: f64,
    pub rec_overtoxic: f64,
    pub alloc_overtoxic: f64,
    pub mean_dlt_rate: f64,
    pub pct_trials_excess_dlt: f64,
    pub replicates: usize,
    /// Share of trials stopped for toxicity.
    pub pct_stopped_early: f64,
    /// Trials that ran to completion without a recommendation because the
    /// window caught only untried doses, or never caught any dose.
    pub none_untried: f64,
    pub none_empty_window: f64,
    pub mean_enrolled: f64,
    /// Recommendation percentage per dose, raster order.
    pub rec_by_dose: Vec<f64>,
    /// Share of enrolled patients per dose, raster order.
    pub exp_by_dose: Vec<f64>,
}

impl OperatingCharacteristics {
    pub fn rec_total(&self) -> f64 {
        self.rec_at_theta + self.rec_within_10 + self.rec_beyond_10 + self.rec_none
    }

    pub fn exp_total(&self) -> f64 {
        self.exp_at_theta + self.exp_within_10 + self.exp_beyond_10 + self.exp_none
    }
}

fn bump(acc: &mut [f64; 3], c: Category, w: f64) {
    acc[c as usize] += w;
}

/// Aggregates results in the order given. Multi-dose recommendations are
/// split equally; experimentation shares are patient-weighted.
pub fn aggregate(results: &[TrialResult], scenario: &Scenario, delta: f64) -> Result<OperatingCharacteristics> {
    if results.is_empty() {
        return Err(SimError::Config("no trial results to aggregate".into()));
    }
    let k = scenario.dims.len();
    let theta = scenario.theta;
    let cats: Vec<Category> = scenario.true_p.iter().map(|&p| classify_dose(p, theta)).collect();
    let toxic: Vec<bool> = scenario.true_p.iter().map(|&p| is_overtoxic(p, theta, delta)).collect();

    let mut rec = [0.0; 3];
    let mut rec_none = 0.0;
    let mut rec_toxic = 0.0;
    let mut rec_by_dose = vec![0.0; k];
    let mut alloc = vec![0u64; k];
    let (mut rate_sum, mut rated, mut excess, mut stopped, mut enrolled) = (0.0, 0usize, 0usize, 0usize, 0u64);
    let (mut untried, mut empty_window) = (0usize, 0usize);

    for r in results {
        if r.allocation.len() != k {
            return Err(SimError::Config(format!("result has {} doses, scenario {k}", r.allocation.len())));
        }
        if r.recommended.is_empty() {
            rec_none += 1.0;
        } else {
            let w = 1.0 / r.recommended.len() as f64;
            for d in &r.recommended {
                let slot = scenario.dims.slot(*d)?;
                bump(&mut rec, cats[slot], w);
                rec_by_dose[slot] += w;
                if toxic[slot] {
                    rec_toxic += w;
                }
            }
        }
        for (a, n) in alloc.iter_mut().zip(&r.allocation) {
            *a += u64::from(*n);
        }
        enrolled += u64::from(r.enrolled);
        if r.enrolled > 0 {
            let rate = f64::from(r.dlt_total) / f64::from(r.enrolled);
            rate_sum += rate;
            rated += 1;
            if rate > theta + delta + BOUNDARY_SLACK {
                excess += 1;
            }
        }
        stopped += usize::from(r.stopped_early);
        if !r.stopped_early {
            match r.path {
                SelectionPath::Untried => untried += 1,
                SelectionPath::EmptyWindow => empty_window += 1,
                _ => {}
            }
        }
    }

    let reps = results.len() as f64;
    let pct = |x: f64| 100.0 * x / reps;
    let patients: u64 = alloc.iter().sum();
    let mut exp = [0.0; 3];
    let mut alloc_toxic = 0.0;
    let exp_by_dose: Vec<f64> = if patients == 0 {
        vec![0.0; k]
    } else {
        alloc.iter().map(|&a| 100.0 * a as f64 / patients as f64).collect()
    };
    for (slot, share) in exp_by_dose.iter().enumerate() {
        bump(&mut exp, cats[slot], *share);
        if toxic[slot] {
            alloc_toxic += share;
        }
    }
    // only a trial with nobody enrolled contributes to the None column
    let exp_none = if patients == 0 { 100.0 } else { 0.0 };

    Ok(OperatingCharacteristics {
        rec_at_theta: pct(rec[0]),
        rec_within_10: pct(rec[1]),
        rec_beyond_10: pct(rec[2]),
        rec_none: pct(rec_none),
        exp_at_theta: exp[0],
        exp_within_10: exp[1],
        exp_beyond_10: exp[2],
        exp_none,
        rec_overtoxic: pct(rec_toxic),
        alloc_overtoxic: alloc_toxic,
        mean_dlt_rate: if rated == 0 { 0.0 } else { 100.0 * rate_sum / rated as f64 },
        pct_trials_excess_dlt: if rated == 0 { 0.0 } else { 100.0 * excess as f64 / rated as f64 },
        replicates: results.len(),
        pct_stopped_early: pct(stopped as f64),
        none_untried: pct(untried as f64),
        none_empty_window: pct(empty_window as f64),
        mean_enrolled: enrolled as f64 / reps,
        rec_by_dose: rec_by_dose.into_iter().map(pct).collect(),
        exp_by_dose,
    })
}
