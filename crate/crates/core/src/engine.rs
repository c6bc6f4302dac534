//! Adaptive cohort design.
//!
//! The trial opens at the lowest combination, splits the second cohort
//! between the best dose of the first row and of the first column, and from
//! then on moves each dose of the current pair along a randomly chosen
//! agent (one coordinate at a time), guarded by a safety screen. After every
//! cohort the ω-weighted posterior is sampled and the trial stops if the
//! lowest combination is likely too toxic.
//!
//! State is a fold over [`TrialEvent`]s: live transitions and replay go
//! through the same [`TrialState::apply`], so a persisted log reconstructs
//! the state exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DoseIndex, GridDims, ShapeGrid};
use crate::recommender::{recommend, Recommendation, RecommenderConfig};
use crate::rng::{StreamKind, TrialSeed};
use crate::sampler::{compute_omega, pseudo_posterior_shapes, run_chain_with, GibbsConfig, ObservedData, Posterior};

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn protocol<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Protocol(msg.into()))
}

/// How the "too toxic to move that way" screen measures a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyScreen {
    /// Median at the lowest dose of the whole line (free coordinate = 1).
    #[default]
    LineMinimum,
    /// Median at the next dose up from the current one along the line
    /// (the current dose itself at the edge).
    AdjacentEscalation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub theta: f64,
    pub n_max: u32,
    pub first_cohort_size: u32,
    /// Split evenly between the row and column doses.
    pub second_cohort_size: u32,
    /// Split evenly between the two doses of the pair.
    pub later_cohort_size: u32,
    pub gamma: f64,
    pub epsilon: f64,
    pub rho: f64,
    #[serde(default = "yes")]
    pub early_stopping: bool,
    /// Screen ratio: a direction is unsafe if its screened median exceeds
    /// this multiple of θ.
    #[serde(default = "default_screen_ratio")]
    pub screen_ratio: f64,
    #[serde(default)]
    pub safety_screen: SafetyScreen,
    pub gibbs: GibbsConfig,
}

fn yes() -> bool {
    true
}

fn default_screen_ratio() -> f64 {
    1.5
}

impl DesignConfig {
    /// Defaults: cohorts 4, 4, then 2; γ = 0.1, ε = 0.8, ρ = 2.
    pub fn new(theta: f64, n_max: u32) -> Self {
        Self {
            theta,
            n_max,
            first_cohort_size: 4,
            second_cohort_size: 4,
            later_cohort_size: 2,
            gamma: 0.1,
            epsilon: 0.8,
            rho: 2.0,
            early_stopping: true,
            screen_ratio: default_screen_ratio(),
            safety_screen: SafetyScreen::LineMinimum,
            gibbs: GibbsConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return config_err(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return config_err(format!("epsilon must lie in (0, 1], got {}", self.epsilon));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return config_err(format!("gamma must be non-negative, got {}", self.gamma));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return config_err(format!("rho must be non-negative, got {}", self.rho));
        }
        if !(self.screen_ratio > 0.0 && self.screen_ratio.is_finite()) {
            return config_err(format!("screen_ratio must be positive, got {}", self.screen_ratio));
        }
        if self.first_cohort_size == 0 {
            return config_err("first_cohort_size must be at least 1");
        }
        for (name, size) in [("second_cohort_size", self.second_cohort_size), ("later_cohort_size", self.later_cohort_size)] {
            if size == 0 || size % 2 != 0 {
                return config_err(format!("{name} must be a positive even number, got {size}"));
            }
        }
        if self.n_max < self.first_cohort_size + self.second_cohort_size {
            return config_err(format!(
                "n_max = {} is smaller than the first two cohorts ({})",
                self.n_max,
                self.first_cohort_size + self.second_cohort_size
            ));
        }
        self.gibbs.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Varies the second agent (j).
    Horizontal,
    /// Varies the first agent (i).
    Vertical,
}

/// Audit record of one direction decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionChoice {
    pub drawn: Direction,
    pub chosen: Direction,
    pub q_horizontal: f64,
    pub q_vertical: f64,
    pub overridden: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub patient: u32,
    pub dose: DoseIndex,
    /// Dose of the previous pair this one was derived from.
    pub from: Option<DoseIndex>,
    pub direction: Option<DirectionChoice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCheck {
    pub omega: f64,
    /// Posterior P(p₁₁ > θ + γ).
    pub tail: f64,
    pub threshold: f64,
    pub stop: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Running,
    StoppedForToxicity,
    Completed,
}

impl TrialStatus {
    pub fn is_terminal(self) -> bool {
        self != TrialStatus::Running
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Allocation(Allocation),
    Outcome { patient: u32, dose: DoseIndex, dlt: bool },
    StopCheck(StopCheck),
    Termination { status: TrialStatus },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEvent {
    pub seq: u64,
    pub cohort: u32,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialState {
    pub dims: GridDims,
    pub data: ObservedData,
    pub cohort_index: u32,
    /// First and last dose allocated in the latest cohort.
    pub current_pair: Option<(DoseIndex, DoseIndex)>,
    /// Allocated patients still awaiting an outcome.
    pub pending: Vec<Allocation>,
    pub enrolled: u32,
    pub allocated: u32,
    pub status: TrialStatus,
    pub last_stop_check: Option<StopCheck>,
    pub events: Vec<TrialEvent>,
}

impl TrialState {
    fn empty(dims: GridDims) -> Self {
        Self {
            dims,
            data: ObservedData::empty(dims),
            cohort_index: 0,
            current_pair: None,
            pending: Vec::new(),
            enrolled: 0,
            allocated: 0,
            status: TrialStatus::Running,
            last_stop_check: None,
            events: Vec::new(),
        }
    }

    /// Rebuilds a state from its event log.
    pub fn replay(dims: GridDims, events: &[TrialEvent]) -> Result<Self> {
        let mut s = Self::empty(dims);
        for e in events {
            s.apply(e.clone())?;
        }
        Ok(s)
    }

    /// Number of events applied; bumps on every transition.
    pub fn version(&self) -> u64 {
        self.events.len() as u64
    }

    /// Applies one event, checking it against the current state.
    pub fn apply(&mut self, event: TrialEvent) -> Result<()> {
        if event.seq != self.version() {
            return protocol(format!("event seq {} where {} was expected", event.seq, self.version()));
        }
        if self.status.is_terminal() {
            return protocol("trial already terminated");
        }
        match &event.kind {
            EventKind::Allocation(a) => {
                if !self.dims.contains(a.dose) {
                    return protocol(format!("allocation to {} outside {}", a.dose, self.dims));
                }
                if a.patient != self.allocated + 1 {
                    return protocol(format!("patient {} allocated out of order", a.patient));
                }
                if event.cohort == self.cohort_index + 1 {
                    if !self.pending.is_empty() {
                        return protocol("new cohort opened before outcomes of the previous one");
                    }
                    self.cohort_index = event.cohort;
                    self.current_pair = Some((a.dose, a.dose));
                } else if event.cohort == self.cohort_index {
                    if let Some((first, _)) = self.current_pair {
                        self.current_pair = Some((first, a.dose));
                    }
                } else {
                    return protocol(format!("allocation for cohort {} during cohort {}", event.cohort, self.cohort_index));
                }
                self.allocated += 1;
                self.pending.push(*a);
            }
            EventKind::Outcome { patient, dose, dlt } => {
                let Some(pos) = self.pending.iter().position(|a| a.patient == *patient && a.dose == *dose) else {
                    return protocol(format!("no pending patient {patient} at {dose}"));
                };
                self.pending.remove(pos);
                let slot = self.dims.slot(*dose)?;
                self.data.record(slot, *dlt);
                self.enrolled += 1;
            }
            EventKind::StopCheck(c) => {
                if !self.pending.is_empty() {
                    return protocol("stopping checked with outcomes outstanding");
                }
                self.last_stop_check = Some(*c);
            }
            EventKind::Termination { status } => {
                if !status.is_terminal() {
                    return protocol("termination must carry a terminal status");
                }
                self.status = *status;
            }
        }
        self.events.push(event);
        Ok(())
    }

    fn emit(&mut self, kind: EventKind) -> Result<()> {
        let e = TrialEvent { seq: self.version(), cohort: self.cohort_index, kind };
        self.apply(e)
    }

    fn allocate(&mut self, cohort: u32, dose: DoseIndex, from: Option<DoseIndex>, direction: Option<DirectionChoice>) -> Result<()> {
        let a = Allocation { patient: self.allocated + 1, dose, from, direction };
        let e = TrialEvent { seq: self.version(), cohort, kind: EventKind::Allocation(a) };
        self.apply(e)
    }

    /// Patients allocated in the open cohort and still awaiting outcomes.
    pub fn pending_doses(&self) -> Vec<DoseIndex> {
        self.pending.iter().map(|a| a.dose).collect()
    }
}

/// Opens the trial with the first cohort at (1, 1).
pub fn start_trial(cfg: &DesignConfig, prior: &ShapeGrid, dims: GridDims) -> Result<TrialState> {
    cfg.validate()?;
    prior.validate()?;
    prior.check_dims(dims)?;
    let mut s = TrialState::empty(dims);
    for _ in 0..cfg.first_cohort_size {
        s.allocate(1, DoseIndex::new(1, 1), None, None)?;
    }
    Ok(s)
}

/// Records outcomes against pending allocations, earliest patient first
/// at each dose.
pub fn record_outcomes(state: &mut TrialState, assignments: &[(DoseIndex, bool)]) -> Result<()> {
    if state.status.is_terminal() {
        return protocol("trial already terminated");
    }
    // validate the whole batch before touching the state
    let mut left = state.pending.clone();
    let mut matched = Vec::with_capacity(assignments.len());
    for &(dose, dlt) in assignments {
        let Some(pos) = left.iter().position(|a| a.dose == dose) else {
            return protocol(format!("outcome at {dose} does not match the pending allocation {:?}", state.pending_doses()));
        };
        matched.push((left.remove(pos).patient, dose, dlt));
    }
    for (patient, dose, dlt) in matched {
        state.emit(EventKind::Outcome { patient, dose, dlt })?;
    }
    Ok(())
}

/// Index of the value nearest `theta`, lowest index on ties.
fn nearest(values: impl Iterator<Item = f64>, theta: f64) -> usize {
    let mut best = (0, f64::INFINITY);
    for (n, v) in values.enumerate() {
        let d = (v - theta).abs();
        if d < best.1 {
            best = (n, d);
        }
    }
    best.0
}

/// Second-cohort doses `(1, j*)` and `(i*, 1)` nearest θ along the first
/// row and the first column.
pub fn second_cohort_doses(medians: &[f64], theta: f64, dims: GridDims) -> (DoseIndex, DoseIndex) {
    let row = nearest((1..=dims.cols()).map(|j| medians[dims.offset(1, j)]), theta);
    let col = nearest((1..=dims.rows()).map(|i| medians[dims.offset(i, 1)]), theta);
    (DoseIndex::new(1, row + 1), DoseIndex::new(col + 1, 1))
}

/// Screened median for moving from `d` along `dir`.
fn screen_value(d: DoseIndex, dir: Direction, medians: &[f64], dims: GridDims, screen: SafetyScreen) -> f64 {
    let at = |i, j| medians[dims.offset(i, j)];
    match (screen, dir) {
        (SafetyScreen::LineMinimum, Direction::Horizontal) => at(d.i, 1),
        (SafetyScreen::LineMinimum, Direction::Vertical) => at(1, d.j),
        (SafetyScreen::AdjacentEscalation, Direction::Horizontal) => at(d.i, (d.j + 1).min(dims.cols())),
        (SafetyScreen::AdjacentEscalation, Direction::Vertical) => at((d.i + 1).min(dims.rows()), d.j),
    }
}

/// Moves one dose given the randomly drawn direction.
pub fn choose_step(
    current: DoseIndex,
    drawn: Direction,
    medians: &[f64],
    dims: GridDims,
    cfg: &DesignConfig,
) -> (DoseIndex, DirectionChoice) {
    let qh = screen_value(current, Direction::Horizontal, medians, dims, cfg.safety_screen);
    let qv = screen_value(current, Direction::Vertical, medians, dims, cfg.safety_screen);
    let limit = cfg.screen_ratio * cfg.theta;
    let q_drawn = if drawn == Direction::Horizontal { qh } else { qv };
    let chosen = if q_drawn > limit {
        match qh.partial_cmp(&qv) {
            Some(std::cmp::Ordering::Less) => Direction::Horizontal,
            Some(std::cmp::Ordering::Greater) => Direction::Vertical,
            _ => drawn,
        }
    } else {
        drawn
    };
    let dose = match chosen {
        Direction::Horizontal => {
            let j = nearest((1..=dims.cols()).map(|j| medians[dims.offset(current.i, j)]), cfg.theta);
            DoseIndex::new(current.i, j + 1)
        }
        Direction::Vertical => {
            let i = nearest((1..=dims.rows()).map(|i| medians[dims.offset(i, current.j)]), cfg.theta);
            DoseIndex::new(i + 1, current.j)
        }
    };
    let choice = DirectionChoice { drawn, chosen, q_horizontal: qh, q_vertical: qv, overridden: chosen != drawn };
    (dose, choice)
}

/// Next doses for both members of the current pair, one fair coin each.
pub fn next_cohort_doses<R: Rng + ?Sized>(
    state: &TrialState,
    medians: &[f64],
    cfg: &DesignConfig,
    rng: &mut R,
) -> Result<[(DoseIndex, DoseIndex, DirectionChoice); 2]> {
    let Some((a, b)) = state.current_pair else {
        return protocol("no current pair before the first cohort");
    };
    let mut step = |from: DoseIndex| {
        let drawn = if rng.random::<bool>() { Direction::Horizontal } else { Direction::Vertical };
        let (to, choice) = choose_step(from, drawn, medians, state.dims, cfg);
        (from, to, choice)
    };
    let first = step(a);
    let second = step(b);
    Ok([first, second])
}

/// Posterior probability that p₁₁ exceeds θ + γ, and whether it beats ε.
pub fn check_stopping(posterior: &Posterior, cfg: &DesignConfig) -> Result<(bool, f64)> {
    let tail = posterior.tail_probability(1, cfg.theta + cfg.gamma)?;
    Ok((cfg.early_stopping && tail > cfg.epsilon, tail))
}

/// What one engine step computed.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub posterior: Posterior,
    pub omega: f64,
    pub stop_check: StopCheck,
    pub status: TrialStatus,
    /// Allocations of the newly opened cohort.
    pub allocated: Vec<Allocation>,
}

/// Chain for the posterior after `cohort` (cohort 0 is the prior).
pub fn posterior_chain(
    prior: &ShapeGrid,
    data: &ObservedData,
    dims: GridDims,
    cfg: &DesignConfig,
    seed: TrialSeed,
    cohort: u32,
) -> Result<(Posterior, Option<f64>)> {
    let mut rng = seed.stream(cohort, StreamKind::Chain);
    if data.total_patients() == 0 {
        return Ok((run_chain_with(prior, dims, &cfg.gibbs, None, &mut rng)?, None));
    }
    let omega = compute_omega(prior, data, cfg.rho)?;
    let shapes = pseudo_posterior_shapes(prior, data, omega)?;
    Ok((run_chain_with(&shapes, dims, &cfg.gibbs, None, &mut rng)?, Some(omega)))
}

/// Posterior update, stopping check, then either termination or the next
/// cohort's allocation. All outcomes of the open cohort must be in.
pub fn advance(state: &mut TrialState, cfg: &DesignConfig, prior: &ShapeGrid, seed: TrialSeed) -> Result<StepReport> {
    if state.status.is_terminal() {
        return protocol("trial already terminated");
    }
    if !state.pending.is_empty() {
        return protocol(format!("{} outcomes outstanding", state.pending.len()));
    }
    let (posterior, omega) = posterior_chain(prior, &state.data, state.dims, cfg, seed, state.cohort_index)?;
    let omega = omega.ok_or_else(|| Error::Protocol("no outcomes recorded yet".into()))?;
    let (stop, tail) = check_stopping(&posterior, cfg)?;
    let stop_check = StopCheck { omega, tail, threshold: cfg.theta + cfg.gamma, stop };
    state.emit(EventKind::StopCheck(stop_check))?;

    let mut report = StepReport { posterior, omega, stop_check, status: TrialStatus::Running, allocated: Vec::new() };
    if stop || state.allocated >= cfg.n_max {
        let status = if stop { TrialStatus::StoppedForToxicity } else { TrialStatus::Completed };
        state.emit(EventKind::Termination { status })?;
        report.status = status;
        return Ok(report);
    }

    let medians = report.posterior.medians().to_vec();
    let next = state.cohort_index + 1;
    let room = cfg.n_max - state.allocated;
    let before = state.pending.len();
    if state.cohort_index == 1 {
        let (row, col) = second_cohort_doses(&medians, cfg.theta, state.dims);
        let half = cfg.second_cohort_size / 2;
        let origin = DoseIndex::new(1, 1);
        let plan = std::iter::repeat_n(row, half as usize).chain(std::iter::repeat_n(col, half as usize));
        for dose in plan.take(room as usize) {
            state.allocate(next, dose, Some(origin), None)?;
        }
    } else {
        let mut rng = seed.stream(next, StreamKind::Direction);
        let steps = next_cohort_doses(state, &medians, cfg, &mut rng)?;
        let half = (cfg.later_cohort_size / 2) as usize;
        let plan = steps.iter().flat_map(|s| std::iter::repeat_n(*s, half));
        for (from, to, choice) in plan.take(room as usize) {
            state.allocate(next, to, Some(from), Some(choice))?;
        }
    }
    report.allocated = state.pending[before..].to_vec();
    Ok(report)
}

/// Recommendation at the end of a trial; nothing if it stopped early.
pub fn final_recommendation(
    state: &TrialState,
    posterior: &Posterior,
    theta: f64,
    rec: &RecommenderConfig,
) -> Result<Recommendation> {
    let mut r = recommend(posterior.medians(), &state.data, state.dims, theta, rec)?;
    if state.status == TrialStatus::StoppedForToxicity {
        r.doses.clear();
    }
    Ok(r)
}
