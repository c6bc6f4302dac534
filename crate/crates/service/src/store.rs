//! Trials, their append-only logs and the operations on them.
//!
//! Each trial lives in `<data_dir>/trials/<id>.ndjson`. The first line
//! creates the trial (definition plus first-cohort events); every later
//! line is one complete transition. A transition is written as a single
//! line and synced before the in-memory state moves, so a crash leaves
//! either the whole transition or none of it. A torn final line is dropped
//! on startup.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{SecondsFormat, Utc};
use nbcd_core::engine::posterior_chain;
use nbcd_core::recommender::recommend;
use nbcd_core::{
    advance, record_outcomes, start_trial, DoseIndex, EventKind, GibbsConfig, Posterior, Recommendation, TrialEvent,
    TrialSeed, TrialState, TrialStatus,
};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::api::{
    rows_of, ChainProgress, CohortRequest, CohortResponse, CreateResponse, CreateTrialRequest, EventsView,
    PosteriorView, RecommendationView, TrialDefinition, TrialSummary, TrialView,
};
use crate::error::{ApiError, ApiResult};

/// One line of a trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Created {
        trial_id: String,
        at: String,
        label: Option<String>,
        seed: u64,
        idempotency_key: Option<String>,
        definition: TrialDefinition,
        events: Vec<TrialEvent>,
    },
    Transition {
        at: String,
        idempotency_key: Option<String>,
        request: Value,
        events: Vec<TrialEvent>,
        response: Value,
    },
}

/// Immutable snapshot of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: String,
    pub label: Option<String>,
    pub created_at: String,
    pub updated_at: String,
    pub seed: u64,
    pub definition: TrialDefinition,
    pub state: TrialState,
    /// Idempotency key → (request, response) of past submissions.
    pub submissions: HashMap<String, (Value, Value)>,
}

impl TrialRecord {
    fn trial_seed(&self) -> TrialSeed {
        TrialSeed::new(self.seed, 0)
    }

    pub fn view(&self) -> TrialView {
        let d = &self.definition;
        let s = &self.state;
        TrialView {
            trial_id: self.trial_id.clone(),
            label: self.label.clone(),
            created_at: self.created_at.clone(),
            updated_at: self.updated_at.clone(),
            version: s.version(),
            seed: self.seed,
            rows: d.dims.rows(),
            cols: d.dims.cols(),
            design: d.design.clone(),
            prior: d.prior.clone(),
            recommender: d.recommender,
            status: s.status,
            cohort: s.cohort_index,
            enrolled: s.enrolled,
            allocated: s.allocated,
            pending: s.pending.clone(),
            patients: rows_of(&s.data.n, d.dims),
            dlts: rows_of(&s.data.z, d.dims),
            last_stop_check: s.last_stop_check,
        }
    }
}

/// Posterior behind a state version.
#[derive(Debug, Clone)]
struct Computed {
    version: u64,
    view: PosteriorView,
    medians: Vec<f64>,
}

struct TrialSlot {
    /// Serializes mutations; held across the chain run.
    writer: Mutex<File>,
    current: RwLock<Arc<TrialRecord>>,
    posterior: Mutex<Option<Arc<Computed>>>,
}

impl TrialSlot {
    fn snapshot(&self) -> Arc<TrialRecord> {
        self.current.read().clone()
    }
}

pub struct Store {
    dir: PathBuf,
    default_gibbs: GibbsConfig,
    trials: RwLock<BTreeMap<String, Arc<TrialSlot>>>,
    /// Serializes creation so idempotency keys are checked atomically.
    create_keys: Mutex<HashMap<String, String>>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::Internal(e.to_string())
}

/// Cohorts whose outcomes are in: one stopping check per completed cohort.
fn cohorts_observed(state: &TrialState) -> u32 {
    state.events.iter().filter(|e| matches!(e.kind, EventKind::StopCheck(_))).count() as u32
}

fn posterior_view(
    posterior: &Posterior,
    omega: Option<f64>,
    state: &TrialState,
    def: &TrialDefinition,
    hypothetical: bool,
) -> ApiResult<PosteriorView> {
    let dims = def.dims;
    let threshold = def.design.theta + def.design.gamma;
    Ok(PosteriorView {
        version: state.version(),
        cohorts_observed: cohorts_observed(state),
        omega,
        samples_kept: posterior.samples_kept(),
        median: rows_of(posterior.medians(), dims),
        variance: rows_of(&posterior.summary().variance, dims),
        lower_95: rows_of(&posterior.percentiles(0.025), dims),
        upper_95: rows_of(&posterior.percentiles(0.975), dims),
        tail_probability: posterior.tail_probability(1, threshold).map_err(internal)?,
        tail_threshold: threshold,
        hypothetical,
        chain: ChainProgress {
            status: "complete".into(),
            n_samples: def.design.gibbs.n_samples,
            burn_in: def.design.gibbs.burn_in,
        },
    })
}

fn recommendation_view(rec: Recommendation, state: &TrialState) -> RecommendationView {
    let mut doses = rec.doses;
    if state.status == TrialStatus::StoppedForToxicity {
        doses.clear();
    }
    RecommendationView {
        version: state.version(),
        is_final: state.status.is_terminal(),
        status: state.status,
        doses,
        toxic: rec.toxic,
        lower_margin: rec.lower_margin,
        upper_margin: rec.upper_margin,
        iterations: rec.iterations,
        window: rec.window,
        path: rec.path,
    }
}

/// Maps engine protocol errors on a submission to HTTP semantics.
fn check_submission(rec: &TrialRecord, req: &CohortRequest, allow_partial: bool) -> ApiResult<Vec<(DoseIndex, bool)>> {
    let state = &rec.state;
    if state.status.is_terminal() {
        return Err(ApiError::Gone(rec.trial_id.clone()));
    }
    let mut expected: Vec<DoseIndex> = state.pending_doses();
    let mut got: Vec<DoseIndex> = req.outcomes.iter().map(|o| o.dose()).collect();
    expected.sort();
    got.sort();
    let fits = if allow_partial {
        let mut left = expected.clone();
        got.iter().all(|d| left.iter().position(|x| x == d).map(|p| left.remove(p)).is_some())
    } else {
        got == expected
    };
    if !fits {
        return Err(ApiError::Conflict {
            message: format!("outcomes do not match the pending allocation of {} patients", expected.len()),
            details: serde_json::json!({ "expected": state.pending }),
        });
    }
    Ok(req.outcomes.iter().map(|o| (o.dose(), o.dlt)).collect())
}

impl Store {
    /// Opens (creating if needed) the data directory and replays every log.
    pub fn open(dir: impl Into<PathBuf>, default_gibbs: GibbsConfig) -> anyhow::Result<Self> {
        let dir = dir.into();
        let trials_dir = dir.join("trials");
        std::fs::create_dir_all(&trials_dir)?;
        let store = Self {
            dir,
            default_gibbs,
            trials: RwLock::new(BTreeMap::new()),
            create_keys: Mutex::new(HashMap::new()),
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&trials_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "ndjson"))
            .collect();
        paths.sort();
        for path in paths {
            let (record, key) = load_log(&path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            let file = OpenOptions::new().append(true).open(&path)?;
            if let Some(key) = key {
                store.create_keys.lock().insert(key, record.trial_id.clone());
            }
            let slot = TrialSlot {
                writer: Mutex::new(file),
                current: RwLock::new(Arc::new(record.clone())),
                posterior: Mutex::new(None),
            };
            store.trials.write().insert(record.trial_id, Arc::new(slot));
        }
        Ok(store)
    }

    pub fn data_dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join("trials").join(format!("{id}.ndjson"))
    }

    fn slot(&self, id: &str) -> ApiResult<Arc<TrialSlot>> {
        self.trials.read().get(id).cloned().ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    pub fn snapshot(&self, id: &str) -> ApiResult<Arc<TrialRecord>> {
        Ok(self.slot(id)?.snapshot())
    }

    pub fn list(&self) -> Vec<TrialSummary> {
        let slots: Vec<Arc<TrialSlot>> = self.trials.read().values().cloned().collect();
        slots
            .iter()
            .map(|s| {
                let r = s.snapshot();
                TrialSummary {
                    trial_id: r.trial_id.clone(),
                    label: r.label.clone(),
                    status: r.state.status,
                    enrolled: r.state.enrolled,
                    updated_at: r.updated_at.clone(),
                }
            })
            .collect()
    }

    /// Creates a trial; returns the existing one for a repeated key.
    /// The flag says whether a new trial was made.
    pub fn create(&self, req: &CreateTrialRequest, key: Option<&str>) -> ApiResult<(CreateResponse, bool)> {
        let mut keys = self.create_keys.lock();
        if let Some(id) = key.and_then(|k| keys.get(k)) {
            let rec = self.snapshot(id)?;
            let allocation = first_cohort(&rec.state);
            return Ok((CreateResponse { trial: rec.view(), allocation }, false));
        }
        let def = req.resolve(self.default_gibbs)?;
        let state = start_trial(&def.design, &def.prior, def.dims).map_err(|e| ApiError::invalid("design", e.to_string()))?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let seed = req.seed.unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0);
        let at = now();
        let line = LogRecord::Created {
            trial_id: id.clone(),
            at: at.clone(),
            label: req.label.clone(),
            seed,
            idempotency_key: key.map(str::to_string),
            definition: def.clone(),
            events: state.events.clone(),
        };
        let path = self.log_path(&id);
        let mut file = OpenOptions::new().create_new(true).append(true).open(&path)?;
        append(&mut file, &line)?;
        let rec = TrialRecord {
            trial_id: id.clone(),
            label: req.label.clone(),
            created_at: at.clone(),
            updated_at: at,
            seed,
            definition: def,
            state,
            submissions: HashMap::new(),
        };
        let allocation = rec.state.pending.clone();
        let response = CreateResponse { trial: rec.view(), allocation };
        let slot = TrialSlot {
            writer: Mutex::new(file),
            current: RwLock::new(Arc::new(rec)),
            posterior: Mutex::new(None),
        };
        self.trials.write().insert(id.clone(), Arc::new(slot));
        if let Some(k) = key {
            keys.insert(k.to_string(), id);
        }
        Ok((response, true))
    }

    /// Records a complete cohort, updates the posterior and allocates the
    /// next cohort (or terminates), persisting before returning.
    pub fn submit(&self, id: &str, req: &CohortRequest, key: Option<&str>) -> ApiResult<CohortResponse> {
        let slot = self.slot(id)?;
        let mut file = slot.writer.lock();
        let rec = slot.snapshot();
        let request = serde_json::to_value(req).map_err(internal)?;
        if let Some((prev_req, prev_resp)) = key.and_then(|k| rec.submissions.get(k)) {
            if *prev_req != request {
                return Err(ApiError::Conflict {
                    message: "idempotency key reused with a different request".into(),
                    details: serde_json::json!({ "idempotency_key": key }),
                });
            }
            return serde_json::from_value(prev_resp.clone()).map_err(internal);
        }
        let outcomes = check_submission(&rec, req, false)?;
        let mut next = (*rec).clone();
        let (response, computed) = step(&mut next, &outcomes, false)?;
        let at = now();
        let response_value = serde_json::to_value(&response).map_err(internal)?;
        let line = LogRecord::Transition {
            at: at.clone(),
            idempotency_key: key.map(str::to_string),
            request: request.clone(),
            events: next.state.events[rec.state.events.len()..].to_vec(),
            response: response_value.clone(),
        };
        append(&mut file, &line)?;
        next.updated_at = at;
        if let Some(k) = key {
            next.submissions.insert(k.to_string(), (request, response_value));
        }
        *slot.current.write() = Arc::new(next);
        *slot.posterior.lock() = Some(Arc::new(computed));
        Ok(response)
    }

    /// Runs a submission on a copy. An empty hypothetical returns the
    /// current posterior; a partial one updates the posterior without
    /// allocating. Uses the trial's own streams, so a complete preview
    /// equals the real submission's response.
    pub fn what_if(&self, id: &str, req: &CohortRequest) -> ApiResult<CohortResponse> {
        let slot = self.slot(id)?;
        let rec = slot.snapshot();
        let outcomes = check_submission(&rec, req, true)?;
        if outcomes.is_empty() {
            let computed = self.computed(&slot, &rec)?;
            return Ok(CohortResponse {
                trial_id: rec.trial_id.clone(),
                version: rec.state.version(),
                status: rec.state.status,
                stop_check: rec.state.last_stop_check,
                posterior: PosteriorView { hypothetical: true, ..computed.view.clone() },
                next_allocation: rec.state.pending.clone(),
                recommendation: None,
                hypothetical: true,
            });
        }
        let mut copy = (*rec).clone();
        Ok(step(&mut copy, &outcomes, true)?.0)
    }

    pub fn posterior(&self, id: &str) -> ApiResult<PosteriorView> {
        let slot = self.slot(id)?;
        let rec = slot.snapshot();
        Ok(self.computed(&slot, &rec)?.view.clone())
    }

    pub fn recommendation(&self, id: &str) -> ApiResult<RecommendationView> {
        let slot = self.slot(id)?;
        let rec = slot.snapshot();
        let computed = self.computed(&slot, &rec)?;
        let d = &rec.definition;
        let r = recommend(&computed.medians, &rec.state.data, d.dims, d.design.theta, &d.recommender).map_err(internal)?;
        Ok(recommendation_view(r, &rec.state))
    }

    pub fn events(&self, id: &str) -> ApiResult<EventsView> {
        let rec = self.snapshot(id)?;
        Ok(EventsView { trial_id: rec.trial_id.clone(), version: rec.state.version(), events: rec.state.events.clone() })
    }

    /// Posterior for the snapshot's version, from cache or a fresh chain.
    /// The chain is addressed by the trial seed and cohort count, so a
    /// recomputation reproduces the chain the engine ran.
    fn computed(&self, slot: &TrialSlot, rec: &TrialRecord) -> ApiResult<Arc<Computed>> {
        let version = rec.state.version();
        if let Some(c) = slot.posterior.lock().as_ref().filter(|c| c.version == version) {
            return Ok(c.clone());
        }
        let d = &rec.definition;
        let cohorts = cohorts_observed(&rec.state);
        let (post, omega) =
            posterior_chain(&d.prior, &rec.state.data, d.dims, &d.design, rec.trial_seed(), cohorts).map_err(internal)?;
        let c = Arc::new(Computed {
            version,
            view: posterior_view(&post, omega, &rec.state, d, false)?,
            medians: post.medians().to_vec(),
        });
        let mut cache = slot.posterior.lock();
        // keep whichever is newer if a submission landed meanwhile
        if cache.as_ref().is_none_or(|old| old.version <= version) {
            *cache = Some(c.clone());
        }
        Ok(c)
    }
}

/// Records outcomes and, when the cohort is complete, advances the engine.
fn step(rec: &mut TrialRecord, outcomes: &[(DoseIndex, bool)], hypothetical: bool) -> ApiResult<(CohortResponse, Computed)> {
    let seed = rec.trial_seed();
    let def = rec.definition.clone();
    record_outcomes(&mut rec.state, outcomes).map_err(|e| ApiError::Conflict {
        message: e.to_string(),
        details: serde_json::json!({ "expected": rec.state.pending }),
    })?;
    if !rec.state.pending.is_empty() {
        // partial preview: posterior only
        let cohorts = cohorts_observed(&rec.state);
        let (post, omega) =
            posterior_chain(&def.prior, &rec.state.data, def.dims, &def.design, seed, cohorts).map_err(internal)?;
        let view = posterior_view(&post, omega, &rec.state, &def, hypothetical)?;
        let response = CohortResponse {
            trial_id: rec.trial_id.clone(),
            version: rec.state.version(),
            status: rec.state.status,
            stop_check: None,
            posterior: view.clone(),
            next_allocation: Vec::new(),
            recommendation: None,
            hypothetical,
        };
        return Ok((response, Computed { version: rec.state.version(), view, medians: post.medians().to_vec() }));
    }
    let report = advance(&mut rec.state, &def.design, &def.prior, seed).map_err(internal)?;
    let view = posterior_view(&report.posterior, Some(report.omega), &rec.state, &def, hypothetical)?;
    let recommendation = if report.status.is_terminal() {
        let r = recommend(report.posterior.medians(), &rec.state.data, def.dims, def.design.theta, &def.recommender)
            .map_err(internal)?;
        Some(recommendation_view(r, &rec.state))
    } else {
        None
    };
    let response = CohortResponse {
        trial_id: rec.trial_id.clone(),
        version: rec.state.version(),
        status: report.status,
        stop_check: Some(report.stop_check),
        posterior: view.clone(),
        next_allocation: report.allocated,
        recommendation,
        hypothetical,
    };
    let computed = Computed {
        version: rec.state.version(),
        view: PosteriorView { hypothetical: false, ..view },
        medians: report.posterior.medians().to_vec(),
    };
    Ok((response, computed))
}

fn first_cohort(state: &TrialState) -> Vec<nbcd_core::engine::Allocation> {
    state
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::Allocation(a) if e.cohort == 1 => Some(*a),
            _ => None,
        })
        .collect()
}

fn append(file: &mut File, record: &LogRecord) -> ApiResult<()> {
    let mut line = serde_json::to_vec(record).map_err(internal)?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()?;
    Ok(())
}

/// Rebuilds a trial from its log, dropping a torn final line.
pub fn load_log(path: &Path) -> anyhow::Result<(TrialRecord, Option<String>)> {
    let bytes = std::fs::read(path)?;
    let complete = match bytes.iter().rposition(|&b| b == b'\n') {
        Some(p) => p + 1,
        None => 0,
    };
    if complete < bytes.len() {
        tracing::warn!("{}: dropping {} bytes of an unfinished record", path.display(), bytes.len() - complete);
        OpenOptions::new().write(true).open(path)?.set_len(complete as u64)?;
    }
    let mut lines = bytes[..complete].split(|&b| b == b'\n').filter(|l| !l.is_empty());
    let first = lines.next().ok_or_else(|| anyhow::anyhow!("empty log"))?;
    let LogRecord::Created { trial_id, at, label, seed, idempotency_key, definition, events } = serde_json::from_slice(first)?
    else {
        anyhow::bail!("log does not start with a creation record");
    };
    let mut all = events;
    let mut submissions = HashMap::new();
    let mut updated_at = at.clone();
    for line in lines {
        match serde_json::from_slice(line)? {
            LogRecord::Transition { at, idempotency_key, request, events, response } => {
                all.extend(events);
                updated_at = at;
                if let Some(k) = idempotency_key {
                    submissions.insert(k, (request, response));
                }
            }
            LogRecord::Created { .. } => anyhow::bail!("second creation record"),
        }
    }
    let state = TrialState::replay(definition.dims, &all)?;
    let record = TrialRecord { trial_id, label, created_at: at, updated_at, seed, definition, state, submissions };
    Ok((record, idempotency_key))
}
