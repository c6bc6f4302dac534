//! True-toxicity scenarios: the built-in library and a JSON file format.

use std::path::Path;

use nbcd_core::{GridDims, ProbGrid};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Which built-in study a scenario belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Study1,
    Study2,
    Trial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub dims: GridDims,
    /// Row-major true DLT probabilities, row = first index i.
    pub true_p: Vec<f64>,
    pub theta: f64,
}

/// On-disk form: `{name, I, J, theta, p}` with `p` row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(rename = "I")]
    pub rows: usize,
    #[serde(rename = "J")]
    pub cols: usize,
    pub theta: f64,
    pub p: Vec<f64>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, dims: GridDims, true_p: Vec<f64>, theta: f64) -> Result<Self> {
        let s = Self { name: name.into(), dims, true_p, theta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::Scenario { name: self.name.clone(), msg });
        if self.true_p.len() != self.dims.len() {
            return bad(format!("{} probabilities for a {} lattice", self.true_p.len(), self.dims));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta {} outside (0, 1)", self.theta));
        }
        if let Some(p) = self.true_p.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return bad(format!("probability {p} outside (0, 1)"));
        }
        let grid = ProbGrid::new(self.true_p.clone());
        if !nbcd_core::lattice::is_monotone(&grid, self.dims, 0.0)? {
            return bad("probabilities decrease along an agent".into());
        }
        Ok(())
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.true_p[(i - 1) * self.dims.cols() + (j - 1)]
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io { path: path.into(), source })?;
        let f: ScenarioFile = serde_json::from_str(&text).map_err(|source| SimError::Json { path: path.into(), source })?;
        let dims = GridDims::new(f.rows, f.cols)?;
        Self::new(f.name, dims, f.p, f.theta)
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            name: self.name.clone(),
            rows: self.dims.rows(),
            cols: self.dims.cols(),
            theta: self.theta,
            p: self.true_p.clone(),
        }
    }
}

fn make(name: &str, rows: usize, cols: usize, theta: f64, p: &[f64]) -> Scenario {
    Scenario::new(name, GridDims::new(rows, cols).expect("static dims"), p.to_vec(), theta).expect("static scenario")
}

/// Scenarios of one study, in table order.
pub fn study_scenarios(study: Study) -> Vec<Scenario> {
    match study {
        Study::Study1 => STUDY1.iter().map(|(n, p)| make(n, 4, 4, 0.2, p)).collect(),
        Study::Study2 => STUDY2.iter().map(|(n, p)| make(n, 4, 5, 0.3, p)).collect(),
        Study::Trial => TRIAL.iter().map(|(n, p)| make(n, 2, 3, 0.33, p)).collect(),
    }
}

/// All 19 built-in scenarios.
pub fn builtin_scenarios() -> Vec<Scenario> {
    [Study::Study1, Study::Study2, Study::Trial].into_iter().flat_map(study_scenarios).collect()
}

/// Study a built-in scenario name belongs to.
pub fn study_of(name: &str) -> Option<Study> {
    let prefix = name.split('/').next()?;
    match prefix {
        "study1" => Some(Study::Study1),
        "study2" => Some(Study::Study2),
        "trial" => Some(Study::Trial),
        _ => None,
    }
}

/// Built-in scenario by name, e.g. `study1/A`, `study2/6`, `trial/3`.
pub fn find_scenario(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name.eq_ignore_ascii_case(name))
}

#[rustfmt::skip]
const STUDY1: [(&str, [f64; 16]); 7] = [
    ("study1/A", [0.04, 0.08, 0.12, 0.16,
                  0.10, 0.14, 0.18, 0.22,
                  0.16, 0.20, 0.24, 0.28,
                  0.22, 0.26, 0.30, 0.34]),
    ("study1/B", [0.02, 0.04, 0.06, 0.08,
                  0.05, 0.07, 0.09, 0.11,
                  0.08, 0.10, 0.12, 0.14,
                  0.11, 0.13, 0.15, 0.17]),
    ("study1/C", [0.10, 0.20, 0.30, 0.40,
                  0.25, 0.35, 0.45, 0.55,
                  0.40, 0.50, 0.60, 0.70,
                  0.55, 0.65, 0.75, 0.85]),
    ("study1/D", [0.44, 0.48, 0.52, 0.56,
                  0.50, 0.54, 0.58, 0.62,
                  0.56, 0.60, 0.64, 0.68,
                  0.62, 0.66, 0.70, 0.74]),
    ("study1/E", [0.08, 0.18, 0.28, 0.29,
                  0.09, 0.19, 0.29, 0.30,
                  0.10, 0.20, 0.30, 0.31,
                  0.11, 0.21, 0.31, 0.41]),
    ("study1/F", [0.12, 0.13, 0.14, 0.15,
                  0.16, 0.18, 0.20, 0.22,
                  0.44, 0.45, 0.46, 0.47,
                  0.50, 0.52, 0.54, 0.55]),
    ("study1/G", [0.01, 0.02, 0.03, 0.04,
                  0.04, 0.10, 0.15, 0.20,
                  0.06, 0.15, 0.30, 0.45,
                  0.10, 0.30, 0.50, 0.80]),
];

#[rustfmt::skip]
const STUDY2: [(&str, [f64; 20]); 7] = [
    ("study2/1", [0.05, 0.07, 0.11, 0.16, 0.23,
                  0.07, 0.12, 0.17, 0.24, 0.33,
                  0.12, 0.18, 0.25, 0.33, 0.43,
                  0.18, 0.27, 0.35, 0.43, 0.50]),
    ("study2/2", [0.01, 0.03, 0.07, 0.09, 0.11,
                  0.04, 0.06, 0.08, 0.10, 0.22,
                  0.09, 0.13, 0.22, 0.25, 0.27,
                  0.12, 0.16, 0.23, 0.28, 0.30]),
    ("study2/3", [0.30, 0.35, 0.40, 0.50, 0.55,
                  0.40, 0.55, 0.65, 0.75, 0.85,
                  0.50, 0.60, 0.70, 0.80, 0.90,
                  0.55, 0.70, 0.75, 0.85, 0.95]),
    ("study2/4", [0.01, 0.03, 0.08, 0.12, 0.15,
                  0.02, 0.05, 0.10, 0.16, 0.30,
                  0.07, 0.09, 0.15, 0.25, 0.35,
                  0.10, 0.26, 0.30, 0.33, 0.50]),
    ("study2/5", [0.07, 0.12, 0.20, 0.25, 0.30,
                  0.10, 0.18, 0.23, 0.30, 0.35,
                  0.30, 0.48, 0.56, 0.65, 0.68,
                  0.40, 0.55, 0.60, 0.66, 0.70]),
    ("study2/6", [0.10, 0.15, 0.20, 0.30, 0.45,
                  0.11, 0.20, 0.30, 0.40, 0.50,
                  0.15, 0.30, 0.35, 0.50, 0.60,
                  0.30, 0.40, 0.50, 0.60, 0.65]),
    ("study2/7", [0.11, 0.12, 0.13, 0.14, 0.15,
                  0.14, 0.20, 0.25, 0.30, 0.35,
                  0.16, 0.25, 0.40, 0.55, 0.60,
                  0.20, 0.40, 0.60, 0.90, 0.95]),
];

#[rustfmt::skip]
const TRIAL: [(&str, [f64; 6]); 5] = [
    ("trial/1", [0.05, 0.10, 0.20,
                 0.10, 0.20, 0.30]),
    ("trial/2", [0.05, 0.20, 0.33,
                 0.15, 0.33, 0.50]),
    ("trial/3", [0.01, 0.03, 0.07,
                 0.03, 0.07, 0.10]),
    ("trial/4", [0.30, 0.40, 0.50,
                 0.40, 0.55, 0.65]),
    ("trial/5", [0.30, 0.50, 0.60,
                 0.54, 0.58, 0.65]),
];
