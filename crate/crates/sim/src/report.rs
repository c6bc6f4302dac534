//! JSON, CSV and plain-text renderings of a study report.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::study::StudyReport;

/// CSV column order.
pub const CSV_COLUMNS: [&str; 17] = [
    "scenario",
    "design",
    "replicates",
    "rec_at_theta",
    "rec_within_10",
    "rec_beyond_10",
    "rec_none",
    "exp_at_theta",
    "exp_within_10",
    "exp_beyond_10",
    "exp_none",
    "rec_overtoxic",
    "alloc_overtoxic",
    "mean_dlt_rate",
    "pct_trials_excess_dlt",
    "pct_stopped_early",
    "mean_enrolled",
];

#[derive(Serialize)]
struct CsvRow<'a> {
    scenario: &'a str,
    design: &'a str,
    replicates: usize,
    rec_at_theta: f64,
    rec_within_10: f64,
    rec_beyond_10: f64,
    rec_none: f64,
    exp_at_theta: f64,
    exp_within_10: f64,
    exp_beyond_10: f64,
    exp_none: f64,
    rec_overtoxic: f64,
    alloc_overtoxic: f64,
    mean_dlt_rate: f64,
    pct_trials_excess_dlt: f64,
    pct_stopped_early: f64,
    mean_enrolled: f64,
}

pub fn to_json(report: &StudyReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn to_csv(report: &StudyReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in &report.scenarios {
        let o = &s.oc;
        w.serialize(CsvRow {
            scenario: &s.scenario.name,
            design: &s.design,
            replicates: o.replicates,
            rec_at_theta: o.rec_at_theta,
            rec_within_10: o.rec_within_10,
            rec_beyond_10: o.rec_beyond_10,
            rec_none: o.rec_none,
            exp_at_theta: o.exp_at_theta,
            exp_within_10: o.exp_within_10,
            exp_beyond_10: o.exp_beyond_10,
            exp_none: o.exp_none,
            rec_overtoxic: o.rec_overtoxic,
            alloc_overtoxic: o.alloc_overtoxic,
            mean_dlt_rate: o.mean_dlt_rate,
            pct_trials_excess_dlt: o.pct_trials_excess_dlt,
            pct_stopped_early: o.pct_stopped_early,
            mean_enrolled: o.mean_enrolled,
        })?;
    }
    let bytes = w.into_inner().map_err(|e| SimError::Config(format!("csv output: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Table with recommendation and experimentation percentages by category,
/// then the safety summary.
pub fn render_table(report: &StudyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "preset {}  replicates {}  seed {}",
        report.preset.name.as_str(),
        report.replicates,
        report.master_seed
    );
    let _ = writeln!(
        out,
        "{:<12} {:>30}   {:>30}",
        "",
        "Recommendation %",
        "Experimentation %"
    );
    let _ = writeln!(
        out,
        "{:<12} {:>7} {:>7} {:>7} {:>7}   {:>7} {:>7} {:>7} {:>7}",
        "Scenario", "At θ", "1-10%", ">10%", "None", "At θ", "1-10%", ">10%", "None"
    );
    for s in &report.scenarios {
        let o = &s.oc;
        let _ = writeln!(
            out,
            "{:<12} {:>7.1} {:>7.1} {:>7.1} {:>7.1}   {:>7.1} {:>7.1} {:>7.1} {:>7.1}",
            s.scenario.name,
            o.rec_at_theta,
            o.rec_within_10,
            o.rec_beyond_10,
            o.rec_none,
            o.exp_at_theta,
            o.exp_within_10,
            o.exp_beyond_10,
            o.exp_none
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<12} {:>10} {:>10} {:>10} {:>12} {:>9} {:>9}",
        "Scenario", "Rec tox %", "Alloc tox", "DLT rate", "Excess DLT %", "Stopped", "Enrolled"
    );
    for s in &report.scenarios {
        let o = &s.oc;
        let _ = writeln!(
            out,
            "{:<12} {:>10.1} {:>10.1} {:>10.1} {:>12.1} {:>9.1} {:>9.1}",
            s.scenario.name,
            o.rec_overtoxic,
            o.alloc_overtoxic,
            o.mean_dlt_rate,
            o.pct_trials_excess_dlt,
            o.pct_stopped_early,
            o.mean_enrolled
        );
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| SimError::Io { path: path.into(), source })
}
