//! Canonical JSON form of an [`EventLog`].

use serde::{Deserialize, Serialize};

use super::{DayMask, EventLog, Family, ObservationMask, Run, Source};
use crate::error::{Error, Result};

const FORMAT: &str = "condrecip.eventlog/1";

#[derive(Serialize, Deserialize)]
struct LogJson {
    format: String,
    day_zero: Option<chrono::NaiveDate>,
    n_days: usize,
    families: Vec<Family>,
    coverage: Vec<Vec<Run>>,
    events: Vec<EventJson>,
    observed: Vec<PairRuns>,
}

#[derive(Serialize, Deserialize)]
struct EventJson {
    i: usize,
    j: usize,
    t: usize,
    source: Source,
}

#[derive(Serialize, Deserialize)]
struct PairRuns {
    i: usize,
    j: usize,
    runs: Vec<Run>,
}

pub(super) fn to_json(log: &EventLog) -> Result<String> {
    let n = log.n_families();
    let mut observed = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let runs = log.mask().pair_mask(i, j).runs();
                if !runs.is_empty() {
                    observed.push(PairRuns { i, j, runs });
                }
            }
        }
    }
    let doc = LogJson {
        format: FORMAT.to_string(),
        day_zero: log.day_zero(),
        n_days: log.n_days(),
        families: log.families().to_vec(),
        coverage: (0..n).map(|f| log.mask().coverage(f).runs()).collect(),
        events: log
            .iter_events()
            .map(|(i, j, t, source)| EventJson { i, j, t, source })
            .collect(),
        observed,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub(super) fn from_json(text: &str) -> Result<EventLog> {
    let doc: LogJson = serde_json::from_str(text)?;
    if doc.format != FORMAT {
        return Err(Error::Parse(format!("unsupported event log format `{}`", doc.format)));
    }
    super::validate_families(&doc.families)?;
    if doc.coverage.len() != doc.families.len() {
        return Err(Error::Parse("coverage list length differs from family count".into()));
    }
    let coverage = doc
        .coverage
        .iter()
        .map(|runs| {
            DayMask::from_runs(doc.n_days, runs)
                .ok_or_else(|| Error::Parse("coverage run outside study period".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mask = ObservationMask::new(coverage, doc.n_days)?;

    let n = doc.families.len();
    let mut listed = vec![false; n * n];
    for p in &doc.observed {
        if p.i >= n || p.j >= n || p.i == p.j {
            return Err(Error::Parse(format!("bad observed pair ({}, {})", p.i, p.j)));
        }
        let runs = DayMask::from_runs(doc.n_days, &p.runs)
            .ok_or_else(|| Error::Parse("observed run outside study period".into()))?;
        if runs != mask.pair_mask(p.i, p.j) {
            return Err(Error::Parse(format!(
                "observed runs for ({}, {}) disagree with coverage",
                p.i, p.j
            )));
        }
        listed[p.i * n + p.j] = true;
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && !listed[i * n + j] && mask.pair_risk(i, j) > 0 {
                return Err(Error::Parse(format!("observed runs missing for ({i}, {j})")));
            }
        }
    }
    EventLog::new(
        doc.day_zero,
        doc.families,
        mask,
        doc.events.into_iter().map(|e| (e.i, e.j, e.t, e.source)),
    )
}
