//! Partially observed, directed, dated hosting events.
//!
//! Days are integer offsets from the first study day. A family's *coverage* is
//! the set of days its interviews reported on; the event "i hosts j on day t"
//! is observable (`o_ij(t) = 1`) when either family covers `t`. Hosting
//! indicators `h_ij(t)` are stored sparsely per ordered pair.

mod daymask;
mod ingest;
mod json;
mod reconcile;
mod summary;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use daymask::{DayMask, Run};
pub use ingest::{ingest_csv, read_families_csv, read_interviews_csv, Ingested, InterviewRow};
pub use reconcile::{reconcile, DivergentMatch, Reconciled, RejectedClaim};
pub use summary::{summary_stats, DyadRate, Rate, SummaryStats};

/// A nuclear family: one node of the interaction network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub id: String,
    pub head_mean_age: f64,
    pub size: u32,
    pub lat: f64,
    pub lon: f64,
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidFamily {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.id.is_empty() {
            return bad("empty id");
        }
        if self.size < 1 {
            return bad("size must be at least 1");
        }
        if !(-90.0..=90.0).contains(&self.lat) {
            return bad("latitude outside [-90, 90]");
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return bad("longitude outside [-180, 180]");
        }
        if !self.head_mean_age.is_finite() || self.head_mean_age < 0.0 {
            return bad("head_mean_age must be a non-negative number");
        }
        Ok(())
    }
}

/// Check ids are unique and every family is well formed.
pub fn validate_families(families: &[Family]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for f in families {
        f.validate()?;
        if !seen.insert(f.id.as_str()) {
            return Err(Error::InvalidFamily {
                id: f.id.clone(),
                reason: "duplicate id".into(),
            });
        }
    }
    Ok(())
}

/// Side of a claim relative to its reporter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    AsHost,
    AsGuest,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Claim {
    pub host: String,
    pub guest: String,
    pub day: i64,
    pub role: Role,
}

/// One interview: the days it covered and the hosting claims it made.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawReport {
    pub reporter: String,
    pub interview_day: i64,
    pub covered_days: BTreeSet<i64>,
    pub claims: Vec<Claim>,
}

/// Provenance of a positive hosting indicator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    HostReported,
    GuestOnly,
    Both,
}

/// Per-family interview coverage; determines `o_ij(t)` for every pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationMask {
    coverage: Vec<DayMask>,
    n_days: usize,
}

impl ObservationMask {
    pub fn new(coverage: Vec<DayMask>, n_days: usize) -> Result<Self> {
        if coverage.iter().any(|m| m.len() != n_days) {
            return Err(Error::Invalid("coverage length differs from n_days".into()));
        }
        Ok(ObservationMask { coverage, n_days })
    }

    /// Every family covers every day.
    pub fn full(n_families: usize, n_days: usize) -> Self {
        ObservationMask {
            coverage: vec![DayMask::full(n_days); n_families],
            n_days,
        }
    }

    pub fn n_families(&self) -> usize {
        self.coverage.len()
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    pub fn coverage(&self, family: usize) -> &DayMask {
        &self.coverage[family]
    }

    #[inline]
    pub fn covers(&self, family: usize, t: usize) -> bool {
        self.coverage[family].get(t)
    }

    /// `o_ij(t)`.
    #[inline]
    pub fn observed(&self, i: usize, j: usize, t: usize) -> bool {
        i != j && (self.covers(i, t) || self.covers(j, t))
    }

    /// Observable but only through the guest's interview.
    #[inline]
    pub fn guest_only(&self, host: usize, guest: usize, t: usize) -> bool {
        host != guest && !self.covers(host, t) && self.covers(guest, t)
    }

    pub fn pair_mask(&self, i: usize, j: usize) -> DayMask {
        self.coverage[i].union(&self.coverage[j])
    }

    /// `Σ_t o_ij(t)` for one ordered pair.
    pub fn pair_risk(&self, i: usize, j: usize) -> usize {
        if i == j {
            0
        } else {
            self.pair_mask(i, j).count()
        }
    }

    /// Total risk count `Σ_{i≠j,t} o_ij(t)`.
    pub fn risk_count(&self) -> u64 {
        let n = self.n_families();
        let mut total = 0u64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    total += self.pair_risk(i, j) as u64;
                }
            }
        }
        total
    }

    /// Copy with every family's coverage intersected with `keep`.
    pub fn thinned(&self, keep: &[DayMask]) -> ObservationMask {
        let coverage = self
            .coverage
            .iter()
            .zip(keep)
            .map(|(c, k)| {
                let mut m = DayMask::new(self.n_days);
                for t in c.iter_ones() {
                    if k.get(t) {
                        m.set(t, true);
                    }
                }
                m
            })
            .collect();
        ObservationMask {
            coverage,
            n_days: self.n_days,
        }
    }
}

/// Build the observation mask from interview reports.
///
/// Returns the mask and its total risk count. Covered days outside
/// `[0, n_days)` are ignored.
pub fn build_observation_mask(
    reports: &[RawReport],
    families: &[Family],
    n_days: usize,
) -> Result<(ObservationMask, u64)> {
    let index = family_index(families);
    let mut coverage = vec![DayMask::new(n_days); families.len()];
    for r in reports {
        let f = *index
            .get(r.reporter.as_str())
            .ok_or_else(|| Error::UnknownFamily(r.reporter.clone()))?;
        for c in &r.claims {
            for id in [&c.host, &c.guest] {
                if !index.contains_key(id.as_str()) {
                    return Err(Error::UnknownFamily(id.clone()));
                }
            }
        }
        for &d in &r.covered_days {
            if d >= 0 && (d as usize) < n_days {
                coverage[f].set(d as usize, true);
            }
        }
    }
    let mask = ObservationMask::new(coverage, n_days)?;
    let risk = mask.risk_count();
    Ok((mask, risk))
}

pub(crate) fn family_index(families: &[Family]) -> std::collections::HashMap<&str, usize> {
    families
        .iter()
        .enumerate()
        .map(|(k, f)| (f.id.as_str(), k))
        .collect()
}

/// One positive hosting indicator of an ordered pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub day: u32,
    pub source: Source,
}

/// Canonical reconciled event log. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    day_zero: Option<chrono::NaiveDate>,
    families: Vec<Family>,
    mask: ObservationMask,
    /// Indexed by `i * n + j`; sorted by day, at most one event per day.
    events: Vec<Vec<Event>>,
}

impl EventLog {
    /// Assemble a log, checking `h ≤ o`, day ranges and self-pair exclusion.
    pub fn new(
        day_zero: Option<chrono::NaiveDate>,
        families: Vec<Family>,
        mask: ObservationMask,
        events: impl IntoIterator<Item = (usize, usize, usize, Source)>,
    ) -> Result<Self> {
        let n = families.len();
        if mask.n_families() != n {
            return Err(Error::Invalid(format!(
                "mask has {} families, log has {n}",
                mask.n_families()
            )));
        }
        let mut table: Vec<Vec<Event>> = vec![Vec::new(); n * n];
        for (i, j, t, source) in events {
            if i >= n || j >= n {
                return Err(Error::Invalid(format!("family index out of range in ({i}, {j}, {t})")));
            }
            if i == j {
                return Err(Error::Invalid(format!("self-pair event ({i}, {j}, {t})")));
            }
            if t >= mask.n_days() {
                return Err(Error::Invalid(format!("day {t} outside study range")));
            }
            if !mask.observed(i, j, t) {
                return Err(Error::Invalid(format!(
                    "event ({i}, {j}, {t}) on an unobservable day"
                )));
            }
            table[i * n + j].push(Event {
                day: t as u32,
                source,
            });
        }
        for list in &mut table {
            list.sort();
            let before = list.len();
            list.dedup_by_key(|e| e.day);
            if list.len() != before {
                return Err(Error::Invalid("duplicate event for a pair and day".into()));
            }
        }
        Ok(EventLog {
            day_zero,
            families,
            mask,
            events: table,
        })
    }

    pub fn day_zero(&self) -> Option<chrono::NaiveDate> {
        self.day_zero
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    pub fn n_families(&self) -> usize {
        self.families.len()
    }

    pub fn n_days(&self) -> usize {
        self.mask.n_days()
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    /// Events of ordered pair `(i, j)`, sorted by day.
    pub fn pair_events(&self, i: usize, j: usize) -> &[Event] {
        &self.events[i * self.n_families() + j]
    }

    /// `h_ij(t)`.
    pub fn hosted(&self, i: usize, j: usize, t: usize) -> bool {
        self.pair_events(i, j)
            .binary_search_by_key(&(t as u32), |e| e.day)
            .is_ok()
    }

    #[inline]
    pub fn observed(&self, i: usize, j: usize, t: usize) -> bool {
        self.mask.observed(i, j, t)
    }

    /// All events as `(host, guest, day, source)` in `(i, j, t)` order.
    pub fn iter_events(&self) -> impl Iterator<Item = (usize, usize, usize, Source)> + '_ {
        let n = self.n_families();
        self.events.iter().enumerate().flat_map(move |(p, list)| {
            list.iter()
                .map(move |e| (p / n, p % n, e.day as usize, e.source))
        })
    }

    pub fn event_count(&self) -> u64 {
        self.events.iter().map(|l| l.len() as u64).sum()
    }

    /// Windowed rate `Σ_t h_ij(t) / Σ_t o_ij(t)`; zero when never observable.
    pub fn windowed_rate(&self, i: usize, j: usize) -> f64 {
        let risk = self.mask.pair_risk(i, j);
        if risk == 0 {
            0.0
        } else {
            self.pair_events(i, j).len() as f64 / risk as f64
        }
    }

    pub fn family_position(&self, id: &str) -> Option<usize> {
        self.families.iter().position(|f| f.id == id)
    }

    /// Same events and families, observed through a different mask.
    /// Events that become unobservable are dropped.
    pub fn with_mask(&self, mask: ObservationMask) -> Result<EventLog> {
        let kept: Vec<_> = self
            .iter_events()
            .filter(|&(i, j, t, _)| mask.observed(i, j, t))
            .collect();
        EventLog::new(self.day_zero, self.families.clone(), mask, kept)
    }

    pub fn to_json(&self) -> Result<String> {
        json::to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        json::from_json(text)
    }
}
