//! Host/guest report reconciliation.
//!
//! Claims are merged per ordered pair and day. Any positive claim on an
//! observable day sets `h = 1`. A host-only claim and a guest-only claim of the
//! same pair at most two days apart, with no other claim of that pair between
//! them and with at least one party's coverage contradicting the other's date,
//! are treated as one event whose day is drawn uniformly from the two.

use std::collections::BTreeMap;

use rand::Rng;

use super::{build_observation_mask, family_index, Claim, EventLog, Family, ObservationMask, RawReport, Role, Source};
use crate::error::Result;
use crate::rng;

/// Largest day gap between host and guest claims treated as one event.
pub const MAX_DIVERGENCE: u32 = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RejectedClaim {
    pub reporter: String,
    pub claim: Claim,
    pub reason: String,
}

/// A host claim and a guest claim merged into one event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivergentMatch {
    pub host: usize,
    pub guest: usize,
    pub host_day: u32,
    pub guest_day: u32,
    pub chosen: u32,
}

#[derive(Clone, Debug)]
pub struct Reconciled {
    pub log: EventLog,
    pub rejected: Vec<RejectedClaim>,
    pub matches: Vec<DivergentMatch>,
}

#[derive(Clone, Copy, Default, Debug)]
struct Flags {
    host: bool,
    guest: bool,
}

type ClaimTable = BTreeMap<(usize, usize), BTreeMap<u32, Flags>>;

/// Reconcile interview reports into an event log covering `n_days` days.
pub fn reconcile(
    reports: &[RawReport],
    families: &[Family],
    n_days: usize,
    day_zero: Option<chrono::NaiveDate>,
    seed: u64,
) -> Result<Reconciled> {
    let (mask, _) = build_observation_mask(reports, families, n_days)?;
    let index = family_index(families);
    let mut table = ClaimTable::new();
    let mut rejected = Vec::new();

    for r in reports {
        let reporter = index[r.reporter.as_str()];
        for c in &r.claims {
            let (host, guest) = (index[c.host.as_str()], index[c.guest.as_str()]);
            let reason = if host == guest {
                Some("host and guest are the same family")
            } else if !r.covered_days.contains(&c.day) {
                Some("claim day not covered by the report")
            } else if c.day < 0 || c.day as usize >= n_days {
                Some("claim day outside the study period")
            } else if (c.role == Role::AsHost && reporter != host)
                || (c.role == Role::AsGuest && reporter != guest)
            {
                Some("reporter is not the claimed party")
            } else if !mask.observed(host, guest, c.day as usize) {
                Some("claim day outside both parties' coverage")
            } else {
                None
            };
            if let Some(reason) = reason {
                log::warn!("rejected claim from {}: {:?} ({reason})", r.reporter, c);
                rejected.push(RejectedClaim {
                    reporter: r.reporter.clone(),
                    claim: c.clone(),
                    reason: reason.to_string(),
                });
                continue;
            }
            let flags = table
                .entry((host, guest))
                .or_default()
                .entry(c.day as u32)
                .or_default();
            match c.role {
                Role::AsHost => flags.host = true,
                Role::AsGuest => flags.guest = true,
            }
        }
    }

    let (events, matches) = resolve(&table, &mask, seed);
    let log = EventLog::new(day_zero, families.to_vec(), mask, events)?;
    Ok(Reconciled {
        log,
        rejected,
        matches,
    })
}

impl EventLog {
    /// Re-apply reconciliation to this log's events. A reconciled log is a
    /// fixed point.
    pub fn reconcile(&self, seed: u64) -> Result<Reconciled> {
        let mut table = ClaimTable::new();
        for (i, j, t, source) in self.iter_events() {
            let flags = Flags {
                host: matches!(source, Source::HostReported | Source::Both),
                guest: matches!(source, Source::GuestOnly | Source::Both),
            };
            table.entry((i, j)).or_default().insert(t as u32, flags);
        }
        let (events, matches) = resolve(&table, self.mask(), seed);
        let log = EventLog::new(
            self.day_zero(),
            self.families().to_vec(),
            self.mask().clone(),
            events,
        )?;
        Ok(Reconciled {
            log,
            rejected: Vec::new(),
            matches,
        })
    }
}

fn resolve(
    table: &ClaimTable,
    mask: &ObservationMask,
    seed: u64,
) -> (Vec<(usize, usize, usize, Source)>, Vec<DivergentMatch>) {
    let mut rng = rng::stream(seed, 0);
    let mut events = Vec::new();
    let mut matches = Vec::new();

    for (&(host, guest), days) in table {
        let all_days: Vec<u32> = days.keys().copied().collect();
        let host_only: Vec<u32> = days
            .iter()
            .filter(|(_, f)| f.host && !f.guest)
            .map(|(&d, _)| d)
            .collect();
        let guest_only: Vec<u32> = days
            .iter()
            .filter(|(_, f)| f.guest && !f.host)
            .map(|(&d, _)| d)
            .collect();

        let mut guest_taken = vec![false; guest_only.len()];
        let mut merged: BTreeMap<u32, u32> = BTreeMap::new(); // claim day -> chosen day
        for &h in &host_only {
            let mut best: Option<(u32, usize)> = None;
            for (k, &g) in guest_only.iter().enumerate() {
                if guest_taken[k] {
                    continue;
                }
                let gap = h.abs_diff(g);
                if gap == 0 || gap > MAX_DIVERGENCE {
                    continue;
                }
                let (lo, hi) = (h.min(g), h.max(g));
                if all_days.iter().any(|&d| d > lo && d < hi) {
                    continue;
                }
                // Both dates consistent with the other party's silence means
                // two distinct events are as plausible as one.
                let contradicted = mask.covers(guest, h as usize) || mask.covers(host, g as usize);
                if !contradicted {
                    continue;
                }
                if best.is_none_or(|(bg, _)| gap < bg) {
                    best = Some((gap, k));
                }
            }
            if let Some((_, k)) = best {
                guest_taken[k] = true;
                let g = guest_only[k];
                let chosen = if rng.gen_bool(0.5) { h } else { g };
                merged.insert(h, chosen);
                merged.insert(g, chosen);
                matches.push(DivergentMatch {
                    host,
                    guest,
                    host_day: h,
                    guest_day: g,
                    chosen,
                });
            }
        }

        for (&d, f) in days {
            match merged.get(&d) {
                Some(&chosen) if chosen == d => {
                    events.push((host, guest, d as usize, Source::Both));
                }
                Some(_) => {}
                None => {
                    let source = match (f.host, f.guest) {
                        (true, true) => Source::Both,
                        (true, false) => Source::HostReported,
                        _ => Source::GuestOnly,
                    };
                    events.push((host, guest, d as usize, source));
                }
            }
        }
    }
    (events, matches)
}
