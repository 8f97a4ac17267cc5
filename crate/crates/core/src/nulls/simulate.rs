use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use super::NullModel;
use crate::error::{Error, Result};
use crate::event_store::{EventLog, ObservationMask, Source};
use crate::rng::{self, StreamRng};

/// Truth of one replicate before the omission draw is applied.
///
/// Every guest-only observable truth event carries its own uniform, so the
/// realized log at any `p_omit` is a deterministic function of the replicate.
#[derive(Clone, Debug, Default)]
pub(crate) struct RawReplicate {
    pub truth: Vec<(u32, u32, u32)>,
    pub host_covered: Vec<(u32, u32, u32)>,
    pub guest_only: Vec<(u32, u32, u32, f64)>,
    pub stats: SimulationStats,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SimulationStats {
    /// Host-days whose party probability exceeded one.
    pub capped: u64,
    /// Drawn party sizes larger than the guest pool.
    pub truncated: u64,
}

impl RawReplicate {
    #[cfg(test)]
    /// Realized event count at omission rate `p`.
    pub fn count_at(&self, p: f64) -> usize {
        self.host_covered.len() + self.guest_only.iter().filter(|e| e.3 >= p).count()
    }

    pub fn realize(&self, model: &NullModel, mask: &ObservationMask, p: f64) -> Result<EventLog> {
        let events = self
            .host_covered
            .iter()
            .map(|&(i, j, t)| (i as usize, j as usize, t as usize, Source::HostReported))
            .chain(
                self.guest_only
                    .iter()
                    .filter(|e| e.3 >= p)
                    .map(|&(i, j, t, _)| (i as usize, j as usize, t as usize, Source::GuestOnly)),
            );
        EventLog::new(None, model.families.clone(), mask.clone(), events)
    }
}

/// Draw the truth day by day. After the base draws for day `t`, `extra` may
/// append further `(host, guest)` events for that day; it must not repeat a
/// pair already present.
pub(crate) fn simulate_truth<F>(model: &NullModel, mask: &ObservationMask, rng: &mut StreamRng, mut extra: F) -> RawReplicate
where
    F: FnMut(usize, &mut StreamRng, &mut Vec<(usize, usize)>),
{
    let n = model.n_families();
    let mut out = RawReplicate::default();
    let mut day = Vec::new();
    for t in 0..model.n_days() {
        day.clear();
        for (i, h) in model.hosts.iter().enumerate() {
            if h.excluded {
                continue;
            }
            let (p, capped) = model.party_prob(i, t);
            let party = rng.gen::<f64>() < p;
            if capped {
                out.stats.capped += 1;
            }
            if !party {
                continue;
            }
            if h.party_sizes.is_empty() {
                for (j, &a) in h.attendance.iter().enumerate() {
                    if j != i && rng.gen::<f64>() < a {
                        day.push((i, j));
                    }
                }
            } else {
                let u: f64 = rng.gen();
                let mut size = h.party_sizes.len() - 1;
                let mut acc = 0.0;
                for (k, &pk) in h.party_sizes.iter().enumerate() {
                    acc += pk;
                    if u < acc {
                        size = k;
                        break;
                    }
                }
                if size > n - 1 {
                    out.stats.truncated += 1;
                    size = n - 1;
                }
                let mut picked: Vec<usize> = index::sample(rng, n - 1, size)
                    .into_iter()
                    .map(|k| if k >= i { k + 1 } else { k })
                    .collect();
                picked.sort_unstable();
                day.extend(picked.into_iter().map(|j| (i, j)));
            }
        }
        extra(t, rng, &mut day);
        for &(i, j) in &day {
            let ev = (i as u32, j as u32, t as u32);
            out.truth.push(ev);
            if mask.covers(i, t) {
                out.host_covered.push(ev);
            } else if mask.covers(j, t) {
                out.guest_only.push((ev.0, ev.1, ev.2, rng.gen()));
            }
        }
    }
    out
}

/// Replicate `k` of the stream family `seed`, before omission.
pub(crate) fn raw_replicate(model: &NullModel, mask: &ObservationMask, seed: u64, k: u64) -> RawReplicate {
    let mut rng = rng::stream(seed, k);
    simulate_truth(model, mask, &mut rng, |_, _, _| {})
}

/// Replicate `k` of `seed`: simulated truth, reported and windowed by `mask`.
pub fn simulate_replicate(model: &NullModel, mask: &ObservationMask, seed: u64, k: u64) -> Result<(EventLog, SimulationStats)> {
    let p = model.p_omit.ok_or(Error::Uncalibrated)?;
    model.check_mask(mask)?;
    let raw = raw_replicate(model, mask, seed, k);
    if raw.stats.truncated > 0 {
        log::warn!("{} party sizes truncated to the guest pool", raw.stats.truncated);
    }
    Ok((raw.realize(model, mask, p)?, raw.stats))
}

/// One simulated dataset observed through `mask`.
pub fn simulate(model: &NullModel, mask: &ObservationMask, seed: u64) -> Result<EventLog> {
    Ok(simulate_replicate(model, mask, seed, 0)?.0)
}
