use serde::Serialize;

use super::EventLog;

/// Events over risk days.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rate {
    pub events: u64,
    pub risk: u64,
}

impl Rate {
    pub fn value(&self) -> Option<f64> {
        (self.risk > 0).then(|| self.events as f64 / self.risk as f64)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DyadRate {
    pub host: usize,
    pub guest: usize,
    pub rate: Rate,
}

#[derive(Clone, Debug, Serialize)]
pub struct SummaryStats {
    pub overall: Rate,
    /// Per family as host.
    pub hosting: Vec<Rate>,
    /// Per family as guest.
    pub attendance: Vec<Rate>,
    pub dyads: Vec<DyadRate>,
    /// Ordered pairs with at least one event.
    pub active_dyads: usize,
}

impl SummaryStats {
    pub fn overall_rate(&self) -> f64 {
        self.overall.value().unwrap_or(0.0)
    }
}

pub fn summary_stats(log: &EventLog) -> SummaryStats {
    let n = log.n_families();
    let mut hosting = vec![Rate { events: 0, risk: 0 }; n];
    let mut attendance = hosting.clone();
    let mut dyads = Vec::with_capacity(n * n.saturating_sub(1));
    let mut overall = Rate { events: 0, risk: 0 };
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let rate = Rate {
                events: log.pair_events(i, j).len() as u64,
                risk: log.mask().pair_risk(i, j) as u64,
            };
            for agg in [&mut hosting[i], &mut attendance[j], &mut overall] {
                agg.events += rate.events;
                agg.risk += rate.risk;
            }
            dyads.push(DyadRate {
                host: i,
                guest: j,
                rate,
            });
        }
    }
    let active_dyads = dyads.iter().filter(|d| d.rate.events > 0).count();
    SummaryStats {
        overall,
        hosting,
        attendance,
        dyads,
        active_dyads,
    }
}
