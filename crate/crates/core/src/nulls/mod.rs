//! Null-model hierarchy for hosting data.
//!
//! All three levels share one generative skeleton. On day `t` host `i` throws
//! a party with probability `min(1, q_i · m(t))`, where `m` is the seasonal
//! multiplier; guests are then drawn according to the level:
//!
//! * homogeneous: party size from the host's empirical size distribution,
//!   guests uniform without replacement;
//! * kin-heterogeneous: each guest attends independently with a rate shared by
//!   all guests at the same mean relatedness to the host;
//! * full-heterogeneous: each guest attends independently with its own rate.
//!
//! The truth is then degraded by the reporting model: events on days the host
//! covered are kept, events seen only through the guest's interview survive
//! with probability `1 − p_omit`, and unobservable events are dropped.
//!
//! Parameters are estimated from host-covered data only, which the reporting
//! model treats as complete.

mod calibrate;
mod envelope;
mod simulate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_store::{EventLog, Family, ObservationMask};
use crate::pedigree_geo::KinshipMatrix;

pub use calibrate::{calibrate_p_omit, Calibration};
pub use envelope::{envelope, Envelope, EnvelopeRow, NullConfig, NullDistribution, Statistic, MIN_REPS};
pub use simulate::{simulate, simulate_replicate, SimulationStats};
pub(crate) use simulate::simulate_truth;

const FORMAT: &str = "condrecip.nullmodel/1";

/// Half-width of the seasonal smoothing window.
const SEASON_HALF_WIDTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullLevel {
    Homogeneous,
    KinHeterogeneous,
    FullHeterogeneous,
}

impl NullLevel {
    pub const ALL: [NullLevel; 3] = [
        NullLevel::Homogeneous,
        NullLevel::KinHeterogeneous,
        NullLevel::FullHeterogeneous,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NullLevel::Homogeneous => "homogeneous",
            NullLevel::KinHeterogeneous => "kin_heterogeneous",
            NullLevel::FullHeterogeneous => "full_heterogeneous",
        }
    }
}

impl fmt::Display for NullLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NullLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" | "homo" => Ok(NullLevel::Homogeneous),
            "kin_heterogeneous" | "kin" => Ok(NullLevel::KinHeterogeneous),
            "full_heterogeneous" | "full" => Ok(NullLevel::FullHeterogeneous),
            other => Err(Error::Parse(format!("unknown null level `{other}`"))),
        }
    }
}

/// Daily activity multipliers, mean one over the study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonProfile {
    pub daily: Vec<f64>,
    /// Mean of `daily` within each 7-day week.
    pub weekly: Vec<f64>,
}

impl SeasonProfile {
    pub fn flat(n_days: usize) -> Self {
        Self::from_daily(vec![1.0; n_days])
    }

    pub fn from_daily(daily: Vec<f64>) -> Self {
        let weekly = daily
            .chunks(7)
            .map(|w| w.iter().sum::<f64>() / w.len() as f64)
            .collect();
        SeasonProfile { daily, weekly }
    }

    /// One multiplier per week, repeated over its days.
    pub fn from_weekly(weekly: &[f64], n_days: usize) -> Self {
        Self::from_daily((0..n_days).map(|t| weekly[(t / 7).min(weekly.len() - 1)]).collect())
    }

    pub fn n_days(&self) -> usize {
        self.daily.len()
    }

    #[inline]
    pub fn at(&self, t: usize) -> f64 {
        self.daily[t]
    }

    /// Ratio of host-covered events to host-covered pair-days over a 7-day
    /// boxcar, relative to the study-wide ratio.
    pub fn fit(log: &EventLog) -> Self {
        let n = log.n_families();
        let t_max = log.n_days();
        let mask = log.mask();
        let mut events = vec![0f64; t_max];
        let mut risk = vec![0f64; t_max];
        for (t, r) in risk.iter_mut().enumerate() {
            *r = (0..n).filter(|&i| mask.covers(i, t)).count() as f64 * (n.saturating_sub(1)) as f64;
        }
        for (i, _, t, _) in log.iter_events() {
            if mask.covers(i, t) {
                events[t] += 1.0;
            }
        }
        let (e_all, r_all): (f64, f64) = (events.iter().sum(), risk.iter().sum());
        if e_all == 0.0 || r_all == 0.0 {
            return Self::flat(t_max);
        }
        let global = e_all / r_all;
        let daily = (0..t_max)
            .map(|t| {
                let lo = t.saturating_sub(SEASON_HALF_WIDTH);
                let hi = (t + SEASON_HALF_WIDTH).min(t_max - 1);
                let e: f64 = events[lo..=hi].iter().sum();
                let r: f64 = risk[lo..=hi].iter().sum();
                if r > 0.0 {
                    e / r / global
                } else {
                    1.0
                }
            })
            .collect();
        Self::from_daily(daily)
    }
}

/// Guests sharing one mean relatedness to a host.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinStratum {
    pub r: f64,
    pub guests: Vec<usize>,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HostParams {
    pub covered_days: usize,
    /// Host-covered days with at least one guest.
    pub parties: u64,
    /// Host-covered events.
    pub events: u64,
    /// `Σ m(t)` over host-covered days.
    pub exposure: f64,
    pub party_rate: f64,
    pub excluded: bool,
    /// Marginal probability that each guest attends a party.
    pub attendance: Vec<f64>,
    /// Homogeneous level: `party_sizes[k]` is `P(size = k)`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub party_sizes: Vec<f64>,
    /// Kin level only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strata: Vec<KinStratum>,
}

impl HostParams {
    fn mean_party_size(&self) -> f64 {
        if self.party_sizes.is_empty() {
            self.attendance.iter().sum()
        } else {
            self.party_sizes.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
        }
    }
}

/// A fitted null model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullModel {
    pub format: String,
    pub level: NullLevel,
    pub families: Vec<Family>,
    pub season: SeasonProfile,
    pub hosts: Vec<HostParams>,
    pub p_omit: Option<f64>,
    pub p_omit_se: Option<f64>,
    pub calibration_seed: Option<u64>,
}

impl NullModel {
    pub fn n_families(&self) -> usize {
        self.families.len()
    }

    pub fn n_days(&self) -> usize {
        self.season.n_days()
    }

    pub fn with_p_omit(mut self, p: f64) -> Self {
        self.p_omit = Some(p);
        self.p_omit_se = None;
        self.calibration_seed = None;
        self
    }

    pub fn with_calibration(mut self, c: &Calibration) -> Self {
        self.p_omit = Some(c.p_omit);
        self.p_omit_se = c.se;
        self.calibration_seed = Some(c.seed);
        self
    }

    /// Multiply every party rate by `factor`.
    pub fn scale_party_rates(&mut self, factor: f64) {
        for h in &mut self.hosts {
            h.party_rate *= factor;
        }
    }

    /// Probability that `i` hosts a party on day `t`, and whether it was capped.
    #[inline]
    pub(crate) fn party_prob(&self, i: usize, t: usize) -> (f64, bool) {
        let p = self.hosts[i].party_rate * self.season.at(t);
        if p > 1.0 {
            (1.0, true)
        } else {
            (p, false)
        }
    }

    /// Marginal truth probability that `i` hosts `j` on day `t`.
    pub fn pair_prob(&self, i: usize, j: usize, t: usize) -> f64 {
        let h = &self.hosts[i];
        if h.excluded || i == j {
            return 0.0;
        }
        let inclusion = if h.party_sizes.is_empty() {
            h.attendance[j]
        } else {
            h.mean_party_size() / (self.n_families() - 1) as f64
        };
        self.party_prob(i, t).0 * inclusion
    }

    /// Exact expected realized event count under `mask` at omission rate `p`.
    pub fn expected_event_count(&self, mask: &ObservationMask, p: f64) -> f64 {
        let n = self.n_families();
        let mut total = 0.0;
        for i in 0..n {
            for t in 0..self.n_days() {
                let host_cov = mask.covers(i, t);
                for j in (0..n).filter(|&j| j != i) {
                    let w = if host_cov {
                        1.0
                    } else if mask.covers(j, t) {
                        1.0 - p
                    } else {
                        continue;
                    };
                    total += w * self.pair_prob(i, j, t);
                }
            }
        }
        total
    }

    pub(crate) fn check_mask(&self, mask: &ObservationMask) -> Result<()> {
        if mask.n_families() != self.n_families() || mask.n_days() != self.n_days() {
            return Err(Error::Invalid(format!(
                "mask is {}×{} but null model is {}×{}",
                mask.n_families(),
                mask.n_days(),
                self.n_families(),
                self.n_days()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: NullModel = serde_json::from_str(text)?;
        if m.format != FORMAT {
            return Err(Error::Parse(format!("unsupported null model format `{}`", m.format)));
        }
        if m.hosts.len() != m.families.len() || m.hosts.iter().any(|h| h.attendance.len() != m.families.len()) {
            return Err(Error::Parse("null model tables do not match family count".into()));
        }
        Ok(m)
    }
}

/// Build a model from explicit parameters; used by generators and tests.
pub fn model_from_rates(
    level: NullLevel,
    families: Vec<Family>,
    season: SeasonProfile,
    party_rates: Vec<f64>,
    attendance: Vec<Vec<f64>>,
    p_omit: Option<f64>,
) -> NullModel {
    let hosts = party_rates
        .into_iter()
        .zip(attendance)
        .map(|(q, a)| HostParams {
            covered_days: season.n_days(),
            parties: 0,
            events: 0,
            exposure: 0.0,
            party_rate: q,
            excluded: false,
            attendance: a,
            party_sizes: Vec::new(),
            strata: Vec::new(),
        })
        .collect();
    NullModel {
        format: FORMAT.into(),
        level,
        families,
        season,
        hosts,
        p_omit,
        p_omit_se: None,
        calibration_seed: None,
    }
}

/// Fit the sufficient statistics of `level` from windowed data.
pub fn fit_null(log: &EventLog, kin: &KinshipMatrix, level: NullLevel) -> Result<NullModel> {
    let n = log.n_families();
    if n < 2 {
        return Err(Error::Invalid("a null model needs at least two families".into()));
    }
    if log.event_count() == 0 {
        return Err(Error::Invalid("cannot fit a null model to an empty event log".into()));
    }
    if level == NullLevel::KinHeterogeneous && kin.len() != n {
        return Err(Error::Invalid(format!(
            "kinship matrix has {} families, log has {n}",
            kin.len()
        )));
    }
    let mask = log.mask();
    let season = SeasonProfile::fit(log);
    let mut hosts = Vec::with_capacity(n);
    for i in 0..n {
        let cov = mask.coverage(i);
        let covered_days = cov.count();
        let exposure: f64 = cov.iter_ones().map(|t| season.at(t)).sum();
        // Host-covered events per guest and per day.
        let mut per_guest = vec![0u64; n];
        let mut per_day: BTreeMap<usize, usize> = BTreeMap::new();
        for j in (0..n).filter(|&j| j != i) {
            for e in log.pair_events(i, j) {
                let t = e.day as usize;
                if cov.get(t) {
                    per_guest[j] += 1;
                    *per_day.entry(t).or_default() += 1;
                }
            }
        }
        let parties = per_day.len() as u64;
        let events: u64 = per_guest.iter().sum();
        let excluded = covered_days == 0;
        if excluded {
            log::warn!("family `{}` has no covered days; excluded as a host", log.families()[i].id);
        }
        let party_rate = if excluded || exposure <= 0.0 {
            0.0
        } else {
            parties as f64 / exposure
        };
        let denom = parties.max(1) as f64;
        let mut attendance = vec![0.0; n];
        let mut party_sizes = Vec::new();
        let mut strata = Vec::new();
        match level {
            NullLevel::FullHeterogeneous => {
                for j in 0..n {
                    attendance[j] = per_guest[j] as f64 / denom;
                }
            }
            NullLevel::Homogeneous => {
                let a = events as f64 / (denom * (n - 1) as f64);
                for (j, x) in attendance.iter_mut().enumerate() {
                    if j != i {
                        *x = a;
                    }
                }
                party_sizes = vec![0.0; n];
                for &size in per_day.values() {
                    party_sizes[size] += 1.0 / denom;
                }
                if parties == 0 {
                    party_sizes.clear();
                    party_sizes.push(1.0);
                }
            }
            NullLevel::KinHeterogeneous => {
                let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
                for j in (0..n).filter(|&j| j != i) {
                    groups.entry(kin.get(i, j).to_bits()).or_default().push(j);
                }
                for (bits, guests) in groups {
                    let h: u64 = guests.iter().map(|&j| per_guest[j]).sum();
                    let rate = h as f64 / (denom * guests.len() as f64);
                    for &j in &guests {
                        attendance[j] = rate;
                    }
                    strata.push(KinStratum {
                        r: f64::from_bits(bits),
                        guests,
                        rate,
                    });
                }
            }
        }
        hosts.push(HostParams {
            covered_days,
            parties,
            events,
            exposure,
            party_rate,
            excluded,
            attendance,
            party_sizes,
            strata,
        });
    }
    Ok(NullModel {
        format: FORMAT.into(),
        level,
        families: log.families().to_vec(),
        season,
        hosts,
        p_omit: None,
        p_omit_se: None,
        calibration_seed: None,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::event_store::{test_support::families, DayMask, Source};
    use rand::Rng;

    /// Random log over a patchy mask, dense enough to exercise every level.
    pub(crate) fn patchy_log(n: usize, n_days: usize, seed: u64) -> EventLog {
        let mut rng = crate::rng::stream(seed, 0);
        let mut cov = vec![DayMask::new(n_days); n];
        for c in &mut cov {
            for t in 0..n_days {
                if rng.gen::<f64>() < 0.5 {
                    c.set(t, true);
                }
            }
        }
        let mask = ObservationMask::new(cov, n_days).unwrap();
        let mut ev = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for t in 0..n_days {
                    if i != j && mask.observed(i, j, t) && rng.gen::<f64>() < 0.03 + 0.01 * ((i + j) % 3) as f64 {
                        let src = if mask.covers(i, t) { Source::HostReported } else { Source::GuestOnly };
                        ev.push((i, j, t, src));
                    }
                }
            }
        }
        EventLog::new(None, families(n), mask, ev).unwrap()
    }

    #[test]
    fn season_profile_has_unit_mean_weighting() {
        let log = patchy_log(6, 60, 1);
        let s = SeasonProfile::fit(&log);
        assert_eq!(s.daily.len(), 60);
        assert_eq!(s.weekly.len(), 9);
        assert!(s.daily.iter().all(|&m| m >= 0.0 && m.is_finite()));
    }

    #[test]
    fn expected_host_covered_count_matches_data() {
        let log = patchy_log(6, 60, 2);
        let kin = KinshipMatrix::zeros(log.families().iter().map(|f| f.id.clone()).collect());
        for level in NullLevel::ALL {
            let m = fit_null(&log, &kin, level).unwrap();
            // With p_omit = 1 only host-covered events remain.
            let expected = m.expected_event_count(log.mask(), 1.0);
            let data: u64 = m.hosts.iter().map(|h| h.events).sum();
            assert!((expected - data as f64).abs() < 1e-6 * data as f64, "{level}: {expected} vs {data}");
        }
    }

    #[test]
    fn homogeneous_hosts_with_equal_rates_are_identical() {
        let log = patchy_log(5, 40, 3);
        let kin = KinshipMatrix::zeros(log.families().iter().map(|f| f.id.clone()).collect());
        let m = fit_null(&log, &kin, NullLevel::Homogeneous).unwrap();
        for h in &m.hosts {
            let rates: Vec<f64> = h.attendance.iter().copied().filter(|&a| a > 0.0).collect();
            assert!(rates.windows(2).all(|w| w[0] == w[1]));
            assert!((h.party_sizes.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kin_strata_cover_each_guest_once_and_share_rates() {
        let log = patchy_log(5, 40, 4);
        let ids: Vec<String> = log.families().iter().map(|f| f.id.clone()).collect();
        let mut v = vec![0.0; 25];
        for (a, b, r) in [(0, 1, 0.5), (0, 2, 0.5), (1, 2, 0.25), (3, 4, 0.125)] {
            v[a * 5 + b] = r;
            v[b * 5 + a] = r;
        }
        let kin = KinshipMatrix::new(ids, v).unwrap();
        let m = fit_null(&log, &kin, NullLevel::KinHeterogeneous).unwrap();
        for (i, h) in m.hosts.iter().enumerate() {
            let mut seen: Vec<usize> = h.strata.iter().flat_map(|s| s.guests.clone()).collect();
            seen.sort();
            assert_eq!(seen, (0..5).filter(|&j| j != i).collect::<Vec<_>>());
        }
        // Guests 1 and 2 share r = 0.5 to host 0.
        assert_eq!(m.hosts[0].attendance[1], m.hosts[0].attendance[2]);
    }

    #[test]
    fn uncovered_host_is_excluded() {
        let mut cov = vec![DayMask::full(10); 3];
        cov[2] = DayMask::new(10);
        let mask = ObservationMask::new(cov, 10).unwrap();
        let log = EventLog::new(None, families(3), mask, [(0, 1, 2, Source::HostReported)]).unwrap();
        let kin = KinshipMatrix::zeros(log.families().iter().map(|f| f.id.clone()).collect());
        let m = fit_null(&log, &kin, NullLevel::FullHeterogeneous).unwrap();
        assert!(m.hosts[2].excluded);
        assert_eq!(m.hosts[2].party_rate, 0.0);
        assert!(!m.hosts[0].excluded);
    }

    #[test]
    fn json_roundtrip() {
        let log = patchy_log(4, 20, 5);
        let kin = KinshipMatrix::zeros(log.families().iter().map(|f| f.id.clone()).collect());
        let m = fit_null(&log, &kin, NullLevel::KinHeterogeneous).unwrap().with_p_omit(0.3);
        let back = NullModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn level_names_parse() {
        for l in NullLevel::ALL {
            assert_eq!(l.as_str().parse::<NullLevel>().unwrap(), l);
        }
        assert!("nope".parse::<NullLevel>().is_err());
    }
}
