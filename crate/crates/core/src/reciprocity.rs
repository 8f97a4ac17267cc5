//! Windowed conditional-action reciprocity.
//!
//! For an ordered pair `(i, j)` and lag `Δ`, four tallies are taken over all
//! day pairs `(t, t + Δ)`:
//!
//! * `hh = Σ h_ij(t) h_ji(t+Δ)`
//! * `oo = Σ o_ij(t) o_ji(t+Δ)`
//! * `ho = Σ h_ij(t) o_ji(t+Δ)`
//! * `oh = Σ o_ij(t) h_ji(t+Δ)`
//!
//! and `R̂_ij(Δ) = (hh/oo)·(oo/ho)·(oo/oh) = hh·oo / (ho·oh)`: the joint rate over
//! the product of marginal rates, each computed only over windows where the
//! relevant events were observable. `R̂` is undefined when `oo`, `ho` or `oh`
//! is zero. Lag zero (same-day mutual hosting) is tallied but kept out of the
//! curve.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_store::{EventLog, ObservationMask};
use crate::pedigree_geo::KinshipMatrix;
use crate::stats::add_one_p;

pub const DEFAULT_MAX_LAG: usize = 90;
pub const DEFAULT_WINDOW: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tallies {
    pub hh: u64,
    pub oo: u64,
    pub ho: u64,
    pub oh: u64,
}

impl Tallies {
    pub fn estimate(&self) -> Option<f64> {
        if self.oo == 0 || self.ho == 0 || self.oh == 0 {
            None
        } else {
            Some(self.hh as f64 * self.oo as f64 / (self.ho as f64 * self.oh as f64))
        }
    }
}

impl std::ops::AddAssign for Tallies {
    fn add_assign(&mut self, o: Tallies) {
        self.hh += o.hh;
        self.oo += o.oo;
        self.ho += o.ho;
        self.oh += o.oh;
    }
}

/// `Σ_t o_ij(t) o_ji(t+Δ)` for every ordered pair and lag. Depends only on
/// the mask, so it is shared by every replicate observed through that mask.
#[derive(Clone, Debug)]
pub struct MaskOverlap {
    n: usize,
    max_lag: usize,
    oo: Vec<u32>,
}

impl MaskOverlap {
    pub fn new(mask: &ObservationMask, max_lag: usize) -> Self {
        let n = mask.n_families();
        let stride = max_lag + 1;
        let rows: Vec<Vec<u32>> = (0..n * n)
            .into_par_iter()
            .map(|p| {
                let (i, j) = (p / n, p % n);
                if i == j {
                    vec![0; stride]
                } else {
                    pair_overlap(mask, i, j, max_lag)
                }
            })
            .collect();
        MaskOverlap {
            n,
            max_lag,
            oo: rows.concat(),
        }
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, lag: usize) -> u64 {
        self.oo[(i * self.n + j) * (self.max_lag + 1) + lag] as u64
    }
}

fn pair_overlap(mask: &ObservationMask, i: usize, j: usize, max_lag: usize) -> Vec<u32> {
    let ij = mask.pair_mask(i, j);
    let ji = mask.pair_mask(j, i);
    let days: Vec<usize> = ij.iter_ones().collect();
    let t_max = mask.n_days();
    (0..=max_lag)
        .map(|lag| {
            days.iter()
                .filter(|&&t| t + lag < t_max && ji.get(t + lag))
                .count() as u32
        })
        .collect()
}

/// Tallies of one ordered pair at lags `0..=max_lag`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCurve {
    pub host: usize,
    pub guest: usize,
    pub tallies: Vec<Tallies>,
}

impl PairCurve {
    pub fn max_lag(&self) -> usize {
        self.tallies.len() - 1
    }

    /// `R̂_ij(lag)` for `lag ≥ 1`.
    pub fn value(&self, lag: usize) -> Option<f64> {
        if lag == 0 || lag > self.max_lag() {
            None
        } else {
            self.tallies[lag].estimate()
        }
    }

    pub fn same_day(&self) -> Tallies {
        self.tallies[0]
    }

    /// Tallies summed over lags `1..=window`.
    pub fn pooled(&self, window: usize) -> Tallies {
        let mut acc = Tallies::default();
        for t in &self.tallies[1..=window.min(self.max_lag())] {
            acc += *t;
        }
        acc
    }

    /// Short-window value: ratio of tallies pooled over `1..=window`.
    pub fn window_value(&self, window: usize) -> Option<f64> {
        self.pooled(window).estimate()
    }
}

/// Reciprocity curve of pair `(i, j)`: does `i` hosting `j` raise the chance
/// that `j` hosts `i` `Δ` days later?
pub fn pair_reciprocity(log: &EventLog, i: usize, j: usize, max_lag: usize) -> PairCurve {
    assert_ne!(i, j, "reciprocity needs two distinct families");
    let oo = pair_overlap(log.mask(), i, j, max_lag);
    build_curve(log, i, j, max_lag, |lag| oo[lag] as u64)
}

fn build_curve(log: &EventLog, i: usize, j: usize, max_lag: usize, oo: impl Fn(usize) -> u64) -> PairCurve {
    let t_max = log.n_days();
    let mask = log.mask();
    let fwd = log.pair_events(i, j);
    let back = log.pair_events(j, i);
    let mut tallies: Vec<Tallies> = (0..=max_lag)
        .map(|lag| Tallies {
            oo: oo(lag),
            ..Tallies::default()
        })
        .collect();
    for e in fwd {
        let t = e.day as usize;
        for (lag, tally) in tallies.iter_mut().enumerate() {
            if t + lag >= t_max {
                break;
            }
            if mask.observed(j, i, t + lag) {
                tally.ho += 1;
            }
        }
        for f in back {
            let s = f.day as usize;
            if s >= t && s - t <= max_lag {
                tallies[s - t].hh += 1;
            }
        }
    }
    for f in back {
        let s = f.day as usize;
        for (lag, tally) in tallies.iter_mut().enumerate() {
            if lag > s {
                break;
            }
            if mask.observed(i, j, s - lag) {
                tally.oh += 1;
            }
        }
    }
    PairCurve {
        host: i,
        guest: j,
        tallies,
    }
}

/// Ordered pairs with at least one event in each direction.
pub fn reciprocal_pairs(log: &EventLog) -> Vec<(usize, usize)> {
    let n = log.n_families();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && !log.pair_events(i, j).is_empty() && !log.pair_events(j, i).is_empty() {
                out.push((i, j));
            }
        }
    }
    out
}

/// Curves for every reciprocal pair, computed in parallel.
pub fn pair_curves(log: &EventLog, overlap: &MaskOverlap) -> Vec<PairCurve> {
    let max_lag = overlap.max_lag();
    reciprocal_pairs(log)
        .into_par_iter()
        .map(|(i, j)| build_curve(log, i, j, max_lag, |lag| overlap.get(i, j, lag)))
        .collect()
}

/// Set of pairs averaged over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClassSel {
    All,
    CloseKin,
    NotCloseKin,
}

impl PairClassSel {
    pub const ALL: [PairClassSel; 3] = [PairClassSel::All, PairClassSel::CloseKin, PairClassSel::NotCloseKin];

    pub fn contains(self, kin: &KinshipMatrix, i: usize, j: usize) -> bool {
        match self {
            PairClassSel::All => true,
            PairClassSel::CloseKin => kin.class(i, j).is_close_kin(),
            PairClassSel::NotCloseKin => !kin.class(i, j).is_close_kin(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PairClassSel::All => "all",
            PairClassSel::CloseKin => "close_kin",
            PairClassSel::NotCloseKin => "not_close_kin",
        }
    }
}

impl fmt::Display for PairClassSel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairClassSel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(PairClassSel::All),
            "close_kin" => Ok(PairClassSel::CloseKin),
            "not_close_kin" => Ok(PairClassSel::NotCloseKin),
            other => Err(Error::Parse(format!("unknown pair class `{other}`"))),
        }
    }
}

/// Per-pair null expectations `⟨R̂_ij(Δ)⟩_null` and `⟨R̂_ij^W⟩_null`, each
/// averaged over the replicates in which the pair's value was defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullMeans {
    n: usize,
    max_lag: usize,
    window: usize,
    lag_sum: Vec<f64>,
    lag_count: Vec<u32>,
    window_sum: Vec<f64>,
    window_count: Vec<u32>,
}

impl NullMeans {
    pub fn empty(n: usize, max_lag: usize, window: usize) -> Self {
        NullMeans {
            n,
            max_lag,
            window,
            lag_sum: vec![0.0; n * n * (max_lag + 1)],
            lag_count: vec![0; n * n * (max_lag + 1)],
            window_sum: vec![0.0; n * n],
            window_count: vec![0; n * n],
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// Fold in one replicate's curves.
    pub fn add_replicate(&mut self, curves: &[PairCurve]) {
        for c in curves {
            let p = c.host * self.n + c.guest;
            for lag in 1..=self.max_lag.min(c.max_lag()) {
                if let Some(v) = c.value(lag) {
                    self.lag_sum[p * (self.max_lag + 1) + lag] += v;
                    self.lag_count[p * (self.max_lag + 1) + lag] += 1;
                }
            }
            if let Some(v) = c.window_value(self.window) {
                self.window_sum[p] += v;
                self.window_count[p] += 1;
            }
        }
    }

    pub fn lag_mean(&self, i: usize, j: usize, lag: usize) -> Option<f64> {
        let k = (i * self.n + j) * (self.max_lag + 1) + lag;
        (lag <= self.max_lag && self.lag_count[k] > 0).then(|| self.lag_sum[k] / self.lag_count[k] as f64)
    }

    pub fn window_mean(&self, i: usize, j: usize) -> Option<f64> {
        let k = i * self.n + j;
        (self.window_count[k] > 0).then(|| self.window_sum[k] / self.window_count[k] as f64)
    }
}

/// How pairs are weighted in a class average.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Each pair one vote.
    #[default]
    Unweighted,
    /// Weighted by the pair's observed trigger tally `ho`.
    Tally,
}

/// Null-renormalized class average over lags `1..=max_lag`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassCurve {
    pub class: PairClassSel,
    /// Index = lag; entry 0 is always `None`.
    pub values: Vec<Option<f64>>,
    pub n_pairs: Vec<usize>,
    /// Pairs with a defined value but no usable null expectation.
    pub dropped: Vec<usize>,
}

pub fn class_average(
    curves: &[PairCurve],
    means: &NullMeans,
    class: PairClassSel,
    kin: &KinshipMatrix,
    weighting: Weighting,
) -> ClassCurve {
    let max_lag = means.max_lag();
    let mut values = vec![None; max_lag + 1];
    let mut n_pairs = vec![0; max_lag + 1];
    let mut dropped = vec![0; max_lag + 1];
    for lag in 1..=max_lag {
        let (mut sum, mut wsum) = (0.0, 0.0);
        for c in curves.iter().filter(|c| class.contains(kin, c.host, c.guest)) {
            let Some(v) = c.value(lag) else { continue };
            match means.lag_mean(c.host, c.guest, lag) {
                Some(m) if m > 0.0 => {
                    let w = match weighting {
                        Weighting::Unweighted => 1.0,
                        Weighting::Tally => c.tallies[lag].ho as f64,
                    };
                    sum += w * v / m;
                    wsum += w;
                    n_pairs[lag] += 1;
                }
                _ => dropped[lag] += 1,
            }
        }
        if n_pairs[lag] > 0 && wsum > 0.0 {
            values[lag] = Some(sum / wsum);
        }
    }
    ClassCurve {
        class,
        values,
        n_pairs,
        dropped,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRatio {
    pub host: usize,
    pub guest: usize,
    pub value: f64,
    pub null_mean: f64,
    pub ratio: f64,
}

/// Short-window statistic: pooled-tally `R̂_ij^W`, renormalized by its null
/// expectation and averaged over the class.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShortWindowStat {
    pub class: PairClassSel,
    pub window: usize,
    pub mean: Option<f64>,
    pub n_pairs: usize,
    pub dropped: usize,
    pub p_value: Option<f64>,
    pub per_pair: Vec<PairRatio>,
}

/// `null_stats`, when given, are the same statistic on null replicates; the
/// p-value is the add-one upper-tail estimate.
pub fn short_window_stat(
    curves: &[PairCurve],
    window: usize,
    class: PairClassSel,
    kin: &KinshipMatrix,
    means: &NullMeans,
    null_stats: Option<&[f64]>,
) -> ShortWindowStat {
    assert!(window >= 1, "window must be at least one day");
    debug_assert_eq!(window, means.window());
    let mut per_pair = Vec::new();
    let mut dropped = 0;
    for c in curves.iter().filter(|c| class.contains(kin, c.host, c.guest)) {
        let Some(value) = c.window_value(window) else { continue };
        match means.window_mean(c.host, c.guest) {
            Some(m) if m > 0.0 => per_pair.push(PairRatio {
                host: c.host,
                guest: c.guest,
                value,
                null_mean: m,
                ratio: value / m,
            }),
            _ => dropped += 1,
        }
    }
    let mean = (!per_pair.is_empty()).then(|| per_pair.iter().map(|p| p.ratio).sum::<f64>() / per_pair.len() as f64);
    let p_value = match (mean, null_stats) {
        (Some(m), Some(ns)) if !ns.is_empty() => Some(add_one_p(m, ns)),
        _ => None,
    };
    ShortWindowStat {
        class,
        window,
        mean,
        n_pairs: per_pair.len(),
        dropped,
        p_value,
        per_pair,
    }
}
