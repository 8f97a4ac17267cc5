use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simulate::raw_replicate;
use super::{NullLevel, NullModel};
use crate::error::{Error, Result};
use crate::event_store::{EventLog, ObservationMask};
use crate::pedigree_geo::KinshipMatrix;
use crate::reciprocity::{
    class_average, pair_curves, short_window_stat, MaskOverlap, NullMeans, PairClassSel, PairCurve, Weighting,
    DEFAULT_MAX_LAG, DEFAULT_WINDOW,
};
use crate::rng::{self, CHUNK};
use crate::stats::{add_one_p, mean, quantile_sorted, SIGMA1, SIGMA2};

pub const MIN_REPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Class average at a single lag.
    Curve,
    /// Short-window class average over lags `1..=W`.
    Window,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Curve => "curve",
            Statistic::Window => "window",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullConfig {
    pub n_reps: usize,
    pub max_lag: usize,
    pub window: usize,
    pub weighting: Weighting,
    pub seed: u64,
}

impl NullConfig {
    pub fn new(n_reps: usize, seed: u64) -> Self {
        NullConfig {
            n_reps,
            max_lag: DEFAULT_MAX_LAG,
            window: DEFAULT_WINDOW,
            weighting: Weighting::Unweighted,
            seed,
        }
    }
}

/// Replicate distribution of every class statistic under one null model and
/// one observation mask. Built once; evaluated against any number of logs
/// observed through the same mask.
#[derive(Clone, Debug)]
pub struct NullDistribution {
    level: NullLevel,
    config: NullConfig,
    mask: ObservationMask,
    kin: KinshipMatrix,
    overlap: MaskOverlap,
    means: NullMeans,
    /// `[class][lag]`: sorted defined replicate values.
    curve: Vec<Vec<Vec<f64>>>,
    /// `[class]`: sorted defined replicate values.
    window: Vec<Vec<f64>>,
}

struct ReplicateStats {
    curve: Vec<Vec<Option<f64>>>,
    window: Vec<Option<f64>>,
}

fn class_index(c: PairClassSel) -> usize {
    PairClassSel::ALL.iter().position(|&x| x == c).unwrap()
}

impl NullDistribution {
    pub fn build(model: &NullModel, mask: &ObservationMask, kin: &KinshipMatrix, config: NullConfig) -> Result<Self> {
        let p = model.p_omit.ok_or(Error::Uncalibrated)?;
        model.check_mask(mask)?;
        if config.n_reps < MIN_REPS {
            return Err(Error::Invalid(format!("envelopes need at least {MIN_REPS} replicates")));
        }
        if config.window < 1 || config.window > config.max_lag {
            return Err(Error::Invalid("window must lie in 1..=max_lag".into()));
        }
        if kin.len() != model.n_families() {
            return Err(Error::Invalid("kinship matrix does not match the null model".into()));
        }
        let overlap = MaskOverlap::new(mask, config.max_lag);
        let curves_of = |seed: u64, k: u64| -> Result<Vec<PairCurve>> {
            let log = raw_replicate(model, mask, seed, k).realize(model, mask, p)?;
            Ok(pair_curves(&log, &overlap))
        };

        // Expectations and the distribution come from disjoint replicate sets.
        let mean_seed = rng::derive(config.seed, 1);
        let dist_seed = rng::derive(config.seed, 2);
        let n = model.n_families();
        let mut means = NullMeans::empty(n, config.max_lag, config.window);
        for start in (0..config.n_reps).step_by(CHUNK) {
            let end = (start + CHUNK).min(config.n_reps);
            let chunk: Vec<Vec<PairCurve>> = (start..end)
                .into_par_iter()
                .map(|k| curves_of(mean_seed, k as u64))
                .collect::<Result<_>>()?;
            for c in &chunk {
                means.add_replicate(c);
            }
        }

        let per_rep: Vec<ReplicateStats> = (0..config.n_reps)
            .into_par_iter()
            .map(|k| {
                let curves = curves_of(dist_seed, k as u64)?;
                Ok(replicate_stats(&curves, &means, kin, &config))
            })
            .collect::<Result<_>>()?;
        let mut curve = vec![vec![Vec::new(); config.max_lag + 1]; 3];
        let mut window = vec![Vec::new(); 3];
        for r in &per_rep {
            for c in 0..3 {
                for (lag, v) in r.curve[c].iter().enumerate() {
                    if let Some(v) = v {
                        curve[c][lag].push(*v);
                    }
                }
                if let Some(v) = r.window[c] {
                    window[c].push(v);
                }
            }
        }
        for v in curve.iter_mut().flatten().chain(window.iter_mut()) {
            v.sort_by(f64::total_cmp);
        }
        Ok(NullDistribution {
            level: model.level,
            config,
            mask: mask.clone(),
            kin: kin.clone(),
            overlap,
            means,
            curve,
            window,
        })
    }

    pub fn config(&self) -> &NullConfig {
        &self.config
    }

    pub fn means(&self) -> &NullMeans {
        &self.means
    }

    pub fn overlap(&self) -> &MaskOverlap {
        &self.overlap
    }

    /// Sorted replicate values of the short-window statistic.
    pub fn window_null(&self, class: PairClassSel) -> &[f64] {
        &self.window[class_index(class)]
    }

    /// Sorted replicate values of the class average at `lag`.
    pub fn curve_null(&self, class: PairClassSel, lag: usize) -> &[f64] {
        &self.curve[class_index(class)][lag]
    }

    pub fn observed_curves(&self, log: &EventLog) -> Result<Vec<PairCurve>> {
        if log.mask() != &self.mask {
            return Err(Error::Invalid("log is observed through a different mask than the null distribution".into()));
        }
        Ok(pair_curves(log, &self.overlap))
    }

    /// Observed statistics against the null: bands, p-values and suppression.
    pub fn evaluate(&self, log: &EventLog) -> Result<Envelope> {
        let curves = self.observed_curves(log)?;
        let obs = replicate_stats(&curves, &self.means, &self.kin, &self.config);
        let mut rows = Vec::new();
        for class in PairClassSel::ALL {
            let c = class_index(class);
            let sw = short_window_stat(&curves, self.config.window, class, &self.kin, &self.means, None);
            rows.push(self.row(Statistic::Window, class, self.config.window, obs.window[c], sw.n_pairs, &self.window[c]));
            let cc = class_average(&curves, &self.means, class, &self.kin, self.config.weighting);
            for lag in 1..=self.config.max_lag {
                rows.push(self.row(Statistic::Curve, class, lag, obs.curve[c][lag], cc.n_pairs[lag], &self.curve[c][lag]));
            }
        }
        Ok(Envelope {
            level: self.level,
            n_reps: self.config.n_reps,
            seed: self.config.seed,
            window: self.config.window,
            rows,
        })
    }

    fn row(&self, statistic: Statistic, class: PairClassSel, dt: usize, r_hat: Option<f64>, n_pairs: usize, null: &[f64]) -> EnvelopeRow {
        let suppressed = 2 * null.len() < self.config.n_reps;
        if suppressed {
            log::debug!(
                "{} {class} dt={dt}: defined in {}/{} replicates; suppressed",
                statistic.as_str(),
                null.len(),
                self.config.n_reps
            );
        }
        let band = |q: (f64, f64)| (!suppressed).then(|| (quantile_sorted(null, q.0), quantile_sorted(null, q.1)));
        EnvelopeRow {
            statistic,
            class,
            dt,
            r_hat,
            null_mean: (!suppressed).then(|| mean(null)),
            sigma1: band(SIGMA1),
            sigma2: band(SIGMA2),
            n_pairs,
            n_null: null.len(),
            p_value: match (suppressed, r_hat) {
                (false, Some(v)) => Some(add_one_p(v, null)),
                _ => None,
            },
            suppressed,
        }
    }
}

fn replicate_stats(curves: &[PairCurve], means: &NullMeans, kin: &KinshipMatrix, config: &NullConfig) -> ReplicateStats {
    let mut curve = Vec::with_capacity(3);
    let mut window = Vec::with_capacity(3);
    for class in PairClassSel::ALL {
        curve.push(class_average(curves, means, class, kin, config.weighting).values);
        window.push(short_window_stat(curves, config.window, class, kin, means, None).mean);
    }
    ReplicateStats { curve, window }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub statistic: Statistic,
    pub class: PairClassSel,
    pub dt: usize,
    pub r_hat: Option<f64>,
    pub null_mean: Option<f64>,
    pub sigma1: Option<(f64, f64)>,
    pub sigma2: Option<(f64, f64)>,
    pub n_pairs: usize,
    pub n_null: usize,
    pub p_value: Option<f64>,
    pub suppressed: bool,
}

impl EnvelopeRow {
    /// Observed value strictly outside the 2σ band.
    pub fn outside_2sigma(&self) -> Option<bool> {
        match (self.r_hat, self.sigma2) {
            (Some(v), Some((lo, hi))) => Some(v < lo || v > hi),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Envelope {
    pub level: NullLevel,
    pub n_reps: usize,
    pub seed: u64,
    pub window: usize,
    pub rows: Vec<EnvelopeRow>,
}

impl Envelope {
    pub fn row(&self, statistic: Statistic, class: PairClassSel, dt: usize) -> Option<&EnvelopeRow> {
        self.rows
            .iter()
            .find(|r| r.statistic == statistic && r.class == class && r.dt == dt)
    }

    pub fn window_row(&self, class: PairClassSel) -> &EnvelopeRow {
        self.row(Statistic::Window, class, self.window).expect("window row present")
    }

    /// Plot-ready CSV, one row per statistic, class and lag.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "statistic", "class", "dt", "R_hat", "null_mean", "sigma1_lo", "sigma1_hi", "sigma2_lo", "sigma2_hi",
            "n_pairs", "n_null", "p_value",
        ])?;
        let f = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.statistic.as_str().to_string(),
                r.class.to_string(),
                r.dt.to_string(),
                f(r.r_hat),
                f(r.null_mean),
                f(r.sigma1.map(|b| b.0)),
                f(r.sigma1.map(|b| b.1)),
                f(r.sigma2.map(|b| b.0)),
                f(r.sigma2.map(|b| b.1)),
                r.n_pairs.to_string(),
                r.n_null.to_string(),
                f(r.p_value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Envelope of `observed` under `model`, observed through the log's own mask.
pub fn envelope(model: &NullModel, observed: &EventLog, kin: &KinshipMatrix, config: NullConfig) -> Result<Envelope> {
    NullDistribution::build(model, observed.mask(), kin, config)?.evaluate(observed)
}
