use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simulate::raw_replicate;
use super::NullModel;
use crate::error::{Error, Result};
use crate::event_store::ObservationMask;
use crate::stats;

/// Result of fitting the omission probability to a target event count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub p_omit: f64,
    /// Monte Carlo standard error; `None` when unidentified.
    pub se: Option<f64>,
    pub identified: bool,
    pub target: f64,
    /// Mean realized count at the calibrated value.
    pub mean_count: f64,
    /// Mean counts at `p_omit = 1` and `p_omit = 0`.
    pub attainable: (f64, f64),
    pub n_reps: usize,
    pub seed: u64,
}

/// Find `p_omit` so that the mean realized event count over `n_reps`
/// replicates equals `target`.
///
/// All candidate values are evaluated on the same replicates, so the mean
/// count is a monotone step function of `p_omit` and bisection is exact.
pub fn calibrate_p_omit(
    model: &NullModel,
    mask: &ObservationMask,
    target: f64,
    n_reps: usize,
    seed: u64,
) -> Result<Calibration> {
    if !(target > 0.0) {
        return Err(Error::Invalid("target event count must be positive".into()));
    }
    if n_reps < 2 {
        return Err(Error::Invalid("calibration needs at least two replicates".into()));
    }
    model.check_mask(mask)?;
    let reps: Vec<(usize, Vec<f64>)> = (0..n_reps as u64)
        .into_par_iter()
        .map(|k| {
            let raw = raw_replicate(model, mask, seed, k);
            let mut u: Vec<f64> = raw.guest_only.iter().map(|e| e.3).collect();
            u.sort_by(f64::total_cmp);
            (raw.host_covered.len(), u)
        })
        .collect();
    let r = n_reps as f64;
    let counts_at = |p: f64| -> Vec<f64> {
        reps.iter()
            .map(|(h, u)| (*h + u.len() - u.partition_point(|&x| x < p)) as f64)
            .collect()
    };
    let mean_at = |p: f64| stats::mean(&counts_at(p));
    let lo_count = mean_at(1.0);
    let hi_count = mean_at(0.0);
    let guest_only_mean = reps.iter().map(|(_, u)| u.len() as f64).sum::<f64>() / r;
    let mut result = Calibration {
        p_omit: 0.0,
        se: None,
        identified: false,
        target,
        mean_count: hi_count,
        attainable: (lo_count, hi_count),
        n_reps,
        seed,
    };
    if guest_only_mean == 0.0 {
        log::warn!("no guest-only observable events; omission rate is unidentified");
        return Ok(result);
    }
    if target < lo_count || target > hi_count {
        return Err(Error::TargetUnattainable {
            target,
            min: lo_count,
            max: hi_count,
        });
    }
    // mean_at is non-increasing in p.
    let (mut a, mut b) = (0.0f64, 1.0f64);
    for _ in 0..64 {
        let mid = 0.5 * (a + b);
        if mean_at(mid) >= target {
            a = mid;
        } else {
            b = mid;
        }
    }
    let p = 0.5 * (a + b);
    let counts = counts_at(p);
    let se_count = stats::std_dev(&counts) / r.sqrt();
    result.p_omit = p;
    result.se = Some(se_count / guest_only_mean);
    result.identified = true;
    result.mean_count = stats::mean(&counts);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_store::{test_support::families, DayMask};
    use crate::nulls::{model_from_rates, NullLevel, SeasonProfile};

    fn model(n: usize, days: usize) -> NullModel {
        let att = (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { 0.2 }).collect()).collect();
        model_from_rates(NullLevel::FullHeterogeneous, families(n), SeasonProfile::flat(days), vec![0.1; n], att, None)
    }

    fn half_mask(n: usize, days: usize) -> ObservationMask {
        let cov = (0..n)
            .map(|i| {
                let mut m = DayMask::new(days);
                for t in (0..days).filter(|t| (t + i) % 2 == 0) {
                    m.set(t, true);
                }
                m
            })
            .collect();
        ObservationMask::new(cov, days).unwrap()
    }

    #[test]
    fn recovers_embedded_rate_from_expected_count() {
        let m = model(8, 80);
        let mask = half_mask(8, 80);
        let target = m.expected_event_count(&mask, 0.4);
        let c = calibrate_p_omit(&m, &mask, target, 400, 3).unwrap();
        let se = c.se.unwrap();
        assert!(c.identified);
        assert!((c.p_omit - 0.4).abs() < 4.0 * se + 0.01, "{} ± {}", c.p_omit, se);
        assert!((c.mean_count - target).abs() < 0.01 * target);
    }

    #[test]
    fn unattainable_target_reports_range() {
        let m = model(6, 40);
        let mask = half_mask(6, 40);
        let hi = m.expected_event_count(&mask, 0.0);
        match calibrate_p_omit(&m, &mask, 3.0 * hi, 50, 1) {
            Err(Error::TargetUnattainable { min, max, .. }) => assert!(min <= max),
            other => panic!("expected unattainable, got {other:?}"),
        }
    }

    #[test]
    fn full_host_coverage_leaves_rate_unidentified() {
        let m = model(5, 30);
        let mask = ObservationMask::full(5, 30);
        let c = calibrate_p_omit(&m, &mask, 10.0, 20, 1).unwrap();
        assert!(!c.identified);
        assert!(c.se.is_none());
        assert_eq!(c.attainable.0, c.attainable.1);
    }
}
