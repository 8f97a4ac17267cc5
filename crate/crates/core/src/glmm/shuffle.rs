use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, DesignMatrix, FitOptions, GlmmFit, RandomTerm};
use crate::error::{Error, Result};
use crate::rng;

/// Quantity whose null distribution is estimated by outcome shuffling.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShuffleStatistic {
    Coefficient { name: String, two_sided: bool },
    Variance { term: RandomTerm },
}

impl ShuffleStatistic {
    fn value(&self, f: &GlmmFit) -> Option<f64> {
        match self {
            ShuffleStatistic::Coefficient { name, two_sided } => {
                f.coefficient(name).map(|(b, _)| if *two_sided { b.abs() } else { b })
            }
            ShuffleStatistic::Variance { term } => f.variance(*term),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ShuffleStatistic::Coefficient { name, .. } => name.clone(),
            ShuffleStatistic::Variance { term } => format!("var_{term}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShuffleResult {
    pub statistic: ShuffleStatistic,
    pub observed: f64,
    pub p_value: f64,
    pub null: Vec<f64>,
    /// Replicates whose refit failed; excluded from `null`.
    pub failures: usize,
}

/// Refit `n_reps` outcome-shuffled copies of the design and compare each
/// statistic with its value in `observed`.
pub fn shuffle_significance(
    design: &DesignMatrix,
    observed: &GlmmFit,
    statistics: &[ShuffleStatistic],
    n_reps: usize,
    seed: u64,
    opts: FitOptions,
) -> Result<Vec<ShuffleResult>> {
    if n_reps < 1 {
        return Err(Error::Invalid("shuffle significance needs at least one replicate".into()));
    }
    let obs: Vec<f64> = statistics
        .iter()
        .map(|s| {
            s.value(observed)
                .ok_or_else(|| Error::Invalid(format!("statistic `{}` is not in the fitted model", s.label())))
        })
        .collect::<Result<_>>()?;
    let fits: Vec<Option<GlmmFit>> = (0..n_reps as u64)
        .into_par_iter()
        .map(|k| {
            let shuffled = design.shuffled(&mut rng::stream(seed, k));
            match fit(&shuffled, opts) {
                Ok(f) if f.convergence.ok() => Some(f),
                Ok(_) => None,
                Err(e) => {
                    log::debug!("shuffle replicate {k} failed: {e}");
                    None
                }
            }
        })
        .collect();
    let failures = fits.iter().filter(|f| f.is_none()).count();
    if failures > 0 {
        log::warn!("{failures} of {n_reps} shuffle refits failed and were excluded");
    }
    Ok(statistics
        .iter()
        .zip(obs)
        .map(|(s, o)| {
            let null: Vec<f64> = fits.iter().flatten().filter_map(|f| s.value(f)).collect();
            ShuffleResult {
                statistic: s.clone(),
                observed: o,
                p_value: crate::stats::add_one_p(o, &null),
                null,
                failures,
            }
        })
        .collect())
}
