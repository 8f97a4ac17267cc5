//! Logistic regression with crossed random intercepts for host, guest and
//! ordered dyad:
//!
//! `logit P(i hosts j on t) = Xβ + α_i + α_j + α_ij`,
//! with `α_i ~ N(0, σ²_host)`, `α_j ~ N(0, σ²_guest)`, `α_ij ~ N(0, σ²_dyad)`.
//!
//! Fitting maximizes the Laplace approximation to the marginal likelihood.
//! For fixed variances the conditional modes and `β` come from penalized
//! iteratively reweighted least squares; the variances are found by a
//! Nelder–Mead search over `log σ²`.

mod design;
mod fit;
mod output;
mod shuffle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use design::{build_design, simulate_outcomes, Covariates, DesignMatrix};
pub use fit::{fit, fit_with_variances, laplace_loglik, Convergence, FitOptions, GlmmFit, RawAgeEffects, VarianceComponent};
pub use output::write_table_csv;
pub use shuffle::{shuffle_significance, ShuffleResult, ShuffleStatistic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomTerm {
    Host,
    Guest,
    Dyad,
}

impl RandomTerm {
    pub const ALL: [RandomTerm; 3] = [RandomTerm::Host, RandomTerm::Guest, RandomTerm::Dyad];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RandomTerm::Host => "host",
            RandomTerm::Guest => "guest",
            RandomTerm::Dyad => "dyad",
        }
    }
}

impl fmt::Display for RandomTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RandomTerm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "host" => Ok(RandomTerm::Host),
            "guest" => Ok(RandomTerm::Guest),
            "dyad" => Ok(RandomTerm::Dyad),
            other => Err(Error::Parse(format!("unknown random term `{other}`"))),
        }
    }
}

/// Fixed-effect terms understood by [`build_design`].
pub const COVARIATES: [&str; 11] = [
    "week",
    "guest_report_only",
    "host_age",
    "host_age2",
    "guest_age",
    "host_size",
    "guest_size",
    "log_distance",
    "kinship",
    "reciprocal_rate",
    "kinship_x_reciprocal_rate",
];

/// Declarative model: fixed terms and random intercepts. Serialized as TOML.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default = "yes")]
    pub intercept: bool,
    pub fixed: Vec<String>,
    #[serde(default = "all_terms")]
    pub random: Vec<RandomTerm>,
}

fn yes() -> bool {
    true
}

fn all_terms() -> Vec<RandomTerm> {
    RandomTerm::ALL.to_vec()
}

impl ModelSpec {
    pub fn new(name: &str, fixed: &[&str]) -> Self {
        ModelSpec {
            name: name.into(),
            intercept: true,
            fixed: fixed.iter().map(|s| s.to_string()).collect(),
            random: all_terms(),
        }
    }

    /// The nested preset ladder A–F.
    pub fn preset(name: &str) -> Result<Self> {
        const A: [&str; 2] = ["week", "guest_report_only"];
        const AGES: [&str; 3] = ["host_age", "host_age2", "guest_age"];
        fn with(extra: &[&'static str]) -> Vec<&'static str> {
            A.iter().chain(AGES.iter()).chain(extra.iter()).copied().collect()
        }
        let fixed: Vec<&str> = match name {
            "A" => A.to_vec(),
            "B" => with(&[]),
            "C" => with(&["log_distance"]),
            "D" => with(&["kinship"]),
            "E" => with(&["log_distance", "kinship"]),
            "F" => with(&["log_distance", "kinship", "reciprocal_rate", "kinship_x_reciprocal_rate"]),
            other => return Err(Error::Parse(format!("unknown model preset `{other}`"))),
        };
        Ok(ModelSpec::new(name, &fixed))
    }

    pub fn presets() -> Vec<ModelSpec> {
        ["A", "B", "C", "D", "E", "F"].iter().map(|n| ModelSpec::preset(n).unwrap()).collect()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ModelSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        for f in &self.fixed {
            if !COVARIATES.contains(&f.as_str()) {
                return Err(Error::UnavailableCovariate(f.clone()));
            }
        }
        let mut r = self.random.clone();
        r.sort();
        r.dedup();
        if r.len() != self.random.len() {
            return Err(Error::Parse("repeated random term".into()));
        }
        Ok(())
    }
}

/// Share of a random-effect variance removed by adding predictors:
/// `1 − σ²_full / σ²_base`.
pub fn variance_explained(base: &GlmmFit, full: &GlmmFit, term: RandomTerm) -> Result<f64> {
    let b = base.variance(term).ok_or_else(|| Error::Invalid(format!("base fit has no {term} term")))?;
    let f = full.variance(term).ok_or_else(|| Error::Invalid(format!("full fit has no {term} term")))?;
    proportion_explained(b, f, term)
}

/// The ratio formula on raw variances.
pub fn proportion_explained(base: f64, full: f64, term: RandomTerm) -> Result<f64> {
    if base == 0.0 {
        return Err(Error::ZeroBaseVariance(term.to_string()));
    }
    Ok(1.0 - full / base)
}
