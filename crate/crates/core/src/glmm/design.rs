use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ModelSpec, RandomTerm};
use crate::error::{Error, Result};
use crate::event_store::EventLog;
use crate::pedigree_geo::{family_distance, log_distance, KinshipMatrix};
use crate::rng::{self, StreamRng};

/// Dyad-level inputs beyond the event log.
#[derive(Clone, Copy, Debug, Default)]
pub struct Covariates<'a> {
    pub kinship: Option<&'a KinshipMatrix>,
    /// Dense `n × n` km table; computed from family coordinates when absent.
    pub distances: Option<&'a [f64]>,
}

/// Binomial-aggregated design. Each row stands for `trials` risk days sharing
/// one covariate vector and one (host, guest) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub model: String,
    pub columns: Vec<String>,
    /// Row-major, `n_rows × columns.len()`.
    pub x: Vec<f64>,
    pub trials: Vec<u32>,
    pub successes: Vec<u32>,
    pub host: Vec<u32>,
    pub guest: Vec<u32>,
    pub dyad: Vec<u32>,
    pub n_hosts: usize,
    pub n_guests: usize,
    pub n_dyads: usize,
    pub random: Vec<RandomTerm>,
    /// Centre of the age covariates, years.
    pub age_center: f64,
}

impl DesignMatrix {
    /// Assemble from explicit rows. Rows with equal dyad and covariates are merged.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: &str,
        columns: Vec<String>,
        x: Vec<f64>,
        trials: Vec<u32>,
        successes: Vec<u32>,
        host: Vec<u32>,
        guest: Vec<u32>,
        random: Vec<RandomTerm>,
    ) -> Result<Self> {
        let p = columns.len();
        let n = trials.len();
        if x.len() != n * p || successes.len() != n || host.len() != n || guest.len() != n {
            return Err(Error::Invalid("design arrays have inconsistent lengths".into()));
        }
        if successes.iter().zip(&trials).any(|(y, t)| y > t) || trials.contains(&0) {
            return Err(Error::Invalid("each row needs 0 ≤ successes ≤ trials and trials ≥ 1".into()));
        }
        let mut groups: BTreeMap<(u32, u32, Vec<u64>), (u32, u32)> = BTreeMap::new();
        for r in 0..n {
            let key = (host[r], guest[r], x[r * p..(r + 1) * p].iter().map(|v| v.to_bits()).collect());
            let e = groups.entry(key).or_default();
            e.0 += trials[r];
            e.1 += successes[r];
        }
        let mut d = DesignMatrix {
            model: model.into(),
            columns,
            x: Vec::new(),
            trials: Vec::new(),
            successes: Vec::new(),
            host: Vec::new(),
            guest: Vec::new(),
            dyad: Vec::new(),
            n_hosts: host.iter().map(|&h| h as usize + 1).max().unwrap_or(0),
            n_guests: guest.iter().map(|&g| g as usize + 1).max().unwrap_or(0),
            n_dyads: 0,
            random,
            age_center: 0.0,
        };
        let mut dyads: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        for ((h, g, bits), (t, y)) in groups {
            let next = dyads.len() as u32;
            let id = *dyads.entry((h, g)).or_insert(next);
            d.x.extend(bits.into_iter().map(f64::from_bits));
            d.trials.push(t);
            d.successes.push(y);
            d.host.push(h);
            d.guest.push(g);
            d.dyad.push(id);
        }
        d.n_dyads = dyads.len();
        Ok(d)
    }

    pub fn n_rows(&self) -> usize {
        self.trials.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        let p = self.n_cols();
        &self.x[r * p..(r + 1) * p]
    }

    /// `Σ trials`: one per observable (host, guest, day).
    pub fn risk_rows(&self) -> u64 {
        self.trials.iter().map(|&t| t as u64).sum()
    }

    pub fn total_successes(&self) -> u64 {
        self.successes.iter().map(|&y| y as u64).sum()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn has_term(&self, t: RandomTerm) -> bool {
        self.random.contains(&t)
    }

    /// Same design with outcomes permuted across all risk days.
    pub fn shuffled(&self, rng: &mut StreamRng) -> DesignMatrix {
        let mut outcomes: Vec<bool> = Vec::with_capacity(self.risk_rows() as usize);
        for (&t, &y) in self.trials.iter().zip(&self.successes) {
            outcomes.extend((0..t).map(|k| k < y));
        }
        outcomes.shuffle(rng);
        let mut out = self.clone();
        let mut at = 0usize;
        for (r, &t) in self.trials.iter().enumerate() {
            out.successes[r] = outcomes[at..at + t as usize].iter().filter(|&&b| b).count() as u32;
            at += t as usize;
        }
        out
    }
}

/// One design row per observable `(i, j, t)`, aggregated over identical
/// covariate vectors within each dyad.
pub fn build_design(log: &EventLog, cov: Covariates<'_>, spec: &ModelSpec) -> Result<DesignMatrix> {
    spec.validate()?;
    let n = log.n_families();
    let families = log.families();
    let wants = |c: &str| spec.fixed.iter().any(|f| f == c);
    let needs_kin = wants("kinship") || wants("kinship_x_reciprocal_rate");
    let kin = match (needs_kin, cov.kinship) {
        (true, None) => return Err(Error::UnavailableCovariate("kinship".into())),
        (true, Some(k)) if k.len() != n => {
            return Err(Error::Invalid("kinship matrix does not match the log's families".into()))
        }
        (_, k) => k,
    };
    if let Some(d) = cov.distances {
        if d.len() != n * n {
            return Err(Error::Invalid("distance table must be n × n".into()));
        }
    }
    let distance = |i: usize, j: usize| match cov.distances {
        Some(d) => d[i * n + j],
        None => family_distance(&families[i], &families[j]),
    };
    let age_center = families.iter().map(|f| f.head_mean_age).sum::<f64>() / n as f64;
    let decades = |age: f64| (age - age_center) / 10.0;
    let n_weeks = log.n_days().div_ceil(7);
    let mask = log.mask();

    // Drop week dummies whose week has no observable rows.
    let mut week_seen = vec![false; n_weeks];
    for t in 0..log.n_days() {
        if (0..n).any(|i| mask.covers(i, t)) {
            week_seen[t / 7] = true;
        }
    }
    let mut columns = Vec::new();
    if spec.intercept {
        columns.push("intercept".to_string());
    }
    let mut week_col = vec![None; n_weeks];
    for f in &spec.fixed {
        if f == "week" {
            for w in 1..n_weeks {
                if week_seen[w] {
                    week_col[w] = Some(columns.len());
                    columns.push(format!("week_{w}"));
                }
            }
        } else {
            columns.push(f.clone());
        }
    }
    let p = columns.len();
    let mut x = Vec::new();
    let (mut trials, mut successes, mut host, mut guest) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut row = vec![0.0; p];
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let recip = log.windowed_rate(j, i);
            let r_ij = kin.map(|k| k.get(i, j)).unwrap_or(0.0);
            let events = log.pair_events(i, j);
            let mut next = 0;
            for t in mask.pair_mask(i, j).iter_ones() {
                row.iter_mut().for_each(|v| *v = 0.0);
                let mut c = 0;
                if spec.intercept {
                    row[0] = 1.0;
                    c = 1;
                }
                for f in &spec.fixed {
                    match f.as_str() {
                        "week" => {
                            if let Some(k) = week_col[t / 7] {
                                row[k] = 1.0;
                            }
                            c += week_col.iter().flatten().count();
                            continue;
                        }
                        "guest_report_only" => row[c] = mask.guest_only(i, j, t) as u8 as f64,
                        "host_age" => row[c] = decades(families[i].head_mean_age),
                        "host_age2" => row[c] = decades(families[i].head_mean_age).powi(2),
                        "guest_age" => row[c] = decades(families[j].head_mean_age),
                        "host_size" => row[c] = families[i].size as f64,
                        "guest_size" => row[c] = families[j].size as f64,
                        "log_distance" => row[c] = log_distance(distance(i, j)),
                        "kinship" => row[c] = r_ij,
                        "reciprocal_rate" => row[c] = recip,
                        "kinship_x_reciprocal_rate" => row[c] = r_ij * recip,
                        other => return Err(Error::UnavailableCovariate(other.into())),
                    }
                    c += 1;
                }
                while next < events.len() && (events[next].day as usize) < t {
                    next += 1;
                }
                let hit = next < events.len() && events[next].day as usize == t;
                x.extend_from_slice(&row);
                trials.push(1);
                successes.push(hit as u32);
                host.push(i as u32);
                guest.push(j as u32);
            }
        }
    }
    let mut d = DesignMatrix::new(&spec.name, columns, x, trials, successes, host, guest, spec.random.clone())?;
    d.n_hosts = n;
    d.n_guests = n;
    d.age_center = age_center;
    Ok(d)
}

/// Replace the outcomes with draws from the model at `(β, σ²)`; `sigma2` is
/// indexed by [`RandomTerm::index`] and ignored for terms the design lacks.
pub fn simulate_outcomes(design: &DesignMatrix, beta: &[f64], sigma2: [f64; 3], seed: u64) -> Result<DesignMatrix> {
    if beta.len() != design.n_cols() {
        return Err(Error::Invalid("β length does not match the design".into()));
    }
    let mut rng = rng::stream(seed, 0);
    let mut effects = |len: usize, t: RandomTerm| -> Result<Vec<f64>> {
        let s = if design.has_term(t) { sigma2[t.index()] } else { 0.0 };
        let normal = Normal::new(0.0, s.sqrt()).map_err(|e| Error::Invalid(e.to_string()))?;
        Ok((0..len).map(|_| normal.sample(&mut rng)).collect())
    };
    let a_h = effects(design.n_hosts, RandomTerm::Host)?;
    let a_g = effects(design.n_guests, RandomTerm::Guest)?;
    let a_d = effects(design.n_dyads, RandomTerm::Dyad)?;
    let mut out = design.clone();
    for r in 0..design.n_rows() {
        let eta: f64 = design.row(r).iter().zip(beta).map(|(x, b)| x * b).sum::<f64>()
            + a_h[design.host[r] as usize]
            + a_g[design.guest[r] as usize]
            + a_d[design.dyad[r] as usize];
        let p = 1.0 / (1.0 + (-eta).exp());
        out.successes[r] = (0..design.trials[r]).filter(|_| rng.gen::<f64>() < p).count() as u32;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_store::{test_support::families, DayMask, ObservationMask, Source};

    fn log() -> EventLog {
        let mut cov = vec![DayMask::full(21); 3];
        cov[2] = DayMask::new(21);
        for t in 0..7 {
            cov[2].set(t, true);
        }
        let mask = ObservationMask::new(cov, 21).unwrap();
        let ev = [
            (0, 1, 2, Source::HostReported),
            (1, 0, 3, Source::HostReported),
            (1, 0, 9, Source::HostReported),
            (1, 0, 12, Source::HostReported),
            (2, 0, 5, Source::GuestOnly),
        ];
        EventLog::new(None, families(3), mask, ev).unwrap()
    }

    #[test]
    fn model_a_columns() {
        let d = build_design(&log(), Covariates::default(), &ModelSpec::preset("A").unwrap()).unwrap();
        assert_eq!(d.columns, vec!["intercept", "week_1", "week_2", "guest_report_only"]);
    }

    #[test]
    fn row_count_equals_risk_count() {
        let l = log();
        let d = build_design(&l, Covariates::default(), &ModelSpec::preset("C").unwrap()).unwrap();
        assert_eq!(d.risk_rows(), l.mask().risk_count());
        assert_eq!(d.total_successes(), l.event_count());
        let full = EventLog::new(None, families(4), ObservationMask::full(4, 30), []).unwrap();
        let d = build_design(&full, Covariates::default(), &ModelSpec::preset("A").unwrap()).unwrap();
        assert_eq!(d.risk_rows(), 4 * 3 * 30);
    }

    #[test]
    fn reciprocal_rate_and_flags() {
        let l = log();
        let spec = ModelSpec::new("r", &["reciprocal_rate", "guest_report_only"]);
        let d = build_design(&l, Covariates::default(), &spec).unwrap();
        // 3 hostings by 1 of 0 over 21 observable days.
        let r = (0..d.n_rows()).find(|&r| d.host[r] == 0 && d.guest[r] == 1).unwrap();
        assert!((d.row(r)[1] - 3.0 / 21.0).abs() < 1e-15);
        // Host 2 is uncovered after week 0; rows there are guest-only.
        let flagged: u32 = (0..d.n_rows())
            .filter(|&r| d.host[r] == 2 && d.row(r)[2] == 1.0)
            .map(|r| d.trials[r])
            .sum();
        assert_eq!(flagged, 2 * 14);
    }

    #[test]
    fn kinship_requires_matrix() {
        let spec = ModelSpec::preset("D").unwrap();
        assert!(matches!(
            build_design(&log(), Covariates::default(), &spec),
            Err(Error::UnavailableCovariate(c)) if c == "kinship"
        ));
        let kin = KinshipMatrix::zeros(vec!["F00".into(), "F01".into(), "F02".into()]);
        let d = build_design(&log(), Covariates { kinship: Some(&kin), distances: None }, &spec).unwrap();
        assert!(d.column("kinship").is_some());
    }

    #[test]
    fn shuffle_preserves_totals() {
        let d = build_design(&log(), Covariates::default(), &ModelSpec::preset("A").unwrap()).unwrap();
        let s = d.shuffled(&mut rng::stream(1, 0));
        assert_eq!(s.total_successes(), d.total_successes());
        assert_eq!(s.trials, d.trials);
    }
}
