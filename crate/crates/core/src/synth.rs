//! Synthetic populations with known generating parameters.
//!
//! A world is a set of families (some descended from shared founder couples),
//! a party/attendance hosting process identical to the full-heterogeneous
//! null, an interview schedule and the reporting model. Conditional-action
//! reciprocity is planted on top: every truth event `i → j` on day `t`
//! multiplies the probability that `j` hosts `i` by `B` on days
//! `t + 1 ..= t + W`. Overlapping windows multiply, capped at probability one.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_store::{DayMask, EventLog, Family, ObservationMask};
use crate::nulls::{model_from_rates, simulate_truth, NullLevel, NullModel, SeasonProfile};
use crate::pedigree_geo::{family_distance, family_relatedness, Individual, KinshipMatrix, Pedigree, CLOSE_KIN_THRESHOLD};
use crate::rng::{self, StreamRng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostClass {
    #[default]
    All,
    NonKinOnly,
    KinOnly,
}

impl BoostClass {
    fn applies(self, r: f64) -> bool {
        match self {
            BoostClass::All => true,
            BoostClass::NonKinOnly => r < CLOSE_KIN_THRESHOLD,
            BoostClass::KinOnly => r >= CLOSE_KIN_THRESHOLD,
        }
    }
}

impl fmt::Display for BoostClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoostClass::All => "all",
            BoostClass::NonKinOnly => "non_kin_only",
            BoostClass::KinOnly => "kin_only",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KinConfig {
    /// Founder couples; each forms a household with its married children nearby.
    pub clans: usize,
    pub min_children: usize,
    pub max_children: usize,
    pub max_grandchildren: usize,
}

impl Default for KinConfig {
    fn default() -> Self {
        KinConfig {
            clans: 6,
            min_children: 2,
            max_children: 4,
            max_grandchildren: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    pub party_rate: f64,
    /// Log-scale spread of party rates across hosts.
    pub party_rate_sigma: f64,
    pub attendance: f64,
    /// Log-scale spread of attendance across ordered pairs.
    pub attendance_sigma: f64,
    /// Attendance multiplier `1 + kin_weight · r̄`.
    pub kin_weight: f64,
    /// Attendance decays as `exp(−d / distance_scale_km)`.
    pub distance_scale_km: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            party_rate: 0.08,
            party_rate_sigma: 0.5,
            attendance: 0.12,
            attendance_sigma: 0.6,
            kin_weight: 4.0,
            distance_scale_km: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    pub factor: f64,
    pub window: usize,
    pub class: BoostClass,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            factor: 1.0,
            window: 3,
            class: BoostClass::All,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationConfig {
    pub interviews_per_week: usize,
    /// Days before the interview that it covers.
    pub days_per_interview: usize,
    /// Probability that a scheduled interview takes place.
    pub interview_prob: f64,
    /// Every family covers every day; overrides the schedule.
    pub full: bool,
    pub p_omit: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        ObservationConfig {
            interviews_per_week: 2,
            days_per_interview: 2,
            interview_prob: 0.41,
            full: false,
            p_omit: 0.687,
        }
    }
}

/// Generator settings. Serialized as TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub n_families: usize,
    pub n_days: usize,
    /// One multiplier per week; empty means flat.
    pub weekly_season: Vec<f64>,
    /// Rescale party rates so the expected realized event count (before
    /// planted extras) equals this value.
    pub target_events: Option<f64>,
    pub kin: KinConfig,
    pub rates: RateConfig,
    pub boost: BoostConfig,
    pub observation: ObservationConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            n_families: 35,
            n_days: 112,
            weekly_season: Vec::new(),
            target_events: None,
            kin: KinConfig::default(),
            rates: RateConfig::default(),
            boost: BoostConfig::default(),
            observation: ObservationConfig::default(),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("scenario: {m}")));
        if self.n_families < 2 || self.n_days < 1 {
            return bad("need at least two families and one day");
        }
        let k = &self.kin;
        if k.min_children > k.max_children {
            return bad("min_children exceeds max_children");
        }
        if k.clans * (1 + k.max_children) > self.n_families {
            return bad("clans with max_children do not fit in n_families");
        }
        let r = &self.rates;
        if !(r.party_rate >= 0.0 && r.attendance >= 0.0 && r.party_rate_sigma >= 0.0 && r.attendance_sigma >= 0.0) {
            return bad("rates and spreads must be non-negative");
        }
        if !(r.distance_scale_km > 0.0) || !(r.kin_weight >= 0.0) {
            return bad("distance_scale_km must be positive and kin_weight non-negative");
        }
        if !(self.boost.factor >= 1.0) || self.boost.window < 1 {
            return bad("boost factor must be at least 1 and window at least 1 day");
        }
        if self.weekly_season.iter().any(|&m| !(m >= 0.0)) {
            return bad("seasonal multipliers must be non-negative");
        }
        let o = &self.observation;
        if !(0.0..=1.0).contains(&o.p_omit) || !(0.0..=1.0).contains(&o.interview_prob) {
            return bad("probabilities must lie in [0, 1]");
        }
        if !o.full && (o.interviews_per_week == 0 || o.interviews_per_week > 7) {
            return bad("interviews_per_week must lie in 1..=7");
        }
        if let Some(t) = self.target_events {
            if !(t > 0.0) {
                return bad("target_events must be positive");
            }
        }
        Ok(())
    }

    pub fn season(&self) -> SeasonProfile {
        if self.weekly_season.is_empty() {
            SeasonProfile::flat(self.n_days)
        } else {
            SeasonProfile::from_weekly(&self.weekly_season, self.n_days)
        }
    }
}

/// Everything needed to recount the planted mechanism from the truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub format: String,
    pub seed: u64,
    pub scenario: Scenario,
    /// Baseline process, with `p_omit` set.
    pub generator: NullModel,
    pub kinship: Vec<f64>,
    /// Every truth event `(host, guest, day)` in generation order.
    pub events: Vec<(u32, u32, u32)>,
    /// Events added by the planted mechanism.
    pub planted_events: u64,
    /// Pair-days with an active trigger.
    pub boosted_pair_days: u64,
    /// Boosted pair-days whose probability hit one.
    pub capped_pair_days: u64,
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub log: EventLog,
    pub pedigree: Pedigree,
    pub kinship: KinshipMatrix,
    pub truth: TruthRecord,
}

impl Generated {
    /// The baseline (`B = 1`) process as a null model.
    pub fn as_null_model(&self) -> NullModel {
        self.truth.generator.clone()
    }
}

/// Build a world and simulate one study from it.
pub fn generate(scenario: &Scenario, seed: u64) -> Result<Generated> {
    scenario.validate()?;
    let mut world = rng::stream(seed, 0);
    let (families, individuals) = build_population(scenario, &mut world);
    let pedigree = Pedigree::new(individuals)?;
    let kinship = family_relatedness(&pedigree, &families)?;
    let mask = build_mask(scenario, &mut world);
    let n = scenario.n_families;
    let r = &scenario.rates;
    let party = Normal::new(0.0, r.party_rate_sigma).map_err(|e| Error::Invalid(e.to_string()))?;
    let pair = Normal::new(0.0, r.attendance_sigma).map_err(|e| Error::Invalid(e.to_string()))?;
    let q: Vec<f64> = (0..n)
        .map(|_| r.party_rate * (party.sample(&mut world) - 0.5 * r.party_rate_sigma.powi(2)).exp())
        .collect();
    let mut attendance = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let z = pair.sample(&mut world);
            if i != j {
                let d = family_distance(&families[i], &families[j]);
                let a = r.attendance
                    * (1.0 + r.kin_weight * kinship.get(i, j))
                    * (-d / r.distance_scale_km).exp()
                    * (z - 0.5 * r.attendance_sigma.powi(2)).exp();
                attendance[i][j] = a.min(1.0);
            }
        }
    }
    let p_omit = scenario.observation.p_omit;
    let mut model = model_from_rates(
        NullLevel::FullHeterogeneous,
        families,
        scenario.season(),
        q,
        attendance,
        Some(p_omit),
    );
    if let Some(target) = scenario.target_events {
        let base = model.expected_event_count(&mask, p_omit);
        if base <= 0.0 {
            return Err(Error::Invalid("scenario has no observable events to rescale".into()));
        }
        model.scale_party_rates(target / base);
    }

    let boost = &scenario.boost;
    let mut planted = 0u64;
    let mut boosted = 0u64;
    let mut capped = 0u64;
    let mut recent: VecDeque<Vec<(usize, usize)>> = VecDeque::with_capacity(boost.window + 1);
    let mut sim = rng::stream(seed, 1);
    let raw = if boost.factor > 1.0 {
        simulate_truth(&model, &mask, &mut sim, |t, rng, day| {
            // Active triggers per candidate (host, guest).
            let mut k: BTreeMap<(usize, usize), i32> = BTreeMap::new();
            for past in &recent {
                for &(i, j) in past {
                    *k.entry((j, i)).or_default() += 1;
                }
            }
            for ((host, guest), count) in k {
                if !boost.class.applies(kinship.get(host, guest)) {
                    continue;
                }
                let p0 = model.pair_prob(host, guest, t);
                if p0 <= 0.0 {
                    continue;
                }
                boosted += 1;
                let mut p_star = boost.factor.powi(count) * p0;
                if p_star >= 1.0 {
                    capped += 1;
                    p_star = 1.0;
                }
                // Draw even when the base already fired, to keep streams aligned.
                let u: f64 = rng.gen();
                let extra = if p0 < 1.0 { (p_star - p0) / (1.0 - p0) } else { 0.0 };
                if u < extra && !day.contains(&(host, guest)) {
                    day.push((host, guest));
                    planted += 1;
                }
            }
            recent.push_back(day.clone());
            if recent.len() > boost.window {
                recent.pop_front();
            }
        })
    } else {
        simulate_truth(&model, &mask, &mut sim, |_, _, _| {})
    };
    let total_pair_days = (n * (n - 1) * scenario.n_days) as f64;
    if capped as f64 > 0.01 * total_pair_days {
        log::warn!("probability cap hit on {capped} pair-days (more than 1% of {total_pair_days})");
    }
    let log = raw.realize(&model, &mask, p_omit)?;
    let truth = TruthRecord {
        format: "condrecip.truth/1".into(),
        seed,
        scenario: scenario.clone(),
        generator: model,
        kinship: (0..n * n).map(|p| kinship.get(p / n, p % n)).collect(),
        events: raw.truth,
        planted_events: planted,
        boosted_pair_days: boosted,
        capped_pair_days: capped,
    };
    Ok(Generated {
        log,
        pedigree,
        kinship,
        truth,
    })
}

const VILLAGE: (f64, f64) = (-14.80, -66.80);
/// Degrees of latitude per km, roughly.
const DEG_PER_KM: f64 = 1.0 / 111.2;

fn jitter(rng: &mut StreamRng, centre: (f64, f64), km: f64) -> (f64, f64) {
    let dx = (rng.gen::<f64>() - 0.5) * 2.0 * km * DEG_PER_KM;
    let dy = (rng.gen::<f64>() - 0.5) * 2.0 * km * DEG_PER_KM;
    (centre.0 + dy, centre.1 + dx)
}

fn build_population(s: &Scenario, rng: &mut StreamRng) -> (Vec<Family>, Vec<Individual>) {
    let mut families = Vec::with_capacity(s.n_families);
    let mut people = Vec::new();
    let person = |people: &mut Vec<Individual>, fam: &str, tag: &str, parents: Option<(&str, &str)>| -> String {
        let id = format!("{fam}-{tag}");
        people.push(Individual {
            id: id.clone(),
            father: parents.map(|p| p.0.to_string()),
            mother: parents.map(|p| p.1.to_string()),
            family: Some(fam.to_string()),
        });
        id
    };
    let add_family = |families: &mut Vec<Family>, age: f64, size: u32, at: (f64, f64)| -> String {
        let id = format!("F{:02}", families.len());
        families.push(Family {
            id: id.clone(),
            head_mean_age: age,
            size,
            lat: at.0,
            lon: at.1,
        });
        id
    };
    let k = &s.kin;
    for _ in 0..k.clans {
        let centre = jitter(rng, VILLAGE, 3.0);
        let elder = add_family(&mut families, 55.0 + 15.0 * rng.gen::<f64>(), 2, jitter(rng, centre, 0.1));
        let gf = person(&mut people, &elder, "a", None);
        let gm = person(&mut people, &elder, "b", None);
        let n_children = rng.gen_range(k.min_children..=k.max_children);
        for _ in 0..n_children {
            let kids = rng.gen_range(0..=k.max_grandchildren);
            let fam = add_family(&mut families, 25.0 + 15.0 * rng.gen::<f64>(), 2 + kids as u32, jitter(rng, centre, 0.3));
            let child = person(&mut people, &fam, "a", Some((&gf, &gm)));
            let spouse = person(&mut people, &fam, "b", None);
            for c in 0..kids {
                person(&mut people, &fam, &format!("c{c}"), Some((&child, &spouse)));
            }
        }
    }
    while families.len() < s.n_families {
        let kids = rng.gen_range(0..=k.max_grandchildren);
        let fam = add_family(&mut families, 25.0 + 35.0 * rng.gen::<f64>(), 2 + kids as u32, jitter(rng, VILLAGE, 3.0));
        let a = person(&mut people, &fam, "a", None);
        let b = person(&mut people, &fam, "b", None);
        for c in 0..kids {
            person(&mut people, &fam, &format!("c{c}"), Some((&a, &b)));
        }
    }
    (families, people)
}

fn build_mask(s: &Scenario, rng: &mut StreamRng) -> ObservationMask {
    let o = &s.observation;
    if o.full {
        return ObservationMask::full(s.n_families, s.n_days);
    }
    let t_max = s.n_days;
    let step = 7 / o.interviews_per_week;
    let coverage = (0..s.n_families)
        .map(|_| {
            let mut m = DayMask::new(t_max);
            let offset = rng.gen_range(0..7);
            let mut day = offset;
            // Interviews after the last study day still cover its final days.
            while day < t_max + o.days_per_interview {
                for week_slot in 0..o.interviews_per_week {
                    let d = day + week_slot * step;
                    if rng.gen::<f64>() < o.interview_prob {
                        for back in 1..=o.days_per_interview {
                            if d >= back && d - back < t_max {
                                m.set(d - back, true);
                            }
                        }
                    }
                }
                day += 7;
            }
            m
        })
        .collect();
    ObservationMask::new(coverage, t_max).expect("coverage built to length")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nulls::simulate_replicate;
    use crate::reciprocity::{pair_reciprocity, Tallies};

    fn small(boost: f64, class: BoostClass) -> Scenario {
        Scenario {
            n_families: 12,
            n_days: 200,
            kin: KinConfig {
                clans: 2,
                min_children: 2,
                max_children: 3,
                max_grandchildren: 2,
            },
            boost: BoostConfig {
                factor: boost,
                window: 3,
                class,
            },
            ..Scenario::default()
        }
    }

    #[test]
    fn default_scenario_matches_study_design() {
        let g = generate(&Scenario::default(), 1).unwrap();
        assert_eq!(g.log.n_families(), 35);
        assert_eq!(g.log.n_days(), 112);
        let frac = g.log.mask().risk_count() as f64 / (35.0 * 34.0 * 112.0);
        assert!((0.3..0.5).contains(&frac), "risk fraction {frac}");
    }

    #[test]
    fn toml_roundtrip_and_defaults() {
        let mut s = small(8.0, BoostClass::NonKinOnly);
        s.n_families = 20;
        assert_eq!(Scenario::from_toml(&s.to_toml().unwrap()).unwrap(), s);
        let partial = Scenario::from_toml("n_families = 35\n[boost]\nfactor = 8.0\nclass = \"kin_only\"\n").unwrap();
        assert_eq!(partial.n_days, 112);
        assert_eq!(partial.boost.class, BoostClass::KinOnly);
        assert!(Scenario::from_toml("bogus = 1").is_err());
        assert!(Scenario::from_toml("[boost]\nfactor = 0.5").is_err());
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let s = small(8.0, BoostClass::All);
        let a = generate(&s, 5).unwrap();
        let b = generate(&s, 5).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.truth, b.truth);
        assert_ne!(a.log, generate(&s, 6).unwrap().log);
    }

    #[test]
    fn unit_boost_is_the_null_process() {
        let g = generate(&small(1.0, BoostClass::All), 9).unwrap();
        let null = g.as_null_model();
        let (sim, _) = simulate_replicate(&null, g.log.mask(), 9, 1).unwrap();
        assert_eq!(sim.iter_events().collect::<Vec<_>>(), g.log.iter_events().collect::<Vec<_>>());
        assert_eq!(g.truth.planted_events, 0);
    }

    #[test]
    fn parent_child_households_are_close_kin() {
        let g = generate(&small(1.0, BoostClass::All), 2).unwrap();
        // F00 is the first elder household, F01 its first child household.
        assert_eq!(g.kinship.get(0, 1), 0.25);
        assert!(g.kinship.class(0, 1).is_close_kin());
        assert!(!g.kinship.class(1, 2).is_close_kin() || g.kinship.get(1, 2) >= 0.25);
        assert_eq!(g.kinship.get(0, 11), 0.0);
    }

    #[test]
    fn target_events_rescales_expected_count() {
        let mut s = Scenario::default();
        s.target_events = Some(502.0);
        let g = generate(&s, 3).unwrap();
        let expected = g.truth.generator.expected_event_count(g.log.mask(), s.observation.p_omit);
        assert!((expected - 502.0).abs() < 1e-6);
    }

    /// Observed-over-expected ratio of truth events on pair-days with exactly
    /// one active trigger, relative to pair-days with none.
    fn conditional_frequency_oracle(g: &Generated) -> (f64, f64) {
        let model = &g.truth.generator;
        let n = model.n_families();
        let t_max = model.n_days();
        let w = g.truth.scenario.boost.window;
        let mut hit = vec![false; n * n * t_max];
        for &(i, j, t) in &g.truth.events {
            hit[(i as usize * n + j as usize) * t_max + t as usize] = true;
        }
        let (mut obs1, mut exp1, mut obs0, mut exp0) = (0.0, 0.0, 0.0, 0.0);
        for j in 0..n {
            for i in (0..n).filter(|&i| i != j) {
                for s in 0..t_max {
                    let k = (s.saturating_sub(w)..s).filter(|&t| hit[(i * n + j) * t_max + t]).count();
                    let p0 = model.pair_prob(j, i, s);
                    let y = hit[(j * n + i) * t_max + s] as u8 as f64;
                    match k {
                        0 => {
                            obs0 += y;
                            exp0 += p0;
                        }
                        1 => {
                            obs1 += y;
                            exp1 += p0;
                        }
                        _ => {}
                    }
                }
            }
        }
        let ratio = (obs1 / exp1) / (obs0 / exp0);
        (ratio, ratio * (1.0 / obs1 + 1.0 / obs0).sqrt())
    }

    #[test]
    fn planted_boost_recovered_by_direct_counting_and_estimator() {
        let mut s = small(8.0, BoostClass::All);
        s.n_families = 10;
        s.n_days = 6000;
        s.kin.clans = 0;
        s.rates.attendance_sigma = 0.0;
        s.rates.party_rate_sigma = 0.0;
        s.rates.kin_weight = 0.0;
        s.rates.distance_scale_km = 1e6;
        s.rates.party_rate = 0.05;
        s.rates.attendance = 0.1;
        s.observation.full = true;
        s.observation.p_omit = 0.0;
        let runs: Vec<(Generated, (f64, f64))> = (1..=4)
            .map(|seed| {
                let g = generate(&s, seed).unwrap();
                let o = conditional_frequency_oracle(&g);
                (g, o)
            })
            .collect();
        let oracle = runs.iter().map(|r| r.1 .0).sum::<f64>() / 4.0;
        let se = runs.iter().map(|r| r.1 .1.powi(2)).sum::<f64>().sqrt() / 4.0;
        assert!((oracle - 8.0).abs() < 3.0 * se, "oracle {oracle} ± {se}");

        let g = &runs[0].0;
        let mut pooled = Tallies::default();
        for i in 0..10 {
            for j in (0..10).filter(|&j| j != i) {
                pooled += pair_reciprocity(&g.log, i, j, 3).pooled(3);
            }
        }
        let est = pooled.estimate().unwrap();
        assert!((est / oracle - 1.0).abs() < 0.25, "estimator {est} vs oracle {oracle}");
    }

    #[test]
    fn kin_only_boost_spares_non_kin_pairs() {
        let g = generate(&small(8.0, BoostClass::KinOnly), 4).unwrap();
        assert!(g.truth.planted_events > 0);
        let g = generate(&small(8.0, BoostClass::NonKinOnly), 4).unwrap();
        assert!(g.truth.planted_events > 0);
    }
}
