//! Genealogical relatedness, household distances and kin classes.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_store::Family;

/// Mean Earth radius (IUGG), km.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Floor applied before taking the log of a household distance, km.
pub const MIN_DISTANCE_KM: f64 = 0.005;

/// Close-kin threshold on mean family-pair relatedness (inclusive).
pub const CLOSE_KIN_THRESHOLD: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Individual {
    pub id: String,
    pub father: Option<String>,
    pub mother: Option<String>,
    /// Study family the individual belongs to, if any.
    pub family: Option<String>,
}

/// A validated genealogy with its kinship coefficients precomputed.
#[derive(Clone, Debug)]
pub struct Pedigree {
    individuals: Vec<Individual>,
    index: HashMap<String, usize>,
    /// Kinship coefficients φ, row-major over `individuals`.
    phi: Vec<f64>,
}

impl Pedigree {
    /// Validate parent links (known ids, no cycles) and run the kinship recursion.
    pub fn new(individuals: Vec<Individual>) -> Result<Self> {
        let mut index = HashMap::with_capacity(individuals.len());
        for (k, ind) in individuals.iter().enumerate() {
            if index.insert(ind.id.clone(), k).is_some() {
                return Err(Error::Pedigree(format!("duplicate individual `{}`", ind.id)));
            }
        }
        let n = individuals.len();
        let mut parents = vec![[None, None]; n];
        for (k, ind) in individuals.iter().enumerate() {
            for (slot, p) in [&ind.father, &ind.mother].into_iter().enumerate() {
                if let Some(pid) = p {
                    let pk = *index
                        .get(pid)
                        .ok_or_else(|| Error::Pedigree(format!("parent `{pid}` of `{}` is not listed", ind.id)))?;
                    if pk == k {
                        return Err(Error::Pedigree(format!("`{}` is its own parent", ind.id)));
                    }
                    parents[k][slot] = Some(pk);
                }
            }
        }
        let order = topological_order(&parents).ok_or_else(|| Error::Pedigree("parent links contain a cycle".into()))?;

        // Standard recursion over a parents-first ordering:
        //   φ(x, x) = ½ (1 + φ(father, mother))
        //   φ(x, y) = ½ (φ(father(x), y) + φ(mother(x), y))   (y earlier than x)
        let mut phi = vec![0.0; n * n];
        for (pos, &x) in order.iter().enumerate() {
            let [f, m] = parents[x];
            let fm = match (f, m) {
                (Some(f), Some(m)) => phi[f * n + m],
                _ => 0.0,
            };
            phi[x * n + x] = 0.5 * (1.0 + fm);
            for &y in &order[..pos] {
                let via = |p: Option<usize>| p.map_or(0.0, |p| phi[p * n + y]);
                let v = 0.5 * (via(f) + via(m));
                phi[x * n + y] = v;
                phi[y * n + x] = v;
            }
        }
        Ok(Pedigree {
            individuals,
            index,
            phi,
        })
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    fn position(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownIndividual(id.to_string()))
    }

    /// Kinship coefficient φ(a, b).
    pub fn kinship(&self, a: &str, b: &str) -> Result<f64> {
        let (a, b) = (self.position(a)?, self.position(b)?);
        Ok(self.phi[a * self.len() + b])
    }

    /// Coefficient of relatedness r = 2φ(a, b), saturating at 1.
    pub fn relatedness(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.relatedness_at(self.position(a)?, self.position(b)?))
    }

    fn relatedness_at(&self, a: usize, b: usize) -> f64 {
        (2.0 * self.phi[a * self.len() + b]).clamp(0.0, 1.0)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            individual_id: String,
            #[serde(default)]
            father_id: String,
            #[serde(default)]
            mother_id: String,
            #[serde(default)]
            family_id: String,
        }
        let opt = |s: String| (!s.is_empty()).then_some(s);
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut out = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            out.push(Individual {
                id: row.individual_id,
                father: opt(row.father_id),
                mother: opt(row.mother_id),
                family: opt(row.family_id),
            });
        }
        Pedigree::new(out)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["individual_id", "father_id", "mother_id", "family_id"])?;
        for ind in &self.individuals {
            let s = |o: &Option<String>| o.clone().unwrap_or_default();
            w.write_record([ind.id.clone(), s(&ind.father), s(&ind.mother), s(&ind.family)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn topological_order(parents: &[[Option<usize>; 2]]) -> Option<Vec<usize>> {
    let n = parents.len();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut pending = vec![0usize; n];
    for (k, ps) in parents.iter().enumerate() {
        for p in ps.iter().flatten() {
            children[*p].push(k);
            pending[k] += 1;
        }
    }
    let mut order: Vec<usize> = (0..n).filter(|&k| pending[k] == 0).collect();
    let mut head = 0;
    while head < order.len() {
        let x = order[head];
        head += 1;
        for &c in &children[x] {
            pending[c] -= 1;
            if pending[c] == 0 {
                order.push(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Symmetric matrix of mean family-pair relatedness `r̄_ij`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinshipMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
}

impl KinshipMatrix {
    pub fn new(ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if values.len() != n * n {
            return Err(Error::Invalid("kinship matrix is not square".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j];
                if i != j && (!(0.0..=1.0).contains(&v) || v != values[j * n + i]) {
                    return Err(Error::Invalid(format!(
                        "kinship entry ({}, {}) must be symmetric and in [0, 1]",
                        ids[i], ids[j]
                    )));
                }
            }
        }
        Ok(KinshipMatrix { ids, values })
    }

    /// All pairs unrelated.
    pub fn zeros(ids: Vec<String>) -> Self {
        let n = ids.len();
        KinshipMatrix {
            ids,
            values: vec![0.0; n * n],
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `r̄_ij` by family index. The diagonal is unused and reads as 0.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.values[i * self.len() + j]
        }
    }

    pub fn class(&self, i: usize, j: usize) -> PairClass {
        classify(self.get(i, j))
    }

    /// Reorder to match `families`, failing if any family is missing.
    pub fn aligned_to(&self, families: &[Family]) -> Result<KinshipMatrix> {
        let pos: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect();
        let idx = families
            .iter()
            .map(|f| pos.get(f.id.as_str()).copied().ok_or_else(|| Error::UnknownFamily(f.id.clone())))
            .collect::<Result<Vec<_>>>()?;
        let n = idx.len();
        let mut values = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                values[a * n + b] = self.values[idx[a] * self.len() + idx[b]];
            }
        }
        Ok(KinshipMatrix {
            ids: families.iter().map(|f| f.id.clone()).collect(),
            values,
        })
    }

    /// Dense CSV with family ids as header row and first column; diagonal left empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![String::from("id")];
        header.extend(self.ids.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            for j in 0..self.len() {
                row.push(if i == j { String::new() } else { self.get(i, j).to_string() });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let ids: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
        let n = ids.len();
        let mut values = vec![0.0; n * n];
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if i >= n || rec.get(0) != Some(ids[i].as_str()) {
                return Err(Error::Parse("kinship rows must follow header order".into()));
            }
            for j in 0..n {
                if i != j {
                    let cell = rec.get(j + 1).unwrap_or("");
                    values[i * n + j] = cell
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad kinship value `{cell}`")))?;
                }
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::Parse("kinship matrix is not square".into()));
        }
        KinshipMatrix::new(ids, values)
    }
}

/// `r̄_ij`: mean relatedness over all cross-family member pairs.
pub fn family_relatedness(pedigree: &Pedigree, families: &[Family]) -> Result<KinshipMatrix> {
    let members: Vec<Vec<usize>> = families
        .iter()
        .map(|f| {
            let m: Vec<usize> = pedigree
                .individuals
                .iter()
                .enumerate()
                .filter(|(_, ind)| ind.family.as_deref() == Some(f.id.as_str()))
                .map(|(k, _)| k)
                .collect();
            if m.is_empty() {
                Err(Error::EmptyFamily(f.id.clone()))
            } else {
                Ok(m)
            }
        })
        .collect::<Result<_>>()?;
    let n = families.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut sum = 0.0;
            for &a in &members[i] {
                for &b in &members[j] {
                    sum += pedigree.relatedness_at(a, b);
                }
            }
            let v = sum / (members[i].len() * members[j].len()) as f64;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    KinshipMatrix::new(families.iter().map(|f| f.id.clone()).collect(), values)
}

/// Great-circle distance by the spherical law of cosines, km.
pub fn household_distance(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dl = (lon2 - lon1).to_radians();
    let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
    EARTH_RADIUS_KM * c.clamp(-1.0, 1.0).acos()
}

pub fn family_distance(a: &Family, b: &Family) -> f64 {
    household_distance(a.lat, a.lon, b.lat, b.lon)
}

/// Natural log of distance with the coincident-household floor.
pub fn log_distance(km: f64) -> f64 {
    km.max(MIN_DISTANCE_KM).ln()
}

/// Kin class of a family pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    CloseKin,
    DistantKin,
    Unrelated,
}

impl PairClass {
    pub fn is_close_kin(self) -> bool {
        self == PairClass::CloseKin
    }
}

pub fn classify(r: f64) -> PairClass {
    if r >= CLOSE_KIN_THRESHOLD {
        PairClass::CloseKin
    } else if r > 0.0 {
        PairClass::DistantKin
    } else {
        PairClass::Unrelated
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ind(id: &str, f: Option<&str>, m: Option<&str>, fam: Option<&str>) -> Individual {
        Individual {
            id: id.into(),
            father: f.map(Into::into),
            mother: m.map(Into::into),
            family: fam.map(Into::into),
        }
    }

    /// Two founder couples; cousins c1 (via s1) and c2 (via s2).
    fn cousins() -> Pedigree {
        Pedigree::new(vec![
            ind("gf", None, None, None),
            ind("gm", None, None, None),
            ind("s1", Some("gf"), Some("gm"), None),
            ind("s2", Some("gf"), Some("gm"), None),
            ind("h", Some("gf"), None, None),
            ind("w1", None, None, None),
            ind("w2", None, None, None),
            ind("c1", Some("s1"), Some("w1"), None),
            ind("c2", Some("s2"), Some("w2"), None),
        ])
        .unwrap()
    }

    #[test]
    fn canonical_relatedness_values() {
        let p = cousins();
        assert_eq!(p.relatedness("gf", "s1").unwrap(), 0.5);
        assert_eq!(p.relatedness("s1", "s2").unwrap(), 0.5);
        assert_eq!(p.relatedness("s1", "h").unwrap(), 0.25);
        assert_eq!(p.relatedness("c1", "c2").unwrap(), 0.125);
        assert_eq!(p.relatedness("w1", "w2").unwrap(), 0.0);
        assert_eq!(p.kinship("gf", "gf").unwrap(), 0.5);
    }

    #[test]
    fn unknown_individual_is_an_error() {
        assert!(matches!(cousins().relatedness("gf", "nobody"), Err(Error::UnknownIndividual(_))));
    }

    #[test]
    fn cycles_and_missing_parents_rejected() {
        let cyc = Pedigree::new(vec![ind("a", Some("b"), None, None), ind("b", Some("a"), None, None)]);
        assert!(matches!(cyc, Err(Error::Pedigree(_))));
        assert!(Pedigree::new(vec![ind("a", Some("zz"), None, None)]).is_err());
    }

    #[test]
    fn children_listed_before_parents_are_fine() {
        let p = Pedigree::new(vec![
            ind("kid", Some("dad"), Some("mum"), None),
            ind("dad", None, None, None),
            ind("mum", None, None, None),
        ])
        .unwrap();
        assert_eq!(p.relatedness("kid", "mum").unwrap(), 0.5);
    }

    fn fam(id: &str) -> Family {
        Family {
            id: id.into(),
            head_mean_age: 40.0,
            size: 2,
            lat: 0.0,
            lon: 0.0,
        }
    }

    #[test]
    fn family_means() {
        let p = Pedigree::new(vec![
            ind("x", None, None, Some("A")),
            ind("y", None, None, Some("B")),
            ind("par", None, None, Some("P")),
            ind("k1", Some("par"), None, Some("K")),
            ind("k2", Some("par"), None, Some("K")),
        ])
        .unwrap();
        let fams = [fam("A"), fam("B"), fam("P"), fam("K")];
        let k = family_relatedness(&p, &fams).unwrap();
        assert_eq!(k.get(0, 1), 0.0);
        assert_eq!(k.get(2, 3), 0.5);
        assert_eq!(k.get(3, 2), 0.5);
        assert!(matches!(
            family_relatedness(&p, &[fam("A"), fam("Q")]),
            Err(Error::EmptyFamily(id)) if id == "Q"
        ));
    }

    #[test]
    fn mixed_family_mean_equals_double_loop() {
        let p = cousins();
        let mut inds = p.individuals().to_vec();
        let assign = [("gf", "A"), ("gm", "A"), ("s1", "B"), ("w1", "B"), ("c1", "B"), ("s2", "C"), ("c2", "C"), ("h", "C")];
        for (who, f) in assign {
            inds.iter_mut().find(|i| i.id == who).unwrap().family = Some(f.into());
        }
        let p = Pedigree::new(inds).unwrap();
        let fams = [fam("A"), fam("B"), fam("C")];
        let k = family_relatedness(&p, &fams).unwrap();
        for (a, fa) in fams.iter().enumerate() {
            for (b, fb) in fams.iter().enumerate() {
                if a == b {
                    continue;
                }
                let ma: Vec<_> = assign.iter().filter(|x| x.1 == fa.id).collect();
                let mb: Vec<_> = assign.iter().filter(|x| x.1 == fb.id).collect();
                let mut s = 0.0;
                for x in &ma {
                    for y in &mb {
                        s += p.relatedness(x.0, y.0).unwrap();
                    }
                }
                assert_eq!(k.get(a, b), s / (ma.len() * mb.len()) as f64);
            }
        }
    }

    #[test]
    fn classification_boundaries() {
        assert_eq!(classify(0.25), PairClass::CloseKin);
        assert_eq!(classify(0.1), PairClass::DistantKin);
        assert_eq!(classify(0.0), PairClass::Unrelated);
        assert_eq!(classify(0.2499999), PairClass::DistantKin);
    }

    #[test]
    fn distance_fixtures() {
        assert_eq!(household_distance(-14.8, -66.8, -14.8, -66.8), 0.0);
        let half = std::f64::consts::PI * EARTH_RADIUS_KM;
        assert_eq!(household_distance(0.0, 0.0, 0.0, 180.0), half);
        // arccos is ill-conditioned at the antipode; rounding costs ~1e-4 km
        let anti = household_distance(10.0, 20.0, -10.0, -160.0);
        assert!((anti - half).abs() < 1e-3);
        assert_eq!(log_distance(0.0), MIN_DISTANCE_KM.ln());
    }

    #[test]
    fn kinship_csv_roundtrip() {
        let k = KinshipMatrix::new(vec!["A".into(), "B".into()], vec![0.0, 0.125, 0.125, 0.0]).unwrap();
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        assert_eq!(KinshipMatrix::read_csv(buf.as_slice()).unwrap(), k);
    }

    fn arb_pedigree() -> impl Strategy<Value = Vec<Individual>> {
        proptest::collection::vec((any::<u16>(), any::<u16>(), any::<bool>()), 2..25).prop_map(|spec| {
            let mut v: Vec<Individual> = Vec::new();
            for (k, (a, b, founder)) in spec.into_iter().enumerate() {
                let pick = |x: u16| (k > 0).then(|| format!("i{}", x as usize % k));
                let (f, m) = if founder || k < 2 { (None, None) } else { (pick(a), pick(b)) };
                let m = if m == f { None } else { m };
                v.push(Individual {
                    id: format!("i{k}"),
                    father: f,
                    mother: m,
                    family: None,
                });
            }
            v
        })
    }

    proptest! {
        #[test]
        fn relatedness_symmetric_and_bounded(inds in arb_pedigree()) {
            let p = Pedigree::new(inds.clone()).unwrap();
            for a in &inds {
                for b in &inds {
                    let r = p.relatedness(&a.id, &b.id).unwrap();
                    prop_assert_eq!(r, p.relatedness(&b.id, &a.id).unwrap());
                    prop_assert!((0.0..=1.0).contains(&r));
                }
            }
            // Founders share no ancestry.
            let founders: Vec<_> = inds.iter().filter(|i| i.father.is_none() && i.mother.is_none()).collect();
            for a in &founders {
                for b in &founders {
                    if a.id != b.id {
                        prop_assert_eq!(p.relatedness(&a.id, &b.id).unwrap(), 0.0);
                    }
                }
            }
        }

        #[test]
        fn distance_symmetric_with_triangle_inequality(
            a in (-90.0f64..90.0, -180.0f64..180.0),
            b in (-90.0f64..90.0, -180.0f64..180.0),
            c in (-90.0f64..90.0, -180.0f64..180.0),
        ) {
            let d = |p: (f64, f64), q: (f64, f64)| household_distance(p.0, p.1, q.0, q.1);
            prop_assert!((d(a, b) - d(b, a)).abs() < 1e-9);
            prop_assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-9);
        }
    }
}
