//! CSV ingestion: `families.csv` and `interviews.csv`.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use serde::Deserialize;

use super::{reconcile, validate_families, Claim, Family, RawReport, Reconciled, Role};
use crate::error::{Error, Result};

/// One row of `interviews.csv`. Empty host/guest means "interviewed, nothing to report".
#[derive(Clone, Debug, Deserialize)]
pub struct InterviewRow {
    pub reporter_id: String,
    pub interview_date: NaiveDate,
    pub covered_date: NaiveDate,
    #[serde(default)]
    pub host_id: String,
    #[serde(default)]
    pub guest_id: String,
    #[serde(default)]
    pub role: String,
}

pub fn read_families_csv<R: Read>(reader: R) -> Result<Vec<Family>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let families = rdr
        .deserialize::<Family>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    validate_families(&families)?;
    Ok(families)
}

pub fn read_interviews_csv<R: Read>(reader: R) -> Result<Vec<InterviewRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    Ok(rdr
        .deserialize::<InterviewRow>()
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

fn parse_role(s: &str) -> Result<Role> {
    match s.to_ascii_lowercase().as_str() {
        "as_host" | "host" => Ok(Role::AsHost),
        "as_guest" | "guest" => Ok(Role::AsGuest),
        other => Err(Error::Parse(format!("unknown role `{other}`"))),
    }
}

/// Result of ingestion: the reconciled log plus its calendar anchor.
#[derive(Debug)]
pub struct Ingested {
    pub reconciled: Reconciled,
    pub reports: Vec<RawReport>,
    pub day_zero: NaiveDate,
    pub risk_count: u64,
}

/// Group rows into reports, convert dates to day offsets from the earliest
/// covered date and reconcile.
pub fn ingest_csv(rows: &[InterviewRow], families: &[Family], seed: u64) -> Result<Ingested> {
    let day_zero = rows
        .iter()
        .map(|r| r.covered_date)
        .min()
        .ok_or_else(|| Error::Invalid("no interview rows".into()))?;
    let last = rows.iter().map(|r| r.covered_date).max().unwrap_or(day_zero);
    let n_days = (last - day_zero).num_days() as usize + 1;
    let offset = |d: NaiveDate| (d - day_zero).num_days();

    let mut grouped: BTreeMap<(String, NaiveDate), RawReport> = BTreeMap::new();
    for row in rows {
        let report = grouped
            .entry((row.reporter_id.clone(), row.interview_date))
            .or_insert_with(|| RawReport {
                reporter: row.reporter_id.clone(),
                interview_day: offset(row.interview_date),
                covered_days: Default::default(),
                claims: Vec::new(),
            });
        let day = offset(row.covered_date);
        report.covered_days.insert(day);
        match (row.host_id.is_empty(), row.guest_id.is_empty()) {
            (true, true) => {}
            (false, false) => report.claims.push(Claim {
                host: row.host_id.clone(),
                guest: row.guest_id.clone(),
                day,
                role: parse_role(&row.role)?,
            }),
            _ => {
                return Err(Error::Parse(format!(
                    "row for reporter {} on {} has only one of host/guest",
                    row.reporter_id, row.covered_date
                )))
            }
        }
    }
    let reports: Vec<RawReport> = grouped.into_values().collect();
    let (_, risk_count) = super::build_observation_mask(&reports, families, n_days)?;
    let reconciled = reconcile(&reports, families, n_days, Some(day_zero), seed)?;
    Ok(Ingested {
        reconciled,
        reports,
        day_zero,
        risk_count,
    })
}
