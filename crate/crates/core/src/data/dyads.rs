//! Department × scholar cross with the observed seminar indicator.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::geo::haversine_km;
use super::records::{DepartmentRecord, ScholarRecord, SeminarEvent};
use crate::error::{Error, Result};

/// Career length in years, counting the year of first publication.
pub fn career_age(first_pub_year: i32, reference_year: i32) -> Result<u32> {
    if first_pub_year > reference_year {
        return Err(Error::Domain(format!(
            "first publication {first_pub_year} after reference year {reference_year}"
        )));
    }
    Ok((reference_year - first_pub_year + 1) as u32)
}

/// One (department, scholar) pair. Quality fields hold the raw index values;
/// transforms are applied when the design is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadRow {
    pub dept_id: String,
    pub scholar_id: String,
    pub z: u8,
    pub distance_km: f64,
    /// Quality index of the scholar's own department.
    pub affiliation_quality: f64,
    pub citations_total: Option<u64>,
    pub dept_quality: f64,
    pub dept_size: u32,
    pub female: u8,
    pub career_age: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BuildReport {
    pub n_departments: usize,
    pub n_scholars: usize,
    pub own_department_pairs: usize,
    pub n_dyads: usize,
    pub n_seminars_matched: usize,
    pub duplicate_events_collapsed: usize,
    pub own_department_events_dropped: usize,
    /// Presenters missing from the scholar roster.
    pub unknown_presenters_dropped: usize,
    /// Scholars whose affiliation is not a known department.
    pub scholars_without_department: Vec<String>,
}

#[derive(Debug)]
pub struct BuildOutput {
    pub dyads: Vec<DyadRow>,
    pub report: BuildReport,
}

/// Crosses sampled departments with scholars, excluding own-department pairs.
///
/// Output is sorted by `(dept_id, scholar_id)`. Repeated events for the same
/// pair collapse to a single positive outcome.
pub fn build_dyads(
    departments: &[DepartmentRecord],
    scholars: &[ScholarRecord],
    seminars: &[SeminarEvent],
    reference_year: i32,
) -> Result<BuildOutput> {
    let by_id: HashMap<&str, &DepartmentRecord> =
        departments.iter().map(|d| (d.dept_id.as_str(), d)).collect();
    let mut hosts: Vec<&DepartmentRecord> = departments.iter().filter(|d| d.sampled).collect();
    hosts.sort_by(|a, b| a.dept_id.cmp(&b.dept_id));

    let mut report = BuildReport::default();
    let mut roster: Vec<(&ScholarRecord, &DepartmentRecord)> = Vec::with_capacity(scholars.len());
    for s in scholars {
        match by_id.get(s.affiliation_dept_id.as_str()) {
            Some(d) => roster.push((s, d)),
            None => report.scholars_without_department.push(s.scholar_id.clone()),
        }
    }
    roster.sort_by(|a, b| a.0.scholar_id.cmp(&b.0.scholar_id));
    let roster_ids: HashSet<&str> = roster.iter().map(|(s, _)| s.scholar_id.as_str()).collect();

    let host_ids: HashSet<&str> = hosts.iter().map(|d| d.dept_id.as_str()).collect();
    let mut events: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for ev in seminars {
        if !host_ids.contains(ev.dept_id.as_str()) {
            return Err(Error::UnknownDepartment(ev.dept_id.clone()));
        }
        if !roster_ids.contains(ev.scholar_id.as_str()) {
            report.unknown_presenters_dropped += 1;
            continue;
        }
        *events.entry((ev.dept_id.as_str(), ev.scholar_id.as_str())).or_default() += 1;
    }
    let affiliation: HashMap<&str, &str> = roster
        .iter()
        .map(|(s, _)| (s.scholar_id.as_str(), s.affiliation_dept_id.as_str()))
        .collect();
    events.retain(|&(d, s), n| {
        if affiliation[s] == d {
            report.own_department_events_dropped += *n;
            false
        } else {
            if *n > 1 {
                log::warn!("{n} seminars by {s} at {d} collapse to one positive outcome");
                report.duplicate_events_collapsed += *n - 1;
            }
            true
        }
    });

    let ages: Vec<Option<u32>> = roster
        .iter()
        .map(|(s, _)| {
            s.first_pub_year
                .map(|y| career_age(y, reference_year))
                .transpose()
        })
        .collect::<Result<_>>()?;

    let mut dyads = Vec::with_capacity(hosts.len() * roster.len());
    for host in &hosts {
        for ((s, aff), age) in roster.iter().zip(&ages) {
            if s.affiliation_dept_id == host.dept_id {
                report.own_department_pairs += 1;
                continue;
            }
            let z = u8::from(events.contains_key(&(host.dept_id.as_str(), s.scholar_id.as_str())));
            dyads.push(DyadRow {
                dept_id: host.dept_id.clone(),
                scholar_id: s.scholar_id.clone(),
                z,
                distance_km: haversine_km(host.latitude, host.longitude, aff.latitude, aff.longitude)?,
                affiliation_quality: aff.quality_index,
                citations_total: s.citations_total,
                dept_quality: host.quality_index,
                dept_size: host.n_professors,
                female: u8::from(s.female),
                career_age: *age,
            });
        }
    }
    report.n_departments = hosts.len();
    report.n_scholars = roster.len();
    report.n_dyads = dyads.len();
    report.n_seminars_matched = events.len();
    Ok(BuildOutput { dyads, report })
}

/// Marks departments that hosted and scholars that gave at least one seminar.
pub fn mark_activity(
    departments: &mut [DepartmentRecord],
    scholars: &mut [ScholarRecord],
    seminars: &[SeminarEvent],
) {
    let hosts: HashSet<&str> = seminars.iter().map(|e| e.dept_id.as_str()).collect();
    let speakers: HashSet<&str> = seminars.iter().map(|e| e.scholar_id.as_str()).collect();
    for d in departments.iter_mut() {
        d.held_seminar_in_year = hosts.contains(d.dept_id.as_str());
    }
    for s in scholars.iter_mut() {
        s.presented_in_year = speakers.contains(s.scholar_id.as_str());
    }
}

/// Restricts to pairs whose department hosted and whose scholar presented at
/// least one seminar in the sample.
pub fn active_subsample(dyads: &[DyadRow]) -> Vec<DyadRow> {
    let hosts: HashSet<&str> = dyads.iter().filter(|d| d.z == 1).map(|d| d.dept_id.as_str()).collect();
    let speakers: HashSet<&str> =
        dyads.iter().filter(|d| d.z == 1).map(|d| d.scholar_id.as_str()).collect();
    dyads
        .iter()
        .filter(|d| hosts.contains(d.dept_id.as_str()) && speakers.contains(d.scholar_id.as_str()))
        .cloned()
        .collect()
}

pub fn write_dyads<W: Write>(out: W, dyads: &[DyadRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for d in dyads {
        w.serialize(d).map_err(|e| Error::Malformed {
            path: "dyads.csv".into(),
            line: 0,
            message: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| Error::io("dyads.csv", e))
}

pub fn read_dyads<R: Read>(input: R, source: &str) -> Result<Vec<DyadRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize()
        .map(|r: std::result::Result<DyadRow, csv::Error>| {
            let d = r.map_err(|e| Error::Malformed {
                path: source.into(),
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            if d.z > 1 {
                return Err(Error::Malformed {
                    path: source.into(),
                    line: 0,
                    message: format!("z must be 0 or 1 for ({}, {})", d.dept_id, d.scholar_id),
                });
            }
            Ok(d)
        })
        .collect()
}
