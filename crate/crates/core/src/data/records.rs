//! Roster and seminar-event records, with their CSV readers and writers.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Departments with fewer professors are excluded from every sample.
pub const MIN_PROFESSORS: u32 = 5;

pub const DEFAULT_REFERENCE_YEAR: i32 = 2018;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepartmentRecord {
    pub dept_id: String,
    pub name: String,
    pub quality_index: f64,
    pub n_professors: u32,
    pub latitude: f64,
    pub longitude: f64,
    /// Host departments are crossed with scholars; the rest only supply
    /// affiliation attributes.
    pub sampled: bool,
    pub held_seminar_in_year: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScholarRecord {
    pub scholar_id: String,
    pub name: String,
    pub affiliation_dept_id: String,
    pub female: bool,
    pub citations_total: Option<u64>,
    pub first_pub_year: Option<i32>,
    pub presented_in_year: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminarEvent {
    pub dept_id: String,
    pub scholar_id: String,
    pub date: String,
    pub title: Option<String>,
}

/// A row that parsed but broke a roster invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub line: u64,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub rejected: Vec<Rejection>,
}

#[derive(Deserialize)]
struct DepartmentRow {
    dept_id: String,
    #[serde(default)]
    name: String,
    quality_index: f64,
    n_professors: u32,
    latitude: f64,
    longitude: f64,
    #[serde(default)]
    sampled: Option<u8>,
}

#[derive(Deserialize)]
struct ScholarRow {
    scholar_id: String,
    #[serde(default)]
    name: String,
    affiliation_dept_id: String,
    female: u8,
    citations_total: Option<u64>,
    first_pub_year: Option<i32>,
}

#[derive(Deserialize)]
struct SeminarRow {
    dept_id: String,
    scholar_id: String,
    date: String,
    #[serde(default)]
    title: Option<String>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn malformed(source: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: source.into(),
        line,
        message: message.into(),
    }
}

/// Iterates typed rows with their 1-based line numbers.
fn rows<R: Read, T: for<'de> Deserialize<'de>>(
    input: R,
    source: &str,
) -> Result<Vec<(u64, T)>> {
    let mut rdr = reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| malformed(source, 1, e.to_string()))?
        .clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(source, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row: T = rec
            .deserialize(Some(&headers))
            .map_err(|e| malformed(source, line, e.to_string()))?;
        out.push((line, row));
    }
    Ok(out)
}

fn flag(value: u8, field: &str, source: &str, line: u64) -> Result<bool> {
    match value {
        0 => Ok(false),
        1 => Ok(true),
        v => Err(malformed(source, line, format!("{field} must be 0 or 1, got {v}"))),
    }
}

pub fn read_departments<R: Read>(input: R, source: &str) -> Result<Loaded<DepartmentRecord>> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (line, row) in rows::<_, DepartmentRow>(input, source)? {
        if !seen.insert(row.dept_id.clone()) {
            return Err(Error::DuplicateId {
                kind: "department",
                id: row.dept_id,
            });
        }
        let sampled = flag(row.sampled.unwrap_or(1), "sampled", source, line)?;
        let reason = if row.n_professors < MIN_PROFESSORS {
            Some(format!(
                "inclusion rule: {} professors, fewer than {MIN_PROFESSORS}",
                row.n_professors
            ))
        } else if !(row.quality_index > 0.0) || !row.quality_index.is_finite() {
            Some(format!("quality_index must be positive, got {}", row.quality_index))
        } else if !(-90.0..=90.0).contains(&row.latitude)
            || !(-180.0..=180.0).contains(&row.longitude)
        {
            Some(format!(
                "coordinates ({}, {}) out of range",
                row.latitude, row.longitude
            ))
        } else {
            None
        };
        if let Some(reason) = reason {
            rejected.push(Rejection {
                line,
                id: row.dept_id,
                reason,
            });
            continue;
        }
        records.push(DepartmentRecord {
            dept_id: row.dept_id,
            name: row.name,
            quality_index: row.quality_index,
            n_professors: row.n_professors,
            latitude: row.latitude,
            longitude: row.longitude,
            sampled,
            held_seminar_in_year: false,
        });
    }
    Ok(Loaded { records, rejected })
}

pub fn load_departments(path: impl AsRef<Path>) -> Result<Loaded<DepartmentRecord>> {
    let path = path.as_ref();
    read_departments(open(path)?, &path.display().to_string())
}

pub fn read_scholars<R: Read>(
    input: R,
    source: &str,
    reference_year: i32,
) -> Result<Loaded<ScholarRecord>> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (line, row) in rows::<_, ScholarRow>(input, source)? {
        if !seen.insert(row.scholar_id.clone()) {
            return Err(Error::DuplicateId {
                kind: "scholar",
                id: row.scholar_id,
            });
        }
        let female = flag(row.female, "female", source, line)?;
        if let Some(year) = row.first_pub_year.filter(|&y| y > reference_year) {
            rejected.push(Rejection {
                line,
                id: row.scholar_id,
                reason: format!("first_pub_year {year} after reference year {reference_year}"),
            });
            continue;
        }
        records.push(ScholarRecord {
            scholar_id: row.scholar_id,
            name: row.name,
            affiliation_dept_id: row.affiliation_dept_id,
            female,
            citations_total: row.citations_total,
            first_pub_year: row.first_pub_year,
            presented_in_year: false,
        });
    }
    Ok(Loaded { records, rejected })
}

pub fn load_scholars(path: impl AsRef<Path>, reference_year: i32) -> Result<Loaded<ScholarRecord>> {
    let path = path.as_ref();
    read_scholars(open(path)?, &path.display().to_string(), reference_year)
}

fn valid_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() < 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    let digits = |r: std::ops::Range<usize>| b[r].iter().all(u8::is_ascii_digit);
    if !(digits(0..4) && digits(5..7) && digits(8..10)) {
        return false;
    }
    let month: u32 = s[5..7].parse().unwrap_or(0);
    let day: u32 = s[8..10].parse().unwrap_or(0);
    (1..=12).contains(&month) && (1..=31).contains(&day) && (b.len() == 10 || b[10] == b'T')
}

pub fn read_seminars<R: Read>(input: R, source: &str) -> Result<Vec<SeminarEvent>> {
    rows::<_, SeminarRow>(input, source)?
        .into_iter()
        .map(|(line, row)| {
            if !valid_iso_date(&row.date) {
                return Err(malformed(source, line, format!("date `{}` is not ISO-8601", row.date)));
            }
            Ok(SeminarEvent {
                dept_id: row.dept_id,
                scholar_id: row.scholar_id,
                date: row.date,
                title: row.title.filter(|t| !t.is_empty()),
            })
        })
        .collect()
}

pub fn load_seminars(path: impl AsRef<Path>) -> Result<Vec<SeminarEvent>> {
    let path = path.as_ref();
    read_seminars(open(path)?, &path.display().to_string())
}

fn csv_err(path: &str, e: csv::Error) -> Error {
    Error::Malformed {
        path: path.into(),
        line: 0,
        message: e.to_string(),
    }
}

pub fn write_departments<W: Write>(out: W, departments: &[DepartmentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let e = |err| csv_err("departments.csv", err);
    w.write_record([
        "dept_id",
        "name",
        "quality_index",
        "n_professors",
        "latitude",
        "longitude",
        "sampled",
    ])
    .map_err(e)?;
    for d in departments {
        w.write_record([
            d.dept_id.clone(),
            d.name.clone(),
            d.quality_index.to_string(),
            d.n_professors.to_string(),
            d.latitude.to_string(),
            d.longitude.to_string(),
            u8::from(d.sampled).to_string(),
        ])
        .map_err(e)?;
    }
    w.flush().map_err(|err| Error::io("departments.csv", err))
}

pub fn write_scholars<W: Write>(out: W, scholars: &[ScholarRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let e = |err| csv_err("scholars.csv", err);
    w.write_record([
        "scholar_id",
        "name",
        "affiliation_dept_id",
        "female",
        "citations_total",
        "first_pub_year",
    ])
    .map_err(e)?;
    for s in scholars {
        w.write_record([
            s.scholar_id.clone(),
            s.name.clone(),
            s.affiliation_dept_id.clone(),
            u8::from(s.female).to_string(),
            s.citations_total.map(|c| c.to_string()).unwrap_or_default(),
            s.first_pub_year.map(|y| y.to_string()).unwrap_or_default(),
        ])
        .map_err(e)?;
    }
    w.flush().map_err(|err| Error::io("scholars.csv", err))
}

pub fn write_seminars<W: Write>(out: W, seminars: &[SeminarEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let e = |err| csv_err("seminars.csv", err);
    w.write_record(["dept_id", "scholar_id", "date", "title"]).map_err(e)?;
    for s in seminars {
        w.write_record([
            s.dept_id.as_str(),
            s.scholar_id.as_str(),
            s.date.as_str(),
            s.title.as_deref().unwrap_or(""),
        ])
        .map_err(e)?;
    }
    w.flush().map_err(|err| Error::io("seminars.csv", err))
}
