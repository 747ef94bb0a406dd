//! Synthetic seminar markets drawn from the structural model.
//!
//! Every random quantity comes from a ChaCha8 stream keyed by what it
//! describes: one stream per department, one per scholar and one per
//! (department, scholar) pair. Growing the roster therefore appends new
//! draws without disturbing existing ones.

mod monte_carlo;

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{
    build_design, build_dyads, mark_activity, write_departments, write_dyads, write_scholars,
    write_seminars, ColumnRule, Covariate, DepartmentRecord, DesignMatrices, DesignSpec, DyadRow,
    ScholarRecord, SeminarEvent, DEFAULT_REFERENCE_YEAR, MIN_PROFESSORS,
};
use crate::error::{Error, Result};
use crate::estimator::FitOptions;
use crate::numeric::Correlation;
use crate::query::Coefficients;

pub use monte_carlo::{monte_carlo, McParameter, McReplication, McReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalParams {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntRange {
    pub min: u32,
    pub max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Departments in the roster; all supply affiliations.
    pub n_departments: usize,
    /// The first this-many departments host seminars and form dyads.
    pub n_sampled_departments: usize,
    pub n_scholars: usize,
    pub true_beta_invite: BTreeMap<String, f64>,
    pub true_beta_accept: BTreeMap<String, f64>,
    pub true_rho: Correlation,
    /// Department quality index.
    pub quality: LogNormalParams,
    /// Number of professors per department.
    pub dept_size: IntRange,
    pub female_share: f64,
    pub coordinates: BoundingBox,
    pub career_age: IntRange,
    pub citations: LogNormalParams,
    pub reference_year: i32,
    pub design: DesignSpec,
    /// Options for fits run by [`monte_carlo`].
    pub fit: FitOptions,
    pub seed: u64,
}

fn coefs(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
    v.iter().map(|(k, b)| (k.to_string(), *b)).collect()
}

/// Affiliation design with every non-binary column standardized.
pub fn default_design() -> DesignSpec {
    let mut spec = DesignSpec::affiliation();
    for c in spec.union() {
        if c != Covariate::Female {
            spec.transforms.insert(
                c,
                ColumnRule {
                    transform: c.default_rule().transform,
                    standardize: true,
                },
            );
        }
    }
    spec
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_departments: 240,
            n_sampled_departments: 42,
            n_scholars: 4_800,
            true_beta_invite: coefs(&[
                ("affiliation_quality", 0.5),
                ("dept_size", 0.3),
                ("female", 0.0),
                ("distance", -0.4),
                ("intercept", -1.0),
            ]),
            true_beta_accept: coefs(&[
                ("dept_quality", 0.6),
                ("affiliation_quality", -0.2),
                ("distance", -0.3),
                ("intercept", -1.0),
            ]),
            true_rho: Correlation::new(0.3).expect("valid correlation"),
            quality: LogNormalParams { mu: 0.0, sigma: 0.6 },
            dept_size: IntRange { min: 5, max: 60 },
            female_share: 0.23,
            coordinates: BoundingBox {
                lat_min: 25.0,
                lat_max: 49.0,
                lon_min: -124.0,
                lon_max: -67.0,
            },
            career_age: IntRange { min: 1, max: 40 },
            citations: LogNormalParams { mu: 5.0, sigma: 1.2 },
            reference_year: DEFAULT_REFERENCE_YEAR,
            design: default_design(),
            fit: FitOptions {
                n_starts: 2,
                ..FitOptions::default()
            },
            seed: 2018,
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn truth(&self) -> Coefficients {
        Coefficients {
            beta_invite: self.true_beta_invite.clone(),
            beta_accept: self.true_beta_accept.clone(),
            rho: self.true_rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.n_departments == 0 {
            return bad("n_departments must be positive".into());
        }
        if self.n_scholars == 0 {
            return bad("n_scholars must be positive".into());
        }
        if self.n_sampled_departments == 0 || self.n_sampled_departments > self.n_departments {
            return bad("n_sampled_departments must lie in 1..=n_departments".into());
        }
        for (name, p) in [("quality", self.quality), ("citations", self.citations)] {
            if !p.mu.is_finite() || !(p.sigma >= 0.0) || !p.sigma.is_finite() {
                return bad(format!("{name}: need finite mu and sigma >= 0"));
            }
        }
        if self.dept_size.min < MIN_PROFESSORS || self.dept_size.min > self.dept_size.max {
            return bad(format!("dept_size: need {MIN_PROFESSORS} <= min <= max"));
        }
        if self.career_age.min == 0 || self.career_age.min > self.career_age.max {
            return bad("career_age: need 1 <= min <= max".into());
        }
        if !(0.0..=1.0).contains(&self.female_share) {
            return bad(format!("female_share {} outside [0, 1]", self.female_share));
        }
        let b = self.coordinates;
        if !(-90.0 <= b.lat_min && b.lat_min <= b.lat_max && b.lat_max <= 90.0)
            || !(-180.0 <= b.lon_min && b.lon_min <= b.lon_max && b.lon_max <= 180.0)
        {
            return bad("coordinates: invalid bounding box".into());
        }
        self.design.check_exclusion_restriction()?;
        self.fit.validate()?;
        check_truth(&self.truth(), &self.design)
    }
}

/// Coefficient names must be exactly the design's columns.
fn check_truth(truth: &Coefficients, spec: &DesignSpec) -> Result<()> {
    for (eq, beta, cols) in [
        ("invite", &truth.beta_invite, &spec.invite),
        ("accept", &truth.beta_accept, &spec.accept),
    ] {
        let mut want: Vec<String> = cols.iter().map(|c| c.name().to_string()).collect();
        want.push(crate::data::INTERCEPT.into());
        want.sort();
        let have: Vec<String> = beta.keys().cloned().collect();
        if have != want {
            return Err(Error::Invalid(format!(
                "true_beta_{eq} names {have:?} do not match the design columns {want:?}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub departments: Vec<DepartmentRecord>,
    pub scholars: Vec<ScholarRecord>,
}

const DEPT_STREAM: u64 = 1 << 62;
const SCHOLAR_STREAM: u64 = 2 << 62;
pub(crate) const REPLICATION_STREAM: u64 = 3 << 62;

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn dept_id(i: usize) -> String {
    format!("D{i:04}")
}

pub fn scholar_id(i: usize) -> String {
    format!("S{i:06}")
}

/// Departments and scholars with covariates from the configured distributions.
pub fn gen_population(config: &SimConfig) -> Result<Population> {
    config.validate()?;
    let lognormal = |p: LogNormalParams| {
        LogNormal::new(p.mu, p.sigma).map_err(|e| Error::Invalid(format!("log-normal: {e}")))
    };
    let quality = lognormal(config.quality)?;
    let citations = lognormal(config.citations)?;
    let b = config.coordinates;
    let departments = (0..config.n_departments)
        .map(|i| {
            let mut rng = stream(config.seed, DEPT_STREAM | i as u64);
            let sampled = i < config.n_sampled_departments;
            DepartmentRecord {
                dept_id: dept_id(i),
                name: format!("Department {i}"),
                quality_index: quality.sample(&mut rng),
                n_professors: rng.random_range(config.dept_size.min..=config.dept_size.max),
                latitude: rng.random_range(b.lat_min..=b.lat_max),
                longitude: rng.random_range(b.lon_min..=b.lon_max),
                sampled,
                held_seminar_in_year: sampled,
            }
        })
        .collect();
    let scholars = (0..config.n_scholars)
        .map(|i| {
            let mut rng = stream(config.seed, SCHOLAR_STREAM | i as u64);
            let age = rng.random_range(config.career_age.min..=config.career_age.max);
            ScholarRecord {
                scholar_id: scholar_id(i),
                name: format!("Scholar {i}"),
                affiliation_dept_id: dept_id(rng.random_range(0..config.n_departments)),
                female: rng.random_bool(config.female_share),
                citations_total: Some(citations.sample(&mut rng).round() as u64),
                first_pub_year: Some(config.reference_year - age as i32 + 1),
                presented_in_year: true,
            }
        })
        .collect();
    Ok(Population { departments, scholars })
}

/// Latent decisions and shocks behind one dyad's outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentDraw {
    pub invite: bool,
    pub accept: bool,
    pub shock_invite: f64,
    pub shock_accept: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub departments: Vec<DepartmentRecord>,
    pub scholars: Vec<ScholarRecord>,
    pub seminars: Vec<SeminarEvent>,
    pub dyads: Vec<DyadRow>,
    pub design: DesignMatrices,
    /// Not observable in real data; kept for checks.
    pub latent: Vec<LatentDraw>,
}

fn ordered_beta(beta: &BTreeMap<String, f64>, names: &[String], eq: &str) -> Result<DVector<f64>> {
    let v = names
        .iter()
        .map(|n| {
            beta.get(n)
                .copied()
                .ok_or_else(|| Error::UnknownCovariate(format!("{n} has no true {eq} coefficient")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if beta.len() != names.len() {
        return Err(Error::Invalid(format!("true {eq} coefficients name columns not in the design")));
    }
    Ok(DVector::from_vec(v))
}

fn parse_index(id: &str) -> Option<u64> {
    id.get(1..)?.parse().ok()
}

/// Draws every dyad's outcome: `I = 1` iff `x_I β_I + ε_I > 0`, `A = 1` iff
/// `x_A β_A + ε_A > 0`, `z = I·A`, with `(ε_I, ε_A)` standard bivariate
/// normal with correlation ρ.
pub fn simulate_dyads(
    population: &Population,
    truth: &Coefficients,
    spec: &DesignSpec,
    reference_year: i32,
    seed: u64,
) -> Result<SimOutput> {
    spec.check_exclusion_restriction()?;
    let built = build_dyads(&population.departments, &population.scholars, &[], reference_year)?;
    let mut dyads = built.dyads;
    let mut design = build_design(&dyads, spec, false)?;
    let bi = ordered_beta(&truth.beta_invite, &design.invite_names, "invite")?;
    let ba = ordered_beta(&truth.beta_accept, &design.accept_names, "accept")?;
    let a = &design.x_invite * bi;
    let b = &design.x_accept * ba;
    let rho = truth.rho.get();
    let s = (1.0 - rho * rho).sqrt();
    let dept_index: HashMap<&str, u64> = population
        .departments
        .iter()
        .enumerate()
        .map(|(i, d)| (d.dept_id.as_str(), parse_index(&d.dept_id).unwrap_or(i as u64)))
        .collect();
    let scholar_index: HashMap<&str, u64> = population
        .scholars
        .iter()
        .enumerate()
        .map(|(i, s)| (s.scholar_id.as_str(), parse_index(&s.scholar_id).unwrap_or(i as u64)))
        .collect();
    let mut latent = Vec::with_capacity(dyads.len());
    let mut seminars = Vec::new();
    for (i, d) in dyads.iter_mut().enumerate() {
        let key = (dept_index[d.dept_id.as_str()] << 32) | scholar_index[d.scholar_id.as_str()];
        let mut rng = stream(seed, key);
        let e1: f64 = rng.sample(StandardNormal);
        let eta: f64 = rng.sample(StandardNormal);
        let e2 = rho * e1 + s * eta;
        let invite = a[i] + e1 > 0.0;
        let accept = b[i] + e2 > 0.0;
        d.z = u8::from(invite && accept);
        design.z[i] = f64::from(d.z);
        if d.z == 1 {
            let month: u32 = rng.random_range(1..=12);
            let day: u32 = rng.random_range(1..=28);
            seminars.push(SeminarEvent {
                dept_id: d.dept_id.clone(),
                scholar_id: d.scholar_id.clone(),
                date: format!("{reference_year}-{month:02}-{day:02}"),
                title: None,
            });
        }
        latent.push(LatentDraw {
            invite,
            accept,
            shock_invite: e1,
            shock_accept: e2,
        });
    }
    let mut departments = population.departments.clone();
    let mut scholars = population.scholars.clone();
    mark_activity(&mut departments, &mut scholars, &seminars);
    Ok(SimOutput {
        departments,
        scholars,
        seminars,
        dyads,
        design,
        latent,
    })
}

/// Population plus outcomes for a whole configuration.
pub fn simulate(config: &SimConfig) -> Result<SimOutput> {
    let pop = gen_population(config)?;
    simulate_dyads(&pop, &config.truth(), &config.design, config.reference_year, config.seed)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes the three roster CSVs, the dyad table, the design spec and the
/// true coefficients into `dir`.
pub fn write_output(dir: &Path, out: &SimOutput, config: &SimConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_departments(create(dir, "departments.csv")?, &out.departments)?;
    write_scholars(create(dir, "scholars.csv")?, &out.scholars)?;
    write_seminars(create(dir, "seminars.csv")?, &out.seminars)?;
    write_dyads(create(dir, "dyads.csv")?, &out.dyads)?;
    for (name, json) in [
        ("spec.json", serde_json::to_string_pretty(&config.design)?),
        ("truth.json", serde_json::to_string_pretty(&config.truth())?),
    ] {
        let path = dir.join(name);
        fs::write(&path, json + "\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
