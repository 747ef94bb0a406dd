//! Covariate selection, transforms, and the two-equation design matrices.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dyads::DyadRow;
use crate::error::{Error, Result};

pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    /// Quality index of the scholar's own department.
    AffiliationQuality,
    /// Citations per year of career age.
    CitationQuality,
    /// Quality index of the host department.
    DeptQuality,
    DeptSize,
    Female,
    Distance,
    CareerAge,
}

impl Covariate {
    pub const ALL: [Covariate; 7] = [
        Covariate::AffiliationQuality,
        Covariate::CitationQuality,
        Covariate::DeptQuality,
        Covariate::DeptSize,
        Covariate::Female,
        Covariate::Distance,
        Covariate::CareerAge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Covariate::AffiliationQuality => "affiliation_quality",
            Covariate::CitationQuality => "citation_quality",
            Covariate::DeptQuality => "dept_quality",
            Covariate::DeptSize => "dept_size",
            Covariate::Female => "female",
            Covariate::Distance => "distance",
            Covariate::CareerAge => "career_age",
        }
    }

    fn raw(self, d: &DyadRow) -> Option<f64> {
        match self {
            Covariate::AffiliationQuality => Some(d.affiliation_quality),
            Covariate::CitationQuality => match (d.citations_total, d.career_age) {
                (Some(c), Some(age)) => Some(c as f64 / age as f64),
                _ => None,
            },
            Covariate::DeptQuality => Some(d.dept_quality),
            Covariate::DeptSize => Some(d.dept_size as f64),
            Covariate::Female => Some(d.female as f64),
            Covariate::Distance => Some(d.distance_km),
            Covariate::CareerAge => d.career_age.map(f64::from),
        }
    }

    pub fn default_rule(self) -> ColumnRule {
        let transform = match self {
            Covariate::AffiliationQuality | Covariate::DeptQuality => Transform::Log,
            Covariate::CitationQuality | Covariate::Distance => Transform::Log1p,
            Covariate::DeptSize | Covariate::Female | Covariate::CareerAge => Transform::Identity,
        };
        ColumnRule {
            transform,
            standardize: false,
        }
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Covariate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Covariate::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownCovariate(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Log,
    /// ln(1 + x)
    Log1p,
}

impl Transform {
    fn apply(self, x: f64) -> Result<f64> {
        let y = match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
            Transform::Log1p => x.ln_1p(),
        };
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Domain(format!("{self:?} transform of {x} is not finite")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnRule {
    pub transform: Transform,
    /// Centre and scale the transformed column by its sample mean and
    /// standard deviation.
    #[serde(default)]
    pub standardize: bool,
}

/// Which covariates enter each equation, and how they are transformed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub invite: Vec<Covariate>,
    pub accept: Vec<Covariate>,
    /// Overrides of [`Covariate::default_rule`].
    #[serde(default)]
    pub transforms: BTreeMap<Covariate, ColumnRule>,
}

impl DesignSpec {
    /// Scholar quality proxied by the affiliation's quality index.
    pub fn affiliation() -> Self {
        use Covariate::*;
        DesignSpec {
            invite: vec![AffiliationQuality, DeptSize, Female, Distance],
            accept: vec![DeptQuality, AffiliationQuality, Distance],
            transforms: BTreeMap::new(),
        }
    }

    /// Scholar quality proxied by citations per career year; adds career age
    /// to the accept equation.
    pub fn citations() -> Self {
        use Covariate::*;
        DesignSpec {
            invite: vec![CitationQuality, DeptSize, Female, Distance],
            accept: vec![DeptQuality, CitationQuality, Distance, CareerAge],
            transforms: BTreeMap::new(),
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "affiliation" => Some(Self::affiliation()),
            "citations" => Some(Self::citations()),
            _ => None,
        }
    }

    pub fn rule(&self, c: Covariate) -> ColumnRule {
        self.transforms.get(&c).copied().unwrap_or_else(|| c.default_rule())
    }

    /// Every covariate of either equation, invite order first.
    pub fn union(&self) -> Vec<Covariate> {
        let mut out = self.invite.clone();
        for c in &self.accept {
            if !out.contains(c) {
                out.push(*c);
            }
        }
        out
    }

    /// At least one covariate must appear in exactly one equation.
    pub fn check_exclusion_restriction(&self) -> Result<()> {
        for (eq, list) in [("invite", &self.invite), ("accept", &self.accept)] {
            for (i, c) in list.iter().enumerate() {
                if list[..i].contains(c) {
                    return Err(Error::Invalid(format!("{c} listed twice in the {eq} equation")));
                }
            }
        }
        let same = self.invite.len() == self.accept.len()
            && self.invite.iter().all(|c| self.accept.contains(c));
        if same {
            return Err(Error::ExclusionRestriction(
                "invite and accept equations use identical covariates".into(),
            ));
        }
        Ok(())
    }
}

/// Design matrices for both equations over the same rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrices {
    pub x_invite: DMatrix<f64>,
    pub x_accept: DMatrix<f64>,
    pub z: Vec<f64>,
    /// Dense cluster index per row, into `cluster_labels`.
    pub cluster_id: Vec<usize>,
    pub cluster_labels: Vec<String>,
    pub invite_names: Vec<String>,
    pub accept_names: Vec<String>,
    pub dropped_missing: usize,
}

impl DesignMatrices {
    pub fn n_obs(&self) -> usize {
        self.z.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.z.len();
        if self.x_invite.nrows() != n || self.x_accept.nrows() != n || self.cluster_id.len() != n {
            return Err(Error::Dimension(format!(
                "rows: invite {}, accept {}, z {n}, clusters {}",
                self.x_invite.nrows(),
                self.x_accept.nrows(),
                self.cluster_id.len()
            )));
        }
        if self.x_invite.ncols() != self.invite_names.len()
            || self.x_accept.ncols() != self.accept_names.len()
        {
            return Err(Error::Dimension("column names do not match matrix widths".into()));
        }
        if self.cluster_id.iter().any(|&g| g >= self.cluster_labels.len()) {
            return Err(Error::Dimension("cluster index out of range".into()));
        }
        for (eq, names) in [("invite", &self.invite_names), ("accept", &self.accept_names)] {
            if names.iter().filter(|n| *n == INTERCEPT).count() != 1 {
                return Err(Error::Invalid(format!("{eq} equation needs exactly one intercept")));
            }
        }
        let mut a = self.invite_names.clone();
        let mut b = self.accept_names.clone();
        a.sort();
        b.sort();
        if a == b {
            return Err(Error::ExclusionRestriction(
                "invite and accept equations use identical covariates".into(),
            ));
        }
        Ok(())
    }

    /// Union of both equations' columns with a single intercept, for the
    /// univariate probit baseline.
    pub fn combined(&self) -> (DMatrix<f64>, Vec<String>) {
        let mut names: Vec<String> = Vec::new();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        let mut take = |x: &DMatrix<f64>, ns: &[String]| {
            for (j, name) in ns.iter().enumerate() {
                if name != INTERCEPT && !names.contains(name) {
                    names.push(name.clone());
                    cols.push(x.column(j).iter().copied().collect());
                }
            }
        };
        take(&self.x_invite, &self.invite_names);
        take(&self.x_accept, &self.accept_names);
        names.push(INTERCEPT.to_string());
        cols.push(vec![1.0; self.n_obs()]);
        let n = self.n_obs();
        let x = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        (x, names)
    }

    /// SHA-256 over every matrix entry, outcome, cluster and column name.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for names in [&self.invite_names, &self.accept_names] {
            for n in names {
                h.update(n.as_bytes());
                h.update([0u8]);
            }
        }
        for x in [&self.x_invite, &self.x_accept] {
            h.update((x.nrows() as u64).to_le_bytes());
            h.update((x.ncols() as u64).to_le_bytes());
            for v in x.iter() {
                h.update(v.to_le_bytes());
            }
        }
        for v in &self.z {
            h.update(v.to_le_bytes());
        }
        for &g in &self.cluster_id {
            h.update((g as u64).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Copy of the design with one column of one equation multiplied by `c`.
    pub fn with_scaled_column(&self, invite: bool, name: &str, c: f64) -> Result<Self> {
        let mut out = self.clone();
        let (x, names) = if invite {
            (&mut out.x_invite, &out.invite_names)
        } else {
            (&mut out.x_accept, &out.accept_names)
        };
        let j = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownCovariate(name.into()))?;
        x.column_mut(j).scale_mut(c);
        Ok(out)
    }
}

/// Applies the spec's transforms and assembles both equations.
///
/// Rows missing any required covariate are dropped when `drop_missing` is
/// set; otherwise the first such row is an error.
pub fn build_design(dyads: &[DyadRow], spec: &DesignSpec, drop_missing: bool) -> Result<DesignMatrices> {
    spec.check_exclusion_restriction()?;
    let used = spec.union();

    let mut kept: Vec<usize> = Vec::with_capacity(dyads.len());
    let mut raw: Vec<Vec<f64>> = vec![Vec::with_capacity(dyads.len()); used.len()];
    let mut dropped = 0;
    'rows: for (i, d) in dyads.iter().enumerate() {
        let mut vals = Vec::with_capacity(used.len());
        for c in &used {
            match c.raw(d) {
                Some(v) => vals.push(v),
                None if drop_missing => {
                    dropped += 1;
                    continue 'rows;
                }
                None => {
                    return Err(Error::Invalid(format!(
                        "row ({}, {}) is missing {c}",
                        d.dept_id, d.scholar_id
                    )))
                }
            }
        }
        kept.push(i);
        for (col, v) in raw.iter_mut().zip(vals) {
            col.push(v);
        }
    }
    if kept.is_empty() {
        return Err(Error::Invalid("no rows left after dropping missing covariates".into()));
    }

    let mut columns: BTreeMap<Covariate, Vec<f64>> = BTreeMap::new();
    for (c, values) in used.iter().zip(raw) {
        let rule = spec.rule(*c);
        let mut col = values
            .into_iter()
            .map(|v| rule.transform.apply(v))
            .collect::<Result<Vec<f64>>>()
            .map_err(|e| Error::Invalid(format!("{c}: {e}")))?;
        if rule.standardize {
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            if !(var > 0.0) {
                return Err(Error::Invalid(format!("{c} has no variation to standardize")));
            }
            let sd = var.sqrt();
            col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        }
        columns.insert(*c, col);
    }

    let n = kept.len();
    let assemble = |list: &[Covariate]| {
        let mut names: Vec<String> = list.iter().map(|c| c.name().to_string()).collect();
        names.push(INTERCEPT.to_string());
        let x = DMatrix::from_fn(n, list.len() + 1, |i, j| {
            if j < list.len() {
                columns[&list[j]][i]
            } else {
                1.0
            }
        });
        (x, names)
    };
    let (x_invite, invite_names) = assemble(&spec.invite);
    let (x_accept, accept_names) = assemble(&spec.accept);

    let mut labels: Vec<String> = kept.iter().map(|&i| dyads[i].scholar_id.clone()).collect();
    labels.sort();
    labels.dedup();
    let cluster_id = kept
        .iter()
        .map(|&i| labels.binary_search(&dyads[i].scholar_id).unwrap())
        .collect();

    let design = DesignMatrices {
        x_invite,
        x_accept,
        z: kept.iter().map(|&i| f64::from(dyads[i].z)).collect(),
        cluster_id,
        cluster_labels: labels,
        invite_names,
        accept_names,
        dropped_missing: dropped,
    };
    design.validate()?;
    Ok(design)
}
