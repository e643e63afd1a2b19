//! CSV ingestion.
//!
//! The file must have a header with `time` and `status` columns (status
//! 1 = event, 0 = censored). Declared covariate columns become covariates;
//! other columns are ignored with a warning.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use curetest::{CovValue, CovariateEntry, CovariateKind, CovariateSpec, Observation, Role, Sample};

/// Kind as declared on the command line; nominal levels may be left to
/// the data.
#[derive(Debug, Clone, PartialEq)]
pub enum DeclaredKind {
    Continuous,
    Discrete,
    Nominal(Option<Vec<String>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declaration {
    pub name: String,
    pub kind: DeclaredKind,
    pub role: Role,
}

/// Parses `name=kind` pairs, kind one of `continuous`, `discrete`,
/// `nominal` or `nominal:a|b|c`.
pub fn parse_kinds(spec: &str) -> Result<Vec<(String, DeclaredKind)>> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, kind) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("kind declaration `{item}` is not of the form name=kind"))?;
        let kind = match kind.trim() {
            "continuous" => DeclaredKind::Continuous,
            "discrete" => DeclaredKind::Discrete,
            "nominal" => DeclaredKind::Nominal(None),
            other => match other.strip_prefix("nominal:") {
                Some(levels) => DeclaredKind::Nominal(Some(levels.split('|').map(|l| l.trim().to_string()).collect())),
                None => bail!("unknown covariate kind `{other}` for `{name}`"),
            },
        };
        out.push((name.trim().to_string(), kind));
    }
    Ok(out)
}

/// Declarations for the given X and Z columns; undeclared kinds default to
/// continuous.
pub fn declarations(
    x_cols: &[String],
    z_cols: &[String],
    kinds: &[(String, DeclaredKind)],
) -> Result<Vec<Declaration>> {
    for (name, _) in kinds {
        if !x_cols.contains(name) && !z_cols.contains(name) {
            bail!("kind declared for `{name}`, which is neither an X nor a Z column");
        }
    }
    let kind_of = |name: &str| {
        kinds
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, k)| k.clone())
            .unwrap_or(DeclaredKind::Continuous)
    };
    Ok(x_cols
        .iter()
        .map(|n| (n, Role::X))
        .chain(z_cols.iter().map(|n| (n, Role::Z)))
        .map(|(name, role)| Declaration {
            name: name.clone(),
            kind: kind_of(name),
            role,
        })
        .collect())
}

pub fn load_csv(path: &Path, decls: &[Declaration]) -> Result<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let header: Vec<String> = reader
        .headers()
        .with_context(|| format!("cannot read header of {}", path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        bail!("{} is empty", path.display());
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("column `{name}` not found in {}", path.display()))
    };
    let time_col = find("time")?;
    let status_col = find("status")?;
    let cov_cols: Vec<usize> = decls.iter().map(|d| find(&d.name)).collect::<Result<_>>()?;
    for h in &header {
        if h != "time" && h != "status" && !decls.iter().any(|d| &d.name == h) {
            eprintln!("warning: ignoring undeclared column `{h}`");
        }
    }

    let mut raw: Vec<(f64, bool, Vec<String>)> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.with_context(|| format!("row {row}: malformed record"))?;
        let cell = |c: usize| record.get(c).unwrap_or("");
        let time: f64 = cell(time_col).parse().map_err(|_| {
            anyhow!(
                "row {row}, column `time`: cannot parse `{}` as a number",
                cell(time_col)
            )
        })?;
        let event = match cell(status_col) {
            "1" => true,
            "0" => false,
            other => bail!("row {row}, column `status`: expected 0 or 1, got `{other}`"),
        };
        raw.push((time, event, cov_cols.iter().map(|&c| cell(c).to_string()).collect()));
    }
    if raw.is_empty() {
        bail!("{} has no data rows", path.display());
    }

    let mut entries = Vec::with_capacity(decls.len());
    for (k, d) in decls.iter().enumerate() {
        let kind = match &d.kind {
            DeclaredKind::Continuous => CovariateKind::Continuous,
            DeclaredKind::Discrete => CovariateKind::Discrete,
            DeclaredKind::Nominal(Some(levels)) => CovariateKind::Nominal(levels.clone()),
            DeclaredKind::Nominal(None) => {
                let levels: BTreeSet<&str> = raw.iter().map(|r| r.2[k].as_str()).collect();
                CovariateKind::Nominal(levels.into_iter().map(str::to_string).collect())
            }
        };
        entries.push(CovariateEntry::new(d.name.clone(), kind, d.role));
    }
    let spec = CovariateSpec::new(entries)?;

    let mut observations = Vec::with_capacity(raw.len());
    for (r, (time, event, cells)) in raw.into_iter().enumerate() {
        let mut covs = Vec::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            let v = if spec.kind(k).is_nominal() {
                CovValue::label(c)
            } else {
                CovValue::Real(c.parse().map_err(|_| {
                    anyhow!(
                        "row {}, column `{}`: cannot parse `{c}` as a number",
                        r + 1,
                        decls[k].name
                    )
                })?)
            };
            covs.push(v);
        }
        observations.push(Observation::new(time, event, covs));
    }
    let sample = Sample::new(spec, observations);
    let report = curetest::validate(&sample);
    if !report.is_valid() {
        bail!("invalid sample:\n{report}");
    }
    Ok(sample)
}
