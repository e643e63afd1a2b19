//! Right-censored samples with mixed-type covariates.
//!
//! [`Sample`] is the row-oriented, user-facing model: each [`Observation`]
//! carries its observed time, the event indicator and a tuple of covariate
//! values typed by the sample's [`CovariateSpec`]. [`Design`] is the
//! validated, canonically ordered, column-major form every estimator works
//! on. Nominal labels are coded as level indices (stored as `f64`) so that
//! exact-match smoothing and ordering permutations share one representation.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measurement scale of a covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovariateKind {
    Continuous,
    /// Ordered, finitely supported real values.
    Discrete,
    /// Unordered labels from a declared, finite level set.
    Nominal(Vec<String>),
}

impl CovariateKind {
    pub fn is_continuous(&self) -> bool {
        matches!(self, CovariateKind::Continuous)
    }

    pub fn is_nominal(&self) -> bool {
        matches!(self, CovariateKind::Nominal(_))
    }
}

/// Block a covariate belongs to: `X` is conditioned on under the null,
/// `Z` is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    X,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateEntry {
    pub name: String,
    pub kind: CovariateKind,
    pub role: Role,
}

impl CovariateEntry {
    pub fn new(name: impl Into<String>, kind: CovariateKind, role: Role) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
        }
    }
}

/// Ordered declaration of the covariate tuple `W = (X, Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    entries: Vec<CovariateEntry>,
}

impl CovariateSpec {
    pub fn new(entries: Vec<CovariateEntry>) -> Result<Self> {
        let mut names = HashSet::new();
        for e in &entries {
            if !names.insert(e.name.as_str()) {
                return Err(Error::InvalidSpec(format!("duplicate covariate name `{}`", e.name)));
            }
            if let CovariateKind::Nominal(levels) = &e.kind {
                if levels.is_empty() {
                    return Err(Error::InvalidSpec(format!(
                        "nominal covariate `{}` declares no levels",
                        e.name
                    )));
                }
                let mut seen = HashSet::new();
                for l in levels {
                    if !seen.insert(l.trim()) {
                        return Err(Error::InvalidSpec(format!(
                            "nominal covariate `{}` repeats level `{}`",
                            e.name,
                            l.trim()
                        )));
                    }
                }
            }
        }
        Ok(Self { entries })
    }

    /// A spec with no covariates (marginal analyses only).
    pub fn empty() -> Self {
        Self { entries: vec![] }
    }

    pub fn entries(&self) -> &[CovariateEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn kind(&self, column: usize) -> &CovariateKind {
        &self.entries[column].kind
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn x_columns(&self) -> Vec<usize> {
        self.columns_with(Role::X)
    }

    pub fn z_columns(&self) -> Vec<usize> {
        self.columns_with(Role::Z)
    }

    fn columns_with(&self, role: Role) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.role == role)
            .map(|(i, _)| i)
            .collect()
    }

    /// Level index of `label` for a nominal column, comparing trimmed strings.
    pub fn level_code(&self, column: usize, label: &str) -> Option<usize> {
        match &self.entries[column].kind {
            CovariateKind::Nominal(levels) => {
                let label = label.trim();
                levels.iter().position(|l| l.trim() == label)
            }
            _ => None,
        }
    }
}

/// One covariate value.
#[derive(Debug, Clone, PartialEq)]
pub enum CovValue {
    Real(f64),
    Label(Arc<str>),
}

impl CovValue {
    pub fn label(s: &str) -> Self {
        CovValue::Label(Arc::from(s))
    }
}

impl fmt::Display for CovValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovValue::Real(x) => write!(f, "{x}"),
            CovValue::Label(s) => f.write_str(s),
        }
    }
}

/// One subject: observed time `T = min(Y, C)`, event indicator `δ` and
/// covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub event: bool,
    pub covariates: Vec<CovValue>,
}

impl Observation {
    pub fn new(time: f64, event: bool, covariates: Vec<CovValue>) -> Self {
        Self {
            time,
            event,
            covariates,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub spec: CovariateSpec,
    pub observations: Vec<Observation>,
}

impl Sample {
    pub fn new(spec: CovariateSpec, observations: Vec<Observation>) -> Self {
        Self { spec, observations }
    }

    /// Covariate-free sample from parallel time and event slices.
    pub fn from_times(times: &[f64], events: &[bool]) -> Self {
        let observations = times
            .iter()
            .zip(events)
            .map(|(&t, &d)| Observation::new(t, d, vec![]))
            .collect();
        Self::new(CovariateSpec::empty(), observations)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Zero-based row index, `None` for sample-level problems.
    pub row: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.row {
            Some(r) => write!(f, "row {r}, `{}`: {}", self.field, self.message),
            None => write!(f, "`{}`: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every type invariant of the sample and reports each breach.
pub fn validate(sample: &Sample) -> ValidationReport {
    let mut violations = Vec::new();
    if sample.observations.is_empty() {
        violations.push(Violation {
            row: None,
            field: "observations".into(),
            message: "sample is empty".into(),
        });
    }
    let arity = sample.spec.len();
    for (row, obs) in sample.observations.iter().enumerate() {
        if !obs.time.is_finite() || obs.time < 0.0 {
            violations.push(Violation {
                row: Some(row),
                field: "time".into(),
                message: format!("time must be finite and nonnegative, got {}", obs.time),
            });
        }
        if obs.covariates.len() != arity {
            violations.push(Violation {
                row: Some(row),
                field: "covariates".into(),
                message: format!("expected {arity} covariates, got {}", obs.covariates.len()),
            });
            continue;
        }
        for (col, (value, entry)) in obs.covariates.iter().zip(sample.spec.entries()).enumerate() {
            let bad = match (&entry.kind, value) {
                (CovariateKind::Nominal(_), CovValue::Label(l)) => {
                    if sample.spec.level_code(col, l).is_none() {
                        Some(format!("label `{}` is not a declared level", l.trim()))
                    } else {
                        None
                    }
                }
                (CovariateKind::Nominal(_), CovValue::Real(x)) => {
                    Some(format!("expected a nominal label, got number {x}"))
                }
                (_, CovValue::Real(x)) if !x.is_finite() => Some(format!("value must be finite, got {x}")),
                (_, CovValue::Real(_)) => None,
                (_, CovValue::Label(l)) => Some(format!("expected a number, got label `{l}`")),
            };
            if let Some(message) = bad {
                violations.push(Violation {
                    row: Some(row),
                    field: entry.name.clone(),
                    message,
                });
            }
        }
    }
    ValidationReport { violations }
}

/// Time order with events ahead of censored rows at tied times.
pub(crate) fn time_order(ta: f64, ea: bool, tb: f64, eb: bool) -> Ordering {
    ta.total_cmp(&tb).then(eb.cmp(&ea))
}

/// Rows sorted ascending by time; at ties uncensored rows come first. Stable.
pub fn canonical_order(sample: &Sample) -> Sample {
    let mut observations = sample.observations.clone();
    observations.sort_by(|a, b| time_order(a.time, a.event, b.time, b.event));
    Sample::new(sample.spec.clone(), observations)
}

/// Validated, canonically ordered, column-major view of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    spec: CovariateSpec,
    times: Vec<f64>,
    events: Vec<bool>,
    columns: Vec<Vec<f64>>,
}

impl Design {
    pub fn from_sample(sample: &Sample) -> Result<Self> {
        let report = validate(sample);
        if !report.is_valid() {
            return Err(Error::InvalidSample(report.to_string()));
        }
        let n = sample.len();
        let p = sample.spec.len();
        let mut columns = vec![Vec::with_capacity(n); p];
        let mut times = Vec::with_capacity(n);
        let mut events = Vec::with_capacity(n);
        for obs in &sample.observations {
            times.push(obs.time);
            events.push(obs.event);
            for (c, v) in obs.covariates.iter().enumerate() {
                let x = match v {
                    CovValue::Real(x) => *x,
                    CovValue::Label(l) => sample.spec.level_code(c, l).expect("validated") as f64,
                };
                columns[c].push(x);
            }
        }
        Ok(Self::from_parts(sample.spec.clone(), times, events, columns))
    }

    /// Builds a design from raw columns (nominal columns already coded),
    /// sorting rows canonically.
    pub(crate) fn from_parts(spec: CovariateSpec, times: Vec<f64>, events: Vec<bool>, columns: Vec<Vec<f64>>) -> Self {
        let n = times.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| time_order(times[a], events[a], times[b], events[b]));
        if idx.iter().enumerate().all(|(i, &j)| i == j) {
            return Self {
                spec,
                times,
                events,
                columns,
            };
        }
        let times = idx.iter().map(|&i| times[i]).collect();
        let events = idx.iter().map(|&i| events[i]).collect();
        let columns = columns
            .iter()
            .map(|col| idx.iter().map(|&i| col[i]).collect())
            .collect();
        Self {
            spec,
            times,
            events,
            columns,
        }
    }

    pub fn spec(&self) -> &CovariateSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.columns[c]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Covariate tuple of row `i`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Largest uncensored time `T¹_max`.
    pub fn t1_max(&self) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.events)
            .filter(|(_, &d)| d)
            .map(|(&t, _)| t)
            .next_back()
    }

    /// Largest observed time `T_(n)`.
    pub fn t_max(&self) -> Option<f64> {
        self.times.last().copied()
    }

    /// Subsample of the rows for which `keep` holds, preserving order.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        Self {
            spec: self.spec.clone(),
            times: idx.iter().map(|&i| self.times[i]).collect(),
            events: idx.iter().map(|&i| self.events[i]).collect(),
            columns: self
                .columns
                .iter()
                .map(|col| idx.iter().map(|&i| col[i]).collect())
                .collect(),
        }
    }

    /// Back to the row-oriented form, decoding nominal levels to labels.
    pub fn to_sample(&self) -> Sample {
        let labels: Vec<Option<Vec<Arc<str>>>> = self
            .spec
            .entries()
            .iter()
            .map(|e| match &e.kind {
                CovariateKind::Nominal(levels) => Some(levels.iter().map(|l| Arc::from(l.trim())).collect()),
                _ => None,
            })
            .collect();
        let observations = (0..self.len())
            .map(|i| {
                let covariates = self
                    .columns
                    .iter()
                    .zip(&labels)
                    .map(|(col, lab)| match lab {
                        Some(levels) => CovValue::Label(levels[col[i] as usize].clone()),
                        None => CovValue::Real(col[i]),
                    })
                    .collect();
                Observation::new(self.times[i], self.events[i], covariates)
            })
            .collect();
        Sample::new(self.spec.clone(), observations)
    }
}
