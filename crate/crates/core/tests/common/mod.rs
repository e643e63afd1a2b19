#![allow(dead_code)]

use curetest::{CovValue, CovariateEntry, CovariateKind, CovariateSpec, Design, Observation, Role, Sample};
use proptest::prelude::*;

/// Weighted product-limit survival at `t`, straight from the definition.
pub fn pl_oracle(times: &[f64], events: &[bool], weights: &[f64], t: f64) -> f64 {
    let mut jumps: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|&(&s, &d)| d && s <= t)
        .map(|(&s, _)| s)
        .collect();
    jumps.sort_by(f64::total_cmp);
    jumps.dedup();
    let mut s = 1.0;
    for u in jumps {
        let at_risk: f64 = times
            .iter()
            .zip(weights)
            .filter(|&(&x, _)| x >= u)
            .map(|(_, w)| w)
            .sum();
        let d: f64 = times
            .iter()
            .zip(events)
            .zip(weights)
            .filter(|&((&x, &e), _)| e && x == u)
            .map(|(_, w)| w)
            .sum();
        if at_risk > 0.0 {
            s *= 1.0 - (d / at_risk).min(1.0);
        }
    }
    s
}

pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Sample with one continuous `Z` covariate.
pub fn sample_z(rows: &[(f64, bool, f64)]) -> Sample {
    let spec = CovariateSpec::new(vec![CovariateEntry::new("z", CovariateKind::Continuous, Role::Z)]).unwrap();
    Sample::new(
        spec,
        rows.iter()
            .map(|&(t, d, z)| Observation::new(t, d, vec![CovValue::Real(z)]))
            .collect(),
    )
}

pub fn design_z(rows: &[(f64, bool, f64)]) -> Design {
    Design::from_sample(&sample_z(rows)).unwrap()
}

/// Rows `(T, δ, Z)` with tied times and covariates on a coarse grid.
pub fn rows_strategy(min: usize, max: usize) -> impl Strategy<Value = Vec<(f64, bool, f64)>> {
    prop::collection::vec(
        (
            (1u32..40).prop_map(|t| t as f64 * 0.25),
            any::<bool>(),
            (-20i32..20).prop_map(|z| z as f64 * 0.5),
        ),
        min..max,
    )
}
