use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous, nonincreasing step function on `[0, ∞)` with value 1
/// before the first jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepCurve {
    jump_times: Vec<f64>,
    values: Vec<f64>,
}

impl StepCurve {
    pub fn new(jump_times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if jump_times.len() != values.len() {
            return Err(Error::InvalidConfig("jump times and values differ in length".into()));
        }
        if jump_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidConfig("jump times must be finite and nonnegative".into()));
        }
        if jump_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("jump times must be strictly increasing".into()));
        }
        let mut prev = 1.0;
        for &v in &values {
            if !(0.0..=prev).contains(&v) {
                return Err(Error::InvalidConfig(format!(
                    "curve values must be nonincreasing within [0, 1], got {v} after {prev}"
                )));
            }
            prev = v;
        }
        Ok(Self { jump_times, values })
    }

    /// The curve identically equal to one.
    pub fn one() -> Self {
        Self {
            jump_times: vec![],
            values: vec![],
        }
    }

    pub(crate) fn from_raw(jump_times: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert!(jump_times.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(values.windows(2).all(|w| w[1] <= w[0]));
        Self { jump_times, values }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at the largest jump time `≤ t`, or 1 before the first jump.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// Value after the last jump.
    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(1.0)
    }

    /// Total probability mass `1 − final_value` carried by the jumps.
    pub fn mass(&self) -> f64 {
        1.0 - self.final_value()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }
}

/// Weighted product-limit walk over canonically ordered rows.
///
/// Rows with equal times form one group; the group's hazard is the weight
/// of its target rows over the weight still at risk at the start of the
/// group, so rows of the other type at a tied time stay in the risk set.
/// Calls `visit(time, value)` after every jump and stops early when it
/// returns `false`.
pub(crate) fn walk_product_limit(
    times: &[f64],
    events: &[bool],
    target: bool,
    weights: &[f64],
    suffix: &mut Vec<f64>,
    mut visit: impl FnMut(f64, f64) -> bool,
) {
    let n = times.len();
    suffix.clear();
    suffix.resize(n + 1, 0.0);
    for i in (0..n).rev() {
        suffix[i] = weights[i] + suffix[i + 1];
    }
    let mut s = 1.0;
    let mut g = 0;
    while g < n {
        let t = times[g];
        let mut end = g + 1;
        while end < n && times[end] == t {
            end += 1;
        }
        // Summed back to front so that a final all-target group gives d == at_risk exactly.
        let mut d = 0.0;
        for i in (g..end).rev() {
            if events[i] == target {
                d += weights[i];
            }
        }
        let at_risk = suffix[g];
        if d > 0.0 && at_risk > 0.0 {
            s *= 1.0 - (d / at_risk).min(1.0);
            if !visit(t, s) {
                return;
            }
        }
        g = end;
    }
}

pub(crate) fn product_limit(times: &[f64], events: &[bool], target: bool, weights: &[f64]) -> StepCurve {
    let mut suffix = Vec::new();
    let mut jt = Vec::new();
    let mut vals = Vec::new();
    walk_product_limit(times, events, target, weights, &mut suffix, |t, s| {
        jt.push(t);
        vals.push(s);
        true
    });
    StepCurve::from_raw(jt, vals)
}

/// Same arithmetic as [`product_limit`] followed by `eval(t)`, without
/// materialising the curve.
pub(crate) fn product_limit_at(
    times: &[f64],
    events: &[bool],
    target: bool,
    weights: &[f64],
    t: f64,
    suffix: &mut Vec<f64>,
) -> f64 {
    let mut value = 1.0;
    walk_product_limit(times, events, target, weights, suffix, |s, v| {
        if s <= t {
            value = v;
            true
        } else {
            false
        }
    });
    value
}
