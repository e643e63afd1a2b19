//! Bandwidth grids and leave-one-out cross-validation for the conditional
//! product-limit estimators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{product_limit, Conditioner};
use crate::sample::Design;

/// How a grid was produced: `h_j = D_j · n^(−rate)` with `D_j` equispaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRule {
    pub d_min: f64,
    pub d_max: f64,
    pub count: usize,
    pub rate: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthGrid {
    values: Vec<f64>,
    rule: Option<GridRule>,
}

impl BandwidthGrid {
    /// Explicit list of bandwidths; must be positive and strictly increasing.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if values.iter().any(|h| h.is_nan() || *h <= 0.0) {
            return Err(Error::InvalidGrid("bandwidths must be positive".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("bandwidths must be strictly increasing".into()));
        }
        Ok(Self { values, rule: None })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rule(&self) -> Option<&GridRule> {
        self.rule.as_ref()
    }
}

/// `count` bandwidths `D_j · n^(−rate)` with `D_j` equispaced from `d_min` to
/// `d_max` inclusive.
pub fn make_grid(d_min: f64, d_max: f64, count: usize, rate: f64, n: usize) -> Result<BandwidthGrid> {
    if !(d_min > 0.0 && d_max > d_min && d_max.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "need 0 < d_min < d_max, got d_min = {d_min}, d_max = {d_max}"
        )));
    }
    if count == 0 || n == 0 {
        return Err(Error::InvalidGrid("count and n must be at least 1".into()));
    }
    if !rate.is_finite() {
        return Err(Error::InvalidGrid("rate must be finite".into()));
    }
    let scale = (n as f64).powf(-rate);
    let values = if count == 1 {
        vec![d_min * scale]
    } else {
        let step = (d_max - d_min) / (count - 1) as f64;
        (0..count)
            .map(|j| {
                let d = if j + 1 == count { d_max } else { d_min + j as f64 * step };
                d * scale
            })
            .collect()
    };
    Ok(BandwidthGrid {
        values,
        rule: Some(GridRule {
            d_min,
            d_max,
            count,
            rate,
            n,
        }),
    })
}

/// Which conditional distribution the bandwidth is selected for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CvTarget {
    /// Event-time distribution `F(t | w)` (indicator `δ`).
    Survival,
    /// Censoring distribution `G(t | w)` (indicator `1 − δ`).
    Censoring,
}

impl CvTarget {
    fn indicator(self) -> bool {
        matches!(self, CvTarget::Survival)
    }
}

/// Leave-one-out squared-error criterion
///
/// `CV(h) = Σ_i Σ_j [I(T_i ≤ T_j, δ_i = 1) − F̂_h^(−i)(T_j | W_i)]²`
///
/// over the pairs whose indicator is observed (`T_i ≤ T_j` with `δ_i = 1`,
/// or `T_i > T_j`). For the censoring target `δ` is replaced by `1 − δ`.
/// Conditioning is on `columns`, with kernels at bandwidth `h` on the
/// continuous ones.
pub fn cv_criterion(design: &Design, columns: &[usize], h: f64, target: CvTarget) -> Result<f64> {
    let cond = Conditioner::for_columns(design.spec(), columns, Some(h))?;
    let n = design.len();
    let times = design.times();
    let events = design.events();
    let ind = target.indicator();
    let mut w = Vec::with_capacity(n);
    let mut total = 0.0;
    for i in 0..n {
        let query = design.row(i);
        cond.fill_weights(design.columns(), n, &query, &mut w).ok();
        w[i] = 0.0;
        if w.iter().all(|&v| v == 0.0) {
            return Err(Error::AllWeightsZero);
        }
        let surv = product_limit(times, events, ind, &w);
        let observed = events[i] == ind;
        for j in 0..n {
            let y = if times[i] <= times[j] {
                if !observed {
                    continue;
                }
                1.0
            } else {
                0.0
            };
            let f = 1.0 - surv.eval(times[j]);
            total += (y - f) * (y - f);
        }
    }
    Ok(total)
}

/// Grid value minimising [`cv_criterion`]; the smallest one on ties. Grid
/// points whose leave-one-out weights vanish for some row are skipped.
pub fn cv_bandwidth(design: &Design, columns: &[usize], grid: &BandwidthGrid, target: CvTarget) -> Result<f64> {
    if design.len() < 3 {
        return Err(Error::InvalidSample("cross-validation needs at least 3 rows".into()));
    }
    let scores: Vec<Result<f64>> = grid
        .values()
        .par_iter()
        .map(|&h| cv_criterion(design, columns, h, target))
        .collect();
    let mut best: Option<(f64, f64)> = None;
    let mut first_err = None;
    for (&h, s) in grid.values().iter().zip(scores) {
        match s {
            Ok(s) => {
                if best.is_none_or(|(_, b)| s < b) {
                    best = Some((h, s));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.map(|(h, _)| h)
        .ok_or_else(|| first_err.unwrap_or(Error::AllWeightsZero))
}
