//! Marked empirical processes `U_n` and their Cramér-von Mises and
//! Kolmogorov-Smirnov functionals.
//!
//! Every process has the form `U_n(w) = (1/n) Σ_i r_i I(W_i ≤ w)`, evaluated
//! at the sample points, with `≤` taken component-wise. The cases differ in
//! the residual marks `r_i`:
//!
//! - no conditioning block: `r_i = η̂_i − η̄`;
//! - conditioning block `X`: `r_i = f̂_X(X_i) (η̂_i − m̂(X_i))`, with a
//!   product-kernel density and Nadaraya-Watson regression on continuous
//!   positions and cell frequencies / cell means on discrete ones.
//!
//! Nominal coordinates have no order, so the statistics are maximised over
//! every ordering of their levels.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::epanechnikov;

/// Largest number of levels a nominal coordinate may have (7! = 5040 orderings).
pub const MAX_NOMINAL_LEVELS: usize = 7;

/// `U_n` evaluated at each sample point, in row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessValues {
    pub u: Vec<f64>,
}

impl ProcessValues {
    pub fn n(&self) -> usize {
        self.u.len()
    }
}

/// Cramér-von Mises `Σ U_n(W_i)²` and Kolmogorov-Smirnov `max |√n U_n(W_i)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatPair {
    pub cm: f64,
    pub k: f64,
}

impl StatPair {
    pub fn max(self, other: StatPair) -> StatPair {
        StatPair {
            cm: self.cm.max(other.cm),
            k: self.k.max(other.k),
        }
    }
}

pub fn stat_pair(p: &ProcessValues) -> StatPair {
    let sqrt_n = (p.n() as f64).sqrt();
    let cm = p.u.iter().map(|u| u * u).sum();
    let k = p.u.iter().fold(0.0_f64, |m, u| m.max((sqrt_n * u).abs()));
    StatPair { cm, k }
}

/// `(1/n) Σ_i r_i I(W_i ≤ W_k)` for every sample point `k`.
pub fn marked_process(residuals: &[f64], coords: &[&[f64]]) -> ProcessValues {
    let n = residuals.len();
    let inv_n = 1.0 / n as f64;
    match coords {
        [] => {
            let total: f64 = residuals.iter().sum::<f64>() * inv_n;
            ProcessValues { u: vec![total; n] }
        }
        [z] => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| z[a].total_cmp(&z[b]));
            let mut u = vec![0.0; n];
            let mut acc = 0.0;
            let mut g = 0;
            while g < n {
                let mut end = g;
                while end < n && z[idx[end]] == z[idx[g]] {
                    acc += residuals[idx[end]];
                    end += 1;
                }
                for &i in &idx[g..end] {
                    u[i] = acc * inv_n;
                }
                g = end;
            }
            ProcessValues { u }
        }
        _ => {
            let u = (0..n)
                .map(|k| {
                    let s: f64 = (0..n)
                        .filter(|&i| coords.iter().all(|c| c[i] <= c[k]))
                        .map(|i| residuals[i])
                        .sum();
                    s * inv_n
                })
                .collect();
            ProcessValues { u }
        }
    }
}

fn centered(eta: &[f64]) -> Vec<f64> {
    let mean = eta.iter().sum::<f64>() / eta.len() as f64;
    eta.iter().map(|e| e - mean).collect()
}

/// One covariate with no conditioning block: residuals `η̂_i − η̄`.
pub fn u_case1(eta: &[f64], z: &[f64]) -> ProcessValues {
    marked_process(&centered(eta), &[z])
}

/// A conditioning-block column and whether it is smoothed by a kernel.
#[derive(Debug, Clone, Copy)]
pub struct XColumn<'a> {
    pub values: &'a [f64],
    pub continuous: bool,
}

/// Residual marks `f̂_X(X_i) (η̂_i − m̂(X_i))`.
///
/// Continuous positions contribute kernel factors `K((X_i − X_j) / h)` and
/// a `1/h` each; discrete and nominal positions contribute match
/// indicators. With only discrete positions this is the cell frequency
/// `Π̂(X_i)` times the deviation from the cell mean, and `h` must be absent.
pub fn x_block_residuals(eta: &[f64], x: &[XColumn<'_>], h: Option<f64>) -> Result<Vec<f64>> {
    let n = eta.len();
    let q_cont = x.iter().filter(|c| c.continuous).count();
    let h = match (q_cont, h) {
        (0, Some(_)) => return Err(Error::UnexpectedBandwidth),
        (0, None) => 1.0,
        (_, None) => return Err(Error::MissingBandwidth),
        (_, Some(h)) if h.is_nan() || h <= 0.0 => {
            return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {h}")))
        }
        (_, Some(h)) => h,
    };
    let norm = n as f64 * h.powi(q_cont as i32);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = 0.0;
        let mut s_eta = 0.0;
        for (j, e) in eta.iter().enumerate() {
            let mut w = 1.0;
            for c in x {
                if c.continuous {
                    w *= epanechnikov((c.values[i] - c.values[j]) / h);
                } else if c.values[i] != c.values[j] {
                    w = 0.0;
                }
                if w == 0.0 {
                    break;
                }
            }
            s += w;
            s_eta += w * e;
        }
        // s > 0: row i always matches itself.
        let density = s / norm;
        let fitted = s_eta / s;
        out.push(density * (eta[i] - fitted));
    }
    Ok(out)
}

/// One conditioning covariate `X` (continuous with bandwidth `h`, or
/// discrete/nominal without) and tested block `Z`.
pub fn u_case2(eta: &[f64], x: XColumn<'_>, z: &[&[f64]], h: Option<f64>) -> Result<ProcessValues> {
    let r = x_block_residuals(eta, &[x], h)?;
    let mut coords = Vec::with_capacity(z.len() + 1);
    coords.push(x.values);
    coords.extend_from_slice(z);
    Ok(marked_process(&r, &coords))
}

/// Continuous conditioning block of any dimension with the product
/// Epanechnikov kernel at common bandwidth `h`.
pub fn u_case3(eta: &[f64], x: &[&[f64]], z: &[&[f64]], h: f64) -> Result<ProcessValues> {
    if x.is_empty() {
        return Err(Error::InvalidConfig("the conditioning block is empty".into()));
    }
    let cols: Vec<XColumn> = x
        .iter()
        .map(|v| XColumn {
            values: v,
            continuous: true,
        })
        .collect();
    let r = x_block_residuals(eta, &cols, Some(h))?;
    let coords: Vec<&[f64]> = x.iter().chain(z).copied().collect();
    Ok(marked_process(&r, &coords))
}

/// Coordinate entering the indicator `I(W_i ≤ w)`.
#[derive(Debug, Clone, Copy)]
pub struct Coordinate<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
    /// Nominal coordinates are enumerated over all orderings of their levels.
    pub nominal: bool,
}

/// Statistics maximised component-wise over every ordering of the nominal
/// coordinates' observed levels (ordered coordinates stay fixed). Returns
/// the maxima and the number of orderings evaluated.
pub fn stat_over_orderings(residuals: &[f64], coords: &[Coordinate<'_>]) -> Result<(StatPair, usize)> {
    struct Nominal {
        pos: usize,
        orderings: Vec<Vec<usize>>,
    }
    let mut nominal = Vec::new();
    for (pos, c) in coords.iter().enumerate() {
        if !c.nominal {
            continue;
        }
        let levels: Vec<usize> = c.values.iter().map(|&v| v as usize).sorted().dedup().collect();
        if levels.len() > MAX_NOMINAL_LEVELS {
            return Err(Error::TooManyLevels {
                column: c.name.to_string(),
                levels: levels.len(),
                cap: MAX_NOMINAL_LEVELS,
            });
        }
        let k = levels.len();
        nominal.push(Nominal {
            pos,
            orderings: levels.into_iter().permutations(k).collect(),
        });
    }

    let mut remapped: Vec<Vec<f64>> = nominal.iter().map(|_| vec![0.0; residuals.len()]).collect();
    let mut counter = vec![0usize; nominal.len()];
    let mut best: Option<StatPair> = None;
    let mut evaluated = 0;
    loop {
        for (slot, nom) in nominal.iter().enumerate() {
            let order = &nom.orderings[counter[slot]];
            let max_code = order.iter().copied().max().unwrap_or(0);
            let mut rank = vec![0.0; max_code + 1];
            for (r, &code) in order.iter().enumerate() {
                rank[code] = r as f64;
            }
            for (dst, &v) in remapped[slot].iter_mut().zip(coords[nom.pos].values) {
                *dst = rank[v as usize];
            }
        }
        let mut cols: Vec<&[f64]> = coords.iter().map(|c| c.values).collect();
        for (slot, nom) in nominal.iter().enumerate() {
            cols[nom.pos] = &remapped[slot];
        }
        let s = stat_pair(&marked_process(residuals, &cols));
        best = Some(best.map_or(s, |b| b.max(s)));
        evaluated += 1;

        // odometer over the product of orderings
        let mut slot = 0;
        loop {
            if slot == nominal.len() {
                return Ok((best.expect("at least one ordering"), evaluated));
            }
            counter[slot] += 1;
            if counter[slot] < nominal[slot].orderings.len() {
                break;
            }
            counter[slot] = 0;
            slot += 1;
        }
    }
}

/// Case-1 statistic for a nominal covariate with level codes `z`.
pub fn nominal_stat(eta: &[f64], z: &[f64]) -> Result<StatPair> {
    let coord = Coordinate {
        name: "z",
        values: z,
        nominal: true,
    };
    Ok(stat_over_orderings(&centered(eta), &[coord])?.0)
}
