use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::CovariateSpec;

/// Epanechnikov kernel `0.75 (1 − u²)` on `[−1, 1]`.
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Epanechnikov kernel at bandwidth `h`. `h = +∞` is allowed and gives the
/// flat limit where every point receives the same weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    bandwidth: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if bandwidth.is_nan() || bandwidth <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    pub fn flat() -> Self {
        Self {
            bandwidth: f64::INFINITY,
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `K((x0 − x) / h)`, without the `1/h` normalisation.
    #[inline]
    pub fn factor(&self, x0: f64, x: f64) -> f64 {
        epanechnikov((x0 - x) / self.bandwidth)
    }

    /// Rescaled kernel `K_h(d) = K(d / h) / h`.
    #[inline]
    pub fn scaled(&self, d: f64) -> f64 {
        epanechnikov(d / self.bandwidth) / self.bandwidth
    }
}

/// How one covariate position enters a conditional estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Smoother {
    Kernel(KernelConfig),
    /// Indicator of an exact match (discrete or nominal covariates).
    Exact,
}

/// Product weights over a set of covariate positions: kernel factors for
/// continuous positions, match indicators for the others. No positions
/// means every row gets weight one.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Conditioner {
    parts: Vec<(usize, Smoother)>,
}

impl Conditioner {
    pub fn new(parts: Vec<(usize, Smoother)>) -> Self {
        Self { parts }
    }

    pub fn marginal() -> Self {
        Self::default()
    }

    /// Kernel on each continuous column at the common bandwidth `h`, exact
    /// match on every other column.
    pub fn for_columns(spec: &CovariateSpec, columns: &[usize], h: Option<f64>) -> Result<Self> {
        let mut parts = Vec::with_capacity(columns.len());
        for &c in columns {
            let s = if spec.kind(c).is_continuous() {
                Smoother::Kernel(KernelConfig::new(h.ok_or(Error::MissingBandwidth)?)?)
            } else {
                Smoother::Exact
            };
            parts.push((c, s));
        }
        Ok(Self { parts })
    }

    pub fn needs_bandwidth(spec: &CovariateSpec, columns: &[usize]) -> bool {
        columns.iter().any(|&c| spec.kind(c).is_continuous())
    }

    pub fn parts(&self) -> &[(usize, Smoother)] {
        &self.parts
    }

    /// Unnormalised weight of a row with covariates `row(c)` at `query`.
    #[inline]
    pub fn weight(&self, columns: &[Vec<f64>], row: usize, query: &[f64]) -> f64 {
        let mut w = 1.0;
        for &(c, s) in &self.parts {
            let x = columns[c][row];
            match s {
                Smoother::Kernel(k) => w *= k.factor(query[c], x),
                Smoother::Exact => {
                    if x != query[c] {
                        return 0.0;
                    }
                }
            }
            if w == 0.0 {
                return 0.0;
            }
        }
        w
    }

    /// Fills `out` with unnormalised weights for every row; fails when they
    /// are all zero.
    pub fn fill_weights(&self, columns: &[Vec<f64>], n: usize, query: &[f64], out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        let mut total = 0.0;
        for i in 0..n {
            let w = self.weight(columns, i, query);
            total += w;
            out.push(w);
        }
        if total > 0.0 {
            Ok(())
        } else {
            Err(Error::AllWeightsZero)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_integrates_to_one() {
        let m = 20_000;
        let step = 2.0 / m as f64;
        let integral: f64 = (0..m)
            .map(|i| epanechnikov(-1.0 + (i as f64 + 0.5) * step) * step)
            .sum();
        assert!((integral - 1.0).abs() < 1e-8);
    }

    #[test]
    fn flat_kernel_is_constant() {
        let k = KernelConfig::flat();
        assert_eq!(k.factor(0.0, 1e9), 0.75);
        assert_eq!(k.factor(3.0, -2.0), 0.75);
    }

    #[test]
    fn rejects_nonpositive_bandwidth() {
        assert!(KernelConfig::new(0.0).is_err());
        assert!(KernelConfig::new(-1.0).is_err());
        assert!(KernelConfig::new(f64::NAN).is_err());
    }
}
