//! The cure threshold `τ̂` and the proxy responses `η̂_i`.
//!
//! `η = ν (1 − I(δ = 0, T ≤ τ)) / (1 − G(τ | W))` has the same conditional
//! mean as the unobservable cure indicator `ν`, so once `τ` and `G` are
//! estimated, covariate effects on the cure rate can be tested with
//! uncensored-regression machinery.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Conditioner, Scratch};
use crate::sample::Design;

/// Values of `Ĝ(τ̂ | W_i)` at or above `1 − SATURATION_EPS` cannot be inverted.
pub const SATURATION_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaVector {
    pub tau_hat: f64,
    /// `η̂_i` in the design's canonical row order.
    pub values: Vec<f64>,
    /// `Ĝ(τ̂ | W_i)` as used, for the rows that needed it (`δ_i = 0`,
    /// `T_i > τ̂`); `None` elsewhere.
    pub g_at_tau: Vec<Option<f64>>,
    /// Rows whose `Ĝ(τ̂ | W_i)` was capped at `1 − 1/n`.
    pub capped: Vec<usize>,
}

impl EtaVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// `τ̂ = T¹_max`, the largest uncensored time.
pub fn estimate_tau(design: &Design) -> Result<f64> {
    design.t1_max().ok_or(Error::NoEvents)
}

/// Computes `η̂` from a per-row censoring estimate.
///
/// `g_at` is called with the row index for each row with `δ_i = 0` and
/// `T_i > τ̂` and must return `Ĝ(τ̂ | W_i)`. With `cap` set, values above
/// `1 − 1/n` are lowered to it before inversion and the row is recorded in
/// [`EtaVector::capped`].
pub fn compute_eta(
    design: &Design,
    tau_hat: f64,
    cap: bool,
    mut g_at: impl FnMut(usize) -> Result<f64>,
) -> Result<EtaVector> {
    let n = design.len();
    let cap_value = 1.0 - 1.0 / n as f64;
    let mut values = vec![0.0; n];
    let mut g_at_tau = vec![None; n];
    let mut capped = Vec::new();
    for i in 0..n {
        if design.events()[i] || design.times()[i] <= tau_hat {
            continue;
        }
        let mut g = g_at(i)?;
        if cap && g > cap_value {
            g = cap_value;
            capped.push(i);
        }
        if g >= 1.0 - SATURATION_EPS {
            return Err(Error::GSaturated(i));
        }
        g_at_tau[i] = Some(g);
        values[i] = 1.0 / (1.0 - g);
    }
    Ok(EtaVector {
        tau_hat,
        values,
        g_at_tau,
        capped,
    })
}

/// `η̂` with `τ̂ = T¹_max` and `Ĝ` the conditional product-limit censoring
/// estimator given by `cond`, evaluated on the design itself.
pub fn eta_from_design(design: &Design, cond: &Conditioner, cap: bool) -> Result<EtaVector> {
    let tau = estimate_tau(design)?;
    let mut scratch = Scratch::default();
    compute_eta(design, tau, cap, |i| {
        let q = design.row(i);
        Ok(1.0 - scratch.censoring_survival_at(design, cond, &q, tau)?)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Sample;

    fn design(times: &[f64], events: &[bool]) -> Design {
        Design::from_sample(&Sample::from_times(times, events)).unwrap()
    }

    #[test]
    fn tau_is_largest_event_time() {
        assert_eq!(
            estimate_tau(&design(&[1.0, 5.0, 9.0], &[true, true, false])).unwrap(),
            5.0
        );
        assert_eq!(
            estimate_tau(&design(&[1.0, 5.0, 9.0], &[true, true, true])).unwrap(),
            9.0
        );
        assert_eq!(
            estimate_tau(&design(&[1.0, 5.0], &[false, false])),
            Err(Error::NoEvents)
        );
    }

    #[test]
    fn eta_branches() {
        let d = design(&[1.0, 2.0, 3.0, 4.0, 5.0], &[true, false, true, false, false]);
        let eta = compute_eta(&d, 3.0, false, |_| Ok(0.5)).unwrap();
        assert_eq!(eta.values, vec![0.0, 0.0, 0.0, 2.0, 2.0]);
        assert_eq!(eta.g_at_tau[1], None);
        assert_eq!(eta.g_at_tau[3], Some(0.5));
    }

    #[test]
    fn censored_exactly_at_tau_is_zero() {
        let d = design(&[3.0, 3.0], &[true, false]);
        let eta = compute_eta(&d, 3.0, false, |_| panic!("not needed")).unwrap();
        assert_eq!(eta.values, vec![0.0, 0.0]);
    }

    #[test]
    fn saturation_and_cap() {
        let d = design(&[1.0, 2.0, 3.0, 4.0], &[true, false, false, false]);
        assert_eq!(compute_eta(&d, 1.0, false, |_| Ok(1.0)), Err(Error::GSaturated(1)));
        let eta = compute_eta(&d, 1.0, true, |_| Ok(1.0)).unwrap();
        assert_eq!(eta.capped, vec![1, 2, 3]);
        assert!(eta.values[1..].iter().all(|&v| (v - 4.0).abs() < 1e-12));
    }

    #[test]
    fn no_cure_sample_has_zero_proxies() {
        let d = design(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, true]);
        let eta = eta_from_design(&d, &Conditioner::marginal(), true).unwrap();
        assert_eq!(eta.mean(), 0.0);
    }

    #[test]
    fn marginal_eta_uses_censoring_km() {
        // τ̂ = 2; censoring KM at 2: the censored row at 2 is behind the event
        // at 2 in canonical order but censoring jumps are grouped by time.
        let d = design(&[1.0, 2.0, 2.0, 3.0, 4.0], &[false, true, false, false, false]);
        let eta = eta_from_design(&d, &Conditioner::marginal(), false).unwrap();
        // 1 − Ĝ(2) = (1 − 1/5)(1 − 1/4) = 0.6
        assert!((eta.values[3] - 1.0 / 0.6).abs() < 1e-12);
        assert!((eta.values[4] - 1.0 / 0.6).abs() < 1e-12);
        assert_eq!(eta.values[..3], [0.0, 0.0, 0.0]);
    }
}
