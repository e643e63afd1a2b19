//! Maller–Zhou test for sufficient follow-up.
//!
//! With `T_(n)` the largest time and `T¹_max` the largest event time,
//! `N_n` counts events in `(2 T¹_max − T_(n), T¹_max]`. Few events close to
//! the end of follow-up suggest the plateau is reached; the reported
//! statistic `(1 − N_n / n)^n` is small in that case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Design;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowupResult {
    pub t_max: f64,
    pub t1_max: f64,
    pub n_tail: usize,
    pub n: usize,
    pub p_value: f64,
}

pub fn maller_zhou(design: &Design) -> Result<FollowupResult> {
    let t1_max = design.t1_max().ok_or(Error::NoEvents)?;
    let t_max = design.t_max().ok_or(Error::NoEvents)?;
    let lower = 2.0 * t1_max - t_max;
    let n = design.len();
    let n_tail = design
        .times()
        .iter()
        .zip(design.events())
        .filter(|&(&t, &d)| d && t > lower && t <= t1_max)
        .count();
    let p_value = (1.0 - n_tail as f64 / n as f64).powi(n as i32);
    Ok(FollowupResult {
        t_max,
        t1_max,
        n_tail,
        n,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Sample;

    #[test]
    fn counts_tail_events() {
        let s = Sample::from_times(&[1.0, 2.0, 3.0, 4.0, 5.0, 10.0], &[true, true, true, true, true, false]);
        let r = maller_zhou(&Design::from_sample(&s).unwrap()).unwrap();
        assert_eq!((r.t1_max, r.t_max), (5.0, 10.0));
        assert_eq!(r.n_tail, 5);
        assert!((r.p_value - (1.0f64 / 6.0).powi(6)).abs() < 1e-15);
    }

    #[test]
    fn all_events_at_end() {
        let s = Sample::from_times(&[1.0, 2.0, 3.0], &[true, true, true]);
        let r = maller_zhou(&Design::from_sample(&s).unwrap()).unwrap();
        // Interval (3, 3] is empty.
        assert_eq!(r.n_tail, 0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn needs_events() {
        let s = Sample::from_times(&[1.0, 2.0], &[false, false]);
        assert_eq!(maller_zhou(&Design::from_sample(&s).unwrap()), Err(Error::NoEvents));
    }
}
