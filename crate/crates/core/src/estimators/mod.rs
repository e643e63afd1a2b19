//! Product-limit estimators of survival, censoring, incidence and latency.
//!
//! Every estimator here is a weighted product-limit walk over the canonically
//! ordered rows of a [`Design`]:
//!
//! - Kaplan-Meier: all weights equal.
//! - Beran: Nadaraya-Watson weights `K_h(x0 − X_i)` on one continuous covariate.
//! - Stratified KM: indicator weights on a discrete or nominal level.
//! - Mixed covariates: product weights from a [`Conditioner`].
//!
//! The censoring survival `1 − Ĝ` uses the same walk with the indicator
//! flipped. The cure rate at a covariate value is the conditional survival
//! evaluated at the largest uncensored time `T¹_max`, and the latency is
//! recovered from the mixture identity `S = 1 − p + p S_0`.

mod curve;
mod kernel;

pub use curve::StepCurve;
pub use kernel::{epanechnikov, Conditioner, KernelConfig, Smoother};

pub(crate) use curve::{product_limit, product_limit_at};

use crate::error::{Error, Result};
use crate::sample::Design;

/// Kaplan-Meier estimate of the survival function.
pub fn km_survival(design: &Design) -> StepCurve {
    let w = vec![1.0; design.len()];
    product_limit(design.times(), design.events(), true, &w)
}

/// Kaplan-Meier estimate of the censoring survival `1 − Ĝ`.
pub fn km_censoring(design: &Design) -> StepCurve {
    let w = vec![1.0; design.len()];
    product_limit(design.times(), design.events(), false, &w)
}

fn check_continuous(design: &Design, column: usize) -> Result<()> {
    if column >= design.spec().len() {
        return Err(Error::InvalidConfig(format!("no covariate at position {column}")));
    }
    if !design.spec().kind(column).is_continuous() {
        return Err(Error::InvalidConfig(format!(
            "covariate `{}` is not continuous",
            design.spec().entries()[column].name
        )));
    }
    Ok(())
}

fn point_query(design: &Design, column: usize, x0: f64) -> Vec<f64> {
    let mut q = vec![0.0; design.spec().len()];
    q[column] = x0;
    q
}

/// Nadaraya-Watson weights `B_h[i](x0)` in canonical row order; they sum to one.
pub fn nw_weights(design: &Design, column: usize, x0: f64, cfg: KernelConfig) -> Result<Vec<f64>> {
    check_continuous(design, column)?;
    let cond = Conditioner::new(vec![(column, Smoother::Kernel(cfg))]);
    let mut w = Vec::with_capacity(design.len());
    cond.fill_weights(design.columns(), design.len(), &point_query(design, column, x0), &mut w)?;
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Beran conditional product-limit estimate `Ŝ_h(t | x0)`.
pub fn beran_survival(design: &Design, column: usize, x0: f64, cfg: KernelConfig) -> Result<StepCurve> {
    check_continuous(design, column)?;
    let cond = Conditioner::new(vec![(column, Smoother::Kernel(cfg))]);
    conditional_survival(design, &cond, &point_query(design, column, x0))
}

/// Kaplan-Meier estimate on the rows whose covariate `column` equals `level`
/// (a real value, or the level index of a nominal covariate).
pub fn stratified_km(design: &Design, column: usize, level: f64) -> Result<StepCurve> {
    let col = design.column(column);
    let sub = design.filter(|i| col[i] == level);
    if sub.is_empty() {
        let name = match design.spec().kind(column) {
            crate::sample::CovariateKind::Nominal(levels) => {
                levels.get(level as usize).cloned().unwrap_or_else(|| level.to_string())
            }
            _ => level.to_string(),
        };
        return Err(Error::EmptyStratum(name));
    }
    Ok(km_survival(&sub))
}

/// [`stratified_km`] addressed by nominal label.
pub fn stratified_km_label(design: &Design, column: usize, label: &str) -> Result<StepCurve> {
    let code = design
        .spec()
        .level_code(column, label)
        .ok_or_else(|| Error::EmptyStratum(label.trim().to_string()))?;
    stratified_km(design, column, code as f64)
}

/// Product-weight conditional product-limit estimate of `S(t | w0)`.
/// `query` is a full covariate tuple; only the positions named by `cond`
/// are read.
pub fn conditional_survival(design: &Design, cond: &Conditioner, query: &[f64]) -> Result<StepCurve> {
    let mut w = Vec::with_capacity(design.len());
    cond.fill_weights(design.columns(), design.len(), query, &mut w)?;
    Ok(product_limit(design.times(), design.events(), true, &w))
}

/// Conditional censoring survival `1 − Ĝ(t | w0)`: the product-limit walk
/// with censored rows as the jump events.
pub fn censoring_survival(design: &Design, cond: &Conditioner, query: &[f64]) -> Result<StepCurve> {
    let mut w = Vec::with_capacity(design.len());
    cond.fill_weights(design.columns(), design.len(), query, &mut w)?;
    Ok(product_limit(design.times(), design.events(), false, &w))
}

/// Cure probability estimate `1 − p̂(w0) = Ŝ(T¹_max | w0)`.
pub fn cure_rate_at(design: &Design, cond: &Conditioner, query: &[f64]) -> Result<f64> {
    let t1 = design.t1_max().ok_or(Error::NoEvents)?;
    Ok(conditional_survival(design, cond, query)?.eval(t1))
}

/// Latency `Ŝ_0(t | w0) = (Ŝ(t | w0) − (1 − p̂(w0))) / p̂(w0)`, clipped to
/// `[0, 1]` and made nonincreasing by a running minimum.
pub fn latency_curve(design: &Design, cond: &Conditioner, query: &[f64]) -> Result<StepCurve> {
    let t1 = design.t1_max().ok_or(Error::NoEvents)?;
    let s = conditional_survival(design, cond, query)?;
    latency_from_survival(&s, t1)
}

/// Latency from an already computed conditional survival curve.
pub fn latency_from_survival(survival: &StepCurve, t1_max: f64) -> Result<StepCurve> {
    let cure = survival.eval(t1_max);
    let incidence = 1.0 - cure;
    if incidence <= 0.0 {
        return Err(Error::CureRateOne);
    }
    let mut running = 1.0_f64;
    let values = survival
        .values()
        .iter()
        .map(|&s| {
            let v = ((s - cure) / incidence).clamp(0.0, 1.0);
            running = running.min(v);
            running
        })
        .collect();
    Ok(StepCurve::from_raw(survival.jump_times().to_vec(), values))
}

/// Reusable buffers for evaluating a conditional product-limit estimate at a
/// single time without allocating the curve.
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    weights: Vec<f64>,
    suffix: Vec<f64>,
}

impl Scratch {
    /// `1 − Ĝ(t | query)` on `design`.
    pub(crate) fn censoring_survival_at(
        &mut self,
        design: &Design,
        cond: &Conditioner,
        query: &[f64],
        t: f64,
    ) -> Result<f64> {
        cond.fill_weights(design.columns(), design.len(), query, &mut self.weights)?;
        Ok(product_limit_at(
            design.times(),
            design.events(),
            false,
            &self.weights,
            t,
            &mut self.suffix,
        ))
    }
}
