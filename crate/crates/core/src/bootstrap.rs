//! Bootstrap calibration of the covariate tests under a null-mimicking
//! resampling plan.
//!
//! One resample draws `n` covariate tuples with replacement from the
//! sample, then for each draw:
//!
//! 1. marks it cured with probability `1 − p̂` (the marginal KM plateau when
//!    there is no conditioning block, otherwise an estimate depending on
//!    the conditioning block only), and otherwise draws `Y*` from the latency
//!    estimate `F̂_0(t | W*)`;
//! 2. draws `C*` from `Ĝ(t | W*)`;
//! 3. records `T* = min(Y*, C*)` and `δ* = I(Y* ≤ C*)`.
//!
//! `η̂*` and the statistics are then recomputed on the resample exactly as
//! on the observed data. Resample `b` uses random stream `b + 1` of the
//! configured seed, so the outcome is independent of thread scheduling.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{cv_bandwidth, make_grid, CvTarget};
use crate::error::{Error, Result};
use crate::estimators::{km_survival, latency_from_survival, product_limit, Conditioner, StepCurve};
use crate::proxy::{eta_from_design, EtaVector};
use crate::rng;
use crate::sample::{CovariateSpec, Design};
use crate::stats::{stat_over_orderings, x_block_residuals, Coordinate, StatPair, XColumn};

/// Largest tolerated share of failed resamples.
pub const MAX_FAILURE_RATE: f64 = 0.05;

/// Which null hypothesis is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// Cure rate constant in `Z`; no conditioning block.
    One,
    /// Cure rate depends on one covariate `X` only, not on `Z`.
    Two,
    /// Cure rate depends on a continuous block `X` only, not on `Z`.
    Three,
}

/// `h_j = D_j · n^(−rate)` for `count` equispaced `D_j` in `[d_min, d_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d_min: f64,
    pub d_max: f64,
    pub count: usize,
    pub rate: f64,
}

impl GridSpec {
    /// 10 bandwidths `D n^(−1/5)`, `D` from 4 to 60.
    pub const UNIVARIATE: GridSpec = GridSpec {
        d_min: 4.0,
        d_max: 60.0,
        count: 10,
        rate: 0.2,
    };
    /// 10 bandwidths `D n^(−1/6)`, `D` from 3.5 to 30.
    pub const BIVARIATE: GridSpec = GridSpec {
        d_min: 3.5,
        d_max: 30.0,
        count: 10,
        rate: 1.0 / 6.0,
    };
}

/// Bandwidth of the conditional estimators of `G`, `F_0` and the incidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EstimatorBandwidth {
    /// Leave-one-out cross-validation over a grid, per estimator.
    Cv(GridSpec),
    Fixed(f64),
}

/// Bandwidths of the test statistic when the conditioning block has a
/// continuous covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StatisticBandwidth {
    /// `h = C · n^(−1/(3m))` for each constant `C`, `m` the dimension of `Z`.
    Constants(Vec<f64>),
    Values(Vec<f64>),
}

impl StatisticBandwidth {
    pub fn default_constants() -> Self {
        StatisticBandwidth::Constants(vec![10.0, 20.0, 30.0, 40.0, 45.0, 50.0, 60.0])
    }

    fn resolve(&self, n: usize, m: usize) -> Vec<f64> {
        match self {
            StatisticBandwidth::Constants(cs) => {
                let scale = (n as f64).powf(-1.0 / (3.0 * m as f64));
                cs.iter().map(|c| c * scale).collect()
            }
            StatisticBandwidth::Values(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub case: Case,
    /// Number of bootstrap resamples `B`.
    pub b: usize,
    pub alpha: f64,
    pub seed: u64,
    pub estimator_bandwidth: EstimatorBandwidth,
    pub statistic_bandwidth: StatisticBandwidth,
    /// Cap `Ĝ(τ̂ | W_i)` at `1 − 1/n` before inverting it.
    pub cap_saturation: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl TestConfig {
    pub fn new(case: Case, b: usize, alpha: f64, seed: u64) -> Self {
        let grid = match case {
            Case::One => GridSpec::UNIVARIATE,
            Case::Two | Case::Three => GridSpec::BIVARIATE,
        };
        Self {
            case,
            b,
            alpha,
            seed,
            estimator_bandwidth: EstimatorBandwidth::Cv(grid),
            statistic_bandwidth: StatisticBandwidth::default_constants(),
            cap_saturation: true,
            threads: None,
        }
    }

    fn check(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::InvalidConfig("B must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Bandwidths actually used; `None` where no smoothing was needed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BandwidthRecord {
    pub censoring: Option<f64>,
    pub latency: Option<f64>,
    pub incidence: Option<f64>,
    pub statistic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Rows of the observed sample whose `Ĝ(τ̂ | W_i)` was capped.
    pub capped_observed: usize,
    /// Capped rows summed over all successful resamples.
    pub capped_bootstrap: usize,
    /// Orderings of nominal levels evaluated per statistic.
    pub orderings: usize,
    pub failed_resamples: usize,
    pub first_failure: Option<String>,
    /// Covariate values where the local cure estimate was one and the
    /// marginal latency was used for bootstrap draws.
    pub latency_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub case: Case,
    pub cm_obs: f64,
    pub k_obs: f64,
    pub cm_crit: f64,
    pub k_crit: f64,
    pub p_cm: f64,
    pub p_k: f64,
    pub reject_cm: bool,
    pub reject_k: bool,
    /// Requested number of resamples.
    pub b: usize,
    /// Resamples that produced a statistic.
    pub b_effective: usize,
    pub alpha: f64,
    pub seed: u64,
    pub tau_hat: f64,
    pub bandwidths: BandwidthRecord,
    pub diagnostics: Diagnostics,
}

/// Outcome of inverse-transform sampling from a (possibly defective) law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Draw {
    Time(f64),
    /// `u` exceeds the total mass of the estimated distribution.
    BeyondSupport,
}

/// Smallest jump time `t` with `1 − curve(t) ≥ u`.
pub fn draw_from_curve(curve: &StepCurve, u: f64) -> Draw {
    let k = curve.values().partition_point(|&s| 1.0 - s < u);
    match curve.jump_times().get(k) {
        Some(&t) => Draw::Time(t),
        None => Draw::BeyondSupport,
    }
}

/// Element at 1-based position `⌈(1 − α) B⌉` of the ascending `sorted`.
pub fn critical_value(sorted: &[f64], alpha: f64) -> f64 {
    let b = sorted.len();
    // Tolerance absorbs representation error in (1 − α)·B, e.g. 0.95·500.
    let pos = ((1.0 - alpha) * b as f64 - 1e-9).ceil() as usize;
    sorted[pos.clamp(1, b) - 1]
}

/// Proportion of `boot` strictly larger than `observed`.
pub fn p_value(boot: &[f64], observed: f64) -> f64 {
    boot.iter().filter(|&&s| s > observed).count() as f64 / boot.len() as f64
}

/// Per-covariate-value ingredients of a bootstrap draw.
#[derive(Debug, Clone)]
struct DrawSource {
    cure_prob: f64,
    latency: StepCurve,
    /// Censoring survival `1 − Ĝ(t | w)`.
    censoring: StepCurve,
    /// Largest observed time among rows with positive weight at `w`.
    censor_max: f64,
}

/// Everything needed to generate resamples and recompute the statistics.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    case: Case,
    design: Design,
    eta: EtaVector,
    g_cond: Conditioner,
    bandwidths: BandwidthRecord,
    statistic_h: Vec<Option<f64>>,
    source_of_row: Vec<usize>,
    sources: Vec<DrawSource>,
    latency_fallbacks: usize,
    cap: bool,
}

fn check_case(spec: &CovariateSpec, case: Case) -> Result<()> {
    let x = spec.x_columns();
    let z = spec.z_columns();
    if z.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one tested (Z) covariate is required".into(),
        ));
    }
    match case {
        Case::One if !x.is_empty() => Err(Error::InvalidConfig(
            "case 1 takes no conditioning (X) covariates".into(),
        )),
        Case::Two if x.len() != 1 => Err(Error::InvalidConfig(format!(
            "case 2 takes exactly one conditioning (X) covariate, got {}",
            x.len()
        ))),
        Case::Three if x.is_empty() => Err(Error::InvalidConfig(
            "case 3 needs at least one conditioning (X) covariate".into(),
        )),
        Case::Three if x.iter().any(|&c| !spec.kind(c).is_continuous()) => Err(Error::InvalidConfig(
            "case 3 needs a continuous conditioning block".into(),
        )),
        _ => Ok(()),
    }
}

fn tuple_key(design: &Design, i: usize) -> Vec<u64> {
    design.columns().iter().map(|c| c[i].to_bits()).collect()
}

fn select_bandwidth(
    design: &Design,
    columns: &[usize],
    cfg: &EstimatorBandwidth,
    target: CvTarget,
) -> Result<Option<f64>> {
    if !Conditioner::needs_bandwidth(design.spec(), columns) {
        return Ok(None);
    }
    match cfg {
        EstimatorBandwidth::Fixed(h) => Ok(Some(*h)),
        EstimatorBandwidth::Cv(g) => {
            let grid = make_grid(g.d_min, g.d_max, g.count, g.rate, design.len())?;
            cv_bandwidth(design, columns, &grid, target).map(Some)
        }
    }
}

/// Statistics of one (observed or bootstrap) sample, one pair per
/// statistic bandwidth, and the number of orderings evaluated.
fn statistics(design: &Design, case: Case, eta: &[f64], hs: &[Option<f64>]) -> Result<(Vec<StatPair>, usize)> {
    let spec = design.spec();
    let x_cols = spec.x_columns();
    let z_cols = spec.z_columns();
    let coord = |c: usize| Coordinate {
        name: &spec.entries()[c].name,
        values: design.column(c),
        nominal: spec.kind(c).is_nominal(),
    };
    let coords: Vec<Coordinate> = x_cols.iter().chain(&z_cols).map(|&c| coord(c)).collect();
    let mut out = Vec::with_capacity(hs.len());
    let mut orderings = 0;
    for &h in hs {
        let residuals = match case {
            Case::One => {
                let mean = eta.iter().sum::<f64>() / eta.len() as f64;
                eta.iter().map(|e| e - mean).collect()
            }
            Case::Two | Case::Three => {
                let xs: Vec<XColumn> = x_cols
                    .iter()
                    .map(|&c| XColumn {
                        values: design.column(c),
                        continuous: spec.kind(c).is_continuous(),
                    })
                    .collect();
                x_block_residuals(eta, &xs, h)?
            }
        };
        let (s, k) = stat_over_orderings(&residuals, &coords)?;
        orderings = k;
        out.push(s);
    }
    Ok((out, orderings))
}

impl PreparedTest {
    /// Selects bandwidths, computes `η̂` and precomputes the latency and
    /// censoring laws at every distinct covariate tuple of the sample.
    pub fn new(design: &Design, config: &TestConfig) -> Result<Self> {
        config.check()?;
        let spec = design.spec();
        check_case(spec, config.case)?;
        let t1 = design.t1_max().ok_or(Error::NoEvents)?;
        let all: Vec<usize> = (0..spec.len()).collect();
        let x_cols = spec.x_columns();

        let h_g = select_bandwidth(design, &all, &config.estimator_bandwidth, CvTarget::Censoring)?;
        let h_s = select_bandwidth(design, &all, &config.estimator_bandwidth, CvTarget::Survival)?;
        let g_cond = Conditioner::for_columns(spec, &all, h_g)?;
        let s_cond = Conditioner::for_columns(spec, &all, h_s)?;

        let eta = eta_from_design(design, &g_cond, config.cap_saturation)?;

        // Null cure model: marginal for case 1, conditional on X otherwise.
        enum Incidence {
            Marginal(f64),
            CellMean,
            Smoothed(Conditioner),
        }
        let mut h_inc = None;
        let incidence = match config.case {
            Case::One => Incidence::Marginal(km_survival(design).eval(t1)),
            Case::Two | Case::Three => {
                if Conditioner::needs_bandwidth(spec, &x_cols) {
                    h_inc = select_bandwidth(design, &x_cols, &config.estimator_bandwidth, CvTarget::Survival)?;
                    Incidence::Smoothed(Conditioner::for_columns(spec, &x_cols, h_inc)?)
                } else {
                    Incidence::CellMean
                }
            }
        };

        let marginal_latency = latency_from_survival(&km_survival(design), t1)?;
        let n = design.len();
        let mut keys: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut source_of_row = Vec::with_capacity(n);
        let mut sources = Vec::new();
        let mut latency_fallbacks = 0;
        let mut w = Vec::with_capacity(n);
        for i in 0..n {
            let key = tuple_key(design, i);
            if let Some(&s) = keys.get(&key) {
                source_of_row.push(s);
                continue;
            }
            let query = design.row(i);

            s_cond.fill_weights(design.columns(), n, &query, &mut w)?;
            let surv = product_limit(design.times(), design.events(), true, &w);
            let latency = match latency_from_survival(&surv, t1) {
                Ok(l) => l,
                Err(Error::CureRateOne) => {
                    latency_fallbacks += 1;
                    marginal_latency.clone()
                }
                Err(e) => return Err(e),
            };

            g_cond.fill_weights(design.columns(), n, &query, &mut w)?;
            let censoring = product_limit(design.times(), design.events(), false, &w);
            let censor_max = (0..n)
                .filter(|&j| w[j] > 0.0)
                .map(|j| design.times()[j])
                .fold(0.0, f64::max);

            let cure_prob = match &incidence {
                Incidence::Marginal(c) => *c,
                Incidence::Smoothed(cond) => {
                    cond.fill_weights(design.columns(), n, &query, &mut w)?;
                    product_limit(design.times(), design.events(), true, &w).eval(t1)
                }
                Incidence::CellMean => {
                    let (sum, count) = (0..n)
                        .filter(|&j| x_cols.iter().all(|&c| design.column(c)[j] == query[c]))
                        .fold((0.0, 0usize), |(s, k), j| (s + eta.values[j], k + 1));
                    (sum / count as f64).clamp(0.0, 1.0)
                }
            };

            keys.insert(key, sources.len());
            source_of_row.push(sources.len());
            sources.push(DrawSource {
                cure_prob,
                latency,
                censoring,
                censor_max,
            });
        }

        let statistic_h: Vec<Option<f64>> = if config.case != Case::One && Conditioner::needs_bandwidth(spec, &x_cols) {
            let m = spec.z_columns().len();
            let hs = config.statistic_bandwidth.resolve(n, m);
            if hs.is_empty() {
                return Err(Error::MissingBandwidth);
            }
            hs.into_iter().map(Some).collect()
        } else {
            vec![None]
        };

        Ok(Self {
            case: config.case,
            design: design.clone(),
            eta,
            g_cond,
            bandwidths: BandwidthRecord {
                censoring: h_g,
                latency: h_s,
                incidence: h_inc,
                statistic: None,
            },
            statistic_h,
            source_of_row,
            sources,
            latency_fallbacks,
            cap: config.cap_saturation,
        })
    }

    pub fn eta(&self) -> &EtaVector {
        &self.eta
    }

    pub fn bandwidths(&self) -> BandwidthRecord {
        self.bandwidths
    }

    pub fn statistic_bandwidths(&self) -> &[Option<f64>] {
        &self.statistic_h
    }

    /// Cure probability used for bootstrap draws at the covariates of row `i`.
    pub fn cure_probability(&self, i: usize) -> f64 {
        self.sources[self.source_of_row[i]].cure_prob
    }

    /// Bootstrap resample number `index` for `seed`.
    pub fn resample(&self, seed: u64, index: u64) -> Design {
        let mut rng = rng::stream(seed, index + 1);
        let n = self.design.len();
        let mut times = Vec::with_capacity(n);
        let mut events = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let row = rng.random_range(0..n);
            let u_cure: f64 = rng.random();
            let u_y: f64 = rng.random();
            let u_c: f64 = rng.random();
            let src = &self.sources[self.source_of_row[row]];
            let y = if u_cure < src.cure_prob {
                f64::INFINITY
            } else {
                match draw_from_curve(&src.latency, u_y) {
                    Draw::Time(t) => t,
                    Draw::BeyondSupport => f64::INFINITY,
                }
            };
            let c = match draw_from_curve(&src.censoring, u_c) {
                Draw::Time(t) => t,
                Draw::BeyondSupport => src.censor_max,
            };
            times.push(y.min(c));
            events.push(y <= c);
            rows.push(row);
        }
        let columns = self
            .design
            .columns()
            .iter()
            .map(|col| rows.iter().map(|&r| col[r]).collect())
            .collect();
        Design::from_parts(self.design.spec().clone(), times, events, columns)
    }

    fn bootstrap_statistics(&self, seed: u64, index: u64) -> Result<(Vec<StatPair>, usize)> {
        let boot = self.resample(seed, index);
        let eta = eta_from_design(&boot, &self.g_cond, self.cap)?;
        let (stats, _) = statistics(&boot, self.case, &eta.values, &self.statistic_h)?;
        Ok((stats, eta.capped.len()))
    }

    /// Observed statistics, one per statistic bandwidth.
    pub fn observed(&self) -> Result<(Vec<StatPair>, usize)> {
        statistics(&self.design, self.case, &self.eta.values, &self.statistic_h)
    }

    /// Runs the `B` resamples and assembles one result per statistic
    /// bandwidth.
    pub fn run(&self, config: &TestConfig) -> Result<Vec<TestResult>> {
        let (observed, orderings) = self.observed()?;
        let boot: Vec<Result<(Vec<StatPair>, usize)>> = (0..config.b as u64)
            .into_par_iter()
            .map(|b| self.bootstrap_statistics(config.seed, b))
            .collect();

        let mut failed = 0;
        let mut first_failure = None;
        let mut capped_bootstrap = 0;
        let mut per_h: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); observed.len()];
        for r in boot {
            match r {
                Ok((stats, capped)) => {
                    capped_bootstrap += capped;
                    for (slot, s) in per_h.iter_mut().zip(stats) {
                        slot.0.push(s.cm);
                        slot.1.push(s.k);
                    }
                }
                Err(e) => {
                    failed += 1;
                    first_failure.get_or_insert_with(|| e.to_string());
                }
            }
        }
        if failed as f64 > MAX_FAILURE_RATE * config.b as f64 || failed == config.b {
            return Err(Error::TooManyFailures {
                failed,
                total: config.b,
                first: first_failure.unwrap_or_default(),
            });
        }

        let diagnostics = Diagnostics {
            capped_observed: self.eta.capped.len(),
            capped_bootstrap,
            orderings,
            failed_resamples: failed,
            first_failure,
            latency_fallbacks: self.latency_fallbacks,
        };
        Ok(observed
            .iter()
            .zip(per_h)
            .zip(&self.statistic_h)
            .map(|((obs, (mut cm, mut k)), &h)| {
                let p_cm = p_value(&cm, obs.cm);
                let p_k = p_value(&k, obs.k);
                cm.sort_by(f64::total_cmp);
                k.sort_by(f64::total_cmp);
                let cm_crit = critical_value(&cm, config.alpha);
                let k_crit = critical_value(&k, config.alpha);
                TestResult {
                    case: self.case,
                    cm_obs: obs.cm,
                    k_obs: obs.k,
                    cm_crit,
                    k_crit,
                    p_cm,
                    p_k,
                    reject_cm: obs.cm > cm_crit,
                    reject_k: obs.k > k_crit,
                    b: config.b,
                    b_effective: cm.len(),
                    alpha: config.alpha,
                    seed: config.seed,
                    tau_hat: self.eta.tau_hat,
                    bandwidths: BandwidthRecord {
                        statistic: h,
                        ..self.bandwidths
                    },
                    diagnostics: diagnostics.clone(),
                }
            })
            .collect())
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(f),
    }
}

/// Full bootstrap test: one [`TestResult`] per statistic bandwidth (a single
/// result unless the conditioning block has a continuous covariate).
pub fn run_test(design: &Design, config: &TestConfig) -> Result<Vec<TestResult>> {
    with_threads(config.threads, || PreparedTest::new(design, config)?.run(config))
}

/// A case-1 bootstrap resample (cure probability from the marginal KM plateau).
pub fn resample_case1(design: &Design, config: &TestConfig, index: u64) -> Result<Design> {
    if config.case != Case::One {
        return Err(Error::InvalidConfig(
            "resample_case1 needs a case-1 configuration".into(),
        ));
    }
    Ok(PreparedTest::new(design, config)?.resample(config.seed, index))
}

/// A case-2/3 bootstrap resample (cure probability conditional on `X`,
/// covariate tuples resampled jointly).
pub fn resample_case2(design: &Design, config: &TestConfig, index: u64) -> Result<Design> {
    if config.case == Case::One {
        return Err(Error::InvalidConfig(
            "resample_case2 needs a case-2 or case-3 configuration".into(),
        ));
    }
    Ok(PreparedTest::new(design, config)?.resample(config.seed, index))
}
