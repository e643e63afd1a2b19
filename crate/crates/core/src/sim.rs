//! Simulation scenarios and the Monte Carlo driver for rejection-rate
//! tables.
//!
//! All scenarios share the truncated-exponential latency
//! `S_0(t | z) = (e^{−α t} − e^{−α τ_0}) / (1 − e^{−α τ_0})` on `[0, τ_0]`
//! and the logistic incidence `p(z) = logistic(0.476 + 0.358 z)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{run_test, Case, EstimatorBandwidth, StatisticBandwidth, TestConfig};
use crate::error::{Error, Result};
use crate::rng;
use crate::sample::{CovValue, CovariateEntry, CovariateKind, CovariateSpec, Observation, Role, Sample};

pub const TAU0: f64 = 4.605;
const B0: f64 = 0.476;
const B1: f64 = 0.358;
/// Censoring rates per level in the three-level designs.
pub const LEVEL_CENSORING: [f64; 3] = [0.6, 0.45, 0.3];
/// Latency anchor of the three-level designs without cure.
pub const NO_CURE_ANCHOR: f64 = 20.0;
pub const CASE2_X: [f64; 3] = [-2.4622, -0.19702, 1.0371];
pub const CASE2_Z_NULL: [f64; 3] = [0.6157, 0.6157, 0.6157];
pub const CASE2_Z_ALT: [f64; 3] = [-13.123, 0.0, 4.9454];
pub const BETA2_ALT: f64 = 0.225;
pub const EQUAL_MASS: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
pub const SKEWED_MASS: [f64; 3] = [0.2, 0.2, 0.6];

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Censoring rate `λ(z)` of the continuous case-1 design.
pub fn lambda_case1(z: f64) -> f64 {
    0.6 / (2.0 + (z - 20.0) / 40.0)
}

/// Censoring rate `λ(x, z)` of the case-2 designs.
pub fn lambda_case2(x: f64, z: f64) -> f64 {
    0.6 / (2.0 + (0.5 * (x + z) - 20.0) / 40.0)
}

/// Latency rate `α(v) = exp((v + 20) / 40)`.
pub fn alpha(v: f64) -> f64 {
    ((v + 20.0) / 40.0).exp()
}

/// Logistic incidence `p(z)`.
pub fn incidence_case1(z: f64) -> f64 {
    logistic(B0 + B1 * z)
}

/// Incidence `p(x, z) = logistic(0.476 + 0.358 x (1 + β_2 z))`.
pub fn incidence_case2(x: f64, z: f64, beta2: f64) -> f64 {
    logistic(B0 + B1 * x * (1.0 + beta2 * z))
}

/// `z` with `p(z) = p`.
pub fn anchor_for(p: f64) -> f64 {
    ((p / (1.0 - p)).ln() - B0) / B1
}

/// Quantile of the truncated exponential latency with rate `alpha`.
pub fn latency_quantile(alpha: f64, u: f64) -> f64 {
    let tail = (-alpha * TAU0).exp();
    -((1.0 - u) * (1.0 - tail) + tail).ln() / alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Incidence {
    Constant(f64),
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    /// `Z ~ U(−20, 20)`, censoring `Exp(λ(Z))`, latency `α(Z)`.
    Case1Continuous { incidence: Incidence },
    /// Three ordered levels observed as 1, 2, 3.
    Case1Discrete { probs: [f64; 3], mass: [f64; 3] },
    /// Three unordered levels `b1`, `b2`, `b3`.
    Case1Nominal { probs: [f64; 3], mass: [f64; 3] },
    /// `X, Z ~ N(0, 5²)`.
    Case2Continuous { alternative: bool },
    /// `X` on the fixed support, `Z` observed as its level 1, 2, 3.
    Case2Discrete { alternative: bool, mass: [f64; 3] },
}

fn fmt_probs(p: &[f64; 3]) -> String {
    if p[0] == p[1] && p[1] == p[2] {
        format!("p{}", p[0])
    } else {
        format!("p{}-{}-{}", p[0], p[1], p[2])
    }
}

fn fmt_mass(m: &[f64; 3]) -> &'static str {
    if *m == EQUAL_MASS {
        "equal"
    } else if *m == SKEWED_MASS {
        "skewed"
    } else {
        "custom"
    }
}

fn draw_level(rng: &mut ChaCha8Rng, mass: &[f64; 3]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, m) in mass.iter().enumerate() {
        acc += m;
        if u < acc {
            return j;
        }
    }
    2
}

/// `(T, δ, cured)` from an incidence, latency rate and censoring rate.
fn mixture_draw(rng: &mut ChaCha8Rng, p: f64, alpha: f64, lambda: f64) -> (f64, bool, bool) {
    let u_cure: f64 = rng.random();
    let u_y: f64 = rng.random();
    let c = Exp::new(lambda).expect("positive rate").sample(rng);
    let cured = u_cure >= p;
    let y = if cured {
        f64::INFINITY
    } else {
        latency_quantile(alpha, u_y)
    };
    (y.min(c), y <= c, cured)
}

impl Scenario {
    pub fn name(&self) -> String {
        match self {
            Scenario::Case1Continuous { incidence } => match incidence {
                Incidence::Constant(p) if *p >= 1.0 => "c1-cont-nocure".into(),
                Incidence::Constant(p) => format!("c1-cont-p{p}"),
                Incidence::Logistic => "c1-cont-h1".into(),
            },
            Scenario::Case1Discrete { probs, mass } => {
                format!("c1-disc-{}-{}", fmt_probs(probs), fmt_mass(mass))
            }
            Scenario::Case1Nominal { probs, mass } => {
                format!("c1-nom-{}-{}", fmt_probs(probs), fmt_mass(mass))
            }
            Scenario::Case2Continuous { alternative } => {
                format!("c2-cont-{}", if *alternative { "h1" } else { "h0" })
            }
            Scenario::Case2Discrete { alternative, mass } => {
                format!("c2-disc-{}-{}", if *alternative { "h1" } else { "h0" }, fmt_mass(mass))
            }
        }
    }

    pub fn case(&self) -> Case {
        match self {
            Scenario::Case1Continuous { .. } | Scenario::Case1Discrete { .. } | Scenario::Case1Nominal { .. } => {
                Case::One
            }
            Scenario::Case2Continuous { .. } | Scenario::Case2Discrete { .. } => Case::Two,
        }
    }

    pub fn check(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let mass_ok = |m: &[f64; 3]| m.iter().all(|&v| prob(v)) && (m.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        let ok = match self {
            Scenario::Case1Continuous {
                incidence: Incidence::Constant(p),
            } => prob(*p),
            Scenario::Case1Continuous { .. } | Scenario::Case2Continuous { .. } => true,
            Scenario::Case1Discrete { probs, mass } | Scenario::Case1Nominal { probs, mass } => {
                probs.iter().all(|&p| p > 0.0 && p <= 1.0) && mass_ok(mass)
            }
            Scenario::Case2Discrete { mass, .. } => mass_ok(mass),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "scenario {} has invalid probabilities",
                self.name()
            )))
        }
    }

    /// Covariate layout of generated samples.
    pub fn spec(&self) -> CovariateSpec {
        let entries = match self {
            Scenario::Case1Continuous { .. } => vec![CovariateEntry::new("z", CovariateKind::Continuous, Role::Z)],
            Scenario::Case1Discrete { .. } => vec![CovariateEntry::new("z", CovariateKind::Discrete, Role::Z)],
            Scenario::Case1Nominal { .. } => vec![CovariateEntry::new(
                "z",
                CovariateKind::Nominal(vec!["b1".into(), "b2".into(), "b3".into()]),
                Role::Z,
            )],
            Scenario::Case2Continuous { .. } => vec![
                CovariateEntry::new("x", CovariateKind::Continuous, Role::X),
                CovariateEntry::new("z", CovariateKind::Continuous, Role::Z),
            ],
            Scenario::Case2Discrete { .. } => vec![
                CovariateEntry::new("x", CovariateKind::Discrete, Role::X),
                CovariateEntry::new("z", CovariateKind::Discrete, Role::Z),
            ],
        };
        CovariateSpec::new(entries).expect("static layout")
    }

    /// Per-level `(p, α, λ)` of the three-level case-1 designs.
    pub fn level_parameters(probs: &[f64; 3]) -> [(f64, f64, f64); 3] {
        std::array::from_fn(|j| {
            let p = probs[j];
            let z = if p >= 1.0 { NO_CURE_ANCHOR } else { anchor_for(p) };
            (p, alpha(z), LEVEL_CENSORING[j])
        })
    }

    /// `n` independent observations.
    pub fn generate(&self, n: usize, rng: &mut ChaCha8Rng) -> Sample {
        self.generate_with_cure(n, rng).0
    }

    /// As [`Scenario::generate`], also returning the latent cure indicators.
    pub fn generate_with_cure(&self, n: usize, rng: &mut ChaCha8Rng) -> (Sample, Vec<bool>) {
        let mut obs = Vec::with_capacity(n);
        let mut cured = Vec::with_capacity(n);
        match self {
            Scenario::Case1Continuous { incidence } => {
                for _ in 0..n {
                    let z: f64 = rng.random_range(-20.0..20.0);
                    let p = match incidence {
                        Incidence::Constant(p) => *p,
                        Incidence::Logistic => incidence_case1(z),
                    };
                    let (t, d, c) = mixture_draw(rng, p, alpha(z), lambda_case1(z));
                    cured.push(c);
                    obs.push(Observation::new(t, d, vec![CovValue::Real(z)]));
                }
            }
            Scenario::Case1Discrete { probs, mass } | Scenario::Case1Nominal { probs, mass } => {
                let params = Self::level_parameters(probs);
                let nominal = matches!(self, Scenario::Case1Nominal { .. });
                for _ in 0..n {
                    let j = draw_level(rng, mass);
                    let (p, a, l) = params[j];
                    let (t, d, c) = mixture_draw(rng, p, a, l);
                    let z = if nominal {
                        CovValue::label(&format!("b{}", j + 1))
                    } else {
                        CovValue::Real((j + 1) as f64)
                    };
                    cured.push(c);
                    obs.push(Observation::new(t, d, vec![z]));
                }
            }
            Scenario::Case2Continuous { alternative } => {
                let normal = Normal::new(0.0, 5.0).expect("valid normal");
                let beta2 = if *alternative { BETA2_ALT } else { 0.0 };
                for _ in 0..n {
                    let x = normal.sample(rng);
                    let z = normal.sample(rng);
                    let a = if *alternative { alpha(x + z) } else { alpha(z) };
                    let (t, d, c) = mixture_draw(rng, incidence_case2(x, z, beta2), a, lambda_case2(x, z));
                    cured.push(c);
                    obs.push(Observation::new(t, d, vec![CovValue::Real(x), CovValue::Real(z)]));
                }
            }
            Scenario::Case2Discrete { alternative, mass } => {
                let (zs, beta2) = if *alternative {
                    (CASE2_Z_ALT, BETA2_ALT)
                } else {
                    (CASE2_Z_NULL, 0.0)
                };
                for _ in 0..n {
                    let i = draw_level(rng, mass);
                    let j = draw_level(rng, mass);
                    let (x, z) = (CASE2_X[i], zs[j]);
                    let a = if *alternative { alpha(x + z) } else { alpha(z) };
                    let (t, d, c) = mixture_draw(rng, incidence_case2(x, z, beta2), a, lambda_case2(x, z));
                    cured.push(c);
                    obs.push(Observation::new(
                        t,
                        d,
                        vec![CovValue::Real(x), CovValue::Real((j + 1) as f64)],
                    ));
                }
            }
        }
        (Sample::new(self.spec(), obs), cured)
    }
}

/// Continuous case-1 sample, `Z ~ U(−20, 20)`.
pub fn gen_case1_continuous(incidence: Incidence, n: usize, rng: &mut ChaCha8Rng) -> Sample {
    Scenario::Case1Continuous { incidence }.generate(n, rng)
}

/// Three ordered levels with incidences `probs` (1 for no cure).
pub fn gen_case1_discrete(probs: [f64; 3], mass: [f64; 3], n: usize, rng: &mut ChaCha8Rng) -> Sample {
    Scenario::Case1Discrete { probs, mass }.generate(n, rng)
}

/// Three unordered levels `b1`, `b2`, `b3`.
pub fn gen_case1_nominal(probs: [f64; 3], mass: [f64; 3], n: usize, rng: &mut ChaCha8Rng) -> Sample {
    Scenario::Case1Nominal { probs, mass }.generate(n, rng)
}

/// Case-2 sample; `mass` selects the discrete design, `None` the continuous one.
pub fn gen_case2(alternative: bool, mass: Option<[f64; 3]>, n: usize, rng: &mut ChaCha8Rng) -> Sample {
    match mass {
        Some(mass) => Scenario::Case2Discrete { alternative, mass }.generate(n, rng),
        None => Scenario::Case2Continuous { alternative }.generate(n, rng),
    }
}

/// Named scenario sets.
pub fn preset(name: &str) -> Result<Vec<Scenario>> {
    let null_ps = [0.5, 0.6, 0.7, 0.8, 1.0];
    let alts = [[0.3, 0.5, 0.7], [0.1, 0.5, 0.9]];
    let three_level = |nominal: bool| -> Vec<Scenario> {
        let make = |probs, mass| {
            if nominal {
                Scenario::Case1Nominal { probs, mass }
            } else {
                Scenario::Case1Discrete { probs, mass }
            }
        };
        let mut v: Vec<Scenario> = null_ps.iter().map(|&p| make([p; 3], EQUAL_MASS)).collect();
        for a in alts {
            for m in [EQUAL_MASS, SKEWED_MASS] {
                v.push(make(a, m));
            }
        }
        v
    };
    match name {
        "table1" => {
            let mut v: Vec<Scenario> = null_ps
                .iter()
                .map(|&p| Scenario::Case1Continuous {
                    incidence: Incidence::Constant(p),
                })
                .collect();
            v.push(Scenario::Case1Continuous {
                incidence: Incidence::Logistic,
            });
            Ok(v)
        }
        "table2" => Ok(three_level(false)),
        "table3" => Ok(three_level(true)),
        "table4-discrete" => Ok([false, true]
            .iter()
            .flat_map(|&alternative| {
                [EQUAL_MASS, SKEWED_MASS].map(|mass| Scenario::Case2Discrete { alternative, mass })
            })
            .collect()),
        "table5-continuous" => Ok(vec![
            Scenario::Case2Continuous { alternative: false },
            Scenario::Case2Continuous { alternative: true },
        ]),
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

pub const PRESETS: [&str; 5] = ["table1", "table2", "table3", "table4-discrete", "table5-continuous"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub scenarios: Vec<Scenario>,
    pub sample_sizes: Vec<usize>,
    /// Replications `κ` per scenario and sample size.
    pub reps: usize,
    pub b: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Overrides the case default of [`TestConfig::new`].
    pub estimator_bandwidth: Option<EstimatorBandwidth>,
    pub statistic_bandwidth: Option<StatisticBandwidth>,
    pub threads: Option<usize>,
}

impl MonteCarloConfig {
    pub fn new(scenarios: Vec<Scenario>, sample_sizes: Vec<usize>, reps: usize, b: usize, seed: u64) -> Self {
        Self {
            scenarios,
            sample_sizes,
            reps,
            b,
            alpha: 0.05,
            seed,
            estimator_bandwidth: None,
            statistic_bandwidth: None,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub n: usize,
    pub scenario: String,
    /// `CM` or `K`, suffixed with `@h=` and the statistic bandwidth when
    /// several are evaluated.
    pub stat: String,
    /// `None` when every replication failed.
    pub rejection_rate: Option<f64>,
    pub kappa_effective: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    pub reps: usize,
    pub b: usize,
    pub alpha: f64,
    pub seed: u64,
    pub rows: Vec<RejectionRow>,
    /// First error message per (scenario, n) with failed replications.
    pub failures: Vec<String>,
}

impl RejectionTable {
    pub const CSV_HEADER: &'static str = "n,scenario,stat,rejection_rate,kappa_effective";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let rate = r.rejection_rate.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.n, r.scenario, r.stat, rate, r.kappa_effective
            ));
        }
        out
    }

    pub fn rate(&self, scenario: &str, n: usize, stat: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.n == n && r.stat == stat)
            .and_then(|r| r.rejection_rate)
    }
}

/// Per-replication rejections: one `(label, reject_cm, reject_k)` per
/// statistic bandwidth.
type Trial = Result<Vec<(Option<f64>, bool, bool)>>;

fn run_trial(config: &MonteCarloConfig, s_idx: usize, scenario: &Scenario, n: usize, rep: usize) -> Trial {
    let trial_seed = rng::derive_seed(config.seed, &[s_idx as u64, n as u64, rep as u64]);
    let sample = scenario.generate(n, &mut rng::stream(trial_seed, 0));
    let design = crate::sample::Design::from_sample(&sample)?;
    let mut tc = TestConfig::new(scenario.case(), config.b, config.alpha, trial_seed);
    if let Some(e) = &config.estimator_bandwidth {
        tc.estimator_bandwidth = e.clone();
    }
    if let Some(s) = &config.statistic_bandwidth {
        tc.statistic_bandwidth = s.clone();
    }
    Ok(run_test(&design, &tc)?
        .into_iter()
        .map(|r| (r.bandwidths.statistic, r.reject_cm, r.reject_k))
        .collect())
}

/// Rejection frequencies of both statistics for every scenario and sample
/// size. Replication `r` of scenario `s` at size `n` uses a seed derived from
/// `(seed, s, n, r)`.
pub fn run_monte_carlo(config: &MonteCarloConfig) -> Result<RejectionTable> {
    if config.reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    for s in &config.scenarios {
        s.check()?;
    }
    let jobs: Vec<(usize, usize, usize)> = config
        .scenarios
        .iter()
        .enumerate()
        .flat_map(|(s, _)| {
            config
                .sample_sizes
                .iter()
                .flat_map(move |&n| (0..config.reps).map(move |r| (s, n, r)))
        })
        .collect();
    let work = || -> Vec<Trial> {
        jobs.par_iter()
            .map(|&(s, n, r)| run_trial(config, s, &config.scenarios[s], n, r))
            .collect()
    };
    let trials = match config.threads {
        None => work(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work),
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (chunk, cell) in trials.chunks(config.reps).zip(jobs.chunks(config.reps)) {
        let (s, n, _) = cell[0];
        let name = config.scenarios[s].name();
        let ok: Vec<&Vec<(Option<f64>, bool, bool)>> = chunk.iter().filter_map(|t| t.as_ref().ok()).collect();
        if let Some(Err(e)) = chunk.iter().find(|t| t.is_err()) {
            failures.push(format!("{name} n={n}: {} failed, first: {e}", chunk.len() - ok.len()));
        }
        let kappa = ok.len();
        let labels: Vec<Option<f64>> = ok
            .first()
            .map(|t| t.iter().map(|x| x.0).collect())
            .unwrap_or_else(|| vec![None]);
        for (k, h) in labels.iter().enumerate() {
            let suffix = h.map(|h| format!("@h={h:.4}")).unwrap_or_default();
            let rate = |pick: fn(&(Option<f64>, bool, bool)) -> bool| {
                (kappa > 0).then(|| ok.iter().filter(|t| pick(&t[k])).count() as f64 / kappa as f64)
            };
            rows.push(RejectionRow {
                n,
                scenario: name.clone(),
                stat: format!("CM{suffix}"),
                rejection_rate: rate(|t| t.1),
                kappa_effective: kappa,
            });
            rows.push(RejectionRow {
                n,
                scenario: name.clone(),
                stat: format!("K{suffix}"),
                rejection_rate: rate(|t| t.2),
                kappa_effective: kappa,
            });
        }
    }
    Ok(RejectionTable {
        reps: config.reps,
        b: config.b,
        alpha: config.alpha,
        seed: config.seed,
        rows,
        failures,
    })
}
