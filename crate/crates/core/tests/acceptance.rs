//! Acceptance gate. Each test checks one criterion at its stated tolerance
//! and prints a single `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test -p curetest --test acceptance -- --nocapture` to see
//! the lines of passing criteria too.

mod common;

use std::sync::OnceLock;

use common::*;
use curetest::estimators::{beran_survival, km_survival, KernelConfig};
use curetest::rng;
use curetest::sim::*;
use curetest::stats::{nominal_stat, stat_pair, u_case1};
use curetest::{run_test, Case, Design, TestConfig};
use rand::Rng;

const N: usize = 100;
const REPS: usize = 200;
const B: usize = 500;
const SEED: u64 = 20_190_611;

fn report(id: u32, pass: bool, detail: &str) {
    println!("criterion {id}: {} : {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn continuous_table() -> &'static RejectionTable {
    static TABLE: OnceLock<RejectionTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let scenarios = vec![
            Scenario::Case1Continuous {
                incidence: Incidence::Constant(0.6),
            },
            Scenario::Case1Continuous {
                incidence: Incidence::Constant(0.8),
            },
            Scenario::Case1Continuous {
                incidence: Incidence::Constant(1.0),
            },
            Scenario::Case1Continuous {
                incidence: Incidence::Logistic,
            },
        ];
        run_monte_carlo(&MonteCarloConfig::new(scenarios, vec![N], REPS, B, SEED)).unwrap()
    })
}

fn rate(table: &RejectionTable, scenario: &str, stat: &str) -> f64 {
    table.rate(scenario, N, stat).expect("cell present")
}

#[test]
fn criterion_01_size_continuous() {
    let t = continuous_table();
    let targets = [("c1-cont-p0.6", 0.051, 0.057), ("c1-cont-p0.8", 0.044, 0.045)];
    let mut pass = true;
    let mut detail = Vec::new();
    for (s, cm, k) in targets {
        let (rc, rk) = (rate(t, s, "CM"), rate(t, s, "K"));
        pass &= (rc - cm).abs() <= 0.05 && (rk - k).abs() <= 0.05;
        detail.push(format!("{s} CM {rc:.3} (target {cm}) K {rk:.3} (target {k})"));
    }
    report(1, pass, &detail.join("; "));
}

#[test]
fn criterion_02_power_continuous() {
    let t = continuous_table();
    let (rc, rk) = (rate(t, "c1-cont-h1", "CM"), rate(t, "c1-cont-h1", "K"));
    report(
        2,
        rc >= 0.95 && rk >= 0.95,
        &format!("CM {rc:.3} K {rk:.3}, need >= 0.95"),
    );
}

#[test]
fn criterion_03_power_discrete() {
    let scenario = Scenario::Case1Discrete {
        probs: [0.1, 0.5, 0.9],
        mass: EQUAL_MASS,
    };
    let name = scenario.name();
    let t = run_monte_carlo(&MonteCarloConfig::new(vec![scenario], vec![N], REPS, B, SEED)).unwrap();
    let rc = rate(&t, &name, "CM");
    report(3, rc >= 0.90, &format!("CM {rc:.3}, need >= 0.90"));
}

#[test]
fn criterion_04_case2_incidence_grid() {
    let printed_null = [[0.40; 3], [0.60; 3], [0.70; 3]];
    let printed_alt = [[0.10, 0.60, 0.80], [0.35, 0.40, 0.42], [0.56, 0.30, 0.22]];
    let mut misses = Vec::new();
    for (label, zs, beta2, printed) in [
        ("H0", CASE2_Z_NULL, 0.0, printed_null),
        ("H1", CASE2_Z_ALT, BETA2_ALT, printed_alt),
    ] {
        for (i, x) in CASE2_X.iter().enumerate() {
            for (j, z) in zs.iter().enumerate() {
                let p = incidence_case2(*x, *z, beta2);
                if (p - printed[i][j]).abs() > 0.005 {
                    misses.push(format!(
                        "{label} p(x{},z{}) = {p:.4} vs {}",
                        i + 1,
                        j + 1,
                        printed[i][j]
                    ));
                }
            }
        }
    }
    let detail = if misses.is_empty() {
        "18/18 entries within 0.005".to_string()
    } else {
        format!("{}/18 entries off: {}", misses.len(), misses.join(", "))
    };
    report(4, misses.is_empty(), &detail);
}

#[test]
fn criterion_05_alternative_calibration() {
    let subjects = 200_000;
    let (s, cured) = Scenario::Case1Continuous {
        incidence: Incidence::Logistic,
    }
    .generate_with_cure(subjects, &mut rng::stream(SEED, 5));
    let cens = s.observations.iter().filter(|o| !o.event).count() as f64 / subjects as f64;
    let cure = cured.iter().filter(|c| **c).count() as f64 / subjects as f64;
    let pass = (cens - 0.5465).abs() <= 0.01 && (cure - 0.4666).abs() <= 0.01;
    report(
        5,
        pass,
        &format!(
            "censoring {:.2}% (54.65 +/- 1), cure {:.2}% (46.66 +/- 1)",
            100.0 * cens,
            100.0 * cure
        ),
    );
}

#[test]
fn criterion_06_no_cure_conservative() {
    let t = continuous_table();
    let (rc, rk) = (rate(t, "c1-cont-nocure", "CM"), rate(t, "c1-cont-nocure", "K"));
    report(
        6,
        rc <= 0.05 && rk <= 0.05,
        &format!("CM {rc:.3} K {rk:.3}, need <= 0.05"),
    );
}

#[test]
fn criterion_07_uniform_beran_is_km() {
    let mut r = rng::stream(SEED, 7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = r.random_range(1..120);
        let rows: Vec<(f64, bool, f64)> = (0..n)
            .map(|_| {
                let t = (r.random_range(1..60) as f64) * 0.1;
                (t, r.random_bool(0.6), r.random_range(-20.0..20.0))
            })
            .collect();
        let d = design_z(&rows);
        let km = km_survival(&d);
        let beran = beran_survival(&d, 0, r.random_range(-20.0..20.0), KernelConfig::flat()).unwrap();
        for &t in d.times() {
            worst = worst.max((km.eval(t) - beran.eval(t)).abs());
        }
    }
    report(
        7,
        worst <= 1e-12,
        &format!("max |Beran - KM| = {worst:e} over 100 samples"),
    );
}

#[test]
fn criterion_08_case1_hand_example() {
    let s = stat_pair(&u_case1(&[0.0, 2.0], &[1.0, 2.0]));
    let pass = s.cm == 0.25 && s.k == 2f64.sqrt() / 2.0;
    report(8, pass, &format!("CM {} K {}", s.cm, s.k));
}

#[test]
fn criterion_09_determinism_across_workers() {
    let sample = Scenario::Case1Continuous {
        incidence: Incidence::Logistic,
    }
    .generate(80, &mut rng::stream(SEED, 9));
    let d = Design::from_sample(&sample).unwrap();
    let tests: Vec<String> = [1, 4, 8]
        .iter()
        .map(|&k| {
            let mut cfg = TestConfig::new(Case::One, 200, 0.05, SEED);
            cfg.threads = Some(k);
            serde_json::to_string(&run_test(&d, &cfg).unwrap()).unwrap()
        })
        .collect();
    let tables: Vec<String> = [1, 4, 8]
        .iter()
        .map(|&k| {
            let mut cfg = MonteCarloConfig::new(preset("table1").unwrap(), vec![40], 4, 50, SEED);
            cfg.threads = Some(k);
            serde_json::to_string(&run_monte_carlo(&cfg).unwrap()).unwrap()
        })
        .collect();
    let pass = tests.windows(2).all(|w| w[0] == w[1]) && tables.windows(2).all(|w| w[0] == w[1]);
    report(9, pass, "run_test and run_monte_carlo JSON at 1, 4 and 8 workers");
}

#[test]
fn criterion_10_invariances() {
    let mut r = rng::stream(SEED, 10);
    let mut failures = Vec::new();
    for trial in 0..50 {
        let n = r.random_range(2..80);
        let eta: Vec<f64> = (0..n)
            .map(|_| {
                if r.random_bool(0.5) {
                    0.0
                } else {
                    r.random_range(1.0..3.0)
                }
            })
            .collect();
        let z: Vec<f64> = (0..n).map(|_| r.random_range(-20.0..20.0)).collect();
        let base = stat_pair(&u_case1(&eta, &z));

        let tz: Vec<f64> = z.iter().map(|v| (v / 5.0).exp() + v.powi(3)).collect();
        let moved = stat_pair(&u_case1(&eta, &tz));
        if (moved.cm - base.cm).abs() > 1e-12 || (moved.k - base.k).abs() > 1e-12 {
            failures.push(format!("trial {trial}: monotone transform"));
        }

        let c = r.random_range(0.1..10.0);
        let scaled: Vec<f64> = eta.iter().map(|e| c * e).collect();
        let s = stat_pair(&u_case1(&scaled, &z));
        if (s.cm - c * c * base.cm).abs() > 1e-9 * (1.0 + s.cm) || (s.k - c * base.k).abs() > 1e-9 * (1.0 + s.k) {
            failures.push(format!("trial {trial}: scaling"));
        }

        let levels: Vec<f64> = (0..n).map(|_| r.random_range(0..4) as f64).collect();
        let perm = [2.0, 0.0, 3.0, 1.0];
        let renamed: Vec<f64> = levels.iter().map(|&l| perm[l as usize]).collect();
        let a = nominal_stat(&eta, &levels).unwrap();
        let b = nominal_stat(&eta, &renamed).unwrap();
        if (a.cm - b.cm).abs() > 1e-12 || (a.k - b.k).abs() > 1e-12 {
            failures.push(format!("trial {trial}: label renaming"));
        }
    }
    let detail = if failures.is_empty() {
        "monotone transform, label renaming and scaling over 50 random instances".to_string()
    } else {
        failures.join(", ")
    };
    report(10, failures.is_empty(), &detail);
}
