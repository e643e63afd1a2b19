mod common;

use common::*;
use curetest::bootstrap::{critical_value, draw_from_curve, p_value, Draw};
use curetest::estimators::{beran_survival, km_censoring, km_survival, KernelConfig, StepCurve};
use curetest::sample::canonical_order;
use curetest::stats::{marked_process, nominal_stat, stat_pair, u_case1};
use curetest::Design;
use proptest::prelude::*;

fn at_times(curve: &StepCurve, d: &Design) -> Vec<f64> {
    d.times().iter().map(|&t| curve.eval(t)).collect()
}

fn brute_process(r: &[f64], coords: &[&[f64]]) -> Vec<f64> {
    let n = r.len();
    (0..n)
        .map(|k| {
            (0..n)
                .filter(|&i| coords.iter().all(|c| c[i] <= c[k]))
                .map(|i| r[i])
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn km_matches_oracle(rows in rows_strategy(1, 40)) {
        let d = design_z(&rows);
        let km = km_survival(&d);
        let w = vec![1.0; d.len()];
        for &t in d.times() {
            prop_assert!((km.eval(t) - pl_oracle(d.times(), d.events(), &w, t)).abs() < 1e-12);
        }
        let flipped: Vec<bool> = d.events().iter().map(|e| !e).collect();
        let cens = km_censoring(&d);
        for &t in d.times() {
            prop_assert!((cens.eval(t) - pl_oracle(d.times(), &flipped, &w, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_beran_equals_km(rows in rows_strategy(1, 60), x0 in -10.0..10.0f64) {
        let d = design_z(&rows);
        let beran = beran_survival(&d, 0, x0, KernelConfig::flat()).unwrap();
        for (a, b) in at_times(&beran, &d).iter().zip(at_times(&km_survival(&d), &d)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn beran_matches_oracle(rows in rows_strategy(2, 40), x0 in -10.0..10.0f64, h in 0.5..15.0f64) {
        let d = design_z(&rows);
        let w: Vec<f64> = d.column(0).iter().map(|&z| epanechnikov((x0 - z) / h)).collect();
        match beran_survival(&d, 0, x0, KernelConfig::new(h).unwrap()) {
            Ok(curve) => {
                for &t in d.times() {
                    prop_assert!((curve.eval(t) - pl_oracle(d.times(), d.events(), &w, t)).abs() < 1e-12);
                }
            }
            Err(_) => prop_assert!(w.iter().all(|&v| v == 0.0)),
        }
    }

    #[test]
    fn survival_curves_are_monotone(rows in rows_strategy(1, 40)) {
        let d = design_z(&rows);
        for c in [km_survival(&d), km_censoring(&d)] {
            prop_assert!(c.values().windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(c.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn canonical_order_is_idempotent_and_order_free(rows in rows_strategy(1, 30), seed in any::<u64>()) {
        let s = sample_z(&rows);
        let once = canonical_order(&s);
        prop_assert_eq!(&canonical_order(&once), &once);
        let mut shuffled = rows.clone();
        let k = (seed as usize) % shuffled.len().max(1);
        shuffled.rotate_left(k);
        shuffled.reverse();
        let a = design_z(&rows);
        let b = design_z(&shuffled);
        prop_assert_eq!(a.times(), b.times());
        prop_assert_eq!(a.events(), b.events());
    }

    #[test]
    fn process_matches_brute_force(
        rows in prop::collection::vec((-5.0..5.0f64, 0i32..4, 0i32..4), 1..30)
    ) {
        let r: Vec<f64> = rows.iter().map(|x| x.0).collect();
        let a: Vec<f64> = rows.iter().map(|x| x.1 as f64).collect();
        let b: Vec<f64> = rows.iter().map(|x| x.2 as f64).collect();
        for coords in [vec![&a[..]], vec![&a[..], &b[..]]] {
            let fast = marked_process(&r, &coords);
            for (x, y) in fast.u.iter().zip(brute_process(&r, &coords)) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn critical_value_matches_direct_sort(
        stats in prop::collection::vec(0.0..100.0f64, 1..400),
        alpha_milli in 1u32..999,
    ) {
        let alpha = alpha_milli as f64 / 1000.0;
        let mut sorted = stats.clone();
        sorted.sort_by(f64::total_cmp);
        let b = sorted.len() as u64;
        let num = (1000 - alpha_milli as u64) * b;
        let pos = num.div_ceil(1000).max(1) as usize;
        prop_assert_eq!(critical_value(&sorted, alpha), sorted[pos - 1]);
        let p = p_value(&stats, stats[0]);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn draws_are_generalised_inverses(rows in rows_strategy(1, 30), u in 0.0..1.0f64) {
        let d = design_z(&rows);
        let c = km_survival(&d);
        match draw_from_curve(&c, u) {
            Draw::Time(t) => {
                prop_assert!(1.0 - c.eval(t) >= u);
                let k = c.jump_times().iter().position(|&x| x == t).unwrap();
                if k > 0 {
                    prop_assert!(1.0 - c.values()[k - 1] < u);
                }
            }
            Draw::BeyondSupport => prop_assert!(1.0 - c.final_value() < u),
        }
    }

    #[test]
    fn case1_statistics_are_rank_based(
        rows in prop::collection::vec((0.0..3.0f64, -10.0..10.0f64), 1..40)
    ) {
        let eta: Vec<f64> = rows.iter().map(|x| x.0).collect();
        let z: Vec<f64> = rows.iter().map(|x| x.1).collect();
        let tz: Vec<f64> = z.iter().map(|v| v.powi(3) + (v / 4.0).exp()).collect();
        let a = stat_pair(&u_case1(&eta, &z));
        let b = stat_pair(&u_case1(&eta, &tz));
        prop_assert!((a.cm - b.cm).abs() < 1e-12 && (a.k - b.k).abs() < 1e-12);
    }

    #[test]
    fn statistics_scale_with_eta(
        rows in prop::collection::vec((0.0..3.0f64, -10.0..10.0f64), 1..40),
        c in 0.1..10.0f64,
    ) {
        let eta: Vec<f64> = rows.iter().map(|x| x.0).collect();
        let z: Vec<f64> = rows.iter().map(|x| x.1).collect();
        let scaled: Vec<f64> = eta.iter().map(|e| c * e).collect();
        let a = stat_pair(&u_case1(&eta, &z));
        let b = stat_pair(&u_case1(&scaled, &z));
        prop_assert!((b.cm - c * c * a.cm).abs() <= 1e-9 * (1.0 + b.cm));
        prop_assert!((b.k - c * a.k).abs() <= 1e-9 * (1.0 + b.k));
    }

    #[test]
    fn nominal_statistic_ignores_labels(
        rows in prop::collection::vec((0.0..3.0f64, 0usize..4), 1..30),
        perm in Just([0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let eta: Vec<f64> = rows.iter().map(|x| x.0).collect();
        let z: Vec<f64> = rows.iter().map(|x| x.1 as f64).collect();
        let relabelled: Vec<f64> = rows.iter().map(|x| perm[x.1] as f64).collect();
        let a = nominal_stat(&eta, &z).unwrap();
        let b = nominal_stat(&eta, &relabelled).unwrap();
        prop_assert!((a.cm - b.cm).abs() < 1e-12 && (a.k - b.k).abs() < 1e-12);
    }
}
