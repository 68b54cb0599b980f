mod common;

use bregmantron::chain::{
    feasible_min_endpoint, oracle_solve, pava_isotonic, solve_chain, solve_chain_dp,
    solve_chain_report, Boundary, ChainProblem, SolveMethod,
};
use bregmantron::PiecewiseAffineLink;
use proptest::prelude::*;
use rand::Rng;

struct Instance {
    link: PiecewiseAffineLink,
    scores: Vec<f64>,
    anchors: Vec<f64>,
    n: f64,
    big_n: f64,
    boundary: Boundary,
}

impl Instance {
    fn problem(&self) -> ChainProblem<'_> {
        ChainProblem::new(
            self.scores.clone(),
            self.anchors.clone(),
            &self.link,
            self.n,
            self.big_n,
        )
        .with_boundary(self.boundary)
    }
}

/// Random feasible instance. Scores stay inside the link's support and the
/// link's slopes inside `[n, N]`, which is what the ratio bounds assume.
fn random_instance(rng: &mut impl Rng, max_len: usize) -> Instance {
    let n = rng.gen_range(0.1..1.0);
    let big_n = n * rng.gen_range(1.0..8.0);
    let segments = rng.gen_range(1..6);
    let link = common::random_link(rng, segments, n, big_n);
    let m = rng.gen_range(1..=max_len);
    let (zl, zh) = (link.z_min(), link.z_max());
    let mut scores: Vec<f64> = (0..m).map(|_| rng.gen_range(zl..zh)).collect();
    scores.sort_by(f64::total_cmp);
    for i in 1..m {
        if rng.gen_bool(0.1) {
            scores[i] = scores[i - 1];
        }
    }
    let noisy = rng.gen_bool(0.5);
    let anchors = scores
        .iter()
        .map(|&z| {
            if noisy {
                (link.eval(z) + rng.gen_range(-0.3..0.3)).clamp(0.0, 1.0)
            } else {
                rng.gen_range(0.0..=1.0)
            }
        })
        .collect();
    let boundary = if rng.gen_bool(0.5) {
        Boundary::Open
    } else {
        Boundary::Stable {
            alpha: rng.gen_range(0.0..0.5),
            beta: rng.gen_range(0.0..0.5),
        }
    };
    Instance {
        link,
        scores,
        anchors,
        n,
        big_n,
        boundary,
    }
}

fn feasible(inst: &Instance) -> bool {
    feasible_min_endpoint(&inst.problem()).is_ok()
}

#[test]
fn active_set_matches_oracle_and_dynamic_program() {
    let mut rng = common::rng(7);
    let mut checked = 0;
    let mut fallbacks = 0;
    while checked < 100 {
        let inst = random_instance(&mut rng, 50);
        if !feasible(&inst) {
            continue;
        }
        let problem = inst.problem();
        let report = solve_chain_report(&problem).unwrap();
        if report.method != SolveMethod::ActiveSet {
            fallbacks += 1;
        }
        let y = report.targets;
        let dp = solve_chain_dp(&problem).unwrap();
        let oracle = oracle_solve(&problem, 1e-13).unwrap();
        assert!(problem.max_violation(&y) <= 1e-9, "instance {checked}");
        assert!(problem.max_violation(&dp) <= 1e-9, "instance {checked}");
        let (fy, fdp, fo) = (
            problem.objective(&y).unwrap(),
            problem.objective(&dp).unwrap(),
            problem.objective(&oracle).unwrap(),
        );
        assert!(fy <= fo + 1e-8, "instance {checked}: {fy} vs oracle {fo}");
        assert!((fy - fdp).abs() <= 1e-10, "instance {checked}: {fy} vs dp {fdp}");
        for (a, b) in y.iter().zip(&dp) {
            assert!((a - b).abs() <= 1e-7, "instance {checked}: {a} vs {b}");
        }
        checked += 1;
    }
    assert!(fallbacks <= 5, "{fallbacks} solves left the active-set path");
}

#[test]
fn outputs_respect_ratio_bounds_around_previous_link() {
    let mut rng = common::rng(11);
    let mut checked = 0;
    while checked < 200 {
        let inst = random_instance(&mut rng, 40);
        if !feasible(&inst) {
            continue;
        }
        let problem = inst.problem();
        let (alpha, beta) = match inst.boundary {
            Boundary::Stable { alpha, beta } => (alpha, beta),
            Boundary::Open => continue,
        };
        let y = solve_chain(&problem).unwrap();
        let lo = (1.0 - beta).min(inst.n / inst.big_n);
        let hi = (1.0 + alpha).max(inst.big_n / inst.n);
        for (&yi, &z) in y.iter().zip(&inst.scores) {
            let u = inst.link.eval(z);
            assert!(yi >= u * lo - 1e-9 && yi <= u * hi + 1e-9, "{yi} vs {u}");
        }
        checked += 1;
    }
}

#[test]
fn large_chain_stays_on_the_active_set_path() {
    let mut rng = common::rng(3);
    let link = common::random_link(&mut rng, 200, 0.01, 1.0);
    let m = 20_000;
    let mut scores: Vec<f64> = (0..m).map(|_| rng.gen_range(-30.0..60.0)).collect();
    scores.sort_by(f64::total_cmp);
    let anchors: Vec<f64> = scores
        .iter()
        .map(|&z| (link.eval(z * 0.01) + rng.gen_range(-0.2..0.2)).clamp(0.0, 1.0))
        .collect();
    let problem = ChainProblem::new(scores, anchors, &link, 0.01, 1.0);
    let report = solve_chain_report(&problem).unwrap();
    assert_eq!(report.method, SolveMethod::ActiveSet);
    assert!(problem.max_violation(&report.targets) <= 1e-9);
}

fn exhaustive_isotonic(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let m = values.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    // every split of 0..m into consecutive pooled blocks
    for mask in 0u32..(1 << (m - 1)) {
        let mut fit = Vec::with_capacity(m);
        let mut start = 0;
        for i in 0..m {
            if i + 1 == m || mask & (1 << i) != 0 {
                let w: f64 = weights[start..=i].iter().sum();
                let mean = values[start..=i]
                    .iter()
                    .zip(&weights[start..=i])
                    .map(|(v, w)| v * w)
                    .sum::<f64>()
                    / w;
                fit.extend(std::iter::repeat(mean).take(i + 1 - start));
                start = i + 1;
            }
        }
        if fit.windows(2).any(|p| p[1] < p[0]) {
            continue;
        }
        let sse: f64 = fit
            .iter()
            .zip(values)
            .zip(weights)
            .map(|((f, v), w)| w * (f - v) * (f - v))
            .sum();
        if best.as_ref().map_or(true, |(b, _)| sse < *b) {
            best = Some((sse, fit));
        }
    }
    best.expect("the fully pooled fit is monotone").1
}

#[test]
fn pava_matches_exhaustive_search() {
    let mut rng = common::rng(5);
    for _ in 0..500 {
        let m = rng.gen_range(1..=8);
        let values: Vec<f64> = (0..m).map(|_| rng.gen_range(0..5) as f64).collect();
        let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(1..4) as f64).collect();
        let fit = pava_isotonic(&values, &weights).unwrap();
        let oracle = exhaustive_isotonic(&values, &weights);
        for (a, b) in fit.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12, "{values:?}: {fit:?} vs {oracle:?}");
        }
    }
}

proptest! {
    #[test]
    fn pava_output_is_monotone_and_preserves_block_means(
        values in proptest::collection::vec(-5.0f64..5.0, 1..40),
    ) {
        let weights = vec![1.0; values.len()];
        let fit = pava_isotonic(&values, &weights).unwrap();
        prop_assert!(fit.windows(2).all(|p| p[0] <= p[1]));
        let mut start = 0;
        for i in 0..fit.len() {
            if i + 1 == fit.len() || fit[i + 1] != fit[i] {
                let mean = values[start..=i].iter().sum::<f64>() / (i + 1 - start) as f64;
                prop_assert!((mean - fit[i]).abs() <= 1e-9);
                start = i + 1;
            }
        }
    }

    #[test]
    fn solutions_are_feasible_and_monotone(seed in 0u64..10_000) {
        let mut rng = common::rng(seed);
        let inst = random_instance(&mut rng, 60);
        prop_assume!(feasible(&inst));
        let problem = inst.problem();
        let y = solve_chain(&problem).unwrap();
        prop_assert!(problem.max_violation(&y) <= 1e-9);
        prop_assert!(y.windows(2).all(|p| p[0] <= p[1]));
        prop_assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
