//! Executable acceptance checks, one per criterion, shared by `selftest`
//! and the acceptance test target.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use bregmantron::baselines::glmtron_step;
use bregmantron::chain::{feasible_min_endpoint, oracle_solve, pava_isotonic, solve_chain};
use bregmantron::data::{prepare, synth_gaussian};
use bregmantron::loss::{sigmoid, ConvexGenerator, FnGenerator};
use bregmantron::train::{
    f_delta, gradient_step, train, weight_gradient, weight_objective, EtaMode, SlopeSchedule,
    Variant,
};
use bregmantron::{Boundary, ChainProblem, Dataset, PiecewiseAffineLink, ReferenceLoss, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::experiment::{run_experiment, ExperimentSpec, Method};
use crate::tasks::DatasetSpec;
use crate::transfer::{run_transfer, TransferSpec};

pub const IDS: [u8; 8] = [1, 2, 3, 4, 5, 6, 7, 8];

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    #[serde(with = "seconds")]
    pub elapsed: Duration,
    #[serde(with = "seconds")]
    pub budget: Duration,
}

mod seconds {
    use std::time::Duration;

    pub fn serialize<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }
}

impl CriterionResult {
    /// `PASS`/`FAIL` line with timing.
    pub fn line(&self) -> String {
        format!(
            "criterion {} [{}] {}: {} ({:.2}s of {}s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

/// Named checks with their outcome; the criterion passes when all do.
#[derive(Default)]
struct Checks(Vec<(String, bool)>);

impl Checks {
    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.0.push((label.into(), ok));
    }

    fn passed(&self) -> bool {
        self.0.iter().all(|(_, ok)| *ok)
    }

    fn summary(&self) -> String {
        self.0
            .iter()
            .map(|(label, ok)| format!("{}{label}", if *ok { "" } else { "✗ " }))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

fn meta(id: u8) -> (&'static str, Duration) {
    let secs = |s: u64| Duration::from_secs(s);
    match id {
        1 => ("proper loss equals its Bregman forms", secs(1)),
        2 => ("Bregman identities on random links", secs(5)),
        3 => ("chain solver against oracle and PAVA", secs(30)),
        4 => ("weight gradient against finite differences", secs(5)),
        5 => ("guaranteed decrease and L lower bound", secs(60)),
        6 => ("test AUC table", secs(600)),
        7 => ("loss transfer", secs(300)),
        8 => ("sigmoid-table step equals GLMTron update", secs(1)),
        _ => ("unknown", Duration::ZERO),
    }
}

/// Runs one criterion. Errors inside a check count as a failure.
pub fn run_criterion(id: u8, data_dir: &Path) -> CriterionResult {
    let (name, budget) = meta(id);
    let start = Instant::now();
    let outcome = match id {
        1 => loss_forms(),
        2 => link_identities(),
        3 => chain_oracle(),
        4 => gradient_check(),
        5 => decrease_guarantee(),
        6 => auc_table(data_dir),
        7 => transfer_study(data_dir),
        8 => glmtron_reduction(),
        _ => Err(crate::error::HarnessError::Spec(format!("no criterion {id}"))),
    };
    let elapsed = start.elapsed();
    let (passed, detail) = match outcome {
        Ok(checks) => (checks.passed(), checks.summary()),
        Err(e) => (false, format!("error: {e}")),
    };
    let over = elapsed > budget;
    CriterionResult {
        id,
        name,
        passed: passed && !over,
        detail: if over { format!("{detail}; ✗ over time budget") } else { detail },
        elapsed,
        budget,
    }
}

pub fn run_all(data_dir: &Path) -> Vec<CriterionResult> {
    IDS.iter().map(|&id| run_criterion(id, data_dir)).collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn loss_forms() -> Result<Checks> {
    let mut checks = Checks::default();
    for loss in [ReferenceLoss::Square, ReferenceLoss::Logistic] {
        let mut worst = 0.0f64;
        for k in 1..=99 {
            let c = k as f64 / 100.0;
            for y_star in [-1i8, 1] {
                let y = f64::from((y_star + 1) / 2);
                let partial = loss.partial_loss(y_star, c)?;
                worst = worst
                    .max((partial - loss.bregman_primal(y, c)?).abs())
                    .max((partial - loss.bregman_dual(y, c)?).abs());
            }
        }
        checks.check(format!("{} max gap {worst:.1e}", loss.name()), worst <= 1e-9);
    }
    Ok(checks)
}

/// Link from relative widths and slopes, rescaled to climb from 0 to 1.
fn link_from_parts(widths: &[f64], slopes: &[f64], z0: f64) -> Result<PiecewiseAffineLink> {
    let rise: f64 = widths.iter().zip(slopes).map(|(w, s)| w * s).sum();
    let mut points = vec![(z0, 0.0)];
    let (mut z, mut p) = (z0, 0.0);
    for (i, (w, s)) in widths.iter().zip(slopes).enumerate() {
        let dz = w / rise;
        z += dz;
        p += dz * s;
        points.push((z, if i + 1 == widths.len() { 1.0 } else { p }));
    }
    Ok(PiecewiseAffineLink::new(points)?)
}

fn random_link(rng: &mut impl Rng, segments: usize, lo: f64, hi: f64) -> Result<PiecewiseAffineLink> {
    let widths: Vec<f64> = (0..segments).map(|_| rng.gen_range(0.05..1.0)).collect();
    let slopes: Vec<f64> = (0..segments).map(|_| rng.gen_range(lo..=hi)).collect();
    link_from_parts(&widths, &slopes, rng.gen_range(-2.0..0.0))
}

/// Largest violation of each identity or bound over 200 random links.
fn link_identities() -> Result<Checks> {
    const TOL: f64 = 1e-8;
    let mut rng = rng(2);
    let names = [
        "non-negativity",
        "dual symmetry",
        "three points",
        "affine invariance",
        "sandwich",
        "Lipschitz",
        "local square",
    ];
    let mut worst = [0.0f64; 7];
    let mut bump = |k: usize, excess: f64| worst[k] = worst[k].max(excess);
    for _ in 0..200 {
        let segments = rng.gen_range(1..=8);
        let link = random_link(&mut rng, segments, 0.1, 10.0)?;
        let (zl, zh) = (link.z_min(), link.z_max());
        let (n, big_n) = (link.min_slope(), link.max_slope());
        for _ in 0..20 {
            let mut at = |lo: f64, hi: f64| zl + rng.gen_range(lo..=hi) * (zh - zl);
            let (z, z1, z2) = (at(-0.5, 1.5), at(-0.5, 1.5), at(-0.5, 1.5));
            let (a, b) = (at(0.0, 1.0), at(0.0, 1.0));
            let (p, q) = (rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0));

            bump(0, -link.bregman(z, z2));
            bump(0, -link.bregman_dual(p, q)?);

            let dual = link.bregman_dual(link.eval(b), link.eval(a))?;
            bump(1, (link.bregman(a, b) - dual).abs());

            let split = link.bregman(z, z1) + link.bregman(z1, z2) + (link.eval(z2) - link.eval(z1)) * (z1 - z);
            bump(2, (link.bregman(z, z2) - split).abs());

            let (slope, offset) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let shifted = FnGenerator {
                value: |x: f64| link.potential(x) + slope * x + offset,
                derivative: |x: f64| link.eval(x) + slope,
            };
            bump(3, (ConvexGenerator::bregman(&shifted, z, z2) - link.bregman(z, z2)).abs());

            let d = link.bregman_dual(p, q)?;
            let sq = (p - q) * (p - q);
            bump(4, sq / (2.0 * big_n) - d);
            bump(4, d - sq / (2.0 * n));

            let (hi_z, lo_z) = (a.max(b), a.min(b));
            let rise = link.eval(hi_z) - link.eval(lo_z);
            bump(5, n * (hi_z - lo_z) - rise);
            bump(5, rise - big_n * (hi_z - lo_z));
            let (hi_p, lo_p) = (p.max(q), p.min(q));
            let run = link.inverse(hi_p)? - link.inverse(lo_p)?;
            bump(5, (hi_p - lo_p) / big_n - run);
            bump(5, run - (hi_p - lo_p) / n);

            let k = rng.gen_range(0..link.slopes().len());
            let (s0, s1) = (link.scores()[k], link.scores()[k + 1]);
            let (x, x2) = (rng.gen_range(s0..=s1), rng.gen_range(s0..=s1));
            let expected = 0.5 * link.slopes()[k] * (x - x2) * (x - x2);
            bump(6, (link.bregman(x, x2) - expected).abs());
        }
    }
    let mut checks = Checks::default();
    for (name, w) in names.iter().zip(worst) {
        checks.check(format!("{name} {w:.1e}"), w <= TOL);
    }
    Ok(checks)
}

/// Random feasible-or-not chain instance with up to `max_len` scores.
fn chain_instance(rng: &mut impl Rng, max_len: usize) -> Result<(PiecewiseAffineLink, Vec<f64>, Vec<f64>, f64, f64, Boundary)> {
    let n = rng.gen_range(0.1..1.0);
    let big_n = n * rng.gen_range(1.0..8.0);
    let segments = rng.gen_range(1..6);
    let link = random_link(rng, segments, n, big_n)?;
    let m = rng.gen_range(1..=max_len);
    let (zl, zh) = (link.z_min(), link.z_max());
    let mut scores: Vec<f64> = (0..m).map(|_| rng.gen_range(zl..zh)).collect();
    scores.sort_by(f64::total_cmp);
    for i in 1..m {
        if rng.gen_bool(0.1) {
            scores[i] = scores[i - 1];
        }
    }
    let anchors = scores
        .iter()
        .map(|&z| (link.eval(z) + rng.gen_range(-0.3..0.3)).clamp(0.0, 1.0))
        .collect();
    let boundary = if rng.gen_bool(0.5) {
        Boundary::Open
    } else {
        Boundary::Stable {
            alpha: rng.gen_range(0.0..0.5),
            beta: rng.gen_range(0.0..0.5),
        }
    };
    Ok((link, scores, anchors, n, big_n, boundary))
}

fn exhaustive_isotonic(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let m = values.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (m - 1)) {
        let mut fit = Vec::with_capacity(m);
        let mut start = 0;
        for i in 0..m {
            if i + 1 == m || mask & (1 << i) != 0 {
                let w: f64 = weights[start..=i].iter().sum();
                let mean: f64 = values[start..=i].iter().zip(&weights[start..=i]).map(|(v, w)| v * w).sum::<f64>() / w;
                fit.extend(std::iter::repeat(mean).take(i + 1 - start));
                start = i + 1;
            }
        }
        if fit.windows(2).any(|p| p[1] < p[0]) {
            continue;
        }
        let sse: f64 = fit.iter().zip(values).zip(weights).map(|((f, v), w)| w * (f - v) * (f - v)).sum();
        if best.as_ref().map_or(true, |(b, _)| sse < *b) {
            best = Some((sse, fit));
        }
    }
    best.map(|(_, fit)| fit).unwrap_or_default()
}

fn chain_oracle() -> Result<Checks> {
    let mut rng = rng(3);
    let (mut solved, mut stable) = (0, 0);
    let (mut objective_gap, mut violation) = (0.0f64, 0.0f64);
    while solved < 100 {
        let (link, scores, anchors, n, big_n, boundary) = chain_instance(&mut rng, 50)?;
        let problem = ChainProblem::new(scores, anchors, &link, n, big_n).with_boundary(boundary);
        if feasible_min_endpoint(&problem).is_err() {
            continue;
        }
        let y = solve_chain(&problem)?;
        let oracle = oracle_solve(&problem, 1e-13)?;
        objective_gap = objective_gap.max((problem.objective(&y)? - problem.objective(&oracle)?).abs());
        violation = violation.max(problem.max_violation(&y));
        solved += 1;
        stable += usize::from(matches!(boundary, Boundary::Stable { .. }));
    }
    let mut pava_mismatch = 0.0f64;
    let mut configurations = 0;
    for m in 1..=8usize {
        // every value pattern over {0, 1, 2} for m ≤ 6, sampled above that
        let patterns: Vec<Vec<f64>> = if m <= 6 {
            (0..3usize.pow(m as u32))
                .map(|mut code| {
                    (0..m)
                        .map(|_| {
                            let v = (code % 3) as f64;
                            code /= 3;
                            v
                        })
                        .collect()
                })
                .collect()
        } else {
            (0..500).map(|_| (0..m).map(|_| rng.gen_range(0..5) as f64).collect()).collect()
        };
        for values in patterns {
            let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(1..4) as f64).collect();
            let fit = pava_isotonic(&values, &weights)?;
            let oracle = exhaustive_isotonic(&values, &weights);
            for (a, b) in fit.iter().zip(&oracle) {
                pava_mismatch = pava_mismatch.max((a - b).abs());
            }
            configurations += 1;
        }
    }
    let mut checks = Checks::default();
    checks.check(
        format!("{solved} instances ({stable} with first-target band), objective gap {objective_gap:.1e}"),
        objective_gap <= 1e-8,
    );
    checks.check(format!("max violation {violation:.1e}"), violation <= 1e-9);
    checks.check(
        format!("PAVA vs exhaustive on {configurations} inputs, max diff {pava_mismatch:.1e}"),
        pava_mismatch <= 1e-12,
    );
    Ok(checks)
}

fn random_dataset(rng: &mut impl Rng, m: usize, dim: usize) -> Result<Dataset> {
    let features: Vec<f64> = (0..m * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let labels: Vec<f64> = (0..m)
        .map(|i| match i {
            0 => 1.0,
            1 => 0.0,
            _ => f64::from(rng.gen_bool(0.5)),
        })
        .collect();
    Ok(Dataset::new(features, labels, dim)?)
}

fn gradient_check() -> Result<Checks> {
    let mut rng = rng(4);
    let mut worst = 0.0f64;
    let h = 1e-7;
    for _ in 0..20 {
        let segments = rng.gen_range(1..6);
        let link = random_link(&mut rng, segments, 0.2, 5.0)?;
        let dim = rng.gen_range(1..5);
        let data = random_dataset(&mut rng, 40, dim)?;
        let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let analytic = weight_gradient(&link, &w, &data)?;
        for k in 0..dim {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[k] += h;
            down[k] -= h;
            let numeric = (weight_objective(&link, &up, &data)? - weight_objective(&link, &down, &data)?) / (2.0 * h);
            worst = worst.max((numeric - analytic[k]).abs() / analytic[k].abs().max(1e-3));
        }
    }
    let mut checks = Checks::default();
    checks.check(format!("20 instances, max relative error {worst:.1e}"), worst <= 1e-5);
    Ok(checks)
}

fn decrease_guarantee() -> Result<Checks> {
    let (mut runs, mut iterations, mut in_regime, mut checked, mut violations) = (0, 0, 0, 0, 0);
    let mut min_l = f64::INFINITY;
    for seed in 0..3u64 {
        let all = synth_gaussian(crate::tasks::SYNTH_SIZE, seed)?;
        let data = prepare(all.slice(0, crate::tasks::SYNTH_SIZE / 2)?, true)?;
        for delta in [1e-4, 1e-3] {
            let fd = f_delta(delta);
            let n = 1e-2;
            // compliant iterations come early, before n_t starts to shrink
            let config = TrainConfig {
                iterations: 25,
                slopes: SlopeSchedule::Constant {
                    n,
                    big_n: n * (1.0 + fd),
                    fill: 0.5,
                },
                eta: EtaMode::Theorem2 {
                    delta,
                    gamma: 0.0,
                    fallback: 1.0,
                },
                variant: Variant::Stability { alpha: fd, beta: fd },
                seed,
                ..TrainConfig::default()
            };
            let (_, report) = train(&data, &config)?;
            runs += 1;
            for record in &report.records {
                iterations += 1;
                in_regime += usize::from(record.regime == Some(true));
                if record.decrease_bound.is_some() {
                    checked += 1;
                    violations += usize::from(!record.decrease_holds());
                }
                if let Some(l) = record.l {
                    min_l = min_l.min(l);
                }
            }
        }
    }
    let mut checks = Checks::default();
    checks.check(
        format!(
            "{runs} runs, {iterations} iterations, {in_regime} in regime, {checked} compliant and checked, {violations} violations"
        ),
        violations == 0,
    );
    checks.check(format!("min L {min_l:.2e}"), min_l >= -1e-9);
    Ok(checks)
}

fn within(value: f64, target: f64, tolerance: f64) -> bool {
    (value - target).abs() <= tolerance
}

fn table_config() -> TrainConfig {
    TrainConfig {
        iterations: 50,
        slopes: SlopeSchedule::Constant {
            n: 1e-2,
            big_n: 1.0,
            fill: 0.5,
        },
        eta: EtaMode::Fixed { eta: 1.0 },
        ..TrainConfig::default()
    }
}

fn test_auc(data_dir: &Path, dataset: &DatasetSpec, method: Method, variant: Variant) -> Result<f64> {
    let mut spec = ExperimentSpec::new(dataset.clone(), method, TrainConfig { variant, ..table_config() });
    spec.data_dir = data_dir.to_path_buf();
    Ok(run_experiment(&spec)?.summary.auc_test)
}

fn auc_table(data_dir: &Path) -> Result<Checks> {
    let synth = DatasetSpec::Synth;
    let mnist: DatasetSpec = "mnist:0/8".parse()?;
    let fmnist: DatasetSpec = "fmnist:odd/even".parse()?;
    let standard = Variant::Standard;
    let auc = |dataset: &DatasetSpec, method: Method, variant: Variant| test_auc(data_dir, dataset, method, variant);
    let mut checks = Checks::default();

    let logistic = auc(&synth, Method::logistic(), standard)?;
    let bt = auc(&synth, Method::Bregmantron, standard)?;
    checks.check(format!("synth logistic {logistic:.4} vs 0.922±0.015"), within(logistic, 0.922, 0.015));
    checks.check(format!("synth BregmanTron {bt:.4} vs 0.923±0.02"), within(bt, 0.923, 0.02));

    let logistic = auc(&mnist, Method::logistic(), standard)?;
    let glmtron = auc(&mnist, Method::Glmtron, standard)?;
    let slisotron = auc(&mnist, Method::Slisotron, standard)?;
    let bt = auc(&mnist, Method::Bregmantron, standard)?;
    checks.check(format!("mnist logistic {logistic:.4} vs 0.999±0.005"), within(logistic, 0.999, 0.005));
    checks.check(format!("mnist GLMTron {glmtron:.4} vs 0.996±0.005"), within(glmtron, 0.996, 0.005));
    checks.check(format!("mnist BregmanTron {bt:.4} vs 0.997±0.01"), within(bt, 0.997, 0.01));
    checks.check(format!("mnist SLIsotron {slisotron:.4} vs 0.946±0.04"), within(slisotron, 0.946, 0.04));
    checks.check(
        format!("mnist SLIsotron at least 0.03 below BregmanTron (gap {:.4})", bt - slisotron),
        bt - slisotron >= 0.03,
    );

    let bt = auc(&fmnist, Method::Bregmantron, standard)?;
    let approx = auc(&fmnist, Method::Bregmantron, Variant::Approx)?;
    let slisotron_f = auc(&fmnist, Method::Slisotron, standard)?;
    checks.check(format!("fmnist BregmanTron {bt:.4} vs 0.979±0.02"), within(bt, 0.979, 0.02));
    checks.check(format!("fmnist approx {approx:.4} below standard"), approx < bt);
    checks.check(format!("fmnist BregmanTron above SLIsotron {slisotron_f:.4}"), bt > slisotron_f);
    Ok(checks)
}

fn transfer_study(data_dir: &Path) -> Result<Checks> {
    let spec = TransferSpec {
        source: "fmnist:0/6".parse()?,
        target: "fmnist:2/4".parse()?,
        config: table_config(),
        data_dir: PathBuf::from(data_dir),
        output: None,
    };
    let s = run_transfer(&spec)?;
    let mut checks = Checks::default();
    checks.check(format!("source 0v6 BregmanTron {:.4} ≥ 0.84", s.source_auc), s.source_auc >= 0.84);
    checks.check(format!("transfer 2v4 {:.4} ≥ 0.87", s.transfer_auc), s.transfer_auc >= 0.87);
    checks.check(
        format!("transfer within 0.01 of logistic {:.4}", s.target_logistic_auc),
        within(s.transfer_auc, s.target_logistic_auc, 0.01),
    );
    checks.check(
        format!("direct BregmanTron {:.4} within 0.005 of transfer", s.target_direct_auc),
        within(s.target_direct_auc, s.transfer_auc, 0.005),
    );
    Ok(checks)
}

fn glmtron_reduction() -> Result<Checks> {
    let mut rng = rng(8);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let dim = rng.gen_range(1..6);
        let data = random_dataset(&mut rng, 30, dim)?;
        let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let scores = data.scores(&w);
        let mut points: Vec<(f64, f64)> = scores.iter().map(|&z| (z, sigmoid(z))).collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        points.dedup_by(|a, b| a.0 == b.0);
        let (first, last) = (points[0].0, points[points.len() - 1].0);
        let table = PiecewiseAffineLink::from_points(&points, first - 10.0, last + 10.0)?;
        let targets: Vec<f64> = scores.iter().map(|&z| table.eval(z)).collect();
        let ours = gradient_step(&w, &data, &targets, 1.0)?;
        let theirs = glmtron_step(&data, &w)?;
        for (a, b) in ours.iter().zip(&theirs) {
            worst = worst.max((a - b).abs());
        }
    }
    let mut checks = Checks::default();
    checks.check(format!("10 instances, max weight difference {worst:.1e}"), worst <= 1e-12);
    Ok(checks)
}
