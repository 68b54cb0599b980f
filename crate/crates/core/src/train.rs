//! The alternating loop: a gradient step on the weights, a sort by score, a
//! chain projection of the targets, and a refit of the link through them.

use serde::{Deserialize, Serialize};

use crate::chain::{
    feasible_min_endpoint, solve_chain_report, Boundary, ChainProblem, SolveMethod,
};
use crate::data::{dot, Dataset};
use crate::error::{Error, Result};
use crate::link::{PiecewiseAffineLink, MERGE_TOL};
use crate::metrics::auc;

/// Slack allowed when checking the guaranteed decrease.
pub const DECREASE_SLACK: f64 = 1e-8;

/// `f(z) = z / (1 + z)`.
pub fn f_delta(z: f64) -> f64 {
    z / (1.0 + z)
}

/// How the fitting step is solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Variant {
    /// Global optimum anchored at the previous targets.
    Standard,
    /// The feasible point with the smallest last target.
    Approx,
    /// Global optimum anchored at the labels.
    Label,
    /// Global optimum with the first target held near the previous link.
    Stability { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EtaMode {
    Fixed { eta: f64 },
    /// Learning rate from the decrease guarantee; `fallback` is used on
    /// iterations outside the δ-regime.
    Theorem2 { delta: f64, gamma: f64, fallback: f64 },
}

/// Slope bounds `[n_t, N_t]` for each fitting step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SlopeSchedule {
    /// Fixed bounds, except that `n_t` drops below `n` when the scores
    /// spread so far that `n (z_m − z_1)` would exceed `fill` of the
    /// probability left above the first target, and never rises again. At
    /// `fill = 1` the chain is then pinned to a single ramp.
    Constant {
        n: f64,
        big_n: f64,
        #[serde(default = "default_fill")]
        fill: f64,
    },
    /// `n_t` starts at `initial` and only shrinks, just enough that the
    /// chain spans at most `fill` of the probability left above the first
    /// target; `N_t = ratio · n_t`.
    Adaptive { initial: f64, ratio: f64, fill: f64 },
}

fn default_fill() -> f64 {
    0.5
}

/// Where the link's end segments meet 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointRule {
    Midpoint,
    /// End segments with slope `n_t`.
    TightLower,
    /// End segments with slope `N_t`.
    TightUpper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub slopes: SlopeSchedule,
    pub eta: EtaMode,
    pub variant: Variant,
    /// Support `[z_min, z_max]` of the initial affine link.
    pub initial_support: (f64, f64),
    pub endpoint_rule: EndpointRule,
    /// Read by callers that prepare the data; training itself uses the
    /// features as given.
    pub add_bias: bool,
    pub seed: u64,
    /// `(α, β)` for the stability flag. Defaults to the variant's band, or
    /// `(f(δ), f(δ))` under [`EtaMode::Theorem2`].
    pub stability_band: Option<(f64, f64)>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            slopes: SlopeSchedule::Constant {
                n: 1e-2,
                big_n: 1.0,
                fill: default_fill(),
            },
            eta: EtaMode::Fixed { eta: 1.0 },
            variant: Variant::Standard,
            initial_support: (-1.0, 1.0),
            endpoint_rule: EndpointRule::Midpoint,
            add_bias: true,
            seed: 0,
            stability_band: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        match self.slopes {
            SlopeSchedule::Constant { n, big_n, fill } => {
                if !(n > 0.0 && n <= big_n && big_n.is_finite()) {
                    return Err(Error::domain(format!("need 0 < n ≤ N, got n = {n}, N = {big_n}")));
                }
                if !(fill > 0.0 && fill <= 1.0) {
                    return Err(Error::domain(format!("fill must lie in (0, 1], got {fill}")));
                }
            }
            SlopeSchedule::Adaptive { initial, ratio, fill } => {
                if !(initial > 0.0 && initial.is_finite() && ratio >= 1.0 && fill > 0.0 && fill <= 1.0) {
                    return Err(Error::domain(format!(
                        "adaptive slopes need initial > 0, ratio ≥ 1, fill ∈ (0, 1]; got {initial}, {ratio}, {fill}"
                    )));
                }
            }
        }
        match self.eta {
            EtaMode::Fixed { eta } => {
                if !(eta > 0.0 && eta.is_finite()) {
                    return Err(Error::domain(format!("learning rate must be positive, got {eta}")));
                }
            }
            EtaMode::Theorem2 { delta, gamma, fallback } => {
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(Error::domain(format!("δ must be positive, got {delta}")));
                }
                let cap = (f_delta(f_delta(delta)) / 2.0).sqrt();
                if !(0.0..=cap).contains(&gamma) {
                    return Err(Error::domain(format!("γ = {gamma} outside [0, {cap}]")));
                }
                if !(fallback > 0.0 && fallback.is_finite()) {
                    return Err(Error::domain(format!("fallback rate must be positive, got {fallback}")));
                }
            }
        }
        if let Variant::Stability { alpha, beta } = self.variant {
            if !(alpha >= 0.0 && (0.0..=1.0).contains(&beta)) {
                return Err(Error::domain(format!("stability band needs α ≥ 0, β ∈ [0, 1]; got {alpha}, {beta}")));
            }
        }
        let (lo, hi) = self.initial_support;
        if !(hi > lo && lo.is_finite() && hi.is_finite()) {
            return Err(Error::domain(format!("initial support [{lo}, {hi}] is empty")));
        }
        Ok(())
    }

    fn band(&self) -> Option<(f64, f64)> {
        self.stability_band.or(match (self.variant, self.eta) {
            (Variant::Stability { alpha, beta }, _) => Some((alpha, beta)),
            (_, EtaMode::Theorem2 { delta, .. }) => Some((f_delta(delta), f_delta(delta))),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub w: Vec<f64>,
    pub link: PiecewiseAffineLink,
    /// Fitted targets in the dataset's original order.
    pub targets: Vec<f64>,
    pub t: usize,
}

/// One completed iteration `t → t + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// `E[D_{U*_{t+1}}(y ‖ u_{t+1}(w_{t+1}ᵀx))]`.
    pub loss: f64,
    /// The same loss one iteration earlier.
    pub previous_loss: Option<f64>,
    /// `‖μ̂_y − μ̂_t‖₂`.
    pub gap_norm: f64,
    pub eta: f64,
    /// `max(E[y], E[u_t(w_{t+1}ᵀx)])`.
    pub p_star: f64,
    pub regime: Option<bool>,
    pub stable: Option<bool>,
    /// Slope ratios and the learning rate meet the decrease guarantee's
    /// preconditions.
    pub compliant: bool,
    /// Right-hand side of the guaranteed decrease, when every precondition
    /// holds.
    pub decrease_bound: Option<f64>,
    pub l: Option<f64>,
    pub q: Option<f64>,
    pub f: Option<f64>,
    pub n: f64,
    pub big_n: f64,
    pub solver: Option<SolveMethod>,
    pub auc_train: f64,
    pub auc_test: Option<f64>,
}

impl IterationRecord {
    /// Whether the guaranteed decrease held (vacuously true when it did not
    /// apply).
    pub fn decrease_holds(&self) -> bool {
        self.decrease_bound
            .map_or(true, |bound| self.loss <= bound + DECREASE_SLACK)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub records: Vec<IterationRecord>,
    pub link: PiecewiseAffineLink,
    pub w: Vec<f64>,
    pub auc_train: Option<f64>,
    pub auc_test: Option<f64>,
}

/// `E_S[vᵢ xᵢ]`.
pub fn mean_operator(dataset: &Dataset, values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != dataset.len() {
        return Err(Error::domain(format!(
            "{} values for {} examples",
            values.len(),
            dataset.len()
        )));
    }
    let mut mu = vec![0.0; dataset.dim()];
    for (x, &v) in dataset.rows().zip(values) {
        if v != 0.0 {
            for (acc, xi) in mu.iter_mut().zip(x) {
                *acc += v * xi;
            }
        }
    }
    let m = dataset.len() as f64;
    mu.iter_mut().for_each(|v| *v /= m);
    Ok(mu)
}

/// `μ̂_y − μ̂_t = E_S[(y − ŷ) x]`.
pub fn mean_operator_gap(dataset: &Dataset, targets: &[f64]) -> Result<Vec<f64>> {
    let residual: Vec<f64> = dataset
        .labels()
        .iter()
        .zip(targets)
        .map(|(y, t)| y - t)
        .collect();
    mean_operator(dataset, &residual)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `w + η (μ̂_y − μ̂_t)`.
pub fn gradient_step(w: &[f64], dataset: &Dataset, targets: &[f64], eta: f64) -> Result<Vec<f64>> {
    let gap = mean_operator_gap(dataset, targets)?;
    Ok(w.iter().zip(&gap).map(|(wi, g)| wi + eta * g).collect())
}

/// `E_S[D_U(wᵀx ‖ u⁻¹(y))]`, the weight objective for a fixed link.
pub fn weight_objective(link: &PiecewiseAffineLink, w: &[f64], dataset: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for (x, &y) in dataset.rows().zip(dataset.labels()) {
        total += link.bregman(dot(x, w), link.inverse(y)?);
    }
    Ok(total / dataset.len() as f64)
}

/// Gradient of [`weight_objective`]: `E_S[u(wᵀx) x] − μ̂_y`.
pub fn weight_gradient(link: &PiecewiseAffineLink, w: &[f64], dataset: &Dataset) -> Result<Vec<f64>> {
    let predictions: Vec<f64> = dataset.rows().map(|x| link.eval(dot(x, w))).collect();
    let gap = mean_operator_gap(dataset, &predictions)?;
    Ok(gap.into_iter().map(|g| -g).collect())
}

/// The learning rate that guarantees a decrease, or `None` outside the
/// δ-regime.
pub fn theorem2_learning_rate(
    gap_norm: f64,
    p_star: f64,
    max_norm: f64,
    delta: f64,
    gamma: f64,
    big_n: f64,
) -> Option<f64> {
    if !delta_regime(gap_norm, p_star, max_norm, delta) {
        return None;
    }
    let fd = f_delta(delta);
    let eta = (1.0 - gamma) / (2.0 * big_n * max_norm * max_norm)
        * (1.0 - fd * (1.0 + fd) * p_star * max_norm / gap_norm);
    (eta > 0.0).then_some(eta)
}

/// `‖μ̂_y − μ̂_t‖₂ ≥ 2 √(p* δ) X`, with a zero gap never in the regime.
pub fn delta_regime(gap_norm: f64, p_star: f64, max_norm: f64, delta: f64) -> bool {
    gap_norm > 0.0 && gap_norm >= 2.0 * (p_star * delta).sqrt() * max_norm
}

/// Interpolates sorted `(z, ŷ)` pairs and closes the link with end segments
/// whose slopes lie in `[n, N]`.
pub fn link_fit(
    points: &[(f64, f64)],
    n: f64,
    big_n: f64,
    rule: EndpointRule,
) -> Result<PiecewiseAffineLink> {
    let (first, last) = match (points.first(), points.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(Error::domain("link fit needs at least one point")),
    };
    if !(n > 0.0 && n <= big_n) {
        return Err(Error::domain(format!("need 0 < n ≤ N, got n = {n}, N = {big_n}")));
    }
    let pick = |near: f64, far: f64| match rule {
        EndpointRule::Midpoint => 0.5 * (near + far),
        EndpointRule::TightLower => far,
        EndpointRule::TightUpper => near,
    };
    let merged = |a: f64, b: f64| (a - b).abs() <= MERGE_TOL * a.abs().max(1.0);

    let (z1, y1) = first;
    let mut z_min = pick(z1 - y1 / big_n, z1 - y1 / n);
    let (zm, ym) = last;
    let mut z_max = pick(zm + (1.0 - ym) / big_n, zm + (1.0 - ym) / n);
    if y1 <= 0.0 || merged(z_min, z1) {
        z_min = z1;
    }
    if ym >= 1.0 || merged(z_max, zm) {
        z_max = zm;
    }

    let mut interior: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    let (mut last_z, mut last_p) = (z_min, 0.0);
    for &(z, p) in points {
        if p <= last_p || p >= 1.0 || z <= last_z || merged(z, last_z) || merged(z, z_max) {
            continue;
        }
        interior.push((z, p));
        (last_z, last_p) = (z, p);
    }
    if !(z_max > z_min) {
        // every point sits on one score with target 0 or 1
        z_max = z_min + 1.0 / big_n;
    }
    PiecewiseAffineLink::from_points(&interior, z_min, z_max)
}

/// `E_S[D_{U_r*}(y ‖ u_t(wᵀx))]` with `U_r` from `generator` and `u_t` from
/// `predictor`.
pub fn loss_eval(
    generator: &PiecewiseAffineLink,
    predictor: &PiecewiseAffineLink,
    w: &[f64],
    dataset: &Dataset,
) -> Result<f64> {
    let predictions: Vec<f64> = dataset.rows().map(|x| predictor.eval(dot(x, w))).collect();
    expected_dual_loss(generator, dataset.labels(), &predictions)
}

fn expected_dual_loss(generator: &PiecewiseAffineLink, labels: &[f64], predictions: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (&y, &p) in labels.iter().zip(predictions) {
        total += generator.bregman_dual(y, p)?;
    }
    Ok(total / labels.len() as f64)
}

/// Terms of the one-step loss decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub l: f64,
    pub q: f64,
    pub f: f64,
    /// `E_S[D_{U_t*}(y ‖ u_{t+1}(w_{t+1}ᵀx))]`.
    pub cross_loss: f64,
}

/// `L`, `F` and `Q` for the step from `(w_t, u_t)` to `(w_{t+1}, u_{t+1})`,
/// given the scores under both weight vectors.
pub fn decomposition_diagnostics(
    previous_scores: &[f64],
    next_scores: &[f64],
    previous_link: &PiecewiseAffineLink,
    next_link: &PiecewiseAffineLink,
    labels: &[f64],
    previous_big_n: f64,
    n: f64,
) -> Result<Decomposition> {
    let m = labels.len();
    if previous_scores.len() != m || next_scores.len() != m || m == 0 {
        return Err(Error::domain("score and label lengths differ"));
    }
    let (mut l, mut f, mut cross) = (0.0, 0.0, 0.0);
    for i in 0..m {
        let z = next_scores[i];
        let next_p = next_link.eval(z);
        let prev_p = previous_link.eval(z);
        let lever = previous_scores[i] - previous_link.inverse(next_p)?;
        l += lever * (next_p - prev_p);
        f += lever * (prev_p - labels[i]);
        cross += previous_link.bregman_dual(labels[i], next_p)?;
    }
    let (l, f, cross) = (l / m as f64, f / m as f64, cross / m as f64);
    Ok(Decomposition {
        l,
        q: f - (previous_big_n / n - 1.0) * cross,
        f,
        cross_loss: cross,
    })
}

/// Stable sort of indices by score.
pub fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    order
}

pub fn initial_state(dataset: &Dataset, config: &TrainConfig) -> Result<TrainState> {
    let (lo, hi) = config.initial_support;
    Ok(TrainState {
        w: vec![0.0; dataset.dim()],
        link: PiecewiseAffineLink::affine_between(lo, hi)?,
        targets: dataset.labels().to_vec(),
        t: 0,
    })
}

pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(TrainState, RunReport)> {
    train_monitored(dataset, None, config)
}

/// [`train`], additionally scoring `test` after every iteration.
pub fn train_monitored(
    dataset: &Dataset,
    test: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<(TrainState, RunReport)> {
    config.validate()?;
    if let Some(test) = test {
        if test.dim() != dataset.dim() {
            return Err(Error::domain(format!(
                "test dimension {} differs from training dimension {}",
                test.dim(),
                dataset.dim()
            )));
        }
    }
    let mut state = initial_state(dataset, config)?;
    let mut records: Vec<IterationRecord> = Vec::with_capacity(config.iterations);
    let mut scores = vec![0.0; dataset.len()];
    let mut previous_slopes: Option<(f64, f64)> = None;
    for t in 0..config.iterations {
        let outcome = iterate(dataset, test, config, &state, &scores, previous_slopes, records.last())
            .map_err(|e| e.at_iteration(t))?;
        previous_slopes = Some((outcome.record.n, outcome.record.big_n));
        scores = outcome.scores;
        state = outcome.state;
        records.push(outcome.record);
    }
    let report = RunReport {
        auc_train: records.last().map(|r| r.auc_train),
        auc_test: records.last().and_then(|r| r.auc_test),
        records,
        link: state.link.clone(),
        w: state.w.clone(),
    };
    Ok((state, report))
}

struct Outcome {
    state: TrainState,
    scores: Vec<f64>,
    record: IterationRecord,
}

fn iterate(
    dataset: &Dataset,
    test: Option<&Dataset>,
    config: &TrainConfig,
    state: &TrainState,
    previous_scores: &[f64],
    previous_slopes: Option<(f64, f64)>,
    previous: Option<&IterationRecord>,
) -> Result<Outcome> {
    let t = state.t;
    let m = dataset.len();
    let labels = dataset.labels();
    let max_norm = dataset.max_norm();
    let label_rate = dataset.positive_rate();

    // Step 1
    let gap = mean_operator_gap(dataset, &state.targets)?;
    let gap_norm = norm(&gap);
    let mut eta_from_guarantee = false;
    let eta_slope = match (config.slopes, previous_slopes) {
        (SlopeSchedule::Constant { big_n, .. }, _) => big_n,
        (SlopeSchedule::Adaptive { .. }, Some((_, big_n))) => big_n,
        (SlopeSchedule::Adaptive { initial, ratio, .. }, None) => initial * ratio,
    };
    let eta = if t == 0 {
        0.0
    } else {
        match config.eta {
            EtaMode::Fixed { eta } => eta,
            EtaMode::Theorem2 { delta, gamma, fallback } => {
                let fitted_rate = state.targets.iter().sum::<f64>() / m as f64;
                let p_star = label_rate.max(fitted_rate);
                match theorem2_learning_rate(gap_norm, p_star, max_norm, delta, gamma, eta_slope) {
                    Some(eta) => {
                        eta_from_guarantee = true;
                        eta
                    }
                    None => fallback,
                }
            }
        }
    };
    let w: Vec<f64> = if t == 0 {
        vec![0.0; dataset.dim()]
    } else {
        state.w.iter().zip(&gap).map(|(wi, g)| wi + eta * g).collect()
    };
    if let Some(j) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("weight {j} after the gradient step")));
    }

    // Step 2
    let scores = dataset.scores(&w);
    let order = score_order(&scores);
    let sorted_scores: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    let p_star = label_rate.max(scores.iter().map(|&z| state.link.eval(z)).sum::<f64>() / m as f64);
    let regime = match config.eta {
        EtaMode::Theorem2 { delta, .. } if t > 0 => Some(delta_regime(gap_norm, p_star, max_norm, delta)),
        EtaMode::Theorem2 { .. } => Some(false),
        EtaMode::Fixed { .. } => None,
    };

    // Step 3
    let boundary = match config.variant {
        Variant::Stability { alpha, beta } => Boundary::Stable { alpha, beta },
        _ => Boundary::Open,
    };
    let first_lower = match boundary {
        Boundary::Open => 0.0,
        Boundary::Stable { beta, .. } => state.link.eval(sorted_scores[0]) * (1.0 - beta),
    };
    let span = sorted_scores[m - 1] - sorted_scores[0];
    // largest n for which the chain still fits under 1
    let feasible_n = |fill: f64, cap: f64| {
        if span > 0.0 {
            cap.min(fill * (1.0 - first_lower) / span)
        } else {
            cap
        }
    };
    let (n, big_n) = match config.slopes {
        SlopeSchedule::Constant { n, big_n, fill } => {
            let cap = previous_slopes.map_or(n, |(previous, _)| previous.min(n));
            (feasible_n(fill, cap), big_n)
        }
        SlopeSchedule::Adaptive { initial, ratio, fill } => {
            let n = feasible_n(fill, previous_slopes.map_or(initial, |(n, _)| n));
            (n, n * ratio)
        }
    };
    let anchor_source = match config.variant {
        Variant::Label => labels,
        _ => &state.targets[..],
    };
    let anchors: Vec<f64> = order.iter().map(|&i| anchor_source[i]).collect();
    let problem = ChainProblem::new(sorted_scores.clone(), anchors, &state.link, n, big_n)
        .with_boundary(boundary);
    let (sorted_targets, solver) = match config.variant {
        Variant::Approx => (feasible_min_endpoint(&problem)?, None),
        _ => {
            let solution = solve_chain_report(&problem)?;
            (solution.targets, Some(solution.method))
        }
    };

    // Step 4
    let points: Vec<(f64, f64)> = sorted_scores
        .iter()
        .copied()
        .zip(sorted_targets.iter().copied())
        .collect();
    let link = link_fit(&points, n, big_n, config.endpoint_rule)?;
    let mut targets = vec![0.0; m];
    for (&i, &y) in order.iter().zip(&sorted_targets) {
        targets[i] = y;
    }

    // Diagnostics
    let loss = expected_dual_loss(&link, labels, &targets)?;
    let stable = config.band().map(|(alpha, beta)| {
        let u1 = state.link.eval(sorted_scores[0]);
        let y1 = sorted_targets[0];
        y1 >= u1 * (1.0 - beta) - 1e-12 && y1 <= u1 * (1.0 + alpha) + 1e-12
    });
    let decomposition = match previous_slopes {
        Some((_, previous_big_n)) if t > 0 => Some(decomposition_diagnostics(
            previous_scores,
            &scores,
            &state.link,
            &link,
            labels,
            previous_big_n,
            n,
        )?),
        _ => None,
    };
    let compliant = match (config.eta, previous_slopes) {
        (EtaMode::Theorem2 { delta, .. }, Some((_, previous_big_n))) => {
            let limit = 1.0 + f_delta(delta) + 1e-12;
            eta_from_guarantee
                && big_n / n <= limit
                && previous_big_n / n <= limit
                && (eta_slope - big_n).abs() <= 1e-12 * big_n
        }
        _ => false,
    };
    let decrease_bound = match (config.eta, previous) {
        (EtaMode::Theorem2 { delta, .. }, Some(previous))
            if compliant && regime == Some(true) && stable == Some(true) =>
        {
            Some(previous.loss - p_star * f_delta(delta) / n)
        }
        _ => None,
    };
    let ranked: Vec<f64> = scores.iter().map(|&z| link.eval(z)).collect();
    let auc_train = auc(&ranked, labels)?;
    let auc_test = match test {
        Some(test) => {
            let ranked: Vec<f64> = test.rows().map(|x| link.eval(dot(x, &w))).collect();
            Some(auc(&ranked, test.labels())?)
        }
        None => None,
    };
    let record = IterationRecord {
        t,
        loss,
        previous_loss: previous.map(|r| r.loss),
        gap_norm,
        eta,
        p_star,
        regime,
        stable,
        compliant,
        decrease_bound,
        l: decomposition.map(|d| d.l),
        q: decomposition.map(|d| d.q),
        f: decomposition.map(|d| d.f),
        n,
        big_n,
        solver,
        auc_train,
        auc_test,
    };
    Ok(Outcome {
        state: TrainState {
            w,
            link,
            targets,
            t: t + 1,
        },
        scores,
        record,
    })
}

/// Repeated gradient steps `w ← w + η (μ̂_y − E_S[u(wᵀx) x])` under a frozen
/// link, starting from `w = 0`.
pub fn train_with_fixed_link(
    dataset: &Dataset,
    link: &PiecewiseAffineLink,
    eta: f64,
    iterations: usize,
) -> Result<Vec<f64>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::domain(format!("learning rate must be positive, got {eta}")));
    }
    let mut w = vec![0.0; dataset.dim()];
    for t in 0..iterations {
        let predictions: Vec<f64> = dataset.rows().map(|x| link.eval(dot(x, &w))).collect();
        w = gradient_step(&w, dataset, &predictions, eta)?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weights".into()).at_iteration(t));
        }
    }
    Ok(w)
}
