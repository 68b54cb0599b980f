//! Constrained Bregman projection onto chains with bounded increments, and
//! plain isotonic regression.
//!
//! The chain problem is
//!
//! ```text
//! minimize   Σᵢ wᵢ · D_{U*}(yᵢ ‖ aᵢ)
//! subject to n (z_{i+1} − zᵢ) ≤ y_{i+1} − yᵢ ≤ N (z_{i+1} − zᵢ)
//!            y₁ ∈ [lower, upper],  y_m ≤ 1
//! ```
//!
//! with `U*` the conjugate potential of the current link and `a` the previous
//! targets. The objective is separable and strictly convex with derivative
//! `wᵢ (u⁻¹(yᵢ) − u⁻¹(aᵢ))`, piecewise linear in `yᵢ`.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::PiecewiseAffineLink;

mod interior;

/// Constraint on the first target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `y₁ ≥ 0`.
    Open,
    /// `y₁ ∈ u(z₁) · [1 − β, 1 + α]`, with `u` the current link.
    Stable { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone)]
pub struct ChainProblem<'a> {
    /// Sorted scores `z₁ ≤ … ≤ z_m`.
    pub scores: Vec<f64>,
    /// Previous targets, aligned with `scores`.
    pub anchors: Vec<f64>,
    pub weights: Vec<f64>,
    pub link: &'a PiecewiseAffineLink,
    pub min_slope: f64,
    pub max_slope: f64,
    pub boundary: Boundary,
}

/// How [`solve_chain_report`] reached its answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Exact active-set solution, warm-started from the interior point.
    ActiveSet,
    /// The polish did not settle; the interior point, within its duality
    /// gap, is returned.
    InteriorPoint,
    /// Neither of the above ran to completion and the dynamic program did.
    DynamicProgram,
}

#[derive(Debug, Clone)]
pub struct ChainSolution {
    pub targets: Vec<f64>,
    pub method: SolveMethod,
    pub newton_steps: usize,
    pub active_set_iterations: usize,
}

impl<'a> ChainProblem<'a> {
    /// Uniform weights `1/m` and the open boundary.
    pub fn new(
        scores: Vec<f64>,
        anchors: Vec<f64>,
        link: &'a PiecewiseAffineLink,
        min_slope: f64,
        max_slope: f64,
    ) -> Self {
        let m = scores.len().max(1);
        Self {
            weights: vec![1.0 / m as f64; scores.len()],
            scores,
            anchors,
            link,
            min_slope,
            max_slope,
            boundary: Boundary::Open,
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Admissible interval for the first target.
    pub fn first_bounds(&self) -> (f64, f64) {
        match self.boundary {
            Boundary::Open => (0.0, f64::INFINITY),
            Boundary::Stable { alpha, beta } => {
                let u1 = self.scores.first().map_or(0.0, |&z| self.link.eval(z));
                ((u1 * (1.0 - beta)).max(0.0), u1 * (1.0 + alpha))
            }
        }
    }

    /// Increment bounds `[n Δz, N Δz]` between consecutive positions.
    pub fn increment_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        self.scores
            .windows(2)
            .map(|p| {
                let dz = p[1] - p[0];
                (self.min_slope * dz, self.max_slope * dz)
            })
            .unzip()
    }

    /// `Σᵢ wᵢ D_{U*}(yᵢ ‖ aᵢ)`, with `y` clamped to `[0, 1]`.
    pub fn objective(&self, targets: &[f64]) -> Result<f64> {
        if targets.len() != self.len() {
            return Err(Error::domain(format!(
                "{} targets for a chain of length {}",
                targets.len(),
                self.len()
            )));
        }
        let mut total = 0.0;
        for ((&y, &a), &w) in targets.iter().zip(&self.anchors).zip(&self.weights) {
            total += w * self.link.bregman_dual(y.clamp(0.0, 1.0), a)?;
        }
        Ok(total)
    }

    /// Largest violation of any chain or boundary constraint.
    pub fn max_violation(&self, targets: &[f64]) -> f64 {
        let (lower, upper) = self.first_bounds();
        let (lo, hi) = self.increment_bounds();
        let mut worst: f64 = 0.0;
        if let (Some(&first), Some(&last)) = (targets.first(), targets.last()) {
            worst = worst.max(lower - first).max(first - upper).max(last - 1.0);
        }
        for (i, pair) in targets.windows(2).enumerate() {
            let d = pair[1] - pair[0];
            worst = worst.max(lo[i] - d).max(d - hi[i]);
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let m = self.len();
        if m == 0 {
            return Err(Error::domain("empty chain"));
        }
        if self.anchors.len() != m || self.weights.len() != m {
            return Err(Error::domain(format!(
                "chain of length {m} with {} anchors and {} weights",
                self.anchors.len(),
                self.weights.len()
            )));
        }
        if !(self.min_slope > 0.0) || !(self.min_slope <= self.max_slope) || !self.max_slope.is_finite()
        {
            return Err(Error::domain(format!(
                "slope bounds must satisfy 0 < n ≤ N < ∞, got n = {}, N = {}",
                self.min_slope, self.max_slope
            )));
        }
        if let Some(i) = self.scores.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFinite(format!("score at position {i}")));
        }
        if let Some(i) = self.scores.windows(2).position(|p| p[1] < p[0]) {
            return Err(Error::domain(format!(
                "scores must be sorted; position {} decreases",
                i + 1
            )));
        }
        if let Some(i) = self.anchors.iter().position(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::domain(format!(
                "anchor {} at position {i} outside [0, 1]",
                self.anchors[i]
            )));
        }
        if let Some(i) = self.weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::domain(format!("weight at position {i} must be positive")));
        }
        if let Boundary::Stable { alpha, beta } = self.boundary {
            if !(alpha >= 0.0) || !(0.0..=1.0).contains(&beta) {
                return Err(Error::domain(format!(
                    "stability interval needs α ≥ 0 and β ∈ [0, 1], got α = {alpha}, β = {beta}"
                )));
            }
        }
        let (lower, upper) = self.first_bounds();
        if lower > upper {
            return Err(Error::Infeasible {
                lo: 0,
                hi: 0,
                reason: format!("first target interval [{lower}, {upper}] is empty"),
            });
        }
        let (lo, _) = self.increment_bounds();
        let minimal_last = lower + lo.iter().sum::<f64>();
        if minimal_last > 1.0 + 1e-12 {
            return Err(Error::Infeasible {
                lo: 0,
                hi: m - 1,
                reason: format!(
                    "smallest reachable last target {minimal_last} exceeds 1 (n · score range too large)"
                ),
            });
        }
        Ok(())
    }
}

/// Edge data in the padded indexing used by the solvers: node 0 is a virtual
/// node fixed at 0, nodes `1..=m` are the targets, node `m + 1` is a virtual
/// node fixed at 1. Edge `e` joins nodes `e` and `e + 1`.
struct Prepared<'p> {
    link: &'p PiecewiseAffineLink,
    m: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// `u⁻¹(aᵢ)` per target.
    c: Vec<f64>,
    w: Vec<f64>,
    anchors: &'p [f64],
    gmin: f64,
    gmax: f64,
}

impl<'p> Prepared<'p> {
    fn new(problem: &'p ChainProblem<'p>) -> Result<Self> {
        problem.validate()?;
        let m = problem.len();
        let (lower, upper) = problem.first_bounds();
        let (inc_lo, inc_hi) = problem.increment_bounds();
        let mut lo = Vec::with_capacity(m + 1);
        let mut hi = Vec::with_capacity(m + 1);
        lo.push(lower);
        hi.push(upper);
        lo.extend(inc_lo);
        hi.extend(inc_hi);
        lo.push(0.0);
        hi.push(f64::INFINITY);
        let link = problem.link;
        Ok(Self {
            link,
            m,
            lo,
            hi,
            c: problem.anchors.iter().map(|&a| link.inverse_unchecked(a)).collect(),
            w: problem.weights.clone(),
            anchors: &problem.anchors,
            gmin: 1.0 / link.max_slope(),
            gmax: 1.0 / link.min_slope(),
        })
    }

    /// Derivative of the objective term at real position `j` (0-based).
    fn grad(&self, j: usize, y: f64) -> f64 {
        self.w[j] * (self.link.inverse_extended(y).0 - self.c[j])
    }

    /// Root of `b ↦ Σ w_j (u⁻¹(b + off_j) − c_j)` over the given members.
    fn block_root(&self, members: &[(usize, f64)]) -> f64 {
        let weight: f64 = members.iter().map(|&(j, _)| self.w[j]).sum();
        let eval = |b: f64| {
            let (mut h, mut dh, mut scale) = (0.0, 0.0, 0.0);
            for &(j, off) in members {
                let (g, dg) = self.link.inverse_extended(b + off);
                h += self.w[j] * (g - self.c[j]);
                dh += self.w[j] * dg;
                scale += self.w[j] * (g.abs() + self.c[j].abs());
            }
            (h, dh, scale)
        };
        let b0 = members
            .iter()
            .map(|&(j, off)| self.w[j] * (self.anchors[j] - off))
            .sum::<f64>()
            / weight;
        let (h0, dh0, scale0) = eval(b0);
        if h0.abs() <= 4.0 * f64::EPSILON * scale0 {
            return b0;
        }
        // h' lies in [W gmin, W gmax], which brackets the root.
        let near = b0 - h0 / (weight * self.gmax);
        let far = b0 - h0 / (weight * self.gmin);
        let (mut a, mut b) = if h0 > 0.0 { (far, near) } else { (near, far) };
        let pad = 1e-12 * (1.0 + b0.abs() + (far - near).abs());
        a -= pad;
        b += pad;
        let mut x = b0 - h0 / dh0;
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        for _ in 0..200 {
            let (h, dh, scale) = eval(x);
            if h.abs() <= 4.0 * f64::EPSILON * scale {
                return x;
            }
            if h < 0.0 {
                a = x;
            } else {
                b = x;
            }
            if b - a <= 2.0 * f64::EPSILON * x.abs().max(1.0) {
                break;
            }
            let nx = x - h / dh;
            x = if nx > a && nx < b && nx != x { nx } else { 0.5 * (a + b) };
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EdgeState {
    Free,
    Lo,
    Hi,
    /// Zero-width band; always tight.
    Tied,
}

const ACTIVE_SET_CAP: usize = 300;
/// Iterations allowed per polish attempt from an interior point.
const CROSSOVER_CAP: usize = 25;

/// Edge states violated by the unconstrained minimizer `y = anchors`.
fn cold_states(prep: &Prepared) -> Vec<EdgeState> {
    let m = prep.m;
    let mut y = vec![0.0; m + 2];
    y[1..=m].copy_from_slice(prep.anchors);
    y[m + 1] = 1.0;
    (0..=m)
        .map(|e| {
            let d = y[e + 1] - y[e];
            if prep.lo[e] == prep.hi[e] {
                EdgeState::Tied
            } else if d < prep.lo[e] {
                EdgeState::Lo
            } else if d > prep.hi[e] {
                EdgeState::Hi
            } else {
                EdgeState::Free
            }
        })
        .collect()
}

/// Primal-dual active set over edge states. Returns `None` if the states
/// cycle or the iteration cap is hit.
fn active_set(
    prep: &Prepared,
    mut state: Vec<EdgeState>,
    cap: usize,
) -> Option<(Vec<f64>, usize)> {
    let m = prep.m;
    let edges = m + 1;
    let mut y = vec![0.0; m + 2];
    y[m + 1] = 1.0;

    let wsum: f64 = prep.w.iter().sum();
    let gscale = 1.0 + prep.c.iter().fold(0.0f64, |s, c| s.max(c.abs()));
    let mu_tol = 1e-13 * wsum * gscale;
    let d_tol = 1e-13;

    let mut seen = HashSet::new();
    let mut mu = vec![0.0; edges];
    let mut members: Vec<(usize, f64)> = Vec::new();
    let mut offsets = vec![0.0; m + 2];
    let mut additions: Vec<(usize, EdgeState)> = Vec::new();
    let mut releases: Vec<(usize, f64)> = Vec::new();

    // Each cycle tightens the update rule: first all changes at once, then
    // additions before releases, then a single release at a time.
    let mut caution = 0;
    for iteration in 1..=cap {
        let mut hasher = DefaultHasher::new();
        state.hash(&mut hasher);
        if !seen.insert(hasher.finish()) {
            if caution == 2 {
                return None;
            }
            caution += 1;
            seen.clear();
        }

        // A block holding both virtual nodes has no freedom; loosen it first.
        if !state.iter().any(|&s| s == EdgeState::Free) {
            let total: f64 = (0..edges).map(|e| tight_bound(prep, state[e], e)).sum();
            if (total - 1.0).abs() > 1e-12 {
                if total > 1.0 {
                    for s in state.iter_mut().filter(|s| **s == EdgeState::Hi) {
                        *s = EdgeState::Free;
                    }
                }
                if state[m] == EdgeState::Lo {
                    state[m] = EdgeState::Free;
                }
                if !state.iter().any(|&s| s == EdgeState::Free) {
                    return None;
                }
            }
        }

        mu.iter_mut().for_each(|v| *v = 0.0);
        let mut start = 0;
        while start <= m + 1 {
            let mut end = start;
            offsets[start] = 0.0;
            while end <= m && state[end] != EdgeState::Free {
                offsets[end + 1] = offsets[end] + tight_bound(prep, state[end], end);
                end += 1;
            }
            solve_block(prep, start, end, &offsets, &mut y, &mut members);
            block_multipliers(prep, &state, start, end, &y, &mut mu);
            start = end + 1;
        }

        additions.clear();
        releases.clear();
        for e in 0..edges {
            match state[e] {
                EdgeState::Free => {
                    let d = y[e + 1] - y[e];
                    if d < prep.lo[e] - d_tol {
                        additions.push((e, EdgeState::Lo));
                    } else if d > prep.hi[e] + d_tol {
                        additions.push((e, EdgeState::Hi));
                    }
                }
                EdgeState::Lo if mu[e] < -mu_tol => releases.push((e, -mu[e])),
                EdgeState::Hi if mu[e] > mu_tol => releases.push((e, mu[e])),
                _ => {}
            }
        }
        if additions.is_empty() && releases.is_empty() {
            return Some((y[1..=m].to_vec(), iteration));
        }
        let release_all = caution == 0 || (caution == 1 && additions.is_empty());
        if caution == 0 || !additions.is_empty() {
            for &(e, s) in &additions {
                state[e] = s;
            }
        }
        if release_all {
            for &(e, _) in &releases {
                state[e] = EdgeState::Free;
            }
        } else if additions.is_empty() {
            let &(e, _) = releases
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            state[e] = EdgeState::Free;
        }
    }
    None
}

fn tight_bound(prep: &Prepared, state: EdgeState, e: usize) -> f64 {
    match state {
        EdgeState::Hi => prep.hi[e],
        _ => prep.lo[e],
    }
}

/// Places the nodes `start..=end` of one block given offsets relative to the
/// block's first node.
fn solve_block(
    prep: &Prepared,
    start: usize,
    end: usize,
    offsets: &[f64],
    y: &mut [f64],
    members: &mut Vec<(usize, f64)>,
) {
    let m = prep.m;
    let base = if start == 0 {
        0.0
    } else if end == m + 1 {
        1.0 - offsets[m + 1]
    } else {
        members.clear();
        members.extend((start..=end).map(|k| (k - 1, offsets[k])));
        prep.block_root(members)
    };
    for k in start..=end {
        if k >= 1 && k <= m {
            y[k] = base + offsets[k];
        }
    }
}

/// Edge multipliers inside one block; positive values push an increment up
/// against its lower bound, negative values push it down against its upper.
fn block_multipliers(
    prep: &Prepared,
    state: &[EdgeState],
    start: usize,
    end: usize,
    y: &[f64],
    mu: &mut [f64],
) {
    let m = prep.m;
    let real = |k: usize| k >= 1 && k <= m;
    let mut partial = Vec::with_capacity(end - start + 1);
    let mut s = 0.0;
    for k in start..end {
        if real(k) {
            s += prep.grad(k - 1, y[k]);
        }
        partial.push(s);
    }
    let constant = if start != 0 {
        0.0
    } else if end != m + 1 {
        if real(end) {
            s + prep.grad(end - 1, y[end])
        } else {
            s
        }
    } else {
        // Both ends pinned: any constant in the admissible range works.
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for (i, e) in (start..end).enumerate() {
            match state[e] {
                EdgeState::Lo => lower = lower.max(partial[i]),
                EdgeState::Hi => upper = upper.min(partial[i]),
                _ => {}
            }
        }
        if lower <= upper {
            if lower.is_finite() {
                lower
            } else if upper.is_finite() {
                upper
            } else {
                0.0
            }
        } else {
            0.5 * (lower + upper)
        }
    };
    for (i, e) in (start..end).enumerate() {
        mu[e] = constant - partial[i];
    }
}

/// Exact forward/backward dynamic program.
///
/// The forward pass computes the unconstrained minimizer `r_k` of the
/// partial problem over positions `1..=k`; its derivative is evaluated by
/// walking back along tight increments. Cost grows with the length of tight
/// runs, so this serves as the fallback and as an independent exact route.
pub fn solve_chain_dp(problem: &ChainProblem) -> Result<Vec<f64>> {
    let prep = Prepared::new(problem)?;
    let m = prep.m;
    let (lower, upper) = (prep.lo[0], prep.hi[0]);
    // real edge i joins positions i and i + 1 (0-based) and is padded edge i + 1
    let lo = &prep.lo[1..m];
    let hi = &prep.hi[1..m];

    let mut roots = vec![0.0; m];
    // Roots pinned to an end of their domain; rounding must not carry the
    // walk past them.
    let mut pinned_low = vec![false; m];
    let mut pinned_high = vec![false; m];
    let mut dom_lo = lower;
    let mut dom_hi = upper;
    for k in 0..m {
        if k > 0 {
            dom_lo += lo[k - 1];
            dom_hi += hi[k - 1];
        }
        let top = if k + 1 == m { dom_hi.min(1.0) } else { dom_hi };
        let deriv = |y: f64| {
            let mut acc = 0.0;
            let mut arg = y;
            let mut j = k;
            loop {
                acc += prep.grad(j, arg);
                if j == 0 {
                    break;
                }
                let prev = roots[j - 1];
                if !pinned_high[j - 1] && arg - hi[j - 1] > prev {
                    arg -= hi[j - 1];
                } else if !pinned_low[j - 1] && arg - lo[j - 1] < prev {
                    arg -= lo[j - 1];
                } else {
                    break;
                }
                j -= 1;
            }
            acc
        };
        let mut a = dom_lo;
        let mut b = if top.is_finite() {
            top
        } else {
            let mut b = dom_lo.max(1.0) + 1.0;
            while deriv(b) < 0.0 {
                b = 2.0 * b + 1.0;
            }
            b
        };
        roots[k] = if deriv(a) >= 0.0 {
            pinned_low[k] = true;
            a
        } else if deriv(b) <= 0.0 {
            pinned_high[k] = true;
            b
        } else {
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if deriv(mid) < 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        };
    }

    let mut y = vec![0.0; m];
    y[m - 1] = roots[m - 1];
    for k in (0..m - 1).rev() {
        y[k] = roots[k].clamp(y[k + 1] - hi[k], y[k + 1] - lo[k]);
    }
    Ok(repair(&prep, y))
}

/// Nudges a near-feasible solution onto the constraint set.
fn repair(prep: &Prepared, mut y: Vec<f64>) -> Vec<f64> {
    let m = prep.m;
    y[0] = y[0].clamp(prep.lo[0], prep.hi[0]);
    for i in 0..m - 1 {
        y[i + 1] = y[i + 1].clamp(y[i] + prep.lo[i + 1], y[i] + prep.hi[i + 1]);
    }
    if y[m - 1] > 1.0 {
        y[m - 1] = 1.0;
        for i in (0..m - 1).rev() {
            y[i] = y[i].clamp(y[i + 1] - prep.hi[i + 1], y[i + 1] - prep.lo[i + 1]);
        }
        y[0] = y[0].max(prep.lo[0]);
    }
    y
}

/// Global minimizer of the chain problem.
pub fn solve_chain(problem: &ChainProblem) -> Result<Vec<f64>> {
    solve_chain_report(problem).map(|s| s.targets)
}

/// [`solve_chain`] with a record of the route taken: a barrier interior
/// point locates the binding increments, the active set polishes from there.
pub fn solve_chain_report(problem: &ChainProblem) -> Result<ChainSolution> {
    let prep = Prepared::new(problem)?;
    let mut polished = None;
    let barrier = interior::barrier_solve(&prep, &mut |states| {
        polished = active_set(&prep, states, CROSSOVER_CAP);
        polished.is_some()
    });
    let newton_steps = barrier.as_ref().map_or(0, |b| b.newton_steps);
    if polished.is_none() {
        let start = match &barrier {
            Some(b) => b.states.clone(),
            None => cold_states(&prep),
        };
        polished = active_set(&prep, start, ACTIVE_SET_CAP);
    }
    if let Some((y, iterations)) = polished {
        return Ok(ChainSolution {
            targets: repair(&prep, y),
            method: SolveMethod::ActiveSet,
            newton_steps,
            active_set_iterations: iterations,
        });
    }
    if let Some(b) = barrier {
        return Ok(ChainSolution {
            targets: repair(&prep, b.y[1..=prep.m].to_vec()),
            method: SolveMethod::InteriorPoint,
            newton_steps,
            active_set_iterations: 0,
        });
    }
    Ok(ChainSolution {
        targets: solve_chain_dp(problem)?,
        method: SolveMethod::DynamicProgram,
        newton_steps,
        active_set_iterations: ACTIVE_SET_CAP,
    })
}

/// The feasible point with the smallest last target: the first target at its
/// lower bound and every increment at `n Δz`.
pub fn feasible_min_endpoint(problem: &ChainProblem) -> Result<Vec<f64>> {
    problem.validate()?;
    let (lower, _) = problem.first_bounds();
    let (lo, _) = problem.increment_bounds();
    let mut y = Vec::with_capacity(problem.len());
    y.push(lower);
    for step in lo {
        let last = *y.last().expect("non-empty");
        y.push(last + step);
    }
    if let Some(last) = y.last_mut() {
        // validate() admits 1e-12 of slack
        *last = last.min(1.0);
    }
    Ok(y)
}

/// Weighted least-squares projection onto non-decreasing sequences.
pub fn pava_isotonic(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if values.len() != weights.len() {
        return Err(Error::domain(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if let Some(i) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::domain(format!("weight at position {i} must be positive")));
    }
    // (weighted mean, total weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut cur = (v, w, 1usize);
        while let Some(&(mean, weight, count)) = blocks.last() {
            if mean <= cur.0 {
                break;
            }
            blocks.pop();
            let total = weight + cur.1;
            cur = ((mean * weight + cur.0 * cur.1) / total, total, count + cur.2);
        }
        blocks.push(cur);
    }
    Ok(blocks
        .into_iter()
        .flat_map(|(mean, _, count)| std::iter::repeat(mean).take(count))
        .collect())
}

/// Accelerated projected gradient (with adaptive restart) in increment
/// coordinates `d₀ = y₁`, `dᵢ = y_{i+1} − yᵢ`, where the feasible set is a
/// box cut by the single halfspace `Σ d ≤ 1`, so projection is exact. Slow,
/// and shares nothing with [`solve_chain`] beyond the objective.
pub fn oracle_solve(problem: &ChainProblem, tolerance: f64) -> Result<Vec<f64>> {
    problem.validate()?;
    let m = problem.len();
    let link = problem.link;
    let (lower, upper) = problem.first_bounds();
    let (inc_lo, inc_hi) = problem.increment_bounds();
    let mut box_lo = vec![lower];
    box_lo.extend(inc_lo);
    let mut box_hi = vec![upper];
    box_hi.extend(inc_hi);

    let clamp_shift = |v: &[f64], shift: f64| -> Vec<f64> {
        v.iter()
            .zip(box_lo.iter().zip(&box_hi))
            .map(|(&x, (&lo, &hi))| (x - shift).max(lo).min(hi))
            .collect()
    };
    let project = |v: &[f64]| -> Vec<f64> {
        let d = clamp_shift(v, 0.0);
        if d.iter().sum::<f64>() <= 1.0 {
            return d;
        }
        // bisection on the multiplier of Σ d ≤ 1
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for (x, lo) in v.iter().zip(&box_lo) {
            b = b.max(x - lo);
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if clamp_shift(v, mid).iter().sum::<f64>() > 1.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        clamp_shift(v, b)
    };
    let to_targets = |d: &[f64]| -> Vec<f64> {
        d.iter()
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect()
    };

    let c: Vec<f64> = problem.anchors.iter().map(|&a| link.inverse_unchecked(a)).collect();
    let grad = |d: &[f64]| -> Vec<f64> {
        let y = to_targets(d);
        let gy: Vec<f64> = y
            .iter()
            .zip(&c)
            .zip(&problem.weights)
            .map(|((&v, &ci), &w)| w * (link.inverse_extended(v).0 - ci))
            .collect();
        // ∂/∂dₖ = Σ_{i ≥ k} ∂/∂yᵢ
        let mut out = vec![0.0; m];
        let mut acc = 0.0;
        for k in (0..m).rev() {
            acc += gy[k];
            out[k] = acc;
        }
        out
    };
    let wmax = problem.weights.iter().fold(0.0f64, |s, &w| s.max(w));
    // ‖cumsum‖² ≤ m (m + 1) / 2
    let lipschitz = wmax / link.min_slope() * (m * (m + 1)) as f64 / 2.0;
    let step = 1.0 / lipschitz;

    let mut anchor_steps = vec![problem.anchors[0]];
    anchor_steps.extend(problem.anchors.windows(2).map(|p| p[1] - p[0]));
    let mut x = project(&anchor_steps);
    let mut momentum = x.clone();
    let mut theta = 1.0f64;
    let mut value = problem.objective(&to_targets(&x))?;
    const CAP: usize = 2_000_000;
    for _ in 0..CAP {
        let g = grad(&momentum);
        let target: Vec<f64> = momentum.iter().zip(&g).map(|(v, d)| v - step * d).collect();
        let next = project(&target);
        let next_value = problem.objective(&to_targets(&next))?;
        if next_value > value && theta > 1.0 {
            // adaptive restart; a plain projected step is accepted as is
            theta = 1.0;
            momentum = x.clone();
            continue;
        }
        let change = to_targets(&next)
            .iter()
            .zip(to_targets(&x))
            .fold(0.0f64, |s, (a, b)| s.max((a - b).abs()));
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        momentum = next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        theta = theta_next;
        x = next;
        value = next_value;
        if change < tolerance {
            return Ok(to_targets(&x));
        }
    }
    Err(Error::NonConvergence {
        iterations: CAP,
        reason: "projected gradient did not settle".into(),
    })
}
