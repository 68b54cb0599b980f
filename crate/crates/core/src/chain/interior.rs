//! Log-barrier interior point for the chain problem.
//!
//! Targets joined by zero-width bands are merged into groups with fixed
//! offsets, so the remaining variables are one base value per group and the
//! barrier Hessian is tridiagonal. The result locates the binding increments
//! for the exact active-set polish.

use super::{EdgeState, Prepared};

const GROWTH: f64 = 20.0;
const MAX_NEWTON: usize = 50;
/// Relative duality gap below which each centring is followed by a polish
/// attempt.
const CROSSOVER_GAP: f64 = 1e-6;

pub(super) struct BarrierSolution {
    /// Padded targets: index 0 is 0, index `m + 1` is 1.
    pub y: Vec<f64>,
    pub states: Vec<EdgeState>,
    pub newton_steps: usize,
}

struct Layout {
    /// First and last padded node of each group.
    first: Vec<usize>,
    last: Vec<usize>,
    /// Node offset from its group's first node.
    offset: Vec<f64>,
}

impl Layout {
    fn new(prep: &Prepared) -> Self {
        let nodes = prep.m + 2;
        let mut first = vec![0];
        let mut last = Vec::new();
        let mut offset = vec![0.0; nodes];
        for k in 1..nodes {
            if prep.lo[k - 1] == prep.hi[k - 1] {
                offset[k] = offset[k - 1] + prep.lo[k - 1];
            } else {
                last.push(k - 1);
                first.push(k);
            }
        }
        last.push(nodes - 1);
        Self { first, last, offset }
    }

    fn groups(&self) -> usize {
        self.first.len()
    }
}

struct Barrier<'a, 'p> {
    prep: &'a Prepared<'p>,
    layout: Layout,
    /// `U*(aⱼ)` per target.
    dual_anchor: Vec<f64>,
    /// Bounds of the increment leaving each group (the last has none).
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Barrier<'_, '_> {
    fn dual_potential(&self, p: f64) -> f64 {
        let z = self.prep.link.inverse_unchecked(p);
        p * z - self.prep.link.potential(z)
    }

    /// Objective value, derivative and curvature of one group at base `b`.
    fn group_terms(&self, g: usize, b: f64) -> (f64, f64, f64) {
        let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for k in self.layout.first[g]..=self.layout.last[g] {
            if k == 0 || k > self.prep.m {
                continue;
            }
            let j = k - 1;
            let y = b + self.layout.offset[k];
            let (z, dz) = self.prep.link.inverse_extended(y);
            let w = self.prep.w[j];
            let c = self.prep.c[j];
            v += w * (self.dual_potential(y) - self.dual_anchor[j] - (y - self.prep.anchors[j]) * c);
            d1 += w * (z - c);
            d2 += w * dz;
        }
        (v, d1, d2)
    }

    /// Increment across boundary `j` (between groups `j` and `j + 1`).
    fn increment(&self, base: &[f64], j: usize) -> f64 {
        base[j + 1] - base[j] - self.layout.offset[self.layout.last[j]]
    }

    fn objective(&self, base: &[f64]) -> f64 {
        (1..self.layout.groups() - 1)
            .map(|g| self.group_terms(g, base[g]).0)
            .sum()
    }

    /// `t f − Σ log slack`, or `None` outside the interior.
    fn merit(&self, base: &[f64], t: f64) -> Option<f64> {
        let mut total = t * self.objective(base);
        for j in 0..self.layout.groups() - 1 {
            let d = self.increment(base, j);
            let below = d - self.lo[j];
            let above = self.hi[j] - d;
            if !(below > 0.0 && above > 0.0) {
                return None;
            }
            total -= below.ln();
            if self.hi[j].is_finite() {
                total -= above.ln();
            }
        }
        Some(total)
    }

    fn sides(&self) -> usize {
        self.lo.len() + self.hi.iter().filter(|h| h.is_finite()).count()
    }
}

/// Solves `A x = r` for symmetric tridiagonal `A` with diagonal `diag` and
/// off-diagonal `off`, overwriting `r`.
fn solve_tridiagonal(diag: &mut [f64], off: &[f64], r: &mut [f64]) -> bool {
    let n = diag.len();
    for i in 1..n {
        if !(diag[i - 1] > 0.0) {
            return false;
        }
        let factor = off[i - 1] / diag[i - 1];
        diag[i] -= factor * off[i - 1];
        r[i] -= factor * r[i - 1];
    }
    if !(diag[n - 1] > 0.0) {
        return false;
    }
    r[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        r[i] = (r[i] - off[i] * r[i + 1]) / diag[i];
    }
    true
}

/// Runs the barrier method, offering the classified edge states to `polish`
/// after each centring once the gap is small; stops as soon as `polish`
/// accepts.
pub(super) fn barrier_solve(
    prep: &Prepared,
    polish: &mut dyn FnMut(Vec<EdgeState>) -> bool,
) -> Option<BarrierSolution> {
    let layout = Layout::new(prep);
    let groups = layout.groups();
    let boundaries = groups - 1;
    let lo: Vec<f64> = (0..boundaries).map(|j| prep.lo[layout.last[j]]).collect();
    let hi: Vec<f64> = (0..boundaries).map(|j| prep.hi[layout.last[j]]).collect();
    let barrier = Barrier {
        prep,
        dual_anchor: Vec::new(),
        layout,
        lo,
        hi,
    };
    let barrier = Barrier {
        dual_anchor: prep.anchors.iter().map(|&a| barrier.dual_potential(a)).collect(),
        ..barrier
    };
    let layout = &barrier.layout;

    // Strictly interior start: every free increment a little above its
    // lower bound, the remainder on the final increment.
    let room = 1.0 - prep.lo[..prep.m].iter().sum::<f64>();
    if !(room > 1e-14) || groups < 3 {
        return None;
    }
    let widths: Vec<f64> = (0..boundaries - 1)
        .map(|j| (barrier.hi[j] - barrier.lo[j]).min(room))
        .collect();
    let spread = widths.iter().sum::<f64>().max(room);
    let mut base = vec![0.0; groups];
    for j in 0..boundaries - 1 {
        let d = barrier.lo[j] + widths[j] * room / (2.0 * spread);
        base[j + 1] = base[j] + layout.offset[layout.last[j]] + d;
    }
    base[groups - 1] = 1.0;

    let vars = groups - 2;
    let sides = barrier.sides() as f64;
    let wsum: f64 = prep.w.iter().sum();
    let scale = 1.0 + prep.c.iter().fold(0.0f64, |s, c| s.max(c.abs()));
    let gap_target = 1e-13 * wsum * scale;
    let mut t = sides / barrier.objective(&base).max(1e-6 * wsum);

    let mut grad = vec![0.0; vars];
    let mut diag = vec![0.0; vars];
    let mut off = vec![0.0; vars.saturating_sub(1)];
    let mut step = vec![0.0; vars];
    let mut trial = base.clone();
    let mut newton_steps = 0;
    loop {
        for _ in 0..MAX_NEWTON {
            newton_steps += 1;
            for v in 0..vars {
                let g = v + 1;
                let (_, d1, d2) = barrier.group_terms(g, base[g]);
                grad[v] = t * d1;
                diag[v] = t * d2;
            }
            for j in 0..boundaries {
                let d = barrier.increment(&base, j);
                let below = d - barrier.lo[j];
                let above = barrier.hi[j] - d;
                let mut first = -1.0 / below;
                let mut second = 1.0 / (below * below);
                if barrier.hi[j].is_finite() {
                    first += 1.0 / above;
                    second += 1.0 / (above * above);
                }
                // d rises with group j + 1 and falls with group j
                if j < vars {
                    grad[j] += first;
                    diag[j] += second;
                }
                if j >= 1 {
                    grad[j - 1] -= first;
                    diag[j - 1] += second;
                }
                if j >= 1 && j < vars {
                    off[j - 1] = -second;
                }
            }
            step.iter_mut().zip(&grad).for_each(|(s, g)| *s = -g);
            if !solve_tridiagonal(&mut diag, &off, &mut step) {
                return None;
            }
            let decrement: f64 = -grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
            if !decrement.is_finite() {
                return None;
            }
            // suboptimality decrement / t, small against the gap sides / t
            if decrement <= 1e-6 * sides {
                break;
            }
            // largest step keeping every slack positive
            let mut alpha: f64 = 1.0;
            for j in 0..boundaries {
                let left = if j >= 1 { step[j - 1] } else { 0.0 };
                let right = if j < vars { step[j] } else { 0.0 };
                let change = right - left;
                let d = barrier.increment(&base, j);
                if change < 0.0 {
                    alpha = alpha.min(0.99 * (d - barrier.lo[j]) / -change);
                } else if change > 0.0 && barrier.hi[j].is_finite() {
                    alpha = alpha.min(0.99 * (barrier.hi[j] - d) / change);
                }
            }
            let current = barrier.merit(&base, t)?;
            let mut accepted = false;
            for _ in 0..60 {
                for v in 0..vars {
                    trial[v + 1] = base[v + 1] + alpha * step[v];
                }
                if let Some(value) = barrier.merit(&trial, t) {
                    if value <= current - 0.25 * alpha * decrement || decrement < 1e-9 {
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
            base.copy_from_slice(&trial);
        }
        let gap = sides / t;
        if gap <= CROSSOVER_GAP * wsum * scale || gap <= gap_target {
            let (y, states) = barrier.classify(&base, t);
            if polish(states.clone()) || gap <= gap_target {
                return Some(BarrierSolution {
                    y,
                    states,
                    newton_steps,
                });
            }
        }
        t *= GROWTH;
        if newton_steps > 20 * MAX_NEWTON {
            return None;
        }
    }
}

impl Barrier<'_, '_> {
    /// Padded targets at `base`, and each edge's state judged by whether its
    /// slack is below the barrier's natural scale `1/√t`.
    fn classify(&self, base: &[f64], t: f64) -> (Vec<f64>, Vec<EdgeState>) {
        let prep = self.prep;
        let layout = &self.layout;
        let m = prep.m;
        let mut y = vec![0.0; m + 2];
        for g in 0..layout.groups() {
            for k in layout.first[g]..=layout.last[g] {
                y[k] = base[g] + layout.offset[k];
            }
        }
        y[0] = 0.0;
        y[m + 1] = 1.0;
        let threshold = 1.0 / t.sqrt();
        let states = (0..=m)
            .map(|e| {
                if prep.lo[e] == prep.hi[e] {
                    return EdgeState::Tied;
                }
                let d = y[e + 1] - y[e];
                let below = d - prep.lo[e];
                let above = prep.hi[e] - d;
                if below <= above && below < threshold {
                    EdgeState::Lo
                } else if above < threshold {
                    EdgeState::Hi
                } else {
                    EdgeState::Free
                }
            })
            .collect();
        (y, states)
    }
}
