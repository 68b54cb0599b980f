//! Piecewise-affine inverse links and their convex calculus.
//!
//! A link `u` maps scores to probabilities. It is strictly increasing on
//! `[z_min, z_max]`, hits 0 at `z_min` and 1 at `z_max`, and saturates
//! outside that interval. Its integral `U` (normalized so `U(z_min) = 0`) is
//! the convex potential generating the canonical loss; the Legendre
//! conjugate `U*` lives on `[0, 1]` and has derivative `u⁻¹`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores closer than this (relative to `max(1, |z|)`) are treated as one.
pub const MERGE_TOL: f64 = 1e-12;
/// Probabilities attached to merged scores must agree to this tolerance.
pub const MERGE_PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct PiecewiseAffineLink {
    z: Vec<f64>,
    p: Vec<f64>,
    /// `dp/dz` on each segment.
    slope: Vec<f64>,
    /// `dz/dp` on each segment, stored separately to keep inversion exact
    /// for steep segments.
    inv_slope: Vec<f64>,
    /// `U` evaluated at each breakpoint.
    cum: Vec<f64>,
}

impl PiecewiseAffineLink {
    /// Builds a link from `(z, p)` breakpoints running from `(z_min, 0)` to
    /// `(z_max, 1)`.
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        let k = breakpoints.len();
        if k < 2 {
            return Err(Error::Construction {
                index: 0,
                reason: format!("need at least two breakpoints, got {k}"),
            });
        }
        for (i, &(z, p)) in breakpoints.iter().enumerate() {
            if !z.is_finite() || !p.is_finite() {
                return Err(Error::Construction {
                    index: i,
                    reason: format!("non-finite breakpoint ({z}, {p})"),
                });
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Construction {
                    index: i,
                    reason: format!("probability {p} outside [0, 1]"),
                });
            }
        }
        if breakpoints[0].1 != 0.0 {
            return Err(Error::Construction {
                index: 0,
                reason: format!("first probability must be 0, got {}", breakpoints[0].1),
            });
        }
        if breakpoints[k - 1].1 != 1.0 {
            return Err(Error::Construction {
                index: k - 1,
                reason: format!("last probability must be 1, got {}", breakpoints[k - 1].1),
            });
        }

        let (z, p): (Vec<f64>, Vec<f64>) = breakpoints.into_iter().unzip();
        let mut slope = Vec::with_capacity(k - 1);
        let mut inv_slope = Vec::with_capacity(k - 1);
        let mut cum = Vec::with_capacity(k);
        cum.push(0.0);
        for i in 0..k - 1 {
            let dz = z[i + 1] - z[i];
            let dp = p[i + 1] - p[i];
            if dz <= 0.0 {
                return Err(Error::Construction {
                    index: i + 1,
                    reason: format!("scores not strictly increasing ({} then {})", z[i], z[i + 1]),
                });
            }
            if dp <= 0.0 {
                return Err(Error::Construction {
                    index: i + 1,
                    reason: format!(
                        "probabilities not strictly increasing ({} then {})",
                        p[i],
                        p[i + 1]
                    ),
                });
            }
            let s = dp / dz;
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::Construction {
                    index: i + 1,
                    reason: format!("segment slope {s} is not finite and positive"),
                });
            }
            slope.push(s);
            inv_slope.push(dz / dp);
            cum.push(cum[i] + dz * 0.5 * (p[i] + p[i + 1]));
        }
        Ok(Self {
            z,
            p,
            slope,
            inv_slope,
            cum,
        })
    }

    /// The clipped affine link `z ↦ 0 ∨ (1 ∧ (a z + b))`.
    pub fn affine_clip(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::domain(format!(
                "affine clip needs a finite positive slope, got a = {a}, b = {b}"
            )));
        }
        Self::new(vec![(-b / a, 0.0), ((1.0 - b) / a, 1.0)])
    }

    /// The clipped affine link saturating at `z_min` and `z_max`.
    pub fn affine_between(z_min: f64, z_max: f64) -> Result<Self> {
        if !(z_max > z_min) {
            return Err(Error::domain(format!(
                "need z_min < z_max, got [{z_min}, {z_max}]"
            )));
        }
        Self::new(vec![(z_min, 0.0), (z_max, 1.0)])
    }

    /// Interpolates through interior `(score, probability)` points and closes
    /// the link with `(z_min, 0)` and `(z_max, 1)`.
    ///
    /// Points whose scores coincide (up to [`MERGE_TOL`]) are merged; their
    /// probabilities must then agree to [`MERGE_PROB_TOL`].
    pub fn from_points(points: &[(f64, f64)], z_min: f64, z_max: f64) -> Result<Self> {
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(points.len() + 2);
        merged.push((z_min, 0.0));
        for (i, &(z, p)) in points.iter().enumerate() {
            if !z.is_finite() || !p.is_finite() {
                return Err(Error::Construction {
                    index: i,
                    reason: format!("non-finite point ({z}, {p})"),
                });
            }
            if i > 0 {
                let (zp, pp) = points[i - 1];
                if z < zp {
                    return Err(Error::Construction {
                        index: i,
                        reason: format!("scores decrease ({zp} then {z})"),
                    });
                }
                if p < pp {
                    return Err(Error::Construction {
                        index: i,
                        reason: format!("probabilities decrease ({pp} then {p})"),
                    });
                }
            }
            let last = *merged.last().expect("non-empty");
            if merged.len() > 1 && (z - last.0).abs() <= MERGE_TOL * z.abs().max(1.0) {
                if (p - last.1).abs() > MERGE_PROB_TOL {
                    return Err(Error::Construction {
                        index: i,
                        reason: format!(
                            "duplicate score {z} carries different probabilities {} and {p}",
                            last.1
                        ),
                    });
                }
                continue;
            }
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Construction {
                    index: i,
                    reason: format!("interior probability {p} must lie in (0, 1)"),
                });
            }
            merged.push((z, p));
        }
        if merged.len() > 1 && !(z_min < merged[1].0) {
            return Err(Error::Construction {
                index: 0,
                reason: format!("z_min = {z_min} must lie below the first score {}", merged[1].0),
            });
        }
        let last = merged.last().expect("non-empty").0;
        if merged.len() > 1 && !(z_max > last) {
            return Err(Error::Construction {
                index: points.len(),
                reason: format!("z_max = {z_max} must lie above the last score {last}"),
            });
        }
        merged.push((z_max, 1.0));
        Self::new(merged)
    }

    pub fn z_min(&self) -> f64 {
        self.z[0]
    }

    pub fn z_max(&self) -> f64 {
        self.z[self.z.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.z.iter().copied().zip(self.p.iter().copied())
    }

    pub fn scores(&self) -> &[f64] {
        &self.z
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slope
    }

    /// Smallest segment slope (`n` in the Lipschitz bounds).
    pub fn min_slope(&self) -> f64 {
        self.slope.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest segment slope (`N` in the Lipschitz bounds).
    pub fn max_slope(&self) -> f64 {
        self.slope.iter().copied().fold(0.0, f64::max)
    }

    fn segment_of_score(&self, z: f64) -> usize {
        let k = self.z.partition_point(|&v| v <= z);
        k.saturating_sub(1).min(self.slope.len() - 1)
    }

    fn segment_of_prob(&self, p: f64) -> usize {
        let k = self.p.partition_point(|&v| v <= p);
        k.saturating_sub(1).min(self.slope.len() - 1)
    }

    /// `u(z)`, clamped to 0 below `z_min` and 1 above `z_max`.
    pub fn eval(&self, z: f64) -> f64 {
        if z <= self.z_min() {
            return 0.0;
        }
        if z >= self.z_max() {
            return 1.0;
        }
        let k = self.segment_of_score(z);
        (self.p[k] + self.slope[k] * (z - self.z[k])).clamp(0.0, 1.0)
    }

    /// Slope of `u` at `z` (right derivative at breakpoints, 0 outside the
    /// support).
    pub fn slope_at(&self, z: f64) -> f64 {
        if z < self.z_min() || z >= self.z_max() {
            return 0.0;
        }
        self.slope[self.segment_of_score(z)]
    }

    /// `u⁻¹(p)` for `p ∈ [0, 1]`; a probability sitting on a breakpoint maps
    /// to that breakpoint's score.
    pub fn inverse(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("probability {p} outside [0, 1]")));
        }
        Ok(self.inverse_unchecked(p))
    }

    pub(crate) fn inverse_unchecked(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return self.z_min();
        }
        if p >= 1.0 {
            return self.z_max();
        }
        let k = self.segment_of_prob(p);
        self.z[k] + (p - self.p[k]) * self.inv_slope[k]
    }

    /// `u⁻¹` continued affinely past `[0, 1]` with the end-segment slopes,
    /// together with `d u⁻¹ / dp` at `p` (right derivative at breakpoints).
    pub(crate) fn inverse_extended(&self, p: f64) -> (f64, f64) {
        let last = self.slope.len() - 1;
        if p < 0.0 {
            return (self.z_min() + p * self.inv_slope[0], self.inv_slope[0]);
        }
        if p >= 1.0 {
            return (
                self.z_max() + (p - 1.0) * self.inv_slope[last],
                self.inv_slope[last],
            );
        }
        let k = self.segment_of_prob(p);
        (self.z[k] + (p - self.p[k]) * self.inv_slope[k], self.inv_slope[k])
    }

    /// `U(z) = ∫_{z_min}^{z} u(t) dt`, with `u ≡ 0` below `z_min` and
    /// `u ≡ 1` above `z_max`.
    pub fn potential(&self, z: f64) -> f64 {
        if z <= self.z_min() {
            return 0.0;
        }
        let k_last = self.z.len() - 1;
        if z >= self.z_max() {
            return self.cum[k_last] + (z - self.z_max());
        }
        let k = self.segment_of_score(z);
        let dz = z - self.z[k];
        self.cum[k] + dz * (self.p[k] + 0.5 * self.slope[k] * dz)
    }

    /// `U*(p) = p u⁻¹(p) − U(u⁻¹(p))` on `[0, 1]`.
    pub fn conjugate(&self, p: f64) -> Result<f64> {
        let z = self.inverse(p)?;
        Ok(p * z - self.potential(z))
    }

    /// `D_U(z ‖ z') = U(z) − U(z') − (z − z') u(z')`.
    pub fn bregman(&self, z: f64, z_ref: f64) -> f64 {
        let d = self.potential(z) - self.potential(z_ref) - (z - z_ref) * self.eval(z_ref);
        d.max(0.0)
    }

    /// `D_{U*}(p ‖ p') = U*(p) − U*(p') − (p − p') u⁻¹(p')`.
    pub fn bregman_dual(&self, p: f64, p_ref: f64) -> Result<f64> {
        let z_ref = self.inverse(p_ref)?;
        let d = self.conjugate(p)? - (p_ref * z_ref - self.potential(z_ref)) - (p - p_ref) * z_ref;
        Ok(d.max(0.0))
    }
}

impl TryFrom<Vec<[f64; 2]>> for PiecewiseAffineLink {
    type Error = Error;

    fn try_from(pairs: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|[z, p]| (z, p)).collect())
    }
}

impl From<PiecewiseAffineLink> for Vec<[f64; 2]> {
    fn from(link: PiecewiseAffineLink) -> Self {
        link.breakpoints().map(|(z, p)| [z, p]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn identity() -> PiecewiseAffineLink {
        PiecewiseAffineLink::affine_clip(1.0, 0.0).unwrap()
    }

    #[test]
    fn affine_clip_endpoints() {
        let id = identity();
        assert_eq!(id.breakpoints().collect::<Vec<_>>(), vec![(0.0, 0.0), (1.0, 1.0)]);

        let l = PiecewiseAffineLink::affine_clip(2.0, 1.0).unwrap();
        assert_abs_diff_eq!(l.z_min(), -0.5);
        assert_abs_diff_eq!(l.z_max(), 0.0);

        // initialization from a width and a lower endpoint
        let (z_min0, z_max0) = (-1.0, 1.0);
        let delta = z_max0 - z_min0;
        let l = PiecewiseAffineLink::affine_clip(1.0 / delta, -z_min0 / delta).unwrap();
        assert_abs_diff_eq!(l.z_min(), z_min0, epsilon = 1e-15);
        assert_abs_diff_eq!(l.z_max(), z_max0, epsilon = 1e-15);

        assert!(matches!(
            PiecewiseAffineLink::affine_clip(0.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(PiecewiseAffineLink::affine_clip(-1.0, 1.0).is_err());
    }

    #[test]
    fn eval_clamps() {
        let id = identity();
        assert_eq!(id.eval(0.5), 0.5);
        assert_eq!(id.eval(-3.0), 0.0);
        assert_eq!(id.eval(2.0), 1.0);
    }

    #[test]
    fn inverse_examples() {
        let id = identity();
        assert_eq!(id.inverse(0.25).unwrap(), 0.25);
        let l = PiecewiseAffineLink::new(vec![(0.0, 0.0), (1.0, 0.5), (3.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(l.inverse(0.75).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(l.inverse(0.0).unwrap(), l.z_min());
        assert_eq!(l.inverse(1.0).unwrap(), l.z_max());
        assert_eq!(l.inverse(0.5).unwrap(), 1.0);
        assert!(l.inverse(1.5).is_err());
        assert!(l.inverse(-0.1).is_err());
    }

    #[test]
    fn potential_examples() {
        let id = identity();
        assert_abs_diff_eq!(id.potential(1.0), 0.5);
        assert_eq!(id.potential(0.0), 0.0);
        assert_eq!(id.potential(-4.0), 0.0);
        assert_abs_diff_eq!(id.potential(2.0), 1.5);
        // U*(1) = z_max − U(z_max)
        assert_abs_diff_eq!(id.conjugate(1.0).unwrap(), 0.5);
        assert_eq!(id.conjugate(0.0).unwrap(), 0.0);
    }

    #[test]
    fn bregman_examples() {
        let id = identity();
        assert_abs_diff_eq!(id.bregman(0.9, 0.3), 0.18, epsilon = 1e-15);
        assert_abs_diff_eq!(id.bregman_dual(0.8, 0.2).unwrap(), 0.18, epsilon = 1e-15);
        for z in [-1.0, 0.0, 0.3, 1.0, 4.0] {
            assert_eq!(id.bregman(z, z), 0.0);
        }
        assert!(id.bregman_dual(1.2, 0.5).is_err());
    }

    #[test]
    fn from_points_examples() {
        let l = PiecewiseAffineLink::from_points(&[(0.0, 0.25), (1.0, 0.75)], -0.75, 1.75).unwrap();
        assert_eq!(l.len(), 4);
        assert_abs_diff_eq!(l.slopes()[1], 0.5);

        let tent = PiecewiseAffineLink::from_points(&[(0.0, 0.5)], -1.0, 1.0).unwrap();
        assert_eq!(tent.len(), 3);
        assert_eq!(tent.eval(0.0), 0.5);

        let dup =
            PiecewiseAffineLink::from_points(&[(0.0, 0.25), (0.0, 0.25), (1.0, 0.75)], -1.0, 2.0)
                .unwrap();
        assert_eq!(dup.len(), 4);
    }

    #[test]
    fn from_points_errors_name_index() {
        let err = PiecewiseAffineLink::from_points(&[(0.0, 0.5), (1.0, 0.25)], -1.0, 2.0)
            .unwrap_err();
        assert!(matches!(err, Error::Construction { index: 1, .. }));
        let err = PiecewiseAffineLink::from_points(&[(0.0, 0.5), (0.0, 0.6)], -1.0, 2.0)
            .unwrap_err();
        assert!(matches!(err, Error::Construction { index: 1, .. }));
        assert!(PiecewiseAffineLink::from_points(&[(0.0, 0.5)], 0.0, 1.0).is_err());
        assert!(PiecewiseAffineLink::from_points(&[(0.0, 0.5)], -1.0, 0.0).is_err());
        // flat interior segment
        assert!(PiecewiseAffineLink::from_points(&[(0.0, 0.5), (1.0, 0.5)], -1.0, 2.0).is_err());
    }

    #[test]
    fn json_is_array_of_pairs() {
        let l = PiecewiseAffineLink::new(vec![(0.0, 0.0), (1.0, 0.5), (3.0, 1.0)]).unwrap();
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(s, "[[0.0,0.0],[1.0,0.5],[3.0,1.0]]");
        let back: PiecewiseAffineLink = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
        assert!(serde_json::from_str::<PiecewiseAffineLink>("[[0.0,0.0],[1.0,0.5]]").is_err());
    }
}
