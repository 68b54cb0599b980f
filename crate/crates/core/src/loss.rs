//! Proper losses for class-probability estimation, their canonical links,
//! and the equivalent Bregman forms.
//!
//! Labels come in two encodings: `y* ∈ {−1, +1}` for partial losses and
//! `y = (y* + 1) / 2 ∈ {0, 1}` for divergences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::PiecewiseAffineLink;

/// A convex differentiable generator for Bregman divergences.
pub trait ConvexGenerator {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;

    /// `D_F(x ‖ x_ref) = F(x) − F(x_ref) − (x − x_ref) F'(x_ref)`.
    fn bregman(&self, x: f64, x_ref: f64) -> f64 {
        self.value(x) - self.value(x_ref) - (x - x_ref) * self.derivative(x_ref)
    }
}

/// Generator built from a value closure and a derivative closure.
pub struct FnGenerator<F, D> {
    pub value: F,
    pub derivative: D,
}

impl<F, D> ConvexGenerator for FnGenerator<F, D>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }
}

/// The potential `U` of a learned link, with derivative `u`.
impl ConvexGenerator for PiecewiseAffineLink {
    fn value(&self, x: f64) -> f64 {
        self.potential(x)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.eval(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceLoss {
    /// `2 ℓ₁(u) = (1 − u)²`, `2 ℓ₋₁(u) = u²`, `2 L̄(u) = u (1 − u)`.
    Square,
    /// Log loss, with the logit as canonical link.
    Logistic,
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn check_star(y_star: i8) -> Result<()> {
    if y_star == 1 || y_star == -1 {
        Ok(())
    } else {
        Err(Error::domain(format!("label y* must be ±1, got {y_star}")))
    }
}

fn check_label(y: f64) -> Result<()> {
    if y == 0.0 || y == 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("label y must be 0 or 1, got {y}")))
    }
}

impl ReferenceLoss {
    pub fn name(self) -> &'static str {
        match self {
            ReferenceLoss::Square => "square",
            ReferenceLoss::Logistic => "logistic",
        }
    }

    /// `ℓ₁(c)`, the loss paid on a positive example.
    pub fn partial_loss_pos(self, c: f64) -> f64 {
        match self {
            ReferenceLoss::Square => 0.5 * (1.0 - c) * (1.0 - c),
            ReferenceLoss::Logistic => {
                if c <= 0.0 {
                    f64::INFINITY
                } else {
                    -c.ln()
                }
            }
        }
    }

    /// `ℓ₋₁(c)`, the loss paid on a negative example.
    pub fn partial_loss_neg(self, c: f64) -> f64 {
        match self {
            ReferenceLoss::Square => 0.5 * c * c,
            ReferenceLoss::Logistic => {
                if c >= 1.0 {
                    f64::INFINITY
                } else {
                    -(1.0 - c).ln()
                }
            }
        }
    }

    /// `ℓ(y*, c)` at a probability `c ∈ [0, 1]`.
    pub fn partial_loss(self, y_star: i8, c: f64) -> Result<f64> {
        check_star(y_star)?;
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::domain(format!("probability {c} outside [0, 1]")));
        }
        Ok(if y_star == 1 {
            self.partial_loss_pos(c)
        } else {
            self.partial_loss_neg(c)
        })
    }

    /// `ℓ(y*, ψ⁻¹(z))`, the loss composed with the inverse canonical link.
    pub fn composite_loss(self, y_star: i8, z: f64) -> Result<f64> {
        check_star(y_star)?;
        match self {
            // stays finite for large |z| where sigmoid(z) rounds to 0 or 1
            ReferenceLoss::Logistic => Ok(softplus(-(y_star as f64) * z)),
            ReferenceLoss::Square => self.partial_loss(y_star, self.canonical_link_inverse(z)),
        }
    }

    /// Conditional Bayes risk `L̄(π)`.
    pub fn cbr(self, pi: f64) -> f64 {
        match self {
            ReferenceLoss::Square => 0.5 * pi * (1.0 - pi),
            ReferenceLoss::Logistic => -xlogx(pi) - xlogx(1.0 - pi),
        }
    }

    /// `L̄'(π)`; infinite at the logistic boundary.
    pub fn cbr_derivative(self, pi: f64) -> f64 {
        -self.canonical_link(pi)
    }

    /// `ψ = −L̄'`.
    pub fn canonical_link(self, c: f64) -> f64 {
        match self {
            ReferenceLoss::Square => c - 0.5,
            ReferenceLoss::Logistic => {
                if c <= 0.0 {
                    f64::NEG_INFINITY
                } else if c >= 1.0 {
                    f64::INFINITY
                } else {
                    (c / (1.0 - c)).ln()
                }
            }
        }
    }

    pub fn canonical_link_inverse(self, z: f64) -> f64 {
        match self {
            ReferenceLoss::Square => (z + 0.5).clamp(0.0, 1.0),
            ReferenceLoss::Logistic => sigmoid(z),
        }
    }

    /// `(−L̄)*(z) = sup_{u ∈ [0,1]} z u + L̄(u)`, in closed form.
    pub fn neg_cbr_conjugate(self, z: f64) -> f64 {
        match self {
            ReferenceLoss::Square => {
                if z <= -0.5 {
                    0.0
                } else if z >= 0.5 {
                    z
                } else {
                    0.5 * (z + 0.5) * (z + 0.5)
                }
            }
            ReferenceLoss::Logistic => softplus(z),
        }
    }

    /// `D_{−L̄}(y ‖ c)`.
    pub fn bregman_primal(self, y: f64, c: f64) -> Result<f64> {
        check_label(y)?;
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::domain(format!("probability {c} outside [0, 1]")));
        }
        if y == c {
            return Ok(0.0);
        }
        let slope = self.cbr_derivative(c);
        if !slope.is_finite() {
            return Ok(f64::INFINITY);
        }
        Ok(self.cbr(c) - self.cbr(y) + (y - c) * slope)
    }

    /// `D_{(−L̄)*}(ψ(c) ‖ ψ(y))`.
    ///
    /// When `ψ(y)` is infinite (logistic, `y ∈ {0, 1}`) the divergence is
    /// taken as its limit, `(−L̄)*(ψ(c)) − ψ(c) y − L̄(y)`.
    pub fn bregman_dual(self, y: f64, c: f64) -> Result<f64> {
        check_label(y)?;
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::domain(format!("probability {c} outside [0, 1]")));
        }
        if y == c {
            return Ok(0.0);
        }
        let a = self.canonical_link(c);
        if !a.is_finite() {
            return Ok(f64::INFINITY);
        }
        let b = self.canonical_link(y);
        let d = if b.is_finite() {
            let grad_b = self.canonical_link_inverse(b);
            self.neg_cbr_conjugate(a) - self.neg_cbr_conjugate(b) - (a - b) * grad_b
        } else {
            self.neg_cbr_conjugate(a) - a * y - self.cbr(y)
        };
        Ok(d)
    }

    /// Convex surrogate `F(z) = (−L̄)*(−z)`.
    pub fn convex_surrogate(self, z: f64) -> f64 {
        self.neg_cbr_conjugate(-z)
    }

    /// The generator `−L̄` as a [`ConvexGenerator`].
    pub fn neg_cbr(self) -> NegBayesRisk {
        NegBayesRisk(self)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NegBayesRisk(pub ReferenceLoss);

impl ConvexGenerator for NegBayesRisk {
    fn value(&self, x: f64) -> f64 {
        -self.0.cbr(x)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.0.canonical_link(x)
    }
}

/// `(−L̄)*(−z)` by maximizing `−z u + L̄(u)` over `u ∈ [0, 1]`.
///
/// `neg_cbr` must be convex on `[0, 1]`; the maximization is a golden-section
/// search on the concave objective.
pub fn convex_surrogate_numeric(neg_cbr: impl Fn(f64) -> f64, z: f64) -> f64 {
    let objective = |u: f64| -z * u - neg_cbr(u);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..200 {
        if b - a < 1e-15 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    [objective(0.0), objective(1.0), objective(0.5 * (a + b))]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Bregman information `E[D_F(Z ‖ E[Z])]` of a weighted sample.
pub fn bregman_information<G: ConvexGenerator + ?Sized>(
    generator: &G,
    samples: &[f64],
    weights: &[f64],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("Bregman information of an empty sample"));
    }
    if samples.len() != weights.len() {
        return Err(Error::domain(format!(
            "{} samples but {} weights",
            samples.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::domain("weights must be non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("weights sum to {total}, expected 1")));
    }
    let mean: f64 = samples.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total;
    Ok(samples
        .iter()
        .zip(weights)
        .map(|(&x, &w)| w * generator.bregman(x, mean))
        .sum::<f64>()
        / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn partial_form_examples() {
        let sq = ReferenceLoss::Square;
        assert_abs_diff_eq!(sq.partial_loss(1, 0.5).unwrap(), 0.125);
        assert_eq!(ReferenceLoss::Logistic.partial_loss(1, 1.0).unwrap(), 0.0);
        assert_eq!(ReferenceLoss::Logistic.canonical_link_inverse(0.0), 0.5);
        assert_eq!(
            ReferenceLoss::Logistic.partial_loss(1, 0.0).unwrap(),
            f64::INFINITY
        );
        assert!(sq.partial_loss(0, 0.5).is_err());
        assert_abs_diff_eq!(sq.composite_loss(1, 0.0).unwrap(), 0.125);
    }

    #[test]
    fn bregman_form_examples() {
        let sq = ReferenceLoss::Square;
        let lg = ReferenceLoss::Logistic;
        assert_abs_diff_eq!(sq.bregman_primal(1.0, 0.5).unwrap(), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(sq.bregman_dual(1.0, 0.5).unwrap(), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(lg.bregman_primal(1.0, 0.25).unwrap(), 4f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(lg.bregman_dual(1.0, 0.25).unwrap(), 4f64.ln(), epsilon = 1e-12);
        assert_eq!(lg.bregman_primal(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(lg.bregman_primal(1.0, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(lg.bregman_dual(0.0, 1.0).unwrap(), f64::INFINITY);
        // generic divergence of a point to itself
        assert_eq!(lg.neg_cbr().bregman(0.3, 0.3), 0.0);
    }

    #[test]
    fn surrogate_examples() {
        let lg = ReferenceLoss::Logistic;
        assert_abs_diff_eq!(lg.convex_surrogate(0.0), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(ReferenceLoss::Square.convex_surrogate(0.0), 0.125);
        let numeric = convex_surrogate_numeric(|u| -ReferenceLoss::Square.cbr(u), 0.0);
        assert_abs_diff_eq!(numeric, 0.125, epsilon = 1e-12);
        for loss in [ReferenceLoss::Square, ReferenceLoss::Logistic] {
            let mut prev = f64::INFINITY;
            for i in -40..=40 {
                let f = loss.convex_surrogate(i as f64 * 0.1);
                assert!(f <= prev + 1e-15);
                prev = f;
            }
        }
    }

    #[test]
    fn bregman_information_examples() {
        let half_square = FnGenerator {
            value: |x: f64| 0.5 * x * x,
            derivative: |x: f64| x,
        };
        assert_eq!(
            bregman_information(&half_square, &[0.3, 0.3, 0.3], &[0.2, 0.3, 0.5]).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            bregman_information(&half_square, &[0.0, 1.0], &[0.5, 0.5]).unwrap(),
            0.125,
            epsilon = 1e-15
        );
        assert!(bregman_information(&half_square, &[], &[]).is_err());
        assert!(bregman_information(&half_square, &[1.0], &[0.5]).is_err());
    }
}
