//! Proper losses against their Bregman forms and canonical links.

mod common;

use bregmantron::loss::{bregman_information, convex_surrogate_numeric, ConvexGenerator};
use bregmantron::ReferenceLoss;
use proptest::prelude::*;

const LOSSES: [ReferenceLoss; 2] = [ReferenceLoss::Square, ReferenceLoss::Logistic];

#[test]
fn partial_loss_equals_both_bregman_forms() {
    for loss in LOSSES {
        for k in 1..=99 {
            let c = k as f64 / 100.0;
            for y_star in [-1i8, 1] {
                let y = f64::from((y_star + 1) / 2);
                let partial = loss.partial_loss(y_star, c).unwrap();
                let primal = loss.bregman_primal(y, c).unwrap();
                let dual = loss.bregman_dual(y, c).unwrap();
                assert!((partial - primal).abs() <= 1e-9, "{loss:?} y*={y_star} c={c}");
                assert!((partial - dual).abs() <= 1e-9, "{loss:?} y*={y_star} c={c}");
            }
        }
    }
}

#[test]
fn composite_loss_goes_through_the_inverse_link() {
    for loss in LOSSES {
        for k in -20..=20 {
            let z = k as f64 / 50.0;
            for y_star in [-1i8, 1] {
                let direct = loss.composite_loss(y_star, z).unwrap();
                let c = loss.canonical_link_inverse(z);
                let composed = loss.partial_loss(y_star, c).unwrap();
                assert!((direct - composed).abs() <= 1e-12, "{loss:?} z={z}");
            }
        }
    }
}

#[test]
fn canonical_link_is_minus_the_risk_derivative() {
    let h = 1e-6;
    for loss in LOSSES {
        for k in 1..=99 {
            let c = k as f64 / 100.0;
            let numeric = -(loss.cbr(c + h) - loss.cbr(c - h)) / (2.0 * h);
            assert!((numeric - loss.canonical_link(c)).abs() <= 1e-7, "{loss:?} c={c}");
        }
    }
}

#[test]
fn surrogate_matches_numeric_conjugate() {
    for loss in LOSSES {
        for k in -40..=40 {
            let z = k as f64 / 10.0;
            let numeric = convex_surrogate_numeric(|u| -loss.cbr(u), z);
            assert!((numeric - loss.convex_surrogate(z)).abs() <= 1e-9, "{loss:?} z={z}");
        }
    }
}

#[test]
fn canonical_composite_loss_is_the_surrogate_of_the_margin() {
    // square saturates outside |z| < 1/2
    for (loss, range) in [(ReferenceLoss::Square, 0.45), (ReferenceLoss::Logistic, 6.0)] {
        for k in -30..=30 {
            let z = range * k as f64 / 30.0;
            for y_star in [-1i8, 1] {
                let margin = f64::from(y_star) * z;
                let lhs = loss.composite_loss(y_star, z).unwrap();
                assert!((lhs - loss.convex_surrogate(margin)).abs() <= 1e-12, "{loss:?} z={z}");
            }
        }
    }
}

proptest! {
    #[test]
    fn truth_minimizes_expected_loss(pi in 0.01f64..0.99, c in 0.001f64..0.999) {
        for loss in LOSSES {
            let risk = |c: f64| pi * loss.partial_loss_pos(c) + (1.0 - pi) * loss.partial_loss_neg(c);
            prop_assert!(risk(c) >= risk(pi) - 1e-12);
            prop_assert!((risk(pi) - loss.cbr(pi)).abs() <= 1e-12);
        }
    }

    #[test]
    fn mean_minimizes_expected_divergence(
        samples in proptest::collection::vec(0.01f64..0.99, 1..20),
        c in 0.01f64..0.99,
    ) {
        let weights = vec![1.0 / samples.len() as f64; samples.len()];
        for loss in LOSSES {
            let generator = loss.neg_cbr();
            let info = bregman_information(&generator, &samples, &weights).unwrap();
            let spread: f64 = samples
                .iter()
                .zip(&weights)
                .map(|(&x, w)| w * generator.bregman(x, c))
                .sum();
            prop_assert!(info <= spread + 1e-12);
        }
    }

    #[test]
    fn link_potential_information_is_minimal_at_the_mean(
        link in common::links(),
        fractions in proptest::collection::vec(0.0f64..1.0, 1..20),
        c in 0.0f64..1.0,
    ) {
        let span = link.z_max() - link.z_min();
        let samples: Vec<f64> = fractions.iter().map(|f| link.z_min() + f * span).collect();
        let weights = vec![1.0 / samples.len() as f64; samples.len()];
        let info = bregman_information(&link, &samples, &weights).unwrap();
        let c = link.z_min() + c * span;
        let spread: f64 = samples.iter().zip(&weights).map(|(&x, w)| w * link.bregman(x, c)).sum();
        prop_assert!(info <= spread + 1e-12);
    }
}
