#![allow(dead_code)]

use bregmantron::{Dataset, PiecewiseAffineLink};
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Link starting at `z0` whose segments have the given relative widths and
/// slopes; widths are rescaled so the link climbs exactly from 0 to 1.
pub fn link_from_parts(widths: &[f64], slopes: &[f64], z0: f64) -> PiecewiseAffineLink {
    let rise: f64 = widths.iter().zip(slopes).map(|(w, s)| w * s).sum();
    let mut points = vec![(z0, 0.0)];
    let (mut z, mut p) = (z0, 0.0);
    for (i, (w, s)) in widths.iter().zip(slopes).enumerate() {
        let dz = w / rise;
        z += dz;
        p += dz * s;
        points.push((z, if i + 1 == widths.len() { 1.0 } else { p }));
    }
    PiecewiseAffineLink::new(points).unwrap()
}

/// A random link with `segments` pieces whose slopes lie in `[lo, hi]`.
pub fn random_link(rng: &mut impl Rng, segments: usize, lo: f64, hi: f64) -> PiecewiseAffineLink {
    let widths: Vec<f64> = (0..segments).map(|_| rng.gen_range(0.05..1.0)).collect();
    let slopes: Vec<f64> = (0..segments).map(|_| rng.gen_range(lo..=hi)).collect();
    link_from_parts(&widths, &slopes, rng.gen_range(-2.0..0.0))
}

/// Links with one to eight segments and slopes spanning two decades.
pub fn links() -> impl Strategy<Value = PiecewiseAffineLink> {
    (1usize..=8)
        .prop_flat_map(|k| {
            (
                proptest::collection::vec(0.05f64..1.0, k),
                proptest::collection::vec(0.1f64..10.0, k),
                -2.0f64..0.0,
            )
        })
        .prop_map(|(widths, slopes, z0)| link_from_parts(&widths, &slopes, z0))
}

/// `m` examples in `dim` dimensions with features in `[-1, 1]` and both
/// labels present.
pub fn random_dataset(rng: &mut impl Rng, m: usize, dim: usize) -> Dataset {
    let features: Vec<f64> = (0..m * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let labels: Vec<f64> = (0..m)
        .map(|i| match i {
            0 => 1.0,
            1 => 0.0,
            _ => f64::from(rng.gen_bool(0.5)),
        })
        .collect();
    Dataset::new(features, labels, dim).unwrap()
}
