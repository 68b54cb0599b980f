//! Link and implied loss curves of a learned link.

use std::path::Path;

use bregmantron::PiecewiseAffineLink;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::output::sig12;

/// Share of the support added on each side of the grid.
pub const MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub v: f64,
    pub u: f64,
    pub loss_pos: f64,
    pub loss_neg: f64,
}

/// Canonical losses of the link on an even grid over the padded support.
///
/// The losses are `D_U(v ‖ u⁻¹(y))`, which equals `D_{U*}(y ‖ u(v))` on the
/// support and keeps the derivative `u(v) − y` beyond it.
pub fn export_curves(link: &PiecewiseAffineLink, grid_size: usize) -> Result<Vec<CurveRow>> {
    if grid_size < 2 {
        return Err(HarnessError::Spec(format!("grid needs at least 2 points, got {grid_size}")));
    }
    let (lo, hi) = (link.z_min(), link.z_max());
    let pad = MARGIN * (hi - lo);
    let (start, end) = (lo - pad, hi + pad);
    let step = (end - start) / (grid_size - 1) as f64;
    let rows: Vec<CurveRow> = (0..grid_size)
        .map(|k| {
            let v = if k + 1 == grid_size { end } else { start + k as f64 * step };
            CurveRow {
                v,
                u: link.eval(v),
                loss_pos: link.bregman(v, hi),
                loss_neg: link.bregman(v, lo),
            }
        })
        .collect();
    for row in &rows {
        let potential = link.potential(row.v);
        if (row.loss_neg - potential).abs() > 1e-9 * (1.0 + potential.abs()) {
            return Err(HarnessError::Spec(format!(
                "negative-class loss {} differs from U(v) = {potential} at v = {}",
                row.loss_neg, row.v
            )));
        }
    }
    Ok(rows)
}

/// `u(0) − 1/2`; nonzero when the link is not symmetric about one half.
pub fn asymmetry_at_zero(link: &PiecewiseAffineLink) -> f64 {
    link.eval(0.0) - 0.5
}

pub fn write_curves(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["v", "u", "loss_pos", "loss_neg"])?;
    for row in rows {
        writer.write_record([sig12(row.v), sig12(row.u), sig12(row.loss_pos), sig12(row.loss_neg)])?;
    }
    writer.flush().map_err(|source| HarnessError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_clip_negative_loss_is_half_square() {
        let link = PiecewiseAffineLink::affine_clip(1.0, 0.0).unwrap();
        let rows = export_curves(&link, 101).unwrap();
        for row in rows.iter().filter(|r| (0.0..=1.0).contains(&r.v)) {
            assert!((row.loss_neg - 0.5 * row.v * row.v).abs() < 1e-12);
        }
        assert_eq!(rows.first().unwrap().v, -0.1);
        assert_eq!(rows.last().unwrap().v, 1.1);
    }

    #[test]
    fn positive_loss_slope_is_link_minus_one() {
        let link = PiecewiseAffineLink::new(vec![(-1.0, 0.0), (0.5, 0.2), (2.0, 1.0)]).unwrap();
        let rows = export_curves(&link, 400).unwrap();
        for pair in rows.windows(3) {
            let slope = (pair[2].loss_pos - pair[0].loss_pos) / (pair[2].v - pair[0].v);
            let expected = pair[1].u - 1.0;
            // one grid cell of curvature at most
            assert!((slope - expected).abs() <= 0.02, "{slope} vs {expected} at {}", pair[1].v);
        }
    }

    #[test]
    fn asymmetry_is_reported() {
        let link = PiecewiseAffineLink::new(vec![(-1.0, 0.0), (0.0, 0.3), (1.0, 1.0)]).unwrap();
        assert!((asymmetry_at_zero(&link) + 0.2).abs() < 1e-12);
        assert!(export_curves(&link, 1).is_err());
    }
}
