//! Binary classification datasets: IDX image archives, task binarization,
//! and the two-Gaussian synthetic task.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Row-major features with {0, 1} labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
    max_norm: f64,
    pub name: String,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<f64>, dim: usize) -> Result<Self> {
        let m = labels.len();
        if m == 0 {
            return Err(Error::domain("dataset needs at least one example"));
        }
        if dim == 0 || features.len() != m * dim {
            return Err(Error::domain(format!(
                "{} feature values do not form {m} rows of dimension {dim}",
                features.len()
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature {} of example {}", i % dim, i / dim)));
        }
        if let Some(i) = labels.iter().position(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::domain(format!("label {} of example {i} is not 0 or 1", labels[i])));
        }
        let max_norm = features
            .chunks_exact(dim)
            .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Ok(Self {
            features,
            labels,
            dim,
            max_norm,
            name: String::new(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.features.chunks_exact(self.dim)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// `X = maxᵢ ‖xᵢ‖₂`.
    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    pub fn positive_rate(&self) -> f64 {
        self.labels.iter().sum::<f64>() / self.len() as f64
    }

    /// `wᵀxᵢ` for every example.
    pub fn scores(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.dim);
        self.rows().map(|x| dot(x, w)).collect()
    }

    /// Examples `[start, end)` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::domain(format!(
                "slice [{start}, {end}) of a dataset with {} examples",
                self.len()
            )));
        }
        Ok(Self::new(
            self.features[start * self.dim..end * self.dim].to_vec(),
            self.labels[start..end].to_vec(),
            self.dim,
        )?
        .with_name(self.name.clone()))
    }
}

/// Inner product of equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Images and class labels as read from an IDX pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RawImages {
    pub rows: usize,
    pub cols: usize,
    pixels: Vec<u8>,
    classes: Vec<u8>,
}

impl RawImages {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    /// Image `i` scaled to `[0, 1]`.
    pub fn image(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        let n = self.pixels_per_image();
        self.pixels[i * n..(i + 1) * n]
            .iter()
            .map(|&b| f64::from(b) / 255.0)
    }

    /// All images as an `m × (rows · cols)` row-major matrix in `[0, 1]`.
    pub fn scaled_pixels(&self) -> Vec<f64> {
        self.pixels.iter().map(|&b| f64::from(b) / 255.0).collect()
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse {
            offset,
            reason: "truncated header".into(),
        })
}

/// Parses an IDX3 image file into `(rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            reason: format!("image magic {magic} (expected {IMAGE_MAGIC})"),
        });
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let expected = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Parse {
            offset: 4,
            reason: "image dimensions overflow".into(),
        })?;
    let payload = &bytes[16..];
    if payload.len() != expected {
        return Err(Error::Parse {
            offset: 16 + payload.len().min(expected),
            reason: format!(
                "expected {expected} pixel bytes for {count} images of {rows}×{cols}, found {}",
                payload.len()
            ),
        });
    }
    Ok((rows, cols, payload.to_vec()))
}

/// Parses an IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            reason: format!("label magic {magic} (expected {LABEL_MAGIC})"),
        });
    }
    let count = read_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() != count {
        return Err(Error::Parse {
            offset: 8 + payload.len().min(count),
            reason: format!("expected {count} label bytes, found {}", payload.len()),
        });
    }
    Ok(payload.to_vec())
}

pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<RawImages> {
    let (rows, cols, pixels) = parse_idx_images(image_bytes)?;
    let classes = parse_idx_labels(label_bytes)?;
    let count = if rows * cols == 0 { 0 } else { pixels.len() / (rows * cols) };
    if count != classes.len() {
        return Err(Error::Parse {
            offset: 4,
            reason: format!("{count} images but {} labels", classes.len()),
        });
    }
    Ok(RawImages {
        rows,
        cols,
        pixels,
        classes,
    })
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<RawImages> {
    parse_idx(&fs::read(images_path)?, &fs::read(labels_path)?)
}

/// Keeps the listed classes, mapping `positive` to label 1 and `negative` to
/// label 0, in the original order.
pub fn binarize_task(raw: &RawImages, positive: &[u8], negative: &[u8]) -> Result<Dataset> {
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::domain("both class sets must be non-empty"));
    }
    if let Some(c) = positive.iter().find(|c| negative.contains(c)) {
        return Err(Error::domain(format!("class {c} is both positive and negative")));
    }
    let dim = raw.rows * raw.cols;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, class) in raw.classes.iter().enumerate() {
        let label = if positive.contains(class) {
            1.0
        } else if negative.contains(class) {
            0.0
        } else {
            continue;
        };
        features.extend(raw.image(i));
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::domain(format!(
            "no images of classes {positive:?} or {negative:?}"
        )));
    }
    Dataset::new(features, labels, dim)
}

/// Standard normal pair by the Marsaglia polar method.
fn normal_pair(rng: &mut impl Rng) -> (f64, f64) {
    loop {
        let u: f64 = rng.gen_range(-1.0..1.0);
        let v: f64 = rng.gen_range(-1.0..1.0);
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            let f = (-2.0 * s.ln() / s).sqrt();
            return (u * f, v * f);
        }
    }
}

/// `m / 2` draws from `N((1, 1), I)` labelled 1, interleaved with `m / 2`
/// draws from `N((−1, −1), I)` labelled 0.
pub fn synth_gaussian(m: usize, seed: u64) -> Result<Dataset> {
    if m == 0 || m % 2 != 0 {
        return Err(Error::domain(format!("synthetic sample size must be even and positive, got {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(2 * m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let (a, b) = normal_pair(&mut rng);
        let (mean, label) = if i % 2 == 0 { (1.0, 1.0) } else { (-1.0, 0.0) };
        features.push(mean + a);
        features.push(mean + b);
        labels.push(label);
    }
    Ok(Dataset::new(features, labels, 2)?.with_name("synth"))
}

/// Optionally appends a constant feature equal to 1.
pub fn prepare(dataset: Dataset, add_bias: bool) -> Result<Dataset> {
    if !add_bias {
        return Ok(dataset);
    }
    let dim = dataset.dim + 1;
    let mut features = Vec::with_capacity(dataset.len() * dim);
    for row in dataset.rows() {
        features.extend_from_slice(row);
        features.push(1.0);
    }
    let name = dataset.name.clone();
    Ok(Dataset::new(features, dataset.labels, dim)?.with_name(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_fixture() -> Vec<u8> {
        let mut bytes = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
        bytes.extend([0, 51, 102, 255, 255, 0, 0, 153]);
        bytes
    }

    fn label_fixture() -> Vec<u8> {
        vec![0, 0, 8, 1, 0, 0, 0, 2, 8, 0]
    }

    #[test]
    fn idx_fixture_round_trips() {
        let raw = parse_idx(&image_fixture(), &label_fixture()).unwrap();
        assert_eq!((raw.rows, raw.cols, raw.len()), (2, 2, 2));
        assert_eq!(
            raw.scaled_pixels(),
            vec![0.0, 0.2, 0.4, 1.0, 1.0, 0.0, 0.0, 0.6]
        );
        assert_eq!(raw.classes(), &[8, 0]);
    }

    #[test]
    fn idx_errors_name_offsets() {
        let mut bad = image_fixture();
        bad[3] = 4;
        assert!(matches!(
            parse_idx_images(&bad),
            Err(Error::Parse { offset: 0, .. })
        ));
        let truncated = &image_fixture()[..20];
        assert!(matches!(
            parse_idx_images(truncated),
            Err(Error::Parse { offset: 20, .. })
        ));
        assert!(matches!(
            parse_idx_images(&image_fixture()[..10]),
            Err(Error::Parse { offset: 8, .. })
        ));
        let mut labels = label_fixture();
        labels.push(3);
        assert!(matches!(
            parse_idx(&image_fixture(), &labels),
            Err(Error::Parse { .. })
        ));
        assert!(parse_idx_labels(&image_fixture()).is_err());
    }

    #[test]
    fn binarize_keeps_order_and_rejects_degenerate_tasks() {
        let raw = parse_idx(&image_fixture(), &label_fixture()).unwrap();
        let task = binarize_task(&raw, &[0], &[8]).unwrap();
        assert_eq!(task.labels(), &[0.0, 1.0]);
        assert_eq!(task.row(1), &[1.0, 0.0, 0.0, 0.6]);
        assert!(binarize_task(&raw, &[0], &[]).is_err());
        assert!(binarize_task(&raw, &[0], &[0]).is_err());
        assert!(binarize_task(&raw, &[3], &[4]).is_err());
    }

    #[test]
    fn synth_is_balanced_and_deterministic() {
        let a = synth_gaussian(1000, 3).unwrap();
        assert_eq!(a.labels().iter().sum::<f64>(), 500.0);
        assert_eq!(a, synth_gaussian(1000, 3).unwrap());
        assert_ne!(a, synth_gaussian(1000, 4).unwrap());
        assert!(synth_gaussian(7, 0).is_err());
    }

    #[test]
    fn prepare_appends_bias() {
        let d = Dataset::new(vec![1.0, 1.0, 0.0, 1.0], vec![1.0, 0.0], 2).unwrap();
        assert!((d.max_norm() - 2f64.sqrt()).abs() < 1e-15);
        let p = prepare(d.clone(), true).unwrap();
        assert_eq!(p.dim(), 3);
        assert_eq!(p.row(1), &[0.0, 1.0, 1.0]);
        assert_eq!(prepare(d.clone(), false).unwrap(), d);
    }
}
