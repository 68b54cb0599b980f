//! Dataset selectors: `synth`, or `<mnist|fmnist>:<classes>/<classes>` with
//! classes given as comma-separated digits or as `odd` / `even`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bregmantron::data::{binarize_task, load_idx, prepare, synth_gaussian};
use bregmantron::Dataset;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Synthetic sample size; half trains, half tests.
pub const SYNTH_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageSource {
    Mnist,
    Fmnist,
}

impl ImageSource {
    pub fn dir_name(self) -> &'static str {
        match self {
            ImageSource::Mnist => "mnist",
            ImageSource::Fmnist => "fmnist",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DatasetSpec {
    Synth,
    Images {
        source: ImageSource,
        positive: Vec<u8>,
        negative: Vec<u8>,
    },
}

pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

fn parse_classes(selector: &str, text: &str) -> Result<Vec<u8>> {
    let bad = |reason: String| HarnessError::Selector {
        selector: selector.to_string(),
        reason,
    };
    match text {
        "odd" => return Ok(vec![1, 3, 5, 7, 9]),
        "even" => return Ok(vec![0, 2, 4, 6, 8]),
        _ => {}
    }
    text.split(',')
        .map(|c| {
            c.trim()
                .parse::<u8>()
                .ok()
                .filter(|&d| d <= 9)
                .ok_or_else(|| bad(format!("class {c:?} is not a digit 0-9")))
        })
        .collect()
}

fn format_classes(classes: &[u8]) -> String {
    if classes == [1, 3, 5, 7, 9] {
        return "odd".into();
    }
    if classes == [0, 2, 4, 6, 8] {
        return "even".into();
    }
    classes
        .iter()
        .map(u8::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl FromStr for DatasetSpec {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "synth" {
            return Ok(DatasetSpec::Synth);
        }
        let bad = |reason: &str| HarnessError::Selector {
            selector: s.to_string(),
            reason: reason.to_string(),
        };
        let (source, task) = s
            .split_once(':')
            .ok_or_else(|| bad("expected synth or <mnist|fmnist>:<pos>/<neg>"))?;
        let source = match source {
            "mnist" => ImageSource::Mnist,
            "fmnist" => ImageSource::Fmnist,
            other => return Err(bad(&format!("unknown source {other:?}"))),
        };
        let (pos, neg) = task
            .split_once('/')
            .ok_or_else(|| bad("classes must read <pos>/<neg>"))?;
        Ok(DatasetSpec::Images {
            source,
            positive: parse_classes(s, pos)?,
            negative: parse_classes(s, neg)?,
        })
    }
}

impl fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSpec::Synth => write!(f, "synth"),
            DatasetSpec::Images {
                source,
                positive,
                negative,
            } => write!(
                f,
                "{}:{}/{}",
                source.dir_name(),
                format_classes(positive),
                format_classes(negative)
            ),
        }
    }
}

impl TryFrom<String> for DatasetSpec {
    type Error = HarnessError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DatasetSpec> for String {
    fn from(spec: DatasetSpec) -> String {
        spec.to_string()
    }
}

/// `$BREGMANTRON_DATA_DIR`, else `data` under the current directory.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os("BREGMANTRON_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn idx_pair(dir: &Path, prefix: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{prefix}-images-idx3-ubyte")),
        dir.join(format!("{prefix}-labels-idx1-ubyte")),
    )
}

impl DatasetSpec {
    /// Loads the train/test split, with a bias feature when `add_bias`.
    /// `seed` drives the synthetic draw.
    pub fn load(&self, data_dir: &Path, seed: u64, add_bias: bool) -> Result<Split> {
        let name = self.to_string();
        let (train, test) = match self {
            DatasetSpec::Synth => {
                let all = synth_gaussian(SYNTH_SIZE, seed)?;
                let half = SYNTH_SIZE / 2;
                (all.slice(0, half)?, all.slice(half, SYNTH_SIZE)?)
            }
            DatasetSpec::Images {
                source,
                positive,
                negative,
            } => {
                let dir = data_dir.join(source.dir_name());
                let load = |prefix: &str| -> Result<Dataset> {
                    let (images, labels) = idx_pair(&dir, prefix);
                    let raw = load_idx(&images, &labels)
                        .map_err(|e| HarnessError::from(e).context(format!("loading {}", images.display())))?;
                    Ok(binarize_task(&raw, positive, negative)?)
                };
                (load("train")?, load("t10k")?)
            }
        };
        Ok(Split {
            train: prepare(train, add_bias)?.with_name(format!("{name} train")),
            test: prepare(test, add_bias)?.with_name(format!("{name} test")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selectors_round_trip() {
        for text in ["synth", "mnist:0/8", "fmnist:odd/even", "fmnist:2/4", "mnist:1,7/3"] {
            let spec: DatasetSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        let spec: DatasetSpec = "fmnist:odd/even".parse().unwrap();
        assert_eq!(
            spec,
            DatasetSpec::Images {
                source: ImageSource::Fmnist,
                positive: vec![1, 3, 5, 7, 9],
                negative: vec![0, 2, 4, 6, 8],
            }
        );
    }

    #[test]
    fn malformed_selectors_are_rejected() {
        for text in ["", "cifar:0/1", "mnist:0", "mnist:0/x", "mnist:12/3"] {
            assert!(text.parse::<DatasetSpec>().is_err(), "{text}");
        }
    }

    #[test]
    fn synth_split_is_balanced() {
        let split = DatasetSpec::Synth.load(Path::new("."), 1, true).unwrap();
        assert_eq!(split.train.len(), SYNTH_SIZE / 2);
        assert_eq!(split.train.positive_rate(), 0.5);
        assert_eq!(split.test.positive_rate(), 0.5);
        assert_eq!(split.train.dim(), 3);
    }
}
