//! Loss transfer: learn a link on one task, freeze it, and train only the
//! classifier on another.

use std::path::PathBuf;

use bregmantron::train::{train_with_fixed_link, EtaMode};
use bregmantron::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::experiment::{run_experiment, ExperimentSpec, Method, TrainedModel};
use crate::output::{ensure_dir, write_json};
use crate::tasks::{default_data_dir, DatasetSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSpec {
    pub source: DatasetSpec,
    pub target: DatasetSpec,
    #[serde(default)]
    pub config: TrainConfig,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSummary {
    pub source: String,
    pub target: String,
    pub source_auc: f64,
    pub source_logistic_auc: f64,
    pub transfer_auc: f64,
    pub target_logistic_auc: f64,
    pub target_direct_auc: f64,
}

pub fn run_transfer(spec: &TransferSpec) -> Result<TransferSummary> {
    let eta = match spec.config.eta {
        EtaMode::Fixed { eta } => eta,
        EtaMode::Theorem2 { .. } => {
            return Err(HarnessError::Spec(
                "transfer training uses a fixed learning rate".into(),
            ))
        }
    };
    let experiment = |dataset: &DatasetSpec, method: Method| ExperimentSpec {
        dataset: dataset.clone(),
        method,
        config: spec.config.clone(),
        output: None,
        data_dir: spec.data_dir.clone(),
    };
    let source = run_experiment(&experiment(&spec.source, Method::Bregmantron))?;
    let source_logistic = run_experiment(&experiment(&spec.source, Method::logistic()))?;
    let target_logistic = run_experiment(&experiment(&spec.target, Method::logistic()))?;
    let target_direct = run_experiment(&experiment(&spec.target, Method::Bregmantron))?;

    let TrainedModel::Link { link, .. } = source.model else {
        unreachable!("BregmanTron runs yield a link model");
    };
    let split = spec
        .target
        .load(&spec.data_dir, spec.config.seed, spec.config.add_bias)?;
    let w = train_with_fixed_link(&split.train, &link, eta, spec.config.iterations)
        .map_err(|e| HarnessError::from(e).context(format!("transfer training on {}", spec.target)))?;
    let transferred = TrainedModel::Link { w, link };

    let summary = TransferSummary {
        source: spec.source.to_string(),
        target: spec.target.to_string(),
        source_auc: source.summary.auc_test,
        source_logistic_auc: source_logistic.summary.auc_test,
        transfer_auc: transferred.auc(&split.test)?,
        target_logistic_auc: target_logistic.summary.auc_test,
        target_direct_auc: target_direct.summary.auc_test,
    };
    if let Some(dir) = &spec.output {
        ensure_dir(dir)?;
        write_json(&dir.join("transfer_model.json"), &transferred)?;
        write_json(&dir.join("transfer_summary.json"), &summary)?;
    }
    Ok(summary)
}
