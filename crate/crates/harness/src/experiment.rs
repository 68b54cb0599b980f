use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use bregmantron::baselines::{glmtron_fit, logistic_fit, logistic_step_size, slisotron_fit};
use bregmantron::data::dot;
use bregmantron::train::{train_monitored, IterationRecord, Variant};
use bregmantron::{auc, BaselineModel, Dataset, PiecewiseAffineLink, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::output::{ensure_dir, write_json, write_trace};
use crate::tasks::{default_data_dir, DatasetSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Method {
    /// Full-batch gradient descent; `step_size` defaults to
    /// `4 / λ_max(E[x xᵀ])`.
    Logistic {
        #[serde(default = "default_epochs")]
        epochs: usize,
        #[serde(default)]
        step_size: Option<f64>,
    },
    Glmtron,
    Slisotron,
    /// The variant comes from the training config.
    Bregmantron,
}

fn default_epochs() -> usize {
    300
}

impl Method {
    pub fn logistic() -> Self {
        Method::Logistic {
            epochs: default_epochs(),
            step_size: None,
        }
    }

    pub fn label(&self, variant: Variant) -> String {
        match self {
            Method::Logistic { .. } => "logistic".into(),
            Method::Glmtron => "glmtron".into(),
            Method::Slisotron => "slisotron".into(),
            Method::Bregmantron => match variant {
                Variant::Standard => "bregmantron".into(),
                Variant::Approx => "bregmantron_approx".into(),
                Variant::Label => "bregmantron_label".into(),
                Variant::Stability { .. } => "bregmantron_stability".into(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: DatasetSpec,
    pub method: Method,
    #[serde(default)]
    pub config: TrainConfig,
    /// Where trace, link and summary files go; nothing is written if unset.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn new(dataset: DatasetSpec, method: Method, config: TrainConfig) -> Self {
        Self {
            dataset,
            method,
            config,
            output: None,
            data_dir: default_data_dir(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if let Method::Logistic {
            step_size: Some(step),
            ..
        } = self.method
        {
            if !(step > 0.0 && step.is_finite()) {
                return Err(HarnessError::Spec(format!("logistic step size {step} must be positive")));
            }
        }
        if matches!(self.method, Method::Glmtron | Method::Slisotron) && self.config.iterations == 0 {
            return Err(HarnessError::Spec("baselines need at least one iteration".into()));
        }
        Ok(())
    }
}

/// A fitted model in a form that can be saved and scored later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TrainedModel {
    /// Linear scores through a learned link.
    Link {
        w: Vec<f64>,
        link: PiecewiseAffineLink,
    },
    Baseline { model: BaselineModel },
}

impl TrainedModel {
    /// Keys whose order gives the model's ranking of `dataset`.
    pub fn ranking(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        let dim = match self {
            TrainedModel::Link { w, .. } => w.len(),
            TrainedModel::Baseline { model } => model.w.len(),
        };
        if dim != dataset.dim() {
            return Err(HarnessError::Spec(format!(
                "model has {dim} weights but the data has {} features",
                dataset.dim()
            )));
        }
        Ok(match self {
            TrainedModel::Link { w, link } => dataset.rows().map(|x| link.eval(dot(x, w))).collect(),
            TrainedModel::Baseline { model } => model.ranking(dataset),
        })
    }

    pub fn auc(&self, dataset: &Dataset) -> Result<f64> {
        Ok(auc(&self.ranking(dataset)?, dataset.labels())?)
    }
}

/// The summary file. Timing is left out so reruns compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset: String,
    pub method: String,
    pub iterations: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub auc_train: f64,
    pub auc_test: f64,
    /// Last recorded loss of a BregmanTron run.
    pub final_loss: Option<f64>,
    /// Smallest `L` over the run.
    pub min_l: Option<f64>,
    /// Iterations where the decrease guarantee applied, and how many of
    /// them broke it.
    pub decrease_checked: usize,
    pub decrease_violations: usize,
}

pub struct Outcome {
    pub summary: Summary,
    pub model: TrainedModel,
    pub records: Vec<IterationRecord>,
    pub elapsed: Duration,
}

fn summarize_records(records: &[IterationRecord]) -> (Option<f64>, usize, usize) {
    let min_l = records.iter().filter_map(|r| r.l).reduce(f64::min);
    let checked = records.iter().filter(|r| r.decrease_bound.is_some()).count();
    let violations = records
        .iter()
        .filter(|r| r.decrease_bound.is_some() && !r.decrease_holds())
        .count();
    (min_l, checked, violations)
}

/// Trains the method on the spec's dataset, scores both splits, and writes
/// `trace.csv`, `model.json` and `summary.json` when an output directory is
/// set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Outcome> {
    spec.validate()?;
    let config = &spec.config;
    let label = spec.method.label(config.variant);
    let context = format!("{label} on {}", spec.dataset);
    let split = spec
        .dataset
        .load(&spec.data_dir, config.seed, config.add_bias)
        .map_err(|e| e.context(context.clone()))?;
    let start = Instant::now();
    let (model, records) = fit(spec, &split.train, &split.test).map_err(|e| e.context(context.clone()))?;
    let elapsed = start.elapsed();
    let (min_l, decrease_checked, decrease_violations) = summarize_records(&records);
    let summary = Summary {
        dataset: spec.dataset.to_string(),
        method: label,
        iterations: config.iterations,
        train_size: split.train.len(),
        test_size: split.test.len(),
        auc_train: model.auc(&split.train)?,
        auc_test: model.auc(&split.test)?,
        final_loss: records.last().map(|r| r.loss),
        min_l,
        decrease_checked,
        decrease_violations,
    };
    if let Some(dir) = &spec.output {
        write_outputs(dir, spec, &summary, &model, &records).map_err(|e| e.context(context))?;
    }
    Ok(Outcome {
        summary,
        model,
        records,
        elapsed,
    })
}

fn fit(spec: &ExperimentSpec, train: &Dataset, test: &Dataset) -> Result<(TrainedModel, Vec<IterationRecord>)> {
    let iterations = spec.config.iterations;
    let baseline = |model: BaselineModel| (TrainedModel::Baseline { model }, Vec::new());
    Ok(match spec.method {
        Method::Logistic { epochs, step_size } => {
            let step = step_size.unwrap_or_else(|| logistic_step_size(train));
            baseline(logistic_fit(train, epochs, step)?)
        }
        Method::Glmtron => baseline(glmtron_fit(train, iterations)?),
        Method::Slisotron => baseline(slisotron_fit(train, iterations)?),
        Method::Bregmantron => {
            let (state, report) = train_monitored(train, Some(test), &spec.config)?;
            (
                TrainedModel::Link {
                    w: state.w,
                    link: state.link,
                },
                report.records,
            )
        }
    })
}

fn write_outputs(
    dir: &Path,
    spec: &ExperimentSpec,
    summary: &Summary,
    model: &TrainedModel,
    records: &[IterationRecord],
) -> Result<()> {
    ensure_dir(dir)?;
    write_json(&dir.join("spec.json"), spec)?;
    write_trace(&dir.join("trace.csv"), records)?;
    if let TrainedModel::Link { link, .. } = model {
        write_json(&dir.join("link.json"), link)?;
    }
    write_json(&dir.join("model.json"), model)?;
    write_json(&dir.join("summary.json"), summary)
}
