//! Experiments, exports and acceptance checks around the `bregmantron`
//! learner.

pub mod criteria;
pub mod curves;
pub mod error;
pub mod experiment;
pub mod output;
pub mod tasks;
pub mod transfer;

pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ExperimentSpec, Method, Summary, TrainedModel};
pub use tasks::DatasetSpec;
pub use transfer::{run_transfer, TransferSpec, TransferSummary};
