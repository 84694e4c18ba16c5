//! Experiment machinery: training, evaluation against baselines, CSI
//! corruption sweeps, ablations, timing and CSV reports.
//!
//! Every entry point is a pure function of its configuration and seeds,
//! apart from wall-clock columns.

mod ablate;
mod bench;
mod eval;
mod report;
mod robust;
mod train;

pub use ablate::{ablate, AblationAxis, AblationRow};
pub use bench::{benchmark_time, TimingRow};
pub use eval::{
    build_id, calibration_set, evaluate, EvalOptions, EvalReport, Method, MethodResult, ReportMeta,
    CALIBRATION_SEED_OFFSET,
};
pub use report::{
    strip_timing_columns, write_ablation_csv, write_history_csv, write_instances_csv,
    write_robust_csv, write_summary_csv, write_timing_csv,
};
pub use robust::{
    noisy_csi, noisy_csi_with_rng, partial_csi, robustness_curve, CsiMode, RobustRow,
};
pub use train::{
    fine_tune, loss_and_grads, resolve_normalization, train, train_with_progress, EpochRecord,
    NormalizationChoice, TrainConfig, TrainOutcome,
};

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::baselines::BaselineError;
use crate::channel::ChannelError;
use crate::graph::GraphError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (parameter norm {param_norm:.3e})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        param_norm: f64,
    },
    #[error("partial CSI needs transmitter/receiver geometry")]
    MissingGeometry,
    #[error("unknown method '{0}' (expected wmmse, igcnet or greedy)")]
    UnknownMethod(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
