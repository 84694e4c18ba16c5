//! One trained model per table cell, varying training-set size or depth.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::Dataset;

use super::eval::{evaluate, EvalOptions, Method};
use super::train::{train, TrainConfig};
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationAxis {
    /// Number of training instances (a prefix of the training set).
    Samples,
    /// Number of message-passing layers.
    Layers,
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationAxis::Samples => "samples",
            AblationAxis::Layers => "layers",
        })
    }
}

impl FromStr for AblationAxis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "samples" => Ok(AblationAxis::Samples),
            "layers" => Ok(AblationAxis::Layers),
            _ => Err(HarnessError::Config(format!("unknown ablation axis '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AblationRow {
    pub axis: AblationAxis,
    pub value: usize,
    pub igcnet_rate: f64,
    pub wmmse_rate: f64,
    pub ratio: f64,
    pub greedy_ratio: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Trains and evaluates one model per value. All cells share `base`
/// (including its seed) apart from the ablated field.
pub fn ablate(
    axis: AblationAxis,
    values: &[usize],
    base: &TrainConfig,
    train_data: &Dataset,
    test: &Dataset,
    opts: &EvalOptions,
) -> Result<Vec<AblationRow>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Config("no ablation values".into()));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut cfg = base.clone();
        let data = match axis {
            AblationAxis::Samples => {
                if value == 0 || value > train_data.len() {
                    return Err(HarnessError::Config(format!(
                        "sample count {value} outside 1..={}",
                        train_data.len()
                    )));
                }
                train_data.subset(value)
            }
            AblationAxis::Layers => {
                cfg.model.num_layers = value;
                train_data.clone()
            }
        };
        let out = train(&cfg, &data)?;
        let report = evaluate(
            Some(&out.model),
            test,
            &[Method::Igcnet, Method::Greedy],
            opts,
        )?;
        let ig = report.get(Method::Igcnet).expect("requested");
        rows.push(AblationRow {
            axis,
            value,
            igcnet_rate: ig.mean_rate,
            wmmse_rate: report.wmmse_mean,
            ratio: ig.ratio,
            greedy_ratio: report.ratio(Method::Greedy).expect("requested"),
            best_epoch: out.best_epoch,
            epochs_run: out.history.len(),
        });
    }
    Ok(rows)
}
