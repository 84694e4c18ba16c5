//! Unsupervised training: Adam on the negative weighted sum rate.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, AdamConfig, Tape, Tensor};
use crate::channel::{ChannelInstance, Dataset, GeneratorTag};
use crate::graph::{GraphBatch, InterferenceGraph, NormalizationScheme};
use crate::model::{loss_on_tape, IgcNetConfig, IgcNetModel, LossBatch};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationChoice {
    /// Identity for Gaussian datasets, fitted amplitude scale otherwise.
    #[default]
    Auto,
    Identity,
    LogSnr,
    Scaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Upper bound on epochs.
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Trailing fraction of the training set held out for model selection.
    pub val_fraction: f64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: usize,
    pub normalization: NormalizationChoice,
    pub model: IgcNetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
            val_fraction: 0.1,
            patience: 20,
            normalization: NormalizationChoice::Auto,
            model: IgcNetConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return Err(HarnessError::Config(
                "epochs, batch_size and patience must be positive".into(),
            ));
        }
        if !(self.lr > 0.0) {
            return Err(HarnessError::Config(
                "learning rate must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(HarnessError::Config(
                "val_fraction must lie in [0, 1)".into(),
            ));
        }
        self.model.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Loss on the held-out split (the training split when none is held out).
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: IgcNetModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Graphs and loss constants for one dataset, built once.
pub(crate) struct Prepared<'a> {
    pub graphs: Vec<InterferenceGraph>,
    pub instances: Vec<&'a ChannelInstance>,
}

impl<'a> Prepared<'a> {
    pub fn new(
        model: &IgcNetModel,
        instances: &'a [ChannelInstance],
    ) -> Result<Self, HarnessError> {
        let graphs = instances
            .iter()
            .map(|c| model.graph(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            graphs,
            instances: instances.iter().collect(),
        })
    }

    fn batch(&self, idx: &[usize]) -> Result<(GraphBatch, LossBatch, Vec<f64>), HarnessError> {
        let g: Vec<&InterferenceGraph> = idx.iter().map(|&i| &self.graphs[i]).collect();
        let c: Vec<&ChannelInstance> = idx.iter().map(|&i| self.instances[i]).collect();
        let p_max = c.iter().map(|c| c.p_max).collect();
        Ok((GraphBatch::new(&g)?, LossBatch::new(&c)?, p_max))
    }

    /// Mean loss over all instances, evaluated in chunks.
    pub fn mean_loss(&self, model: &IgcNetModel, chunk: usize) -> Result<f64, HarnessError> {
        let n = self.graphs.len();
        let mut total = 0.0;
        let all: Vec<usize> = (0..n).collect();
        for idx in all.chunks(chunk.max(1)) {
            let (gb, lb, p_max) = self.batch(idx)?;
            let mut tape = Tape::new();
            let params: Vec<_> = model
                .params()
                .iter()
                .map(|p| tape.constant(p.clone()))
                .collect();
            let p = model.forward_on_tape(&mut tape, &params, &gb, &p_max)?;
            let l = loss_on_tape(&mut tape, p, &lb)?;
            total += tape.value(l).item().expect("scalar") * idx.len() as f64;
        }
        Ok(total / n as f64)
    }
}

/// One gradient evaluation: loss value and per-parameter gradients.
pub fn loss_and_grads(
    model: &IgcNetModel,
    graphs: &[&InterferenceGraph],
    instances: &[&ChannelInstance],
) -> Result<(f64, Vec<Tensor>), HarnessError> {
    let gb = GraphBatch::new(graphs)?;
    let lb = LossBatch::new(instances)?;
    let p_max: Vec<f64> = instances.iter().map(|c| c.p_max).collect();
    let mut tape = Tape::new();
    let params = model.bind(&mut tape);
    let p = model.forward_on_tape(&mut tape, &params, &gb, &p_max)?;
    let l = loss_on_tape(&mut tape, p, &lb)?;
    let grads = tape.backward(l)?;
    let value = tape.value(l).item().expect("scalar");
    let g = params
        .iter()
        .zip(model.params())
        .map(|(&v, t)| grads.get_or_zeros(v, t.shape()))
        .collect();
    Ok((value, g))
}

pub fn resolve_normalization(choice: NormalizationChoice, data: &Dataset) -> NormalizationScheme {
    match choice {
        NormalizationChoice::Identity => NormalizationScheme::Identity,
        NormalizationChoice::LogSnr => NormalizationScheme::fit_log_snr(data),
        NormalizationChoice::Scaled => NormalizationScheme::fit_scaled(data),
        NormalizationChoice::Auto => match data.generator {
            GeneratorTag::Gaussian => NormalizationScheme::Identity,
            _ => NormalizationScheme::fit_scaled(data),
        },
    }
}

/// Trains a fresh model on `data`.
pub fn train(cfg: &TrainConfig, data: &Dataset) -> Result<TrainOutcome, HarnessError> {
    train_with_progress(cfg, data, |_| {})
}

/// [`train`], reporting each finished epoch to `progress`.
pub fn train_with_progress(
    cfg: &TrainConfig,
    data: &Dataset,
    progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, HarnessError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(HarnessError::Config("empty training set".into()));
    }
    let (fit, _) = data.split_tail(cfg.val_fraction);
    let norm = resolve_normalization(cfg.normalization, &fit);
    let model = IgcNetModel::new(cfg.model, norm, cfg.seed)?;
    fine_tune(model, cfg, data, progress)
}

/// Continues training `model` on `data`. Its architecture and input
/// normalization are kept; `cfg.model` and `cfg.normalization` are ignored.
pub fn fine_tune(
    mut model: IgcNetModel,
    cfg: &TrainConfig,
    data: &Dataset,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, HarnessError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(HarnessError::Config("empty training set".into()));
    }
    let (fit, val) = data.split_tail(cfg.val_fraction);
    let train_set = Prepared::new(&model, &fit.instances)?;
    let val_set = if val.is_empty() {
        None
    } else {
        Some(Prepared::new(&model, &val.instances)?)
    };

    let mut opt = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            ..Default::default()
        },
        model.params(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..fit.len()).collect();
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, model.params().to_vec(), 0usize);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let g: Vec<&InterferenceGraph> = idx.iter().map(|&i| &train_set.graphs[i]).collect();
            let c: Vec<&ChannelInstance> = idx.iter().map(|&i| train_set.instances[i]).collect();
            let (value, grads) = loss_and_grads(&model, &g, &c)?;
            if !value.is_finite() || grads.iter().any(|t| !t.all_finite()) {
                let norm = model
                    .params()
                    .iter()
                    .flat_map(|t| t.data())
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt();
                return Err(HarnessError::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    param_norm: norm,
                });
            }
            sum += value * idx.len() as f64;
            opt.step(model.params_mut(), &grads)?;
        }
        let train_loss = sum / fit.len() as f64;
        let val_loss = match &val_set {
            Some(v) => v.mean_loss(&model, 256)?,
            None => train_set.mean_loss(&model, 256)?,
        };
        let rec = EpochRecord {
            epoch,
            train_loss,
            val_loss,
        };
        progress(&rec);
        history.push(rec);
        if val_loss < best.0 {
            best = (val_loss, model.params().to_vec(), epoch);
        } else if epoch - best.2 >= cfg.patience {
            break;
        }
    }
    model.params_mut().clone_from_slice(&best.1);
    Ok(TrainOutcome {
        model,
        history,
        best_epoch: best.2,
    })
}
