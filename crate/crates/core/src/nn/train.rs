use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::eval::{gesture_accuracy, recording_prediction};
use super::gru::{nll_loss, GruModel, ModelShape};
use crate::error::{Error, Result};
use crate::features::N_FEATURES;
use crate::radar::GestureClass;

/// One recording as seen by the classifier: scaled features per frame, the
/// per-frame targets and the recording's class.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub features: Array2<f64>,
    pub frame_labels: Vec<usize>,
    pub class: GestureClass,
}

impl Sequence {
    pub fn new(
        features: &[[f64; N_FEATURES]],
        frame_labels: &[GestureClass],
        class: GestureClass,
    ) -> Result<Self> {
        if features.len() != frame_labels.len() {
            return Err(Error::dims(features.len(), frame_labels.len()));
        }
        Ok(Self {
            features: Array2::from_shape_vec(
                (features.len(), N_FEATURES),
                features.iter().flatten().copied().collect(),
            )
            .expect("rows of N_FEATURES values"),
            frame_labels: frame_labels.iter().map(|c| c.index()).collect(),
            class,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub n_seeds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_size: 16,
            lr: 1.58e-3,
            weight_decay: 1.6e-5,
            batch_size: 32,
            max_epochs: 150,
            patience: 10,
            n_seeds: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.hidden_size > 0
            && self.lr > 0.0
            && self.weight_decay > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0
            && self.n_seeds > 0;
        if !positive || !self.lr.is_finite() || !self.weight_decay.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "training parameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    pub fn model_shape(&self) -> ModelShape {
        ModelShape {
            hidden_size: self.hidden_size,
            ..ModelShape::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch with the lowest validation loss.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "train_loss", "val_loss", "val_acc"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_loss.to_string(),
                e.val_acc.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean sequence loss of `model` over `data`.
pub fn mean_loss(model: &GruModel, data: &[Sequence]) -> Result<f64> {
    let mut total = 0.0;
    for s in data {
        let lp = model.forward(s.features.view())?;
        total += nll_loss(lp.view(), &s.frame_labels)?;
    }
    Ok(total / data.len() as f64)
}

/// Mini-batch training with early stopping on validation loss. Returns the
/// parameters of the best epoch.
pub fn train(
    train_set: &[Sequence],
    val_set: &[Sequence],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(GruModel, TrainHistory)> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidArgument("empty splits".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = GruModel::init(cfg.model_shape(), &mut rng)?;
    let adam = cfg.adam();
    let mut state = AdamState::new(model.param_count());
    let mut grad = vec![0.0; model.param_count()];
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut best = (f64::INFINITY, 0usize, model.clone());
    let mut history = Vec::new();
    let mut stopped_early = false;
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut train_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &train_set[i];
                train_loss +=
                    model.loss_and_grad(s.features.view(), &s.frame_labels, scale, &mut grad)?;
            }
            adam_step(model.params_mut(), &grad, &mut state, &adam).map_err(|e| {
                Error::Numeric(format!("epoch {epoch}: {e}"))
            })?;
        }
        train_loss /= train_set.len() as f64;
        let mut val_loss = 0.0;
        let mut predictions = Vec::with_capacity(val_set.len());
        for s in val_set {
            let lp = model.forward(s.features.view())?;
            val_loss += nll_loss(lp.view(), &s.frame_labels)?;
            predictions.push((s.class, recording_prediction(lp.view())));
        }
        val_loss /= val_set.len() as f64;
        if !val_loss.is_finite() || !train_loss.is_finite() {
            return Err(Error::Numeric(format!("epoch {epoch}: non-finite loss")));
        }
        history.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            val_acc: gesture_accuracy(&predictions).unwrap_or(0.0),
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, model.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    Ok((
        best.2,
        TrainHistory {
            epochs: history,
            best_epoch: best.1,
            stopped_early,
        },
    ))
}
