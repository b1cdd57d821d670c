//! GRU frame classifier with Adam training, early stopping and
//! recording-level evaluation.

mod adam;
mod eval;
mod gru;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use eval::{
    evaluate, gesture_accuracy, predict_all, recording_prediction, write_confusion_csv,
    ConfusionMatrix, EvalReport,
};
pub use gru::{
    gradient_check, nll_loss, param_count, single_bias_param_count, tensor_shapes, GruModel,
    ModelShape,
};
pub use train::{mean_loss, train, EpochLog, Sequence, TrainConfig, TrainHistory};
