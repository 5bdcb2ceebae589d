//! Loss, AMSGrad, learning-rate schedule, the training loop and evaluation.

mod batch;
mod eval;
mod loss;
mod optim;
mod train;


pub use eval::{evaluate, evaluate_predictions, predict_test, EvalOptions};
pub use loss::l1_loss;
pub use optim::{lr_at_epoch, AmsGrad, OptimizerState};
pub use train::{
    train, train_step, EpochLog, NormalizationKind, TrainConfig, TrainLog, CHECKPOINT_FILE,
    LOG_FILE,
};
