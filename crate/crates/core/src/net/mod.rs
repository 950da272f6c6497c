//! Feed-forward binary classifier with hand-written forward and backward
//! passes, focal-loss training and evaluation.

mod eval;
mod io;
mod loss;
mod model;
mod optim;
mod train;

pub use eval::{class_report, f1_score, predict_all, ClassReport};
pub use io::{load_model, save_model, write_loss_history, ModelBundle, MODEL_VERSION};
pub use loss::{cross_entropy, focal_loss, focal_loss_grad_logit, FocalLossParams, PROB_EPS};
pub use model::{default_dims, sigmoid, Activation, Dense, ForwardTrace, MlpModel};
pub use optim::{RAdam, RAdamConfig};
pub use train::{train, TrainConfig, TrainOutcome};

pub(crate) use model::relu_grad;
