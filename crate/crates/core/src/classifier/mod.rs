//! Three-branch CNN for the nine sign-pair classes, trained from scratch.

mod conv;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod train;

pub use metrics::{confusion_matrix, ConfusionMatrix};
pub use model::{argmax, ClassifierModel, ConvStage, Example, Topology, BRANCHES};
pub use scalar::Scalar;
pub use train::{accuracy, predict_all, train, train_with, EpochLog, StopReason, TrainConfig, TrainLog};
