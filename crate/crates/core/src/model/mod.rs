//! ResNet18 emotion classifier: assembly, training, evaluation and persistence.

mod layers;
mod resnet;
mod train;
mod weights;

pub use layers::{
    BasicBlock, BatchNormLayer, ConvBn, ConvLayer, DenseLayer, Role, Slot, SlotMut, BN_EPSILON,
    BN_MOMENTUM,
};
pub use resnet::{ResNet, ResNetConfig};
pub use train::{
    argmax, evaluate, loss_with_l2, train_epoch, ConfusionMatrix, EpochMetrics, EpochStats,
    Evaluation, LossBreakdown, Metrics, PlateauSchedule, TrainConfig, Trainer,
};
pub use weights::{
    decode_header, decode_weights, encode_weights, load_weights, load_weights_into, save_weights,
    TensorEntry, WeightsHeader, MAGIC, VERSION,
};

/// Builds the network with He-normal initialization from `rng`.
pub fn build_resnet18(config: ResNetConfig, rng: &mut crate::tensor::Rng) -> crate::Result<ResNet<f32>> {
    ResNet::new(config, rng)
}
