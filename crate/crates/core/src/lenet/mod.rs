//! LeNet-5 assembly, training, the first-layer sign flip, receptive fields
//! and response dumps.

mod dump;
mod network;
mod spec;
mod train;
mod transform;

pub use dump::{dump_responses, scale_channel, write_pgm, ChannelScaling, DumpOutcome, DumpStage};
pub use network::{build_lenet, Network, NetworkMeta, TrainConfig, CHECKPOINT_FORMAT};
pub use spec::{receptive_field, ArchSpec, LeNetSpec, RfConvention, RowPlan, SpecRow, ALEXNET_TABLE, LENET_TABLE};
pub use train::{evaluate, predict_logits, train, train_with, EpochRecord, EvalReport, TrainHistory};
pub use transform::{negate_first_layer, negate_first_layer_weights_only, NEGATE_TAG, NEGATE_WEIGHTS_ONLY_TAG};
