//! The sequential deep graph generative model: BFS sequencing into
//! bandwidth-bounded edge vectors, a two-level recurrent architecture,
//! hand-derived backpropagation through time, and the training loop.

mod adam;
mod checkpoint;
mod gradient;
mod model;
mod sequence;
mod train;

pub use adam::{clip_gradient_norm, adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use gradient::backward;
pub use model::{
    bce_loss, forward, pad_row, param_count, ForwardCache, GenerationStepper, ModelDims,
    ModelError, ModelParams,
};
pub use sequence::{
    bfs_bandwidth, bfs_order, estimate_transient_dim, sequence_to_graph, to_sequence,
    EdgeSequence, SequenceError,
};
pub use train::{
    train, EpochRecord, TrainConfig, TrainError, TrainOutcome, TrainingHistory, ValidationConfig,
};
