//! The learned sampler network and its training pipeline.

pub mod adam;
pub mod dataset;
pub mod io;
pub mod loss;
pub mod mlp;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dataset::{generate_dataset, Dataset, DatasetConfig, DatasetReport, TrainingExample};
pub use io::{load_dataset, load_weights, save_dataset, save_weights};
pub use loss::{example_loss, point_loss, target_density, ExampleDraw, LossTerms};
pub use mlp::{
    block_rows, forward, predict_block, select_block, DropoutMasks, MlpParams, Mode, NUM_BLOCKS,
    OUTPUT_POINTS,
};
pub use train::{train, train_from, TrainConfig, TrainOutcome, TrainRecord};
