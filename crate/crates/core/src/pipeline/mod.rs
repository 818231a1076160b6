//! Configuration, seeding, batching, training, checkpoints and prediction.

mod checkpoint;
mod config;
mod data;
mod predict;
mod seed;
mod train;

pub use checkpoint::{read_params_into, write_params, Checkpoint, CheckpointMeta};
pub use config::{Config, EncoderKind, KEYS as CONFIG_KEYS, SEED_ENV};
pub use data::{Batch, Prepared, Resources};
pub use predict::{checkpoint_resources, predict, predict_prepared, GoldScorer, LiteralScorer, PredictOptions, Scorer};
pub use seed::{seed_all, Rngs};
pub use train::{batch_gradients, mean_loss, train, train_prepared, EpochRecord, TrainObserver, TrainOutcome};
