//! Whole lifting networks: FC, GP, LF, ES, SFS and SR, per-frame or
//! temporal, plus parameter counting and checkpoint files.

mod checkpoint;
mod config;
mod model;


pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{Grouping, ModelConfig, ModelKind, TemporalConfig};
pub use model::{build_model, count_params, Model, Stage};
