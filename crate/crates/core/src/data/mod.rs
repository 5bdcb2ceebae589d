//! Skeletons, pose samples, the dataset file format, input normalization,
//! mirror augmentation, camera projection and synthetic motion.

mod camera;
mod flip;
mod io;
mod normalize;
mod sample;
mod skeleton;
mod synth;

pub use camera::{CameraIntrinsics, CameraPose};
pub use flip::{flip_augment, flip_flat};
pub use io::{
    load_dataset, read_dataset, save_dataset, write_dataset, FORMAT_NAME, FORMAT_VERSION,
};
pub use normalize::{
    denormalize_basic, normalize_basic, normalize_pixel, DatasetStats, Normalization,
};
pub use sample::{Clip, Dataset, PoseSample, SampleKey};
pub use skeleton::{joints, SkeletonSpec};
pub use synth::{compositional_actions, synth_generate, SynthConfig, PATTERN_LETTERS};
