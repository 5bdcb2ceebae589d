//! Fixtures shared by the benchmarks.

use srlift_core::data::{synth_generate, Dataset, SynthConfig};
use srlift_core::layers::{ContextWidth, Recombine, RecombineKind};
use srlift_core::models::ModelKind;
use srlift_core::Tensor;

pub fn sr_multiply() -> ModelKind {
    ModelKind::Sr {
        recombine: Recombine::new(RecombineKind::Multiply, ContextWidth::Fixed(1)),
    }
}

/// Deterministic pseudo-random batch of normalized 2D inputs.
pub fn input_batch(batch: usize, width: usize) -> Tensor {
    let data = (0..batch * width)
        .map(|i| ((i as f64) * 0.618_033_988_75).fract() * 2.0 - 1.0)
        .collect();
    Tensor::new(vec![batch, width], data).expect("consistent shape")
}

pub fn small_dataset(frames: usize) -> Dataset {
    synth_generate(&SynthConfig {
        subjects: 1,
        actions: vec!["AB".into()],
        frames,
        cameras: 1,
        seed: 1,
        ..SynthConfig::default()
    })
    .expect("valid synthetic config")
}
