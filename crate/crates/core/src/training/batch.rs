use crate::data::{flip_flat, Clip, Normalization};
use crate::error::Result;
use crate::numerics::Tensor;

/// Normalized inputs and flattened targets of one clip.
pub(crate) struct PreparedClip {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

pub(crate) fn prepare<'a>(
    clips: impl IntoIterator<Item = &'a Clip>,
    norm: &Normalization,
) -> Result<Vec<PreparedClip>> {
    clips
        .into_iter()
        .map(|c| {
            Ok(PreparedClip {
                inputs: c
                    .samples
                    .iter()
                    .map(|s| norm.apply(s))
                    .collect::<Result<_>>()?,
                targets: c.samples.iter().map(|s| s.flat_3d()).collect(),
            })
        })
        .collect()
}

/// Builds model inputs for `(clip, frame, flipped)` triples. Temporal
/// windows are centred on the frame and repeat the clip's edge frames.
pub(crate) fn assemble_inputs(
    clips: &[PreparedClip],
    picks: &[(usize, usize, bool)],
    frames: usize,
    temporal: bool,
    mirror: &[usize],
) -> Result<Tensor> {
    let width = clips[picks[0].0].inputs[0].len();
    let half = frames / 2;
    let mut data = Vec::with_capacity(picks.len() * frames * width);
    for &(c, f, flip) in picks {
        let clip = &clips[c].inputs;
        for i in 0..frames {
            let src = (f + i).saturating_sub(half).min(clip.len() - 1);
            if flip {
                data.extend(flip_flat(&clip[src], mirror, 2));
            } else {
                data.extend_from_slice(&clip[src]);
            }
        }
    }
    let shape = if temporal {
        vec![picks.len(), frames, width]
    } else {
        vec![picks.len(), width]
    };
    Tensor::new(shape, data)
}

pub(crate) fn assemble_targets(
    clips: &[PreparedClip],
    picks: &[(usize, usize, bool)],
    mirror: &[usize],
) -> Result<Tensor> {
    let width = clips[picks[0].0].targets[0].len();
    let mut data = Vec::with_capacity(picks.len() * width);
    for &(c, f, flip) in picks {
        let t = &clips[c].targets[f];
        if flip {
            data.extend(flip_flat(t, mirror, 3));
        } else {
            data.extend_from_slice(t);
        }
    }
    Tensor::new(vec![picks.len(), width], data)
}
