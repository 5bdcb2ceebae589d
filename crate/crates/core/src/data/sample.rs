use serde::{Deserialize, Serialize};

use super::skeleton::SkeletonSpec;

/// One frame: 2D keypoints in pixels and the root-relative 3D pose in mm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub keypoints_2d: Vec<[f64; 2]>,
    pub pose_3d: Vec<[f64; 3]>,
    pub width: f64,
    pub height: f64,
    pub subject: String,
    pub action: String,
    pub camera: String,
    pub frame: usize,
}

/// Identity of a frame across the dataset.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SampleKey {
    pub subject: String,
    pub action: String,
    pub camera: String,
    pub frame: usize,
}

impl PoseSample {
    pub fn key(&self) -> SampleKey {
        SampleKey {
            subject: self.subject.clone(),
            action: self.action.clone(),
            camera: self.camera.clone(),
            frame: self.frame,
        }
    }

    pub(crate) fn same_sequence(&self, other: &PoseSample) -> bool {
        self.subject == other.subject && self.action == other.action && self.camera == other.camera
    }

    /// Keypoints outside `[0, width] × [0, height]`.
    pub fn out_of_bounds(&self) -> usize {
        self.keypoints_2d
            .iter()
            .filter(|[x, y]| !(0.0..=self.width).contains(x) || !(0.0..=self.height).contains(y))
            .count()
    }

    pub fn flat_2d(&self) -> Vec<f64> {
        self.keypoints_2d.iter().flatten().copied().collect()
    }

    pub fn flat_3d(&self) -> Vec<f64> {
        self.pose_3d.iter().flatten().copied().collect()
    }
}

/// Contiguous frames of one (subject, action, camera) sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    pub samples: Vec<PoseSample>,
}

impl Clip {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &PoseSample {
        &self.samples[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub skeleton: SkeletonSpec,
    pub clips: Vec<Clip>,
}

impl Dataset {
    pub fn new(skeleton: SkeletonSpec) -> Self {
        Self {
            skeleton,
            clips: Vec::new(),
        }
    }

    /// Builds clips from samples in file order, starting a new clip whenever
    /// the sequence changes or the frame index does not advance by one.
    pub fn from_samples(
        skeleton: SkeletonSpec,
        samples: impl IntoIterator<Item = PoseSample>,
    ) -> Self {
        let mut clips: Vec<Clip> = Vec::new();
        for s in samples {
            match clips.last_mut() {
                Some(c)
                    if c.samples
                        .last()
                        .is_some_and(|p| p.same_sequence(&s) && p.frame + 1 == s.frame) =>
                {
                    c.samples.push(s)
                }
                _ => clips.push(Clip { samples: vec![s] }),
            }
        }
        Self { skeleton, clips }
    }

    pub fn len(&self) -> usize {
        self.clips.iter().map(Clip::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn samples(&self) -> impl Iterator<Item = &PoseSample> {
        self.clips.iter().flat_map(|c| c.samples.iter())
    }

    fn labels(&self, f: impl Fn(&PoseSample) -> &str) -> Vec<String> {
        let mut v: Vec<String> = self
            .clips
            .iter()
            .map(|c| f(c.first()).to_string())
            .collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn subjects(&self) -> Vec<String> {
        self.labels(|s| &s.subject)
    }

    pub fn actions(&self) -> Vec<String> {
        self.labels(|s| &s.action)
    }

    /// Keeps clips whose first sample satisfies `keep`.
    pub fn filter_clips(&self, keep: impl Fn(&PoseSample) -> bool) -> Dataset {
        Dataset {
            skeleton: self.skeleton.clone(),
            clips: self
                .clips
                .iter()
                .filter(|c| keep(c.first()))
                .cloned()
                .collect(),
        }
    }

    pub fn keypoints_out_of_bounds(&self) -> usize {
        self.samples().map(PoseSample::out_of_bounds).sum()
    }
}
