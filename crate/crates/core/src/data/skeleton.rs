use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint tree of a skeleton plus its left/right symmetry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSpec {
    pub names: Vec<String>,
    /// Parent of each joint; `None` only for the root.
    pub parents: Vec<Option<usize>>,
    pub root: usize,
    pub mirror_pairs: Vec<(usize, usize)>,
    /// Length in millimetres of the bone ending at each joint (0 for the root).
    pub bone_lengths: Vec<f64>,
}

pub mod joints {
    pub const PELVIS: usize = 0;
    pub const R_HIP: usize = 1;
    pub const R_KNEE: usize = 2;
    pub const R_ANKLE: usize = 3;
    pub const L_HIP: usize = 4;
    pub const L_KNEE: usize = 5;
    pub const L_ANKLE: usize = 6;
    pub const SPINE: usize = 7;
    pub const THORAX: usize = 8;
    pub const NECK: usize = 9;
    pub const HEAD: usize = 10;
    pub const L_SHOULDER: usize = 11;
    pub const L_ELBOW: usize = 12;
    pub const L_WRIST: usize = 13;
    pub const R_SHOULDER: usize = 14;
    pub const R_ELBOW: usize = 15;
    pub const R_WRIST: usize = 16;
}

impl SkeletonSpec {
    /// The common 17-joint motion-capture layout.
    pub fn h36m17() -> Self {
        use joints::*;
        let names = [
            "pelvis",
            "r_hip",
            "r_knee",
            "r_ankle",
            "l_hip",
            "l_knee",
            "l_ankle",
            "spine",
            "thorax",
            "neck",
            "head",
            "l_shoulder",
            "l_elbow",
            "l_wrist",
            "r_shoulder",
            "r_elbow",
            "r_wrist",
        ];
        let parents = [
            None,
            Some(PELVIS),
            Some(R_HIP),
            Some(R_KNEE),
            Some(PELVIS),
            Some(L_HIP),
            Some(L_KNEE),
            Some(PELVIS),
            Some(SPINE),
            Some(THORAX),
            Some(NECK),
            Some(THORAX),
            Some(L_SHOULDER),
            Some(L_ELBOW),
            Some(THORAX),
            Some(R_SHOULDER),
            Some(R_ELBOW),
        ];
        let bone_lengths = vec![
            0.0, 133.0, 442.0, 454.0, 133.0, 442.0, 454.0, 233.0, 257.0, 121.0, 115.0, 151.0,
            278.0, 252.0, 151.0, 278.0, 252.0,
        ];
        Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            parents: parents.to_vec(),
            root: PELVIS,
            mirror_pairs: vec![
                (R_HIP, L_HIP),
                (R_KNEE, L_KNEE),
                (R_ANKLE, L_ANKLE),
                (L_SHOULDER, R_SHOULDER),
                (L_ELBOW, R_ELBOW),
                (L_WRIST, R_WRIST),
            ],
            bone_lengths,
        }
    }

    pub fn n_joints(&self) -> usize {
        self.names.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.names.len();
        if n == 0 {
            return Err(Error::Config("skeleton has no joints".into()));
        }
        if self.parents.len() != n || self.bone_lengths.len() != n {
            return Err(Error::Config(format!(
                "skeleton has {n} names, {} parents and {} bone lengths",
                self.parents.len(),
                self.bone_lengths.len()
            )));
        }
        if self.root >= n || self.parents[self.root].is_some() {
            return Err(Error::Config(format!(
                "root {} must exist and have no parent",
                self.root
            )));
        }
        for j in 0..n {
            if j != self.root && self.parents[j].is_none() {
                return Err(Error::Config(format!(
                    "joint {j} has no parent but is not the root"
                )));
            }
            // walking up must reach the root within n steps
            let mut cur = j;
            for _ in 0..=n {
                match self.parents[cur] {
                    Some(p) if p < n => cur = p,
                    Some(p) => {
                        return Err(Error::Config(format!(
                            "joint {cur} has parent {p} outside the skeleton"
                        )))
                    }
                    None => break,
                }
            }
            if cur != self.root {
                return Err(Error::Config(format!(
                    "joint {j} is not connected to the root"
                )));
            }
        }
        let mut used = vec![false; n];
        for &(a, b) in &self.mirror_pairs {
            if a == b || a >= n || b >= n || used[a] || used[b] {
                return Err(Error::Config(format!("invalid mirror pair ({a}, {b})")));
            }
            used[a] = true;
            used[b] = true;
        }
        Ok(())
    }

    /// Index each joint maps to under a left/right flip.
    pub fn mirror_map(&self) -> Vec<usize> {
        let mut m: Vec<usize> = (0..self.n_joints()).collect();
        for &(a, b) in &self.mirror_pairs {
            m[a] = b;
            m[b] = a;
        }
        m
    }
}
