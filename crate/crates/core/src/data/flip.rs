use super::sample::PoseSample;
use super::skeleton::SkeletonSpec;

/// Negates x in both 2D and 3D, then swaps mirrored joints.
pub fn flip_augment(s: &PoseSample, skeleton: &SkeletonSpec) -> PoseSample {
    let m = skeleton.mirror_map();
    PoseSample {
        keypoints_2d: (0..m.len())
            .map(|j| {
                let [x, y] = s.keypoints_2d[m[j]];
                [-x, y]
            })
            .collect(),
        pose_3d: (0..m.len())
            .map(|j| {
                let [x, y, z] = s.pose_3d[m[j]];
                [-x, y, z]
            })
            .collect(),
        ..s.clone()
    }
}

/// Mirrors a flattened pose with `dims` coordinates per joint (x first).
pub fn flip_flat(v: &[f64], mirror: &[usize], dims: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    for &src in mirror {
        let p = &v[src * dims..(src + 1) * dims];
        out.push(-p[0]);
        out.extend_from_slice(&p[1..]);
    }
    out
}
