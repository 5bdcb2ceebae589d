use std::f64::consts::{PI, TAU};

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::camera::{CameraIntrinsics, CameraPose};
use super::sample::{Dataset, PoseSample};
use super::skeleton::{joints::*, SkeletonSpec};
use crate::error::{Error, Result};

/// Motion patterns each body half can perform; an action is named by its
/// upper-body letter followed by its lower-body letter, e.g. `"AB"`.
pub const PATTERN_LETTERS: [char; 3] = ['A', 'B', 'C'];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub subjects: usize,
    pub actions: Vec<String>,
    /// Frames per (subject, action) sequence, shared by all cameras.
    pub frames: usize,
    /// Number of cameras placed around the subject, at most 4.
    pub cameras: usize,
    /// Standard deviation of the isotropic 2D noise in pixels.
    pub noise_px: f64,
    pub seed: u64,
    pub image_width: f64,
    pub image_height: f64,
    pub focal: f64,
    pub camera_distance: f64,
    pub camera_height: f64,
    /// Mean bone lengths; each subject scales them.
    pub bone_lengths: Vec<f64>,
    /// Relative per-subject spread of bone lengths.
    pub bone_jitter: f64,
    /// Per-frame angle noise in radians.
    pub angle_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subjects: 5,
            actions: vec!["AA".into(), "BB".into(), "AB".into(), "BA".into()],
            frames: 500,
            cameras: 4,
            noise_px: 2.0,
            seed: 0,
            image_width: 1000.0,
            image_height: 1000.0,
            focal: 1145.0,
            camera_distance: 4500.0,
            camera_height: 600.0,
            bone_lengths: SkeletonSpec::h36m17().bone_lengths,
            bone_jitter: 0.05,
            angle_jitter: 0.04,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.subjects == 0 || self.frames == 0 || self.actions.is_empty() {
            return bad("subjects, frames and actions must be non-empty".into());
        }
        if !(1..=4).contains(&self.cameras) {
            return bad(format!("cameras must be in 1..=4, got {}", self.cameras));
        }
        if !(self.noise_px >= 0.0
            && self.bone_jitter >= 0.0
            && self.bone_jitter < 1.0
            && self.angle_jitter >= 0.0)
        {
            return bad("noise and jitter levels must be non-negative (bone jitter < 1)".into());
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0 && self.focal > 0.0) {
            return bad("image size and focal length must be positive".into());
        }
        if self.camera_distance <= 1500.0 {
            return bad(format!(
                "camera distance {} mm would put joints behind the camera",
                self.camera_distance
            ));
        }
        if self.bone_lengths.len() != 17 || self.bone_lengths.iter().any(|&l| !(l >= 0.0)) {
            return bad("bone_lengths needs 17 non-negative entries".into());
        }
        for a in &self.actions {
            parse_action(a)?;
        }
        Ok(())
    }
}

fn parse_action(a: &str) -> Result<(usize, usize)> {
    let idx = |c: char| PATTERN_LETTERS.iter().position(|&p| p == c);
    let cs: Vec<char> = a.chars().collect();
    match cs.as_slice() {
        [u, l] => match (idx(*u), idx(*l)) {
            (Some(u), Some(l)) => Ok((u, l)),
            _ => Err(Error::Config(format!(
                "action {a:?} uses an unknown pattern (known: A, B, C)"
            ))),
        },
        _ => Err(Error::Config(format!(
            "action {a:?} must be two pattern letters, upper then lower"
        ))),
    }
}

/// Train actions pair each upper pattern with its own lower pattern; test
/// actions are every mixed pairing.
pub fn compositional_actions(letters: &[char]) -> (Vec<String>, Vec<String>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for &u in letters {
        for &l in letters {
            let name = format!("{u}{l}");
            if u == l {
                train.push(name)
            } else {
                test.push(name)
            }
        }
    }
    (train, test)
}

type Angles = [[f64; 3]; 17];

fn swing(phase: f64) -> f64 {
    phase.sin()
}

fn cycle01(phase: f64) -> f64 {
    0.5 - 0.5 * phase.cos()
}

/// Local rotations (about x, y, z) of the upper body for pattern `p`.
fn upper(p: usize, ph: f64, amp: f64, a: &mut Angles) {
    match p {
        // walking arm swing
        0 => {
            a[R_ELBOW][0] = -0.55 * amp * swing(ph);
            a[L_ELBOW][0] = 0.55 * amp * swing(ph);
            a[R_ELBOW][1] = 0.12;
            a[L_ELBOW][1] = -0.12;
            a[R_WRIST][0] = 0.35 + 0.15 * swing(ph);
            a[L_WRIST][0] = 0.35 - 0.15 * swing(ph);
            a[SPINE][2] = 0.12 * amp * swing(ph);
        }
        // arms raised and waving
        1 => {
            let t = cycle01(ph);
            a[R_ELBOW][1] = -(1.9 + 0.5 * t) * amp;
            a[L_ELBOW][1] = (1.9 + 0.5 * (1.0 - t)) * amp;
            a[R_WRIST][1] = -0.9 * amp * swing(2.0 * ph);
            a[L_WRIST][1] = 0.9 * amp * swing(2.0 * ph);
            a[SPINE][0] = 0.15;
            a[HEAD][0] = 0.25;
        }
        // reaching forward, alternating arms
        _ => {
            let t = cycle01(ph);
            a[R_ELBOW][0] = 1.5 * amp * t;
            a[L_ELBOW][0] = 1.5 * amp * (1.0 - t);
            a[R_WRIST][0] = 1.0 * (1.0 - t);
            a[L_WRIST][0] = 1.0 * t;
            a[SPINE][0] = -0.35 * amp;
            a[SPINE][2] = 0.3 * (t - 0.5);
            a[NECK][0] = 0.2;
        }
    }
}

/// Local rotations of the legs for pattern `p`.
fn lower(p: usize, ph: f64, amp: f64, a: &mut Angles) {
    match p {
        // walking
        0 => {
            a[R_KNEE][0] = 0.5 * amp * swing(ph);
            a[L_KNEE][0] = -0.5 * amp * swing(ph);
            a[R_ANKLE][0] = -0.7 * amp * cycle01(ph + PI / 2.0).powi(2);
            a[L_ANKLE][0] = -0.7 * amp * cycle01(ph - PI / 2.0).powi(2);
        }
        // squatting
        1 => {
            let t = cycle01(ph);
            a[R_KNEE][0] = 1.4 * amp * t;
            a[L_KNEE][0] = 1.4 * amp * t;
            a[R_KNEE][1] = -0.25 * t;
            a[L_KNEE][1] = 0.25 * t;
            a[R_ANKLE][0] = -2.2 * amp * t;
            a[L_ANKLE][0] = -2.2 * amp * t;
        }
        // kicking with the right leg, left leg spread
        _ => {
            let k = ph.sin().max(0.0);
            a[R_KNEE][0] = 1.5 * amp * k;
            a[R_ANKLE][0] = -1.2 * amp * k * (1.0 - k);
            a[L_KNEE][1] = 0.35 * amp;
            a[L_ANKLE][0] = -0.2;
        }
    }
}

fn rest_direction(j: usize) -> Vector3<f64> {
    match j {
        R_HIP | R_SHOULDER => Vector3::x(),
        L_HIP | L_SHOULDER => -Vector3::x(),
        SPINE | THORAX | NECK | HEAD => Vector3::z(),
        _ => -Vector3::z(),
    }
}

fn rotation(a: &[f64; 3]) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), a[2])
        * Rotation3::from_axis_angle(&Vector3::y_axis(), a[1])
        * Rotation3::from_axis_angle(&Vector3::x_axis(), a[0])
}

/// World-frame joint positions (z up) from local joint rotations.
fn forward_kinematics(
    skeleton: &SkeletonSpec,
    bones: &[f64],
    angles: &Angles,
    root_yaw: f64,
    root_pos: Vector3<f64>,
) -> Vec<Vector3<f64>> {
    let n = skeleton.n_joints();
    let mut global = vec![Rotation3::identity(); n];
    let mut pos = vec![Vector3::zeros(); n];
    global[skeleton.root] = Rotation3::from_axis_angle(&Vector3::z_axis(), root_yaw);
    pos[skeleton.root] = root_pos;
    // parents precede children in the default layout
    for j in 0..n {
        let Some(p) = skeleton.parents[j] else {
            continue;
        };
        global[j] = global[p] * rotation(&angles[j]);
        pos[j] = pos[p] + global[j] * (rest_direction(j) * bones[j]);
    }
    pos
}

fn cameras(cfg: &SynthConfig) -> Result<Vec<CameraPose>> {
    (0..cfg.cameras)
        .map(|c| {
            let az = PI / 4.0 + c as f64 * PI / 2.0;
            let centre = Vector3::new(
                cfg.camera_distance * az.cos(),
                cfg.camera_distance * az.sin(),
                cfg.camera_height,
            );
            CameraPose::look_at(centre, Vector3::zeros(), Vector3::z())
        })
        .collect()
}

/// Per-subject bone lengths, symmetric between left and right.
fn subject_bones<R: Rng>(cfg: &SynthConfig, skeleton: &SkeletonSpec, rng: &mut R) -> Vec<f64> {
    let scale = 1.0 + rng.random_range(-cfg.bone_jitter..=cfg.bone_jitter);
    let mut bones: Vec<f64> = cfg
        .bone_lengths
        .iter()
        .map(|&l| {
            l * scale * (1.0 + rng.random_range(-0.5 * cfg.bone_jitter..=0.5 * cfg.bone_jitter))
        })
        .collect();
    for &(a, b) in &skeleton.mirror_pairs {
        bones[b] = bones[a];
    }
    bones
}

/// Generates `subjects × actions × cameras` clips of `frames` frames each.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let skeleton = SkeletonSpec::h36m17();
    let cams = cameras(cfg)?;
    let k = CameraIntrinsics::new(
        cfg.focal,
        cfg.focal,
        cfg.image_width / 2.0,
        cfg.image_height / 2.0,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter =
        Normal::new(0.0, cfg.angle_jitter.max(f64::MIN_POSITIVE)).expect("valid deviation");
    let pixel = Normal::new(0.0, cfg.noise_px.max(f64::MIN_POSITIVE)).expect("valid deviation");
    let mut clips_samples: Vec<Vec<PoseSample>> = Vec::new();
    for s in 0..cfg.subjects {
        let bones = subject_bones(cfg, &skeleton, &mut rng);
        for action in &cfg.actions {
            let (up, low) = parse_action(action)?;
            let yaw0 = rng.random_range(0.0..TAU);
            let yaw_rate = rng.random_range(-0.01..0.01);
            let root = Vector3::new(
                rng.random_range(-400.0..400.0),
                rng.random_range(-400.0..400.0),
                0.0,
            );
            let (phase_u, phase_l) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
            let (speed_u, speed_l) = (
                rng.random_range(TAU / 60.0..TAU / 25.0),
                rng.random_range(TAU / 60.0..TAU / 25.0),
            );
            let (amp_u, amp_l) = (rng.random_range(0.8..1.2), rng.random_range(0.8..1.2));
            let mut world = Vec::with_capacity(cfg.frames);
            for t in 0..cfg.frames {
                let mut angles: Angles = [[0.0; 3]; 17];
                upper(up, phase_u + speed_u * t as f64, amp_u, &mut angles);
                lower(low, phase_l + speed_l * t as f64, amp_l, &mut angles);
                if cfg.angle_jitter > 0.0 {
                    for a in angles.iter_mut().skip(1) {
                        for v in a.iter_mut() {
                            *v += jitter.sample(&mut rng);
                        }
                    }
                }
                let yaw = yaw0 + yaw_rate * t as f64;
                world.push(forward_kinematics(&skeleton, &bones, &angles, yaw, root));
            }
            for (c, cam) in cams.iter().enumerate() {
                let mut clip = Vec::with_capacity(cfg.frames);
                for (t, pose) in world.iter().enumerate() {
                    let cam_pts: Vec<[f64; 3]> = pose
                        .iter()
                        .map(|p| {
                            let q = cam.to_camera(p);
                            [q.x, q.y, q.z]
                        })
                        .collect();
                    let mut keypoints_2d = k.project(&cam_pts)?;
                    if cfg.noise_px > 0.0 {
                        for kp in &mut keypoints_2d {
                            kp[0] += pixel.sample(&mut rng);
                            kp[1] += pixel.sample(&mut rng);
                        }
                    }
                    let r = cam_pts[skeleton.root];
                    let pose_3d = cam_pts
                        .iter()
                        .map(|p| [p[0] - r[0], p[1] - r[1], p[2] - r[2]])
                        .collect();
                    clip.push(PoseSample {
                        keypoints_2d,
                        pose_3d,
                        width: cfg.image_width,
                        height: cfg.image_height,
                        subject: format!("S{}", s + 1),
                        action: action.clone(),
                        camera: format!("C{c}"),
                        frame: t,
                    });
                }
                clips_samples.push(clip);
            }
        }
    }
    Ok(Dataset::from_samples(
        skeleton,
        clips_samples.into_iter().flatten(),
    ))
}
