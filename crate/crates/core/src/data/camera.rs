use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::Config(format!(
                "focal lengths must be positive, got {fx}, {fy}"
            )));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Projects camera-frame points (z forward, mm) to pixels.
    pub fn project(&self, pose: &[[f64; 3]]) -> Result<Vec<[f64; 2]>> {
        pose.iter()
            .enumerate()
            .map(|(j, &[x, y, z])| {
                if !(z > 0.0) {
                    return Err(Error::Invalid(format!(
                        "joint {j} has depth {z}, must be in front of the camera"
                    )));
                }
                Ok([self.fx * x / z + self.cx, self.fy * y / z + self.cy])
            })
            .collect()
    }
}

/// Rigid world-to-camera transform: `p_cam = R (p_world − centre)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub centre: Vector3<f64>,
}

impl CameraPose {
    /// Camera at `centre` aimed at `target` with world `up`; camera axes are
    /// x right, y down, z forward.
    pub fn look_at(centre: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Result<Self> {
        let f = (target - centre)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Config("camera centre coincides with its target".into()))?;
        let r = f
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Config("camera looks along its up vector".into()))?;
        let d = f.cross(&r);
        Ok(Self {
            rotation: Matrix3::from_rows(&[r.transpose(), d.transpose(), f.transpose()]),
            centre,
        })
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * (p - self.centre)
    }
}
