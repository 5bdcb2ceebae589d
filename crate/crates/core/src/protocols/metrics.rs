use nalgebra::{Matrix3, Matrix3xX, Vector3};

use crate::error::{shape_err, Error, Result};

pub type Pose3 = [[f64; 3]];

/// Thresholds in mm averaged by [`pck_auc`].
pub const AUC_THRESHOLDS: [f64; 30] = {
    let mut t = [0.0; 30];
    let mut i = 0;
    while i < 30 {
        t[i] = 5.0 * (i + 1) as f64;
        i += 1;
    }
    t
};

pub const PCK_THRESHOLD: f64 = 150.0;

fn check_pair(pred: &Pose3, gt: &Pose3) -> Result<()> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(shape_err("pose pair", &[pred.len(), 3], &[gt.len(), 3]));
    }
    Ok(())
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Euclidean error of each joint.
pub fn joint_errors(pred: &Pose3, gt: &Pose3) -> Result<Vec<f64>> {
    check_pair(pred, gt)?;
    Ok(pred.iter().zip(gt).map(|(p, g)| dist(p, g)).collect())
}

/// Mean per-joint position error.
pub fn mpjpe(pred: &Pose3, gt: &Pose3) -> Result<f64> {
    let e = joint_errors(pred, gt)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

fn to_matrix(p: &Pose3) -> Matrix3xX<f64> {
    Matrix3xX::from_fn(p.len(), |r, c| p[c][r])
}

/// Similarity (or rigid, without `scale`) transform minimizing the squared
/// distance from transformed `pred` to `gt`.
#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub rotation: Matrix3<f64>,
    pub scale: f64,
    pub translation: Vector3<f64>,
}

impl Alignment {
    pub fn apply(&self, p: &Pose3) -> Vec<[f64; 3]> {
        p.iter()
            .map(|q| {
                let v = self.scale * (self.rotation * Vector3::from(*q)) + self.translation;
                [v.x, v.y, v.z]
            })
            .collect()
    }
}

/// Orthogonal Procrustes with reflection correction.
pub fn procrustes(pred: &Pose3, gt: &Pose3, scale: bool) -> Result<Alignment> {
    check_pair(pred, gt)?;
    let x = to_matrix(pred);
    let y = to_matrix(gt);
    let mx = x.column_mean();
    let my = y.column_mean();
    let xc = Matrix3xX::from_fn(x.ncols(), |r, c| x[(r, c)] - mx[r]);
    let yc = Matrix3xX::from_fn(y.ncols(), |r, c| y[(r, c)] - my[r]);
    let gt_sv = (&yc * yc.transpose()).symmetric_eigenvalues();
    let mut ev: Vec<f64> = gt_sv.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if gt.len() < 3 || !(ev[1] > 1e-12 * ev[0].max(f64::MIN_POSITIVE)) {
        return Err(Error::Invalid(
            "ground-truth joints are collinear; alignment is undefined".into(),
        ));
    }
    let m = &yc * xc.transpose();
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let d = (u * vt).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let rotation = u * fix * vt;
    let sv = svd.singular_values;
    let s = if scale {
        let norm = xc.norm_squared();
        if norm > 0.0 {
            (sv[0] + sv[1] + d * sv[2]) / norm
        } else {
            0.0
        }
    } else {
        1.0
    };
    let translation = my - s * (rotation * mx);
    Ok(Alignment {
        rotation,
        scale: s,
        translation,
    })
}

/// MPJPE after Procrustes alignment of `pred` onto `gt`.
pub fn pa_mpjpe(pred: &Pose3, gt: &Pose3, scale: bool) -> Result<f64> {
    let a = procrustes(pred, gt, scale)?;
    mpjpe(&a.apply(pred), gt)
}

/// Fraction of errors strictly below `threshold`.
pub fn pck(errors: &[f64], threshold: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Invalid("PCK of an empty error set".into()));
    }
    Ok(errors.iter().filter(|&&e| e < threshold).count() as f64 / errors.len() as f64)
}

/// PCK at 150 mm and its mean over [`AUC_THRESHOLDS`].
pub fn pck_auc(errors: &[f64]) -> Result<(f64, f64)> {
    let p = pck(errors, PCK_THRESHOLD)?;
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let auc = AUC_THRESHOLDS
        .iter()
        .map(|&t| sorted.partition_point(|&e| e < t) as f64 / n)
        .sum::<f64>()
        / AUC_THRESHOLDS.len() as f64;
    Ok((p, auc))
}
