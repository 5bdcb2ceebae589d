use serde::{Deserialize, Serialize};

use super::sample::PoseSample;
use crate::error::{Error, Result};

/// Maps pixels into roughly `[-1, 1]`, dividing both axes by the image
/// width so the aspect ratio survives: `x' = 2x/w − 1`, `y' = 2y/w − h/w`.
pub fn normalize_basic(keypoints: &[[f64; 2]], w: f64, h: f64) -> Result<Vec<f64>> {
    check_size(w, h)?;
    Ok(keypoints
        .iter()
        .flat_map(|&[x, y]| [2.0 * x / w - 1.0, 2.0 * y / w - h / w])
        .collect())
}

/// Inverse of [`normalize_basic`].
pub fn denormalize_basic(v: &[f64], w: f64, h: f64) -> Result<Vec<[f64; 2]>> {
    check_size(w, h)?;
    if v.len() % 2 != 0 {
        return Err(Error::Invalid(format!("odd coordinate count {}", v.len())));
    }
    Ok(v.chunks(2)
        .map(|c| [(c[0] + 1.0) * w / 2.0, (c[1] + h / w) * w / 2.0])
        .collect())
}

fn check_size(w: f64, h: f64) -> Result<()> {
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err(Error::Invalid(format!(
            "image size must be positive, got {w} x {h}"
        )));
    }
    Ok(())
}

/// Per-coordinate mean and standard deviation of training 2D inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl DatasetStats {
    /// Fits population statistics over flattened keypoint rows.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let Some(first) = rows.first() else {
            return Err(Error::Invalid(
                "cannot fit statistics on an empty set".into(),
            ));
        };
        let d = first.len();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Invalid(format!(
                "rows of width {d} and {} mixed",
                r.len()
            )));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in &rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n).sqrt()).collect();
        if let Some(k) = std
            .iter()
            .position(|&s| !(s > 1e-12 * (1.0 + mean_abs(&mean))))
        {
            return Err(Error::Invalid(format!(
                "coordinate {k} has zero standard deviation over the training set"
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn fit_samples<'a>(samples: impl IntoIterator<Item = &'a PoseSample>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = samples.into_iter().map(PoseSample::flat_2d).collect();
        Self::fit(rows.iter().map(Vec::as_slice))
    }
}

fn mean_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum::<f64>() / v.len().max(1) as f64
}

/// Standardizes each coordinate with training-split statistics.
pub fn normalize_pixel(keypoints: &[[f64; 2]], stats: &DatasetStats) -> Result<Vec<f64>> {
    if keypoints.len() * 2 != stats.mean.len() {
        return Err(Error::Invalid(format!(
            "statistics cover {} coordinates, keypoints have {}",
            stats.mean.len(),
            keypoints.len() * 2
        )));
    }
    Ok(keypoints
        .iter()
        .flatten()
        .zip(stats.mean.iter().zip(&stats.std))
        .map(|(v, (m, s))| (v - m) / s)
        .collect())
}

/// Input normalization a model is trained with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Normalization {
    Basic,
    Pixel(DatasetStats),
}

impl Normalization {
    pub fn tag(&self) -> &'static str {
        match self {
            Normalization::Basic => "basic",
            Normalization::Pixel(_) => "pixel",
        }
    }

    pub fn apply(&self, s: &PoseSample) -> Result<Vec<f64>> {
        match self {
            Normalization::Basic => normalize_basic(&s.keypoints_2d, s.width, s.height),
            Normalization::Pixel(st) => normalize_pixel(&s.keypoints_2d, st),
        }
    }
}
