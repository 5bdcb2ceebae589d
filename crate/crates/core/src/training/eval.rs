use super::batch::{assemble_inputs, prepare};
use crate::data::flip_flat;
use crate::error::{shape_err, Error, Result};
use crate::models::Model;
use crate::protocols::{
    joint_errors, occurrences, pa_mpjpe, rareness_deciles, MetricReport, SampleResult, TestSet,
};

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    /// Average with the un-flipped prediction of the mirrored input.
    pub flip_test: bool,
    /// Normalization tag the caller expects the model to use.
    pub normalization: Option<String>,
    /// Per-joint σ for rareness deciles; `None` skips the decile slices.
    pub decile_sigma: Option<Vec<f64>>,
    /// Include scale in the Procrustes alignment.
    pub pa_scale: bool,
    pub batch: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            flip_test: false,
            normalization: None,
            decile_sigma: None,
            pa_scale: true,
            batch: 1024,
        }
    }
}

/// Root-relative 3D predictions for every selected test sample.
pub fn predict_test(
    model: &Model,
    test: &TestSet,
    flip_test: bool,
    batch: usize,
) -> Result<Vec<Vec<[f64; 3]>>> {
    if test.is_empty() {
        return Ok(Vec::new());
    }
    if test.data.skeleton.n_joints() != model.config.n_joints {
        return Err(Error::Config(format!(
            "test set has {} joints, model expects {}",
            test.data.skeleton.n_joints(),
            model.config.n_joints
        )));
    }
    let clips = prepare(&test.data.clips, &model.normalization)?;
    let mirror = test.data.skeleton.mirror_map();
    let (frames, temporal) = (model.input_frames(), model.is_temporal());
    let mut out = Vec::with_capacity(test.len());
    for chunk in test.selected.chunks(batch.max(1)) {
        let picks: Vec<_> = chunk.iter().map(|&(c, f)| (c, f, false)).collect();
        let mut y = model.predict(&assemble_inputs(&clips, &picks, frames, temporal, &mirror)?)?;
        if flip_test {
            let flipped: Vec<_> = chunk.iter().map(|&(c, f)| (c, f, true)).collect();
            let yf = model.predict(&assemble_inputs(
                &clips, &flipped, frames, temporal, &mirror,
            )?)?;
            let w = model.output_width();
            for (r, row) in yf.data().chunks(w).enumerate() {
                let back = flip_flat(row, &mirror, 3);
                for (a, b) in y.data_mut()[r * w..(r + 1) * w].iter_mut().zip(back) {
                    *a = 0.5 * (*a + b);
                }
            }
        }
        out.extend(
            y.data()
                .chunks(model.output_width())
                .map(|row| row.chunks(3).map(|p| [p[0], p[1], p[2]]).collect()),
        );
    }
    Ok(out)
}

/// Scores given predictions against the selected test samples.
pub fn evaluate_predictions(
    test: &TestSet,
    preds: &[Vec<[f64; 3]>],
    decile_sigma: Option<&[f64]>,
    pa_scale: bool,
) -> Result<MetricReport> {
    if preds.len() != test.len() {
        return Err(shape_err("predictions", &[test.len()], &[preds.len()]));
    }
    let deciles = match decile_sigma {
        Some(sigma) if !test.is_empty() => {
            let poses: Vec<&[[f64; 3]]> = test.samples().map(|s| s.pose_3d.as_slice()).collect();
            Some(rareness_deciles(&occurrences(&poses, sigma)?))
        }
        _ => None,
    };
    let results = test
        .samples()
        .zip(preds)
        .enumerate()
        .map(|(k, (s, p))| {
            Ok(SampleResult {
                action: s.action.clone(),
                joint_errors: joint_errors(p, &s.pose_3d)?,
                pa_mpjpe: pa_mpjpe(p, &s.pose_3d, pa_scale)?,
                decile: deciles.as_ref().map(|d| d[k]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MetricReport::compute(&results)
}

pub fn evaluate(model: &Model, test: &TestSet, opts: &EvalOptions) -> Result<MetricReport> {
    if let Some(tag) = &opts.normalization {
        if tag != model.normalization.tag() {
            return Err(Error::Config(format!(
                "normalization mismatch: model was trained with {:?}, evaluation requested {tag:?}",
                model.normalization.tag()
            )));
        }
    }
    let preds = predict_test(model, test, opts.flip_test, opts.batch)?;
    evaluate_predictions(test, &preds, opts.decile_sigma.as_deref(), opts.pa_scale)
}
