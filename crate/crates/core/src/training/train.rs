use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{assemble_inputs, assemble_targets, prepare};
use super::loss::l1_loss;
use super::optim::{lr_at_epoch, AmsGrad, OptimizerState};
use crate::data::{Dataset, DatasetStats, Normalization};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::models::{save_checkpoint, Model};
use crate::numerics::{Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationKind {
    Basic,
    Pixel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr0: f64,
    pub decay: f64,
    pub epochs: usize,
    pub batch: usize,
    pub optimizer: AmsGrad,
    pub seed: u64,
    pub flip: bool,
    /// Floating-point width in bits; only 64 is supported.
    pub precision: u32,
    pub normalization: NormalizationKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.001,
            decay: 0.95,
            epochs: 80,
            batch: 1024,
            optimizer: AmsGrad::default(),
            seed: 0,
            flip: true,
            precision: 64,
            normalization: NormalizationKind::Basic,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) {
            return Err(Error::Config(format!("lr0 > 0 violated: {}", self.lr0)));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!(
                "0 < decay ≤ 1 violated: {}",
                self.decay
            )));
        }
        if self.batch < 2 {
            return Err(Error::Config(format!("batch ≥ 2 violated: {}", self.batch)));
        }
        if self.precision != 64 {
            return Err(Error::Config(format!(
                "precision {} is not supported, only 64",
                self.precision
            )));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        lr_at_epoch(self.lr0, self.decay, epoch)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("epoch\tlr\ttrain_loss\twall_seconds\n");
        for e in &self.epochs {
            writeln!(
                s,
                "{}\t{}\t{}\t{:.3}",
                e.epoch, e.lr, e.train_loss, e.wall_seconds
            )
            .expect("write to string");
        }
        s
    }

    /// The reproducible columns, without timing.
    pub fn trajectory(&self) -> Vec<(usize, f64, f64)> {
        self.epochs
            .iter()
            .map(|e| (e.epoch, e.lr, e.train_loss))
            .collect()
    }
}

pub const CHECKPOINT_FILE: &str = "last.ckpt";
pub const LOG_FILE: &str = "train_log.tsv";

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Trains `model` in place. When `out_dir` is given, the checkpoint and the
/// log are rewritten there after every epoch.
pub fn train(
    model: &mut Model,
    data: &Dataset,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> Result<TrainLog> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    if data.skeleton.n_joints() != model.config.n_joints {
        return Err(Error::Config(format!(
            "dataset has {} joints, model expects {}",
            data.skeleton.n_joints(),
            model.config.n_joints
        )));
    }
    model.normalization = match cfg.normalization {
        NormalizationKind::Basic => Normalization::Basic,
        NormalizationKind::Pixel => {
            Normalization::Pixel(DatasetStats::fit_samples(data.samples())?)
        }
    };
    let clips = prepare(&data.clips, &model.normalization)?;
    let index: Vec<(usize, usize)> = clips
        .iter()
        .enumerate()
        .flat_map(|(c, clip)| (0..clip.targets.len()).map(move |f| (c, f)))
        .collect();
    let mirror = data.skeleton.mirror_map();
    let (frames, temporal) = (model.input_frames(), model.is_temporal());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = OptimizerState::new(&model.params);
    let mut log = TrainLog::default();
    let start = Instant::now();
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        let mut order = index.clone();
        order.shuffle(&mut rng);
        let picks: Vec<(usize, usize, bool)> = order
            .iter()
            .map(|&(c, f)| (c, f, cfg.flip && rng.random_bool(0.5)))
            .collect();
        let (mut total, mut count) = (0.0, 0usize);
        for (b, chunk) in picks.chunks(cfg.batch).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let x = assemble_inputs(&clips, chunk, frames, temporal, &mirror)?;
            let y = assemble_targets(&clips, chunk, &mirror)?;
            let loss = train_step(model, &mut state, &cfg.optimizer, x, y, lr)
                .map_err(|e| Error::NonFinite(format!("epoch {epoch}, batch {b}: {e}")))?;
            total += loss * chunk.len() as f64;
            count += chunk.len();
        }
        log.epochs.push(EpochLog {
            epoch,
            lr,
            train_loss: total / count.max(1) as f64,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        if let Some(dir) = out_dir {
            save_checkpoint(model, dir.join(CHECKPOINT_FILE))?;
            write_atomic(&dir.join(LOG_FILE), &log.to_tsv())?;
        }
    }
    Ok(log)
}

/// One optimizer step on a batch; returns the batch loss.
pub fn train_step(
    model: &mut Model,
    state: &mut OptimizerState,
    opt: &AmsGrad,
    x: Tensor,
    y: Tensor,
    lr: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let mut ctx = model.ctx(&mut tape, Mode::Train, true);
    let xv = ctx.tape.constant(x);
    let out = model.forward(&mut ctx, xv)?;
    let vars = ctx.param_vars().to_vec();
    let updates = ctx.into_updates();
    let target = tape.constant(y);
    let loss = l1_loss(&mut tape, out, target)?;
    let value = tape.value(loss).item()?;
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("loss is {value}")));
    }
    let mut grads = tape.backward(loss)?;
    let g: Vec<Tensor> = vars
        .iter()
        .map(|v| grads.take(*v).expect("every parameter is a gradient leaf"))
        .collect();
    opt.step(&mut model.params, &g, state, lr)?;
    model.apply_updates(updates);
    Ok(value)
}
