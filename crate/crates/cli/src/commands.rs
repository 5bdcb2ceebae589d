use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use srlift_core::data::{load_dataset, save_dataset, Dataset, SynthConfig};
use srlift_core::layers::{ContextWidth, Recombine, RecombineKind};
use srlift_core::models::{
    build_model, count_params, load_checkpoint, Grouping, ModelConfig, ModelKind, TemporalConfig,
};
use srlift_core::protocols::{
    build_split, occurrences, rank_by_occurrence, rare_count, MetricReport, ProtocolKind,
    ProtocolSpec, DEFAULT_SIGMA_MM,
};
use srlift_core::training::{
    evaluate, train, AmsGrad, EvalOptions, NormalizationKind, TrainConfig, CHECKPOINT_FILE,
    LOG_FILE,
};

use crate::manifest::{manifest_for_file, write_atomic, RunManifest};

#[derive(Parser, Debug)]
#[command(
    name = "srlift",
    version,
    about = "Split-and-recombine 2D-to-3D pose lifting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Generate a synthetic dataset file.
    SynthData(SynthArgs),
    /// Train a model; writes checkpoint, log and manifest to --out.
    Train(TrainArgs),
    /// Evaluate a checkpoint and write a metric report.
    Eval(EvalArgs),
    /// Rank poses by occurrence and list the rarest R%.
    RankRare(RankArgs),
    /// Print the learnable parameter count of a model.
    ParamCount(ParamCountArgs),
    /// Merge metric reports into one CSV table.
    Report(ReportArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// Key-value file with defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, required = true)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub subjects: usize,
    /// Two letters each, upper-body then lower-body pattern.
    #[arg(long, value_delimiter = ',', default_value = "AA,BB,AB,BA")]
    pub actions: Vec<String>,
    #[arg(long, default_value_t = 500)]
    pub frames: usize,
    #[arg(long, default_value_t = 4)]
    pub cameras: usize,
    #[arg(long, default_value_t = 2.0)]
    pub noise_px: f64,
    #[arg(long, default_value_t = 0.04)]
    pub angle_jitter: f64,
    #[arg(long, default_value_t = 0.05)]
    pub bone_jitter: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Fc,
    Gp,
    Lf,
    Es,
    Sfs,
    Sr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecombineName {
    Concat,
    Mult,
    Add,
}

#[derive(Args, Debug, Serialize)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub model: ModelName,
    /// Late fusion: number of leading grouped layers.
    #[arg(long)]
    pub fuse: Option<usize>,
    /// Early split: first grouped layer.
    #[arg(long)]
    pub split: Option<usize>,
    /// Split-fuse-split: number of dense middle layers.
    #[arg(long, default_value_t = 2)]
    pub link: usize,
    #[arg(long, value_enum, default_value_t = RecombineName::Mult)]
    pub recombine: RecombineName,
    /// Context width: a number, `local` (group width) or `full`. Defaults to
    /// `local` for add and 1 otherwise.
    #[arg(long = "H")]
    pub h: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub groups: usize,
    #[arg(long, default_value_t = 0)]
    pub shuffle_groups: usize,
    #[arg(long, default_value_t = 1024)]
    pub width: usize,
    #[arg(long, default_value_t = 8)]
    pub layers: usize,
    /// Temporal kernel sizes, e.g. 3,3,3,3,3.
    #[arg(long, value_delimiter = ',')]
    pub kernels: Vec<usize>,
}

impl ModelArgs {
    fn recombine(&self) -> Result<Recombine> {
        let kind = match self.recombine {
            RecombineName::Concat => RecombineKind::Concat,
            RecombineName::Mult => RecombineKind::Multiply,
            RecombineName::Add => RecombineKind::Add,
        };
        let width = match self.h.as_deref() {
            None if kind == RecombineKind::Add => ContextWidth::Local,
            None => ContextWidth::Fixed(1),
            Some("full") => ContextWidth::Full,
            Some("local") => ContextWidth::Local,
            Some(h) => ContextWidth::Fixed(
                h.parse()
                    .with_context(|| format!("--H must be a number, local or full, got {h:?}"))?,
            ),
        };
        Ok(Recombine::new(kind, width))
    }

    pub fn to_config(&self, n_joints: usize) -> Result<ModelConfig> {
        let kind = match self.model {
            ModelName::Fc => ModelKind::Fc,
            ModelName::Gp => ModelKind::Gp,
            ModelName::Lf => ModelKind::Lf {
                fuse: self.fuse.context("--model lf needs --fuse")?,
            },
            ModelName::Es => ModelKind::Es {
                split: self.split.context("--model es needs --split")?,
            },
            ModelName::Sfs => ModelKind::Sfs { link: self.link },
            ModelName::Sr => ModelKind::Sr {
                recombine: self.recombine()?,
            },
        };
        let cfg = ModelConfig {
            kind,
            n_joints,
            depth: self.layers,
            width: self.width,
            grouping: Grouping::Standard(self.groups),
            shuffle_groups: self.shuffle_groups,
            temporal: (!self.kernels.is_empty()).then(|| TemporalConfig {
                kernels: self.kernels.clone(),
            }),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolName {
    Subject,
    CrossAction,
    RarePose,
}

#[derive(Args, Debug, Serialize)]
pub struct SplitArgs {
    #[arg(long, value_enum, default_value_t = ProtocolName::Subject)]
    pub protocol: ProtocolName,
    /// Defaults to every subject but the last.
    #[arg(long, value_delimiter = ',')]
    pub train_subjects: Vec<String>,
    /// Defaults to the last subject.
    #[arg(long, value_delimiter = ',')]
    pub test_subjects: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub train_actions: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub test_actions: Vec<String>,
    /// Training action of the cross-action protocol.
    #[arg(long)]
    pub train_action: Option<String>,
    /// Percentage of rarest test poses kept by the rare-pose protocol.
    #[arg(long)]
    pub rare: Option<f64>,
    /// Per-joint σ in mm, one value for all joints or one per joint.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Vec<f64>,
}

fn sigma_for(values: &[f64], n: usize) -> Result<Vec<f64>> {
    match values.len() {
        0 => Ok(vec![DEFAULT_SIGMA_MM; n]),
        1 => Ok(vec![values[0]; n]),
        k if k == n => Ok(values.to_vec()),
        k => bail!("--sigma needs 1 or {n} values, got {k}"),
    }
}

impl SplitArgs {
    pub fn to_spec(&self, ds: &Dataset) -> Result<ProtocolSpec> {
        let subjects = ds.subjects();
        ensure!(
            subjects.len() >= 2 || !self.test_subjects.is_empty(),
            "dataset needs at least two subjects for a default split"
        );
        let test = if self.test_subjects.is_empty() {
            vec![subjects.last().cloned().unwrap_or_default()]
        } else {
            self.test_subjects.clone()
        };
        let train = if self.train_subjects.is_empty() {
            subjects
                .iter()
                .filter(|s| !test.contains(s))
                .cloned()
                .collect()
        } else {
            self.train_subjects.clone()
        };
        let kind = match self.protocol {
            ProtocolName::Subject => {
                ensure!(self.rare.is_none(), "--rare needs --protocol rare-pose");
                ProtocolKind::Subject
            }
            ProtocolName::CrossAction => ProtocolKind::CrossAction {
                train_action: self
                    .train_action
                    .clone()
                    .context("cross-action protocol needs --train-action")?,
            },
            ProtocolName::RarePose => ProtocolKind::RarePose {
                percent: self.rare.unwrap_or(100.0),
                sigma: sigma_for(&self.sigma, ds.skeleton.n_joints())?,
            },
        };
        let spec = ProtocolSpec {
            kind,
            train_subjects: train,
            test_subjects: test,
            train_actions: self.train_actions.clone(),
            test_actions: self.test_actions.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormName {
    Basic,
    Pixel,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, required = true)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 80)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.95)]
    pub decay: f64,
    #[arg(long, default_value_t = 1024)]
    pub batch: usize,
    #[arg(long, value_enum, default_value_t = NormName::Basic)]
    pub normalization: NormName,
    /// Disable flip augmentation.
    #[arg(long)]
    pub no_flip: bool,
    /// Floating-point width in bits; only 64 is supported.
    #[arg(long, default_value_t = 64)]
    pub precision: u32,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Average predictions of the input and its mirror image.
    #[arg(long)]
    pub flip_test: bool,
    /// Normalization the checkpoint must have been trained with.
    #[arg(long)]
    pub normalization: Option<String>,
    /// Add per-rareness-decile MPJPE rows.
    #[arg(long)]
    pub deciles: bool,
    /// Report path; defaults to report.csv next to the checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    pub batch: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct RankArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Per-joint σ in mm, one value for all joints or one per joint.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Vec<f64>,
    /// Percentage of rarest poses to list.
    #[arg(long = "R", default_value_t = 100.0)]
    pub r: f64,
    /// Restrict to these subjects.
    #[arg(long, value_delimiter = ',')]
    pub subjects: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct ParamCountArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 17)]
    pub joints: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directories (holding report.csv) or report files.
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    /// Output CSV; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const REPORT_FILE: &str = "report.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn run(cli: Cli, argv: &[String]) -> Result<()> {
    match cli.cmd {
        Cmd::SynthData(a) => synth_data(a, argv),
        Cmd::Train(a) => train_cmd(a, argv),
        Cmd::Eval(a) => eval_cmd(a, argv),
        Cmd::RankRare(a) => rank_rare(a, argv),
        Cmd::ParamCount(a) => param_count(a),
        Cmd::Report(a) => report(a, argv),
    }
}

fn synth_data(a: SynthArgs, argv: &[String]) -> Result<()> {
    let seed = a.seed.context("--seed is required")?;
    let mut m = RunManifest::new("synth-data", argv, serde_json::to_value(&a)?);
    let cfg = SynthConfig {
        subjects: a.subjects,
        actions: a.actions.clone(),
        frames: a.frames,
        cameras: a.cameras,
        noise_px: a.noise_px,
        angle_jitter: a.angle_jitter,
        bone_jitter: a.bone_jitter,
        seed,
        ..SynthConfig::default()
    };
    let ds = srlift_core::data::synth_generate(&cfg)?;
    save_dataset(&ds, &a.out)?;
    m.seeds.push(seed);
    m.outputs.push(a.out.clone());
    m.write(&manifest_for_file(&a.out))?;
    println!(
        "wrote {} frames in {} clips to {}",
        ds.len(),
        ds.clips.len(),
        a.out.display()
    );
    Ok(())
}

fn train_cmd(a: TrainArgs, argv: &[String]) -> Result<()> {
    let seed = a.seed.context("--seed is required")?;
    let mut m = RunManifest::new("train", argv, serde_json::to_value(&a)?);
    let ds = load_dataset(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let spec = a.split.to_spec(&ds)?;
    let (train_set, _) = build_split(&ds, &spec)?;
    let mc = a.model.to_config(ds.skeleton.n_joints())?;
    let tc = TrainConfig {
        lr0: a.lr,
        decay: a.decay,
        epochs: a.epochs,
        batch: a.batch,
        optimizer: AmsGrad::default(),
        seed,
        flip: !a.no_flip,
        precision: a.precision,
        normalization: match a.normalization {
            NormName::Basic => NormalizationKind::Basic,
            NormName::Pixel => NormalizationKind::Pixel,
        },
    };
    tc.validate()?;
    std::fs::create_dir_all(&a.out)?;
    let mut model = build_model(&mc, seed)?;
    let log = train(&mut model, &train_set, &tc, Some(&a.out))?;
    m.config["resolved_model"] = serde_json::to_value(&mc)?;
    m.config["resolved_training"] = serde_json::to_value(&tc)?;
    m.config["resolved_protocol"] = serde_json::to_value(&spec)?;
    m.seeds.push(seed);
    m.inputs.push(a.data.clone());
    m.outputs
        .extend([a.out.join(CHECKPOINT_FILE), a.out.join(LOG_FILE)]);
    m.write(&a.out.join(MANIFEST_FILE))?;
    if let Some(last) = log.epochs.last() {
        println!(
            "trained {} ({} parameters) on {} frames; final loss {:.3} mm",
            mc.kind.name(),
            count_params(&model),
            train_set.len(),
            last.train_loss
        );
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs, argv: &[String]) -> Result<()> {
    let mut m = RunManifest::new("eval", argv, serde_json::to_value(&a)?);
    let model =
        load_checkpoint(&a.ckpt).with_context(|| format!("loading {}", a.ckpt.display()))?;
    let ds = load_dataset(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let spec = a.split.to_spec(&ds)?;
    let (_, test) = build_split(&ds, &spec)?;
    let sigma = sigma_for(&a.split.sigma, ds.skeleton.n_joints())?;
    let opts = EvalOptions {
        flip_test: a.flip_test,
        normalization: a.normalization.clone(),
        decile_sigma: a.deciles.then_some(sigma),
        batch: a.batch,
        ..EvalOptions::default()
    };
    let report = evaluate(&model, &test, &opts)?;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| a.ckpt.parent().unwrap_or(Path::new(".")).join(REPORT_FILE));
    write_atomic(&out, &report.to_csv())?;
    m.inputs.extend([a.ckpt.clone(), a.data.clone()]);
    m.outputs.push(out.clone());
    m.write(&manifest_for_file(&out))?;
    print!("{}", report.to_table());
    Ok(())
}

fn rank_rare(a: RankArgs, argv: &[String]) -> Result<()> {
    let mut m = RunManifest::new("rank-rare", argv, serde_json::to_value(&a)?);
    let ds = load_dataset(&a.data).with_context(|| format!("loading {}", a.data.display()))?;
    let sigma = sigma_for(&a.sigma, ds.skeleton.n_joints())?;
    let samples: Vec<_> = ds
        .samples()
        .enumerate()
        .filter(|(_, s)| a.subjects.is_empty() || a.subjects.contains(&s.subject))
        .collect();
    let poses: Vec<&[[f64; 3]]> = samples.iter().map(|(_, s)| s.pose_3d.as_slice()).collect();
    let occ = occurrences(&poses, &sigma)?;
    let keep = rare_count(a.r, poses.len())?;
    let mut text = String::from("rank\tindex\tsubject\taction\tcamera\tframe\toccurrence\n");
    for (rank, &k) in rank_by_occurrence(&occ).iter().take(keep).enumerate() {
        let (idx, s) = samples[k];
        writeln!(
            text,
            "{rank}\t{idx}\t{}\t{}\t{}\t{}\t{:.17e}",
            s.subject, s.action, s.camera, s.frame, occ[k]
        )?;
    }
    write_atomic(&a.out, &text)?;
    m.inputs.push(a.data.clone());
    m.outputs.push(a.out.clone());
    m.write(&manifest_for_file(&a.out))?;
    println!(
        "{keep} of {} poses written to {}",
        poses.len(),
        a.out.display()
    );
    Ok(())
}

fn param_count(a: ParamCountArgs) -> Result<()> {
    let mc = a.model.to_config(a.joints)?;
    println!("{}", count_params(&build_model(&mc, 0)?));
    Ok(())
}

fn report(a: ReportArgs, argv: &[String]) -> Result<()> {
    let mut m = RunManifest::new("report", argv, serde_json::to_value(&a)?);
    let mut text = String::from("run,name,slice,value,count\n");
    for run in &a.runs {
        let path = if run.is_dir() {
            run.join(REPORT_FILE)
        } else {
            run.clone()
        };
        let csv = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        let r =
            MetricReport::from_csv(&csv).with_context(|| format!("parsing {}", path.display()))?;
        let label = run.display().to_string();
        ensure!(!label.contains(','), "run path {label:?} contains a comma");
        for row in &r.rows {
            writeln!(
                text,
                "{label},{},{},{},{}",
                row.name, row.slice, row.value, row.count
            )?;
        }
        m.inputs.push(path);
    }
    match &a.out {
        Some(out) => {
            write_atomic(out, &text)?;
            m.outputs.push(out.clone());
            m.write(&manifest_for_file(out))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}
