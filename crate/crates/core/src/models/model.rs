use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, ModelKind};
use crate::data::Normalization;
use crate::error::{shape_err, Error, Result};
use crate::layers::{
    Builder, ChannelLayout, ConnectedLayer, Connectivity, Ctx, GroupingScheme, LayerShape, Mode,
    ParamStore, ResidualBlock, RunningStats,
};
use crate::numerics::{BatchStats, Tape, Tensor, Var};

/// A layer or a residual pair of layers.
#[derive(Clone, Debug)]
pub enum Stage {
    Layer(ConnectedLayer),
    Block(ResidualBlock),
}

impl Stage {
    fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        match self {
            Stage::Layer(l) => l.forward(ctx, x),
            Stage::Block(b) => b.forward(ctx, x),
        }
    }

    pub fn layers(&self) -> Vec<&ConnectedLayer> {
        match self {
            Stage::Layer(l) => vec![l],
            Stage::Block(b) => b.layers().to_vec(),
        }
    }
}

/// A complete lifting network with its parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub seed: u64,
    pub grouping: GroupingScheme,
    pub normalization: Normalization,
    pub params: ParamStore,
    pub running: Vec<RunningStats>,
    stages: Vec<Stage>,
}

/// Connectivity of layer `l` (1-based) out of `n`.
fn connectivity(kind: &ModelKind, l: usize, n: usize) -> Connectivity {
    let grouped = |g: bool| {
        if g {
            Connectivity::Group
        } else {
            Connectivity::Dense
        }
    };
    match *kind {
        ModelKind::Fc => Connectivity::Dense,
        ModelKind::Gp => Connectivity::Group,
        ModelKind::Lf { fuse } => grouped(l <= fuse),
        ModelKind::Es { split } => grouped(l >= split),
        ModelKind::Sfs { link } => {
            let start = 2 + (n - 2 - link) / 2;
            grouped(!(start..start + link).contains(&l))
        }
        ModelKind::Sr { recombine } => Connectivity::SplitRecombine(recombine),
    }
}

/// Builds the network for `config`, drawing every random choice from `seed`.
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<Model> {
    let base = config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grouping = if config.shuffle_groups > 0 {
        base.shuffled(config.shuffle_groups, &mut rng)?
    } else {
        base
    };
    let n = config.layers();
    let input = grouping.joint_layout(2);
    let hidden = grouping.block_layout(config.width)?;
    let output = grouping.joint_layout(3);
    let kernels = config
        .temporal
        .as_ref()
        .map(|t| (t.kernels.clone(), t.dilations()));
    let shape_of = |l: usize| -> LayerShape {
        let interior = l < n;
        match &kernels {
            None => LayerShape::connected(interior),
            Some((ks, ds)) => {
                // layer 1 and the first layer of each block carry a kernel
                if l == 1 {
                    LayerShape::temporal(ks[0], ds[0], interior)
                } else if l < n && l % 2 == 0 {
                    let b = l / 2;
                    LayerShape::temporal(ks[b], ds[b], interior)
                } else {
                    LayerShape::temporal(1, 1, interior)
                }
            }
        }
    };
    let mut params = ParamStore::new();
    let mut running = Vec::new();
    let mut b = Builder::new(&mut params, &mut running, &mut rng);
    let mut layers = Vec::with_capacity(n);
    for l in 1..=n {
        let inp: &ChannelLayout = if l == 1 { &input } else { &hidden };
        let out: &ChannelLayout = if l == n { &output } else { &hidden };
        layers.push(ConnectedLayer::build(
            &mut b,
            &format!("l{l}"),
            inp,
            out,
            connectivity(&config.kind, l, n),
            shape_of(l),
        )?);
    }
    let mut stages = Vec::new();
    let mut it = layers.into_iter();
    stages.push(Stage::Layer(it.next().expect("at least two layers")));
    for _ in 0..(n - 2) / 2 {
        let first = it.next().expect("block layer");
        let second = it.next().expect("block layer");
        stages.push(Stage::Block(ResidualBlock::new(first, second)?));
    }
    stages.push(Stage::Layer(it.next().expect("output layer")));
    Ok(Model {
        config: config.clone(),
        seed,
        grouping,
        normalization: Normalization::Basic,
        params,
        running,
        stages,
    })
}

/// Exact number of learnable scalars: weights, biases and batch-norm scales
/// and shifts.
pub fn count_params(model: &Model) -> usize {
    model.params.count()
}

impl Model {
    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn layers(&self) -> Vec<&ConnectedLayer> {
        self.stages.iter().flat_map(Stage::layers).collect()
    }

    pub fn input_width(&self) -> usize {
        2 * self.config.n_joints
    }

    pub fn output_width(&self) -> usize {
        3 * self.config.n_joints
    }

    /// Frames per input window; 1 for single-frame models.
    pub fn input_frames(&self) -> usize {
        self.config.input_frames()
    }

    pub fn is_temporal(&self) -> bool {
        self.config.temporal.is_some()
    }

    /// Per-pass context over this model's parameters.
    pub fn ctx<'a>(&'a self, tape: &'a mut Tape, mode: Mode, requires_grad: bool) -> Ctx<'a> {
        Ctx::new(tape, &self.params, &self.running, mode, requires_grad)
    }

    /// Maps `[batch × 2N]` (or `[batch × T × 2N]` for temporal models) to
    /// `[batch × 3N]`.
    pub fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        let shape = ctx.tape.shape(x).to_vec();
        let expected: Vec<usize> = if self.is_temporal() {
            vec![
                shape.first().copied().unwrap_or(0),
                self.input_frames(),
                self.input_width(),
            ]
        } else {
            vec![shape.first().copied().unwrap_or(0), self.input_width()]
        };
        if shape != expected {
            return Err(shape_err("model input", &expected, &shape));
        }
        let mut h = x;
        for stage in &self.stages {
            h = stage.forward(ctx, h)?;
        }
        if self.is_temporal() {
            h = ctx.tape.reshape(h, &[shape[0], self.output_width()])?;
        }
        Ok(h)
    }

    /// Runs a temporal model over `[batch × T × 2N]` with `T` at least the
    /// receptive field, giving one pose per full window:
    /// `[batch × (T − frames + 1) × 3N]`.
    pub fn forward_sequence(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        let shape = ctx.tape.shape(x).to_vec();
        if !self.is_temporal()
            || shape.len() != 3
            || shape[1] < self.input_frames()
            || shape[2] != self.input_width()
        {
            return Err(Error::InvalidShape {
                shape,
                reason: format!(
                    "temporal model needs [batch, T ≥ {}, {}]",
                    self.input_frames(),
                    self.input_width()
                ),
            });
        }
        let mut h = x;
        for stage in &self.stages {
            h = stage.forward(ctx, h)?;
        }
        Ok(h)
    }

    /// Inference with running statistics.
    pub fn predict(&self, inputs: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let mut ctx = self.ctx(&mut tape, Mode::Eval, false);
        let x = ctx.tape.constant(inputs.clone());
        let y = self.forward(&mut ctx, x)?;
        Ok(tape.value(y).clone())
    }

    /// Folds training-pass batch statistics into the running estimates.
    pub fn apply_updates(&mut self, updates: Vec<(usize, BatchStats)>) {
        for (idx, stats) in updates {
            self.running[idx].update(&stats);
        }
    }
}
