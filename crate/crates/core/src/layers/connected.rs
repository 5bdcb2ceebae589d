use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numerics::{NormMode, Tensor, Var, BN_EPS, LEAKY_SLOPE};

use super::grouping::ChannelLayout;
use super::params::{init_uniform, Ctx, Mode, ParamId, ParamStore, RunningStats};

/// How the context summary joins a group's own features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecombineKind {
    Concat,
    Multiply,
    Add,
}

/// Width `H` of the context summary fed into each group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextWidth {
    Fixed(usize),
    /// The group's own input width, for elementwise multiply/add.
    Local,
    /// Everything outside the group, i.e. no compression.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recombine {
    pub kind: RecombineKind,
    pub width: ContextWidth,
}

impl Recombine {
    pub fn new(kind: RecombineKind, width: ContextWidth) -> Self {
        Self { kind, width }
    }

    /// Resolves `H` for a group with `local` own channels and `others`
    /// channels elsewhere, rejecting combinations the operator cannot use.
    pub fn resolve(&self, local: usize, others: usize) -> Result<usize> {
        let h = match self.width {
            ContextWidth::Fixed(h) => h,
            ContextWidth::Local => local,
            ContextWidth::Full => others,
        };
        if h == 0 || others == 0 {
            return Ok(0);
        }
        match self.kind {
            RecombineKind::Concat => Ok(h),
            RecombineKind::Multiply | RecombineKind::Add if h == 1 || h == local => Ok(h),
            kind => Err(Error::Config(format!(
                "{kind:?} recombination needs H = 1 or H = group width {local}, got H = {h}"
            ))),
        }
    }
}

/// Connection pattern between a layer's input and output groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    /// Every output sees every input.
    Dense,
    /// Block-diagonal: each group sees only its own channels.
    Group,
    /// Group layer plus a low-dimensional summary of the other groups.
    SplitRecombine(Recombine),
}

/// Geometry of a layer beyond its channel layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    /// Temporal layers take `batch × T × channels` and convolve over `T`.
    pub temporal: bool,
    pub kernel: usize,
    pub dilation: usize,
    /// Interior layers apply batch norm and the leaky rectifier; the output
    /// layer is affine only.
    pub interior: bool,
}

impl LayerShape {
    pub fn connected(interior: bool) -> Self {
        Self {
            temporal: false,
            kernel: 1,
            dilation: 1,
            interior,
        }
    }

    pub fn temporal(kernel: usize, dilation: usize, interior: bool) -> Self {
        Self {
            temporal: true,
            kernel,
            dilation,
            interior,
        }
    }

    /// Frames consumed beyond the output length.
    pub fn span(&self) -> usize {
        self.dilation * (self.kernel - 1)
    }
}

/// Parameter handles of one group's path through a layer.
#[derive(Clone, Debug)]
pub struct Branch {
    pub inputs: Vec<usize>,
    pub weight: ParamId,
    pub bias: ParamId,
    pub context: Option<ContextMap>,
}

/// Linear map from the channels outside a group to its `H`-wide summary.
#[derive(Clone, Debug)]
pub struct ContextMap {
    pub others: Vec<usize>,
    pub map: ParamId,
    pub width: usize,
    pub kind: RecombineKind,
}

#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub stats: usize,
}

/// A fully-connected, group-connected or split-and-recombine layer, either
/// per-frame or as a temporal convolution.
#[derive(Clone, Debug)]
pub struct ConnectedLayer {
    connectivity: Connectivity,
    in_width: usize,
    out_width: usize,
    shape: LayerShape,
    branches: Vec<Branch>,
    scatter: Option<Vec<usize>>,
    norm: Option<BatchNorm>,
}

/// Mutable state needed while allocating a network's parameters.
pub struct Builder<'a, R: Rng + ?Sized> {
    pub params: &'a mut ParamStore,
    pub running: &'a mut Vec<RunningStats>,
    pub rng: &'a mut R,
}

impl<'a, R: Rng + ?Sized> Builder<'a, R> {
    pub fn new(
        params: &'a mut ParamStore,
        running: &'a mut Vec<RunningStats>,
        rng: &'a mut R,
    ) -> Self {
        Self {
            params,
            running,
            rng,
        }
    }

    fn weight(&mut self, name: String, shape: Vec<usize>, fan_in: usize) -> ParamId {
        let t = init_uniform(shape, fan_in, self.rng);
        self.params.add(name, t)
    }
}

impl ConnectedLayer {
    /// Allocates and initializes a layer mapping `input` channels to
    /// `output` channels. Dense layers ignore the group structure of the
    /// layouts; grouped layers require both layouts to have the same number
    /// of groups.
    pub fn build<R: Rng + ?Sized>(
        b: &mut Builder<'_, R>,
        name: &str,
        input: &ChannelLayout,
        output: &ChannelLayout,
        connectivity: Connectivity,
        shape: LayerShape,
    ) -> Result<Self> {
        if shape.kernel == 0 || shape.dilation == 0 {
            return Err(Error::Config(format!(
                "{name}: kernel and dilation must be positive"
            )));
        }
        if !shape.temporal && shape.kernel != 1 {
            return Err(Error::Config(format!(
                "{name}: per-frame layers use kernel 1"
            )));
        }
        let kernel = shape.kernel;
        let wshape = |out: usize, inp: usize| {
            if shape.temporal {
                vec![out, kernel, inp]
            } else {
                vec![out, inp]
            }
        };
        let mut branches = Vec::new();
        let scatter;
        match connectivity {
            Connectivity::Dense => {
                let (i, o) = (input.width(), output.width());
                let weight = b.weight(format!("{name}.weight"), wshape(o, i), i * kernel);
                let bias = b.params.add(format!("{name}.bias"), Tensor::zeros(vec![o]));
                branches.push(Branch {
                    inputs: (0..i).collect(),
                    weight,
                    bias,
                    context: None,
                });
                scatter = None;
            }
            Connectivity::Group | Connectivity::SplitRecombine(_) => {
                if input.len() != output.len() {
                    return Err(Error::Config(format!(
                        "{name}: input has {} groups, output has {}",
                        input.len(),
                        output.len()
                    )));
                }
                for g in 0..input.len() {
                    let own = input.group(g).to_vec();
                    let out_g = output.group(g).len();
                    let context = match connectivity {
                        Connectivity::SplitRecombine(rc) => {
                            let others = input.complement(g);
                            let h = rc
                                .resolve(own.len(), others.len())
                                .map_err(|e| Error::Config(format!("{name}, group {g}: {e}")))?;
                            if h == 0 {
                                None
                            } else {
                                let map = b.weight(
                                    format!("{name}.g{g}.context"),
                                    vec![h, others.len()],
                                    others.len(),
                                );
                                Some(ContextMap {
                                    others,
                                    map,
                                    width: h,
                                    kind: rc.kind,
                                })
                            }
                        }
                        _ => None,
                    };
                    let fan = match &context {
                        Some(c) if c.kind == RecombineKind::Concat => own.len() + c.width,
                        _ => own.len(),
                    };
                    let weight = b.weight(
                        format!("{name}.g{g}.weight"),
                        wshape(out_g, fan),
                        fan * kernel,
                    );
                    let bias = b
                        .params
                        .add(format!("{name}.g{g}.bias"), Tensor::zeros(vec![out_g]));
                    branches.push(Branch {
                        inputs: own,
                        weight,
                        bias,
                        context,
                    });
                }
                scatter = output.scatter_order();
            }
        }
        let norm = if shape.interior {
            let w = output.width();
            let gamma = b
                .params
                .add(format!("{name}.bn.gamma"), Tensor::ones(vec![w]));
            let beta = b
                .params
                .add(format!("{name}.bn.beta"), Tensor::zeros(vec![w]));
            b.running
                .push(RunningStats::neutral(format!("{name}.bn"), w));
            Some(BatchNorm {
                gamma,
                beta,
                stats: b.running.len() - 1,
            })
        } else {
            None
        };
        Ok(Self {
            connectivity,
            in_width: input.width(),
            out_width: output.width(),
            shape,
            branches,
            scatter,
            norm,
        })
    }

    pub fn connectivity(&self) -> Connectivity {
        self.connectivity
    }

    pub fn shape(&self) -> LayerShape {
        self.shape
    }

    pub fn in_width(&self) -> usize {
        self.in_width
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn norm(&self) -> Option<&BatchNorm> {
        self.norm.as_ref()
    }

    fn check_input(&self, ctx: &Ctx<'_>, x: Var) -> Result<()> {
        let s = ctx.tape.shape(x);
        let rank_ok = if self.shape.temporal {
            s.len() == 3
        } else {
            s.len() == 2
        };
        if !rank_ok || s.last() != Some(&self.in_width) {
            let expected = if self.shape.temporal {
                vec![0, 0, self.in_width]
            } else {
                vec![0, self.in_width]
            };
            return Err(shape_err("layer input (0 = any)", &expected, s));
        }
        Ok(())
    }

    /// Context summary `Γ_g · f[outside g]` for group `g`, or `None` when the
    /// layer carries no context for that group.
    pub fn map_global_context(&self, ctx: &mut Ctx<'_>, x: Var, g: usize) -> Result<Option<Var>> {
        self.check_input(ctx, x)?;
        let branch = self
            .branches
            .get(g)
            .ok_or_else(|| Error::Invalid(format!("group {g} out of range")))?;
        let Some(c) = &branch.context else {
            return Ok(None);
        };
        let last = ctx.tape.shape(x).len() - 1;
        let outside = ctx.tape.select(x, last, &c.others)?;
        let map = ctx.var(c.map);
        Ok(Some(ctx.tape.linear(outside, map, None)?))
    }

    /// Affine part of the layer, before normalization and activation.
    pub fn forward_affine(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        self.check_input(ctx, x)?;
        let last = ctx.tape.shape(x).len() - 1;
        if self.connectivity == Connectivity::Dense {
            return self.apply_weight(ctx, x, &self.branches[0]);
        }
        let mut outs = Vec::with_capacity(self.branches.len());
        for (g, branch) in self.branches.iter().enumerate() {
            let own = ctx.tape.select(x, last, &branch.inputs)?;
            let joined = match &branch.context {
                None => own,
                Some(c) => {
                    let summary = self
                        .map_global_context(ctx, x, g)?
                        .expect("branch has context");
                    match c.kind {
                        RecombineKind::Concat => ctx.tape.concat(&[own, summary], last)?,
                        RecombineKind::Multiply => ctx.tape.mul(own, summary)?,
                        RecombineKind::Add => ctx.tape.add(own, summary)?,
                    }
                }
            };
            outs.push(self.apply_weight(ctx, joined, branch)?);
        }
        let cat = if outs.len() == 1 {
            outs[0]
        } else {
            ctx.tape.concat(&outs, last)?
        };
        match &self.scatter {
            Some(order) => ctx.tape.select(cat, last, order),
            None => Ok(cat),
        }
    }

    fn apply_weight(&self, ctx: &mut Ctx<'_>, x: Var, branch: &Branch) -> Result<Var> {
        let (w, b) = (ctx.var(branch.weight), ctx.var(branch.bias));
        if self.shape.temporal {
            ctx.tape.conv1d(x, w, Some(b), self.shape.dilation)
        } else {
            ctx.tape.linear(x, w, Some(b))
        }
    }

    /// Full layer: affine map, then batch norm and leaky rectifier for
    /// interior layers.
    pub fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        let y = self.forward_affine(ctx, x)?;
        let Some(norm) = &self.norm else { return Ok(y) };
        let (gamma, beta) = (ctx.var(norm.gamma), ctx.var(norm.beta));
        let y = match ctx.mode() {
            Mode::Train => {
                let (y, stats) = ctx
                    .tape
                    .batch_norm(y, gamma, beta, NormMode::Train, BN_EPS)?;
                ctx.record(norm.stats, stats.expect("training statistics"));
                y
            }
            Mode::Eval => {
                let rs = ctx.running(norm.stats)?;
                let (mean, var) = (rs.mean.clone(), rs.var.clone());
                let mode = NormMode::Inference {
                    mean: &mean,
                    var: &var,
                };
                ctx.tape.batch_norm(y, gamma, beta, mode, BN_EPS)?.0
            }
        };
        Ok(ctx.tape.leaky_relu(y, LEAKY_SLOPE))
    }
}
