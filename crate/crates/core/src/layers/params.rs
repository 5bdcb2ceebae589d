use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{BatchStats, Tape, Tensor, Var, BN_MOMENTUM, LEAKY_SLOPE};

/// Index of a learnable buffer in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered, named learnable buffers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    /// Replaces a buffer, keeping its shape.
    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let slot = &mut self.values[id.0];
        if slot.shape() != value.shape() {
            return Err(crate::error::shape_err(
                "param set",
                slot.shape(),
                value.shape(),
            ));
        }
        *slot = value;
        Ok(())
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

/// Running batch-norm statistics of one normalized layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    pub name: String,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn neutral(name: impl Into<String>, channels: usize) -> Self {
        Self {
            name: name.into(),
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }

    pub fn update(&mut self, batch: &BatchStats) {
        let keep = 1.0 - BN_MOMENTUM;
        for (r, b) in self.mean.iter_mut().zip(&batch.mean) {
            *r = keep * *r + BN_MOMENTUM * b;
        }
        for (r, b) in self.var.iter_mut().zip(&batch.var) {
            *r = keep * *r + BN_MOMENTUM * b;
        }
    }
}

/// Whether layers normalize with batch or running statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-pass state shared by all layers: the tape, one leaf per parameter and
/// the batch statistics collected in training mode.
pub struct Ctx<'a> {
    pub tape: &'a mut Tape,
    vars: Vec<Var>,
    running: &'a [RunningStats],
    mode: Mode,
    updates: Vec<(usize, BatchStats)>,
}

impl<'a> Ctx<'a> {
    /// Registers every parameter of `store` as a leaf.
    pub fn new(
        tape: &'a mut Tape,
        store: &ParamStore,
        running: &'a [RunningStats],
        mode: Mode,
        requires_grad: bool,
    ) -> Self {
        let vars = store
            .values
            .iter()
            .map(|t| tape.leaf(t.clone(), requires_grad))
            .collect();
        Self::with_vars(tape, vars, running, mode)
    }

    /// Uses caller-provided leaves, one per parameter in store order.
    pub fn with_vars(
        tape: &'a mut Tape,
        vars: Vec<Var>,
        running: &'a [RunningStats],
        mode: Mode,
    ) -> Self {
        Self {
            tape,
            vars,
            running,
            mode,
            updates: Vec::new(),
        }
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn param_vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub(crate) fn running(&self, idx: usize) -> Result<&RunningStats> {
        self.running
            .get(idx)
            .ok_or_else(|| Error::Invalid(format!("missing running statistics #{idx}")))
    }

    pub(crate) fn record(&mut self, idx: usize, stats: BatchStats) {
        self.updates.push((idx, stats));
    }

    /// Batch statistics gathered during a training-mode pass.
    pub fn into_updates(self) -> Vec<(usize, BatchStats)> {
        self.updates
    }
}

/// Fan-in scaled uniform initialization for leaky-rectifier networks:
/// `U(−b, b)` with `b = √(6 / ((1 + slope²) · fan_in))`.
pub fn init_uniform<R: Rng + ?Sized>(shape: Vec<usize>, fan_in: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / ((1.0 + LEAKY_SLOPE * LEAKY_SLOPE) * fan_in.max(1) as f64)).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("positive init shape")
}
