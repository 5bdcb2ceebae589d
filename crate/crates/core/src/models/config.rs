use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{GroupingScheme, Recombine, STANDARD_GROUP_COUNTS};

/// Network family. Layer indices `l` run from 1 (input layer) to `L`
/// (output layer).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelKind {
    /// Every layer dense.
    Fc,
    /// Every layer group-connected.
    Gp,
    /// Late fusion: layers `l ≤ fuse` grouped, the rest dense.
    Lf { fuse: usize },
    /// Early split: layers `l < split` dense, the rest grouped.
    Es { split: usize },
    /// Split-fuse-split: the `link` middle layers dense, the rest grouped.
    Sfs { link: usize },
    /// Split-and-recombine on every layer.
    Sr { recombine: Recombine },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Fc => "fc",
            ModelKind::Gp => "gp",
            ModelKind::Lf { .. } => "lf",
            ModelKind::Es { .. } => "es",
            ModelKind::Sfs { .. } => "sfs",
            ModelKind::Sr { .. } => "sr",
        }
    }
}

/// Joint grouping, either a predefined count or an explicit partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    Standard(usize),
    Custom(GroupingScheme),
}

impl Grouping {
    pub fn resolve(&self, n_joints: usize) -> Result<GroupingScheme> {
        match self {
            Grouping::Custom(s) if s.n_joints() == n_joints => Ok(s.clone()),
            Grouping::Custom(s) => Err(Error::Config(format!(
                "grouping covers {} joints, model has {n_joints}",
                s.n_joints()
            ))),
            Grouping::Standard(1) => Ok(GroupingScheme::single(n_joints)),
            Grouping::Standard(g) if *g == n_joints => {
                GroupingScheme::new((0..n_joints).map(|j| vec![j]).collect(), n_joints)
            }
            Grouping::Standard(g) if n_joints == 17 => GroupingScheme::standard17(*g),
            Grouping::Standard(g) => Err(Error::Config(format!(
                "no predefined {g}-group assignment for {n_joints} joints (17 joints support {STANDARD_GROUP_COUNTS:?})"
            ))),
        }
    }
}

/// Temporal convolution stack: an input convolution with `kernels[0]`, then
/// one residual block per further kernel, dilated by the product of the
/// kernels before it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalConfig {
    pub kernels: Vec<usize>,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        Self {
            kernels: vec![3, 3, 3, 3, 3],
        }
    }
}

impl TemporalConfig {
    pub fn dilations(&self) -> Vec<usize> {
        let mut d = 1;
        self.kernels
            .iter()
            .map(|&k| {
                let cur = d;
                d *= k;
                cur
            })
            .collect()
    }

    /// Input frames needed for one output frame.
    pub fn receptive_frames(&self) -> usize {
        1 + self
            .kernels
            .iter()
            .zip(self.dilations())
            .map(|(&k, d)| (k - 1) * d)
            .sum::<usize>()
    }

    /// Number of layers: input, two per block, output.
    pub fn depth(&self) -> usize {
        2 * self.kernels.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub n_joints: usize,
    /// Layer count `L` of single-frame models; temporal models derive it
    /// from their kernels.
    pub depth: usize,
    pub width: usize,
    pub grouping: Grouping,
    /// Number of groups whose joints are randomly re-assigned.
    #[serde(default)]
    pub shuffle_groups: usize,
    #[serde(default)]
    pub temporal: Option<TemporalConfig>,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            n_joints: 17,
            depth: 8,
            width: 1024,
            grouping: Grouping::Standard(5),
            shuffle_groups: 0,
            temporal: None,
        }
    }

    pub fn layers(&self) -> usize {
        self.temporal
            .as_ref()
            .map_or(self.depth, TemporalConfig::depth)
    }

    pub fn input_frames(&self) -> usize {
        self.temporal
            .as_ref()
            .map_or(1, TemporalConfig::receptive_frames)
    }

    pub fn validate(&self) -> Result<GroupingScheme> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_joints == 0 {
            return bad("n_joints must be positive".into());
        }
        let l = self.layers();
        match &self.temporal {
            None => {
                if l < 2 || l % 2 != 0 {
                    return bad(format!("depth L must be even and at least 2, got {l}"));
                }
            }
            Some(t) => {
                if t.kernels.is_empty() {
                    return bad("temporal model needs at least one kernel".into());
                }
                if let Some(k) = t.kernels.iter().find(|&&k| k == 0 || k % 2 == 0) {
                    return bad(format!("temporal kernels must be odd, got {k}"));
                }
            }
        }
        match self.kind {
            ModelKind::Lf { fuse } if fuse > l => {
                return bad(format!("0 ≤ L_fuse ≤ L = {l} violated: L_fuse = {fuse}"))
            }
            ModelKind::Es { split } if split < 1 || split > l => {
                return bad(format!("1 ≤ L_split ≤ L = {l} violated: L_split = {split}"))
            }
            ModelKind::Sfs { link } if link < 1 || link + 2 > l => {
                return bad(format!(
                    "1 ≤ L_link ≤ L − 2 = {} violated: L_link = {link}",
                    l as isize - 2
                ))
            }
            _ => {}
        }
        let scheme = self.grouping.resolve(self.n_joints)?;
        if self.shuffle_groups > scheme.len() {
            return bad(format!(
                "shuffle_groups ≤ G = {} violated: {}",
                scheme.len(),
                self.shuffle_groups
            ));
        }
        if self.width < scheme.len() {
            return bad(format!(
                "width {} is below the group count {}",
                self.width,
                scheme.len()
            ));
        }
        Ok(scheme)
    }
}
