//! Layer zoo: dense, group-connected and split-and-recombine layers, their
//! temporal-convolution forms, and residual wrapping.

mod connected;
mod grouping;
mod params;
mod residual;


pub use connected::{
    BatchNorm, Branch, Builder, ConnectedLayer, Connectivity, ContextMap, ContextWidth, LayerShape,
    Recombine, RecombineKind,
};
pub use grouping::{ChannelLayout, GroupingScheme, STANDARD_GROUP_COUNTS};
pub use params::{init_uniform, Ctx, Mode, ParamId, ParamStore, RunningStats};
pub use residual::ResidualBlock;
