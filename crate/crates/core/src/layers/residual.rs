use crate::error::{shape_err, Result};
use crate::numerics::Var;

use super::connected::ConnectedLayer;
use super::params::Ctx;

/// Two stacked interior layers with an identity skip: `f + block(f)`.
///
/// For temporal layers the skip path is cropped to the centre frames the
/// block still produces.
#[derive(Clone, Debug)]
pub struct ResidualBlock {
    first: ConnectedLayer,
    second: ConnectedLayer,
}

impl ResidualBlock {
    pub fn new(first: ConnectedLayer, second: ConnectedLayer) -> Result<Self> {
        if first.in_width() != second.out_width() || first.out_width() != second.in_width() {
            return Err(shape_err(
                "residual block widths",
                &[first.in_width(), first.out_width()],
                &[second.in_width(), second.out_width()],
            ));
        }
        Ok(Self { first, second })
    }

    pub fn layers(&self) -> [&ConnectedLayer; 2] {
        [&self.first, &self.second]
    }

    /// Frames consumed by the block on each side of the centre frame.
    pub fn half_span(&self) -> usize {
        (self.first.shape().span() + self.second.shape().span()) / 2
    }

    pub fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        let h = self.first.forward(ctx, x)?;
        let y = self.second.forward(ctx, h)?;
        let skip = if self.first.shape().temporal {
            let t_in = ctx.tape.shape(x)[1];
            let t_out = ctx.tape.shape(y)[1];
            if t_in == t_out {
                x
            } else {
                let pad = (t_in - t_out) / 2;
                let frames: Vec<usize> = (pad..pad + t_out).collect();
                ctx.tape.select(x, 1, &frames)?
            }
        } else {
            x
        };
        ctx.tape.add(skip, y)
    }
}
