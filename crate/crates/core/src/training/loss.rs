use crate::error::{shape_err, Result};
use crate::numerics::{Tape, Var};

/// Mean absolute difference over every coordinate of the batch.
pub fn l1_loss(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    if tape.shape(pred) != tape.shape(target) {
        return Err(shape_err("l1 loss", tape.shape(pred), tape.shape(target)));
    }
    let d = tape.sub(pred, target)?;
    let a = tape.abs(d);
    Ok(tape.mean(a))
}
