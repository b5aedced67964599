use rand::Rng;

use super::{pow2_at_least, OracleCircuit};
use crate::error::Result;
use crate::qsim::gates::random_unitary;

/// Shape of a random test circuit: a query register `x`, a response register
/// `y` and a one-qubit work register `w` that is measured at the end.
#[derive(Clone, Copy, Debug)]
pub struct RandomCircuitShape {
    pub domain: usize,
    pub alphabet: usize,
    pub queries: usize,
}

/// Random unitaries on `(x,w)` and `(y,w)` interleaved with `queries` calls
/// to slot `slot`, ending with a mixing layer on `(y,w)`.
pub fn random_circuit(slot: &str, shape: RandomCircuitShape, rng: &mut impl Rng) -> Result<OracleCircuit> {
    let dx = shape.domain.max(2);
    let dy = pow2_at_least(shape.alphabet);
    let mut c = OracleCircuit::new([("x", dx), ("y", dy), ("w", 2)])?;
    c.apply(&["x", "w"], random_unitary(2 * dx, rng))?;
    for _ in 0..shape.queries {
        c.call(slot, "x", "y")?;
        c.apply(&["y", "w"], random_unitary(2 * dy, rng))?;
        c.apply(&["x", "w"], random_unitary(2 * dx, rng))?;
    }
    c.apply(&["y", "w"], random_unitary(2 * dy, rng))?;
    c.measure(&["w"])?;
    Ok(c)
}
