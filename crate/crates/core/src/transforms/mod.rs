//! Protocol and primitive transformations: threshold parallel repetition,
//! round collapse, token, one-shot-signature and lightning schemes read off a
//! protocol, minischeme amplification, and the cloning games that measure
//! all of them.

mod collapse;
mod games;
mod minischeme;
mod repeat;
mod token;

use num_complex::Complex64;

pub use collapse::{round_collapse, Collapsed, CollapsedProver};
pub use games::{
    run_lightning_game, run_token_game, run_unclonability_game, CloneBanknote, CloningSigner, GameReport,
    GuessingSigner, LightningAdversary, ReuseSigner, TokenAdversary,
};
pub use minischeme::{
    amplify_minischeme, planted_adversary, toy_basis_minischeme, toy_conjugate_minischeme, AcceptEffect, Amplified,
    PlantedReport, SerialSampler, WeakMinischeme,
};
pub use repeat::{pack_copies, parallel_repeat, tensor_prover, Repeated};
pub use token::{
    lightning_from_4round, oss_from_4round, token_from_poq, TokenKind, WeakLightning, WeakOSS, WeakTokenScheme,
};

use crate::error::{Error, Result};
use crate::poq::{QuantumProver, Transcript};
use crate::qsim::{c64, CMatrix, RegisterLayout, StateVector};

/// Name of copy `i` of register `reg`.
pub fn copy_name(i: usize, reg: &str) -> String {
    format!("c{i}.{reg}")
}

/// `n` copies of `layout`, copy 0 most significant.
pub fn copies_layout(layout: &RegisterLayout, n: usize) -> Result<RegisterLayout> {
    RegisterLayout::new((0..n).flat_map(|i| layout.registers().map(move |(r, d)| (copy_name(i, r), d))))
}

/// Register names of copy `i`.
pub fn copy_registers(layout: &RegisterLayout, i: usize) -> Vec<String> {
    layout.names().iter().map(|r| copy_name(i, r)).collect()
}

/// `|ψ_0⟩ ⊗ … ⊗ |ψ_{n−1}⟩` over copies of a common layout.
pub fn tensor_copies(states: &[StateVector]) -> Result<StateVector> {
    let first = states.first().ok_or_else(|| Error::InvalidArgument("no states to tensor".into()))?;
    let layout = copies_layout(first.layout(), states.len())?;
    let mut amps = vec![c64(1.0, 0.0)];
    for s in states {
        if s.layout() != first.layout() {
            return Err(Error::LayoutMismatch);
        }
        amps = amps.iter().flat_map(|a| s.amplitudes().iter().map(move |b| a * b)).collect();
    }
    StateVector::from_amplitudes(layout, amps)
}

/// A (possibly unphysical) map from one state to an `n`-part state whose
/// parts use the registers `c<i>.<name>`. Extra workspace registers are allowed
/// and get traced out.
pub trait Cloner: Sync {
    fn clone_state(&self, state: &StateVector, n: usize) -> Result<StateVector>;
}

/// `|ψ⟩ ↦ |ψ⟩^{⊗n}`: a perfect cloning oracle.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactCopier;

impl Cloner for ExactCopier {
    fn clone_state(&self, state: &StateVector, n: usize) -> Result<StateVector> {
        tensor_copies(&vec![state.clone(); n])
    }
}

/// `|x⟩ ↦ |x⟩^{⊗n}` on computational basis states, extended linearly. Clones
/// classical states and entangles everything else.
#[derive(Clone, Copy, Debug, Default)]
pub struct BasisCopier;

impl Cloner for BasisCopier {
    fn clone_state(&self, state: &StateVector, n: usize) -> Result<StateVector> {
        let layout = copies_layout(state.layout(), n)?;
        let d = state.layout().dim();
        let mut amps = vec![c64(0.0, 0.0); layout.dim()];
        for (x, a) in state.amplitudes().iter().enumerate() {
            let idx = (0..n).fold(0, |acc, _| acc * d + x);
            amps[idx] = *a;
        }
        StateVector::from_amplitudes(layout, amps)
    }
}

/// Keeps `|ψ⟩` in part 0 and fills the rest with a fixed state orthogonal to it.
#[derive(Clone, Copy, Debug, Default)]
pub struct OrthogonalJunk;

impl Cloner for OrthogonalJunk {
    fn clone_state(&self, state: &StateVector, n: usize) -> Result<StateVector> {
        let mut parts = vec![state.clone()];
        parts.extend(std::iter::repeat_n(orthogonal_to(state)?, n.saturating_sub(1)));
        tensor_copies(&parts)
    }
}

/// Unit vector orthogonal to `state`, from the basis vector it overlaps least.
pub(crate) fn orthogonal_to(state: &StateVector) -> Result<StateVector> {
    let amps = state.amplitudes();
    if amps.len() < 2 {
        return Err(Error::InvalidArgument("a one-dimensional state has no orthogonal complement".into()));
    }
    let j = (0..amps.len()).min_by(|&a, &b| amps[a].norm_sqr().total_cmp(&amps[b].norm_sqr())).unwrap_or(0);
    let mut v: Vec<Complex64> = amps.iter().map(|a| -a * amps[j].conj()).collect();
    v[j] += c64(1.0, 0.0);
    StateVector::normalized(state.layout().clone(), v)
}

/// `Pr[every part accepts] = ⟨Φ| E_0 ⊗ … |Φ⟩` for accept effects on disjoint register groups.
pub fn all_accept(state: &StateVector, effects: &[(Vec<String>, CMatrix)]) -> Result<f64> {
    let mut s = state.clone();
    for (regs, e) in effects {
        let t: Vec<&str> = regs.iter().map(String::as_str).collect();
        s = s.apply_operator(e, &t)?;
    }
    Ok(state.inner(&s)?.re.clamp(0.0, 1.0))
}

/// `Pr[Bin(k, p) ≥ m]`.
pub fn binomial_tail(k: usize, p: f64, m: usize) -> f64 {
    let mut total = 0.0;
    let mut choose = 1.0f64;
    for j in 0..=k {
        if j > 0 {
            choose = choose * (k - j + 1) as f64 / j as f64;
        }
        if j >= m {
            total += choose * p.powi(j as i32) * (1.0 - p).powi((k - j) as i32);
        }
    }
    total.min(1.0)
}

/// Fewest accepting copies out of `k` that reach fraction `frac`.
pub fn threshold_count(k: usize, frac: f64) -> usize {
    ((frac * k as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Matrix of the prover's circuit for the message after `t`, oracle calls
/// resolved by its own tables.
pub(crate) fn round_unitary(prover: &QuantumProver, t: &Transcript) -> Result<CMatrix> {
    let layout = prover.layout();
    let d = layout.dim();
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        let s = prover.step(&StateVector::basis(layout.clone(), j), t)?;
        for (i, a) in s.amplitudes().iter().enumerate() {
            m[(i, j)] = *a;
        }
    }
    Ok(m)
}

/// Projector onto output value `value` of prover turn `k`, over the full prover layout.
pub(crate) fn output_projector(prover: &QuantumProver, k: usize, value: usize) -> Result<CMatrix> {
    let layout = prover.layout();
    let regs = prover.output_registers(k);
    let pos: Vec<usize> = regs.iter().map(|r| layout.position(r)).collect::<Result<_>>()?;
    let dims: Vec<usize> = pos.iter().map(|&p| layout.dims()[p]).collect();
    let want = crate::poq::unpack(value, &dims);
    let d = layout.dim();
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        if pos.iter().zip(&want).all(|(&p, &w)| layout.digit(i, p) == w) {
            m[(i, i)] = c64(1.0, 0.0);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::gates;

    fn plus() -> StateVector {
        StateVector::zero(RegisterLayout::new([("q", 2)]).unwrap()).apply_unitary(&gates::h(), &["q"]).unwrap()
    }

    #[test]
    fn binomial_tail_matches_hand_values() {
        assert!((binomial_tail(8, 0.5, 6) - 37.0 / 256.0).abs() < 1e-12);
        assert_eq!(binomial_tail(3, 0.2, 0), 1.0);
        assert!((binomial_tail(1, 0.3, 1) - 0.3).abs() < 1e-12);
        assert_eq!(threshold_count(8, 0.75), 6);
        assert_eq!(threshold_count(8, 0.6), 5);
        assert_eq!(threshold_count(4, 0.73), 3);
    }

    #[test]
    fn copiers_differ_on_superpositions() {
        let p = plus();
        let exact = ExactCopier.clone_state(&p, 2).unwrap();
        let basis = BasisCopier.clone_state(&p, 2).unwrap();
        assert_eq!(exact.layout().names(), &["c0.q".to_string(), "c1.q".to_string()]);
        // both copies pass a |+⟩ test for the exact copier, not for the basis copier
        let proj = {
            let v = nalgebra::DVector::from_column_slice(p.amplitudes());
            &v * v.adjoint()
        };
        let effects = vec![(vec!["c0.q".to_string()], proj.clone()), (vec!["c1.q".to_string()], proj)];
        assert!((all_accept(&exact, &effects).unwrap() - 1.0).abs() < 1e-12);
        assert!((all_accept(&basis, &effects).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn junk_is_orthogonal() {
        let p = plus();
        let j = orthogonal_to(&p).unwrap();
        assert!(p.inner(&j).unwrap().norm() < 1e-12);
        let s = OrthogonalJunk.clone_state(&p, 3).unwrap();
        assert_eq!(s.layout().len(), 3);
    }
}
