use std::sync::Arc;

use super::{copy_name, Cloner};
use crate::error::{Error, Result};
use crate::oracles::apply_gates;
use crate::poq::{
    optimal_classical_value, pack, unpack, Branch, ClassicalModel, ProtocolSpec, QuantumProver, Responder, Round,
    Sender, Transcript, Verifier,
};
use crate::qsim::{StateVector, ZERO_WEIGHT};

const EXHAUSTIVE_LEAVES: usize = 1 << 16;

/// A public-coin protocol with its last three messages folded into two: the
/// verifier sends `(r, r_1, …, r_p)` and the prover answers `(m, m'_1, …, m'_p)`;
/// the verifier accepts iff every continuation `τ‖r‖m‖r_i‖m'_i` is accepted.
#[derive(Clone, Debug)]
pub struct Collapsed {
    pub spec: ProtocolSpec,
    pub base: ProtocolSpec,
    pub continuations: usize,
    /// Whether the declared soundness came from an exhaustive search.
    pub exhaustive_soundness: bool,
}

struct Shape {
    at: usize,
    radices_v: Vec<usize>,
    radices_p: Vec<usize>,
}

fn shape(base: &ProtocolSpec, p: usize) -> Shape {
    let at = base.len() - 4;
    let a = |i: usize| base.rounds()[at + i].alphabet;
    let mut radices_v = vec![a(0)];
    radices_v.extend(std::iter::repeat_n(a(2), p));
    let mut radices_p = vec![a(1)];
    radices_p.extend(std::iter::repeat_n(a(3), p));
    Shape { at, radices_v, radices_p }
}

/// Full base transcripts `τ‖r‖m‖r_i‖m'_i` of a complete collapsed transcript.
fn continuations(base: &ProtocolSpec, p: usize, t: &Transcript) -> Vec<Transcript> {
    let sh = shape(base, p);
    let (Some(v), Some(w)) = (t.symbol(sh.at), t.symbol(sh.at + 1)) else { return vec![] };
    let rs = unpack(v, &sh.radices_v);
    let ms = unpack(w, &sh.radices_p);
    let head = t.prefix(sh.at).with(Sender::Verifier, rs[0]).with(Sender::Prover, ms[0]);
    (1..=p).map(|i| head.with(Sender::Verifier, rs[i]).with(Sender::Prover, ms[i])).collect()
}

/// Folds the last three messages of an even-length (at least four) public-coin
/// protocol into two, with `p` continuation challenges.
///
/// Declared completeness is the base completeness (reached by a prover that
/// can answer every continuation, see [`Collapsed::honest_prover`]); declared
/// soundness is the exhaustive classical value when the tree is small enough
/// and the base soundness otherwise.
pub fn round_collapse(spec: &ProtocolSpec, p: usize) -> Result<Collapsed> {
    if !spec.is_public_coin() {
        return Err(Error::NotPublicCoin);
    }
    let l = spec.len();
    if l < 4 || l % 2 == 1 {
        return Err(Error::WrongRoundCount { expected: l.max(4) + l % 2, found: l });
    }
    if p == 0 {
        return Err(Error::InvalidArgument("at least one continuation is needed".into()));
    }
    let senders: Vec<Sender> = spec.rounds()[l - 4..].iter().map(|r| r.sender).collect();
    if senders != [Sender::Verifier, Sender::Prover, Sender::Verifier, Sender::Prover] {
        return Err(Error::ScheduleMismatch("the last four messages must alternate V P V P".into()));
    }
    let sh = shape(spec, p);
    let size = |r: &[usize]| r.iter().try_fold(1usize, |a, b| a.checked_mul(*b)).filter(|v| *v <= 1 << 20);
    let (Some(av), Some(ap)) = (size(&sh.radices_v), size(&sh.radices_p)) else {
        return Err(Error::CapViolation(format!("{p} continuations make the folded messages too large")));
    };
    let mut rounds = spec.rounds()[..sh.at].to_vec();
    rounds.extend([Round::verifier(av), Round::prover(ap)]);

    let base = spec.clone();
    let b = base.clone();
    let verifier = Verifier::PublicCoin {
        predicate: Arc::new(move |t: &Transcript| {
            let cs = continuations(&b, p, t);
            !cs.is_empty() && cs.iter().all(|c| b.accepts(c).unwrap_or(false))
        }),
    };
    let classical = match spec.classical_model() {
        ClassicalModel::Transparent => ClassicalModel::Transparent,
        ClassicalModel::Hidden { weights, predicate } => {
            let (b, pred) = (base.clone(), predicate.clone());
            ClassicalModel::Hidden {
                weights: weights.clone(),
                predicate: Arc::new(move |k, t: &Transcript| {
                    let cs = continuations(&b, p, t);
                    !cs.is_empty() && cs.iter().all(|c| pred(k, c))
                }),
            }
        }
        ClassicalModel::Scored { .. } => {
            return Err(Error::InvalidArgument(
                "continuations share one hidden instance; a pre-averaged score cannot be split".into(),
            ))
        }
    };
    let name = format!("{}-collapsed{p}", spec.name());
    let mut out = ProtocolSpec::new(&name, rounds, verifier, classical, spec.completeness(), spec.soundness())?;
    let leaves = out.rounds().iter().try_fold(1usize, |a, r| a.checked_mul(r.alphabet)).unwrap_or(usize::MAX);
    let exhaustive = leaves <= EXHAUSTIVE_LEAVES;
    if exhaustive {
        let s = optimal_classical_value(&out)?;
        let c = out.completeness();
        out = out.with_declared(c, s)?;
    }
    Ok(Collapsed { spec: out, base, continuations: p, exhaustive_soundness: exhaustive })
}

impl Collapsed {
    /// The base transcripts a complete collapsed transcript stands for.
    pub fn continuations_of(&self, t: &Transcript) -> Vec<Transcript> {
        continuations(&self.base, self.continuations, t)
    }

    /// Folded verifier message `(r, r_1, …, r_p)`.
    pub fn pack_challenges(&self, r: usize, rs: &[usize]) -> usize {
        let mut d = vec![r];
        d.extend_from_slice(rs);
        pack(&d, &shape(&self.base, self.continuations).radices_v)
    }

    /// Folded prover message `(m, m'_1, …, m'_p)`.
    pub fn pack_answers(&self, m: usize, ms: &[usize]) -> usize {
        let mut d = vec![m];
        d.extend_from_slice(ms);
        pack(&d, &shape(&self.base, self.continuations).radices_p)
    }

    /// Honest prover of the folded protocol, given a strategy that turns the
    /// state after `m` into one state per continuation. Without one there is
    /// no honest prover.
    pub fn honest_prover<'a>(
        &'a self,
        prover: &'a QuantumProver,
        cloner: Option<&'a dyn Cloner>,
    ) -> Option<CollapsedProver<'a>> {
        cloner.map(|cloner| CollapsedProver { collapsed: self, prover, cloner })
    }
}

/// Runs the base prover up to `m`, hands its state to the cloner and answers
/// continuation `i` from part `i`.
pub struct CollapsedProver<'a> {
    collapsed: &'a Collapsed,
    prover: &'a QuantumProver,
    cloner: &'a dyn Cloner,
}

impl CollapsedProver<'_> {
    fn folded(&self, t: &Transcript, state: &StateVector) -> Result<Vec<Branch>> {
        let c = self.collapsed;
        let p = c.continuations;
        let sh = shape(&c.base, p);
        let last = t.symbol(sh.at).ok_or(Error::InconsistentTranscript(sh.at + 1))?;
        let rs = unpack(last, &sh.radices_v);
        let head = t.prefix(sh.at).with(Sender::Verifier, rs[0]);
        let turn = head.prover_messages();
        let final_turn = turn + 1;
        if self.prover.output_alphabet(final_turn)? != sh.radices_p[1] {
            return Err(Error::AlphabetMismatch("final prover output does not match the last round".into()));
        }
        let after = self.prover.step(state, &head)?;
        let mut out = vec![];
        for (m, pm) in self.prover.output_distribution(&after, turn)?.into_iter().enumerate() {
            if pm <= ZERO_WEIGHT {
                continue;
            }
            let (post, _) = self.prover.post_select(&after, turn, m)?;
            let mut joint = self.cloner.clone_state(&post, p)?;
            let mut backend = self.prover.oracles().clone();
            for (i, &r) in rs[1..].iter().enumerate() {
                let ti = head.with(Sender::Prover, m).with(Sender::Verifier, r);
                let circ = self.prover.round_circuit(ti.len(), &ti)?.renamed(|x| copy_name(i, x), |s| s.to_string());
                joint = apply_gates(&circ, joint, &mut backend, None)?.0;
            }
            let regs: Vec<String> = (0..p)
                .flat_map(|i| self.prover.output_registers(final_turn).iter().map(move |r| copy_name(i, r)))
                .collect();
            let names: Vec<&str> = regs.iter().map(String::as_str).collect();
            for (v, q) in joint.marginal(&names)?.into_iter().enumerate() {
                if q > ZERO_WEIGHT {
                    out.push(Branch { message: m * (joint_size(&sh.radices_p[1..])) + v, prob: pm * q, state: None });
                }
            }
        }
        Ok(out)
    }
}

fn joint_size(r: &[usize]) -> usize {
    r.iter().product()
}

impl Responder for CollapsedProver<'_> {
    fn initial_state(&self) -> Result<Option<StateVector>> {
        self.prover.initial_state()
    }

    fn branches(&self, t: &Transcript, state: Option<&StateVector>) -> Result<Vec<Branch>> {
        let at = self.collapsed.base.len() - 4;
        if t.len() < at + 1 {
            return self.prover.branches(t, state);
        }
        let state = state.ok_or_else(|| Error::InvalidArgument("quantum prover called without its state".into()))?;
        self.folded(t, state)
    }
}
