use std::sync::Arc;

use super::{binomial_tail, copies_layout, copy_name, tensor_copies, threshold_count};
use crate::error::{Error, Result};
use crate::oracles::OracleCircuit;
use crate::poq::{
    optimal_classical_value, pack, unpack, ClassicalModel, ProtocolSpec, QuantumProver, Round, RoundCircuit,
    Transcript, Verifier,
};

/// Largest message tree for which the repeated protocol's classical value is
/// computed exhaustively when it is built.
const EXHAUSTIVE_LEAVES: usize = 1 << 16;

/// `k` lockstep copies of a public-coin protocol with a threshold verifier.
#[derive(Clone, Debug)]
pub struct Repeated {
    pub spec: ProtocolSpec,
    pub base: ProtocolSpec,
    pub copies: usize,
    /// Fraction of copies that must accept.
    pub threshold: f64,
    /// `⌈threshold · copies⌉`.
    pub needed: usize,
    /// Whether the declared soundness came from an exhaustive search (as
    /// opposed to the independent-copies binomial tail).
    pub exhaustive_soundness: bool,
}

impl Repeated {
    /// Per-copy transcripts of a transcript of the repeated protocol.
    pub fn split(&self, t: &Transcript) -> Vec<Transcript> {
        split(&self.base, self.copies, t)
    }

    /// `Pr[Bin(k, p) ≥ needed]`: the repeated acceptance of independent copies that each accept with `p`.
    pub fn binomial(&self, p: f64) -> f64 {
        binomial_tail(self.copies, p, self.needed)
    }
}

fn radices(spec: &ProtocolSpec, i: usize, k: usize) -> Vec<usize> {
    vec![spec.rounds()[i].alphabet; k]
}

fn split(base: &ProtocolSpec, k: usize, t: &Transcript) -> Vec<Transcript> {
    let mut out = vec![Transcript::new(); k];
    for (i, &(sender, m)) in t.messages().iter().enumerate() {
        for (copy, d) in out.iter_mut().zip(unpack(m, &radices(base, i, k))) {
            copy.push(sender, d);
        }
    }
    out
}

/// `Pr[at least m of the independent events happen]` for event probabilities `p`.
fn poisson_binomial_tail(p: &[f64], m: usize) -> f64 {
    let mut dist = vec![1.0];
    for &q in p {
        let mut next = vec![0.0; dist.len() + 1];
        for (j, w) in dist.iter().enumerate() {
            next[j] += w * (1.0 - q);
            next[j + 1] += w * q;
        }
        dist = next;
    }
    dist.iter().skip(m).sum()
}

/// Runs `k` copies of `spec` in lockstep; the verifier accepts iff at least
/// `threshold · k` copies accept. The threshold defaults to `(c + s)/2` and
/// must lie strictly between the declared soundness and completeness.
///
/// Declared completeness is the binomial tail of `c`; declared soundness is
/// the exhaustive classical value when the message tree has at most 2^16
/// leaves, and the binomial tail of `s` otherwise.
pub fn parallel_repeat(spec: &ProtocolSpec, k: usize, threshold: Option<f64>) -> Result<Repeated> {
    if !spec.is_public_coin() {
        return Err(Error::NotPublicCoin);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("at least one copy is needed".into()));
    }
    let (c, s) = (spec.completeness(), spec.soundness());
    let threshold = threshold.unwrap_or((c + s) / 2.0);
    if !(threshold > s && threshold < c) {
        return Err(Error::InvalidThreshold { threshold, soundness: s, completeness: c });
    }
    let needed = threshold_count(k, threshold);
    let rounds = spec
        .rounds()
        .iter()
        .map(|r| {
            r.alphabet
                .checked_pow(k as u32)
                .filter(|a| *a <= 1 << 20)
                .map(|a| Round { sender: r.sender, alphabet: a })
                .ok_or_else(|| Error::CapViolation(format!("alphabet {}^{k} is too large", r.alphabet)))
        })
        .collect::<Result<Vec<_>>>()?;

    let base = spec.clone();
    let b = base.clone();
    let verifier = Verifier::PublicCoin {
        predicate: Arc::new(move |t: &Transcript| {
            split(&b, k, t).iter().filter(|x| b.accepts(x).unwrap_or(false)).count() >= needed
        }),
    };
    let classical = match spec.classical_model() {
        ClassicalModel::Transparent => ClassicalModel::Transparent,
        _ => {
            let b = base.clone();
            ClassicalModel::Scored {
                score: Arc::new(move |t: &Transcript| {
                    let p: Vec<f64> = split(&b, k, t).iter().map(|x| b.classical_score(x).unwrap_or(0.0)).collect();
                    poisson_binomial_tail(&p, needed)
                }),
            }
        }
    };
    let name = format!("{}-x{k}", spec.name());
    let mut out = ProtocolSpec::new(&name, rounds, verifier, classical, binomial_tail(k, c, needed), 0.0)?;
    let leaves = out.rounds().iter().try_fold(1usize, |a, r| a.checked_mul(r.alphabet)).unwrap_or(usize::MAX);
    let exhaustive = leaves <= EXHAUSTIVE_LEAVES;
    let sound = if exhaustive { optimal_classical_value(&out)? } else { binomial_tail(k, s, needed) };
    let c = out.completeness();
    out = out.with_declared(c, sound)?;
    Ok(Repeated { spec: out, base, copies: k, threshold, needed, exhaustive_soundness: exhaustive })
}

/// `k` independent copies of the honest prover, registers renamed `c<i>.<name>`.
/// Each prover message is the tuple of the copies' messages, copy 0 most significant.
pub fn tensor_prover(spec: &ProtocolSpec, prover: &QuantumProver, k: usize) -> Result<QuantumProver> {
    for (turn, i) in spec.prover_rounds().into_iter().enumerate() {
        let a = prover.output_alphabet(turn)?;
        if a != spec.rounds()[i].alphabet {
            return Err(Error::AlphabetMismatch(format!(
                "prover turn {turn} outputs {a} values for a {}-symbol round",
                spec.rounds()[i].alphabet
            )));
        }
    }
    let layout = copies_layout(prover.layout(), k)?;
    let turns = spec.prover_rounds().len().max(1);
    let outputs: Vec<Vec<String>> = (0..turns)
        .map(|turn| (0..k).flat_map(|i| prover.output_registers(turn).iter().map(move |r| copy_name(i, r))).collect())
        .collect();
    let base = spec.clone();
    let inner = prover.clone();
    let regs: Vec<(String, usize)> = layout.registers().map(|(n, d)| (n.to_string(), d)).collect();
    let declared = regs.clone();
    let circuit: RoundCircuit = Arc::new(move |index, t: &Transcript| {
        let mut c = OracleCircuit::new(declared.clone())?;
        for (i, ti) in split(&base, k, t).iter().enumerate() {
            let part = inner.round_circuit(index, ti)?.renamed(|r| copy_name(i, r), |s| s.to_string());
            c.append(&part)?;
        }
        Ok(c)
    });
    let initial = tensor_copies(&vec![prover.initial().clone(); k])?;
    Ok(QuantumProver::new(regs, outputs, circuit)?.with_initial(initial)?.with_oracles(prover.oracles().clone()))
}

/// Packs one message per copy into a repeated-protocol message.
pub fn pack_copies(spec: &ProtocolSpec, round: usize, messages: &[usize]) -> usize {
    pack(messages, &radices(spec, round, messages.len()))
}
