use std::collections::BTreeMap;

use rand::{Rng, RngCore};
use rayon::prelude::*;

use super::{ClassicalModel, ClassicalProver, ProtocolSpec, Responder, Sender, Transcript, Verifier, REJECT};
use crate::error::{Error, Result};
use crate::qsim::StateVector;

/// Cap on the number of nodes visited by exhaustive enumeration.
pub const TREE_CAP: usize = 1 << 22;

/// A complete (or `⊤`-truncated) transcript with its probability and the
/// verifier's acceptance probability given it.
#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    pub transcript: Transcript,
    pub prob: f64,
    pub accept: f64,
}

struct Walk<'a> {
    spec: &'a ProtocolSpec,
    prover: &'a dyn Responder,
    depth: usize,
    nodes: usize,
    leaves: BTreeMap<Transcript, (f64, f64)>,
}

fn too_large(size: usize) -> Error {
    Error::FamilyTooLarge { size: size as u128, cap: TREE_CAP }
}

fn verifier_symbol(spec: &ProtocolSpec, message: usize, t: &Transcript) -> Result<usize> {
    let a = spec.rounds()[t.len()].alphabet;
    if message >= a {
        return Err(Error::ScheduleMismatch(format!("verifier produced {message} outside an alphabet of {a}")));
    }
    Ok(message)
}

impl Walk<'_> {
    fn leaf_accept(&self, t: &Transcript, coins: &[usize]) -> f64 {
        if t.is_rejected() || !self.spec.well_formed(t) {
            return 0.0;
        }
        match self.spec.verifier() {
            Verifier::PublicCoin { predicate } => f64::from(u8::from(predicate(t))),
            Verifier::PrivateCoin { predicate, .. } => {
                coins.iter().filter(|&&c| predicate(c, t)).count() as f64 / coins.len() as f64
            }
        }
    }

    fn visit(&mut self, t: Transcript, state: Option<StateVector>, w: f64, coins: &[usize]) -> Result<()> {
        self.nodes += 1;
        if self.nodes > TREE_CAP {
            return Err(too_large(self.nodes));
        }
        if t.len() >= self.depth || t.is_rejected() {
            let acc = if t.len() == self.spec.len() || t.is_rejected() { self.leaf_accept(&t, coins) } else { 0.0 };
            let e = self.leaves.entry(t).or_insert((0.0, 0.0));
            e.0 += w;
            e.1 += w * acc;
            return Ok(());
        }
        let round = self.spec.rounds()[t.len()];
        match round.sender {
            Sender::Verifier => match self.spec.verifier() {
                Verifier::PublicCoin { .. } => {
                    let p = w / round.alphabet as f64;
                    for m in 0..round.alphabet {
                        self.visit(t.with(Sender::Verifier, m), state.clone(), p, coins)?;
                    }
                }
                Verifier::PrivateCoin { message, .. } => {
                    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                    for &c in coins {
                        groups.entry(verifier_symbol(self.spec, message(c, &t), &t)?).or_default().push(c);
                    }
                    for (m, cs) in groups {
                        let p = w * cs.len() as f64 / coins.len() as f64;
                        self.visit(t.with(Sender::Verifier, m), state.clone(), p, &cs)?;
                    }
                }
            },
            Sender::Prover => {
                for b in self.prover.branches(&t, state.as_ref())? {
                    if b.prob <= 0.0 {
                        continue;
                    }
                    let m = if b.message < round.alphabet { b.message } else { REJECT };
                    self.visit(t.with(Sender::Prover, m), b.state, w * b.prob, coins)?;
                }
            }
        }
        Ok(())
    }
}

fn all_coins(spec: &ProtocolSpec) -> Vec<usize> {
    match spec.verifier() {
        Verifier::PublicCoin { .. } => vec![],
        Verifier::PrivateCoin { coins, .. } => (0..*coins).collect(),
    }
}

fn walk(spec: &ProtocolSpec, prover: &dyn Responder, depth: usize) -> Result<BTreeMap<Transcript, (f64, f64)>> {
    let mut w = Walk { spec, prover, depth, nodes: 0, leaves: BTreeMap::new() };
    w.visit(Transcript::new(), prover.initial_state()?, 1.0, &all_coins(spec))?;
    Ok(w.leaves)
}

/// Exact law of complete transcripts; a transcript cut short by `⊤` or an
/// out-of-alphabet prover message appears truncated and rejecting.
pub fn transcript_law(spec: &ProtocolSpec, prover: &dyn Responder) -> Result<Vec<Leaf>> {
    Ok(walk(spec, prover, spec.len())?
        .into_iter()
        .map(|(transcript, (prob, acc))| Leaf { transcript, prob, accept: if prob > 0.0 { acc / prob } else { 0.0 } })
        .collect())
}

/// Exact law of the first `len` messages.
pub fn prefix_law(spec: &ProtocolSpec, prover: &dyn Responder, len: usize) -> Result<BTreeMap<Transcript, f64>> {
    Ok(walk(spec, prover, len.min(spec.len()))?.into_iter().map(|(t, (p, _))| (t, p)).collect())
}

/// `Pr[⟨P, V⟩ = 1]`, exactly.
pub fn acceptance(spec: &ProtocolSpec, prover: &dyn Responder) -> Result<f64> {
    Ok(walk(spec, prover, spec.len())?.values().map(|(_, a)| a).sum())
}

/// Acceptance of a classical prover in the soundness experiment fixed by the
/// spec's classical model.
pub fn classical_acceptance(spec: &ProtocolSpec, prover: &dyn ClassicalProver) -> Result<f64> {
    let responder = super::Classical(prover);
    if matches!(spec.classical_model(), ClassicalModel::Transparent) {
        return acceptance(spec, &responder);
    }
    transcript_law(spec, &responder)?.iter().map(|l| Ok(l.prob * spec.classical_score(&l.transcript)?)).sum()
}

/// Best acceptance over classical provers, by backward induction over the
/// full message tree: maximum at prover turns, average at verifier turns.
pub fn optimal_classical_value(spec: &ProtocolSpec) -> Result<f64> {
    let size = spec.rounds().iter().try_fold(1usize, |acc, r| acc.checked_mul(r.alphabet)).unwrap_or(usize::MAX);
    if size > TREE_CAP {
        return Err(too_large(size));
    }
    match spec.verifier() {
        Verifier::PublicCoin { .. } => {
            let score = |t: &Transcript| spec.classical_score(t).unwrap_or(0.0);
            Ok(public_value(spec, &Transcript::new(), &score))
        }
        Verifier::PrivateCoin { coins, .. } => {
            let all: Vec<usize> = (0..*coins).collect();
            Ok(private_value(spec, &Transcript::new(), &all)? / *coins as f64)
        }
    }
}

fn public_value(spec: &ProtocolSpec, t: &Transcript, score: &(dyn Fn(&Transcript) -> f64 + Sync)) -> f64 {
    if t.len() == spec.len() {
        return score(t);
    }
    let r = spec.rounds()[t.len()];
    let child = |m: usize| public_value(spec, &t.with(r.sender, m), score);
    match r.sender {
        Sender::Verifier if t.is_empty() => (0..r.alphabet).into_par_iter().map(child).sum::<f64>() / r.alphabet as f64,
        Sender::Verifier => (0..r.alphabet).map(child).sum::<f64>() / r.alphabet as f64,
        Sender::Prover if t.is_empty() => (0..r.alphabet).into_par_iter().map(child).reduce(|| 0.0, f64::max),
        Sender::Prover => (0..r.alphabet).map(child).fold(0.0, f64::max),
    }
}

/// Number of coins in `coins` that end up accepting under the best continuation.
fn private_value(spec: &ProtocolSpec, t: &Transcript, coins: &[usize]) -> Result<f64> {
    let Verifier::PrivateCoin { message, predicate, .. } = spec.verifier() else {
        return Err(Error::InvalidArgument("expected a private-coin verifier".into()));
    };
    if t.len() == spec.len() {
        return Ok(coins.iter().filter(|&&c| spec.well_formed(t) && predicate(c, t)).count() as f64);
    }
    let r = spec.rounds()[t.len()];
    match r.sender {
        Sender::Verifier => {
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &c in coins {
                groups.entry(verifier_symbol(spec, message(c, t), t)?).or_default().push(c);
            }
            groups.into_iter().map(|(m, cs)| private_value(spec, &t.with(Sender::Verifier, m), &cs)).sum()
        }
        Sender::Prover => {
            let mut best: f64 = 0.0;
            for m in 0..r.alphabet {
                best = best.max(private_value(spec, &t.with(Sender::Prover, m), coins)?);
            }
            Ok(best)
        }
    }
}

/// First `len` messages of one sampled interaction, with the verifier's coins.
pub(crate) fn run_prefix(
    spec: &ProtocolSpec,
    prover: &dyn Responder,
    len: usize,
    rng: &mut dyn RngCore,
) -> Result<(Transcript, usize)> {
    let coins = match spec.verifier() {
        Verifier::PrivateCoin { coins, .. } => rng.gen_range(0..*coins),
        Verifier::PublicCoin { .. } => 0,
    };
    let mut t = Transcript::new();
    let mut state = prover.initial_state()?;
    while t.len() < len.min(spec.len()) {
        let r = spec.rounds()[t.len()];
        match r.sender {
            Sender::Verifier => {
                let m = match spec.verifier() {
                    Verifier::PublicCoin { .. } => rng.gen_range(0..r.alphabet),
                    Verifier::PrivateCoin { message, .. } => verifier_symbol(spec, message(coins, &t), &t)?,
                };
                t.push(Sender::Verifier, m);
            }
            Sender::Prover => {
                let b = prover.sample(&t, state.as_ref(), rng)?;
                let m = if b.message < r.alphabet { b.message } else { REJECT };
                state = b.state;
                t.push(Sender::Prover, m);
                if m == REJECT {
                    break;
                }
            }
        }
    }
    Ok((t, coins))
}

/// One sampled interaction.
pub fn run_protocol(spec: &ProtocolSpec, prover: &dyn Responder, rng: &mut dyn RngCore) -> Result<(Transcript, bool)> {
    let (t, coins) = run_prefix(spec, prover, spec.len(), rng)?;
    let accept = !t.is_rejected() && spec.accepts_with_coins(coins, &t);
    Ok((t, accept))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::poq::{toy_owf_poq, Classical, FnProver, Round};
    use crate::qsim::rng::seeded;

    #[test]
    fn empty_protocol_with_constant_verifier_accepts() {
        let v = Verifier::PublicCoin { predicate: Arc::new(|_: &Transcript| true) };
        let s = ProtocolSpec::new("empty", vec![], v, ClassicalModel::Transparent, 1.0, 1.0).unwrap();
        let p = Classical(FnProver(|_: &Transcript| vec![]));
        assert_eq!(acceptance(&s, &p).unwrap(), 1.0);
        let (t, acc) = run_protocol(&s, &p, &mut seeded(0)).unwrap();
        assert!(t.is_empty() && acc);
    }

    #[test]
    fn honest_owf_prover_always_accepts() {
        for bits in 1..=3 {
            let (spec, prover) = toy_owf_poq(bits).unwrap();
            let law = transcript_law(&spec, &prover).unwrap();
            assert_eq!(law.len(), 1 << bits);
            assert!((acceptance(&spec, &prover).unwrap() - 1.0).abs() < 1e-12);
            let mut rng = seeded(bits as u64);
            for _ in 0..20 {
                assert!(run_protocol(&spec, &prover, &mut rng).unwrap().1);
            }
        }
    }

    #[test]
    fn garbage_prover_stays_below_soundness() {
        let (spec, _) = toy_owf_poq(3).unwrap();
        for g in 0..8 {
            let p = FnProver(move |_: &Transcript| vec![(g, 1.0)]);
            let a = classical_acceptance(&spec, &p).unwrap();
            assert!(a <= spec.soundness() + 1e-12, "{a}");
        }
        assert!((optimal_classical_value(&spec).unwrap() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn out_of_alphabet_and_reject_answers_lose() {
        let (spec, _) = toy_owf_poq(2).unwrap();
        for m in [4, REJECT] {
            let p = Classical(FnProver(move |_: &Transcript| vec![(m, 1.0)]));
            assert_eq!(acceptance(&spec, &p).unwrap(), 0.0);
            let law = transcript_law(&spec, &p).unwrap();
            assert!(law.iter().all(|l| l.transcript.is_rejected()));
        }
    }

    fn private_parity() -> ProtocolSpec {
        // coins c in 0..4; the verifier sends c mod 2 and accepts iff the answer is c / 2
        let v = Verifier::PrivateCoin {
            coins: 4,
            message: Arc::new(|c, _: &Transcript| c % 2),
            predicate: Arc::new(|c, t: &Transcript| t.symbol(1) == Some(c / 2)),
        };
        ProtocolSpec::new("parity", vec![Round::verifier(2), Round::prover(2)], v, ClassicalModel::Transparent, 0.5, 0.5)
            .unwrap()
    }

    #[test]
    fn private_coins_hide_half_the_key() {
        let s = private_parity();
        assert!((optimal_classical_value(&s).unwrap() - 0.5).abs() < 1e-12);
        let p = Classical(FnProver(|_: &Transcript| vec![(1, 1.0)]));
        assert!((acceptance(&s, &p).unwrap() - 0.5).abs() < 1e-12);
        let law = transcript_law(&s, &p).unwrap();
        assert_eq!(law.len(), 2);
        assert!(law.iter().all(|l| (l.prob - 0.5).abs() < 1e-12 && (l.accept - 0.5).abs() < 1e-12));
        assert!(matches!(s.accepts(&law[0].transcript), Err(Error::NotPublicCoin)));
    }

    #[test]
    fn prefix_law_marginalizes() {
        let (spec, prover) = toy_owf_poq(2).unwrap();
        let p = prefix_law(&spec, &prover, 1).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.values().all(|w| (w - 0.25).abs() < 1e-12));
        assert_eq!(prefix_law(&spec, &prover, 0).unwrap().len(), 1);
    }
}
