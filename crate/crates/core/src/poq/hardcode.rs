use std::collections::BTreeMap;

use itertools::Itertools;
use rand::RngCore;

use super::{
    transcript_law, Classical, ClassicalProver, ConditionalSampler, Leaf, ProtocolSpec, QuantumProver, TableProver,
    Transcript, TREE_CAP,
};
use crate::error::{Error, Result};
use crate::qsim::sample_index;

/// Every well-formed transcript of length `len`, in lexicographic order.
pub(crate) fn all_prefixes(spec: &ProtocolSpec, len: usize) -> Result<Vec<Transcript>> {
    let rounds = &spec.rounds()[..len];
    let size = rounds.iter().try_fold(1usize, |a, r| a.checked_mul(r.alphabet)).unwrap_or(usize::MAX);
    if size > TREE_CAP {
        return Err(Error::FamilyTooLarge { size: size as u128, cap: TREE_CAP });
    }
    if len == 0 {
        return Ok(vec![Transcript::new()]);
    }
    Ok(rounds
        .iter()
        .map(|r| 0..r.alphabet)
        .multi_cartesian_product()
        .map(|syms| Transcript::from_messages(rounds.iter().map(|r| r.sender).zip(syms).collect()))
        .collect())
}

/// Deterministic classical prover that fixes, for every partial transcript
/// ending before a prover message, one answer sampled from the honest
/// prover's conditional state on that transcript. The state is rebuilt from
/// scratch for every entry; transcripts of zero honest weight are answered `⊤`.
pub fn hardcode_classical_adversary(
    spec: &ProtocolSpec,
    prover: &QuantumProver,
    rng: &mut dyn RngCore,
) -> Result<TableProver> {
    let sampler = ConditionalSampler(prover);
    let mut table = BTreeMap::new();
    for i in spec.prover_rounds() {
        for t in all_prefixes(spec, i)? {
            let law = sampler.next_message(&t)?;
            let w: Vec<f64> = law.iter().map(|x| x.1).collect();
            let m = law[sample_index(&w, rng)].0;
            table.insert(t, m);
        }
    }
    Ok(TableProver::new(table))
}

/// Law of `(transcript, accept)` for one run of a freshly hardcoded
/// adversary, averaged over the hardcoding randomness. Each table entry is
/// read at most once per run, so this is the law of the conditional sampler.
pub fn expected_table_law(spec: &ProtocolSpec, prover: &QuantumProver) -> Result<Vec<Leaf>> {
    transcript_law(spec, &Classical(ConditionalSampler(prover)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poq::{acceptance, run_protocol, toy_clawfree_poq, toy_owf_poq, Sender, REJECT};
    use crate::qsim::rng::{seeded, split};

    #[test]
    fn hardcoded_owf_adversary_is_complete() {
        let (spec, prover) = toy_owf_poq(3).unwrap();
        let table = hardcode_classical_adversary(&spec, &prover, &mut seeded(1)).unwrap();
        assert_eq!(table.len(), 8);
        assert!((acceptance(&spec, &Classical(&table)).unwrap() - 1.0).abs() < 1e-12);
        let t = Transcript::from_messages(vec![(Sender::Verifier, 5)]);
        assert_eq!(table.get(&t), table.get(&t));
        let other = Transcript::from_messages(vec![(Sender::Verifier, 6)]);
        assert_ne!(table.get(&t), REJECT);
        assert_ne!(table.get(&other), REJECT);
    }

    fn constant_then_flip() -> (ProtocolSpec, QuantumProver) {
        use crate::oracles::OracleCircuit;
        use crate::poq::{ClassicalModel, Round, Verifier};
        use std::sync::Arc;
        let v = Verifier::PublicCoin { predicate: Arc::new(|t: &Transcript| t.symbol(2) == Some(1)) };
        let rounds = vec![Round::prover(2), Round::verifier(2), Round::prover(2)];
        let spec = ProtocolSpec::new("flip", rounds, v, ClassicalModel::Transparent, 1.0, 1.0).unwrap();
        let circuit: crate::poq::RoundCircuit = Arc::new(|i, _: &Transcript| {
            let mut c = OracleCircuit::new([("a", 2)])?;
            if i == 2 {
                c.unitary("x", &["a"], "X")?;
            }
            Ok(c)
        });
        (spec, QuantumProver::new(vec![("a".into(), 2)], vec![vec!["a".into()]], circuit).unwrap())
    }

    #[test]
    fn unreachable_transcripts_get_top() {
        let (spec, prover) = constant_then_flip();
        let table = hardcode_classical_adversary(&spec, &prover, &mut seeded(2)).unwrap();
        assert_eq!(table.len(), 1 + 4);
        for (t, m) in table.entries() {
            match t.symbols().as_slice() {
                [] => assert_eq!(*m, 0),
                [0, _] => assert_eq!(*m, 1),
                [1, _] => assert_eq!(*m, REJECT),
                other => panic!("unexpected key {other:?}"),
            }
        }
        assert!((acceptance(&spec, &Classical(&table)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_prefixes_are_rejected() {
        let (spec, prover) = crate::poq::toy_owf_poq_with_fidelity(2, 1.0).unwrap();
        let t = Transcript::from_messages(vec![(Sender::Verifier, 0), (Sender::Prover, 3)]);
        assert!(matches!(prover.conditional_state(&t), Err(Error::InconsistentTranscript(2))));
        let s = ConditionalSampler(&prover);
        let good = Transcript::from_messages(vec![(Sender::Verifier, 0)]);
        assert_eq!(s.next_message(&good).unwrap().len(), 1);
        assert_eq!(spec.len(), 2);
    }

    #[test]
    fn first_run_matches_honest_law_exactly() {
        let (spec, prover) = toy_clawfree_poq(2).unwrap();
        let honest = transcript_law(&spec, &prover).unwrap();
        let table = expected_table_law(&spec, &prover).unwrap();
        assert_eq!(honest.len(), table.len());
        for (a, b) in honest.iter().zip(&table) {
            assert_eq!(a.transcript, b.transcript);
            assert!((a.prob - b.prob).abs() < 1e-12 && (a.accept - b.accept).abs() < 1e-12);
        }
    }

    #[test]
    fn averaged_hardcoding_tracks_honest_acceptance() {
        let (spec, prover) = crate::poq::toy_owf_poq_with_fidelity(2, 0.6).unwrap();
        let n = 400;
        let mut wins = 0;
        for k in 0..n {
            let table = hardcode_classical_adversary(&spec, &prover, &mut split(9, k)).unwrap();
            wins += usize::from(run_protocol(&spec, &Classical(&table), &mut split(10, k)).unwrap().1);
        }
        let p = wins as f64 / n as f64;
        let sigma = (0.6f64 * 0.4 / n as f64).sqrt();
        assert!((p - 0.6).abs() < 4.0 * sigma, "{p}");
    }
}
