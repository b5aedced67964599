use std::collections::BTreeMap;

use itertools::Itertools;
use proptest::prelude::*;

use super::*;
use crate::poq::{acceptance, toy_clawfree_poq};
use crate::qsim::rng::seeded;
use crate::qsim::{c64, RegisterLayout, StateVector};
use crate::transforms::{copies_layout, copy_name, BasisCopier, ExactCopier, OrthogonalJunk};

fn t(msgs: &[(Sender, usize)]) -> Transcript {
    Transcript::from_messages(msgs.to_vec())
}

/// Fixed first query, then `k` last-message queries all with challenge `c`.
fn fixed_rewinds(k: usize, c: usize) -> impl Reduction {
    FnReduction(move |h: &[Event]| {
        Ok(match h.len() {
            0 => Step::Query(t(&[(Sender::Verifier, 0)])),
            n if n <= k => Step::Query(t(&[(Sender::Verifier, 0), (Sender::Prover, h[0].value()), (Sender::Verifier, c)])),
            _ => Step::Output(true),
        })
    })
}

#[test]
fn single_identity_clone_is_the_honest_prover() {
    let (spec, prover) = toy_clawfree_poq(1).unwrap();
    let sim = Sim::new(&spec, &prover, &ExactCopier, 1).unwrap();
    let red = ScriptedReduction::new(&spec, Script::StraightLine).unwrap();
    let law = sim_law(&sim, &red).unwrap();
    assert!((law.accept - acceptance(&spec, &prover).unwrap()).abs() < 1e-9);
    assert_eq!(law.abort, 0.0);
    assert!((law.accept + law.reject - 1.0).abs() < 1e-12);
}

#[test]
fn rewinds_spend_one_part_each() {
    let (spec, prover) = toy_clawfree_poq(1).unwrap();
    let n = 3;
    for k in 1..=n {
        let sim = Sim::new(&spec, &prover, &ExactCopier, n).unwrap();
        let red = ScriptedReduction::new(&spec, Script::RewindLast(k)).unwrap();
        let law = sim_law(&sim, &red).unwrap();
        assert_eq!(law.abort, 0.0, "k = {k}");
        assert!(law.leaves.iter().all(|l| l.measured == k));
        assert!((law.accept - 1.0).abs() < 1e-9);
    }
    let sim = Sim::new(&spec, &prover, &ExactCopier, n).unwrap();
    let red = ScriptedReduction::new(&spec, Script::RewindLast(n + 1)).unwrap();
    let law = sim_law(&sim, &red).unwrap();
    assert!((law.abort - 1.0).abs() < 1e-12);
    assert!(law.leaves.iter().all(|l| l.outcome == SimOutcome::Abort && l.measured == n));
}

#[test]
fn sampled_runs_report_aborts() {
    let (spec, prover) = toy_clawfree_poq(1).unwrap();
    let mut rng = seeded(1);
    for (k, aborts) in [(2, false), (3, true)] {
        let sim = Sim::new(&spec, &prover, &ExactCopier, 2).unwrap();
        let red = ScriptedReduction::new(&spec, Script::RewindLast(k)).unwrap();
        let run = run_sim(sim, &red, &mut rng).unwrap();
        assert_eq!(run.outcome == SimOutcome::Abort, aborts);
        assert_eq!(run.sim.database().measured(), 2);
        assert_eq!(run.queries, 1 + k);
    }
}

#[test]
fn restarts_never_share_parts() {
    let (spec, prover) = toy_clawfree_poq(1).unwrap();
    let sim = Sim::new(&spec, &prover, &ExactCopier, 1).unwrap();
    let red = ScriptedReduction::new(&spec, Script::Restart(3)).unwrap();
    let law = sim_law(&sim, &red).unwrap();
    assert_eq!(law.abort, 0.0);
    assert!((law.accept - 1.0).abs() < 1e-9);
    assert!(law.leaves.iter().all(|l| l.measured == 3));
}

#[test]
fn unknown_keys_are_errors() {
    let (spec, prover) = toy_clawfree_poq(1).unwrap();
    let mut sim = Sim::new(&spec, &prover, &ExactCopier, 1).unwrap();
    let q = t(&[(Sender::Verifier, 0), (Sender::Prover, 1), (Sender::Verifier, 0)]);
    assert!(matches!(sim.answer(&q, &mut seeded(2)), Err(Error::UnknownKey(_))));
    assert!(matches!(sim.answer(&t(&[(Sender::Verifier, 0), (Sender::Prover, 1)]), &mut seeded(2)), Err(Error::InvalidArgument(_))));
}

#[test]
fn schedule_is_checked() {
    let (spec, prover) = crate::poq::toy_clawfree_3msg(1).unwrap();
    assert!(Sim::new(&spec, &prover, &ExactCopier, 1).is_err());
    let (spec, prover) = toy_clawfree_poq(1).unwrap();
    assert!(Sim::new(&spec, &prover, &ExactCopier, 0).is_err());
}

#[test]
fn cloning_prover_acceptance_tracks_the_cloner() {
    let (spec, prover) = toy_clawfree_poq(1).unwrap();
    let honest = acceptance(&spec, &prover).unwrap();
    assert!((cloning_prover_acceptance(&spec, &prover, &ExactCopier, 1).unwrap() - honest).abs() < 1e-9);
    assert!((cloning_prover_acceptance(&spec, &prover, &ExactCopier, 3).unwrap() - honest).abs() < 1e-9);
    // basis copying decoheres the claw: Hadamard-basis answers become coin flips
    let broken = cloning_prover_acceptance(&spec, &prover, &BasisCopier, 2).unwrap();
    assert!((broken - 0.75).abs() < 1e-9, "{broken}");
    // junk parts are kept half the time and never answer correctly in both bases
    let junk = cloning_prover_acceptance(&spec, &prover, &OrthogonalJunk, 2).unwrap();
    assert!(junk < honest - 0.1, "{junk}");
}

#[test]
fn cloning_prover_round_keeps_a_valid_state() {
    let (_, prover) = toy_clawfree_poq(1).unwrap();
    let mut rng = seeded(3);
    let (m, rho) = cloning_prover_round(&prover, &OrthogonalJunk, 3, &t(&[(Sender::Verifier, 0)]), &mut rng).unwrap();
    assert!(m < 2);
    assert!((rho.trace() - 1.0).abs() < 1e-9);
    assert_eq!(rho.layout(), prover.layout());
}

fn swap01(layout: &RegisterLayout, parts: usize) -> Vec<String> {
    (0..parts)
        .flat_map(|i| {
            let j = match i {
                0 => 1,
                1 => 0,
                k => k,
            };
            layout.names().iter().map(move |r| copy_name(j, r)).collect::<Vec<_>>()
        })
        .collect()
}

#[test]
fn stored_states_are_swap_invariant() {
    let (spec, prover) = toy_clawfree_poq(1).unwrap();
    let n = 3;
    let order = swap01(prover.layout(), n);
    let order: Vec<&str> = order.iter().map(String::as_str).collect();
    let key = |sim: &Sim| sim.database().keys().next().unwrap().clone();
    let first = t(&[(Sender::Verifier, 0)]);

    let mut sim = Sim::new(&spec, &prover, &OrthogonalJunk, n).unwrap();
    sim.answer(&first, &mut seeded(4)).unwrap();
    let rho = sim.database().get(&key(&sim)).unwrap()[0].density(prover.layout()).unwrap();
    let swapped = rho.reorder(&order).unwrap();
    assert!((rho.matrix() - swapped.matrix()).camax() < 1e-9);

    let mut raw = Sim::new(&spec, &prover, &OrthogonalJunk, n).unwrap().unsymmetrized();
    raw.answer(&first, &mut seeded(4)).unwrap();
    let rho = raw.database().get(&key(&raw)).unwrap()[0].density(prover.layout()).unwrap();
    let swapped = rho.reorder(&order).unwrap();
    assert!((rho.matrix() - swapped.matrix()).camax() > 1e-3);
}

/// Joint law of the rewind answers, keyed by the answer sequence.
fn answer_sequences(law: &SimLaw) -> BTreeMap<Vec<usize>, f64> {
    let mut out = BTreeMap::new();
    for l in &law.leaves {
        let answers: Vec<usize> = l.history[1..].iter().map(|e| e.value()).collect();
        *out.entry(answers).or_insert(0.0) += l.prob;
    }
    out
}

fn exchangeable(seqs: &BTreeMap<Vec<usize>, f64>) -> bool {
    seqs.iter().all(|(a, p)| {
        a.iter().copied().permutations(a.len()).all(|b| (seqs.get(&b).copied().unwrap_or(0.0) - p).abs() < 1e-9)
    })
}

#[test]
fn rewind_answers_are_exchangeable() {
    let (spec, prover) = toy_clawfree_poq(1).unwrap();
    let n = 3;
    let red = fixed_rewinds(n, 1);
    for cloner in [&ExactCopier as &dyn Cloner, &OrthogonalJunk, &BasisCopier] {
        let law = sim_law(&Sim::new(&spec, &prover, cloner, n).unwrap(), &red).unwrap();
        assert!(exchangeable(&answer_sequences(&law)));
    }
    let raw = Sim::new(&spec, &prover, &OrthogonalJunk, n).unwrap().unsymmetrized();
    assert!(!exchangeable(&answer_sequences(&sim_law(&raw, &red).unwrap())));
}

#[test]
fn product_clones_give_exchangeable_samples() {
    let (spec, prover) = toy_clawfree_poq(1).unwrap();
    let n = 3;
    let red = fixed_rewinds(n, 1);
    let trials = 2000;
    let mut rng = seeded(5);
    let mut first = [0usize; 4];
    let mut last = [0usize; 4];
    for _ in 0..trials {
        let run = run_sim(Sim::new(&spec, &prover, &ExactCopier, n).unwrap(), &red, &mut rng).unwrap();
        first[run.history[1].value()] += 1;
        last[run.history[n].value()] += 1;
    }
    for a in 0..4 {
        let (p, q) = (first[a] as f64 / trials as f64, last[a] as f64 / trials as f64);
        let sd = ((p * (1.0 - p) + q * (1.0 - q)) / trials as f64).sqrt().max(1e-3);
        assert!((p - q).abs() <= 4.0 * sd, "answer {a}: {p} vs {q}");
    }
}

proptest! {
    #[test]
    fn relabelling_parts_inverts(perm in Just((0..3usize).collect::<Vec<_>>()).prop_shuffle(), seed in any::<u64>()) {
        let part = RegisterLayout::new([("a", 2), ("b", 3)]).unwrap();
        let layout = copies_layout(&part, 3).unwrap();
        let mut r = seeded(seed);
        let amps = (0..layout.dim()).map(|_| c64(rand::Rng::gen::<f64>(&mut r) - 0.5, rand::Rng::gen::<f64>(&mut r) - 0.5)).collect();
        let s = StateVector::normalized(layout, amps).unwrap();
        let mut inv = vec![0; 3];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let back = permute_parts(&permute_parts(&s, &part, &perm).unwrap(), &part, &inv).unwrap();
        prop_assert!(back.distance(&s).unwrap() < 1e-12);
        let mix = symmetrize(&s, &part, 3).unwrap();
        prop_assert!((mix.iter().map(|m| m.0).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
