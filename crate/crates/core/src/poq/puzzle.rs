use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use super::exact::run_prefix;
use super::{acceptance, prefix_law, ClassicalProver, HybridProver, ProtocolSpec, QuantumProver, Transcript};
use crate::error::{Error, Result};
use crate::qsim::statistical_distance_keyed;

/// One draw of the extracted puzzle: the first `j − 1` messages and the `j`-th.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PuzzleSample {
    pub j: usize,
    pub puzz: Transcript,
    pub key: usize,
}

/// Draws `j` uniformly from `1..=ℓ`, runs the honest interaction for `j`
/// messages and splits off the last one as the key.
#[derive(Clone, Copy, Debug)]
pub struct PuzzleSampler<'a> {
    spec: &'a ProtocolSpec,
    prover: &'a QuantumProver,
}

impl<'a> PuzzleSampler<'a> {
    pub fn new(spec: &'a ProtocolSpec, prover: &'a QuantumProver) -> Result<Self> {
        if spec.is_empty() {
            return Err(Error::InvalidArgument("a puzzle needs at least one message".into()));
        }
        Ok(PuzzleSampler { spec, prover })
    }

    pub fn spec(&self) -> &ProtocolSpec {
        self.spec
    }

    pub fn prover(&self) -> &QuantumProver {
        self.prover
    }

    pub fn rounds(&self) -> usize {
        self.spec.len()
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<PuzzleSample> {
        let j = rng.gen_range(1..=self.rounds());
        let (t, _) = run_prefix(self.spec, self.prover, j, rng)?;
        let key = t.symbol(t.len() - 1).expect("j ≥ 1");
        Ok(PuzzleSample { j, puzz: t.prefix(t.len() - 1), key })
    }

    /// Exact law of `(puzz, key)` given `j`, keyed by the joint transcript.
    pub fn joint_law(&self, j: usize) -> Result<BTreeMap<Transcript, f64>> {
        prefix_law(self.spec, self.prover, j)
    }

    /// Exact law of `(puzz, A(puzz))` given `j`.
    pub fn adversary_law(&self, j: usize, adversary: &dyn ClassicalProver) -> Result<BTreeMap<Transcript, f64>> {
        let sender = self.spec.rounds()[j - 1].sender;
        let mut out = BTreeMap::new();
        for (p, w) in prefix_law(self.spec, self.prover, j - 1)? {
            for (m, q) in adversary.next_message(&p)? {
                *out.entry(p.with(sender, m)).or_insert(0.0) += w * q;
            }
        }
        Ok(out)
    }

    /// `SD((puzz_j, key_j), (puzz_j, A(puzz_j)))` for `j = 1..=ℓ`.
    pub fn round_distances(&self, adversary: &dyn ClassicalProver) -> Result<Vec<f64>> {
        (1..=self.rounds())
            .map(|j| Ok(statistical_distance_keyed(&self.joint_law(j)?, &self.adversary_law(j, adversary)?)))
            .collect()
    }
}

/// `SD({puzz, key}, {puzz, A(puzz)})` with `j` uniform, computed exactly.
pub fn distributional_advantage(sampler: &PuzzleSampler<'_>, adversary: &dyn ClassicalProver) -> Result<f64> {
    let d = sampler.round_distances(adversary)?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Plug-in estimate of [`distributional_advantage`] from `trials` samples of
/// each side; biased upwards by the empirical noise.
pub fn sampled_distributional_advantage(
    sampler: &PuzzleSampler<'_>,
    adversary: &dyn ClassicalProver,
    trials: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let mut honest: BTreeMap<(usize, Transcript, usize), f64> = BTreeMap::new();
    let mut adv: BTreeMap<(usize, Transcript, usize), f64> = BTreeMap::new();
    let w = 1.0 / trials.max(1) as f64;
    for _ in 0..trials {
        let s = sampler.sample(rng)?;
        *honest.entry((s.j, s.puzz.clone(), s.key)).or_insert(0.0) += w;
        let s = sampler.sample(rng)?;
        let law = adversary.next_message(&s.puzz)?;
        let weights: Vec<f64> = law.iter().map(|x| x.1).collect();
        let key = law[crate::qsim::sample_index(&weights, rng)].0;
        *adv.entry((s.j, s.puzz, key)).or_insert(0.0) += w;
    }
    Ok(statistical_distance_keyed(&honest, &adv))
}

/// Acceptance of the hybrid provers `P^{(i)}` (honest for the first `i`
/// messages, the classical responder afterwards) for `i = 0..=ℓ`, next to
/// the per-round puzzle distances.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridLadder {
    /// `completeness[i] = Pr[⟨P^{(i)}, V⟩ = 1]`; the last entry is the honest prover.
    pub completeness: Vec<f64>,
    /// `sd[i − 1]` is the puzzle distance at round `i`.
    pub sd: Vec<f64>,
}

impl HybridLadder {
    /// `ε_i = c(P^{(i)}) − c(P^{(i−1)})` for `i = 1..=ℓ`.
    pub fn gaps(&self) -> Vec<f64> {
        self.completeness.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `c(P) − c(P′)`, the sum of the gaps.
    pub fn total_gap(&self) -> f64 {
        self.completeness.last().copied().unwrap_or(0.0) - self.completeness.first().copied().unwrap_or(0.0)
    }

    pub fn sd_sum(&self) -> f64 {
        self.sd.iter().sum()
    }

    /// Every `ε_i ≤ SD_i` and `c(P) − c(P′) ≤ Σ SD_i`, up to `slack`.
    pub fn holds(&self, slack: f64) -> bool {
        self.gaps().iter().zip(&self.sd).all(|(e, d)| *e <= d + slack) && self.total_gap() <= self.sd_sum() + slack
    }
}

/// Builds every hybrid of the puzzle-extraction argument for `adversary`
/// and evaluates it exactly.
pub fn hybrid_ladder(
    spec: &ProtocolSpec,
    prover: &QuantumProver,
    adversary: &dyn ClassicalProver,
) -> Result<HybridLadder> {
    let sampler = PuzzleSampler::new(spec, prover)?;
    let completeness = (0..=spec.len())
        .map(|i| acceptance(spec, &HybridProver { honest: prover, after: adversary, honest_messages: i }))
        .collect::<Result<Vec<_>>>()?;
    Ok(HybridLadder { completeness, sd: sampler.round_distances(adversary)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poq::{
        hardcode_classical_adversary, toy_clawfree_poq, toy_owf_poq, toy_owf_poq_with_fidelity, ConditionalSampler,
        FnProver, Sender,
    };
    use crate::qsim::rng::{seeded, split};

    #[test]
    fn two_message_split() {
        let (spec, prover) = toy_owf_poq(2).unwrap();
        let s = PuzzleSampler::new(&spec, &prover).unwrap();
        let mut rng = seeded(3);
        let mut seen = [false; 2];
        for _ in 0..50 {
            let p = s.sample(&mut rng).unwrap();
            seen[p.j - 1] = true;
            match p.j {
                1 => assert!(p.puzz.is_empty()),
                2 => {
                    assert_eq!(p.puzz.len(), 1);
                    let y = p.puzz.symbol(0).unwrap();
                    assert_eq!(crate::poq::toy_permutation(2)[p.key], y);
                }
                _ => unreachable!(),
            }
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn puzzle_marginal_matches_honest_prefix() {
        let (spec, prover) = toy_clawfree_poq(1).unwrap();
        let s = PuzzleSampler::new(&spec, &prover).unwrap();
        let exact = s.joint_law(3).unwrap();
        let mut counts: BTreeMap<Transcript, f64> = BTreeMap::new();
        let mut n = 0.0;
        let mut rng = seeded(4);
        for _ in 0..8000 {
            let p = s.sample(&mut rng).unwrap();
            if p.j == 3 {
                *counts.entry(p.puzz.with(Sender::Verifier, p.key)).or_insert(0.0) += 1.0;
                n += 1.0;
            }
        }
        // Pearson χ² against the exact law; 3 degrees of freedom
        let chi2: f64 = exact.iter().map(|(t, p)| (counts.get(t).copied().unwrap_or(0.0) - n * p).powi(2) / (n * p)).sum();
        assert!(chi2 < 16.3, "{chi2}");
    }

    #[test]
    fn honest_conditional_sampler_has_zero_advantage() {
        let (spec, prover) = toy_clawfree_poq(2).unwrap();
        let s = PuzzleSampler::new(&spec, &prover).unwrap();
        // an adversary that imitates both parties
        let verifier_like = |t: &Transcript| -> Vec<(usize, f64)> {
            let r = spec.rounds()[t.len()];
            if r.sender == Sender::Verifier {
                (0..r.alphabet).map(|m| (m, 1.0 / r.alphabet as f64)).collect()
            } else {
                ConditionalSampler(&prover).next_message(t).unwrap()
            }
        };
        let a = distributional_advantage(&s, &FnProver(verifier_like)).unwrap();
        assert!(a.abs() < 1e-12, "{a}");
    }

    #[test]
    fn constant_key_has_positive_advantage() {
        let (spec, prover) = toy_owf_poq(2).unwrap();
        let s = PuzzleSampler::new(&spec, &prover).unwrap();
        let a = distributional_advantage(&s, &FnProver(|_: &Transcript| vec![(0, 1.0)])).unwrap();
        // j = 1: uniform y vs point mass at 0 gives 3/4; j = 2: answer right only when y = f(0), also 3/4
        assert!((a - 0.75).abs() < 1e-12, "{a}");
        let est = sampled_distributional_advantage(&s, &FnProver(|_: &Transcript| vec![(0, 1.0)]), 4000, &mut seeded(5))
            .unwrap();
        assert!((est - 0.75).abs() < 0.05, "{est}");
    }

    #[test]
    fn telescoping_holds_for_several_responders() {
        let (spec, prover) = toy_clawfree_poq(2).unwrap();
        let table = hardcode_classical_adversary(&spec, &prover, &mut split(6, 0)).unwrap();
        let constant = FnProver(|_: &Transcript| vec![(1, 1.0)]);
        let uniform = FnProver(|t: &Transcript| {
            let n = if t.len() == 1 { 4 } else { 8 };
            (0..n).map(|m| (m, 1.0 / n as f64)).collect()
        });
        for adv in [&table as &dyn ClassicalProver, &constant, &uniform] {
            let l = hybrid_ladder(&spec, &prover, adv).unwrap();
            assert_eq!(l.completeness.len(), 5);
            assert!((l.completeness[4] - 1.0).abs() < 1e-12);
            assert!(l.holds(1e-9), "{l:?}");
            assert!((l.gaps().iter().sum::<f64>() - l.total_gap()).abs() < 1e-12);
        }
    }

    #[test]
    fn hybrid_endpoints() {
        let (spec, prover) = toy_owf_poq_with_fidelity(2, 0.8).unwrap();
        let constant = FnProver(|_: &Transcript| vec![(2, 1.0)]);
        let l = hybrid_ladder(&spec, &prover, &constant).unwrap();
        assert!((l.completeness[2] - 0.8).abs() < 1e-12);
        assert!((l.completeness[0] - 0.25).abs() < 1e-12);
        assert!((l.completeness[1] - 0.25).abs() < 1e-12);
        assert!((l.sd[0] - 0.75).abs() < 1e-12);
    }
}
