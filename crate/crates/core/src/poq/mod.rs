//! Interactive proofs of quantumness at toy scale: message schedules,
//! verifiers, quantum and classical provers, exact transcript laws, the
//! hardcoded classical adversary, one-way-puzzle extraction and the
//! three-message meta-reduction.

mod exact;
mod hardcode;
mod meta3;
mod prover;
mod puzzle;
mod toys;
mod transcript;

use std::fmt;
use std::sync::Arc;

pub use exact::{
    acceptance, classical_acceptance, optimal_classical_value, prefix_law, run_protocol, transcript_law, Leaf,
    TREE_CAP,
};
pub use hardcode::{expected_table_law, hardcode_classical_adversary};
pub use meta3::{meta_reduction_3round, scripted_reduction, Meta3, ScriptedReduction};
pub use prover::{
    Branch, Classical, ClassicalProver, ConditionalSampler, FnProver, HybridProver, QuantumProver, Responder,
    RoundCircuit, TableProver,
};
pub use puzzle::{distributional_advantage, hybrid_ladder, sampled_distributional_advantage, HybridLadder, PuzzleSample, PuzzleSampler};
pub use toys::{
    clawfree_poq, toy_clawfree_3msg, toy_clawfree_poq, toy_owf_poq, toy_owf_poq_with_fidelity, toy_permutation,
    ClawSource,
};
pub use transcript::{Sender, Transcript, REJECT};

use crate::error::{Error, Result};

/// Accept/reject on a complete transcript.
pub type Predicate = Arc<dyn Fn(&Transcript) -> bool + Send + Sync>;
/// Accept/reject given a verifier coin (or hidden instance) and a transcript.
pub type KeyedPredicate = Arc<dyn Fn(usize, &Transcript) -> bool + Send + Sync>;
/// Expected acceptance of a complete transcript.
pub type Score = Arc<dyn Fn(&Transcript) -> f64 + Send + Sync>;
/// Private-coin verifier message: `(coins, transcript so far) ↦ symbol`.
pub type CoinMessage = Arc<dyn Fn(usize, &Transcript) -> usize + Send + Sync>;

/// One message slot of the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Round {
    pub sender: Sender,
    pub alphabet: usize,
}

impl Round {
    pub fn verifier(alphabet: usize) -> Self {
        Round { sender: Sender::Verifier, alphabet }
    }

    pub fn prover(alphabet: usize) -> Self {
        Round { sender: Sender::Prover, alphabet }
    }
}

#[derive(Clone)]
pub enum Verifier {
    /// Every verifier message is a fresh uniform symbol; the decision reads
    /// only the transcript.
    PublicCoin { predicate: Predicate },
    /// Uniform coins in `0..coins` drawn once, then used for every message
    /// and for the decision.
    PrivateCoin { coins: usize, message: CoinMessage, predicate: KeyedPredicate },
}

/// What a classical cheating prover is assumed to know, which fixes the
/// soundness value computed by [`optimal_classical_value`].
#[derive(Clone)]
pub enum ClassicalModel {
    /// The classical prover sees everything the honest one does.
    Transparent,
    /// The verifier holds instance `k` with probability `weights[k]` and the
    /// prover never learns which; acceptance is `predicate(k, τ)`. Public-coin only.
    Hidden { weights: Vec<f64>, predicate: KeyedPredicate },
    /// Like `Hidden`, with the average over instances already taken:
    /// `score(τ)` is the acceptance probability of a well-formed transcript.
    Scored { score: Score },
}

/// Message schedule, verifier and declared parameters of a protocol.
#[derive(Clone)]
pub struct ProtocolSpec {
    name: String,
    rounds: Vec<Round>,
    verifier: Verifier,
    classical: ClassicalModel,
    completeness: f64,
    soundness: f64,
}

impl fmt::Debug for ProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtocolSpec")
            .field("name", &self.name)
            .field("rounds", &self.rounds)
            .field("public_coin", &self.is_public_coin())
            .field("completeness", &self.completeness)
            .field("soundness", &self.soundness)
            .finish()
    }
}

impl ProtocolSpec {
    pub fn new(
        name: &str,
        rounds: Vec<Round>,
        verifier: Verifier,
        classical: ClassicalModel,
        completeness: f64,
        soundness: f64,
    ) -> Result<Self> {
        if let Some(r) = rounds.iter().find(|r| r.alphabet == 0) {
            return Err(Error::ScheduleMismatch(format!("empty alphabet for a {:?} message", r.sender)));
        }
        for v in [completeness, soundness] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("declared probability {v} outside [0, 1]")));
            }
        }
        if let Verifier::PrivateCoin { coins: 0, .. } = verifier {
            return Err(Error::InvalidArgument("private-coin verifier needs at least one coin value".into()));
        }
        if !matches!(classical, ClassicalModel::Transparent) && matches!(verifier, Verifier::PrivateCoin { .. }) {
            return Err(Error::NotPublicCoin);
        }
        if let ClassicalModel::Hidden { weights, .. } = &classical {
            let s: f64 = weights.iter().sum();
            if weights.is_empty() || (s - 1.0).abs() > crate::qsim::NORM_TOL || weights.iter().any(|w| *w < 0.0) {
                return Err(Error::Unnormalized(s));
            }
        }
        Ok(ProtocolSpec { name: name.to_string(), rounds, verifier, classical, completeness, soundness })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    /// Number of messages `ℓ`.
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn verifier(&self) -> &Verifier {
        &self.verifier
    }

    pub fn classical_model(&self) -> &ClassicalModel {
        &self.classical
    }

    pub fn is_public_coin(&self) -> bool {
        matches!(self.verifier, Verifier::PublicCoin { .. })
    }

    pub fn completeness(&self) -> f64 {
        self.completeness
    }

    pub fn soundness(&self) -> f64 {
        self.soundness
    }

    /// Smallest `t` with `c − s ≥ 1/t`, or `None` when `c ≤ s`.
    pub fn gap_inverse(&self) -> Option<u64> {
        let gap = self.completeness - self.soundness;
        if gap <= 0.0 {
            return None;
        }
        let t = (1.0 / gap - 1e-9).ceil().max(1.0);
        Some(t as u64)
    }

    pub fn with_declared(mut self, completeness: f64, soundness: f64) -> Result<Self> {
        for v in [completeness, soundness] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("declared probability {v} outside [0, 1]")));
            }
        }
        self.completeness = completeness;
        self.soundness = soundness;
        Ok(self)
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    /// Acceptance of a complete public-coin transcript in the soundness
    /// experiment of the classical model.
    pub fn classical_score(&self, t: &Transcript) -> Result<f64> {
        let Verifier::PublicCoin { predicate } = &self.verifier else {
            return Err(Error::NotPublicCoin);
        };
        if t.is_rejected() || !self.well_formed(t) {
            return Ok(0.0);
        }
        Ok(match &self.classical {
            ClassicalModel::Transparent => f64::from(u8::from(predicate(t))),
            ClassicalModel::Hidden { weights, predicate } => {
                weights.iter().enumerate().filter(|(k, _)| predicate(*k, t)).map(|(_, w)| w).sum()
            }
            ClassicalModel::Scored { score } => score(t),
        })
    }

    /// Public-coin decision on a complete transcript.
    pub fn accepts(&self, t: &Transcript) -> Result<bool> {
        match &self.verifier {
            Verifier::PublicCoin { predicate } => Ok(self.well_formed(t) && predicate(t)),
            Verifier::PrivateCoin { .. } => Err(Error::NotPublicCoin),
        }
    }

    /// Decision given the verifier's coins.
    pub fn accepts_with_coins(&self, coins: usize, t: &Transcript) -> bool {
        if !self.well_formed(t) {
            return false;
        }
        match &self.verifier {
            Verifier::PublicCoin { predicate } => predicate(t),
            Verifier::PrivateCoin { predicate, .. } => predicate(coins, t),
        }
    }

    /// Complete, in schedule, every symbol inside its alphabet.
    pub fn well_formed(&self, t: &Transcript) -> bool {
        t.len() == self.len() && self.check_prefix(t).is_ok()
    }

    /// Senders and alphabets of `t` match the first `t.len()` rounds.
    pub fn check_prefix(&self, t: &Transcript) -> Result<()> {
        if t.len() > self.len() {
            return Err(Error::WrongRoundCount { expected: self.len(), found: t.len() });
        }
        for (i, ((s, m), r)) in t.messages().iter().zip(&self.rounds).enumerate() {
            if *s != r.sender {
                return Err(Error::ScheduleMismatch(format!("message {} sent by {s:?}, expected {:?}", i + 1, r.sender)));
            }
            if *m >= r.alphabet {
                return Err(Error::AlphabetMismatch(format!(
                    "message {} is {m}, alphabet has {} symbols",
                    i + 1,
                    r.alphabet
                )));
            }
        }
        Ok(())
    }

    /// Positions of prover messages.
    pub fn prover_rounds(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.rounds[i].sender == Sender::Prover).collect()
    }
}

/// Mixed-radix packing, first digit most significant.
pub fn pack(digits: &[usize], radices: &[usize]) -> usize {
    digits.iter().zip(radices).fold(0, |acc, (d, r)| acc * r + d)
}

/// Inverse of [`pack`].
pub fn unpack(mut v: usize, radices: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    for (o, r) in out.iter_mut().zip(radices).rev() {
        *o = v % r;
        v /= r;
    }
    out
}
