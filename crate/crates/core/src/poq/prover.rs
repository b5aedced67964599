use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::RngCore;

use super::{unpack, Transcript, REJECT};
use crate::error::{Error, Result};
use crate::oracles::{apply_gates, OracleCircuit, TruthTableBackend};
use crate::qsim::{sample_index, RegisterLayout, StateVector, ZERO_WEIGHT};

/// Circuit the quantum prover runs before emitting the message at schedule
/// position `index`, given the transcript so far.
pub type RoundCircuit = Arc<dyn Fn(usize, &Transcript) -> Result<OracleCircuit> + Send + Sync>;

/// One possible next message with its probability and the prover state it leaves.
#[derive(Clone, Debug)]
pub struct Branch {
    pub message: usize,
    pub prob: f64,
    pub state: Option<StateVector>,
}

/// Anything that can play the prover side during exact enumeration or sampling.
pub trait Responder: Sync {
    fn initial_state(&self) -> Result<Option<StateVector>>;

    /// Law of the next prover message after `t`, given the internal state.
    fn branches(&self, t: &Transcript, state: Option<&StateVector>) -> Result<Vec<Branch>>;

    fn sample(&self, t: &Transcript, state: Option<&StateVector>, rng: &mut dyn RngCore) -> Result<Branch> {
        let mut b = self.branches(t, state)?;
        if b.is_empty() {
            return Ok(Branch { message: REJECT, prob: 1.0, state: None });
        }
        let w: Vec<f64> = b.iter().map(|x| x.prob).collect();
        Ok(b.swap_remove(sample_index(&w, rng)))
    }
}

/// Prover without quantum state: a (possibly randomized) next-message rule.
pub trait ClassicalProver: Sync {
    fn next_message(&self, t: &Transcript) -> Result<Vec<(usize, f64)>>;
}

impl<T: ClassicalProver + ?Sized> ClassicalProver for &T {
    fn next_message(&self, t: &Transcript) -> Result<Vec<(usize, f64)>> {
        (**self).next_message(t)
    }
}

/// Adapter running a [`ClassicalProver`] as a [`Responder`].
pub struct Classical<P>(pub P);

impl<P: ClassicalProver> Responder for Classical<P> {
    fn initial_state(&self) -> Result<Option<StateVector>> {
        Ok(None)
    }

    fn branches(&self, t: &Transcript, _state: Option<&StateVector>) -> Result<Vec<Branch>> {
        Ok(self.0.next_message(t)?.into_iter().map(|(message, prob)| Branch { message, prob, state: None }).collect())
    }
}

/// Deterministic lookup table; transcripts not in the table get `⊤`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TableProver {
    table: BTreeMap<Transcript, usize>,
}

impl TableProver {
    pub fn new(table: BTreeMap<Transcript, usize>) -> Self {
        TableProver { table }
    }

    pub fn get(&self, t: &Transcript) -> usize {
        self.table.get(t).copied().unwrap_or(REJECT)
    }

    pub fn entries(&self) -> &BTreeMap<Transcript, usize> {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl ClassicalProver for TableProver {
    fn next_message(&self, t: &Transcript) -> Result<Vec<(usize, f64)>> {
        Ok(vec![(self.get(t), 1.0)])
    }
}

/// Classical prover given by a closure.
pub struct FnProver<F>(pub F);

impl<F: Fn(&Transcript) -> Vec<(usize, f64)> + Sync> ClassicalProver for FnProver<F> {
    fn next_message(&self, t: &Transcript) -> Result<Vec<(usize, f64)>> {
        Ok((self.0)(t))
    }
}

/// Purified quantum prover over named registers. Before the message at
/// position `i` it runs `circuit(i, τ)` on its state; the message is the
/// joint value of the output registers for that prover turn (the last entry
/// of `outputs` is reused for later turns).
#[derive(Clone)]
pub struct QuantumProver {
    layout: RegisterLayout,
    initial: StateVector,
    outputs: Vec<Vec<String>>,
    circuit: RoundCircuit,
    oracles: TruthTableBackend,
}

impl fmt::Debug for QuantumProver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuantumProver").field("layout", &self.layout).field("outputs", &self.outputs).finish()
    }
}

impl QuantumProver {
    /// Starts in `|0…0⟩`.
    pub fn new(registers: Vec<(String, usize)>, outputs: Vec<Vec<String>>, circuit: RoundCircuit) -> Result<Self> {
        let layout = RegisterLayout::new(registers)?;
        if outputs.is_empty() || outputs.iter().any(|o| o.is_empty()) {
            return Err(Error::ScheduleMismatch("every prover turn needs an output register".into()));
        }
        for r in outputs.iter().flatten() {
            layout.position(r)?;
        }
        let initial = StateVector::zero(layout.clone());
        Ok(QuantumProver { layout, initial, outputs, circuit, oracles: TruthTableBackend::new() })
    }

    pub fn with_initial(mut self, initial: StateVector) -> Result<Self> {
        if initial.layout() != &self.layout {
            return Err(Error::LayoutMismatch);
        }
        self.initial = initial;
        Ok(self)
    }

    /// Oracle tables answering the round circuits' calls.
    pub fn with_oracles(mut self, oracles: TruthTableBackend) -> Self {
        self.oracles = oracles;
        self
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn initial(&self) -> &StateVector {
        &self.initial
    }

    pub fn oracles(&self) -> &TruthTableBackend {
        &self.oracles
    }

    /// Output registers of the `k`-th prover turn (0-based).
    pub fn output_registers(&self, k: usize) -> &[String] {
        &self.outputs[k.min(self.outputs.len() - 1)]
    }

    pub fn output_alphabet(&self, k: usize) -> Result<usize> {
        self.output_registers(k).iter().map(|r| self.layout.reg_dim(r)).product()
    }

    pub fn round_circuit(&self, index: usize, t: &Transcript) -> Result<OracleCircuit> {
        (self.circuit)(index, t)
    }

    /// Runs the circuit for the message following `t`.
    pub fn step(&self, state: &StateVector, t: &Transcript) -> Result<StateVector> {
        let c = self.round_circuit(t.len(), t)?;
        let mut b = self.oracles.clone();
        Ok(apply_gates(&c, state.clone(), &mut b, None)?.0)
    }

    /// Law of the joint output value of prover turn `k` in `state`.
    pub fn output_distribution(&self, state: &StateVector, k: usize) -> Result<Vec<f64>> {
        let regs: Vec<&str> = self.output_registers(k).iter().map(String::as_str).collect();
        state.marginal(&regs)
    }

    /// Post-selects the outputs of turn `k` on `value` and renormalizes.
    pub fn post_select(&self, state: &StateVector, k: usize, value: usize) -> Result<(StateVector, f64)> {
        let regs = self.output_registers(k);
        let dims: Vec<usize> = regs.iter().map(|r| self.layout.reg_dim(r)).collect::<Result<_>>()?;
        if value >= dims.iter().product() {
            return Err(Error::AlphabetMismatch(format!("output {value} outside the prover's output registers")));
        }
        let mut s = state.clone();
        for (r, d) in regs.iter().zip(unpack(value, &dims)) {
            s = s.project(r, d)?.0;
        }
        let w = s.norm_sqr();
        if w < ZERO_WEIGHT {
            return Err(Error::ZeroWeight(w));
        }
        Ok((StateVector::normalized(self.layout.clone(), s.into_amplitudes())?, w))
    }

    /// The prover's state after `t`, recomputed from the initial state by
    /// replaying every round circuit and post-selecting on each prover message.
    pub fn conditional_state(&self, t: &Transcript) -> Result<StateVector> {
        let mut s = self.initial.clone();
        let mut k = 0;
        for (i, &(sender, m)) in t.messages().iter().enumerate() {
            if sender != super::Sender::Prover {
                continue;
            }
            s = self.step(&s, &t.prefix(i))?;
            s = match self.post_select(&s, k, m) {
                Ok((p, _)) => p,
                Err(Error::ZeroWeight(_) | Error::AlphabetMismatch(_)) => return Err(Error::InconsistentTranscript(i + 1)),
                Err(e) => return Err(e),
            };
            k += 1;
        }
        Ok(s)
    }

    /// Honest law of the next prover message after `t`.
    pub fn next_distribution(&self, t: &Transcript) -> Result<Vec<f64>> {
        let s = self.step(&self.conditional_state(t)?, t)?;
        self.output_distribution(&s, t.prover_messages())
    }
}

impl Responder for QuantumProver {
    fn initial_state(&self) -> Result<Option<StateVector>> {
        Ok(Some(self.initial.clone()))
    }

    fn branches(&self, t: &Transcript, state: Option<&StateVector>) -> Result<Vec<Branch>> {
        let state = state.ok_or_else(|| Error::InvalidArgument("quantum prover called without its state".into()))?;
        let s = self.step(state, t)?;
        let k = t.prover_messages();
        let mut out = vec![];
        for (v, p) in self.output_distribution(&s, k)?.into_iter().enumerate() {
            if p > ZERO_WEIGHT {
                let (post, _) = self.post_select(&s, k, v)?;
                out.push(Branch { message: v, prob: p, state: Some(post) });
            }
        }
        Ok(out)
    }
}

/// Classical sampler from the honest prover's conditional next-message law;
/// transcripts the honest prover cannot reach are answered with `⊤`.
pub struct ConditionalSampler<'a>(pub &'a QuantumProver);

impl ClassicalProver for ConditionalSampler<'_> {
    fn next_message(&self, t: &Transcript) -> Result<Vec<(usize, f64)>> {
        match self.0.next_distribution(t) {
            Ok(p) => Ok(p.into_iter().enumerate().filter(|(_, w)| *w > ZERO_WEIGHT).collect()),
            Err(Error::InconsistentTranscript(_)) => Ok(vec![(REJECT, 1.0)]),
            Err(e) => Err(e),
        }
    }
}

/// Honest for the first `honest_messages` messages, classical afterwards.
pub struct HybridProver<'a> {
    pub honest: &'a QuantumProver,
    pub after: &'a dyn ClassicalProver,
    pub honest_messages: usize,
}

impl Responder for HybridProver<'_> {
    fn initial_state(&self) -> Result<Option<StateVector>> {
        self.honest.initial_state()
    }

    fn branches(&self, t: &Transcript, state: Option<&StateVector>) -> Result<Vec<Branch>> {
        if t.len() < self.honest_messages {
            self.honest.branches(t, state)
        } else {
            Classical(self.after).branches(t, None)
        }
    }
}
