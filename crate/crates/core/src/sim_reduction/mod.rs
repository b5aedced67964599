//! Simulating a classical rewinding reduction against a four-message protocol
//! with cloned prover states: first-message queries run the honest prover,
//! clone its state and file the clones under the partial transcript;
//! last-message queries spend one unused clone each and abort once none is left.

mod database;

use rand::RngCore;

pub use database::{permute_parts, symmetrize, CloneDatabase, StoredState};

use crate::error::{Error, Result};
use crate::poq::{ProtocolSpec, QuantumProver, Sender, Transcript};
use crate::qsim::{sample_index, DensityMatrix, ZERO_WEIGHT};
use crate::transforms::{copy_registers, round_unitary, Cloner};

const STEP_LIMIT: usize = 1 << 16;

/// What a reduction sees: its own coins and the answers to its queries, in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Event {
    Coin(usize),
    Answer(usize),
}

impl Event {
    pub fn value(self) -> usize {
        match self {
            Event::Coin(v) | Event::Answer(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    /// Draw a uniform value below the given bound.
    Coin(usize),
    /// Ask for the prover message following a partial transcript ending in a verifier message.
    Query(Transcript),
    Output(bool),
}

/// A classical reduction given as its next step on each history.
pub trait Reduction: Sync {
    fn next(&self, history: &[Event]) -> Result<Step>;
}

pub struct FnReduction<F>(pub F);

impl<F: Fn(&[Event]) -> Result<Step> + Sync> Reduction for FnReduction<F> {
    fn next(&self, history: &[Event]) -> Result<Step> {
        (self.0)(history)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Script {
    /// One honest run, accepting iff the verifier does.
    StraightLine,
    /// One first message, then `k` fresh challenges against it; accepts iff all pass.
    RewindLast(usize),
    /// `k` independent straight-line runs; accepts iff all pass.
    Restart(usize),
}

/// A fixed reduction that plays the protocol's own verifier.
pub struct ScriptedReduction {
    spec: ProtocolSpec,
    script: Script,
}

impl ScriptedReduction {
    pub fn new(spec: &ProtocolSpec, script: Script) -> Result<Self> {
        check_schedule(spec)?;
        Ok(ScriptedReduction { spec: spec.clone(), script })
    }

    fn full(&self, r1: usize, m1: usize, r2: usize, m2: usize) -> Transcript {
        Transcript::from_messages(vec![
            (Sender::Verifier, r1),
            (Sender::Prover, m1),
            (Sender::Verifier, r2),
            (Sender::Prover, m2),
        ])
    }

    fn run_from(&self, h: &[Event]) -> Result<std::result::Result<bool, Step>> {
        let a = |i: usize| self.spec.rounds()[i].alphabet;
        let v: Vec<usize> = h.iter().map(|e| e.value()).collect();
        Ok(match v.len() {
            0 => Err(Step::Coin(a(0))),
            1 => Err(Step::Query(self.full(v[0], 0, 0, 0).prefix(1))),
            2 => Err(Step::Coin(a(2))),
            3 => Err(Step::Query(self.full(v[0], v[1], v[2], 0).prefix(3))),
            _ => Ok(self.spec.accepts(&self.full(v[0], v[1], v[2], v[3]))?),
        })
    }
}

impl Reduction for ScriptedReduction {
    fn next(&self, h: &[Event]) -> Result<Step> {
        match self.script {
            Script::StraightLine => Ok(self.run_from(h)?.map_or_else(|s| s, Step::Output)),
            Script::Restart(k) => {
                let mut all = true;
                for j in 0..k {
                    let part = &h[(4 * j).min(h.len())..h.len().min(4 * j + 4)];
                    match self.run_from(part)? {
                        Ok(ok) => all &= ok,
                        Err(step) => return Ok(step),
                    }
                }
                Ok(Step::Output(all))
            }
            Script::RewindLast(k) => {
                let v: Vec<usize> = h.iter().map(|e| e.value()).collect();
                if v.len() < 2 {
                    return Ok(self.run_from(h)?.unwrap_err());
                }
                let mut all = true;
                for j in 0..k {
                    let rest = &v[2 + 2 * j..];
                    match rest.len() {
                        0 => return Ok(Step::Coin(self.spec.rounds()[2].alphabet)),
                        1 => return Ok(Step::Query(self.full(v[0], v[1], rest[0], 0).prefix(3))),
                        _ => all &= self.spec.accepts(&self.full(v[0], v[1], rest[0], rest[1]))?,
                    }
                }
                Ok(Step::Output(all))
            }
        }
    }
}

fn check_schedule(spec: &ProtocolSpec) -> Result<()> {
    if !spec.is_public_coin() {
        return Err(Error::NotPublicCoin);
    }
    if spec.len() != 4 {
        return Err(Error::WrongRoundCount { expected: 4, found: spec.len() });
    }
    if spec.prover_rounds() != [1, 3] {
        return Err(Error::ScheduleMismatch("expected verifier, prover, verifier, prover".into()));
    }
    Ok(())
}

/// The simulator's state: the protocol, the honest prover, the cloner and the database.
#[derive(Clone)]
pub struct Sim<'a> {
    spec: &'a ProtocolSpec,
    prover: &'a QuantumProver,
    cloner: &'a dyn Cloner,
    symmetric: bool,
    db: CloneDatabase,
}

impl<'a> Sim<'a> {
    pub fn new(spec: &'a ProtocolSpec, prover: &'a QuantumProver, cloner: &'a dyn Cloner, parts: usize) -> Result<Self> {
        check_schedule(spec)?;
        let db = CloneDatabase::new(prover.layout().clone(), parts)?;
        Ok(Sim { spec, prover, cloner, symmetric: true, db })
    }

    /// Stores clones in the cloner's own part order instead of symmetrizing.
    pub fn unsymmetrized(mut self) -> Self {
        self.symmetric = false;
        self
    }

    pub fn spec(&self) -> &ProtocolSpec {
        self.spec
    }

    pub fn database(&self) -> &CloneDatabase {
        &self.db
    }

    /// Every answer to query `q` with its probability and the simulator after it.
    pub fn answer_law(&self, q: &Transcript) -> Result<Vec<(usize, f64, Sim<'a>)>> {
        let senders: Vec<Sender> = q.messages().iter().map(|m| m.0).collect();
        match senders.as_slice() {
            [Sender::Verifier] => {
                let s = self.prover.step(self.prover.initial(), q)?;
                let mut out = vec![];
                for (m, p) in self.prover.output_distribution(&s, 0)?.into_iter().enumerate() {
                    if p <= ZERO_WEIGHT {
                        continue;
                    }
                    let (post, _) = self.prover.post_select(&s, 0, m)?;
                    let parts = self.cloner.clone_state(&post, self.db.parts())?;
                    let mut next = self.clone();
                    next.db.insert(q.with(Sender::Prover, m), &parts, self.symmetric)?;
                    out.push((m, p, next));
                }
                Ok(out)
            }
            [Sender::Verifier, Sender::Prover, Sender::Verifier] => {
                let u = round_unitary(self.prover, q)?;
                let law = self.db.consume_law(&q.prefix(2), &u, self.prover.output_registers(1))?;
                Ok(law.into_iter().map(|(m, p, db)| (m, p, Sim { db, ..self.clone() })).collect())
            }
            _ => Err(Error::InvalidArgument(format!("query {:?} does not end a verifier turn", q.symbols()))),
        }
    }

    pub fn answer(&mut self, q: &Transcript, rng: &mut dyn RngCore) -> Result<usize> {
        let mut law = self.answer_law(q)?;
        let probs: Vec<f64> = law.iter().map(|b| b.1).collect();
        let (m, _, next) = law.swap_remove(sample_index(&probs, rng));
        *self = next;
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimOutcome {
    Output(bool),
    /// A last-message query found no unused clone.
    Abort,
}

pub struct SimRun<'a> {
    pub outcome: SimOutcome,
    pub history: Vec<Event>,
    pub queries: usize,
    pub sim: Sim<'a>,
}

/// One sampled interaction of `reduction` with the simulator.
pub fn run_sim<'a>(mut sim: Sim<'a>, reduction: &dyn Reduction, rng: &mut dyn RngCore) -> Result<SimRun<'a>> {
    let mut history = vec![];
    let mut queries = 0;
    for _ in 0..STEP_LIMIT {
        let outcome = match reduction.next(&history)? {
            Step::Output(b) => Some(SimOutcome::Output(b)),
            Step::Coin(k) => {
                history.push(Event::Coin(sample_index(&vec![1.0; k.max(1)], rng)));
                None
            }
            Step::Query(q) => {
                queries += 1;
                match sim.answer(&q, rng) {
                    Ok(m) => {
                        history.push(Event::Answer(m));
                        None
                    }
                    Err(Error::DatabaseExhausted(_)) => Some(SimOutcome::Abort),
                    Err(e) => return Err(e),
                }
            }
        };
        if let Some(outcome) = outcome {
            return Ok(SimRun { outcome, history, queries, sim });
        }
    }
    Err(Error::InvalidArgument(format!("reduction ran past {STEP_LIMIT} steps")))
}

#[derive(Clone, Debug)]
pub struct SimLeaf {
    pub history: Vec<Event>,
    pub prob: f64,
    pub outcome: SimOutcome,
    /// Clone parts measured along this branch.
    pub measured: usize,
}

#[derive(Clone, Debug, Default)]
pub struct SimLaw {
    pub leaves: Vec<SimLeaf>,
    pub accept: f64,
    pub reject: f64,
    pub abort: f64,
}

/// Exact law of the interaction, enumerating the reduction's coins and every
/// measurement outcome.
pub fn sim_law(sim: &Sim<'_>, reduction: &dyn Reduction) -> Result<SimLaw> {
    let mut law = SimLaw::default();
    explore(sim, reduction, vec![], 1.0, &mut law)?;
    for l in &law.leaves {
        match l.outcome {
            SimOutcome::Output(true) => law.accept += l.prob,
            SimOutcome::Output(false) => law.reject += l.prob,
            SimOutcome::Abort => law.abort += l.prob,
        }
    }
    Ok(law)
}

fn explore(sim: &Sim<'_>, reduction: &dyn Reduction, history: Vec<Event>, prob: f64, law: &mut SimLaw) -> Result<()> {
    if history.len() > STEP_LIMIT {
        return Err(Error::InvalidArgument(format!("reduction ran past {STEP_LIMIT} steps")));
    }
    let leaf = |outcome, history| SimLeaf { history, prob, outcome, measured: sim.db.measured() };
    match reduction.next(&history)? {
        Step::Output(b) => law.leaves.push(leaf(SimOutcome::Output(b), history)),
        Step::Coin(k) => {
            let k = k.max(1);
            for v in 0..k {
                let mut h = history.clone();
                h.push(Event::Coin(v));
                explore(sim, reduction, h, prob / k as f64, law)?;
            }
        }
        Step::Query(q) => match sim.answer_law(&q) {
            Ok(branches) => {
                for (m, p, next) in branches {
                    let mut h = history.clone();
                    h.push(Event::Answer(m));
                    explore(&next, reduction, h, prob * p, law)?;
                }
            }
            Err(Error::DatabaseExhausted(_)) => law.leaves.push(leaf(SimOutcome::Abort, history)),
            Err(e) => return Err(e),
        },
    }
    Ok(())
}

fn retained_state(prover: &QuantumProver, cloner: &dyn Cloner, parts: usize, post: &crate::qsim::StateVector) -> Result<Vec<DensityMatrix>> {
    let cloned = cloner.clone_state(post, parts)?;
    (0..parts)
        .map(|t| {
            let regs = copy_registers(prover.layout(), t);
            let regs: Vec<&str> = regs.iter().map(String::as_str).collect();
            DensityMatrix::new(prover.layout().clone(), cloned.reduced(&regs)?.matrix().clone())
        })
        .collect()
}

/// The cloning prover's first move on `t = (r)`: honest message `m`, then the
/// cloner's `n` parts, of which a uniformly chosen one is kept as the state.
pub fn cloning_prover_round(
    prover: &QuantumProver,
    cloner: &dyn Cloner,
    parts: usize,
    t: &Transcript,
    rng: &mut dyn RngCore,
) -> Result<(usize, DensityMatrix)> {
    if parts == 0 {
        return Err(Error::ArityMismatch { expected: 1, found: 0 });
    }
    let s = prover.step(prover.initial(), t)?;
    let m = sample_index(&prover.output_distribution(&s, 0)?, rng);
    let (post, _) = prover.post_select(&s, 0, m)?;
    let keep = sample_index(&vec![1.0; parts], rng);
    Ok((m, retained_state(prover, cloner, parts, &post)?.swap_remove(keep)))
}

/// Exact acceptance of the cloning prover: honest first message, a uniformly
/// chosen clone as the state for the honest last message.
pub fn cloning_prover_acceptance(
    spec: &ProtocolSpec,
    prover: &QuantumProver,
    cloner: &dyn Cloner,
    parts: usize,
) -> Result<f64> {
    check_schedule(spec)?;
    if parts == 0 {
        return Err(Error::ArityMismatch { expected: 1, found: 0 });
    }
    let (a0, a2) = (spec.rounds()[0].alphabet, spec.rounds()[2].alphabet);
    let outs: Vec<&str> = prover.output_registers(1).iter().map(String::as_str).collect();
    let mut total = 0.0;
    for r1 in 0..a0 {
        let t1 = Transcript::from_messages(vec![(Sender::Verifier, r1)]);
        let s = prover.step(prover.initial(), &t1)?;
        for (m1, p1) in prover.output_distribution(&s, 0)?.into_iter().enumerate() {
            if p1 <= ZERO_WEIGHT {
                continue;
            }
            let (post, _) = prover.post_select(&s, 0, m1)?;
            let kept = retained_state(prover, cloner, parts, &post)?;
            let rho = DensityMatrix::mixture(&kept.into_iter().map(|d| (1.0 / parts as f64, d)).collect::<Vec<_>>())?;
            for r2 in 0..a2 {
                let t3 = t1.with(Sender::Prover, m1).with(Sender::Verifier, r2);
                let names: Vec<&str> = prover.layout().names().iter().map(String::as_str).collect();
                let evolved = rho.conjugate(&round_unitary(prover, &t3)?, &names)?;
                for (m2, p2) in evolved.marginal(&outs)?.into_iter().enumerate() {
                    if p2 > ZERO_WEIGHT && spec.accepts(&t3.with(Sender::Prover, m2))? {
                        total += p1 * p2 / (a0 * a2) as f64;
                    }
                }
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests;
