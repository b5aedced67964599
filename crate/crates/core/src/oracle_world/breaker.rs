use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::World;
use crate::error::{Error, Result};
use crate::oracles::{apply_gates, OracleCircuit};
use crate::poq::{acceptance, unpack, ProtocolSpec, QuantumProver, Sender, Transcript, REJECT};
use crate::qsim::rng::split;
use crate::qsim::{sample_index, RegisterLayout, StateVector, NORM_TOL, ZERO_WEIGHT};

/// `(v, σ)`: the circuits and measured strings so far, and the hash tag vouching for them.
#[derive(Clone, Debug, Default)]
pub struct TranscriptTag {
    pub v: Vec<(OracleCircuit, usize)>,
    pub sigma: Option<usize>,
}

fn hex(c: &OracleCircuit) -> String {
    c.digest().iter().map(|b| format!("{b:02x}")).collect()
}

fn encode_v(v: &[(OracleCircuit, usize)]) -> String {
    v.iter().map(|(c, s)| format!("{}={s};", hex(c))).collect()
}

/// Hash key of `(v, i)`; circuits enter by digest.
pub(crate) fn key(v: &[(OracleCircuit, usize)], i: usize) -> String {
    format!("{}#{i}", encode_v(v))
}

/// Registers whose joint value is the circuit's output: its measured
/// registers, or its first register when it marks none.
fn output_registers(c: &OracleCircuit) -> Vec<String> {
    if c.measured().is_empty() {
        c.registers().iter().take(1).map(|r| r.0.clone()).collect()
    } else {
        c.measured().to_vec()
    }
}

fn project_on(state: StateVector, regs: &[String], value: usize) -> Result<(StateVector, f64)> {
    let layout = state.layout().clone();
    let dims: Vec<usize> = regs.iter().map(|r| layout.reg_dim(r)).collect::<Result<_>>()?;
    if value >= dims.iter().product() {
        return Ok((state, 0.0));
    }
    let mut s = state;
    for (r, d) in regs.iter().zip(unpack(value, &dims)) {
        s = s.project(r, d)?.0;
    }
    let w = s.norm_sqr();
    Ok((s, w))
}

/// `|ψ_v⟩`: start from `|0⟩`, and for each `(C_j, s_j)` apply `C_j` against
/// the world's oracles, project its output onto `s_j` and renormalize.
pub fn build_psi_v(world: &World, layout: &RegisterLayout, v: &[(OracleCircuit, usize)]) -> Result<StateVector> {
    let mut backend = world.backend()?;
    let mut state = StateVector::zero(layout.clone());
    for (j, (c, s)) in v.iter().enumerate() {
        state = apply_gates(c, state, &mut backend, None)?.0;
        let (p, w) = project_on(state, &output_registers(c), *s)?;
        if w < ZERO_WEIGHT {
            return Err(Error::InconsistentTranscript(j + 1));
        }
        state = StateVector::normalized(layout.clone(), p.into_amplitudes())?;
    }
    Ok(state)
}

/// Law of the output of `C` on `|ψ_v⟩`.
pub fn breaking_law(
    world: &World,
    layout: &RegisterLayout,
    v: &[(OracleCircuit, usize)],
    c: &OracleCircuit,
) -> Result<Vec<f64>> {
    let psi = build_psi_v(world, layout, v)?;
    let mut backend = world.backend()?;
    let out = apply_gates(c, psi, &mut backend, None)?.0;
    let regs = output_registers(c);
    let names: Vec<&str> = regs.iter().map(String::as_str).collect();
    out.marginal(&names)
}

fn check_round(world: &World, i: usize) -> Result<()> {
    if i == 0 || i > world.params.rounds {
        return Err(Error::InvalidArgument(format!("round {i} outside 1..={}", world.params.rounds)));
    }
    Ok(())
}

/// One draw from the `i`-th breaking distribution at `(v, σ, C)`: `⊥` if `v`
/// does not have `i − 1` entries or (for `i > 1`) `σ` fails the check on
/// `(v, i − 1)`; otherwise `s` from the output law of `C|ψ_v⟩` together with
/// the tag `H(v‖(C, s), i)`.
pub fn breaking_sample(
    world: &World,
    layout: &RegisterLayout,
    tag: &TranscriptTag,
    c: &OracleCircuit,
    i: usize,
    rng: &mut dyn RngCore,
) -> Result<Option<(usize, usize)>> {
    check_round(world, i)?;
    if tag.v.len() != i - 1 || (i > 1 && !world.check(&key(&tag.v, i - 1), tag.sigma)) {
        return Ok(None);
    }
    let law = breaking_law(world, layout, &tag.v, c)?;
    let s = sample_index(&law, rng);
    let mut next = tag.v.clone();
    next.push((c.clone(), s));
    Ok(Some((s, world.hash(&key(&next, i)))))
}

/// Breaking oracles `P_1, …, P_ℓ` as fixed functions: each input's sample is
/// drawn from randomness derived from the oracle seed and the input, and cached.
pub struct BreakingOracle<'a> {
    world: &'a World,
    layout: RegisterLayout,
    seed: u64,
    cache: HashMap<String, Option<(usize, usize)>>,
}

impl<'a> BreakingOracle<'a> {
    pub fn new(world: &'a World, layout: RegisterLayout, seed: u64) -> Self {
        BreakingOracle { world, layout, seed, cache: HashMap::new() }
    }

    pub fn query(&mut self, tag: &TranscriptTag, c: &OracleCircuit, i: usize) -> Result<Option<(usize, usize)>> {
        let k = format!("{}|{:?}|{}|{i}", encode_v(&tag.v), tag.sigma, hex(c));
        if let Some(hit) = self.cache.get(&k) {
            return Ok(*hit);
        }
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(k.as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&h.finalize());
        let mut rng = ChaCha8Rng::from_seed(seed);
        let out = breaking_sample(self.world, &self.layout, tag, c, i, &mut rng)?;
        self.cache.insert(k, out);
        Ok(out)
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }
}

#[derive(Clone, Debug)]
pub struct BreakerReport {
    pub trials: usize,
    pub accepts: usize,
    pub rate: f64,
    pub sigma: f64,
    /// Exact acceptance of the honest quantum prover.
    pub honest: f64,
}

/// Plays a public-coin protocol classically with fresh breaking oracles per
/// trial: the `i`-th prover message is the breaking-oracle answer on
/// `((C_1, s_1, …, C_{i−1}, s_{i−1}), σ_{i−1}, C_i)` where `C_i` is the honest
/// circuit with the transcript so far hardcoded, and its tag becomes `σ_i`.
pub fn classical_breaker(
    world: &World,
    spec: &ProtocolSpec,
    prover: &QuantumProver,
    trials: usize,
    rng: &mut dyn RngCore,
) -> Result<BreakerReport> {
    if !spec.is_public_coin() {
        return Err(Error::NotPublicCoin);
    }
    let turns = spec.prover_rounds().len();
    if turns > world.params.rounds {
        return Err(Error::CapViolation(format!("{turns} prover messages but {} breaking oracles", world.params.rounds)));
    }
    if (prover.initial().amplitudes()[0].norm_sqr() - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidArgument("the prover must start from |0…0⟩".into()));
    }
    let layout = prover.layout().clone();
    let base = rng.next_u64();
    let circuits: Mutex<BTreeMap<Transcript, OracleCircuit>> = Mutex::new(BTreeMap::new());
    let circuit = |t: &Transcript| -> Result<OracleCircuit> {
        if let Some(c) = circuits.lock().expect("circuit cache").get(t) {
            return Ok(c.clone());
        }
        let c = prover.round_circuit(t.len(), t)?;
        c.digest();
        circuits.lock().expect("circuit cache").insert(t.clone(), c.clone());
        Ok(c)
    };
    let wins = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<bool> {
            let mut r = split(base, trial as u64);
            let mut oracle = BreakingOracle::new(world, layout.clone(), r.next_u64());
            let mut t = Transcript::new();
            let mut tag = TranscriptTag::default();
            let mut turn = 0;
            while t.len() < spec.len() {
                let round = spec.rounds()[t.len()];
                match round.sender {
                    Sender::Verifier => {
                        let m = sample_index(&vec![1.0; round.alphabet], &mut r);
                        t.push(Sender::Verifier, m);
                    }
                    Sender::Prover => {
                        let c = circuit(&t)?;
                        if output_registers(&c) != prover.output_registers(turn) {
                            return Err(Error::InvalidArgument(format!(
                                "circuit for prover turn {turn} must measure exactly its output registers"
                            )));
                        }
                        turn += 1;
                        match oracle.query(&tag, &c, turn)? {
                            Some((s, h)) if s < round.alphabet => {
                                t.push(Sender::Prover, s);
                                tag.v.push((c, s));
                                tag.sigma = Some(h);
                            }
                            _ => {
                                t.push(Sender::Prover, REJECT);
                                return Ok(false);
                            }
                        }
                    }
                }
            }
            spec.accepts(&t)
        })
        .collect::<Result<Vec<bool>>>()?;
    let accepts = wins.iter().filter(|w| **w).count();
    let n = trials.max(1) as f64;
    let rate = accepts as f64 / n;
    Ok(BreakerReport { trials, accepts, rate, sigma: (rate * (1.0 - rate) / n).sqrt(), honest: acceptance(spec, prover)? })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::oracle_world::{sample_world, WorldParams};
    use crate::poq::{clawfree_poq, ClassicalModel, ClawSource, Round, RoundCircuit, Verifier};
    use crate::qsim::rng::seeded;
    use crate::qsim::{gates, permutation_matrix};

    fn world(seed: u64, lambda_h: usize) -> World {
        sample_world(WorldParams::new(2, 1, lambda_h, 3).unwrap(), &mut seeded(seed)).unwrap()
    }

    fn layout() -> RegisterLayout {
        RegisterLayout::new([("x", 4), ("y", 4)]).unwrap()
    }

    /// `|0⟩ ↦ Σ_x |x⟩|f(x)⟩`, output `y`.
    fn query_all() -> OracleCircuit {
        let mut c = OracleCircuit::new([("x", 4), ("y", 4)]).unwrap();
        c.apply(&["x"], gates::hadamard_all(2)).unwrap();
        c.call("f", "x", "y").unwrap();
        c.measure(&["y"]).unwrap();
        c
    }

    /// Shifts `x` by one and outputs it.
    fn shift() -> OracleCircuit {
        let mut c = OracleCircuit::new([("x", 4), ("y", 4)]).unwrap();
        c.apply(&["x"], permutation_matrix(&[1, 2, 3, 0])).unwrap();
        c.measure(&["x"]).unwrap();
        c
    }

    #[test]
    fn empty_history_is_zero() {
        let w = world(1, 3);
        let psi = build_psi_v(&w, &layout(), &[]).unwrap();
        assert_eq!(psi.amplitudes()[0].re, 1.0);
    }

    #[test]
    fn deterministic_step_keeps_the_state() {
        let w = world(2, 3);
        let c = shift();
        let psi = build_psi_v(&w, &layout(), &[(c.clone(), 1)]).unwrap();
        let direct = apply_gates(&c, StateVector::zero(layout()), &mut w.backend().unwrap(), None).unwrap().0;
        assert!(psi.distance(&direct).unwrap() < 1e-12);
        assert!(matches!(build_psi_v(&w, &layout(), &[(c, 2)]), Err(Error::InconsistentTranscript(1))));
    }

    #[test]
    fn post_selection_fixes_the_preimage() {
        let w = world(3, 3);
        let y = w.f().get(2).unwrap();
        let psi = build_psi_v(&w, &layout(), &[(query_all(), y)]).unwrap();
        assert!((psi.marginal(&["x"]).unwrap()[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn breaking_law_is_the_measurement_law() {
        let w = world(4, 3);
        let y = w.f().get(1).unwrap();
        let v = vec![(query_all(), y)];
        let law = breaking_law(&w, &layout(), &v, &shift()).unwrap();
        assert!((law[2] - 1.0).abs() < 1e-12);
        let first = breaking_law(&w, &layout(), &[], &query_all()).unwrap();
        assert!(first.iter().all(|p| (p - 0.25).abs() < 1e-12));
    }

    #[test]
    fn checks_gate_later_rounds() {
        let w = world(5, 3);
        let mut r = seeded(6);
        let first = TranscriptTag { v: vec![], sigma: Some(7) };
        let (s, h) = breaking_sample(&w, &layout(), &first, &query_all(), 1, &mut r).unwrap().unwrap();
        let good = TranscriptTag { v: vec![(query_all(), s)], sigma: Some(h) };
        assert!(breaking_sample(&w, &layout(), &good, &shift(), 2, &mut r).unwrap().is_some());
        let bad = TranscriptTag { sigma: Some(h ^ 1), ..good.clone() };
        assert!(breaking_sample(&w, &layout(), &bad, &shift(), 2, &mut r).unwrap().is_none());
        let wrong_len = TranscriptTag { v: vec![], sigma: Some(h) };
        assert!(breaking_sample(&w, &layout(), &wrong_len, &shift(), 2, &mut r).unwrap().is_none());
        assert!(breaking_sample(&w, &layout(), &good, &shift(), 4, &mut r).is_err());
    }

    #[test]
    fn every_corrupted_tag_is_refused() {
        let w = world(7, 3);
        let steps = [query_all(), shift(), shift()];
        let mut oracle = BreakingOracle::new(&w, layout(), 8);
        let mut chain = vec![TranscriptTag::default()];
        for (i, c) in steps.iter().enumerate() {
            let tag = chain.last().unwrap().clone();
            let (s, h) = oracle.query(&tag, c, i + 1).unwrap().unwrap();
            let mut v = tag.v.clone();
            v.push((c.clone(), s));
            chain.push(TranscriptTag { v, sigma: Some(h) });
        }
        for j in 1..steps.len() {
            for bit in 0..3 {
                let mut forged = chain[j].clone();
                forged.sigma = forged.sigma.map(|h| h ^ (1 << bit));
                assert!(oracle.query(&forged, &steps[j], j + 1).unwrap().is_none());
                // without a valid tag nothing later can be vouched for
                for k in j + 1..steps.len() {
                    let mut later = chain[k].clone();
                    later.sigma = None;
                    assert!(oracle.query(&later, &steps[k], k + 1).unwrap().is_none());
                }
            }
        }
    }

    #[test]
    fn oracle_answers_are_fixed() {
        let w = world(9, 3);
        let mut o = BreakingOracle::new(&w, layout(), 10);
        let t = TranscriptTag::default();
        let a = o.query(&t, &query_all(), 1).unwrap();
        assert_eq!(o.query(&t, &query_all(), 1).unwrap(), a);
        assert_eq!(o.cached(), 1);
        let mut again = BreakingOracle::new(&w, layout(), 10);
        assert_eq!(again.query(&t, &query_all(), 1).unwrap(), a);
    }

    /// V sends nothing useful; P outputs `f(x)` for uniform `x`; V accepts even outputs.
    fn parity_protocol(n: usize) -> (ProtocolSpec, QuantumProver) {
        let v = Verifier::PublicCoin { predicate: Arc::new(|t: &Transcript| t.symbol(1).is_some_and(|y| y % 2 == 0)) };
        let spec =
            ProtocolSpec::new("parity", vec![Round::verifier(1), Round::prover(n)], v, ClassicalModel::Transparent, 0.5, 0.5)
                .unwrap();
        let bits = n.trailing_zeros() as usize;
        let circuit: RoundCircuit = Arc::new(move |_, _| {
            let mut c = OracleCircuit::new([("x", n), ("y", n)])?;
            c.apply(&["x"], gates::hadamard_all(bits))?;
            c.call("f", "x", "y")?;
            c.measure(&["y"])?;
            Ok(c)
        });
        let prover = QuantumProver::new(vec![("x".into(), n), ("y".into(), n)], vec![vec!["y".into()]], circuit).unwrap();
        (spec, prover)
    }

    #[test]
    fn breaker_matches_a_half_accepting_prover() {
        let w = world(11, 3);
        let (spec, prover) = parity_protocol(4);
        let prover = prover.with_oracles(w.backend().unwrap());
        let rep = classical_breaker(&w, &spec, &prover, 3000, &mut seeded(12)).unwrap();
        assert!((rep.honest - 0.5).abs() < 1e-12);
        assert!((rep.rate - rep.honest).abs() <= 4.0 * rep.sigma, "{rep:?}");
    }

    #[test]
    fn breaker_wins_the_clawfree_protocol_over_the_world() {
        let w = sample_world(WorldParams::new(2, 1, 3, 2).unwrap(), &mut seeded(13)).unwrap();
        let (spec, prover) = clawfree_poq(2, ClawSource::Oracle(w.f().clone()), true).unwrap();
        let rep = classical_breaker(&w, &spec, &prover, 300, &mut seeded(14)).unwrap();
        assert!((rep.honest - 1.0).abs() < 1e-12);
        assert_eq!(rep.accepts, 300);
        assert!(spec.soundness() < 1.0);
    }
}
