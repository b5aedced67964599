use rand::{Rng, RngCore};
use rayon::prelude::*;

use super::{all_accept, copy_name, copy_registers, Cloner, WeakLightning, WeakMinischeme, WeakTokenScheme};
use crate::error::{Error, Result};
use crate::oracles::apply_gates;
use crate::poq::{Sender, Transcript};
use crate::qsim::rng::split;
use crate::qsim::{RegisterLayout, StateVector};
use crate::transforms::token::TokenKind;

/// Empirical outcome of a cloning game.
#[derive(Clone, Debug, PartialEq)]
pub struct GameReport {
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    /// Binomial standard error of `rate`.
    pub sigma: f64,
    /// Mean exact win probability over the sampled instances.
    pub exact_mean: f64,
}

fn report(outcomes: Vec<(bool, f64)>) -> GameReport {
    let trials = outcomes.len();
    let successes = outcomes.iter().filter(|o| o.0).count();
    let t = trials.max(1) as f64;
    let rate = successes as f64 / t;
    GameReport {
        trials,
        successes,
        rate,
        sigma: (rate * (1.0 - rate) / t).sqrt(),
        exact_mean: outcomes.iter().map(|o| o.1).sum::<f64>() / t,
    }
}

fn run_trials(
    trials: usize,
    rng: &mut dyn RngCore,
    trial: impl Fn(&mut dyn RngCore) -> Result<f64> + Sync,
) -> Result<GameReport> {
    let seed = rng.next_u64();
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut r = split(seed, i as u64);
            let p = trial(&mut r)?;
            Ok((r.gen::<f64>() < p, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report(outcomes))
}

/// Checks that `state` holds exactly `n` copies of `base` (plus optional workspace).
fn check_parts(state: &StateVector, base: &RegisterLayout, n: usize) -> Result<()> {
    let first = base.names().first().map(String::as_str).unwrap_or("");
    let found = (0..).take_while(|&j| state.layout().contains(&copy_name(j, first))).count();
    let complete = (0..found).all(|j| copy_registers(base, j).iter().all(|r| state.layout().contains(r)));
    if found != n || !complete {
        return Err(Error::ArityMismatch { expected: n, found });
    }
    Ok(())
}

/// Minischeme game: the adversary turns `|ψ_s⟩` into `n` parts and wins if
/// every part verifies under `s`.
pub fn run_unclonability_game(
    scheme: &WeakMinischeme,
    adversary: &dyn Cloner,
    n: usize,
    trials: usize,
    rng: &mut dyn RngCore,
) -> Result<GameReport> {
    run_trials(trials, rng, |r| {
        let (s, psi) = scheme.sample(r)?;
        let joint = adversary.clone_state(&psi, n)?;
        check_parts(&joint, scheme.layout(), n)?;
        let e = scheme.effect(&s)?;
        let effects: Vec<_> = (0..n).map(|j| (copy_registers(scheme.layout(), j), e.clone())).collect();
        all_accept(&joint, &effects)
    })
}

/// Adversary in the lightning game: picks a serial for `pp` and an `n`-part state.
pub trait LightningAdversary: Sync {
    fn forge(&self, scheme: &WeakLightning, pp: usize, n: usize, rng: &mut dyn RngCore)
        -> Result<(usize, StateVector)>;
}

/// Runs honest Samp and hands the banknote to a cloner.
pub struct CloneBanknote<'a>(pub &'a dyn Cloner);

impl LightningAdversary for CloneBanknote<'_> {
    fn forge(
        &self,
        scheme: &WeakLightning,
        pp: usize,
        n: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(usize, StateVector)> {
        let (s, psi) = scheme.samp(pp, rng)?;
        Ok((s, self.0.clone_state(&psi, n)?))
    }
}

/// Lightning game: wins if every part passes verification under `(pp, s)`.
pub fn run_lightning_game(
    scheme: &WeakLightning,
    adversary: &dyn LightningAdversary,
    n: usize,
    trials: usize,
    rng: &mut dyn RngCore,
) -> Result<GameReport> {
    run_trials(trials, rng, |r| {
        let pp = scheme.setup(r);
        let (s, joint) = adversary.forge(scheme, pp, n, r)?;
        check_parts(&joint, scheme.prover.layout(), n)?;
        let e = scheme.effect(pp, s)?;
        let effects: Vec<_> = (0..n).map(|j| (copy_registers(scheme.prover.layout(), j), e.clone())).collect();
        all_accept(&joint, &effects)
    })
}

/// Adversary in the token or one-shot-signature game.
///
/// For tokens `public` is the sampled prefix and `state` the honest state; for
/// one-shot signatures `public` is `pp`, `state` is `None` and the adversary
/// returns the prefix it commits to. Returns the law of the signature tuples.
pub trait TokenAdversary: Sync {
    fn attack(
        &self,
        scheme: &WeakTokenScheme,
        public: &Transcript,
        state: Option<&StateVector>,
        challenges: &[usize],
        rng: &mut dyn RngCore,
    ) -> Result<(Transcript, Vec<(Vec<usize>, f64)>)>;
}

fn own_state(
    scheme: &WeakTokenScheme,
    public: &Transcript,
    state: Option<&StateVector>,
    rng: &mut dyn RngCore,
) -> Result<(Transcript, StateVector)> {
    match state {
        Some(s) => Ok((public.clone(), s.clone())),
        None => scheme.samp(public, rng),
    }
}

/// Signs the challenges one after another, each from the state the previous
/// signature left.
pub struct ReuseSigner;

impl TokenAdversary for ReuseSigner {
    fn attack(
        &self,
        scheme: &WeakTokenScheme,
        public: &Transcript,
        state: Option<&StateVector>,
        challenges: &[usize],
        rng: &mut dyn RngCore,
    ) -> Result<(Transcript, Vec<(Vec<usize>, f64)>)> {
        let (prefix, mut psi) = own_state(scheme, public, state, rng)?;
        let mut sigs = vec![];
        for &r in challenges {
            let (m, post) = scheme.sign(&prefix, &psi, r, rng)?;
            sigs.push(m);
            psi = post;
        }
        Ok((prefix, vec![(sigs, 1.0)]))
    }
}

/// Uniformly random signatures.
pub struct GuessingSigner;

impl TokenAdversary for GuessingSigner {
    fn attack(
        &self,
        scheme: &WeakTokenScheme,
        public: &Transcript,
        state: Option<&StateVector>,
        challenges: &[usize],
        rng: &mut dyn RngCore,
    ) -> Result<(Transcript, Vec<(Vec<usize>, f64)>)> {
        let (prefix, _) = own_state(scheme, public, state, rng)?;
        let sigs = challenges.iter().map(|_| rng.gen_range(0..scheme.signatures())).collect();
        Ok((prefix, vec![(sigs, 1.0)]))
    }
}

/// Clones the state and answers challenge `i` from part `i`; reports the exact
/// joint law of the answers.
pub struct CloningSigner<'a>(pub &'a dyn Cloner);

impl TokenAdversary for CloningSigner<'_> {
    fn attack(
        &self,
        scheme: &WeakTokenScheme,
        public: &Transcript,
        state: Option<&StateVector>,
        challenges: &[usize],
        rng: &mut dyn RngCore,
    ) -> Result<(Transcript, Vec<(Vec<usize>, f64)>)> {
        let (prefix, psi) = own_state(scheme, public, state, rng)?;
        let n = challenges.len();
        let mut joint = self.0.clone_state(&psi, n)?;
        let mut backend = scheme.prover.oracles().clone();
        for (i, &r) in challenges.iter().enumerate() {
            let t = prefix.with(Sender::Verifier, r);
            let c = scheme.prover.round_circuit(t.len(), &t)?.renamed(|x| copy_name(i, x), |s| s.to_string());
            joint = apply_gates(&c, joint, &mut backend, None)?.0;
        }
        let turn = prefix.prover_messages();
        let regs: Vec<String> = (0..n)
            .flat_map(|i| scheme.prover.output_registers(turn).iter().map(move |x| copy_name(i, x)))
            .collect();
        let names: Vec<&str> = regs.iter().map(String::as_str).collect();
        let radix = scheme.prover.output_alphabet(turn)?;
        let law = joint
            .marginal(&names)?
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(v, p)| (crate::poq::unpack(v, &vec![radix; n]), p))
            .collect();
        Ok((prefix, law))
    }
}

/// Token or one-shot-signature game: `n` uniform challenges, the adversary
/// wins if every signature verifies.
pub fn run_token_game(
    scheme: &WeakTokenScheme,
    adversary: &dyn TokenAdversary,
    n: usize,
    trials: usize,
    rng: &mut dyn RngCore,
) -> Result<GameReport> {
    run_trials(trials, rng, |r| {
        let pp = scheme.setup(r);
        let (public, state) = match scheme.kind {
            TokenKind::Token => {
                let (t, psi) = scheme.samp(&pp, r)?;
                (t, Some(psi))
            }
            TokenKind::Oss => (pp.clone(), None),
        };
        let challenges: Vec<usize> = (0..n).map(|_| r.gen_range(0..scheme.challenges())).collect();
        let (prefix, law) = adversary.attack(scheme, &public, state.as_ref(), &challenges, r)?;
        let prefix_ok = match scheme.kind {
            TokenKind::Token => prefix == public,
            TokenKind::Oss => prefix.len() == scheme.spec.len() - 2 && prefix.prefix(pp.len()) == pp,
        };
        let mut win = 0.0;
        for (sigs, p) in &law {
            if sigs.len() != n {
                return Err(Error::ArityMismatch { expected: n, found: sigs.len() });
            }
            if prefix_ok && challenges.iter().zip(sigs).all(|(&c, &m)| scheme.verify(&prefix, c, m)) {
                win += p;
            }
        }
        Ok(win)
    })
}
