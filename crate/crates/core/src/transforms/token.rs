use rand::{Rng, RngCore};

use super::{output_projector, round_unitary};
use crate::error::{Error, Result};
use crate::poq::{prefix_law, ProtocolSpec, QuantumProver, Responder, Sender, Transcript};
use crate::qsim::{sample_index, CMatrix, DensityMatrix, StateVector, ZERO_WEIGHT};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    /// `pp = τ‖r‖m` comes out of Samp together with the state.
    Token,
    /// `pp` is the first verifier message; Samp adds `s = m`.
    Oss,
}

/// Signature tokens read off a public-coin protocol: the state is the honest
/// prover's state just before the last verifier challenge, signing answers a
/// challenge `r'` and verification runs the original verifier on `pp‖r'‖sig`.
#[derive(Clone, Debug)]
pub struct WeakTokenScheme {
    pub spec: ProtocolSpec,
    pub prover: QuantumProver,
    pub kind: TokenKind,
    /// Inherited correctness.
    pub c: f64,
    setup: Vec<(Transcript, f64)>,
    prefix: Vec<(Transcript, f64)>,
}

/// One-shot signatures from a four-message protocol: the token machinery with
/// `Setup` = first verifier message.
pub type WeakOSS = WeakTokenScheme;

fn law_of(spec: &ProtocolSpec, prover: &QuantumProver, len: usize) -> Result<Vec<(Transcript, f64)>> {
    Ok(prefix_law(spec, prover, len)?.into_iter().filter(|(_, p)| *p > ZERO_WEIGHT).collect())
}

fn check_tail(spec: &ProtocolSpec) -> Result<()> {
    if !spec.is_public_coin() {
        return Err(Error::NotPublicCoin);
    }
    let l = spec.len();
    if l < 2 {
        return Err(Error::WrongRoundCount { expected: 2, found: l });
    }
    if spec.rounds()[l - 2].sender != Sender::Verifier || spec.rounds()[l - 1].sender != Sender::Prover {
        return Err(Error::ScheduleMismatch("the protocol must end with a challenge and an answer".into()));
    }
    Ok(())
}

/// Token scheme from a public-coin protocol with at least four messages.
pub fn token_from_poq(spec: &ProtocolSpec, prover: &QuantumProver) -> Result<WeakTokenScheme> {
    check_tail(spec)?;
    if spec.len() < 4 {
        return Err(Error::WrongRoundCount { expected: 4, found: spec.len() });
    }
    let prefix = law_of(spec, prover, spec.len() - 2)?;
    Ok(WeakTokenScheme {
        spec: spec.clone(),
        prover: prover.clone(),
        kind: TokenKind::Token,
        c: spec.completeness(),
        setup: vec![(Transcript::new(), 1.0)],
        prefix,
    })
}

fn check_four(spec: &ProtocolSpec) -> Result<()> {
    check_tail(spec)?;
    if spec.len() != 4 {
        return Err(Error::WrongRoundCount { expected: 4, found: spec.len() });
    }
    if spec.rounds()[0].sender != Sender::Verifier {
        return Err(Error::ScheduleMismatch("the first message must come from the verifier".into()));
    }
    Ok(())
}

/// One-shot signatures from a four-message public-coin protocol.
pub fn oss_from_4round(spec: &ProtocolSpec, prover: &QuantumProver) -> Result<WeakOSS> {
    check_four(spec)?;
    Ok(WeakTokenScheme {
        spec: spec.clone(),
        prover: prover.clone(),
        kind: TokenKind::Oss,
        c: spec.completeness(),
        setup: law_of(spec, prover, 1)?,
        prefix: law_of(spec, prover, 2)?,
    })
}

impl WeakTokenScheme {
    /// Number of challenge values.
    pub fn challenges(&self) -> usize {
        self.spec.rounds()[self.spec.len() - 2].alphabet
    }

    pub fn signatures(&self) -> usize {
        self.spec.rounds()[self.spec.len() - 1].alphabet
    }

    pub fn setup(&self, rng: &mut dyn RngCore) -> Transcript {
        let w: Vec<f64> = self.setup.iter().map(|x| x.1).collect();
        self.setup[sample_index(&w, rng)].0.clone()
    }

    /// Honest law of the signing prefix extending `pp`, normalized.
    pub fn samp_law(&self, pp: &Transcript) -> Vec<(Transcript, f64)> {
        let sel: Vec<_> =
            self.prefix.iter().filter(|(t, _)| t.prefix(pp.len()) == *pp).cloned().collect();
        let z: f64 = sel.iter().map(|x| x.1).sum();
        sel.into_iter().map(|(t, p)| (t, p / z)).collect()
    }

    /// Samples the signing prefix and the honest state it leaves.
    pub fn samp(&self, pp: &Transcript, rng: &mut dyn RngCore) -> Result<(Transcript, StateVector)> {
        let law = self.samp_law(pp);
        if law.is_empty() {
            return Err(Error::InconsistentTranscript(pp.len()));
        }
        let w: Vec<f64> = law.iter().map(|x| x.1).collect();
        let t = law[sample_index(&w, rng)].0.clone();
        let psi = self.prover.conditional_state(&t)?;
        Ok((t, psi))
    }

    /// Law of the signature on challenge `r`, with the post-measurement state.
    pub fn sign_law(&self, prefix: &Transcript, state: &StateVector, r: usize) -> Result<Vec<(usize, f64, StateVector)>> {
        let t = prefix.with(Sender::Verifier, r);
        Ok(self
            .prover
            .branches(&t, Some(state))?
            .into_iter()
            .filter_map(|b| b.state.map(|s| (b.message, b.prob, s)))
            .collect())
    }

    pub fn sign(
        &self,
        prefix: &Transcript,
        state: &StateVector,
        r: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(usize, StateVector)> {
        let mut law = self.sign_law(prefix, state, r)?;
        let w: Vec<f64> = law.iter().map(|x| x.1).collect();
        let (m, _, s) = law.swap_remove(sample_index(&w, rng));
        Ok((m, s))
    }

    pub fn verify(&self, prefix: &Transcript, r: usize, sig: usize) -> bool {
        sig < self.signatures() && self.spec.accepts(&prefix.with(Sender::Verifier, r).with(Sender::Prover, sig)).unwrap_or(false)
    }

    /// Exact correctness: honest prefix, uniform challenge, honest signature.
    pub fn correctness(&self) -> Result<f64> {
        let rs = self.challenges();
        let mut total = 0.0;
        for (t, p) in &self.prefix {
            let psi = self.prover.conditional_state(t)?;
            for r in 0..rs {
                for (m, q, _) in self.sign_law(t, &psi, r)? {
                    if self.verify(t, r, m) {
                        total += p * q / rs as f64;
                    }
                }
            }
        }
        Ok(total)
    }

    /// Exact probability that signing two independent challenges succeeds
    /// when the second signature is computed from the state the first
    /// signature left behind.
    pub fn sign_twice_rate(&self) -> Result<f64> {
        let rs = self.challenges() as f64;
        let mut total = 0.0;
        for (t, p) in &self.prefix {
            let psi = self.prover.conditional_state(t)?;
            for r1 in 0..self.challenges() {
                for (m1, q1, post) in self.sign_law(t, &psi, r1)? {
                    if !self.verify(t, r1, m1) {
                        continue;
                    }
                    for r2 in 0..self.challenges() {
                        for (m2, q2, _) in self.sign_law(t, &post, r2)? {
                            if self.verify(t, r2, m2) {
                                total += p * q1 * q2 / (rs * rs);
                            }
                        }
                    }
                }
            }
        }
        Ok(total)
    }

    /// Acceptance of a uniformly random signature.
    pub fn garbage_acceptance(&self) -> f64 {
        let (rs, ss) = (self.challenges(), self.signatures());
        self.prefix
            .iter()
            .map(|(t, p)| {
                let hits = (0..rs).flat_map(|r| (0..ss).map(move |m| (r, m))).filter(|&(r, m)| self.verify(t, r, m)).count();
                p * hits as f64 / (rs * ss) as f64
            })
            .sum()
    }

    /// Best acceptance of a signature fixed before the challenge is seen.
    pub fn best_fixed_signature(&self) -> f64 {
        let (rs, ss) = (self.challenges(), self.signatures());
        self.prefix
            .iter()
            .map(|(t, p)| {
                let best = (0..ss).map(|m| (0..rs).filter(|&r| self.verify(t, r, m)).count()).max().unwrap_or(0);
                p * best as f64 / rs as f64
            })
            .sum()
    }
}

/// Lightning from a four-message public-coin protocol: `pp` is the first
/// challenge, Samp runs the honest prover on it and verification runs the last
/// two messages with the supplied state in place of the prover's.
#[derive(Clone, Debug)]
pub struct WeakLightning {
    pub spec: ProtocolSpec,
    pub prover: QuantumProver,
    pub c: f64,
}

pub fn lightning_from_4round(spec: &ProtocolSpec, prover: &QuantumProver) -> Result<WeakLightning> {
    check_four(spec)?;
    Ok(WeakLightning { spec: spec.clone(), prover: prover.clone(), c: spec.completeness() })
}

impl WeakLightning {
    pub fn setup(&self, rng: &mut dyn RngCore) -> usize {
        rng.gen_range(0..self.spec.rounds()[0].alphabet)
    }

    fn head(pp: usize, s: usize) -> Transcript {
        Transcript::from_messages(vec![(Sender::Verifier, pp), (Sender::Prover, s)])
    }

    /// Honest law of `(s, |ψ_s⟩)` given `pp`.
    pub fn samp_law(&self, pp: usize) -> Result<Vec<(usize, f64, StateVector)>> {
        let t = Transcript::from_messages(vec![(Sender::Verifier, pp)]);
        Ok(self
            .prover
            .branches(&t, Some(self.prover.initial()))?
            .into_iter()
            .filter_map(|b| b.state.map(|s| (b.message, b.prob, s)))
            .collect())
    }

    pub fn samp(&self, pp: usize, rng: &mut dyn RngCore) -> Result<(usize, StateVector)> {
        let mut law = self.samp_law(pp)?;
        let w: Vec<f64> = law.iter().map(|x| x.1).collect();
        let (s, _, psi) = law.swap_remove(sample_index(&w, rng));
        Ok((s, psi))
    }

    fn challenge_count(&self) -> usize {
        self.spec.rounds()[2].alphabet
    }

    /// `(U_r, Σ_{m' accepted} P_{m'})` for every challenge `r`.
    fn branches(&self, pp: usize, s: usize) -> Result<Vec<(CMatrix, Vec<(bool, CMatrix)>)>> {
        let head = Self::head(pp, s);
        let answers = self.spec.rounds()[3].alphabet;
        (0..self.challenge_count())
            .map(|r| {
                let t = head.with(Sender::Verifier, r);
                let u = round_unitary(&self.prover, &t)?;
                let ps = (0..answers)
                    .map(|m| {
                        let ok = self.spec.accepts(&t.with(Sender::Prover, m)).unwrap_or(false);
                        Ok((ok, output_projector(&self.prover, 1, m)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((u, ps))
            })
            .collect()
    }

    /// Accept effect of the verifier on the prover's registers.
    pub fn effect(&self, pp: usize, s: usize) -> Result<CMatrix> {
        let d = self.prover.layout().dim();
        let rs = self.challenge_count() as f64;
        let mut e = CMatrix::zeros(d, d);
        for (u, ps) in self.branches(pp, s)? {
            let acc = ps.iter().filter(|p| p.0).fold(CMatrix::zeros(d, d), |a, p| a + &p.1);
            e += u.adjoint() * acc * &u / num_complex::Complex64::new(rs, 0.0);
        }
        Ok(e)
    }

    pub fn verify(&self, pp: usize, s: usize, rho: &DensityMatrix) -> Result<f64> {
        if rho.layout() != self.prover.layout() {
            return Err(Error::LayoutMismatch);
        }
        Ok((self.effect(pp, s)? * rho.matrix()).trace().re.clamp(0.0, 1.0))
    }

    pub fn verify_state(&self, pp: usize, s: usize, psi: &StateVector) -> Result<f64> {
        self.verify(pp, s, &psi.to_density())
    }

    /// Joint law `[b1][b2]` of two sequential verifications of one copy of
    /// `|ψ⟩`, the second acting on the state the first measurement left.
    pub fn verify_twice(&self, pp: usize, s: usize, psi: &StateVector) -> Result<[[f64; 2]; 2]> {
        let e = self.effect(pp, s)?;
        let rs = self.challenge_count() as f64;
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let mut out = [[0.0; 2]; 2];
        for (u, ps) in self.branches(pp, s)? {
            let w = &u * &v;
            for (ok, p) in ps {
                let k = &p * &w;
                let norm = k.norm_squared() / rs;
                if norm <= 0.0 {
                    continue;
                }
                let again = (k.adjoint() * &e * &k)[(0, 0)].re / rs;
                let b = usize::from(ok);
                out[b][1] += again;
                out[b][0] += norm - again;
            }
        }
        Ok(out)
    }

    /// Exact correctness over honest `pp` and `s`.
    pub fn correctness(&self) -> Result<f64> {
        let pps = self.spec.rounds()[0].alphabet;
        let mut total = 0.0;
        for pp in 0..pps {
            for (s, p, psi) in self.samp_law(pp)? {
                total += p * self.verify_state(pp, s, &psi)? / pps as f64;
            }
        }
        Ok(total)
    }

    /// Acceptance of the maximally mixed state.
    pub fn mixed_acceptance(&self, pp: usize, s: usize) -> Result<f64> {
        let e = self.effect(pp, s)?;
        Ok(e.trace().re / e.nrows() as f64)
    }

    /// Best acceptance over all states: the top eigenvalue of the effect.
    pub fn max_acceptance(&self, pp: usize, s: usize) -> Result<f64> {
        let e = self.effect(pp, s)?;
        Ok(e.symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poq::{acceptance, toy_clawfree_poq, toy_owf_poq};
    use crate::qsim::rng::seeded;

    #[test]
    fn token_correctness_is_inherited() {
        let (spec, prover) = toy_clawfree_poq(1).unwrap();
        let tok = token_from_poq(&spec, &prover).unwrap();
        let c = tok.correctness().unwrap();
        assert!(c >= spec.completeness() - 1e-9);
        assert!((c - acceptance(&spec, &prover).unwrap()).abs() < 1e-12);
        let (pp, psi) = tok.samp(&Transcript::new(), &mut seeded(1)).unwrap();
        assert_eq!(pp.len(), 2);
        let (sig, _) = tok.sign(&pp, &psi, 1, &mut seeded(2)).unwrap();
        assert!(tok.verify(&pp, 1, sig));
    }

    #[test]
    fn second_signature_from_a_used_state_fails_sometimes() {
        let (spec, prover) = toy_clawfree_poq(1).unwrap();
        let tok = token_from_poq(&spec, &prover).unwrap();
        let twice = tok.sign_twice_rate().unwrap();
        assert!(twice < tok.correctness().unwrap() - 1e-6, "{twice}");
        assert!(twice >= 0.0);
    }

    #[test]
    fn garbage_signatures_are_bounded() {
        let (spec, prover) = toy_clawfree_poq(1).unwrap();
        let tok = token_from_poq(&spec, &prover).unwrap();
        let g = tok.garbage_acceptance();
        assert!(g <= tok.best_fixed_signature() + 1e-12);
        assert!(tok.best_fixed_signature() < 1.0);
    }

    #[test]
    fn oss_setup_is_the_first_challenge() {
        let (spec, prover) = toy_clawfree_poq(2).unwrap();
        let oss = oss_from_4round(&spec, &prover).unwrap();
        assert_eq!(oss.kind, TokenKind::Oss);
        let pp = oss.setup(&mut seeded(3));
        assert_eq!(pp.len(), 1);
        let (t, _) = oss.samp(&pp, &mut seeded(4)).unwrap();
        assert_eq!(t.prefix(1), pp);
        assert!((oss.correctness().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let (spec, prover) = toy_owf_poq(1).unwrap();
        assert!(token_from_poq(&spec, &prover).is_err());
        assert!(matches!(lightning_from_4round(&spec, &prover), Err(Error::WrongRoundCount { .. })));
    }

    #[test]
    fn honest_banknote_passes() {
        let (spec, prover) = toy_clawfree_poq(1).unwrap();
        let l = lightning_from_4round(&spec, &prover).unwrap();
        assert!(l.correctness().unwrap() >= l.c - 1e-9);
        let (s, psi) = l.samp(0, &mut seeded(5)).unwrap();
        assert!((l.verify_state(0, s, &psi).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn verifying_twice_reports_both_outcomes() {
        let (spec, prover) = toy_clawfree_poq(1).unwrap();
        let l = lightning_from_4round(&spec, &prover).unwrap();
        let (s, psi) = l.samp(0, &mut seeded(6)).unwrap();
        let j = l.verify_twice(0, s, &psi).unwrap();
        let total: f64 = j.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!((j[1][0] + j[1][1] - 1.0).abs() < 1e-9);
        assert!(j[1][1] < 1.0 - 1e-6, "{j:?}");
    }

    #[test]
    fn mixed_state_is_bounded_by_the_top_eigenvalue() {
        let (spec, prover) = toy_clawfree_poq(1).unwrap();
        let l = lightning_from_4round(&spec, &prover).unwrap();
        for (s, _, _) in l.samp_law(0).unwrap() {
            let mixed = l.mixed_acceptance(0, s).unwrap();
            let top = l.max_acceptance(0, s).unwrap();
            assert!(mixed <= top + 1e-12 && top <= 1.0 + 1e-9);
            assert!(mixed < 1.0);
        }
    }
}
