use std::collections::BTreeSet;

use super::{pack, transcript_law, unpack, ProtocolSpec, QuantumProver, Sender, Transcript};
use crate::advice_oracle::{AdviceBackend, AdviceSpec, CompRoute};
use crate::error::{Error, Result};
use crate::oracles::{exact_acceptance, oracle_averaged_acceptance, pow2_at_least, Gate, OracleCircuit};
use crate::qsim::{digit_permutation, gates, CMatrix, RegisterLayout, StateVector, NORM_TOL, ZERO_WEIGHT};

/// Advice-oracle view of a three-message (P, V, P) protocol: the honest
/// prover's state after its best first message, and one unitary per
/// challenge that produces the answer when measured.
#[derive(Clone, Debug)]
pub struct Meta3 {
    spec: ProtocolSpec,
    first: usize,
    by_first: Vec<(usize, f64)>,
    sub: RegisterLayout,
    outputs: Vec<usize>,
    advice: AdviceSpec,
}

/// Reductions that talk to the advice oracle through slot `P`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScriptedReduction {
    /// One query on a uniform challenge; accepts iff the answer verifies.
    StraightLine,
    /// `k` queries on the challenges `0, 1, …` (mod the alphabet); accepts
    /// iff every answer verifies.
    Rewind(usize),
    /// Two queries on the same uniform challenge; accepts iff both answers
    /// agree and verify.
    RepeatedQuery,
}

fn schedule_error(spec: &ProtocolSpec) -> Error {
    let s: String = spec.rounds().iter().map(|r| if r.sender == Sender::Prover { 'P' } else { 'V' }).collect();
    Error::ScheduleMismatch(format!("expected P V P, found {s}"))
}

/// Builds the advice view for `prover` on a three-message public-coin protocol.
///
/// `m*` is the smallest first message maximizing the acceptance conditioned
/// on it. The advice state keeps only the registers the answer circuits touch
/// (plus the answer registers); the rest must be in a fixed basis state.
pub fn meta_reduction_3round(spec: &ProtocolSpec, prover: &QuantumProver) -> Result<Meta3> {
    if spec.len() != 3 {
        return Err(Error::WrongRoundCount { expected: 3, found: spec.len() });
    }
    let senders: Vec<Sender> = spec.rounds().iter().map(|r| r.sender).collect();
    if senders != [Sender::Prover, Sender::Verifier, Sender::Prover] {
        return Err(schedule_error(spec));
    }
    if !spec.is_public_coin() {
        return Err(Error::NotPublicCoin);
    }
    let challenges = spec.rounds()[1].alphabet;

    let mut mass = vec![0.0; spec.rounds()[0].alphabet];
    let mut acc = vec![0.0; mass.len()];
    for leaf in transcript_law(spec, prover)? {
        let Some(m) = leaf.transcript.symbol(0).filter(|&m| m < mass.len()) else { continue };
        mass[m] += leaf.prob;
        acc[m] += leaf.prob * leaf.accept;
    }
    let by_first: Vec<(usize, f64)> =
        (0..mass.len()).filter(|&m| mass[m] > ZERO_WEIGHT).map(|m| (m, acc[m] / mass[m])).collect();
    let &(first, _) = by_first
        .iter()
        .fold(None, |b: Option<&(usize, f64)>, x| match b {
            Some(y) if y.1 >= x.1 - 1e-12 => Some(y),
            _ => Some(x),
        })
        .ok_or_else(|| Error::InvalidArgument("the prover never sends a first message".into()))?;

    let opening = Transcript::from_messages(vec![(Sender::Prover, first)]);
    let answer_circuits: Vec<OracleCircuit> = (0..challenges)
        .map(|y| prover.round_circuit(2, &opening.with(Sender::Verifier, y)))
        .collect::<Result<_>>()?;
    let layout = prover.layout();
    let mut touched: BTreeSet<&str> = prover.output_registers(1).iter().map(String::as_str).collect();
    for c in &answer_circuits {
        for g in c.gates() {
            match g {
                Gate::Unitary { targets, .. } => touched.extend(targets.iter().map(String::as_str)),
                Gate::Call { .. } => {
                    return Err(Error::InvalidArgument("answer circuits must not query an oracle".into()));
                }
            }
        }
    }
    let keep: Vec<&str> = layout.names().iter().map(String::as_str).filter(|n| touched.contains(n)).collect();
    let drop: Vec<&str> = layout.names().iter().map(String::as_str).filter(|n| !touched.contains(n)).collect();

    let state = prover.conditional_state(&opening)?;
    let peak = state
        .amplitudes()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|x| x.0)
        .unwrap_or(0);
    let fixed: Vec<(&str, usize)> =
        drop.iter().map(|&n| Ok((n, layout.digit(peak, layout.position(n)?)))).collect::<Result<_>>()?;
    let psi = state.discard_fixed(&fixed, NORM_TOL)?.reorder(&keep)?;
    let sub = psi.layout().clone();

    let unitaries = answer_circuits.iter().map(|c| restricted_unitary(c, &sub)).collect::<Result<Vec<_>>>()?;
    let outputs = prover.output_registers(1).iter().map(|r| sub.position(r)).collect::<Result<_>>()?;
    let advice = AdviceSpec::new(psi.into_amplitudes(), unitaries)?;
    Ok(Meta3 { spec: spec.clone(), first, by_first, sub, outputs, advice })
}

/// Matrix of the unitary part of `c` on the registers of `sub`.
fn restricted_unitary(c: &OracleCircuit, sub: &RegisterLayout) -> Result<CMatrix> {
    let d = sub.dim();
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        let mut s = StateVector::basis(sub.clone(), j);
        for g in c.gates() {
            if let Gate::Unitary { targets, matrix, .. } = g {
                let t: Vec<&str> = targets.iter().map(String::as_str).collect();
                s = s.apply_unitary(&c.matrix(matrix)?, &t)?;
            }
        }
        for (i, a) in s.amplitudes().iter().enumerate() {
            m[(i, j)] = *a;
        }
    }
    Ok(m)
}

impl Meta3 {
    pub fn spec(&self) -> &ProtocolSpec {
        &self.spec
    }

    /// `m*`.
    pub fn first_message(&self) -> usize {
        self.first
    }

    /// `(m1, Pr[accept | m1])` for every reachable first message.
    pub fn acceptance_by_first(&self) -> &[(usize, f64)] {
        &self.by_first
    }

    pub fn advice(&self) -> &AdviceSpec {
        &self.advice
    }

    /// Number of challenges, which is the advice oracle's domain.
    pub fn challenges(&self) -> usize {
        self.advice.domain()
    }

    /// Size of the response register: the advice alphabet rounded up to a power of two.
    pub fn response_dim(&self) -> usize {
        pow2_at_least(self.advice.alphabet())
    }

    /// The answer encoded by advice outcome `z`; `None` past the alphabet.
    pub fn message_of(&self, z: usize) -> Option<usize> {
        if z >= self.advice.alphabet() {
            return None;
        }
        let digits = self.sub.digits(z);
        let dims: Vec<usize> = self.outputs.iter().map(|&p| self.sub.dims()[p]).collect();
        Some(pack(&self.outputs.iter().map(|&p| digits[p]).collect::<Vec<_>>(), &dims))
    }

    /// Whether the verifier accepts `(m*, challenge, message_of(z))`.
    pub fn verifier_accepts(&self, challenge: usize, z: usize) -> Result<bool> {
        let Some(m) = self.message_of(z) else { return Ok(false) };
        let t = Transcript::from_messages(vec![
            (Sender::Prover, self.first),
            (Sender::Verifier, challenge),
            (Sender::Prover, m),
        ]);
        self.spec.accepts(&t)
    }

    /// Acceptance of `reduction` run against the advice oracle holding
    /// `copies` copies of the advice state.
    pub fn simulate(&self, reduction: &OracleCircuit, copies: usize, route: CompRoute) -> Result<f64> {
        if reduction.query_count() > copies {
            return Err(Error::QueryBudgetExceeded { budget: copies });
        }
        let mut b = AdviceBackend::new("P", self.advice.clone(), copies.max(1), route)?;
        exact_acceptance(reduction, &mut b)
    }

    /// Acceptance of `reduction` averaged over classical oracles drawn from
    /// the distribution the advice induces.
    pub fn adversary_acceptance(&self, reduction: &OracleCircuit) -> Result<f64> {
        oracle_averaged_acceptance(reduction, &self.advice.induced()?)
    }
}

/// Builds one of the scripted reductions for `meta`. Registers: `acc` (the
/// verdict, measured), the query register `q`, and one response register
/// `z<j>` per query.
pub fn scripted_reduction(meta: &Meta3, kind: ScriptedReduction) -> Result<OracleCircuit> {
    let a = meta.challenges();
    let r = meta.response_dim();
    let valid = |x: usize, z: usize| meta.verifier_accepts(x, z);
    let queries = match kind {
        ScriptedReduction::StraightLine => 1,
        ScriptedReduction::Rewind(k) => k,
        ScriptedReduction::RepeatedQuery => 2,
    };
    let mut regs: Vec<(String, usize)> = vec![("acc".into(), 2), ("q".into(), a)];
    regs.extend((0..queries).map(|j| (format!("z{j}"), r)));
    let mut c = OracleCircuit::new(regs)?;
    c.set_budget(queries)?;

    // verdict table over (q, z0, …): computed once so the permutation closure stays infallible
    let mut dims = vec![a];
    dims.extend(std::iter::repeat_n(r, queries));
    let size: usize = dims.iter().product();
    let mut ok = vec![false; size];
    for (i, slot) in ok.iter_mut().enumerate() {
        let d = unpack(i, &dims);
        let (x, zs) = (d[0], &d[1..]);
        *slot = match kind {
            ScriptedReduction::StraightLine => valid(x, zs[0])?,
            ScriptedReduction::Rewind(_) => {
                let mut all = true;
                for (j, &z) in zs.iter().enumerate() {
                    all &= valid(j % a, z)?;
                }
                all
            }
            ScriptedReduction::RepeatedQuery => zs[0] == zs[1] && valid(x, zs[0])?,
        };
    }
    let mut targets: Vec<String> = vec!["q".into()];
    targets.extend((0..queries).map(|j| format!("z{j}")));
    targets.push("acc".into());
    let mut pdims = dims.clone();
    pdims.push(2);
    let verdict = digit_permutation(&pdims, |d| {
        let mut out = d.to_vec();
        let n = d.len();
        if ok[pack(&d[..n - 1], &dims)] {
            out[n - 1] ^= 1;
        }
        out
    })?;
    let shift = |by: usize| digit_permutation(&[a], |d| vec![(d[0] + by) % a]);

    match kind {
        ScriptedReduction::StraightLine | ScriptedReduction::RepeatedQuery => {
            c.apply(&["q"], gates::fourier(a))?;
            for j in 0..queries {
                c.call("P", "q", &format!("z{j}"))?;
            }
        }
        ScriptedReduction::Rewind(k) => {
            for j in 0..k {
                c.apply(&["q"], shift(j % a)?)?;
                c.call("P", "q", &format!("z{j}"))?;
                c.apply(&["q"], shift((a - j % a) % a)?)?;
            }
        }
    }
    let t: Vec<&str> = targets.iter().map(String::as_str).collect();
    c.apply(&t, verdict)?;
    c.measure(&["acc"])?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use crate::poq::{acceptance, toy_clawfree_3msg, toy_clawfree_poq, ClassicalModel, Round, RoundCircuit, Verifier};
    use std::sync::Arc;

    #[test]
    fn clawfree_advice_has_four_levels() {
        let (spec, prover) = toy_clawfree_3msg(1).unwrap();
        let m = meta_reduction_3round(&spec, &prover).unwrap();
        assert_eq!(m.first_message(), 0);
        assert_eq!(m.advice().alphabet(), 4);
        assert_eq!(m.challenges(), 2);
        assert_eq!(m.response_dim(), 4);
        assert_eq!(m.acceptance_by_first().len(), 2);
        let amps = m.advice().psi();
        assert_eq!(amps.iter().filter(|a| a.norm_sqr() > 1e-9).count(), 2);
    }

    #[test]
    fn straight_line_matches_adversary_and_honest() {
        let (spec, prover) = toy_clawfree_3msg(1).unwrap();
        let m = meta_reduction_3round(&spec, &prover).unwrap();
        let c = scripted_reduction(&m, ScriptedReduction::StraightLine).unwrap();
        let honest = m.acceptance_by_first()[0].1;
        let adv = m.adversary_acceptance(&c).unwrap();
        for route in [CompRoute::Explicit, CompRoute::Reflection] {
            let sim = m.simulate(&c, 1, route).unwrap();
            assert!((sim - adv).abs() < 1e-9, "{sim} {adv}");
        }
        assert!((adv - honest).abs() < 1e-9);
        assert!((acceptance(&spec, &prover).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rewinding_needs_a_copy_per_query() {
        let (spec, prover) = toy_clawfree_3msg(1).unwrap();
        let m = meta_reduction_3round(&spec, &prover).unwrap();
        let c = scripted_reduction(&m, ScriptedReduction::Rewind(2)).unwrap();
        assert!(matches!(m.simulate(&c, 1, CompRoute::Explicit), Err(Error::QueryBudgetExceeded { budget: 1 })));
        let sim = m.simulate(&c, 2, CompRoute::Explicit).unwrap();
        let adv = m.adversary_acceptance(&c).unwrap();
        assert!((sim - adv).abs() < 1e-9, "{sim} {adv}");
    }

    #[test]
    fn repeated_query_is_consistent() {
        let (spec, prover) = toy_clawfree_3msg(1).unwrap();
        let m = meta_reduction_3round(&spec, &prover).unwrap();
        let c = scripted_reduction(&m, ScriptedReduction::RepeatedQuery).unwrap();
        let sim = m.simulate(&c, 2, CompRoute::Explicit).unwrap();
        let adv = m.adversary_acceptance(&c).unwrap();
        assert!((sim - adv).abs() < 1e-9);
        assert!((sim - m.acceptance_by_first()[0].1).abs() < 1e-9);
    }

    #[test]
    fn zero_query_reduction_is_unchanged() {
        let (spec, prover) = toy_clawfree_3msg(1).unwrap();
        let m = meta_reduction_3round(&spec, &prover).unwrap();
        let mut c = OracleCircuit::new([("acc", 2)]).unwrap();
        c.apply(&["acc"], gates::h()).unwrap().measure(&["acc"]).unwrap();
        let sim = m.simulate(&c, 1, CompRoute::Explicit).unwrap();
        assert!((sim - 0.5).abs() < 1e-12);
        assert!((m.adversary_acceptance(&c).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_other_schedules() {
        let (spec, prover) = toy_clawfree_poq(1).unwrap();
        assert!(matches!(meta_reduction_3round(&spec, &prover), Err(Error::WrongRoundCount { .. })));
    }

    /// First message `m ∈ {0, 1, 2}` with weights `1/3` each; afterwards the
    /// prover answers `1` with probability depending on `m`.
    fn skewed() -> (ProtocolSpec, QuantumProver) {
        let v = Verifier::PublicCoin { predicate: Arc::new(|t: &Transcript| t.symbol(2) == Some(1)) };
        let rounds = vec![Round::prover(3), Round::verifier(2), Round::prover(2)];
        let spec = ProtocolSpec::new("skewed", rounds, v, ClassicalModel::Transparent, 0.5, 0.5).unwrap();
        let circuit: RoundCircuit = Arc::new(|i, t: &Transcript| {
            let mut c = OracleCircuit::new([("m", 3), ("a", 2)])?;
            if i == 0 {
                c.apply(&["m"], gates::fourier(3))?;
                c.measure(&["m"])?;
            } else {
                // rotation angle grows with m, capped so m = 1 and m = 2 tie
                let theta = [0.3, 1.2, 1.2][t.symbol(0).unwrap_or(0)];
                let (s, co) = (f64::sin(theta), f64::cos(theta));
                let r = CMatrix::from_row_slice(
                    2,
                    2,
                    &[Complex64::new(co, 0.0), Complex64::new(-s, 0.0), Complex64::new(s, 0.0), Complex64::new(co, 0.0)],
                );
                c.apply(&["a"], r)?;
                c.measure(&["a"])?;
            }
            Ok(c)
        });
        let p = QuantumProver::new(
            vec![("m".into(), 3), ("a".into(), 2)],
            vec![vec!["m".into()], vec!["a".into()]],
            circuit,
        )
        .unwrap();
        (spec, p)
    }

    #[test]
    fn best_first_message_breaks_ties_low() {
        let (spec, prover) = skewed();
        let m = meta_reduction_3round(&spec, &prover).unwrap();
        assert_eq!(m.first_message(), 1);
        let accs: Vec<f64> = m.acceptance_by_first().iter().map(|x| x.1).collect();
        assert!((accs[0] - 0.3f64.sin().powi(2)).abs() < 1e-12);
        assert!((accs[1] - accs[2]).abs() < 1e-12);
        assert_eq!(m.advice().alphabet(), 2);
        let c = scripted_reduction(&m, ScriptedReduction::StraightLine).unwrap();
        let sim = m.simulate(&c, 1, CompRoute::Explicit).unwrap();
        assert!((sim - 1.2f64.sin().powi(2)).abs() < 1e-9, "{sim}");
    }
}
