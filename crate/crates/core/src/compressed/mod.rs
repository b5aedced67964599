//! Compressed oracle for product distributions: one `⊥`-augmented register per
//! domain input, rotated by a local compression unitary around each copy.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::oracles::{
    exact_acceptance, oracle_averaged_acceptance, OracleBackend, OracleCircuit, ProductDistribution, QueryCall,
};
use crate::qsim::{c64, check_unitary, CMatrix, RegisterLayout, StateVector, NORM_TOL, ZERO_WEIGHT};

/// `U = |D⟩⟨⊥| + |⊥⟩⟨D| + (I − |⊥⟩⟨⊥| − |D⟩⟨D|)` on `alphabet + 1` levels, with
/// `|D⟩ = Σ_z √D(z)|z⟩` and `⊥` the last level.
pub fn compression_unitary_local(d_x: &[f64]) -> Result<CMatrix> {
    let total: f64 = d_x.iter().sum();
    if (total - 1.0).abs() > NORM_TOL || d_x.iter().any(|p| *p < 0.0) {
        return Err(Error::Unnormalized(total));
    }
    let n = d_x.len();
    let bot = n;
    let mut psi = vec![c64(0.0, 0.0); n + 1];
    for (z, p) in d_x.iter().enumerate() {
        psi[z] = c64(p.sqrt(), 0.0);
    }
    let mut u = CMatrix::identity(n + 1, n + 1);
    u[(bot, bot)] = c64(0.0, 0.0);
    for i in 0..=n {
        for j in 0..=n {
            u[(i, j)] -= psi[i] * psi[j].conj();
        }
    }
    for i in 0..=n {
        u[(i, bot)] += psi[i];
        u[(bot, i)] += psi[i].conj();
    }
    check_unitary(&u)?;
    Ok(u)
}

/// Names and sizes of the bank registers `slot.D0 …` for one slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BotRegisterBank {
    slot: String,
    domain: usize,
    alphabet: usize,
}

impl BotRegisterBank {
    pub fn new(slot: &str, domain: usize, alphabet: usize) -> Self {
        BotRegisterBank { slot: slot.to_string(), domain, alphabet }
    }

    pub fn bot(&self) -> usize {
        self.alphabet
    }

    pub fn register(&self, x: usize) -> String {
        format!("{}.D{x}", self.slot)
    }

    pub fn registers(&self) -> Vec<(String, usize)> {
        (0..self.domain).map(|x| (self.register(x), self.alphabet + 1)).collect()
    }

    /// Digits of the fresh bank, all `⊥`.
    pub fn fresh_digits(&self) -> Vec<usize> {
        vec![self.bot(); self.domain]
    }

    /// Largest number of non-`⊥` entries over basis branches of `state`
    /// carrying more than negligible weight.
    pub fn max_recorded(&self, state: &StateVector) -> Result<usize> {
        let names = self.registers();
        let refs: Vec<&str> = names.iter().map(|(n, _)| n.as_str()).collect();
        let pos = state.layout().positions(&refs)?;
        let mut best = 0;
        for (i, a) in state.amplitudes().iter().enumerate() {
            if a.norm_sqr() > ZERO_WEIGHT {
                let k = pos.iter().filter(|&&p| state.layout().digit(i, p) != self.bot()).count();
                best = best.max(k);
            }
        }
        Ok(best)
    }
}

/// Distribution used for each compression-unitary application.
#[derive(Clone, Debug)]
enum Schedule {
    Fixed,
    /// Applications with index `< crossover` use the primary distributions,
    /// later ones the alternates.
    Hybrid { alt: BTreeMap<String, ProductDistribution>, crossover: usize },
}

/// `CStO_D` backend. Each call costs two compression-unitary applications,
/// counted by [`CompressedBackend::u_applications`].
#[derive(Clone, Debug)]
pub struct CompressedBackend {
    dists: BTreeMap<String, ProductDistribution>,
    schedule: Schedule,
    applied: usize,
}

impl CompressedBackend {
    pub fn new(slots: &[(&str, &ProductDistribution)]) -> Self {
        CompressedBackend {
            dists: slots.iter().map(|(s, d)| (s.to_string(), (*d).clone())).collect(),
            schedule: Schedule::Fixed,
            applied: 0,
        }
    }

    pub fn single(slot: &str, d: &ProductDistribution) -> Self {
        Self::new(&[(slot, d)])
    }

    /// First `crossover` compression-unitary applications use `primary`,
    /// the rest use `alt`. Both must agree in shape slot by slot.
    pub fn hybrid(
        primary: &[(&str, &ProductDistribution)],
        alt: &[(&str, &ProductDistribution)],
        crossover: usize,
    ) -> Result<Self> {
        let mut b = Self::new(primary);
        let alt: BTreeMap<String, ProductDistribution> =
            alt.iter().map(|(s, d)| (s.to_string(), (*d).clone())).collect();
        if alt.len() != b.dists.len() {
            return Err(Error::AlphabetMismatch("hybrid slot sets differ".into()));
        }
        for (s, d) in &b.dists {
            let a = alt.get(s).ok_or_else(|| Error::UnresolvedSlot(s.clone()))?;
            if a.domain() != d.domain() || a.alphabet() != d.alphabet() {
                return Err(Error::AlphabetMismatch(format!("slot `{s}` differs in shape")));
            }
        }
        b.schedule = Schedule::Hybrid { alt, crossover };
        Ok(b)
    }

    pub fn bank(&self, slot: &str) -> Result<BotRegisterBank> {
        let d = self.dists.get(slot).ok_or_else(|| Error::UnresolvedSlot(slot.into()))?;
        Ok(BotRegisterBank::new(slot, d.domain(), d.alphabet()))
    }

    /// Compression-unitary applications performed so far.
    pub fn u_applications(&self) -> usize {
        self.applied
    }

    fn current(&self, slot: &str) -> Result<&ProductDistribution> {
        let d = match &self.schedule {
            Schedule::Hybrid { alt, crossover } if self.applied >= *crossover => alt.get(slot),
            _ => self.dists.get(slot),
        };
        d.ok_or_else(|| Error::UnresolvedSlot(slot.into()))
    }

    fn compress(&mut self, state: &mut StateVector, slot: &str, qpos: usize) -> Result<()> {
        let d = self.current(slot)?.clone();
        let bank = self.bank(slot)?;
        let layout = state.layout().clone();
        for x in 0..d.domain() {
            let u = compression_unitary_local(d.row(x))?;
            let reg = bank.register(x);
            state.apply_in_place(&u, &[reg.as_str()], |base| layout.digit(base, qpos) == x)?;
        }
        self.applied += 1;
        Ok(())
    }
}

/// `|x, y, …, D_x = s, …⟩ ↦ |x, y ⊕ s, …⟩` for `s ≠ ⊥`.
fn copy_out(state: &StateVector, bank: &BotRegisterBank, qpos: usize, rpos: usize) -> Result<StateVector> {
    let layout = state.layout();
    let names = bank.registers();
    let refs: Vec<&str> = names.iter().map(|(n, _)| n.as_str()).collect();
    let dpos = layout.positions(&refs)?;
    let rs = layout.stride(rpos);
    Ok(state.permute_basis(|i| {
        let x = layout.digit(i, qpos);
        let Some(&p) = dpos.get(x) else { return i };
        let s = layout.digit(i, p);
        if s == bank.bot() {
            return i;
        }
        let y = layout.digit(i, rpos);
        i - y * rs + (y ^ s) * rs
    }))
}

impl OracleBackend for CompressedBackend {
    fn internal_registers(&self) -> Vec<(String, usize)> {
        self.dists.keys().flat_map(|s| self.bank(s).map(|b| b.registers()).unwrap_or_default()).collect()
    }

    fn initial_internal(&self, layout: &RegisterLayout) -> Result<StateVector> {
        let digits: Vec<usize> = self
            .dists
            .keys()
            .map(|s| self.bank(s))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .flat_map(|b| b.fresh_digits())
            .collect();
        Ok(StateVector::basis_digits(layout.clone(), &digits))
    }

    fn query(&mut self, mut state: StateVector, call: &QueryCall) -> Result<StateVector> {
        let bank = self.bank(call.slot)?;
        let layout = state.layout().clone();
        let qpos = layout.position(call.qreg)?;
        let rpos = layout.position(call.rreg)?;
        let rd = layout.dims()[rpos];
        if (0..bank.alphabet).any(|s| (0..rd).any(|y| (y ^ s) >= rd)) {
            return Err(Error::AlphabetMismatch(format!(
                "response register `{}` of size {rd} is not closed under XOR with outputs below {}",
                call.rreg, bank.alphabet
            )));
        }
        self.compress(&mut state, call.slot, qpos)?;
        let mut state = copy_out(&state, &bank, qpos, rpos)?;
        self.compress(&mut state, call.slot, qpos)?;
        Ok(state)
    }
}

/// Acceptance of `c` against `CStO_D` on every slot, next to the value averaged
/// over truth tables sampled from `d`.
pub fn csto_equivalence(c: &OracleCircuit, d: &ProductDistribution) -> Result<(f64, f64)> {
    let slots = c.slots();
    let pairs: Vec<(&str, &ProductDistribution)> = slots.iter().map(|s| (s.as_str(), d)).collect();
    let mut b = CompressedBackend::new(&pairs);
    let compressed = exact_acceptance(c, &mut b)?;
    let enumerated = oracle_averaged_acceptance(c, d)?;
    Ok((compressed, enumerated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{execute, random_circuit, RandomCircuitShape};
    use crate::qsim::{rng::seeded, unitarity_defect};
    use proptest::prelude::*;

    fn basis(n: usize, i: usize) -> nalgebra::DVector<num_complex::Complex64> {
        let mut v = nalgebra::DVector::zeros(n);
        v[i] = c64(1.0, 0.0);
        v
    }

    #[test]
    fn maps_bot_to_the_distribution_state() {
        let d = [0.25, 0.75];
        let u = compression_unitary_local(&d).unwrap();
        let out = &u * basis(3, 2);
        assert!((out[0].re - 0.5).abs() < 1e-12);
        assert!((out[1].re - 0.75f64.sqrt()).abs() < 1e-12);
        assert!(out[2].norm() < 1e-12);
        assert!((&u * &u - CMatrix::identity(3, 3)).camax() < 1e-12);
    }

    #[test]
    fn point_mass_is_a_swap() {
        let u = compression_unitary_local(&[0.0, 1.0, 0.0]).unwrap();
        let mut perm = CMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 3), (3, 1), (2, 2)] {
            perm[(i, j)] = c64(1.0, 0.0);
        }
        assert!((u - perm).camax() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized_rows() {
        assert!(matches!(compression_unitary_local(&[0.5, 0.2]), Err(Error::Unnormalized(_))));
    }

    proptest! {
        #[test]
        fn random_rows_give_involutions(raw in prop::collection::vec(0.01f64..1.0, 1..6)) {
            let t: f64 = raw.iter().sum();
            let d: Vec<f64> = raw.iter().map(|p| p / t).collect();
            let u = compression_unitary_local(&d).unwrap();
            prop_assert!(unitarity_defect(&u) < 1e-9);
            let n = d.len() + 1;
            prop_assert!((&u * &u - CMatrix::identity(n, n)).camax() < 1e-9);
        }
    }

    #[test]
    fn fresh_query_entangles_answer_and_record() {
        // one-point domain, 3 outputs: Σ_z √p_z |z⟩_y |z⟩_D after copy, then U
        let d = ProductDistribution::new(3, vec![vec![0.2, 0.3, 0.5]]).unwrap();
        let mut c = OracleCircuit::new([("x", 2), ("y", 4)]).unwrap();
        c.call("O", "x", "y").unwrap();
        let mut b = CompressedBackend::single("O", &d);
        let (s, _) = execute(&c, &mut b, None).unwrap();
        assert_eq!(b.u_applications(), 2);
        // independent matrix evaluation of U · CNOT · U on |y=0⟩|D=⊥⟩
        let u = compression_unitary_local(d.row(0)).unwrap();
        let mut v = vec![c64(0.0, 0.0); 16];
        let after_u = &u * basis(4, 3);
        for dd in 0..4 {
            let y = if dd < 3 { dd } else { 0 };
            v[y * 4 + dd] += after_u[dd];
        }
        let mut w = vec![c64(0.0, 0.0); 16];
        for y in 0..4 {
            for dd in 0..4 {
                for e in 0..4 {
                    w[y * 4 + dd] += u[(dd, e)] * v[y * 4 + e];
                }
            }
        }
        let amps = s.amplitudes();
        for (k, a) in w.iter().enumerate() {
            assert!((amps[k] - a).norm() < 1e-12, "index {k}");
        }
        let p = s.probabilities("y").unwrap();
        for z in 0..3 {
            assert!((p[z] - d.row(0)[z]).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_classical_queries_agree() {
        let d = ProductDistribution::new(3, vec![vec![0.2, 0.3, 0.5], vec![0.6, 0.1, 0.3]]).unwrap();
        let mut c = OracleCircuit::new([("x", 2), ("y1", 4), ("y2", 4)]).unwrap();
        c.unitary("x", &["x"], "X").unwrap();
        c.call("O", "x", "y1").unwrap().call("O", "x", "y2").unwrap();
        let (s, _) = execute(&c, &mut CompressedBackend::single("O", &d), None).unwrap();
        let joint = s.marginal(&["y1", "y2"]).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let expect = if a == b && a < 3 { d.row(1)[a] } else { 0.0 };
                assert!((joint[a * 4 + b] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bank_stays_sparse() {
        let mut rng = seeded(11);
        for q in 0..4 {
            let shape = RandomCircuitShape { domain: 3, alphabet: 2, queries: q };
            let c = random_circuit("O", shape, &mut rng).unwrap();
            let d = ProductDistribution::random(3, 2, &mut rng);
            let mut b = CompressedBackend::single("O", &d);
            let (s, _) = execute(&c, &mut b, None).unwrap();
            assert!(b.bank("O").unwrap().max_recorded(&s).unwrap() <= q);
        }
    }

    #[test]
    fn equivalence_examples() {
        let d = ProductDistribution::new(2, vec![vec![0.3, 0.7]]).unwrap();
        let mut ignore = OracleCircuit::new([("a", 2)]).unwrap();
        ignore.unitary("h", &["a"], "H").unwrap().measure(&["a"]).unwrap();
        let (p, e) = csto_equivalence(&ignore, &d).unwrap();
        assert_eq!(p, e);

        let mut read0 = OracleCircuit::new([("x", 2), ("y", 2)]).unwrap();
        read0.call("O", "x", "y").unwrap().measure(&["y"]).unwrap();
        let (p, e) = csto_equivalence(&read0, &ProductDistribution::uniform(1, 2)).unwrap();
        assert!((p - 0.5).abs() < 1e-12 && (e - 0.5).abs() < 1e-12);
    }

    #[test]
    fn collision_style_circuit_matches_enumeration() {
        // query both points in superposition twice and compare outputs
        let d = ProductDistribution::new(2, vec![vec![0.9, 0.1], vec![0.35, 0.65]]).unwrap();
        let mut c = OracleCircuit::new([("x", 2), ("y", 2), ("z", 2)]).unwrap();
        c.unitary("h", &["x"], "H").unwrap();
        c.call("O", "x", "y").unwrap();
        c.unitary("h2", &["x"], "H").unwrap();
        c.call("O", "x", "z").unwrap();
        c.apply(&["y", "z"], crate::qsim::permutation_matrix(&[0, 1, 3, 2])).unwrap();
        c.measure(&["z"]).unwrap();
        let (p, e) = csto_equivalence(&c, &d).unwrap();
        assert!((p - e).abs() < 1e-9);
    }

    #[test]
    fn hybrid_endpoints_match_plain_backends() {
        let mut rng = seeded(3);
        let d = ProductDistribution::random(2, 2, &mut rng);
        let d2 = ProductDistribution::random(2, 2, &mut rng);
        let c = random_circuit("O", RandomCircuitShape { domain: 2, alphabet: 2, queries: 2 }, &mut rng).unwrap();
        let run = |mut b: CompressedBackend| execute(&c, &mut b, None).unwrap().0;
        let all_d = run(CompressedBackend::single("O", &d));
        let all_d2 = run(CompressedBackend::single("O", &d2));
        let h4 = run(CompressedBackend::hybrid(&[("O", &d)], &[("O", &d2)], 4).unwrap());
        let h0 = run(CompressedBackend::hybrid(&[("O", &d)], &[("O", &d2)], 0).unwrap());
        assert!(h4.distance(&all_d).unwrap() < 1e-12);
        assert!(h0.distance(&all_d2).unwrap() < 1e-12);
    }
}
