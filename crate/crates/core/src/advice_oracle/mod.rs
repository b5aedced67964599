//! Compressed oracle with advice: the oracle's outputs are sampled by
//! measuring `U_x|ψ⟩`, and the simulation holds a sorted pair database plus
//! `q` advice slots that start as copies of `|ψ⟩`.
//!
//! Registers (for slot `O`): `O.db` indexes every sorted database with at
//! most `capacity` pairs; `O.adv0 … O.adv{q−1}` hold `|ψ⟩` or `⊥` (last level).
//! `|S_{a,b}⟩` puts `⊥` in the first `a` slots.

mod db;
mod reflection;

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;

pub use db::DbTable;
pub use reflection::{exact_reflection, ExactReflection, ReflectionOracle};

use crate::error::{Error, Result};
use crate::oracles::{exact_acceptance, oracle_averaged_acceptance, OracleBackend, OracleCircuit, ProductDistribution, QueryCall};
use crate::qsim::gates::random_unitary;
use crate::qsim::{c64, check_unitary, CMatrix, RegisterLayout, StateVector, NORM_TOL, ZERO_WEIGHT};

/// Advice state `|ψ⟩` over `d` levels and one `d × d` unitary per input.
#[derive(Clone, Debug, PartialEq)]
pub struct AdviceSpec {
    psi: Vec<Complex64>,
    unitaries: Vec<CMatrix>,
}

impl AdviceSpec {
    pub fn new(psi: Vec<Complex64>, unitaries: Vec<CMatrix>) -> Result<Self> {
        let n: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Unnormalized(n));
        }
        let d = psi.len();
        if d == 0 {
            return Err(Error::InvalidArgument("empty advice state".into()));
        }
        for u in &unitaries {
            if u.nrows() != d {
                return Err(Error::DimensionMismatch { expected: d, found: u.nrows() });
            }
            check_unitary(u)?;
        }
        Ok(AdviceSpec { psi, unitaries })
    }

    /// Random `|ψ⟩` and Haar-random `U_x`.
    pub fn random(domain: usize, d: usize, rng: &mut impl Rng) -> Self {
        let psi = random_unitary(d, rng).column(0).iter().copied().collect();
        let unitaries = (0..domain).map(|_| random_unitary(d, rng)).collect();
        AdviceSpec { psi, unitaries }
    }

    pub fn domain(&self) -> usize {
        self.unitaries.len()
    }

    /// Number of levels of `|ψ⟩`, which is also the output alphabet.
    pub fn alphabet(&self) -> usize {
        self.psi.len()
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn unitary(&self, x: usize) -> &CMatrix {
        &self.unitaries[x]
    }

    /// `D_x(z) = |⟨z|U_x|ψ⟩|²`.
    pub fn induced(&self) -> Result<ProductDistribution> {
        let psi = nalgebra::DVector::from_column_slice(&self.psi);
        let rows = self.unitaries.iter().map(|u| (u * &psi).iter().map(|a| a.norm_sqr()).collect()).collect();
        ProductDistribution::new(self.alphabet(), rows)
    }
}

/// Which input a controlled operation acts on.
#[derive(Clone, Copy, Debug)]
pub enum Control<'a> {
    Fixed(usize),
    /// The value of this register (inputs outside the domain are left alone).
    Register(&'a str),
}

/// Sparse vector over the local `(db, adv…)` index.
type Sparse = Vec<(usize, Complex64)>;

/// The advice-oracle state machine for one slot.
#[derive(Clone, Debug)]
pub struct AdviceOracle {
    slot: String,
    spec: AdviceSpec,
    capacity: usize,
    dbs: DbTable,
    /// `(d+1)^capacity`, the size of the advice block.
    adv_dim: usize,
    /// Per input: the `(u, w)` pairs exchanged by `Comp_x`.
    pairs: Vec<Vec<(Sparse, Sparse)>>,
    /// Per input: matrix of `Ũ_x` on the database register.
    tilde: Vec<CMatrix>,
}

impl AdviceOracle {
    pub fn new(slot: &str, spec: AdviceSpec, capacity: usize) -> Result<Self> {
        let capacity = capacity.max(1);
        let d = spec.alphabet();
        let dbs = DbTable::new(spec.domain(), d, capacity);
        let adv_dim = (d + 1).checked_pow(capacity as u32).ok_or(Error::LayoutTooLarge {
            dim: usize::MAX,
            cap: crate::qsim::DEFAULT_DIM_CAP,
        })?;
        let mut o = AdviceOracle { slot: slot.to_string(), spec, capacity, dbs, adv_dim, pairs: vec![], tilde: vec![] };
        o.pairs = (0..o.spec.domain()).map(|x| o.build_pairs(x)).collect();
        o.tilde = (0..o.spec.domain()).map(|x| o.build_tilde(x)).collect();
        Ok(o)
    }

    pub fn spec(&self) -> &AdviceSpec {
        &self.spec
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dbs(&self) -> &DbTable {
        &self.dbs
    }

    pub fn db_register(&self) -> String {
        format!("{}.db", self.slot)
    }

    pub fn adv_register(&self, j: usize) -> String {
        format!("{}.adv{j}", self.slot)
    }

    pub fn registers(&self) -> Vec<(String, usize)> {
        let mut r = vec![(self.db_register(), self.dbs.len())];
        r.extend((0..self.capacity).map(|j| (self.adv_register(j), self.bot() + 1)));
        r
    }

    fn names(&self) -> Vec<String> {
        self.registers().into_iter().map(|r| r.0).collect()
    }

    pub fn bot(&self) -> usize {
        self.spec.alphabet()
    }

    /// Local index of `(db, adv digits)`.
    fn local(&self, db: usize, adv: &[usize]) -> usize {
        db * self.adv_dim + adv.iter().fold(0, |acc, &v| acc * (self.bot() + 1) + v)
    }

    /// `|S_{a, capacity−a}⟩` as a sparse vector over the advice block.
    pub fn s_state(&self, a: usize) -> Vec<(Vec<usize>, Complex64)> {
        let d = self.bot();
        let b = self.capacity - a;
        let mut out = vec![(vec![d; a], c64(1.0, 0.0))];
        for _ in 0..b {
            out = out
                .into_iter()
                .flat_map(|(digits, amp)| {
                    self.spec.psi.iter().enumerate().filter(|(_, p)| p.norm_sqr() > 0.0).map(move |(z, p)| {
                        let mut v = digits.clone();
                        v.push(z);
                        (v, amp * p)
                    })
                })
                .collect();
        }
        out
    }

    fn build_pairs(&self, x: usize) -> Vec<(Sparse, Sparse)> {
        let mut out = Vec::new();
        let s: Vec<_> = (0..=self.capacity).map(|a| self.s_state(a)).collect();
        for db in 0..self.dbs.len() {
            if self.dbs.get(db, x).is_some() || self.dbs.size(db) >= self.capacity {
                continue;
            }
            for a in 0..self.capacity {
                let u: Sparse = s[a].iter().map(|(v, amp)| (self.local(db, v), *amp)).collect();
                let mut w: Sparse = Vec::new();
                for (z, alpha) in self.spec.psi.iter().enumerate() {
                    if alpha.norm_sqr() == 0.0 {
                        continue;
                    }
                    let ins = self.dbs.insert(db, x, z).expect("capacity checked above");
                    w.extend(s[a + 1].iter().map(|(v, amp)| (self.local(ins, v), alpha * amp)));
                }
                out.push((u, w));
            }
        }
        out
    }

    fn build_tilde(&self, x: usize) -> CMatrix {
        let n = self.dbs.len();
        let u = self.spec.unitary(x);
        let mut m = CMatrix::zeros(n, n);
        for db in 0..n {
            match self.dbs.remove(db, x) {
                None => m[(db, db)] = c64(1.0, 0.0),
                Some((rest, y)) => {
                    for z in 0..self.bot() {
                        let to = self.dbs.insert(rest, x, z).expect("same size as before");
                        m[(to, db)] = u[(z, y)];
                    }
                }
            }
        }
        m
    }

    /// Fresh internal state `|{}⟩ ⊗ |S_{0,q}⟩`.
    pub fn fresh_state(&self) -> Result<StateVector> {
        let layout = RegisterLayout::new(self.registers())?;
        let mut amps = vec![c64(0.0, 0.0); layout.dim()];
        for (v, amp) in self.s_state(0) {
            amps[self.local(self.dbs.empty(), &v)] = amp;
        }
        StateVector::from_amplitudes(layout, amps)
    }

    /// `|D⟩ ⊗ |S_{a, q−a}⟩` as a state of the internal registers.
    pub fn basis_state(&self, db: usize, a: usize) -> Result<StateVector> {
        let layout = RegisterLayout::new(self.registers())?;
        let mut amps = vec![c64(0.0, 0.0); layout.dim()];
        for (v, amp) in self.s_state(a) {
            amps[self.local(db, &v)] = amp;
        }
        StateVector::from_amplitudes(layout, amps)
    }

    fn selector<'a>(
        &self,
        layout: &'a RegisterLayout,
        control: Control<'_>,
    ) -> Result<Box<dyn Fn(usize) -> Option<usize> + 'a>> {
        let n = self.spec.domain();
        Ok(match control {
            Control::Fixed(x) => {
                if x >= n {
                    return Err(Error::InvalidArgument(format!("input {x} outside domain {n}")));
                }
                Box::new(move |_| Some(x))
            }
            Control::Register(r) => {
                let p = layout.position(r)?;
                Box::new(move |i| Some(layout.digit(i, p)).filter(|&x| x < n))
            }
        })
    }

    fn block(&self, layout: &RegisterLayout) -> Result<(Vec<usize>, Vec<usize>)> {
        let names = self.names();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let pos = layout.positions(&refs)?;
        Ok((layout.target_offsets(&pos), layout.complement_bases(&pos)))
    }

    /// `Comp_x` from its definition: swaps `|D⟩|S_{a,b}⟩` (with `D(x)=⊥`) and
    /// `Σ_z α_z|D∪(x,z)⟩|S_{a+1,b−1}⟩`, identity on everything orthogonal.
    pub fn comp(&self, state: &StateVector, control: Control<'_>) -> Result<StateVector> {
        let layout = state.layout();
        let sel = self.selector(layout, control)?;
        let (offsets, bases) = self.block(layout)?;
        let amps = state.amplitudes();
        let mut out = state.clone();
        let o = out.amplitudes_mut();
        let all_bot = vec![self.bot(); self.capacity];
        let mut exhausted = 0.0;
        for base in bases {
            let Some(x) = sel(base) else { continue };
            for db in 0..self.dbs.len() {
                if self.dbs.get(db, x).is_none() {
                    exhausted += amps[base + offsets[self.local(db, &all_bot)]].norm_sqr();
                }
            }
            for (u, w) in &self.pairs[x] {
                let cu: Complex64 = u.iter().map(|(l, a)| a.conj() * amps[base + offsets[*l]]).sum();
                let cw: Complex64 = w.iter().map(|(l, a)| a.conj() * amps[base + offsets[*l]]).sum();
                if cu.norm_sqr() == 0.0 && cw.norm_sqr() == 0.0 {
                    continue;
                }
                for (l, a) in u {
                    o[base + offsets[*l]] += (cw - cu) * a;
                }
                for (l, a) in w {
                    o[base + offsets[*l]] += (cu - cw) * a;
                }
            }
        }
        if exhausted > ZERO_WEIGHT {
            return Err(Error::AdviceExhausted);
        }
        Ok(out)
    }

    /// `Ũ_x`, or its adjoint: rotates the stored value of row `x` by `U_x`.
    pub fn tilde_u(&self, state: &StateVector, control: Control<'_>, adjoint: bool) -> Result<StateVector> {
        let layout = state.layout().clone();
        let sel = self.selector(&layout, control)?;
        let db = self.db_register();
        let mut out = state.clone();
        for x in 0..self.spec.domain() {
            let m = if adjoint { self.tilde[x].adjoint() } else { self.tilde[x].clone() };
            out.apply_in_place(&m, &[db.as_str()], |base| sel(base) == Some(x))?;
        }
        Ok(out)
    }

    /// `|x, y⟩|D⟩ ↦ |x, y ⊕ D(x)⟩|D⟩`.
    pub fn std_o(&self, state: &StateVector, qreg: &str, rreg: &str) -> Result<StateVector> {
        let layout = state.layout();
        let sel = self.selector(layout, Control::Register(qreg))?;
        let rp = layout.position(rreg)?;
        let rd = layout.dims()[rp];
        if (0..self.bot()).any(|s| (0..rd).any(|y| (y ^ s) >= rd)) {
            return Err(Error::AlphabetMismatch(format!(
                "response register `{rreg}` of size {rd} is not closed under XOR with outputs below {}",
                self.bot()
            )));
        }
        let dp = layout.position(&self.db_register())?;
        let rs = layout.stride(rp);
        Ok(state.permute_basis(|i| {
            let Some(x) = sel(i) else { return i };
            match self.dbs.get(layout.digit(i, dp), x) {
                Some(v) if v != 0 => {
                    let y = layout.digit(i, rp);
                    i - y * rs + (y ^ v) * rs
                }
                _ => i,
            }
        }))
    }

    /// Weight of `state` outside `span{|D⟩ ⊗ |S_{|D|, q−|D|}⟩}` (tensored with anything else).
    pub fn manifold_residual(&self, state: &StateVector) -> Result<f64> {
        let (offsets, bases) = self.block(state.layout())?;
        let amps = state.amplitudes();
        let s: Vec<_> = (0..=self.capacity).map(|a| self.s_state(a)).collect();
        let mut residual = 0.0;
        for base in bases {
            for db in 0..self.dbs.len() {
                let row = |v: &[usize]| amps[base + offsets[self.local(db, v)]];
                let total: f64 = (0..self.adv_dim).map(|k| amps[base + offsets[db * self.adv_dim + k]].norm_sqr()).sum();
                let a = self.dbs.size(db);
                let proj = if a <= self.capacity {
                    s[a].iter().map(|(v, amp)| amp.conj() * row(v)).sum::<Complex64>().norm_sqr()
                } else {
                    0.0
                };
                residual += total - proj;
            }
        }
        Ok(residual.max(0.0))
    }

    /// Largest number of `⊥` advice slots over basis branches with weight.
    pub fn max_consumed(&self, state: &StateVector) -> Result<usize> {
        let names = self.names();
        let refs: Vec<&str> = names[1..].iter().map(String::as_str).collect();
        let pos = state.layout().positions(&refs)?;
        let mut best = 0;
        for (i, a) in state.amplitudes().iter().enumerate() {
            if a.norm_sqr() > ZERO_WEIGHT {
                let k = pos.iter().filter(|&&p| state.layout().digit(i, p) == self.bot()).count();
                best = best.max(k);
            }
        }
        Ok(best)
    }

    /// One `AdvO` query: `Comp, Ũ, StdO, Ũ†, Comp†` controlled on `qreg`.
    /// With a reflection oracle, `Comp` is built from reflections about `|ψ⟩`.
    pub fn query(
        &self,
        state: &StateVector,
        qreg: &str,
        rreg: &str,
        mut refl: Option<&mut dyn ReflectionOracle>,
    ) -> Result<StateVector> {
        let ctl = Control::Register(qreg);
        let mut comp = |s: &StateVector| match refl.as_deref_mut() {
            Some(r) => self.comp_via_reflection(s, ctl, r),
            None => self.comp(s, ctl),
        };
        let s = comp(state)?;
        let s = self.tilde_u(&s, ctl, false)?;
        let s = self.std_o(&s, qreg, rreg)?;
        let s = self.tilde_u(&s, ctl, true)?;
        let s = comp(&s)?;
        if cfg!(debug_assertions) {
            let r = self.manifold_residual(&s)?;
            if r > NORM_TOL {
                return Err(Error::ManifoldViolation(r));
            }
        }
        Ok(s)
    }
}

/// How [`AdviceBackend`] implements `Comp`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompRoute {
    Explicit,
    Reflection,
}

/// `AdvO` as an oracle backend for one slot.
#[derive(Clone, Debug)]
pub struct AdviceBackend {
    oracle: AdviceOracle,
    route: CompRoute,
    reflection: ExactReflection,
    comps: usize,
}

impl AdviceBackend {
    pub fn new(slot: &str, spec: AdviceSpec, capacity: usize, route: CompRoute) -> Result<Self> {
        let reflection = ExactReflection::new(spec.psi())?;
        Ok(AdviceBackend { oracle: AdviceOracle::new(slot, spec, capacity)?, route, reflection, comps: 0 })
    }

    pub fn oracle(&self) -> &AdviceOracle {
        &self.oracle
    }

    /// Reflection calls made so far (reflection route only).
    pub fn reflection_calls(&self) -> usize {
        self.reflection.calls()
    }

    /// `Comp` applications so far, two per query.
    pub fn comp_applications(&self) -> usize {
        self.comps
    }
}

impl OracleBackend for AdviceBackend {
    fn internal_registers(&self) -> Vec<(String, usize)> {
        self.oracle.registers()
    }

    fn initial_internal(&self, _layout: &RegisterLayout) -> Result<StateVector> {
        self.oracle.fresh_state()
    }

    fn query(&mut self, state: StateVector, call: &QueryCall) -> Result<StateVector> {
        if call.slot != self.oracle.slot {
            return Err(Error::UnresolvedSlot(call.slot.into()));
        }
        self.comps += 2;
        match self.route {
            CompRoute::Explicit => self.oracle.query(&state, call.qreg, call.rreg, None),
            CompRoute::Reflection => self.oracle.query(&state, call.qreg, call.rreg, Some(&mut self.reflection)),
        }
    }
}

/// Acceptance of `c` against `AdvO` next to the value averaged over tables
/// drawn from the induced distribution.
pub fn advice_equivalence(c: &OracleCircuit, spec: &AdviceSpec, route: CompRoute) -> Result<(f64, f64)> {
    let slots = c.slots();
    if slots.len() > 1 {
        return Err(Error::InvalidArgument("advice oracle answers a single slot".into()));
    }
    let slot = slots.first().cloned().unwrap_or_else(|| "O".to_string());
    let mut b = AdviceBackend::new(&slot, spec.clone(), c.query_count(), route)?;
    let p = exact_acceptance(c, &mut b)?;
    let e = oracle_averaged_acceptance(c, &spec.induced()?)?;
    Ok((p, e))
}

/// Joint distribution of the response registers after classical queries,
/// keyed by the response values; used by tests and the CLI.
pub fn response_distribution(state: &StateVector, regs: &[&str]) -> Result<BTreeMap<Vec<usize>, f64>> {
    let m = state.marginal(regs)?;
    let dims: Vec<usize> = regs.iter().map(|r| state.layout().reg_dim(r)).collect::<Result<_>>()?;
    let sub = RegisterLayout::with_cap(dims.iter().enumerate().map(|(i, d)| (format!("r{i}"), *d)), usize::MAX)?;
    Ok(m.into_iter().enumerate().filter(|(_, p)| *p > ZERO_WEIGHT).map(|(i, p)| (sub.digits(i), p)).collect())
}

#[cfg(test)]
mod tests;
