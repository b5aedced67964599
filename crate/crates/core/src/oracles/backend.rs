use std::collections::BTreeMap;

use rand::RngCore;
use rayon::prelude::*;

use super::{Gate, OracleCircuit, ProductDistribution, TruthTable, ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::qsim::{sample_index, RegisterLayout, StateVector};

/// One oracle call as seen by a backend.
#[derive(Clone, Copy, Debug)]
pub struct QueryCall<'a> {
    pub slot: &'a str,
    pub qreg: &'a str,
    pub rreg: &'a str,
    /// Zero-based position of this call among the circuit's calls.
    pub index: usize,
}

/// Answers oracle calls, possibly using registers of its own that are
/// appended after the circuit's registers.
pub trait OracleBackend {
    fn internal_registers(&self) -> Vec<(String, usize)> {
        Vec::new()
    }

    /// Initial state of the internal registers (all `|0⟩` by default).
    fn initial_internal(&self, layout: &RegisterLayout) -> Result<StateVector> {
        Ok(StateVector::zero(layout.clone()))
    }

    fn query(&mut self, state: StateVector, call: &QueryCall) -> Result<StateVector>;
}

impl<B: OracleBackend + ?Sized> OracleBackend for &mut B {
    fn internal_registers(&self) -> Vec<(String, usize)> {
        (**self).internal_registers()
    }

    fn initial_internal(&self, layout: &RegisterLayout) -> Result<StateVector> {
        (**self).initial_internal(layout)
    }

    fn query(&mut self, state: StateVector, call: &QueryCall) -> Result<StateVector> {
        (**self).query(state, call)
    }
}

/// `|x, y⟩ ↦ |x, y ⊕ F(x)⟩`; inputs outside the table's domain are left alone.
pub fn std_query(state: &StateVector, table: &TruthTable, qreg: &str, rreg: &str) -> Result<StateVector> {
    let layout = state.layout();
    let qp = layout.position(qreg)?;
    let rp = layout.position(rreg)?;
    let qd = layout.dims()[qp];
    let rd = layout.dims()[rp];
    if qd < table.domain() {
        return Err(Error::AlphabetMismatch(format!(
            "query register `{qreg}` has {qd} symbols for a domain of {}",
            table.domain()
        )));
    }
    for &o in table.outputs() {
        if (0..rd).any(|y| (y ^ o) >= rd) {
            return Err(Error::AlphabetMismatch(format!(
                "response register `{rreg}` of size {rd} is not closed under XOR with {o}"
            )));
        }
    }
    let rs = layout.stride(rp);
    Ok(state.permute_basis(|i| {
        let x = layout.digit(i, qp);
        match table.get(x) {
            Some(o) if o != 0 => {
                let y = layout.digit(i, rp);
                i - y * rs + (y ^ o) * rs
            }
            _ => i,
        }
    }))
}

/// Backend answering each slot from a fixed truth table.
#[derive(Clone, Debug, Default)]
pub struct TruthTableBackend {
    tables: BTreeMap<String, TruthTable>,
}

impl TruthTableBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(slot: &str, table: TruthTable) -> Self {
        let mut b = Self::new();
        b.insert(slot, table);
        b
    }

    pub fn insert(&mut self, slot: &str, table: TruthTable) {
        self.tables.insert(slot.to_string(), table);
    }

    pub fn table(&self, slot: &str) -> Option<&TruthTable> {
        self.tables.get(slot)
    }
}

impl OracleBackend for TruthTableBackend {
    fn query(&mut self, state: StateVector, call: &QueryCall) -> Result<StateVector> {
        let t = self.tables.get(call.slot).ok_or_else(|| Error::UnresolvedSlot(call.slot.into()))?;
        std_query(&state, t, call.qreg, call.rreg)
    }
}

/// Runs `c` (from `|0…0⟩` plus the backend's internal state) and stops just
/// before call number `stop_before` when given. Returns the state and the
/// number of calls executed.
pub fn execute(
    c: &OracleCircuit,
    backend: &mut dyn OracleBackend,
    stop_before: Option<usize>,
) -> Result<(StateVector, usize)> {
    let internal = RegisterLayout::new(backend.internal_registers())?;
    let init = StateVector::zero(c.layout()).tensor(&backend.initial_internal(&internal)?)?;
    apply_gates(c, init, backend, stop_before)
}

/// Applies the gates of `c` to an existing state whose layout contains the
/// circuit's registers.
pub fn apply_gates(
    c: &OracleCircuit,
    mut state: StateVector,
    backend: &mut dyn OracleBackend,
    stop_before: Option<usize>,
) -> Result<(StateVector, usize)> {
    let mut calls = 0;
    for g in c.gates() {
        match g {
            Gate::Unitary { targets, matrix, .. } => {
                let t: Vec<&str> = targets.iter().map(String::as_str).collect();
                state = state.apply_operator(&c.matrix(matrix)?, &t)?;
            }
            Gate::Call { slot, qreg, rreg } => {
                if stop_before == Some(calls) {
                    return Ok((state, calls));
                }
                if calls >= c.budget() {
                    return Err(Error::QueryBudgetExceeded { budget: c.budget() });
                }
                let call = QueryCall { slot, qreg, rreg, index: calls };
                state = backend.query(state, &call)?;
                calls += 1;
            }
        }
    }
    Ok((state, calls))
}

/// Sampling switch for [`run_circuit`].
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Estimate the output distribution from this many shots instead of
    /// reading it off the final amplitudes.
    pub shots: Option<usize>,
}

/// Output of [`run_circuit`].
#[derive(Clone, Debug)]
pub struct CircuitRun {
    /// Distribution over joint values of the measured registers
    /// (first measured register most significant).
    pub distribution: Vec<f64>,
    pub final_state: StateVector,
    pub measured_dims: Vec<usize>,
}

impl CircuitRun {
    /// Probability that the first measured register reads 1.
    pub fn acceptance(&self) -> f64 {
        if self.measured_dims.is_empty() {
            return 0.0;
        }
        let rest: usize = self.measured_dims[1..].iter().product();
        self.distribution[rest..2 * rest].iter().sum()
    }
}

pub fn run_circuit(
    c: &OracleCircuit,
    backend: &mut dyn OracleBackend,
    opts: RunOptions,
    rng: &mut dyn RngCore,
) -> Result<CircuitRun> {
    let (state, _) = execute(c, backend, None)?;
    let regs: Vec<&str> = c.measured().iter().map(String::as_str).collect();
    let exact = state.marginal(&regs)?;
    let distribution = match opts.shots {
        None => exact,
        Some(n) => {
            let mut counts = vec![0.0; exact.len()];
            for _ in 0..n {
                counts[sample_index(&exact, rng)] += 1.0;
            }
            counts.into_iter().map(|k| k / n.max(1) as f64).collect()
        }
    };
    let measured_dims = regs.iter().map(|r| state.layout().reg_dim(r)).collect::<Result<_>>()?;
    Ok(CircuitRun { distribution, final_state: state, measured_dims })
}

/// Exact probability that `c` run against `backend` accepts.
pub fn exact_acceptance(c: &OracleCircuit, backend: &mut dyn OracleBackend) -> Result<f64> {
    let (state, _) = execute(c, backend, None)?;
    let regs: Vec<&str> = c.measured().iter().map(String::as_str).collect();
    let dist = state.marginal(&regs)?;
    let dims: Vec<usize> = regs.iter().map(|r| state.layout().reg_dim(r)).collect::<Result<_>>()?;
    Ok(CircuitRun { distribution: dist, final_state: state, measured_dims: dims }.acceptance())
}

/// `Σ_O Pr_D[O] · Pr[c^O accepts]`, enumerating every table of `d` for every slot of `c`.
pub fn oracle_averaged_acceptance(c: &OracleCircuit, d: &ProductDistribution) -> Result<f64> {
    let slots = c.slots();
    let pairs: Vec<(&str, &ProductDistribution)> = slots.iter().map(|s| (s.as_str(), d)).collect();
    oracle_averaged_acceptance_multi(c, &pairs, ENUMERATION_CAP)
}

/// Independent oracle per slot, each drawn from its own distribution.
pub fn oracle_averaged_acceptance_multi(
    c: &OracleCircuit,
    slots: &[(&str, &ProductDistribution)],
    cap: usize,
) -> Result<f64> {
    for s in c.slots() {
        if !slots.iter().any(|(n, _)| *n == s) {
            return Err(Error::UnresolvedSlot(s));
        }
    }
    let size: u128 = slots.iter().map(|(_, d)| d.support_size()).fold(1u128, |a, b| a.saturating_mul(b));
    if size > cap as u128 {
        return Err(Error::FamilyTooLarge { size, cap });
    }
    let families: Vec<Vec<(TruthTable, f64)>> =
        slots.iter().map(|(_, d)| d.enumerate(cap)).collect::<Result<_>>()?;
    let mut combos: Vec<(Vec<usize>, f64)> = vec![(vec![], 1.0)];
    for fam in &families {
        combos = combos
            .into_iter()
            .flat_map(|(idx, p)| {
                fam.iter().enumerate().map(move |(k, (_, q))| {
                    let mut i = idx.clone();
                    i.push(k);
                    (i, p * q)
                })
            })
            .collect();
    }
    let values: Vec<Result<f64>> = combos
        .par_iter()
        .map(|(idx, p)| {
            let mut b = TruthTableBackend::new();
            for (s, (fam, &k)) in slots.iter().zip(families.iter().zip(idx)) {
                b.insert(s.0, fam[k].0.clone());
            }
            Ok(p * exact_acceptance(c, &mut b)?)
        })
        .collect();
    let mut total = 0.0;
    for v in values {
        total += v?;
    }
    Ok(total)
}
