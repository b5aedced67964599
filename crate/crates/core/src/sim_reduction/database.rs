use std::collections::BTreeMap;

use itertools::Itertools;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::poq::Transcript;
use crate::qsim::{sample_index, CMatrix, DensityMatrix, RegisterLayout, StateVector, ZERO_WEIGHT};
use crate::transforms::{copy_name, copy_registers};

/// An `n`-part state held as an ensemble of pure states, each over the
/// cloner's registers (parts `c<i>.*` plus any workspace), with a used flag
/// per part.
#[derive(Clone, Debug)]
pub struct StoredState {
    ensemble: Vec<(f64, StateVector)>,
    used: Vec<bool>,
}

impl StoredState {
    pub fn ensemble(&self) -> &[(f64, StateVector)] {
        &self.ensemble
    }

    pub fn used(&self) -> &[bool] {
        &self.used
    }

    pub fn parts(&self) -> usize {
        self.used.len()
    }

    pub fn unused(&self) -> usize {
        self.used.iter().filter(|u| !**u).count()
    }

    /// Density matrix of the stored ensemble with workspace traced out.
    pub fn density(&self, part_layout: &RegisterLayout) -> Result<DensityMatrix> {
        let keep: Vec<String> = (0..self.parts()).flat_map(|i| copy_registers(part_layout, i)).collect();
        let keep: Vec<&str> = keep.iter().map(String::as_str).collect();
        let parts: Vec<(f64, DensityMatrix)> =
            self.ensemble.iter().map(|(w, s)| Ok((*w, s.reduced(&keep)?))).collect::<Result<_>>()?;
        DensityMatrix::mixture(&parts)
    }
}

/// Relabels parts so that new part `i` is old part `perm[i]`.
pub fn permute_parts(state: &StateVector, part_layout: &RegisterLayout, perm: &[usize]) -> Result<StateVector> {
    let mut rename = BTreeMap::new();
    for (i, &p) in perm.iter().enumerate() {
        for r in part_layout.names() {
            rename.insert(copy_name(i, r), copy_name(p, r));
        }
    }
    let order: Vec<String> =
        state.layout().names().iter().map(|n| rename.get(n).cloned().unwrap_or_else(|| n.clone())).collect();
    let order: Vec<&str> = order.iter().map(String::as_str).collect();
    let moved = state.reorder(&order)?;
    StateVector::from_amplitudes(state.layout().clone(), moved.into_amplitudes())
}

/// Uniform mixture of all part relabellings of `state`.
pub fn symmetrize(state: &StateVector, part_layout: &RegisterLayout, parts: usize) -> Result<Vec<(f64, StateVector)>> {
    let perms: Vec<Vec<usize>> = (0..parts).permutations(parts).collect();
    let w = 1.0 / perms.len() as f64;
    perms.iter().map(|p| Ok((w, permute_parts(state, part_layout, p)?))).collect()
}

/// States keyed by classical transcripts; each stored state hands out its
/// parts one at a time, and a part once measured is never touched again.
#[derive(Clone, Debug)]
pub struct CloneDatabase {
    part_layout: RegisterLayout,
    parts: usize,
    entries: BTreeMap<Transcript, Vec<StoredState>>,
    measured: usize,
}

impl CloneDatabase {
    pub fn new(part_layout: RegisterLayout, parts: usize) -> Result<Self> {
        if parts == 0 {
            return Err(Error::InvalidArgument("a stored state needs at least one part".into()));
        }
        Ok(CloneDatabase { part_layout, parts, entries: BTreeMap::new(), measured: 0 })
    }

    pub fn parts(&self) -> usize {
        self.parts
    }

    pub fn part_layout(&self) -> &RegisterLayout {
        &self.part_layout
    }

    /// Stores an `n`-part state under `key`, optionally symmetrized over part
    /// order; all parts start unused.
    pub fn insert(&mut self, key: Transcript, state: &StateVector, symmetric: bool) -> Result<()> {
        for i in 0..self.parts {
            for (r, d) in self.part_layout.registers() {
                if state.layout().reg_dim(&copy_name(i, r))? != d {
                    return Err(Error::LayoutMismatch);
                }
            }
        }
        let ensemble = if symmetric { symmetrize(state, &self.part_layout, self.parts)? } else { vec![(1.0, state.clone())] };
        self.entries.entry(key).or_default().push(StoredState { ensemble, used: vec![false; self.parts] });
        Ok(())
    }

    pub fn get(&self, key: &Transcript) -> Option<&[StoredState]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn keys(&self) -> impl Iterator<Item = &Transcript> {
        self.entries.keys()
    }

    pub fn unused(&self, key: &Transcript) -> usize {
        self.get(key).map_or(0, |v| v.iter().map(StoredState::unused).sum())
    }

    /// Parts measured so far, over all keys.
    pub fn measured(&self) -> usize {
        self.measured
    }

    /// Location `(entry, part)` of the next unused part under `key`.
    pub fn next_unused(&self, key: &Transcript) -> Result<(usize, usize)> {
        let entries = self.entries.get(key).ok_or_else(|| Error::UnknownKey(key.symbols()))?;
        entries
            .iter()
            .enumerate()
            .find_map(|(e, s)| s.used.iter().position(|u| !u).map(|p| (e, p)))
            .ok_or_else(|| Error::DatabaseExhausted(key.symbols()))
    }

    /// Applies `u` to the next unused part under `key` and measures the part's
    /// registers `outputs`: returns each outcome with its probability and the
    /// database after it, with that part marked used.
    pub fn consume_law(&self, key: &Transcript, u: &CMatrix, outputs: &[String]) -> Result<Vec<(usize, f64, CloneDatabase)>> {
        let (e, part) = self.next_unused(key)?;
        let stored = &self.entries[key][e];
        if stored.used[part] {
            return Err(Error::InvalidArgument(format!("part {part} under {:?} measured twice", key.symbols())));
        }
        let targets = copy_registers(&self.part_layout, part);
        let targets: Vec<&str> = targets.iter().map(String::as_str).collect();
        let outs: Vec<String> = outputs.iter().map(|r| copy_name(part, r)).collect();
        let outs_ref: Vec<&str> = outs.iter().map(String::as_str).collect();
        let dims: Vec<usize> = outputs.iter().map(|r| self.part_layout.reg_dim(r)).collect::<Result<_>>()?;
        let evolved: Vec<(f64, StateVector, Vec<f64>)> = stored
            .ensemble
            .iter()
            .map(|(w, s)| {
                let t = s.apply_unitary(u, &targets)?;
                let law = t.marginal(&outs_ref)?;
                Ok((*w, t, law))
            })
            .collect::<Result<_>>()?;
        let size: usize = dims.iter().product();
        let mut out = vec![];
        for m in 0..size {
            let p: f64 = evolved.iter().map(|(w, _, law)| w * law[m]).sum();
            if p <= ZERO_WEIGHT {
                continue;
            }
            let digits = crate::poq::unpack(m, &dims);
            let mut ensemble = vec![];
            for (w, t, law) in &evolved {
                if w * law[m] <= ZERO_WEIGHT * p {
                    continue;
                }
                let mut s = t.clone();
                for (r, d) in outs.iter().zip(&digits) {
                    s = s.project(r, *d)?.0;
                }
                ensemble.push((w * law[m] / p, StateVector::normalized(s.layout().clone(), s.into_amplitudes())?));
            }
            let mut next = self.clone();
            let slot = &mut next.entries.get_mut(key).expect("key present")[e];
            slot.ensemble = ensemble;
            slot.used[part] = true;
            next.measured += 1;
            out.push((m, p, next));
        }
        Ok(out)
    }

    /// Samples one outcome of [`consume_law`](Self::consume_law) and keeps its database.
    pub fn consume(&mut self, key: &Transcript, u: &CMatrix, outputs: &[String], rng: &mut dyn RngCore) -> Result<usize> {
        let mut law = self.consume_law(key, u, outputs)?;
        let probs: Vec<f64> = law.iter().map(|b| b.1).collect();
        let (m, _, db) = law.swap_remove(sample_index(&probs, rng));
        *self = db;
        Ok(m)
    }
}
