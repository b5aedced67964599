//! Classical oracles: truth tables, product distributions over them, the XOR
//! query unitary, oracle-aided circuits and brute-force averaging.

mod backend;
mod circuit;
mod random;

use rand::Rng;

pub use backend::{
    apply_gates, exact_acceptance, execute, oracle_averaged_acceptance, oracle_averaged_acceptance_multi, run_circuit,
    std_query, CircuitRun, OracleBackend, QueryCall, RunOptions, TruthTableBackend,
};
pub use circuit::{Gate, OracleCircuit};
pub use random::{random_circuit, RandomCircuitShape};

use crate::error::{Error, Result};
use crate::qsim::{sample_index, NORM_TOL};

/// Default cap on the number of truth tables enumerated by brute force.
pub const ENUMERATION_CAP: usize = 4096;

/// Total function from inputs `0..domain` to outputs `0..alphabet`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TruthTable {
    alphabet: usize,
    outputs: Vec<usize>,
}

impl TruthTable {
    pub fn new(alphabet: usize, outputs: Vec<usize>) -> Result<Self> {
        if let Some(bad) = outputs.iter().find(|o| **o >= alphabet) {
            return Err(Error::AlphabetMismatch(format!(
                "output {bad} outside alphabet of size {alphabet}"
            )));
        }
        Ok(TruthTable { alphabet, outputs })
    }

    pub fn domain(&self) -> usize {
        self.outputs.len()
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn get(&self, x: usize) -> Option<usize> {
        self.outputs.get(x).copied()
    }

    /// Inputs where `self` and `other` disagree.
    pub fn differing_inputs(&self, other: &TruthTable) -> Vec<usize> {
        (0..self.domain().max(other.domain())).filter(|&x| self.get(x) != other.get(x)).collect()
    }
}

/// Independent per-input output distributions `D = ⊗_x D_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductDistribution {
    alphabet: usize,
    rows: Vec<Vec<f64>>,
}

impl ProductDistribution {
    /// Each row must be a normalized distribution over `0..alphabet`.
    pub fn new(alphabet: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        for r in &rows {
            if r.len() != alphabet {
                return Err(Error::AlphabetMismatch(format!(
                    "row has {} entries for alphabet {alphabet}",
                    r.len()
                )));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > NORM_TOL || r.iter().any(|p| *p < 0.0) {
                return Err(Error::Unnormalized(s));
            }
        }
        Ok(ProductDistribution { alphabet, rows })
    }

    pub fn uniform(domain: usize, alphabet: usize) -> Self {
        ProductDistribution { alphabet, rows: vec![vec![1.0 / alphabet as f64; alphabet]; domain] }
    }

    /// Point masses on the entries of `table`.
    pub fn point_masses(table: &TruthTable) -> Self {
        let rows = table
            .outputs
            .iter()
            .map(|&o| {
                let mut r = vec![0.0; table.alphabet];
                r[o] = 1.0;
                r
            })
            .collect();
        ProductDistribution { alphabet: table.alphabet, rows }
    }

    /// Random rows with full support, drawn from a flat Dirichlet-like sampler.
    pub fn random(domain: usize, alphabet: usize, rng: &mut impl Rng) -> Self {
        let rows = (0..domain)
            .map(|_| {
                let raw: Vec<f64> = (0..alphabet).map(|_| rng.gen_range(0.05..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / s).collect()
            })
            .collect();
        ProductDistribution { alphabet, rows }
    }

    pub fn domain(&self) -> usize {
        self.rows.len()
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn probability(&self, table: &TruthTable) -> f64 {
        table.outputs.iter().enumerate().map(|(x, &o)| self.rows[x][o]).product()
    }

    /// Number of tables with nonzero probability.
    pub fn support_size(&self) -> u128 {
        self.rows
            .iter()
            .map(|r| r.iter().filter(|p| **p > 0.0).count() as u128)
            .fold(1u128, |a, b| a.saturating_mul(b))
    }

    /// Every table with nonzero probability, in lexicographic order.
    pub fn enumerate(&self, cap: usize) -> Result<Vec<(TruthTable, f64)>> {
        let size = self.support_size();
        if size > cap as u128 {
            return Err(Error::FamilyTooLarge { size, cap });
        }
        let supports: Vec<Vec<usize>> = self
            .rows
            .iter()
            .map(|r| (0..self.alphabet).filter(|&z| r[z] > 0.0).collect())
            .collect();
        let mut out = vec![(Vec::new(), 1.0)];
        for (x, sup) in supports.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * sup.len());
            for (prefix, p) in &out {
                for &z in sup {
                    let mut t: Vec<usize> = prefix.clone();
                    t.push(z);
                    next.push((t, p * self.rows[x][z]));
                }
            }
            out = next;
        }
        Ok(out
            .into_iter()
            .map(|(o, p)| (TruthTable { alphabet: self.alphabet, outputs: o }, p))
            .collect())
    }

    /// `w·self + (1−w)·other`, row by row. The result is again a product
    /// distribution only when the two differ on at most one row.
    pub fn mix_row(&self, other: &ProductDistribution, x: usize, w: f64) -> Result<Self> {
        if self.alphabet != other.alphabet || self.domain() != other.domain() {
            return Err(Error::AlphabetMismatch("distributions differ in shape".into()));
        }
        let mut rows = self.rows.clone();
        rows[x] = self.rows[x].iter().zip(&other.rows[x]).map(|(a, b)| w * a + (1.0 - w) * b).collect();
        ProductDistribution::new(self.alphabet, rows)
    }
}

/// Draws each row independently from its `D_x`.
pub fn sample_oracle(d: &ProductDistribution, rng: &mut impl Rng) -> TruthTable {
    let outputs = d.rows.iter().map(|r| sample_index(r, rng)).collect();
    TruthTable { alphabet: d.alphabet, outputs }
}

/// Smallest power of two that is at least `n`.
pub fn pow2_at_least(n: usize) -> usize {
    n.max(2).next_power_of_two()
}
