//! One-way-to-hiding harness for compression unitaries: hybrid ladders, the
//! random-query extractor and numerical checks of
//! `E[SD(D_x, D'_x)] ≥ Δ²/(16q²)`.
//!
//! `q` counts compression-unitary applications, two per compressed-oracle call.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::compressed::CompressedBackend;
use crate::error::{Error, Result};
use crate::oracles::{execute, Gate, OracleBackend, OracleCircuit, ProductDistribution, TruthTable};
use crate::qsim::rng::split;
use crate::qsim::{statistical_distance, trace_distance, StateVector};

/// Trace distance between the purified final states of `c` under two backends.
pub fn final_state_distance(
    c: &OracleCircuit,
    a: &mut dyn OracleBackend,
    b: &mut dyn OracleBackend,
) -> Result<f64> {
    let (sa, _) = execute(c, a, None)?;
    let (sb, _) = execute(c, b, None)?;
    if sa.layout() != sb.layout() {
        return Err(Error::LayoutMismatch);
    }
    trace_distance(&sa, &sb)
}

/// What the extractor returns: the measured query value and where it was asked.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Extraction {
    pub slot: String,
    pub x: usize,
    /// Zero-based index of the call whose query register was measured.
    pub call: usize,
}

/// Pre-query states of every call of `c`, with the call's slot and query register.
pub struct PreQueryStates {
    calls: Vec<(String, String, StateVector)>,
}

impl PreQueryStates {
    pub fn new<B: OracleBackend>(c: &OracleCircuit, make: impl Fn() -> B) -> Result<Self> {
        let mut calls = Vec::new();
        for g in c.gates() {
            if let Gate::Call { slot, qreg, .. } = g {
                let t = calls.len();
                let mut b = make();
                let (s, _) = execute(c, &mut b, Some(t))?;
                calls.push((slot.clone(), qreg.clone(), s));
            }
        }
        if calls.is_empty() {
            return Err(Error::InvalidArgument("circuit makes no oracle calls".into()));
        }
        Ok(PreQueryStates { calls })
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    /// Samples a call uniformly and measures its query register.
    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<Extraction> {
        let t = rng.gen_range(0..self.calls.len());
        let (slot, qreg, state) = &self.calls[t];
        let (x, _, _) = state.measure_register(qreg, rng)?;
        Ok(Extraction { slot: slot.clone(), x, call: t })
    }

    /// Exact output law of the extractor over `(slot, x)`.
    pub fn distribution(&self) -> Result<BTreeMap<(String, usize), f64>> {
        let w = 1.0 / self.calls.len() as f64;
        let mut out = BTreeMap::new();
        for (slot, qreg, state) in &self.calls {
            for (x, p) in state.probabilities(qreg)?.into_iter().enumerate() {
                if p > 0.0 {
                    *out.entry((slot.clone(), x)).or_insert(0.0) += w * p;
                }
            }
        }
        Ok(out)
    }
}

/// Runs `c` to just before a uniformly chosen call and measures that call's
/// query register.
pub fn extractor_b<B: OracleBackend>(
    c: &OracleCircuit,
    make: impl Fn() -> B,
    rng: &mut dyn RngCore,
) -> Result<Extraction> {
    PreQueryStates::new(c, make)?.sample(rng)
}

/// Final states of the hybrids `H_0 … H_q`: `H_i` answers the first `i`
/// compression-unitary applications from `d` and the rest from `d′`.
pub fn hybrid_ladder(
    c: &OracleCircuit,
    d: &[(&str, &ProductDistribution)],
    d_alt: &[(&str, &ProductDistribution)],
) -> Result<Vec<StateVector>> {
    let q = 2 * c.query_count();
    (0..=q)
        .map(|i| {
            let mut b = CompressedBackend::hybrid(d, d_alt, i)?;
            Ok(execute(c, &mut b, None)?.0)
        })
        .collect()
}

/// Result of [`verify_ow2h`].
#[derive(Clone, Debug, PartialEq)]
pub struct Ow2hReport {
    pub delta: f64,
    pub expected_sd: f64,
    /// Same expectation taken over the exact extractor distribution.
    pub exact_expected_sd: f64,
    pub bound: f64,
    /// Compression-unitary applications.
    pub q: usize,
    pub trials: usize,
    pub seed: u64,
    pub slack: f64,
    pub holds: bool,
}

impl fmt::Display for Ow2hReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "delta={}", self.delta)?;
        writeln!(f, "expected_sd={}", self.expected_sd)?;
        writeln!(f, "exact_expected_sd={}", self.exact_expected_sd)?;
        writeln!(f, "bound={}", self.bound)?;
        writeln!(f, "q={}", self.q)?;
        writeln!(f, "trials={}", self.trials)?;
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "slack={}", self.slack)?;
        write!(f, "holds={}", self.holds)
    }
}

/// Mean and standard error of per-trial values.
fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn row_sd(d: &ProductDistribution, d_alt: &ProductDistribution, x: usize) -> Result<f64> {
    if x >= d.domain() {
        return Ok(0.0);
    }
    statistical_distance(d.row(x), d_alt.row(x))
}

/// Multi-slot version of [`verify_ow2h`]: each slot has its own pair of
/// distributions and extractions are tagged with the slot.
pub fn verify_ow2h_multi(
    c: &OracleCircuit,
    slots: &[(&str, &ProductDistribution, &ProductDistribution)],
    trials: usize,
    seed: u64,
) -> Result<Ow2hReport> {
    let d: Vec<(&str, &ProductDistribution)> = slots.iter().map(|s| (s.0, s.1)).collect();
    let d_alt: Vec<(&str, &ProductDistribution)> = slots.iter().map(|s| (s.0, s.2)).collect();
    let pair: BTreeMap<&str, (&ProductDistribution, &ProductDistribution)> =
        slots.iter().map(|s| (s.0, (s.1, s.2))).collect();
    let sd_of = |slot: &str, x: usize| -> Result<f64> {
        let (a, b) = pair.get(slot).ok_or_else(|| Error::UnresolvedSlot(slot.into()))?;
        row_sd(a, b, x)
    };

    let mut a = CompressedBackend::new(&d);
    let mut b = CompressedBackend::new(&d_alt);
    let delta = final_state_distance(c, &mut a, &mut b)?;
    let q = 2 * c.query_count();
    if q == 0 {
        return Ok(Ow2hReport {
            delta,
            expected_sd: 0.0,
            exact_expected_sd: 0.0,
            bound: 0.0,
            q,
            trials,
            seed,
            slack: 0.0,
            holds: delta <= 1e-12,
        });
    }
    let bound = delta * delta / (16.0 * (q * q) as f64);
    let pre = PreQueryStates::new(c, || CompressedBackend::new(&d))?;
    let mut exact_expected_sd = 0.0;
    for ((slot, x), p) in pre.distribution()? {
        exact_expected_sd += p * sd_of(&slot, x)?;
    }
    let samples: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = split(seed, t as u64);
            let e = pre.sample(&mut rng)?;
            sd_of(&e.slot, e.x)
        })
        .collect();
    let samples: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
    let (expected_sd, se) = mean_and_stderr(&samples);
    let slack = 3.0 * se;
    Ok(Ow2hReport {
        delta,
        expected_sd,
        exact_expected_sd,
        bound,
        q,
        trials,
        seed,
        slack,
        holds: expected_sd >= bound - slack,
    })
}

/// Checks `E_{x←B}[SD(D_x, D′_x)] ≥ Δ²/(16q²)` for every slot of `c` bound to
/// the same pair of distributions.
pub fn verify_ow2h(
    c: &OracleCircuit,
    d: &ProductDistribution,
    d_alt: &ProductDistribution,
    trials: usize,
    seed: u64,
) -> Result<Ow2hReport> {
    if d.domain() != d_alt.domain() || d.alphabet() != d_alt.alphabet() {
        return Err(Error::AlphabetMismatch("distributions differ in shape".into()));
    }
    let names = c.slots();
    let slots: Vec<(&str, &ProductDistribution, &ProductDistribution)> =
        names.iter().map(|s| (s.as_str(), d, d_alt)).collect();
    verify_ow2h_multi(c, &slots, trials, seed)
}

/// Result of [`verify_ow2h_classical`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalOw2hReport {
    pub delta: f64,
    pub hit_prob: f64,
    pub exact_hit_prob: f64,
    pub bound: f64,
    pub q: usize,
    pub trials: usize,
    pub seed: u64,
    pub holds: bool,
}

impl fmt::Display for ClassicalOw2hReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "delta={}", self.delta)?;
        writeln!(f, "hit_prob={}", self.hit_prob)?;
        writeln!(f, "exact_hit_prob={}", self.exact_hit_prob)?;
        writeln!(f, "bound={}", self.bound)?;
        writeln!(f, "q={}", self.q)?;
        writeln!(f, "trials={}", self.trials)?;
        writeln!(f, "seed={}", self.seed)?;
        write!(f, "holds={}", self.holds)
    }
}

/// Point-mass case: `Pr_{x←B}[O(x) ≠ O′(x)] ≥ Δ²/(16q²)`.
pub fn verify_ow2h_classical(
    c: &OracleCircuit,
    o: &TruthTable,
    o_alt: &TruthTable,
    trials: usize,
    seed: u64,
) -> Result<ClassicalOw2hReport> {
    if o.domain() != o_alt.domain() || o.alphabet() != o_alt.alphabet() {
        return Err(Error::AlphabetMismatch("tables differ in shape".into()));
    }
    let r = verify_ow2h(
        c,
        &ProductDistribution::point_masses(o),
        &ProductDistribution::point_masses(o_alt),
        trials,
        seed,
    )?;
    Ok(ClassicalOw2hReport {
        delta: r.delta,
        hit_prob: r.expected_sd,
        exact_hit_prob: r.exact_expected_sd,
        bound: r.bound,
        q: r.q,
        trials,
        seed,
        holds: r.holds,
    })
}
