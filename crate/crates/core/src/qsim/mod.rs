//! Dense statevector and density-matrix engine over named qudit registers.

mod density;
mod distance;
pub mod gates;
mod layout;
pub mod rng;
mod state;

use num_complex::Complex64;
use rand::distributions::{Distribution, WeightedIndex};
use rand::RngCore;

pub use density::DensityMatrix;
pub use distance::{
    dist_state, phase_min_distance, statistical_distance, statistical_distance_keyed,
    statistical_distance_padded, symmetrize, trace_distance, StateRef,
};
pub use layout::{RegisterLayout, DEFAULT_DIM_CAP};
pub use state::StateVector;

use crate::error::{Error, Result};

pub type CMatrix = nalgebra::DMatrix<Complex64>;

/// Tolerance for algebraic identities and normalization.
pub const NORM_TOL: f64 = 1e-9;
/// Tolerance for exact circuit round-trips.
pub const EXACT_TOL: f64 = 1e-12;
/// Post-selection weights below this are treated as impossible.
pub const ZERO_WEIGHT: f64 = 1e-12;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Max-entry deviation of `u†u` from the identity.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let n = u.nrows();
    (u.adjoint() * u - CMatrix::identity(n, n)).camax()
}

pub fn check_unitary(u: &CMatrix) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(Error::DimensionMismatch { expected: u.nrows(), found: u.ncols() });
    }
    let d = unitarity_defect(u);
    if d > NORM_TOL {
        return Err(Error::NotUnitary(d));
    }
    Ok(())
}

/// Samples an index with probability proportional to `weights`; zero
/// weights are never drawn.
pub fn sample_index(weights: &[f64], rng: &mut dyn RngCore) -> usize {
    let clean: Vec<f64> = weights.iter().map(|w| if *w > 0.0 { *w } else { 0.0 }).collect();
    match WeightedIndex::new(&clean) {
        Ok(d) => d.sample(rng),
        Err(_) => 0,
    }
}

/// Permutation matrix sending basis `j` to `perm[j]`.
pub fn permutation_matrix(perm: &[usize]) -> CMatrix {
    let n = perm.len();
    let mut m = CMatrix::zeros(n, n);
    for (j, &i) in perm.iter().enumerate() {
        m[(i, j)] = c64(1.0, 0.0);
    }
    m
}

/// Basis permutation on registers of sizes `dims`, given as a map on digit tuples.
pub fn digit_permutation(dims: &[usize], f: impl Fn(&[usize]) -> Vec<usize>) -> Result<CMatrix> {
    let layout = RegisterLayout::with_cap(
        dims.iter().enumerate().map(|(i, &d)| (format!("r{i}"), d)),
        usize::MAX,
    )?;
    let n = layout.dim();
    let mut perm = vec![0; n];
    let mut seen = vec![false; n];
    for (j, p) in perm.iter_mut().enumerate() {
        let out = f(&layout.digits(j));
        if out.len() != dims.len() || out.iter().zip(dims).any(|(v, d)| v >= d) {
            return Err(Error::InvalidArgument("permutation leaves the alphabet".into()));
        }
        *p = layout.index_of(&out);
        if seen[*p] {
            return Err(Error::InvalidArgument("map is not a bijection".into()));
        }
        seen[*p] = true;
    }
    Ok(permutation_matrix(&perm))
}
