use num_complex::Complex64;
use rand::RngCore;

use super::layout::RegisterLayout;
use super::{check_unitary, sample_index, CMatrix, DensityMatrix, NORM_TOL, ZERO_WEIGHT};
use crate::error::{Error, Result};

/// Dense pure state over a [`RegisterLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    layout: RegisterLayout,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// All registers in `|0⟩`.
    pub fn zero(layout: RegisterLayout) -> Self {
        Self::basis(layout, 0)
    }

    pub fn basis(layout: RegisterLayout, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); layout.dim()];
        amps[index] = Complex64::new(1.0, 0.0);
        StateVector { layout, amps }
    }

    pub fn basis_digits(layout: RegisterLayout, digits: &[usize]) -> Self {
        let idx = layout.index_of(digits);
        Self::basis(layout, idx)
    }

    pub fn from_amplitudes(layout: RegisterLayout, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != layout.dim() {
            return Err(Error::DimensionMismatch { expected: layout.dim(), found: amps.len() });
        }
        let s = StateVector { layout, amps };
        let n = s.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Unnormalized(n));
        }
        Ok(s)
    }

    /// Normalizes `amps`; fails with `ZeroWeight` on a (near) zero vector.
    pub fn normalized(layout: RegisterLayout, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != layout.dim() {
            return Err(Error::DimensionMismatch { expected: layout.dim(), found: amps.len() });
        }
        let mut s = StateVector { layout, amps };
        let w = s.norm_sqr();
        if w < ZERO_WEIGHT {
            return Err(Error::ZeroWeight(w));
        }
        let k = 1.0 / w.sqrt();
        s.amps.iter_mut().for_each(|a| *a *= k);
        Ok(s)
    }

    /// Unnormalized vector, for post-selection intermediates.
    pub(crate) fn raw(layout: RegisterLayout, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(layout.dim(), amps.len());
        StateVector { layout, amps }
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Euclidean distance `‖self − other‖`.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let layout = self.layout.concat(&other.layout)?;
        let mut amps = Vec::with_capacity(layout.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(StateVector { layout, amps })
    }

    pub fn apply_unitary(&self, u: &CMatrix, targets: &[&str]) -> Result<StateVector> {
        check_unitary(u)?;
        self.apply_operator(u, targets)
    }

    /// Applies an arbitrary (not necessarily unitary) operator on `targets`.
    pub fn apply_operator(&self, u: &CMatrix, targets: &[&str]) -> Result<StateVector> {
        let mut out = self.clone();
        out.apply_in_place(u, targets, |_| true)?;
        Ok(out)
    }

    /// Applies `u` on `targets` on the branch where `control` holds `value`.
    pub fn apply_controlled(
        &self,
        control: &str,
        value: usize,
        u: &CMatrix,
        targets: &[&str],
    ) -> Result<StateVector> {
        check_unitary(u)?;
        let cpos = self.layout.position(control)?;
        if targets.contains(&control) {
            return Err(Error::DuplicateRegister(control.to_string()));
        }
        let layout = self.layout.clone();
        let mut out = self.clone();
        out.apply_in_place(u, targets, |base| layout.digit(base, cpos) == value)?;
        Ok(out)
    }

    pub(crate) fn apply_in_place(
        &mut self,
        u: &CMatrix,
        targets: &[&str],
        filter: impl Fn(usize) -> bool,
    ) -> Result<()> {
        let pos = self.layout.positions(targets)?;
        let k = self.layout.sub_dim(&pos);
        if u.nrows() != k || u.ncols() != k {
            return Err(Error::DimensionMismatch { expected: k, found: u.nrows() });
        }
        let offsets = self.layout.target_offsets(&pos);
        let bases = self.layout.complement_bases(&pos);
        let mut buf = vec![Complex64::new(0.0, 0.0); k];
        for base in bases {
            if !filter(base) {
                continue;
            }
            for (j, o) in offsets.iter().enumerate() {
                buf[j] = self.amps[base + o];
            }
            for (i, o) in offsets.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, b) in buf.iter().enumerate() {
                    let m = u[(i, j)];
                    if m.re != 0.0 || m.im != 0.0 {
                        acc += m * b;
                    }
                }
                self.amps[base + o] = acc;
            }
        }
        Ok(())
    }

    /// Applies a basis permutation over the flat index: `|i⟩ ↦ |perm(i)⟩`.
    /// `perm` must be a bijection on `0..dim`.
    pub fn permute_basis(&self, perm: impl Fn(usize) -> usize) -> StateVector {
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            if a.re != 0.0 || a.im != 0.0 {
                amps[perm(i)] += a;
            }
        }
        StateVector { layout: self.layout.clone(), amps }
    }

    /// Born distribution of the joint value of `targets`.
    pub fn marginal(&self, targets: &[&str]) -> Result<Vec<f64>> {
        let pos = self.layout.positions(targets)?;
        let k = self.layout.sub_dim(&pos);
        let mut probs = vec![0.0; k];
        for (i, a) in self.amps.iter().enumerate() {
            let mut v = 0;
            for &p in &pos {
                v = v * self.layout.dims()[p] + self.layout.digit(i, p);
            }
            probs[v] += a.norm_sqr();
        }
        Ok(probs)
    }

    pub fn probabilities(&self, target: &str) -> Result<Vec<f64>> {
        self.marginal(&[target])
    }

    /// Unnormalized projection of `target` onto `value`, with its squared norm.
    pub fn project(&self, target: &str, value: usize) -> Result<(StateVector, f64)> {
        let pos = self.layout.position(target)?;
        let dim = self.layout.dims()[pos];
        if value >= dim {
            return Err(Error::AlphabetMismatch(format!(
                "value {value} outside register `{target}` of size {dim}"
            )));
        }
        let mut amps = self.amps.clone();
        let mut w = 0.0;
        for (i, a) in amps.iter_mut().enumerate() {
            if self.layout.digit(i, pos) == value {
                w += a.norm_sqr();
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        Ok((StateVector { layout: self.layout.clone(), amps }, w))
    }

    pub fn project_normalize(&self, target: &str, value: usize) -> Result<(StateVector, f64)> {
        let (p, w) = self.project(target, value)?;
        if w < ZERO_WEIGHT {
            return Err(Error::ZeroWeight(w));
        }
        let k = 1.0 / w.sqrt();
        let amps = p.amps.into_iter().map(|a| a * k).collect();
        Ok((StateVector { layout: p.layout, amps }, w))
    }

    pub fn measure_register(
        &self,
        target: &str,
        rng: &mut dyn RngCore,
    ) -> Result<(usize, StateVector, f64)> {
        let probs = self.probabilities(target)?;
        let outcome = sample_index(&probs, rng);
        let (post, w) = self.project_normalize(target, outcome)?;
        Ok((outcome, post, w))
    }

    /// Keeps only `keep` (in the given order), tracing out everything else.
    pub fn reduced(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let pos = self.layout.positions(keep)?;
        let sub = self.layout.select(keep)?;
        let koffs = self.layout.target_offsets(&pos);
        let bases = self.layout.complement_bases(&pos);
        let k = koffs.len();
        let mut m = CMatrix::zeros(k, k);
        for base in bases {
            for i in 0..k {
                let a = self.amps[base + koffs[i]];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..k {
                    m[(i, j)] += a * self.amps[base + koffs[j]].conj();
                }
            }
        }
        Ok(DensityMatrix::from_parts(sub, m))
    }

    pub fn to_density(&self) -> DensityMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.amps);
        DensityMatrix::from_parts(self.layout.clone(), &v * v.adjoint())
    }

    /// Reorders registers; `order` must be a permutation of the register names.
    pub fn reorder(&self, order: &[&str]) -> Result<StateVector> {
        let pos = self.layout.positions(order)?;
        if pos.len() != self.layout.len() {
            return Err(Error::LayoutMismatch);
        }
        let layout = self.layout.select(order)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let digits: Vec<usize> = pos.iter().map(|&p| self.layout.digit(i, p)).collect();
            amps[layout.index_of(&digits)] = *a;
        }
        Ok(StateVector { layout, amps })
    }

    /// Drops registers that are in a definite basis state `|value⟩`.
    /// Fails with `AncillaNotRestored` when residual weight elsewhere exceeds `tol`.
    pub fn discard_fixed(&self, regs: &[(&str, usize)], tol: f64) -> Result<StateVector> {
        let names: Vec<&str> = regs.iter().map(|r| r.0).collect();
        let pos = self.layout.positions(&names)?;
        let keep: Vec<&str> = self
            .layout
            .names()
            .iter()
            .map(String::as_str)
            .filter(|n| !names.contains(n))
            .collect();
        let layout = self.layout.select(&keep)?;
        let kpos = self.layout.positions(&keep)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); layout.dim()];
        let mut residual = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            let fixed = pos.iter().zip(regs).all(|(&p, r)| self.layout.digit(i, p) == r.1);
            if fixed {
                let d: Vec<usize> = kpos.iter().map(|&p| self.layout.digit(i, p)).collect();
                amps[layout.index_of(&d)] = *a;
            } else {
                residual += a.norm_sqr();
            }
        }
        if residual > tol {
            return Err(Error::AncillaNotRestored(residual));
        }
        Ok(StateVector { layout, amps })
    }
}
