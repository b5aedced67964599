use num_complex::Complex64;
use rand::RngCore;

use super::layout::RegisterLayout;
use super::{check_unitary, sample_index, CMatrix, NORM_TOL, ZERO_WEIGHT};
use crate::error::{Error, Result};

/// Mixed state over a [`RegisterLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    layout: RegisterLayout,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(layout: RegisterLayout, matrix: CMatrix) -> Result<Self> {
        let d = layout.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.nrows() });
        }
        let herm = (&matrix - matrix.adjoint()).camax();
        if herm > NORM_TOL {
            return Err(Error::InvalidDensity(format!("not Hermitian ({herm:.3e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let eig = matrix.clone().symmetric_eigenvalues();
        if let Some(min) = eig.iter().copied().reduce(f64::min) {
            if min < -NORM_TOL {
                return Err(Error::InvalidDensity(format!("negative eigenvalue {min:.3e}")));
            }
        }
        Ok(DensityMatrix { layout, matrix })
    }

    pub(crate) fn from_parts(layout: RegisterLayout, matrix: CMatrix) -> Self {
        DensityMatrix { layout, matrix }
    }

    pub fn maximally_mixed(layout: RegisterLayout) -> Self {
        let d = layout.dim();
        let m = CMatrix::identity(d, d).map(|x| x / d as f64);
        DensityMatrix { layout, matrix: m }
    }

    pub fn basis(layout: RegisterLayout, index: usize) -> Self {
        let d = layout.dim();
        let mut m = CMatrix::zeros(d, d);
        m[(index, index)] = Complex64::new(1.0, 0.0);
        DensityMatrix { layout, matrix: m }
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(DensityMatrix { layout, matrix: self.matrix.kronecker(&other.matrix) })
    }

    /// Mixture `Σ w_i ρ_i`; weights must sum to one.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<DensityMatrix> {
        let first = parts.first().ok_or(Error::Unnormalized(0.0))?;
        let mut m = CMatrix::zeros(first.1.matrix.nrows(), first.1.matrix.ncols());
        let mut total = 0.0;
        for (w, r) in parts {
            if r.layout != first.1.layout {
                return Err(Error::LayoutMismatch);
            }
            m += r.matrix.map(|x| x * *w);
            total += w;
        }
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::Unnormalized(total));
        }
        Ok(DensityMatrix { layout: first.1.layout.clone(), matrix: m })
    }

    pub fn apply_unitary(&self, u: &CMatrix, targets: &[&str]) -> Result<DensityMatrix> {
        check_unitary(u)?;
        self.conjugate(u, targets)
    }

    /// `ρ ↦ M ρ M†` for an arbitrary operator `M` on `targets`.
    pub fn conjugate(&self, u: &CMatrix, targets: &[&str]) -> Result<DensityMatrix> {
        let pos = self.layout.positions(targets)?;
        let k = self.layout.sub_dim(&pos);
        if u.nrows() != k || u.ncols() != k {
            return Err(Error::DimensionMismatch { expected: k, found: u.nrows() });
        }
        let offsets = self.layout.target_offsets(&pos);
        let bases = self.layout.complement_bases(&pos);
        let d = self.layout.dim();
        let mut m = self.matrix.clone();
        let mut buf = vec![Complex64::new(0.0, 0.0); k];
        // left multiply: columns
        for c in 0..d {
            for &base in &bases {
                for (j, o) in offsets.iter().enumerate() {
                    buf[j] = m[(base + o, c)];
                }
                for (i, o) in offsets.iter().enumerate() {
                    m[(base + o, c)] = (0..k).map(|j| u[(i, j)] * buf[j]).sum();
                }
            }
        }
        // right multiply by u†: rows
        for r in 0..d {
            for &base in &bases {
                for (j, o) in offsets.iter().enumerate() {
                    buf[j] = m[(r, base + o)];
                }
                for (i, o) in offsets.iter().enumerate() {
                    m[(r, base + o)] = (0..k).map(|j| u[(i, j)].conj() * buf[j]).sum();
                }
            }
        }
        Ok(DensityMatrix { layout: self.layout.clone(), matrix: m })
    }

    pub fn marginal(&self, targets: &[&str]) -> Result<Vec<f64>> {
        let pos = self.layout.positions(targets)?;
        let k = self.layout.sub_dim(&pos);
        let mut probs = vec![0.0; k];
        for i in 0..self.layout.dim() {
            let mut v = 0;
            for &p in &pos {
                v = v * self.layout.dims()[p] + self.layout.digit(i, p);
            }
            probs[v] += self.matrix[(i, i)].re;
        }
        Ok(probs)
    }

    pub fn probabilities(&self, target: &str) -> Result<Vec<f64>> {
        self.marginal(&[target])
    }

    pub fn project_normalize(&self, target: &str, value: usize) -> Result<(DensityMatrix, f64)> {
        let pos = self.layout.position(target)?;
        let d = self.layout.dim();
        let keep: Vec<bool> = (0..d).map(|i| self.layout.digit(i, pos) == value).collect();
        let mut m = self.matrix.clone();
        let mut w = 0.0;
        for i in 0..d {
            if keep[i] {
                w += m[(i, i)].re;
            }
        }
        if w < ZERO_WEIGHT {
            return Err(Error::ZeroWeight(w));
        }
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = if keep[i] && keep[j] { m[(i, j)] / w } else { Complex64::new(0.0, 0.0) };
            }
        }
        Ok((DensityMatrix { layout: self.layout.clone(), matrix: m }, w))
    }

    pub fn measure_register(
        &self,
        target: &str,
        rng: &mut dyn RngCore,
    ) -> Result<(usize, DensityMatrix, f64)> {
        let probs = self.probabilities(target)?;
        let outcome = sample_index(&probs, rng);
        let (post, w) = self.project_normalize(target, outcome)?;
        Ok((outcome, post, w))
    }

    /// Partial trace keeping `keep` in the given order.
    pub fn reduced(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let pos = self.layout.positions(keep)?;
        let sub = self.layout.select(keep)?;
        let koffs = self.layout.target_offsets(&pos);
        let bases = self.layout.complement_bases(&pos);
        let k = koffs.len();
        let mut m = CMatrix::zeros(k, k);
        for &base in &bases {
            for i in 0..k {
                for j in 0..k {
                    m[(i, j)] += self.matrix[(base + koffs[i], base + koffs[j])];
                }
            }
        }
        Ok(DensityMatrix { layout: sub, matrix: m })
    }

    /// Applies a bijection of flat basis indices: `|i⟩ ↦ |perm(i)⟩` on both sides.
    pub fn permute_basis(&self, perm: impl Fn(usize) -> usize) -> DensityMatrix {
        let d = self.layout.dim();
        let map: Vec<usize> = (0..d).map(&perm).collect();
        let mut m = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(map[i], map[j])] = self.matrix[(i, j)];
            }
        }
        DensityMatrix { layout: self.layout.clone(), matrix: m }
    }

    /// Reorders registers; `order` must list every register once.
    pub fn reorder(&self, order: &[&str]) -> Result<DensityMatrix> {
        let pos = self.layout.positions(order)?;
        if pos.len() != self.layout.len() {
            return Err(Error::LayoutMismatch);
        }
        let layout = self.layout.select(order)?;
        let src = &self.layout;
        let map = |i: usize| {
            let d: Vec<usize> = pos.iter().map(|&p| src.digit(i, p)).collect();
            layout.index_of(&d)
        };
        let out = self.permute_basis(map);
        Ok(DensityMatrix { layout, matrix: out.matrix })
    }
}

#[cfg(test)]
mod tests {
    use super::super::gates;
    use super::*;
    use crate::qsim::StateVector;

    #[test]
    fn rejects_invalid_matrices() {
        let l = RegisterLayout::new([("q", 2)]).unwrap();
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = 2.0.into();
        assert!(DensityMatrix::new(l.clone(), m).is_err());
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = 1.5.into();
        m[(1, 1)] = (-0.5).into();
        assert!(DensityMatrix::new(l.clone(), m).is_err());
        assert!(DensityMatrix::new(l.clone(), DensityMatrix::maximally_mixed(l).matrix).is_ok());
    }

    #[test]
    fn conjugation_matches_pure_evolution() {
        let l = RegisterLayout::new([("a", 2), ("b", 3)]).unwrap();
        let s = StateVector::basis_digits(l, &[0, 2]);
        let u = gates::h();
        let direct = s.apply_unitary(&u, &["a"]).unwrap().to_density();
        let via = s.to_density().apply_unitary(&u, &["a"]).unwrap();
        assert!((direct.matrix() - via.matrix()).norm() < 1e-12);
    }

    #[test]
    fn reorder_swaps_subsystems() {
        let l = RegisterLayout::new([("a", 2), ("b", 2)]).unwrap();
        let r = DensityMatrix::basis(l, 1).reorder(&["b", "a"]).unwrap();
        assert!((r.matrix()[(2, 2)].re - 1.0).abs() < 1e-12);
    }
}
