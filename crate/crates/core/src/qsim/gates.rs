//! Fixed single-qubit matrices and small helpers for building qudit gates.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use num_complex::Complex64;

use super::{c64, CMatrix};

fn m2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[a, b, c, d])
}

pub fn i() -> CMatrix {
    CMatrix::identity(2, 2)
}

pub fn x() -> CMatrix {
    let (o, l) = (c64(0.0, 0.0), c64(1.0, 0.0));
    m2(o, l, l, o)
}

pub fn y() -> CMatrix {
    let o = c64(0.0, 0.0);
    m2(o, c64(0.0, -1.0), c64(0.0, 1.0), o)
}

pub fn z() -> CMatrix {
    let (o, l) = (c64(0.0, 0.0), c64(1.0, 0.0));
    m2(l, o, o, -l)
}

pub fn h() -> CMatrix {
    let r = c64(FRAC_1_SQRT_2, 0.0);
    m2(r, r, r, -r)
}

pub fn s() -> CMatrix {
    let (o, l) = (c64(0.0, 0.0), c64(1.0, 0.0));
    m2(l, o, o, c64(0.0, 1.0))
}

pub fn t() -> CMatrix {
    let (o, l) = (c64(0.0, 0.0), c64(1.0, 0.0));
    m2(l, o, o, Complex64::from_polar(1.0, FRAC_PI_4))
}

/// Named builtin, if any.
pub fn builtin(name: &str) -> Option<CMatrix> {
    Some(match name {
        "I" => i(),
        "X" => x(),
        "Y" => y(),
        "Z" => z(),
        "H" => h(),
        "S" => s(),
        "T" => t(),
        _ => return None,
    })
}

/// Quantum Fourier transform on a `d`-level register.
pub fn fourier(d: usize) -> CMatrix {
    let w = std::f64::consts::TAU / d as f64;
    let k = 1.0 / (d as f64).sqrt();
    CMatrix::from_fn(d, d, |r, c| Complex64::from_polar(k, w * (r * c) as f64))
}

/// Kronecker product of a list of matrices, first factor most significant.
pub fn kron_all(ms: &[CMatrix]) -> CMatrix {
    ms.iter().fold(CMatrix::identity(1, 1), |acc, m| acc.kronecker(m))
}

/// `H^{⊗n}` on a `2^n`-level register.
pub fn hadamard_all(n: usize) -> CMatrix {
    kron_all(&vec![h(); n])
}

/// Haar-random unitary of size `d` (QR of a complex Gaussian matrix with
/// the phases of `R`'s diagonal divided out).
pub fn random_unitary(d: usize, rng: &mut impl rand::Rng) -> CMatrix {
    use rand_distr::StandardNormal;
    let g = CMatrix::from_fn(d, d, |_, _| c64(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut out = q;
    for j in 0..d {
        let p = r[(j, j)];
        let phase = if p.norm() > 0.0 { p / p.norm() } else { c64(1.0, 0.0) };
        for i in 0..d {
            out[(i, j)] *= phase;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{rng::seeded, unitarity_defect};

    #[test]
    fn builtins_are_unitary() {
        for n in ["I", "X", "Y", "Z", "H", "S", "T"] {
            assert!(unitarity_defect(&builtin(n).unwrap()) < 1e-12);
        }
        assert!(unitarity_defect(&fourier(5)) < 1e-12);
        assert!(unitarity_defect(&hadamard_all(3)) < 1e-12);
        assert!((hadamard_all(2) - fourier(2).kronecker(&fourier(2))).camax() < 1e-12);
    }

    #[test]
    fn random_unitaries_are_unitary() {
        let mut rng = seeded(1);
        for d in 1..7 {
            assert!(unitarity_defect(&random_unitary(d, &mut rng)) < 1e-10);
        }
    }
}
