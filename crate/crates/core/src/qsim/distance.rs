use std::collections::BTreeMap;

use itertools::Itertools;
use num_complex::Complex64;

use super::{CMatrix, DensityMatrix, RegisterLayout, StateVector, NORM_TOL};
use crate::error::{Error, Result};

/// Either representation accepted by [`trace_distance`].
#[derive(Clone, Copy, Debug)]
pub enum StateRef<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a StateVector> for StateRef<'a> {
    fn from(s: &'a StateVector) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(s: &'a DensityMatrix) -> Self {
        StateRef::Mixed(s)
    }
}

impl StateRef<'_> {
    fn layout(&self) -> &RegisterLayout {
        match self {
            StateRef::Pure(s) => s.layout(),
            StateRef::Mixed(r) => r.layout(),
        }
    }

    fn matrix(&self) -> CMatrix {
        match self {
            StateRef::Pure(s) => s.to_density().matrix().clone(),
            StateRef::Mixed(r) => r.matrix().clone(),
        }
    }
}

/// `½‖ρ − σ‖₁`. Pure pairs use `sqrt(1 − |⟨a|b⟩|²)`; anything mixed goes
/// through the Hermitian eigensolver.
pub fn trace_distance<'a, 'b>(a: impl Into<StateRef<'a>>, b: impl Into<StateRef<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    if a.layout() != b.layout() {
        return Err(Error::LayoutMismatch);
    }
    if let (StateRef::Pure(x), StateRef::Pure(y)) = (a, b) {
        let ov = x.inner(y)?.norm_sqr().min(1.0);
        return Ok((1.0 - ov).max(0.0).sqrt());
    }
    let diff = a.matrix() - b.matrix();
    let eig = diff.symmetric_eigenvalues();
    Ok((0.5 * eig.iter().map(|e| e.abs()).sum::<f64>()).clamp(0.0, 1.0))
}

/// `min_θ ‖a − e^{iθ} b‖ = sqrt(2 − 2|⟨a|b⟩|)`.
pub fn phase_min_distance(a: &StateVector, b: &StateVector) -> Result<f64> {
    let ov = a.inner(b)?.norm().min(1.0);
    Ok((2.0 - 2.0 * ov).max(0.0).sqrt())
}

fn check_normalized(p: &[f64]) -> Result<()> {
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > NORM_TOL || p.iter().any(|x| *x < -NORM_TOL) {
        return Err(Error::Unnormalized(s));
    }
    Ok(())
}

/// `½ Σ |p_x − q_x|` over a common support.
pub fn statistical_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SupportMismatch(p.len(), q.len()));
    }
    statistical_distance_padded(p, q)
}

/// Like [`statistical_distance`] but pads the shorter support with zeros.
pub fn statistical_distance_padded(p: &[f64], q: &[f64]) -> Result<f64> {
    check_normalized(p)?;
    check_normalized(q)?;
    let n = p.len().max(q.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    Ok(0.5 * (0..n).map(|i| (at(p, i) - at(q, i)).abs()).sum::<f64>())
}

/// Statistical distance between keyed distributions (missing keys are zero).
pub fn statistical_distance_keyed<K: Ord>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut total = 0.0;
    for (k, v) in p {
        total += (v - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, v) in q {
        if !p.contains_key(k) {
            total += v.abs();
        }
    }
    0.5 * total
}

/// `|D⟩ = Σ_z sqrt(p_z) |z⟩` on a single register `D` (padded to size 2).
pub fn dist_state(d: &[f64]) -> Result<StateVector> {
    check_normalized(d)?;
    let layout = RegisterLayout::new([("D", d.len().max(2))])?;
    let mut amps: Vec<Complex64> = d.iter().map(|p| Complex64::new(p.max(0.0).sqrt(), 0.0)).collect();
    amps.resize(layout.dim(), Complex64::new(0.0, 0.0));
    StateVector::normalized(layout, amps)
}

/// Exact average of `P(π) ρ P(π)†` over all permutations of `subsystems`.
pub fn symmetrize(rho: &DensityMatrix, subsystems: &[&str]) -> Result<DensityMatrix> {
    let n = subsystems.len();
    if n > 6 {
        return Err(Error::TooManySubsystems(n));
    }
    let layout = rho.layout();
    let pos = layout.positions(subsystems)?;
    if n == 0 {
        return Ok(rho.clone());
    }
    let d0 = layout.dims()[pos[0]];
    if pos.iter().any(|&p| layout.dims()[p] != d0) {
        return Err(Error::UnequalSubsystems);
    }
    let dim = layout.dim();
    let mut acc = CMatrix::zeros(dim, dim);
    let mut count = 0usize;
    for perm in (0..n).permutations(n) {
        let permuted = rho.permute_basis(|i| {
            let mut digits = layout.digits(i);
            let orig: Vec<usize> = pos.iter().map(|&p| digits[p]).collect();
            for (k, &target) in perm.iter().enumerate() {
                digits[pos[target]] = orig[k];
            }
            layout.index_of(&digits)
        });
        acc += permuted.matrix();
        count += 1;
    }
    let m = acc.map(|x| x / count as f64);
    Ok(DensityMatrix::from_parts(layout.clone(), m))
}

#[cfg(test)]
mod tests {
    use super::super::gates;
    use super::*;
    use proptest::prelude::*;

    fn qubit() -> RegisterLayout {
        RegisterLayout::new([("q", 2)]).unwrap()
    }

    fn random_state(layout: RegisterLayout, raw: &[(f64, f64)]) -> Option<StateVector> {
        let amps = raw.iter().map(|(a, b)| Complex64::new(*a, *b)).collect();
        StateVector::normalized(layout, amps).ok()
    }

    #[test]
    fn trace_distance_examples() {
        let z = StateVector::basis(qubit(), 0);
        let o = StateVector::basis(qubit(), 1);
        assert!((trace_distance(&z, &o).unwrap() - 1.0).abs() < 1e-12);
        let rho = DensityMatrix::maximally_mixed(qubit());
        assert!(trace_distance(&rho, &rho).unwrap().abs() < 1e-12);
        let plus = z.apply_unitary(&gates::h(), &["q"]).unwrap();
        let mixed = trace_distance(&z.to_density(), &plus.to_density()).unwrap();
        assert!((mixed - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!((trace_distance(&z, &plus).unwrap() - mixed).abs() < 1e-9);
    }

    #[test]
    fn phase_distance_examples() {
        let z = StateVector::basis(qubit(), 0);
        let o = StateVector::basis(qubit(), 1);
        assert!(phase_min_distance(&z, &z).unwrap() < 1e-12);
        assert!((phase_min_distance(&z, &o).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let rot = StateVector::from_amplitudes(
            qubit(),
            vec![Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_3), 0.0.into()],
        )
        .unwrap();
        assert!(phase_min_distance(&z, &rot).unwrap() < 1e-7);
    }

    #[test]
    fn statistical_distance_examples() {
        assert_eq!(statistical_distance(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(statistical_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((statistical_distance(&[0.5, 0.5], &[0.75, 0.25]).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(
            statistical_distance(&[1.0], &[0.5, 0.5]),
            Err(Error::SupportMismatch(1, 2))
        ));
        assert!((statistical_distance_padded(&[1.0], &[0.5, 0.5]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dist_state_examples() {
        let s = dist_state(&[0.5, 0.5]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0].re - r).abs() < 1e-12);
        let s = dist_state(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.amplitudes()[3], Complex64::new(1.0, 0.0));
        assert!(dist_state(&[0.5, 0.2]).is_err());
    }

    #[test]
    fn symmetrize_examples() {
        let l = RegisterLayout::new([("a", 2), ("b", 2)]).unwrap();
        let rho = DensityMatrix::basis(l.clone(), 1);
        let s = symmetrize(&rho, &["a", "b"]).unwrap();
        assert!((s.matrix()[(1, 1)].re - 0.5).abs() < 1e-12);
        assert!((s.matrix()[(2, 2)].re - 0.5).abs() < 1e-12);
        let twice = symmetrize(&s, &["a", "b"]).unwrap();
        assert!((twice.matrix() - s.matrix()).camax() < 1e-12);
        let plus = StateVector::zero(RegisterLayout::new([("a", 2)]).unwrap())
            .apply_unitary(&gates::h(), &["a"])
            .unwrap();
        let pp = plus.tensor(&StateVector::zero(RegisterLayout::new([("b", 2)]).unwrap()).apply_unitary(&gates::h(), &["b"]).unwrap()).unwrap().to_density();
        let sp = symmetrize(&pp, &["a", "b"]).unwrap();
        assert!((sp.matrix() - pp.matrix()).camax() < 1e-12);
        let big = RegisterLayout::new((0..7).map(|i| (format!("s{i}"), 2))).unwrap();
        let names: Vec<String> = big.names().to_vec();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        assert!(matches!(
            symmetrize(&DensityMatrix::basis(big, 0), &refs),
            Err(Error::TooManySubsystems(7))
        ));
        let uneq = RegisterLayout::new([("a", 2), ("b", 3)]).unwrap();
        assert!(matches!(
            symmetrize(&DensityMatrix::basis(uneq, 0), &["a", "b"]),
            Err(Error::UnequalSubsystems)
        ));
    }

    fn amps_strategy(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
    }

    fn dist_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn trace_distance_dominates_phase_distance(a in amps_strategy(4), b in amps_strategy(4)) {
            let l = RegisterLayout::new([("q", 4)]).unwrap();
            if let (Some(x), Some(y)) = (random_state(l.clone(), &a), random_state(l, &b)) {
                let td = trace_distance(&x, &y).unwrap();
                let pd = phase_min_distance(&x, &y).unwrap();
                prop_assert!(td + 1e-9 >= pd / 2f64.sqrt());
            }
        }

        #[test]
        fn euclidean_distance_bounds_trace_distance(a in amps_strategy(4), e in amps_strategy(4), scale in 0.0f64..0.5) {
            let l = RegisterLayout::new([("q", 4)]).unwrap();
            if let Some(x) = random_state(l.clone(), &a) {
                let pert: Vec<(f64, f64)> = a.iter().zip(&e).map(|(p, q)| (p.0 + scale * q.0, p.1 + scale * q.1)).collect();
                if let Some(y) = random_state(l, &pert) {
                    let eps = x.distance(&y).unwrap();
                    prop_assert!(trace_distance(&x, &y).unwrap() <= eps + 1e-9);
                }
            }
        }

        #[test]
        fn dist_state_distance_bounded_by_sd(p in dist_strategy(5), q in dist_strategy(5)) {
            let sd = statistical_distance(&p, &q).unwrap();
            let d = dist_state(&p).unwrap().distance(&dist_state(&q).unwrap()).unwrap();
            prop_assert!(d <= (2.0 * sd).sqrt() + 1e-9);
        }

        #[test]
        fn unitaries_preserve_norm(a in amps_strategy(6), theta in 0.0f64..6.3) {
            let l = RegisterLayout::new([("a", 2), ("b", 3)]).unwrap();
            if let Some(x) = random_state(l, &a) {
                let u = gates::fourier(3).map(|z| z * Complex64::from_polar(1.0, theta));
                let y = x.apply_unitary(&u, &["b"]).unwrap();
                prop_assert!((y.norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetrized_states_commute_with_swaps(a in amps_strategy(8)) {
            let l = RegisterLayout::new([("a", 2), ("b", 2), ("c", 2)]).unwrap();
            if let Some(x) = random_state(l.clone(), &a) {
                let s = symmetrize(&x.to_density(), &["a", "b", "c"]).unwrap();
                for order in [["b", "a", "c"], ["a", "c", "b"], ["c", "b", "a"]] {
                    let swapped = s.reorder(&order).unwrap();
                    prop_assert!((swapped.matrix() - s.matrix()).camax() < 1e-9);
                }
            }
        }
    }
}
