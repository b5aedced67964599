use num_complex::Complex64;

use super::{AdviceOracle, Control};
use crate::error::{Error, Result};
use crate::qsim::{c64, gates, CMatrix, RegisterLayout, StateVector, NORM_TOL, ZERO_WEIGHT};

/// Access to `P = I − 2|ψ⟩⟨ψ|` on one copy register.
pub trait ReflectionOracle {
    /// Applies `P` to `target` on the branch where `control` reads 1. Levels of
    /// `target` beyond the dimension of `|ψ⟩` are left alone.
    fn controlled_reflect(&mut self, state: StateVector, target: &str, control: &str) -> Result<StateVector>;

    /// Calls made so far.
    fn calls(&self) -> usize;
}

/// `P` as an explicit matrix.
#[derive(Clone, Debug)]
pub struct ExactReflection {
    psi: Vec<Complex64>,
    calls: usize,
}

impl ExactReflection {
    pub fn new(psi: &[Complex64]) -> Result<Self> {
        let n: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Unnormalized(n));
        }
        Ok(ExactReflection { psi: psi.to_vec(), calls: 0 })
    }

    /// `I − 2|ψ⟩⟨ψ|` padded with identity up to `dim` levels.
    pub fn matrix(&self, dim: usize) -> Result<CMatrix> {
        let d = self.psi.len();
        if dim < d {
            return Err(Error::RegisterTooSmall { name: "reflection target".into(), dim });
        }
        let mut m = CMatrix::identity(dim, dim);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] -= self.psi[i] * self.psi[j].conj() * 2.0;
            }
        }
        Ok(m)
    }

    /// Uncontrolled `P` on `target`; counts as one call.
    pub fn reflect(&mut self, state: &StateVector, target: &str) -> Result<StateVector> {
        let m = self.matrix(state.layout().reg_dim(target)?)?;
        self.calls += 1;
        state.apply_unitary(&m, &[target])
    }
}

impl ReflectionOracle for ExactReflection {
    fn controlled_reflect(&mut self, state: StateVector, target: &str, control: &str) -> Result<StateVector> {
        let m = self.matrix(state.layout().reg_dim(target)?)?;
        self.calls += 1;
        state.apply_controlled(control, 1, &m, &[target])
    }

    fn calls(&self) -> usize {
        self.calls
    }
}

/// Reflection oracle about the normalized single-register state `psi`.
pub fn exact_reflection(psi: &StateVector) -> Result<ExactReflection> {
    if psi.layout().len() != 1 {
        return Err(Error::InvalidArgument("advice state must live on one register".into()));
    }
    ExactReflection::new(psi.amplitudes())
}

impl AdviceOracle {
    /// `Comp_x` built from at most two reflections about `|ψ⟩`, using two
    /// ancillas that must come back to `|⊥⟩|0⟩`. Agrees with [`AdviceOracle::comp`]
    /// on every state spanned by `|D⟩|S_{a,b}⟩` with `a ≥ 1` whenever `D(x) ≠ ⊥`.
    pub fn comp_via_reflection(
        &self,
        state: &StateVector,
        control: Control<'_>,
        refl: &mut dyn ReflectionOracle,
    ) -> Result<StateVector> {
        let bot = self.bot();
        let anc_r = format!("{}.anc_r", self.slot);
        let anc_c = format!("{}.anc_c", self.slot);
        let anc = RegisterLayout::new([(anc_r.clone(), bot + 1), (anc_c.clone(), 2)])?;
        let ext = state.tensor(&StateVector::basis_digits(anc, &[bot, 0]))?;
        let layout = ext.layout().clone();
        let sel = self.selector(&layout, control)?;
        let dp = layout.position(&self.db_register())?;
        let adv: Vec<usize> = (0..self.capacity)
            .map(|j| layout.position(&self.adv_register(j)))
            .collect::<Result<_>>()?;
        let rp = layout.position(&anc_r)?;
        let cp = layout.position(&anc_c)?;
        let set = |i: usize, p: usize, v: usize| i - layout.digit(i, p) * layout.stride(p) + v * layout.stride(p);

        // split by whether the row for x is present
        let mut idle = vec![c64(0.0, 0.0); layout.dim()];
        let mut absent = idle.clone();
        let mut present = idle.clone();
        for (i, a) in ext.amplitudes().iter().enumerate() {
            match sel(i) {
                None => idle[i] = *a,
                Some(x) if self.dbs.get(layout.digit(i, dp), x).is_none() => absent[i] = *a,
                Some(_) => present[i] = *a,
            }
        }

        // D(x) = ⊥: move the first live advice slot into anc_r, then insert (x, anc_r)
        let absent = StateVector::raw(layout.clone(), absent);
        let exhausted: f64 = absent
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(i, _)| adv.iter().all(|&p| layout.digit(*i, p) == bot))
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if exhausted > ZERO_WEIGHT {
            return Err(Error::AdviceExhausted);
        }
        let absent = absent.permute_basis(|i| match adv.iter().find(|&&p| layout.digit(i, p) != bot) {
            Some(&p) => set(set(i, rp, layout.digit(i, p)), p, bot),
            None => i,
        });
        let absent = absent.permute_basis(|i| {
            let r = layout.digit(i, rp);
            let x = sel(i).expect("selected above");
            match self.dbs.insert(layout.digit(i, dp), x, r) {
                Some(db) if r != bot => set(set(i, dp, db), rp, bot),
                _ => i,
            }
        });

        // D ∋ x: pull the row out, flag its |ψ⟩ part, park that part in the last ⊥ slot
        let present = StateVector::raw(layout.clone(), present).permute_basis(|i| {
            let x = sel(i).expect("selected above");
            let (rest, y) = self.dbs.remove(layout.digit(i, dp), x).expect("row present");
            set(set(i, dp, rest), rp, y)
        });
        let h = gates::h();
        let present = present.apply_unitary(&h, &[anc_c.as_str()])?;
        let present = refl.controlled_reflect(present, &anc_r, &anc_c)?;
        let present = present.apply_unitary(&h, &[anc_c.as_str()])?;
        let present = present.permute_basis(|i| {
            if layout.digit(i, cp) != 1 {
                return i;
            }
            match adv.iter().rev().find(|&&p| layout.digit(i, p) == bot) {
                Some(&p) => set(set(i, p, layout.digit(i, rp)), rp, bot),
                None => i,
            }
        });
        let present = present.permute_basis(|i| {
            if layout.digit(i, rp) == bot {
                set(i, cp, 1 - layout.digit(i, cp))
            } else {
                i
            }
        });
        let present = present.permute_basis(|i| {
            let r = layout.digit(i, rp);
            if r == bot {
                return i;
            }
            let x = sel(i).expect("selected above");
            match self.dbs.insert(layout.digit(i, dp), x, r) {
                Some(db) => set(set(i, dp, db), rp, bot),
                None => i,
            }
        });

        let mut amps = idle;
        for (k, (a, b)) in absent.amplitudes().iter().zip(present.amplitudes()).enumerate() {
            amps[k] += a + b;
        }
        StateVector::raw(layout.clone(), amps).discard_fixed(&[(anc_r.as_str(), bot), (anc_c.as_str(), 0)], NORM_TOL)
    }
}
