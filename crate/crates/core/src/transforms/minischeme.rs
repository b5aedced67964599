use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rayon::prelude::*;

use super::{all_accept, copy_name, copy_registers, tensor_copies, threshold_count, Cloner};
use crate::error::{Error, Result};
use crate::qsim::rng::split;
use crate::qsim::{c64, gates, CMatrix, RegisterLayout, StateVector};

pub type SerialSampler = Arc<dyn Fn(&mut dyn RngCore) -> Result<(Vec<usize>, StateVector)> + Send + Sync>;
/// Accept effect `E_s` of the verifier for serial `s`: `Pr[accept ρ] = tr(E_s ρ)`.
pub type AcceptEffect = Arc<dyn Fn(&[usize]) -> Result<CMatrix> + Send + Sync>;

/// Sampler of `(serial, |ψ_s⟩)` pairs plus a verifier, with declared
/// copy count `n`, correctness `c` and soundness `s`.
#[derive(Clone)]
pub struct WeakMinischeme {
    pub name: String,
    pub lambda: usize,
    pub n: usize,
    pub c: f64,
    pub s: f64,
    layout: RegisterLayout,
    serial_len: usize,
    samp: SerialSampler,
    effect: AcceptEffect,
}

impl fmt::Debug for WeakMinischeme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeakMinischeme")
            .field("name", &self.name)
            .field("lambda", &self.lambda)
            .field("n", &self.n)
            .field("c", &self.c)
            .field("s", &self.s)
            .field("layout", &self.layout)
            .finish()
    }
}

impl WeakMinischeme {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        lambda: usize,
        (n, c, s): (usize, f64, f64),
        layout: RegisterLayout,
        serial_len: usize,
        samp: SerialSampler,
        effect: AcceptEffect,
    ) -> Result<Self> {
        if n == 0 || !(0.0..=1.0).contains(&c) || !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidArgument(format!("bad parameters (n, c, s) = ({n}, {c}, {s})")));
        }
        Ok(WeakMinischeme { name: name.into(), lambda, n, c, s, layout, serial_len, samp, effect })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn serial_len(&self) -> usize {
        self.serial_len
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<(Vec<usize>, StateVector)> {
        let (serial, state) = (self.samp)(rng)?;
        if state.layout() != &self.layout || serial.len() != self.serial_len {
            return Err(Error::LayoutMismatch);
        }
        Ok((serial, state))
    }

    pub fn effect(&self, serial: &[usize]) -> Result<CMatrix> {
        (self.effect)(serial)
    }

    /// `⟨ψ|E_s|ψ⟩`.
    pub fn accept_probability(&self, serial: &[usize], state: &StateVector) -> Result<f64> {
        let regs = self.layout.names().to_vec();
        all_accept(state, &[(regs, self.effect(serial)?)])
    }

    /// Mean exact acceptance of honestly sampled pairs over `trials` samples.
    pub fn correctness_estimate(&self, trials: usize, rng: &mut dyn RngCore) -> Result<f64> {
        let seed = rng.next_u64();
        let total: f64 = (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut r = split(seed, i as u64);
                let (s, psi) = self.sample(&mut r)?;
                self.accept_probability(&s, &psi)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .sum();
        Ok(total / trials.max(1) as f64)
    }
}

fn projector(v: &StateVector) -> CMatrix {
    let v = nalgebra::DVector::from_column_slice(v.amplitudes());
    &v * v.adjoint()
}

/// Uniform `x ∈ [2^bits]`, state `|x⟩`, serial `[x]`; the verifier accepts
/// the matching basis state with probability `c`. Classical states clone
/// freely, so the declared soundness `s` is a deliberate overstatement.
pub fn toy_basis_minischeme(bits: usize, c: f64, n: usize, s: f64) -> Result<WeakMinischeme> {
    let layout = RegisterLayout::new([("x", 1usize << bits)])?;
    let d = layout.dim();
    let l = layout.clone();
    let samp: SerialSampler = Arc::new(move |rng| {
        let x = rng.gen_range(0..d);
        Ok((vec![x], StateVector::basis(l.clone(), x)))
    });
    let effect: AcceptEffect = Arc::new(move |s: &[usize]| {
        let mut e = CMatrix::zeros(d, d);
        if let Some(&x) = s.first().filter(|x| **x < d) {
            e[(x, x)] = c64(c, 0.0);
        }
        Ok(e)
    });
    WeakMinischeme::new(&format!("basis{bits}"), bits, (n, c, s), layout, 1, samp, effect)
}

/// Conjugate-coding states `⊗ H^{θ_i}|x_i⟩` on `bits` qubits; the serial is
/// `x_0…x_{b−1} θ_0…θ_{b−1}` and the verifier projects onto the state.
/// Declared `(n, c, s) = (2, 1, (3/4)^bits)`.
pub fn toy_conjugate_minischeme(bits: usize) -> Result<WeakMinischeme> {
    let layout = RegisterLayout::new((0..bits).map(|i| (format!("q{i}"), 2)))?;
    let l = layout.clone();
    let state_of = move |s: &[usize]| -> Result<StateVector> {
        let mut v = StateVector::zero(l.clone());
        for i in 0..bits {
            let q = format!("q{i}");
            if s[i] == 1 {
                v = v.apply_unitary(&gates::x(), &[q.as_str()])?;
            }
            if s[bits + i] == 1 {
                v = v.apply_unitary(&gates::h(), &[q.as_str()])?;
            }
        }
        Ok(v)
    };
    let state_of = Arc::new(state_of);
    let st = state_of.clone();
    let samp: SerialSampler = Arc::new(move |rng| {
        let s: Vec<usize> = (0..2 * bits).map(|_| rng.gen_range(0..2)).collect();
        let v = st(&s)?;
        Ok((s, v))
    });
    let effect: AcceptEffect = Arc::new(move |s: &[usize]| {
        if s.len() != 2 * bits || s.iter().any(|b| *b > 1) {
            return Err(Error::InvalidArgument("malformed serial".into()));
        }
        Ok(projector(&state_of(s)?))
    });
    let sound = 0.75f64.powi(bits as i32);
    WeakMinischeme::new(&format!("conjugate{bits}"), bits, (2, 1.0, sound), layout, 2 * bits, samp, effect)
}

const AMPLIFIED_DIM_CAP: usize = 1 << 10;

/// `ℓ = λ·t` independent copies of a scheme, accepted when at least a
/// `c − 1/(2t)` fraction of the copies accept.
#[derive(Clone, Debug)]
pub struct Amplified {
    pub scheme: WeakMinischeme,
    pub base: WeakMinischeme,
    pub t: usize,
    pub copies: usize,
    /// Fewest accepting copies.
    pub needed: usize,
}

/// Threshold effect `Σ_{|S| ≥ m} ⊗_{i∈S} E_i ⊗_{i∉S} (I − E_i)`.
fn threshold_effect(effects: &[CMatrix], m: usize) -> CMatrix {
    let mut by_count = vec![CMatrix::from_element(1, 1, c64(1.0, 0.0))];
    for e in effects {
        let id = CMatrix::identity(e.nrows(), e.ncols());
        let rej = &id - e;
        let mut next: Vec<CMatrix> = by_count.iter().map(|a| a.kronecker(&rej)).collect();
        let d = next[0].nrows();
        next.push(CMatrix::zeros(d, d));
        for (k, a) in by_count.iter().enumerate() {
            next[k + 1] += a.kronecker(e);
        }
        by_count = next;
    }
    let d = by_count[0].nrows();
    by_count.into_iter().skip(m).fold(CMatrix::zeros(d, d), |acc, x| acc + x)
}

/// Amplifies a `(n, c, s)` minischeme with `(1 − s) > n(1 − c) + 1/t`.
///
/// Declared correctness is the Hoeffding bound `1 − exp(−ℓ/(2t²))` and
/// declared soundness `1 − 1/(2nt)`.
pub fn amplify_minischeme(scheme: &WeakMinischeme, t: usize) -> Result<Amplified> {
    if t == 0 {
        return Err(Error::InvalidArgument("t must be positive".into()));
    }
    let (n, c, s) = (scheme.n as f64, scheme.c, scheme.s);
    let tf = t as f64;
    if !(1.0 - s > n * (1.0 - c) + 1.0 / tf) {
        return Err(Error::ParameterInequality(format!(
            "1 − s = {} is not above n(1 − c) + 1/t = {}",
            1.0 - s,
            n * (1.0 - c) + 1.0 / tf
        )));
    }
    let l = scheme.lambda.max(1) * t;
    let layout = super::copies_layout(scheme.layout(), l)?;
    if layout.dim() > AMPLIFIED_DIM_CAP {
        return Err(Error::CapViolation(format!("{l} copies span dimension {}", layout.dim())));
    }
    let needed = threshold_count(l, c - 1.0 / (2.0 * tf));
    let (b1, b2) = (scheme.clone(), scheme.clone());
    let samp: SerialSampler = Arc::new(move |rng| {
        let mut serial = vec![];
        let mut parts = vec![];
        for _ in 0..l {
            let (si, pi) = b1.sample(rng)?;
            serial.extend(si);
            parts.push(pi);
        }
        Ok((serial, tensor_copies(&parts)?))
    });
    let effect: AcceptEffect = Arc::new(move |serial: &[usize]| {
        let k = b2.serial_len();
        if serial.len() != k * l {
            return Err(Error::InvalidArgument("malformed serial".into()));
        }
        let es = serial.chunks(k.max(1)).take(l).map(|si| b2.effect(si)).collect::<Result<Vec<_>>>()?;
        Ok(threshold_effect(&es, needed))
    });
    let declared = (scheme.n, 1.0 - (-(l as f64) / (2.0 * tf * tf)).exp(), 1.0 - 1.0 / (2.0 * n * tf));
    let name = format!("{}-amp{t}", scheme.name);
    let out = WeakMinischeme::new(&name, scheme.lambda, declared, layout, scheme.serial_len() * l, samp, effect)?;
    Ok(Amplified { scheme: out, base: scheme.clone(), t, copies: l, needed })
}

/// Outcome of running the planted reduction adversary.
#[derive(Clone, Debug)]
pub struct PlantedReport {
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    /// Binomial standard error of `rate`.
    pub sigma: f64,
    /// Mean exact success probability over the sampled trials.
    pub exact_mean: f64,
    /// `(1 − 1/(2nt)) · (1 − n(1 + 1/(2nt) − c))`.
    pub bound: f64,
    /// Mean exact probability that the wrapped adversary breaks the amplified scheme.
    pub amplified_success: f64,
}

/// Turns an adversary against the amplified scheme into one against the
/// base scheme: plant the challenge at a uniform position, fill the rest with
/// fresh samples, run the adversary and keep position `i*` of every output part.
pub fn planted_adversary(
    amp: &Amplified,
    adversary: &dyn Cloner,
    trials: usize,
    rng: &mut dyn RngCore,
) -> Result<PlantedReport> {
    let n = amp.base.n;
    let l = amp.copies;
    let k = amp.base.serial_len();
    let seed = rng.next_u64();
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<(bool, f64, f64)> {
            let mut r = split(seed, trial as u64);
            let (s, psi) = amp.base.sample(&mut r)?;
            let star = r.gen_range(0..l);
            let mut serial = vec![];
            let mut parts = vec![];
            for i in 0..l {
                let (si, pi) = if i == star { (s.clone(), psi.clone()) } else { amp.base.sample(&mut r)? };
                serial.extend(si);
                parts.push(pi);
            }
            let joint = adversary.clone_state(&tensor_copies(&parts)?, n)?;
            let e = amp.base.effect(&s)?;
            let planted: Vec<(Vec<String>, CMatrix)> = (0..n)
                .map(|j| {
                    let regs = copy_registers(amp.base.layout(), star).iter().map(|x| copy_name(j, x)).collect();
                    (regs, e.clone())
                })
                .collect();
            let p = all_accept(&joint, &planted)?;
            let e_amp = amp.scheme.effect(&serial)?;
            let whole: Vec<(Vec<String>, CMatrix)> =
                (0..n).map(|j| (copy_registers(amp.scheme.layout(), j), e_amp.clone())).collect();
            let q = all_accept(&joint, &whole)?;
            debug_assert_eq!(serial.len(), k * l);
            Ok((r.gen::<f64>() < p, p, q))
        })
        .collect::<Result<Vec<_>>>()?;
    let successes = outcomes.iter().filter(|o| o.0).count();
    let tr = trials.max(1) as f64;
    let rate = successes as f64 / tr;
    let (nf, tf) = (n as f64, amp.t as f64);
    let eps = 1.0 / (2.0 * nf * tf);
    Ok(PlantedReport {
        trials,
        successes,
        rate,
        sigma: (rate * (1.0 - rate) / tr).sqrt(),
        exact_mean: outcomes.iter().map(|o| o.1).sum::<f64>() / tr,
        bound: (1.0 - eps) * (1.0 - nf * (1.0 + eps - amp.base.c)),
        amplified_success: outcomes.iter().map(|o| o.2).sum::<f64>() / tr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::rng::seeded;
    use crate::transforms::{binomial_tail, BasisCopier, ExactCopier};

    #[test]
    fn copies_and_threshold() {
        let base = toy_basis_minischeme(1, 0.9, 2, 0.1).unwrap();
        let amp = amplify_minischeme(&base, 3).unwrap();
        assert_eq!(amp.copies, 3);
        assert_eq!(amp.needed, threshold_count(3, 0.9 - 1.0 / 6.0));
        let mut b = base.clone();
        b.lambda = 2;
        let amp = amplify_minischeme(&b, 3).unwrap();
        assert_eq!(amp.copies, 6);
        assert_eq!(amp.scheme.layout().len(), 6);
        assert!((amp.scheme.s - (1.0 - 1.0 / 12.0)).abs() < 1e-12);
    }

    #[test]
    fn perfect_stays_perfect() {
        let base = toy_basis_minischeme(1, 1.0, 2, 0.0).unwrap();
        let amp = amplify_minischeme(&base, 2).unwrap();
        let c = amp.scheme.correctness_estimate(50, &mut seeded(3)).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        let w = amplify_minischeme(&toy_conjugate_minischeme(1).unwrap(), 5).unwrap();
        assert!((w.scheme.correctness_estimate(20, &mut seeded(4)).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inequality_is_enforced() {
        let base = toy_basis_minischeme(1, 0.9, 2, 0.5).unwrap();
        assert!(matches!(amplify_minischeme(&base, 2), Err(Error::ParameterInequality(_))));
        assert!(amplify_minischeme(&base, 4).is_ok());
        let w = toy_conjugate_minischeme(1).unwrap();
        assert!(amplify_minischeme(&w, 4).is_err());
        assert!(amplify_minischeme(&w, 5).is_ok());
    }

    #[test]
    fn correctness_beats_hoeffding() {
        let mut base = toy_basis_minischeme(1, 0.9, 1, 0.0).unwrap();
        base.lambda = 4;
        let amp = amplify_minischeme(&base, 2).unwrap();
        let got = amp.scheme.correctness_estimate(10, &mut seeded(5)).unwrap();
        assert!((got - binomial_tail(8, 0.9, amp.needed)).abs() < 1e-9, "{got}");
        assert!(got >= amp.scheme.c);
    }

    #[test]
    fn threshold_effect_counts() {
        let e = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(0.3, 0.0), c64(0.0, 0.0)]));
        let t = threshold_effect(&[e.clone(), e.clone(), e], 2);
        assert!((t[(0, 0)].re - binomial_tail(3, 0.3, 2)).abs() < 1e-12);
        assert!(t[(7, 7)].norm() < 1e-12);
    }

    #[test]
    fn conjugate_states_verify() {
        let w = toy_conjugate_minischeme(2).unwrap();
        let mut r = seeded(6);
        for _ in 0..8 {
            let (s, psi) = w.sample(&mut r).unwrap();
            assert!((w.accept_probability(&s, &psi).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn planted_adversary_on_a_cloneable_scheme() {
        let mut base = toy_basis_minischeme(1, 0.98, 2, 0.25).unwrap();
        base.lambda = 2;
        let amp = amplify_minischeme(&base, 2).unwrap();
        assert_eq!(amp.copies, 4);
        let rep = planted_adversary(&amp, &BasisCopier, 2000, &mut seeded(7)).unwrap();
        assert!((rep.bound - 0.875 * 0.71).abs() < 1e-12);
        assert!((rep.exact_mean - 0.98f64.powi(2)).abs() < 1e-9);
        assert!(rep.amplified_success >= 1.0 - 1.0 / 8.0);
        assert!(rep.rate >= rep.bound - 3.0 * rep.sigma);
        let same = planted_adversary(&amp, &ExactCopier, 10, &mut seeded(7)).unwrap();
        assert!((same.exact_mean - rep.exact_mean).abs() < 1e-9);
    }
}
