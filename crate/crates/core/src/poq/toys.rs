use std::sync::Arc;

use super::{ClassicalModel, ProtocolSpec, QuantumProver, Round, RoundCircuit, Transcript, Verifier};
use crate::error::{Error, Result};
use crate::oracles::{OracleCircuit, TruthTable, TruthTableBackend};
use crate::qsim::{c64, digit_permutation, gates, permutation_matrix, CMatrix};

/// The fixed, published permutation `x ↦ 5x + 3 mod 2^bits`.
pub fn toy_permutation(bits: usize) -> Vec<usize> {
    let n = 1usize << bits;
    (0..n).map(|x| (5 * x + 3) % n).collect()
}

fn inverse(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (x, &y) in p.iter().enumerate() {
        inv[y] = x;
    }
    inv
}

fn check_bits(bits: usize, max: usize) -> Result<()> {
    if bits == 0 || bits > max {
        return Err(Error::CapViolation(format!("bits = {bits} outside 1..={max}")));
    }
    Ok(())
}

fn regs(list: &[(&str, usize)]) -> Vec<(String, usize)> {
    list.iter().map(|(n, d)| (n.to_string(), *d)).collect()
}

fn wrong_round(index: usize) -> Error {
    Error::ScheduleMismatch(format!("the prover does not speak at message {}", index + 1))
}

/// Two-message inversion protocol with the honest prover answering correctly
/// with probability `fidelity`: the verifier sends `y`, the prover must answer
/// `x` with `f(x) = y` for the published permutation `f`.
///
/// Classical soundness is measured against provers who do not know which of
/// the shifted functions `x ↦ f(x ⊕ k)` the verifier uses, giving `2^{−bits}`.
pub fn toy_owf_poq_with_fidelity(bits: usize, fidelity: f64) -> Result<(ProtocolSpec, QuantumProver)> {
    check_bits(bits, 4)?;
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::InvalidArgument(format!("fidelity {fidelity} outside [0, 1]")));
    }
    let n = 1usize << bits;
    let f = Arc::new(toy_permutation(bits));
    let finv = inverse(&f);
    let fv = f.clone();
    let verifier = Verifier::PublicCoin {
        predicate: Arc::new(move |t: &Transcript| matches!((t.symbol(0), t.symbol(1)), (Some(y), Some(x)) if fv[x] == y)),
    };
    let fh = f.clone();
    let hidden = ClassicalModel::Hidden {
        weights: vec![1.0 / n as f64; n],
        predicate: Arc::new(move |k, t: &Transcript| match (t.symbol(0), t.symbol(1)) {
            (Some(y), Some(x)) => fh[x ^ k] == y,
            _ => false,
        }),
    };
    let spec = ProtocolSpec::new(
        &format!("owf-{bits}"),
        vec![Round::verifier(n), Round::prover(n)],
        verifier,
        hidden,
        fidelity,
        1.0 / n as f64,
    )?;
    let (a, b) = (fidelity.sqrt(), (1.0 - fidelity).max(0.0).sqrt());
    let mut rot = CMatrix::identity(n, n);
    rot[(0, 0)] = c64(a, 0.0);
    rot[(1, 0)] = c64(b, 0.0);
    rot[(0, 1)] = c64(-b, 0.0);
    rot[(1, 1)] = c64(a, 0.0);
    let circuit: RoundCircuit = Arc::new(move |index, t: &Transcript| {
        if index != 1 {
            return Err(wrong_round(index));
        }
        let y = t.symbol(0).ok_or_else(|| wrong_round(index))?;
        let pre = finv[y % n];
        let mut c = OracleCircuit::new([("x", n)])?;
        if fidelity < 1.0 {
            c.apply(&["x"], rot.clone())?;
        }
        let shift: Vec<usize> = (0..n).map(|v| v ^ pre).collect();
        c.apply(&["x"], permutation_matrix(&shift))?;
        c.measure(&["x"])?;
        Ok(c)
    });
    let prover = QuantumProver::new(regs(&[("x", n)]), vec![vec!["x".into()]], circuit)?;
    Ok((spec, prover))
}

/// [`toy_owf_poq_with_fidelity`] with a perfect inverter.
pub fn toy_owf_poq(bits: usize) -> Result<(ProtocolSpec, QuantumProver)> {
    toy_owf_poq_with_fidelity(bits, 1.0)
}

/// Where the claw-free pair's base permutation `g` comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ClawSource {
    /// [`toy_permutation`], compiled into the prover's unitary.
    Published,
    /// A permutation table the prover can only query through oracle slot `f`.
    Oracle(TruthTable),
}

fn parity(v: usize) -> usize {
    (v.count_ones() % 2) as usize
}

/// Claw-free proof of quantumness over `f_b(x) = g(x ⊕ k ⊕ b·s)`, with the
/// real instance `k = 0`, `s = 2^bits − 1`. The prover commits to an image
/// `y`, receives a challenge bit, and answers `(b, x)` with `f_b(x) = y` on
/// challenge 0 or `(e, d)` with `e = d·s` on challenge 1. Answers are packed
/// as `b·2^bits + x`.
///
/// With `dummy_first` the schedule opens with a one-symbol verifier message
/// (four messages in total); otherwise it has three. Classical soundness is
/// measured against provers who know neither `k` nor `s`: `(1 + 2^{−bits})/2`.
pub fn clawfree_poq(bits: usize, source: ClawSource, dummy_first: bool) -> Result<(ProtocolSpec, QuantumProver)> {
    check_bits(bits, 3)?;
    let n = 1usize << bits;
    let s0 = n - 1;
    let g: Arc<Vec<usize>> = Arc::new(match &source {
        ClawSource::Published => toy_permutation(bits),
        ClawSource::Oracle(t) => {
            let mut seen = vec![false; n];
            if t.domain() != n || t.alphabet() != n || t.outputs().iter().any(|&y| std::mem::replace(&mut seen[y], true)) {
                return Err(Error::InvalidArgument(format!("oracle must be a permutation of {n} points")));
            }
            t.outputs().to_vec()
        }
    });
    let o = usize::from(dummy_first);
    let valid = {
        let g = g.clone();
        move |k: usize, s: usize, t: &Transcript| -> bool {
            let (Some(y), Some(c), Some(a)) = (t.symbol(o), t.symbol(o + 1), t.symbol(o + 2)) else {
                return false;
            };
            let (b, x) = (a / n, a % n);
            if c == 0 {
                g[x ^ k ^ (b * s)] == y
            } else {
                b == parity(x & s)
            }
        }
    };
    let vp = valid.clone();
    let verifier = Verifier::PublicCoin { predicate: Arc::new(move |t: &Transcript| vp(0, s0, t)) };
    let m = n * (n - 1);
    let hidden = ClassicalModel::Hidden {
        weights: vec![1.0 / m as f64; m],
        predicate: Arc::new(move |i, t: &Transcript| valid(i / (n - 1), 1 + i % (n - 1), t)),
    };
    let mut rounds = vec![];
    if dummy_first {
        rounds.push(Round::verifier(1));
    }
    rounds.extend([Round::prover(n), Round::verifier(2), Round::prover(2 * n)]);
    let soundness = (1.0 + 1.0 / n as f64) / 2.0;
    let spec = ProtocolSpec::new(&format!("clawfree-{bits}-{}", rounds.len()), rounds, verifier, hidden, 1.0, soundness)?;

    let oracle = matches!(source, ClawSource::Oracle(_));
    let mut registers = vec![("bx", 2 * n), ("img", n)];
    if oracle {
        registers.push(("w", n));
    }
    let registers = regs(&registers);
    let declared = registers.clone();
    let walsh = gates::hadamard_all(bits + 1);
    let gp = g.clone();
    let circuit: RoundCircuit = Arc::new(move |index, t: &Transcript| {
        let mut c = OracleCircuit::new(declared.clone())?;
        if index == o {
            c.apply(&["bx"], walsh.clone())?;
            if oracle {
                let shift = digit_permutation(&[2 * n, n], |d| vec![d[0], d[1] ^ (d[0] % n) ^ ((d[0] / n) * s0)])?;
                c.apply(&["bx", "w"], shift.clone())?;
                c.call("f", "w", "img")?;
                c.apply(&["bx", "w"], shift)?;
            } else {
                let eval = digit_permutation(&[2 * n, n], |d| {
                    let (b, x) = (d[0] / n, d[0] % n);
                    vec![d[0], d[1] ^ gp[x ^ (b * s0)]]
                })?;
                c.apply(&["bx", "img"], eval)?;
            }
            c.measure(&["img"])?;
        } else if index == o + 2 {
            if t.symbol(o + 1) == Some(1) {
                c.apply(&["bx"], walsh.clone())?;
            }
            c.measure(&["bx"])?;
        } else {
            return Err(wrong_round(index));
        }
        Ok(c)
    });
    let mut prover = QuantumProver::new(registers, vec![vec!["img".into()], vec!["bx".into()]], circuit)?;
    if let ClawSource::Oracle(t) = source {
        prover = prover.with_oracles(TruthTableBackend::single("f", t));
    }
    Ok((spec, prover))
}

/// Four-message claw-free protocol over the published permutation.
pub fn toy_clawfree_poq(bits: usize) -> Result<(ProtocolSpec, QuantumProver)> {
    clawfree_poq(bits, ClawSource::Published, true)
}

/// Three-message variant: image, challenge, answer.
pub fn toy_clawfree_3msg(bits: usize) -> Result<(ProtocolSpec, QuantumProver)> {
    clawfree_poq(bits, ClawSource::Published, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poq::{acceptance, optimal_classical_value, prefix_law, transcript_law, Sender};

    #[test]
    fn published_permutation_is_a_bijection() {
        for bits in 1..=4 {
            let mut p = toy_permutation(bits);
            p.sort();
            assert_eq!(p, (0..1 << bits).collect::<Vec<_>>());
        }
    }

    #[test]
    fn owf_soundness_matches_preimage_count() {
        for bits in 1..=3 {
            let (spec, _) = toy_owf_poq(bits).unwrap();
            let v = optimal_classical_value(&spec).unwrap();
            assert!((v - 1.0 / (1 << bits) as f64).abs() < 1e-12);
        }
        let (spec, _) = toy_owf_poq(1).unwrap();
        assert_eq!(spec.soundness(), 0.5);
    }

    #[test]
    fn noisy_inverter_hits_its_fidelity() {
        let (spec, prover) = toy_owf_poq_with_fidelity(2, 0.7).unwrap();
        assert!((acceptance(&spec, &prover).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn clawfree_is_complete_and_nontrivial() {
        let (spec, prover) = toy_clawfree_poq(2).unwrap();
        assert_eq!(spec.len(), 4);
        assert!((acceptance(&spec, &prover).unwrap() - 1.0).abs() < 1e-12);
        let s = optimal_classical_value(&spec).unwrap();
        assert!((s - 0.625).abs() < 1e-12, "{s}");
        let t = spec.gap_inverse().unwrap();
        assert_eq!(t, 3);
        assert!(1.0 - s >= 1.0 / t as f64);
    }

    #[test]
    fn clawfree_challenge_is_uniform_and_images_are_too() {
        let (spec, prover) = toy_clawfree_poq(2).unwrap();
        let law = prefix_law(&spec, &prover, 3).unwrap();
        let mut challenge = [0.0; 2];
        let mut image = [0.0; 4];
        for (t, p) in &law {
            challenge[t.symbol(2).unwrap()] += p;
            image[t.symbol(1).unwrap()] += p;
        }
        assert!(challenge.iter().all(|c| (c - 0.5).abs() < 1e-12));
        assert!(image.iter().all(|c| (c - 0.25).abs() < 1e-12));
    }

    #[test]
    fn claw_state_answers_both_challenges() {
        let (spec, prover) = toy_clawfree_3msg(1).unwrap();
        assert_eq!(spec.len(), 3);
        for leaf in transcript_law(&spec, &prover).unwrap() {
            assert_eq!(leaf.accept, 1.0);
            assert_eq!(leaf.transcript.messages()[0].0, Sender::Prover);
        }
    }

    #[test]
    fn oracle_variant_matches_published() {
        let g = TruthTable::new(8, toy_permutation(3)).unwrap();
        let (a, pa) = clawfree_poq(3, ClawSource::Oracle(g), true).unwrap();
        let (b, pb) = clawfree_poq(3, ClawSource::Published, true).unwrap();
        let la = transcript_law(&a, &pa).unwrap();
        let lb = transcript_law(&b, &pb).unwrap();
        assert_eq!(la.len(), lb.len());
        for (x, y) in la.iter().zip(&lb) {
            assert_eq!(x.transcript, y.transcript);
            assert!((x.prob - y.prob).abs() < 1e-12 && x.accept == y.accept);
        }
        let bad = TruthTable::new(8, vec![0; 8]).unwrap();
        assert!(clawfree_poq(3, ClawSource::Oracle(bad), true).is_err());
    }

    #[test]
    fn caps_are_enforced() {
        assert!(toy_owf_poq(5).is_err());
        assert!(toy_clawfree_poq(4).is_err());
        assert!(toy_owf_poq(0).is_err());
    }
}
