use super::*;
use crate::oracles::execute;
use crate::qsim::gates;
use crate::qsim::rng::seeded;
use proptest::prelude::*;
use rand::Rng;

fn ket0(d: usize) -> Vec<Complex64> {
    let mut v = vec![c64(0.0, 0.0); d];
    v[0] = c64(1.0, 0.0);
    v
}

fn hadamard_spec(domain: usize) -> AdviceSpec {
    AdviceSpec::new(ket0(2), vec![gates::h(); domain]).unwrap()
}

fn close(a: &StateVector, b: &StateVector, tol: f64) -> bool {
    a.distance(b).unwrap() < tol
}

/// Random superposition of `|D⟩|S_{a,q−a}⟩` over combinations that the
/// reflection route must handle for input `x`.
fn random_valid_state(o: &AdviceOracle, x: usize, rng: &mut impl Rng) -> StateVector {
    let layout = RegisterLayout::new(o.registers()).unwrap();
    let mut amps = vec![c64(0.0, 0.0); layout.dim()];
    for db in 0..o.dbs().len() {
        for a in 0..=o.capacity() {
            let present = o.dbs().get(db, x).is_some();
            let ok = if present { a >= 1 } else { a < o.capacity() && o.dbs().size(db) < o.capacity() };
            if !ok {
                continue;
            }
            let c = c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            for (k, v) in o.basis_state(db, a).unwrap().amplitudes().iter().enumerate() {
                amps[k] += c * v;
            }
        }
    }
    StateVector::normalized(layout, amps).unwrap()
}

#[test]
fn case_one_on_the_empty_database() {
    let mut rng = seeded(1);
    let spec = AdviceSpec::random(2, 3, &mut rng);
    let o = AdviceOracle::new("O", spec.clone(), 2).unwrap();
    let s = o.fresh_state().unwrap();
    let out = o.comp(&s, Control::Fixed(1)).unwrap();
    let layout = s.layout().clone();
    let mut expect = vec![c64(0.0, 0.0); layout.dim()];
    for (z, alpha) in spec.psi().iter().enumerate() {
        let db = o.dbs().insert(0, 1, z).unwrap();
        for (k, v) in o.basis_state(db, 1).unwrap().amplitudes().iter().enumerate() {
            expect[k] += alpha * v;
        }
    }
    assert!(close(&out, &StateVector::raw(layout, expect), 1e-12));
}

#[test]
fn comp_undoes_itself() {
    let mut rng = seeded(2);
    let o = AdviceOracle::new("O", AdviceSpec::random(2, 2, &mut rng), 3).unwrap();
    let s = o.fresh_state().unwrap();
    let once = o.comp(&s, Control::Fixed(0)).unwrap();
    assert!(once.distance(&s).unwrap() > 0.1);
    assert!(close(&o.comp(&once, Control::Fixed(0)).unwrap(), &s, 1e-9));
}

#[test]
fn rows_orthogonal_to_psi_are_fixed() {
    let spec = AdviceSpec::new(ket0(2), vec![gates::i()]).unwrap();
    let o = AdviceOracle::new("O", spec, 2).unwrap();
    let db = o.dbs().insert(0, 0, 1).unwrap();
    let s = o.basis_state(db, 1).unwrap();
    assert!(close(&o.comp(&s, Control::Fixed(0)).unwrap(), &s, 1e-12));
    let mut r = exact_reflection(&StateVector::basis(RegisterLayout::new([("p", 2)]).unwrap(), 0)).unwrap();
    let via = o.comp_via_reflection(&s, Control::Fixed(0), &mut r).unwrap();
    assert!(close(&via, &s, 1e-12));
    assert!(r.calls() <= 2);
}

#[test]
fn running_out_of_advice_is_reported() {
    let o = AdviceOracle::new("O", hadamard_spec(3), 1).unwrap();
    let s = o.comp(&o.fresh_state().unwrap(), Control::Fixed(0)).unwrap();
    assert!(matches!(o.comp(&s, Control::Fixed(1)), Err(Error::AdviceExhausted)));
    let mut r = ExactReflection::new(&ket0(2)).unwrap();
    assert!(matches!(o.comp_via_reflection(&s, Control::Fixed(1), &mut r), Err(Error::AdviceExhausted)));
}

#[test]
fn reflection_route_agrees_on_random_valid_states() {
    let mut rng = seeded(3);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let q = 1 + k % 3;
        let domain = 1 + k % 2;
        let spec = AdviceSpec::random(domain, 2, &mut rng);
        let o = AdviceOracle::new("O", spec.clone(), q).unwrap();
        let x = rng.gen_range(0..domain);
        let s = random_valid_state(&o, x, &mut rng);
        let mut r = ExactReflection::new(spec.psi()).unwrap();
        let via = o.comp_via_reflection(&s, Control::Fixed(x), &mut r).unwrap();
        assert!(r.calls() <= 2);
        worst = worst.max(via.distance(&o.comp(&s, Control::Fixed(x)).unwrap()).unwrap());
    }
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn tilde_u_examples() {
    let o = AdviceOracle::new("O", hadamard_spec(2), 2).unwrap();
    let s = o.basis_state(0, 0).unwrap();
    assert!(close(&o.tilde_u(&s, Control::Fixed(1), false).unwrap(), &s, 1e-12));
    let row = o.dbs().insert(0, 1, 0).unwrap();
    let s = o.basis_state(row, 1).unwrap();
    let t = o.tilde_u(&s, Control::Fixed(1), false).unwrap();
    let p = t.probabilities(&o.db_register()).unwrap();
    assert!((p[row] - 0.5).abs() < 1e-12);
    assert!((p[o.dbs().insert(0, 1, 1).unwrap()] - 0.5).abs() < 1e-12);
    let back = o.tilde_u(&t, Control::Fixed(1), true).unwrap();
    assert!(close(&back, &s, 1e-12));
}

fn classical_queries(x: usize, k: usize) -> OracleCircuit {
    let regs: Vec<(String, usize)> =
        std::iter::once(("x".to_string(), 4)).chain((0..k).map(|i| (format!("y{i}"), 4))).collect();
    let mut c = OracleCircuit::new(regs).unwrap();
    c.apply(&["x"], crate::qsim::permutation_matrix(&[x, (x + 1) % 4, (x + 2) % 4, (x + 3) % 4])).unwrap();
    for i in 0..k {
        c.call("O", "x", &format!("y{i}")).unwrap();
    }
    c
}

#[test]
fn classical_query_reads_the_induced_distribution() {
    let mut rng = seeded(4);
    let spec = AdviceSpec::random(3, 3, &mut rng);
    let d = spec.induced().unwrap();
    let c = classical_queries(2, 1);
    let mut b = AdviceBackend::new("O", spec, 1, CompRoute::Explicit).unwrap();
    let (s, _) = execute(&c, &mut b, None).unwrap();
    let p = s.probabilities("y0").unwrap();
    for z in 0..3 {
        assert!((p[z] - d.row(2)[z]).abs() < 1e-9);
    }
    assert!(p[3].abs() < 1e-12);
}

#[test]
fn repeated_classical_queries_agree() {
    let mut rng = seeded(5);
    let spec = AdviceSpec::random(2, 2, &mut rng);
    let c = classical_queries(1, 2);
    for route in [CompRoute::Explicit, CompRoute::Reflection] {
        let mut b = AdviceBackend::new("O", spec.clone(), 2, route).unwrap();
        let (s, _) = execute(&c, &mut b, None).unwrap();
        let joint = response_distribution(&s, &["y0", "y1"]).unwrap();
        assert!(joint.keys().all(|k| k[0] == k[1]), "{joint:?}");
        if route == CompRoute::Reflection {
            assert_eq!(b.comp_applications(), 4);
            assert!(b.reflection_calls() <= 2 * b.comp_applications());
        }
    }
}

#[test]
fn query_free_circuit_is_unaffected() {
    let mut c = OracleCircuit::new([("a", 2)]).unwrap();
    c.unitary("h", &["a"], "H").unwrap().measure(&["a"]).unwrap();
    let (p, e) = advice_equivalence(&c, &hadamard_spec(2), CompRoute::Explicit).unwrap();
    assert!((p - 0.5).abs() < 1e-12 && (e - 0.5).abs() < 1e-12);
}

#[test]
fn equivalence_examples() {
    // point mass: |ψ⟩ = |1⟩ and U_x = I
    let spec = AdviceSpec::new(vec![c64(0.0, 0.0), c64(1.0, 0.0)], vec![gates::i(); 2]).unwrap();
    let mut c = OracleCircuit::new([("x", 2), ("y", 2)]).unwrap();
    c.call("O", "x", "y").unwrap().measure(&["y"]).unwrap();
    let (p, e) = advice_equivalence(&c, &spec, CompRoute::Explicit).unwrap();
    assert!((p - 1.0).abs() < 1e-12 && (e - 1.0).abs() < 1e-12);

    let mut c = OracleCircuit::new([("x", 2), ("y", 2)]).unwrap();
    c.unitary("h", &["x"], "H").unwrap();
    c.call("O", "x", "y").unwrap();
    c.unitary("h2", &["x"], "H").unwrap();
    c.measure(&["x"]).unwrap();
    for route in [CompRoute::Explicit, CompRoute::Reflection] {
        let (p, e) = advice_equivalence(&c, &hadamard_spec(2), route).unwrap();
        assert!((p - e).abs() < 1e-9);
    }
}

#[test]
fn advice_is_consumed_at_most_once_per_query() {
    let mut rng = seeded(6);
    let spec = AdviceSpec::random(2, 2, &mut rng);
    let o = AdviceOracle::new("O", spec, 3).unwrap();
    let layout = RegisterLayout::new([("x", 2), ("y", 2)]).unwrap();
    let mut s = StateVector::zero(layout).tensor(&o.fresh_state().unwrap()).unwrap();
    s = s.apply_unitary(&gates::h(), &["x"]).unwrap();
    for k in 1..=3 {
        s = o.query(&s, "x", "y", None).unwrap();
        assert!(o.max_consumed(&s).unwrap() <= k);
        assert!(o.manifold_residual(&s).unwrap() < 1e-9);
        s = s.apply_unitary(&gates::random_unitary(2, &mut rng), &["x"]).unwrap();
    }
}

#[test]
fn reflection_backend_examples() {
    let l = RegisterLayout::new([("p", 3)]).unwrap();
    let psi = StateVector::normalized(l.clone(), vec![c64(1.0, 0.0), c64(0.0, 1.0), c64(0.5, 0.0)]).unwrap();
    let mut r = exact_reflection(&psi).unwrap();
    let out = r.reflect(&psi, "p").unwrap();
    assert!((out.inner(&psi).unwrap() + 1.0).norm() < 1e-12);
    let orth = StateVector::normalized(l, vec![c64(0.0, 0.0), c64(0.5, 0.0), c64(0.0, 1.0)]).unwrap();
    assert!(orth.inner(&psi).unwrap().norm() < 1e-12);
    assert!(close(&r.reflect(&orth, "p").unwrap(), &orth, 1e-12));
    let m = r.matrix(3).unwrap();
    assert!((&m * &m - CMatrix::identity(3, 3)).camax() < 1e-12);
    assert_eq!(r.calls(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn comp_stays_on_the_manifold(seed in 0u64..1000, x in 0usize..2) {
        let mut rng = seeded(seed);
        let o = AdviceOracle::new("O", AdviceSpec::random(2, 2, &mut rng), 2).unwrap();
        let s = o.comp(&o.fresh_state().unwrap(), Control::Fixed(x)).unwrap();
        prop_assert!(o.manifold_residual(&s).unwrap() < 1e-9);
        let t = o.comp(&s, Control::Fixed(1 - x)).unwrap();
        prop_assert!(o.manifold_residual(&t).unwrap() < 1e-9);
    }
}
