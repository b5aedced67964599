use poqlab::advice_oracle::{advice_equivalence, AdviceSpec, CompRoute};
use poqlab::oracles::{random_circuit, RandomCircuitShape};
use poqlab::qsim::rng::split;
use rand::Rng;

fn corpus_gap(route: CompRoute, n: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let mut rng = split(4242, k);
        let domain = rng.gen_range(1..=3);
        let d = rng.gen_range(2..=3);
        let queries = rng.gen_range(0..=if d == 3 && domain == 3 { 2 } else { 3 });
        let spec = AdviceSpec::random(domain, d, &mut rng);
        let shape = RandomCircuitShape { domain, alphabet: d, queries };
        let c = random_circuit("O", shape, &mut rng).unwrap();
        let (p, e) = advice_equivalence(&c, &spec, route).unwrap();
        worst = worst.max((p - e).abs());
    }
    worst
}

#[test]
fn advice_oracle_matches_enumeration_on_random_corpus() {
    let gap = corpus_gap(CompRoute::Explicit, 200);
    assert!(gap < 1e-9, "largest gap {gap:e}");
}

#[test]
fn reflection_route_matches_enumeration_on_random_corpus() {
    let gap = corpus_gap(CompRoute::Reflection, 60);
    assert!(gap < 1e-9, "largest gap {gap:e}");
}
