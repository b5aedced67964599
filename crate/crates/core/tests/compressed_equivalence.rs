use poqlab::compressed::csto_equivalence;
use poqlab::oracles::{random_circuit, ProductDistribution, RandomCircuitShape};
use poqlab::qsim::rng::split;
use rand::Rng;

#[test]
fn compressed_oracle_matches_sampled_oracles_on_random_corpus() {
    let mut worst: f64 = 0.0;
    for k in 0..240 {
        let mut rng = split(2024, k);
        let shape = RandomCircuitShape {
            domain: rng.gen_range(1..=3),
            alphabet: rng.gen_range(2..=3),
            queries: rng.gen_range(0..=3),
        };
        let c = random_circuit("O", shape, &mut rng).unwrap();
        let d = ProductDistribution::random(shape.domain, shape.alphabet, &mut rng);
        let (p, e) = csto_equivalence(&c, &d).unwrap();
        worst = worst.max((p - e).abs());
    }
    assert!(worst <= 1e-9, "largest gap {worst:e}");
}
