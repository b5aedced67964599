use poqlab::oracles::{random_circuit, ProductDistribution, RandomCircuitShape};
use poqlab::ow2h::verify_ow2h;
use poqlab::qsim::rng::split;
use rand::Rng;

#[test]
fn ow2h_inequality_holds_on_random_instances() {
    for k in 0..120 {
        let mut rng = split(77, k);
        let shape = RandomCircuitShape {
            domain: rng.gen_range(1..=3),
            alphabet: rng.gen_range(2..=3),
            queries: rng.gen_range(1..=3),
        };
        let c = random_circuit("O", shape, &mut rng).unwrap();
        let d = ProductDistribution::random(shape.domain, shape.alphabet, &mut rng);
        let d2 = ProductDistribution::random(shape.domain, shape.alphabet, &mut rng);
        let r = verify_ow2h(&c, &d, &d2, 400, k).unwrap();
        assert!(r.holds, "instance {k}\n{r}");
        assert!(r.exact_expected_sd >= r.bound - 1e-12, "instance {k}\n{r}");
    }
}
