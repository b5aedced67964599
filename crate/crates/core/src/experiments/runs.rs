use rand::{Rng, RngCore};
use rayon::prelude::*;

use super::{fmt, Check, Experiment, Params, Table};
use crate::advice_oracle::{advice_equivalence, AdviceBackend, AdviceSpec, CompRoute};
use crate::compressed::csto_equivalence;
use crate::error::{Error, Result};
use crate::oracle_world::{
    classical_breaker, find_law, find_procedure, sample_world, BreakingOracle, Program, TranscriptTag, WorldParams,
    WorldQuery,
};
use crate::oracles::{
    exact_acceptance, oracle_averaged_acceptance, random_circuit, ProductDistribution, RandomCircuitShape, TruthTable,
};
use crate::ow2h::{verify_ow2h, verify_ow2h_classical};
use crate::poq::{
    acceptance, clawfree_poq, hardcode_classical_adversary, hybrid_ladder, meta_reduction_3round, run_protocol,
    scripted_reduction, toy_clawfree_3msg, toy_clawfree_poq, toy_owf_poq, toy_owf_poq_with_fidelity, ClassicalProver,
    ClawSource, ConditionalSampler, FnProver, ProtocolSpec, QuantumProver, ScriptedReduction, Sender, Transcript,
};
use crate::qsim::rng::{seeded, split};
use crate::sim_reduction::{sim_law, Script, ScriptedReduction as SimScript, Sim};
use crate::transforms::{
    amplify_minischeme, lightning_from_4round, oss_from_4round, parallel_repeat, planted_adversary, round_collapse,
    run_lightning_game, run_token_game, tensor_prover, toy_basis_minischeme, BasisCopier, CloneBanknote, Cloner,
    CloningSigner, ExactCopier, GuessingSigner, OrthogonalJunk, ReuseSigner, TokenAdversary,
};

pub(super) static CATALOG: &[Experiment] = &[
    Experiment {
        name: "csto-equiv",
        operation: "compressed::csto_equivalence",
        checks: "compressed oracle acceptance equals acceptance averaged over sampled oracles",
        statistical: false,
        params: &[("instances", "200"), ("max_domain", "3"), ("max_alphabet", "3"), ("max_queries", "3")],
        run: csto_equiv,
    },
    Experiment {
        name: "advo-equiv",
        operation: "advice_oracle::advice_equivalence",
        checks: "advice oracle simulates the induced oracle distribution perfectly, via both Comp routes, with at most two reflections per Comp",
        statistical: false,
        params: &[("instances", "100"), ("max_domain", "3"), ("max_dim", "4"), ("max_queries", "2")],
        run: advo_equiv,
    },
    Experiment {
        name: "ow2h",
        operation: "ow2h::verify_ow2h",
        checks: "extractor finds a differing row: E[SD(D_x, D'_x)] >= delta^2/(16 q^2)",
        statistical: true,
        params: &[
            ("instances", "100"),
            ("trials", "10000"),
            ("max_domain", "3"),
            ("max_alphabet", "3"),
            ("max_queries", "2"),
            ("same", "false"),
        ],
        run: ow2h,
    },
    Experiment {
        name: "ow2h-classical",
        operation: "ow2h::verify_ow2h_classical",
        checks: "extractor hits an input where two truth tables differ: Pr >= delta^2/(16 q^2)",
        statistical: true,
        params: &[("instances", "100"), ("trials", "10000"), ("max_domain", "3"), ("max_alphabet", "3"), ("max_queries", "2")],
        run: ow2h_classical,
    },
    Experiment {
        name: "puzzle-extract",
        operation: "poq::hybrid_ladder",
        checks: "completeness lost by a classical imitation is at most the sum of per-round puzzle distances",
        statistical: false,
        params: &[("bits", "1"), ("seed_adversaries", "3")],
        run: puzzle_extract,
    },
    Experiment {
        name: "meta3",
        operation: "poq::meta_reduction_3round",
        checks: "advice-oracle simulation of a three-message prover matches the hardcoded adversary exactly",
        statistical: false,
        params: &[("bits", "1"), ("max_rewinds", "2")],
        run: meta3,
    },
    Experiment {
        name: "collapse",
        operation: "transforms::round_collapse",
        checks: "collapsed protocol keeps completeness with exact copies and its exhaustive soundness does not grow with p",
        statistical: false,
        params: &[("bits", "1"), ("max_p", "2")],
        run: collapse,
    },
    Experiment {
        name: "repeat",
        operation: "transforms::parallel_repeat",
        checks: "threshold repetition: honest acceptance follows the binomial tail; exhaustive classical value stays below it",
        statistical: true,
        params: &[("fidelity", "0.7"), ("copies", "8"), ("threshold", "0.6"), ("trials", "10000")],
        run: repeat,
    },
    Experiment {
        name: "amplify",
        operation: "transforms::amplify_minischeme",
        checks: "amplified scheme uses lambda*t copies at threshold c - 1/(2t); planted cloner wins at least the reduction's bound",
        statistical: true,
        params: &[("c", "0.98"), ("n", "2"), ("s", "0.25"), ("lambda", "2"), ("t", "2"), ("trials", "10000")],
        run: amplify,
    },
    Experiment {
        name: "token",
        operation: "transforms::token_from_poq, transforms::oss_from_4round",
        checks: "token and one-shot signature correctness equal protocol completeness; game rates match exact win probabilities",
        statistical: true,
        params: &[("bits", "1"), ("copies", "2"), ("trials", "10000")],
        run: token,
    },
    Experiment {
        name: "lightning",
        operation: "transforms::lightning_from_4round",
        checks: "lightning correctness equals protocol completeness; cloning game rates match exact win probabilities",
        statistical: true,
        params: &[("bits", "1"), ("copies", "2"), ("trials", "10000")],
        run: lightning,
    },
    Experiment {
        name: "breaker",
        operation: "oracle_world::classical_breaker",
        checks: "classical prover with breaking oracles accepts exactly as often as the honest quantum prover; forged tags are refused",
        statistical: true,
        params: &[("lambda_f", "3"), ("lambda_o", "3"), ("lambda_h", "3"), ("trials", "10000")],
        run: breaker,
    },
    Experiment {
        name: "find",
        operation: "oracle_world::find_procedure",
        checks: "sampled Find matches its exact law, including the chance of returning a point where f and f' differ",
        statistical: true,
        params: &[("lambda_f", "2"), ("lambda_o", "2"), ("queries", "16"), ("trials", "10000")],
        run: find,
    },
    Experiment {
        name: "sim4",
        operation: "sim_reduction::sim_law",
        checks: "clone database bookkeeping: k <= n rewinds never abort, k = n + 1 always aborts, one exact clone is the honest prover",
        statistical: false,
        params: &[("bits", "1"), ("parts", "3")],
        run: sim4,
    },
];

fn random_shape(p: &Params<'_>, rng: &mut impl Rng, alphabet_key: &str, alphabet_cap: usize) -> Result<RandomCircuitShape> {
    let domain = p.bounded("max_domain", 1, 3)?;
    let alphabet = p.bounded(alphabet_key, 2, alphabet_cap)?;
    let queries = p.bounded("max_queries", 0, 3)?;
    Ok(RandomCircuitShape {
        domain: rng.gen_range(1..=domain),
        alphabet: rng.gen_range(2..=alphabet),
        queries: rng.gen_range(1..=queries.max(1)).min(queries),
    })
}

fn per_instance<T: Send>(n: usize, seed: u64, f: impl Fn(usize, &mut dyn RngCore) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(|i| f(i, &mut split(seed, i as u64))).collect()
}

fn csto_equiv(p: &Params<'_>, seed: u64) -> Result<Table> {
    let n = p.usize("instances")?;
    let mut t = Table::new("csto-equiv", &["instance", "domain", "alphabet", "queries", "compressed", "enumerated"]);
    p.bounded("max_alphabet", 2, 3)?;
    let rows = per_instance(n, seed, |_, r| {
        let mut r = seeded(r.next_u64());
        let shape = random_shape(p, &mut r, "max_alphabet", 3)?;
        let d = ProductDistribution::random(shape.domain, shape.alphabet, &mut r);
        let c = random_circuit("O", shape, &mut r)?;
        let (a, b) = csto_equivalence(&c, &d)?;
        Ok((shape, a, b))
    })?;
    for (i, (s, a, b)) in rows.into_iter().enumerate() {
        t.push(
            vec![i.to_string(), s.domain.to_string(), s.alphabet.to_string(), s.queries.to_string(), fmt(a), fmt(b)],
            Check::Equal { measured: a, target: b },
        );
    }
    Ok(t)
}

fn advo_equiv(p: &Params<'_>, seed: u64) -> Result<Table> {
    let n = p.usize("instances")?;
    let mut t = Table::new("advo-equiv", &["instance", "quantity", "domain", "dim", "queries", "value"]);
    p.bounded("max_dim", 2, 4)?;
    let rows = per_instance(n, seed, |_, r| {
        let mut r = seeded(r.next_u64());
        let shape = random_shape(p, &mut r, "max_dim", 4)?;
        let spec = AdviceSpec::random(shape.domain, shape.alphabet, &mut r);
        let c = random_circuit("O", shape, &mut r)?;
        let (explicit, enumerated) = advice_equivalence(&c, &spec, CompRoute::Explicit)?;
        let mut b = AdviceBackend::new("O", spec.clone(), c.query_count().max(1), CompRoute::Reflection)?;
        let reflected = exact_acceptance(&c, &mut b)?;
        let budget = (b.reflection_calls(), 2 * b.comp_applications());
        let averaged = oracle_averaged_acceptance(&c, &spec.induced()?)?;
        Ok((shape, explicit, enumerated, reflected, averaged, budget))
    })?;
    for (i, (s, explicit, enumerated, reflected, averaged, (calls, cap))) in rows.into_iter().enumerate() {
        let head = |q: &str, v: f64| {
            vec![i.to_string(), q.into(), s.domain.to_string(), s.alphabet.to_string(), s.queries.to_string(), fmt(v)]
        };
        t.push(head("explicit", explicit), Check::Equal { measured: explicit, target: enumerated });
        t.push(head("reflection", reflected), Check::Equal { measured: reflected, target: averaged });
        t.push(head("reflection_calls", calls as f64), Check::AtMost { measured: calls as f64, target: cap as f64 });
    }
    Ok(t)
}

fn ow2h(p: &Params<'_>, seed: u64) -> Result<Table> {
    let n = p.usize("instances")?;
    let trials = p.usize("trials")?;
    let same = p.bool("same")?;
    p.bounded("max_alphabet", 2, 3)?;
    let mut t = Table::new("ow2h", &["instance", "domain", "alphabet", "q", "delta", "expected_sd", "exact_expected_sd", "bound"]);
    let rows = per_instance(n, seed, |i, r| {
        let mut r = seeded(r.next_u64());
        let shape = random_shape(p, &mut r, "max_alphabet", 3)?;
        let d = ProductDistribution::random(shape.domain, shape.alphabet, &mut r);
        let d_alt = if same { d.clone() } else { ProductDistribution::random(shape.domain, shape.alphabet, &mut r) };
        let c = random_circuit("O", shape, &mut r)?;
        Ok((shape, verify_ow2h(&c, &d, &d_alt, trials, seed ^ i as u64)?))
    })?;
    for (i, (s, rep)) in rows.into_iter().enumerate() {
        t.push(
            vec![
                i.to_string(),
                s.domain.to_string(),
                s.alphabet.to_string(),
                rep.q.to_string(),
                fmt(rep.delta),
                fmt(rep.expected_sd),
                fmt(rep.exact_expected_sd),
                fmt(rep.bound),
            ],
            Check::NotBelow { measured: rep.expected_sd, target: rep.bound, sigma: rep.slack / 3.0 },
        );
    }
    Ok(t)
}

fn ow2h_classical(p: &Params<'_>, seed: u64) -> Result<Table> {
    let n = p.usize("instances")?;
    let trials = p.usize("trials")?;
    p.bounded("max_alphabet", 2, 3)?;
    let mut t = Table::new("ow2h-classical", &["instance", "domain", "differing", "q", "delta", "hit_prob", "exact_hit_prob", "bound"]);
    let rows = per_instance(n, seed, |i, r| {
        let mut r = seeded(r.next_u64());
        let shape = random_shape(p, &mut r, "max_alphabet", 3)?;
        let o: Vec<usize> = (0..shape.domain).map(|_| r.gen_range(0..shape.alphabet)).collect();
        let mut alt = o.clone();
        let x = r.gen_range(0..shape.domain);
        alt[x] = (alt[x] + r.gen_range(1..shape.alphabet)) % shape.alphabet;
        let (o, alt) = (TruthTable::new(shape.alphabet, o)?, TruthTable::new(shape.alphabet, alt)?);
        let c = random_circuit("O", shape, &mut r)?;
        let rep = verify_ow2h_classical(&c, &o, &alt, trials, seed ^ i as u64)?;
        Ok((shape, o.differing_inputs(&alt).len(), rep))
    })?;
    for (i, (s, diff, rep)) in rows.into_iter().enumerate() {
        let sigma = (rep.hit_prob * (1.0 - rep.hit_prob) / rep.trials.max(1) as f64).sqrt();
        t.push(
            vec![
                i.to_string(),
                s.domain.to_string(),
                diff.to_string(),
                rep.q.to_string(),
                fmt(rep.delta),
                fmt(rep.hit_prob),
                fmt(rep.exact_hit_prob),
                fmt(rep.bound),
            ],
            Check::NotBelow { measured: rep.hit_prob, target: rep.bound, sigma },
        );
    }
    Ok(t)
}

fn uniform_prover(spec: &ProtocolSpec) -> impl ClassicalProver + '_ {
    FnProver(move |t: &Transcript| {
        let a = spec.rounds()[t.len()].alphabet;
        (0..a).map(|m| (m, 1.0 / a as f64)).collect()
    })
}

/// Uniform on verifier turns, the honest conditional law on prover turns.
struct Imitator<'a>(&'a ProtocolSpec, &'a QuantumProver);

impl ClassicalProver for Imitator<'_> {
    fn next_message(&self, t: &Transcript) -> Result<Vec<(usize, f64)>> {
        let r = self.0.rounds()[t.len()];
        if r.sender == Sender::Verifier {
            Ok((0..r.alphabet).map(|m| (m, 1.0 / r.alphabet as f64)).collect())
        } else {
            ConditionalSampler(self.1).next_message(t)
        }
    }
}

fn puzzle_extract(p: &Params<'_>, seed: u64) -> Result<Table> {
    let bits = p.bounded("bits", 1, 2)?;
    let extra = p.bounded("seed_adversaries", 0, 8)?;
    let protocols: Vec<(ProtocolSpec, QuantumProver)> = vec![
        toy_owf_poq(bits)?,
        toy_owf_poq_with_fidelity(bits, 0.7)?,
        toy_clawfree_3msg(bits)?,
        toy_clawfree_poq(bits)?,
    ];
    let mut t = Table::new("puzzle-extract", &["protocol", "adversary", "quantity", "value"]);
    let mut rng = seeded(seed);
    for (spec, prover) in &protocols {
        let mut adversaries: Vec<(String, Box<dyn ClassicalProver + '_>)> = vec![
            ("conditional".into(), Box::new(Imitator(spec, prover))),
            ("uniform".into(), Box::new(uniform_prover(spec))),
        ];
        for j in 0..extra {
            adversaries.push((format!("hardcoded-{j}"), Box::new(hardcode_classical_adversary(spec, prover, &mut rng)?)));
        }
        for (name, adv) in &adversaries {
            let ladder = hybrid_ladder(spec, prover, adv.as_ref())?;
            for (i, (gap, sd)) in ladder.gaps().iter().zip(&ladder.sd).enumerate() {
                t.push(
                    vec![spec.name().into(), name.clone(), format!("gap_{}", i + 1), fmt(*gap)],
                    Check::AtMost { measured: *gap, target: *sd },
                );
            }
            t.push(
                vec![spec.name().into(), name.clone(), "total_gap".into(), fmt(ladder.total_gap())],
                Check::AtMost { measured: ladder.total_gap(), target: ladder.sd_sum() },
            );
        }
    }
    Ok(t)
}

fn meta3(p: &Params<'_>, _seed: u64) -> Result<Table> {
    let bits = p.bounded("bits", 1, 2)?;
    let k = p.bounded("max_rewinds", 1, 2)?;
    let (spec, prover) = toy_clawfree_3msg(bits)?;
    let meta = meta_reduction_3round(&spec, &prover)?;
    let mut kinds = vec![ScriptedReduction::StraightLine, ScriptedReduction::RepeatedQuery];
    kinds.extend((1..=k).map(ScriptedReduction::Rewind));
    let mut t = Table::new("meta3", &["reduction", "route", "queries", "simulated", "adversary"]);
    for kind in kinds {
        let c = scripted_reduction(&meta, kind)?;
        let target = meta.adversary_acceptance(&c)?;
        for (route, name) in [(CompRoute::Explicit, "explicit"), (CompRoute::Reflection, "reflection")] {
            let sim = meta.simulate(&c, c.query_count(), route)?;
            t.push(
                vec![format!("{kind:?}"), name.into(), c.query_count().to_string(), fmt(sim), fmt(target)],
                Check::Equal { measured: sim, target },
            );
        }
    }
    Ok(t)
}

fn collapse(p: &Params<'_>, _seed: u64) -> Result<Table> {
    let bits = p.bounded("bits", 1, 1)?;
    let max_p = p.bounded("max_p", 1, 2)?;
    let (spec, prover) = toy_clawfree_poq(bits)?;
    let mut t = Table::new("collapse", &["p", "quantity", "value"]);
    let mut first = None;
    for k in 1..=max_p {
        let col = round_collapse(&spec, k)?;
        let honest = col
            .honest_prover(&prover, Some(&ExactCopier))
            .ok_or_else(|| Error::InvalidArgument("no honest prover for the collapsed protocol".into()))?;
        let c = acceptance(&col.spec, &honest)?;
        t.push(vec![k.to_string(), "completeness".into(), fmt(c)], Check::Equal { measured: c, target: spec.completeness() });
        let s = col.spec.soundness();
        let s1 = *first.get_or_insert(s);
        t.push(vec![k.to_string(), "soundness".into(), fmt(s)], Check::AtMost { measured: s, target: s1 });
        t.push(vec![k.to_string(), "gap".into(), fmt(c - s)], Check::Below { measured: s, target: c });
    }
    Ok(t)
}

fn repeat(p: &Params<'_>, seed: u64) -> Result<Table> {
    let fidelity = p.f64("fidelity")?;
    let k = p.bounded("copies", 1, 8)?;
    let threshold = p.f64("threshold")?;
    let trials = p.usize("trials")?;
    let (spec, prover) = toy_owf_poq_with_fidelity(1, fidelity)?;
    let mut t = Table::new("repeat", &["copies", "quantity", "value"]);
    for j in 1..=k {
        let r = parallel_repeat(&spec, j, Some(threshold))?;
        if !r.exhaustive_soundness {
            return Err(Error::CapViolation(format!("{j} copies are beyond exhaustive search")));
        }
        t.push(
            vec![j.to_string(), "classical_value".into(), fmt(r.spec.soundness())],
            Check::Below { measured: r.spec.soundness(), target: r.spec.completeness() },
        );
    }
    let r = parallel_repeat(&spec, k, Some(threshold))?;
    let honest = tensor_prover(&spec, &prover, k)?;
    let wins = per_instance(trials, seed, |_, rng| Ok(run_protocol(&r.spec, &honest, rng)?.1))?;
    let rate = wins.iter().filter(|w| **w).count() as f64 / trials.max(1) as f64;
    let target = r.binomial(fidelity);
    let sigma = (target * (1.0 - target) / trials.max(1) as f64).sqrt();
    t.push(vec![k.to_string(), "honest_rate".into(), fmt(rate)], Check::Near { measured: rate, target, sigma });
    Ok(t)
}

fn amplify(p: &Params<'_>, seed: u64) -> Result<Table> {
    let (c, n, s) = (p.f64("c")?, p.bounded("n", 1, 4)?, p.f64("s")?);
    let lambda = p.bounded("lambda", 1, 4)?;
    let tt = p.bounded("t", 1, 4)?;
    let trials = p.usize("trials")?;
    let mut base = toy_basis_minischeme(1, c, n, s)?;
    base.lambda = lambda;
    let amp = amplify_minischeme(&base, tt)?;
    let mut t = Table::new("amplify", &["quantity", "value"]);
    let l = (lambda * tt) as f64;
    t.push(vec!["copies".into(), amp.copies.to_string()], Check::Equal { measured: amp.copies as f64, target: l });
    let frac = c - 1.0 / (2.0 * tt as f64);
    let needed = (frac * l - 1e-9).ceil().max(0.0);
    t.push(vec!["needed".into(), amp.needed.to_string()], Check::Equal { measured: amp.needed as f64, target: needed });
    let rep = planted_adversary(&amp, &BasisCopier, trials, &mut seeded(seed))?;
    t.push(
        vec!["planted_rate".into(), fmt(rep.rate)],
        Check::NotBelow { measured: rep.rate, target: rep.bound, sigma: rep.sigma },
    );
    t.push(
        vec!["planted_exact".into(), fmt(rep.exact_mean)],
        Check::AtLeast { measured: rep.exact_mean, target: rep.bound },
    );
    Ok(t)
}

fn token(p: &Params<'_>, seed: u64) -> Result<Table> {
    let bits = p.bounded("bits", 1, 2)?;
    let n = p.bounded("copies", 1, 3)?;
    let trials = p.usize("trials")?;
    let (spec, prover) = toy_clawfree_poq(bits)?;
    let schemes = [("token", crate::transforms::token_from_poq(&spec, &prover)?), ("oss", oss_from_4round(&spec, &prover)?)];
    let mut t = Table::new("token", &["scheme", "adversary", "value"]);
    let mut rng = seeded(seed);
    for (name, scheme) in &schemes {
        let corr = scheme.correctness()?;
        t.push(vec![name.to_string(), "honest".into(), fmt(corr)], Check::Equal { measured: corr, target: spec.completeness() });
        let adversaries: [(&str, &dyn TokenAdversary); 3] =
            [("reuse", &ReuseSigner), ("guess", &GuessingSigner), ("basis-clone", &CloningSigner(&BasisCopier))];
        for (aname, adv) in adversaries {
            let rep = run_token_game(scheme, adv, n, trials, &mut rng)?;
            t.push(
                vec![name.to_string(), aname.into(), fmt(rep.rate)],
                Check::Near { measured: rep.rate, target: rep.exact_mean, sigma: rep.sigma.max(exact_sigma(rep.exact_mean, trials)) },
            );
        }
    }
    Ok(t)
}

fn exact_sigma(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials.max(1) as f64).sqrt()
}

fn lightning(p: &Params<'_>, seed: u64) -> Result<Table> {
    let bits = p.bounded("bits", 1, 2)?;
    let n = p.bounded("copies", 1, 3)?;
    let trials = p.usize("trials")?;
    let (spec, prover) = toy_clawfree_poq(bits)?;
    let scheme = lightning_from_4round(&spec, &prover)?;
    let mut t = Table::new("lightning", &["adversary", "value"]);
    let corr = scheme.correctness()?;
    t.push(vec!["honest".into(), fmt(corr)], Check::Equal { measured: corr, target: spec.completeness() });
    let mut rng = seeded(seed);
    let cloners: [(&str, &dyn Cloner); 3] = [("exact", &ExactCopier), ("basis", &BasisCopier), ("junk", &OrthogonalJunk)];
    for (name, cl) in cloners {
        let rep = run_lightning_game(&scheme, &CloneBanknote(cl), n, trials, &mut rng)?;
        t.push(
            vec![name.into(), fmt(rep.rate)],
            Check::Near { measured: rep.rate, target: rep.exact_mean, sigma: rep.sigma.max(exact_sigma(rep.exact_mean, trials)) },
        );
    }
    Ok(t)
}

fn breaker(p: &Params<'_>, seed: u64) -> Result<Table> {
    let lf = p.bounded("lambda_f", 1, 3)?;
    let lo = p.bounded("lambda_o", 1, 4)?;
    let lh = p.bounded("lambda_h", 1, 4)?;
    let trials = p.usize("trials")?;
    let mut rng = seeded(seed);
    let world = sample_world(WorldParams::new(lf, lo, lh, 2)?, &mut rng)?;
    let (spec, prover) = clawfree_poq(lf, ClawSource::Oracle(world.f().clone()), true)?;
    let mut t = Table::new("breaker", &["quantity", "value"]);
    let rep = classical_breaker(&world, &spec, &prover, trials, &mut rng)?;
    t.push(
        vec!["breaker_acceptance".into(), fmt(rep.rate)],
        Check::Near { measured: rep.rate, target: rep.honest, sigma: rep.sigma.max(exact_sigma(rep.honest, trials)) },
    );
    t.push(vec!["classical_soundness".into(), fmt(spec.soundness())], Check::Below { measured: spec.soundness(), target: rep.honest });

    // exhaustive single-bit corruption of the first tag, for every challenge
    let mut oracle = BreakingOracle::new(&world, prover.layout().clone(), rng.next_u64());
    let start = Transcript::from_messages(vec![(Sender::Verifier, 0)]);
    let c1 = prover.round_circuit(1, &start)?;
    let (s1, h1) = oracle
        .query(&TranscriptTag::default(), &c1, 1)?
        .ok_or_else(|| Error::InvalidArgument("first breaking query refused".into()))?;
    let (mut refused, mut total) = (0usize, 0usize);
    for challenge in 0..spec.rounds()[2].alphabet {
        let t3 = start.with(Sender::Prover, s1).with(Sender::Verifier, challenge);
        let c2 = prover.round_circuit(3, &t3)?;
        for bit in 0..lh {
            let forged = TranscriptTag { v: vec![(c1.clone(), s1)], sigma: Some(h1 ^ (1 << bit)) };
            total += 1;
            refused += usize::from(oracle.query(&forged, &c2, 2)?.is_none());
        }
    }
    let frac = refused as f64 / total.max(1) as f64;
    t.push(vec!["forged_tags_refused".into(), fmt(frac)], Check::Equal { measured: frac, target: 1.0 });
    Ok(t)
}

fn find(p: &Params<'_>, seed: u64) -> Result<Table> {
    let lf = p.bounded("lambda_f", 1, 3)?;
    let lo = p.bounded("lambda_o", 1, 3)?;
    let queries = p.usize("queries")?;
    let trials = p.usize("trials")?;
    let mut rng = seeded(seed);
    let world = sample_world(WorldParams::new(lf, lo, 1, 1)?, &mut rng)?;
    let n = 1usize << lf;
    let mut alt = world.f().outputs().to_vec();
    let x = rng.gen_range(0..n);
    alt[x] = (alt[x] + 1) % n;
    let f_alt = TruthTable::new(n, alt)?;
    let differing = world.f().differing_inputs(&f_alt);
    let hit = |q: &WorldQuery| matches!(q, WorldQuery::F(x) if differing.contains(x));
    let mut t = Table::new("find", &["query", "exact_hit", "sampled_hit"]);
    let programs = 1usize << lo;
    for j in 0..queries {
        let y = if j % 4 == 3 {
            WorldQuery::F(rng.gen_range(0..n))
        } else {
            let prog = Program::decode(rng.gen_range(0..programs));
            let obfuscated = world.obfuscate(prog, rng.gen_range(0..programs))?;
            WorldQuery::Eval { obfuscated, input: rng.gen_range(0..n) }
        };
        let law = find_law(&world, &f_alt, y);
        let exact: f64 = law.iter().filter(|(q, _)| hit(q)).map(|(_, w)| w).sum();
        let total: f64 = law.iter().map(|l| l.1).sum();
        let label = format!("{y:?}");
        t.push(vec![label.clone(), fmt(exact), "law_total".into()], Check::Equal { measured: total, target: 1.0 });
        let base = rng.next_u64();
        let hits = per_instance(trials, base, |_, r| Ok(hit(&find_procedure(&world, &f_alt, y, r))))?;
        let rate = hits.iter().filter(|h| **h).count() as f64 / trials.max(1) as f64;
        t.push(
            vec![label, fmt(exact), fmt(rate)],
            Check::Near { measured: rate, target: exact, sigma: exact_sigma(exact, trials) },
        );
    }
    Ok(t)
}

fn sim4(p: &Params<'_>, _seed: u64) -> Result<Table> {
    let bits = p.bounded("bits", 1, 1)?;
    let n = p.bounded("parts", 1, 3)?;
    let (spec, prover) = toy_clawfree_poq(bits)?;
    let honest = acceptance(&spec, &prover)?;
    let mut t = Table::new("sim4", &["reduction", "parts", "quantity", "value"]);
    let identity = Sim::new(&spec, &prover, &ExactCopier, 1)?;
    let law = sim_law(&identity, &SimScript::new(&spec, Script::StraightLine)?)?;
    t.push(
        vec!["StraightLine".into(), "1".into(), "acceptance".into(), fmt(law.accept)],
        Check::Equal { measured: law.accept, target: honest },
    );
    let mut corpus: Vec<Script> = (1..=n + 1).map(Script::RewindLast).collect();
    corpus.extend([Script::StraightLine, Script::Restart(2)]);
    for script in corpus {
        let sim = Sim::new(&spec, &prover, &ExactCopier, n)?;
        let law = sim_law(&sim, &SimScript::new(&spec, script)?)?;
        let name = format!("{script:?}");
        let (want_abort, spent) = match script {
            Script::RewindLast(k) if k > n => (1.0, n),
            Script::RewindLast(k) => (0.0, k),
            Script::StraightLine => (0.0, 1),
            Script::Restart(k) => (0.0, k),
        };
        t.push(vec![name.clone(), n.to_string(), "abort".into(), fmt(law.abort)], Check::Equal { measured: law.abort, target: want_abort });
        let wrong = law.leaves.iter().filter(|l| l.measured != spent).count() as f64;
        t.push(vec![name, n.to_string(), "misused_parts".into(), fmt(wrong)], Check::Equal { measured: wrong, target: 0.0 });
    }
    Ok(t)
}
