//! A toy oracle world: a random permutation `f`, a random injective
//! obfuscation table `obf`, the evaluator `Eval` for obfuscated classical
//! programs, a random hash `H` with its checker, the post-selected states
//! `|ψ_v⟩`, the breaking oracles built on them, the classical breaker that
//! uses them to imitate any quantum prover, and `Find`.

mod breaker;

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use sha2::{Digest, Sha256};

pub use breaker::{
    breaking_law, breaking_sample, build_psi_v, classical_breaker, BreakerReport, BreakingOracle, TranscriptTag,
};

use crate::error::{Error, Result};
use crate::oracles::{TruthTable, TruthTableBackend};

/// Largest bit length of any world parameter.
pub const PARAM_CAP: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorldParams {
    /// Input bits of `f`.
    pub lambda_f: usize,
    /// Bits of each half `(C, r)` of an `obf` input; outputs have three times as many.
    pub lambda_o: usize,
    /// Output bits of `H`.
    pub lambda_h: usize,
    /// Number of breaking oracles.
    pub rounds: usize,
}

impl WorldParams {
    pub fn new(lambda_f: usize, lambda_o: usize, lambda_h: usize, rounds: usize) -> Result<Self> {
        for (name, v) in [("lambda_f", lambda_f), ("lambda_o", lambda_o), ("lambda_h", lambda_h), ("rounds", rounds)] {
            if v == 0 || v > PARAM_CAP {
                return Err(Error::CapViolation(format!("{name} = {v} must lie in 1..={PARAM_CAP}")));
            }
        }
        Ok(WorldParams { lambda_f, lambda_o, lambda_h, rounds })
    }
}

/// Classical program encoded by a `λ_o`-bit string: the low two bits count
/// `f` applications and the remaining bits are an output mask.
/// `z ↦ f^{k}(z) ⊕ mask`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Program {
    pub f_calls: usize,
    pub mask: usize,
}

impl Program {
    pub fn decode(code: usize) -> Self {
        Program { f_calls: code & 3, mask: code >> 2 }
    }

    pub fn encode(&self) -> usize {
        (self.mask << 2) | (self.f_calls & 3)
    }

    pub const IDENTITY: Program = Program { f_calls: 0, mask: 0 };
    pub const F: Program = Program { f_calls: 1, mask: 0 };

    /// Output on `z` and the `f`-queries made along the way.
    pub fn run(&self, f: &TruthTable, z: usize) -> (Option<usize>, Vec<usize>) {
        let mut x = z;
        let mut queries = vec![];
        for _ in 0..self.f_calls {
            queries.push(x);
            match f.get(x) {
                Some(y) => x = y,
                None => return (None, queries),
            }
        }
        let n = f.domain();
        (Some((x ^ self.mask) % n.max(1)), queries)
    }
}

/// A query to the world: either `f` directly or `Eval` on `(C̃, z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WorldQuery {
    F(usize),
    Eval { obfuscated: usize, input: usize },
}

/// One sampled oracle world.
#[derive(Clone, Debug)]
pub struct World {
    pub params: WorldParams,
    pub seed: u64,
    f: TruthTable,
    obf: TruthTable,
    obf_inverse: Vec<Option<usize>>,
}

/// Uniform permutation `f`, uniform injective `obf` and a hash keyed by a fresh seed.
pub fn sample_world(params: WorldParams, rng: &mut dyn RngCore) -> Result<World> {
    let n = 1usize << params.lambda_f;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let f = TruthTable::new(n, perm)?;
    let dom = 1usize << (2 * params.lambda_o);
    let range = 1usize << (3 * params.lambda_o);
    let mut img: Vec<usize> = (0..range).collect();
    img.shuffle(rng);
    img.truncate(dom);
    let obf = TruthTable::new(range, img)?;
    let seed = rng.gen();
    World::from_tables(params, f, obf, seed)
}

fn hash_bits(seed: u64, key: &str, bits: usize) -> usize {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    let d = h.finalize();
    let mut w = [0u8; 8];
    w.copy_from_slice(&d[..8]);
    (u64::from_le_bytes(w) as usize) & ((1usize << bits) - 1)
}

impl World {
    /// A world with given tables; `f` must be a permutation and `obf` injective.
    pub fn from_tables(params: WorldParams, f: TruthTable, obf: TruthTable, seed: u64) -> Result<World> {
        let n = 1usize << params.lambda_f;
        let mut seen = vec![false; n];
        if f.domain() != n || f.alphabet() != n || f.outputs().iter().any(|&y| std::mem::replace(&mut seen[y], true)) {
            return Err(Error::InvalidArgument(format!("f must permute {n} points")));
        }
        let dom = 1usize << (2 * params.lambda_o);
        let range = 1usize << (3 * params.lambda_o);
        if obf.domain() != dom || obf.alphabet() != range {
            return Err(Error::InvalidArgument("obf has the wrong shape".into()));
        }
        let mut obf_inverse = vec![None; range];
        for (x, &y) in obf.outputs().iter().enumerate() {
            if obf_inverse[y].replace(x).is_some() {
                return Err(Error::InvalidArgument(format!("obf collides at {y}")));
            }
        }
        Ok(World { params, seed, f, obf, obf_inverse })
    }

    pub fn f(&self) -> &TruthTable {
        &self.f
    }

    pub fn obf(&self) -> &TruthTable {
        &self.obf
    }

    /// `obf(C, r)`.
    pub fn obfuscate(&self, program: Program, r: usize) -> Result<usize> {
        let half = 1usize << self.params.lambda_o;
        let c = program.encode();
        if c >= half || r >= half {
            return Err(Error::AlphabetMismatch(format!("({c}, {r}) is outside obf's domain")));
        }
        Ok(self.obf.outputs()[c * half + r])
    }

    /// `obf⁻¹(C̃) = (C, r)`, if `C̃` is in the image.
    pub fn deobfuscate(&self, obfuscated: usize) -> Option<(Program, usize)> {
        let half = 1usize << self.params.lambda_o;
        self.obf_inverse.get(obfuscated).copied().flatten().map(|x| (Program::decode(x / half), x % half))
    }

    /// `Eval(C̃, z)`; `None` is `⊥`.
    pub fn eval(&self, obfuscated: usize, z: usize) -> Option<usize> {
        eval_with(self, &self.f, obfuscated, z)
    }

    /// `H(key)`, a `λ_h`-bit value.
    pub fn hash(&self, key: &str) -> usize {
        hash_bits(self.seed, key, self.params.lambda_h)
    }

    /// `Check(key, σ) = 1{H(key) = σ ≠ ⊥}`.
    pub fn check(&self, key: &str, sigma: Option<usize>) -> bool {
        sigma == Some(self.hash(key))
    }

    /// Symbol used for `⊥` in the `eval` slot: `2^{λ_f}`, in a response register of `2^{λ_f + 1}` symbols.
    pub fn eval_bottom(&self) -> usize {
        self.f.domain()
    }

    /// Slots `f` and, when the input space has at most 2^10 points, `eval`
    /// (input `C̃·2^{λ_f} + z`).
    pub fn backend(&self) -> Result<TruthTableBackend> {
        let mut b = TruthTableBackend::single("f", self.f.clone());
        let n = self.f.domain();
        let range = self.obf.alphabet();
        if range * n <= 1 << 10 {
            let out = (0..range * n).map(|x| self.eval(x / n, x % n).unwrap_or(n)).collect();
            b.insert("eval", TruthTable::new(2 * n, out)?);
        }
        Ok(b)
    }

    /// Deterministic text dump of the tables and the hash seed.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "params {} {} {} {}", p.lambda_f, p.lambda_o, p.lambda_h, p.rounds);
        let _ = writeln!(s, "hash-seed {}", self.seed);
        let join = |t: &TruthTable| t.outputs().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "f {}", join(&self.f));
        let _ = writeln!(s, "obf {}", join(&self.obf));
        s
    }

    pub fn parse(text: &str) -> Result<World> {
        let mut lines = text.lines().enumerate();
        let mut field = |tag: &str| -> Result<Vec<u64>> {
            let (i, line) = lines.next().ok_or(Error::Parse { line: 0, msg: format!("missing `{tag}`") })?;
            let mut it = line.split_whitespace();
            if it.next() != Some(tag) {
                return Err(Error::Parse { line: i + 1, msg: format!("expected `{tag}`") });
            }
            it.map(|w| w.parse::<u64>().map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })).collect()
        };
        let p = field("params")?;
        if p.len() != 4 {
            return Err(Error::Parse { line: 1, msg: "params needs four numbers".into() });
        }
        let params = WorldParams::new(p[0] as usize, p[1] as usize, p[2] as usize, p[3] as usize)?;
        let seed = *field("hash-seed")?.first().ok_or(Error::Parse { line: 2, msg: "missing seed".into() })?;
        let to_usize = |v: Vec<u64>| v.into_iter().map(|x| x as usize).collect::<Vec<_>>();
        let f = TruthTable::new(1 << params.lambda_f, to_usize(field("f")?))?;
        let obf = TruthTable::new(1 << (3 * params.lambda_o), to_usize(field("obf")?))?;
        World::from_tables(params, f, obf, seed)
    }
}

fn eval_with(world: &World, f: &TruthTable, obfuscated: usize, z: usize) -> Option<usize> {
    let (program, _) = world.deobfuscate(obfuscated)?;
    if z >= f.domain() {
        return None;
    }
    program.run(f, z).0
}

/// `Eval` with `f` replaced by `f_variant`.
pub fn eval_oracle(world: &World, f_variant: &TruthTable, obfuscated: usize, z: usize) -> Option<usize> {
    eval_with(world, f_variant, obfuscated, z)
}

/// Answer of the world (with `f` replaced by `f_variant`) to a query.
pub fn answer(world: &World, f_variant: &TruthTable, q: WorldQuery) -> Option<usize> {
    match q {
        WorldQuery::F(x) => f_variant.get(x),
        WorldQuery::Eval { obfuscated, input } => eval_oracle(world, f_variant, obfuscated, input),
    }
}

/// `Find^{f'}(y)`: with probability 1/2 return `y`; otherwise read `y` as
/// `(C̃, z)`, run `obf⁻¹(C̃)` on `z` against `f'` and return one of its
/// `f`-queries uniformly. Falls back to `y` when `y` is not an `Eval` query
/// into the image of `obf` or the program makes no queries.
pub fn find_procedure(world: &World, f_variant: &TruthTable, y: WorldQuery, rng: &mut dyn RngCore) -> WorldQuery {
    if rng.gen_bool(0.5) {
        return y;
    }
    let WorldQuery::Eval { obfuscated, input } = y else { return y };
    let Some((program, _)) = world.deobfuscate(obfuscated) else { return y };
    let (_, queries) = program.run(f_variant, input);
    queries.choose(rng).map(|&x| WorldQuery::F(x)).unwrap_or(y)
}

/// Exact law of [`find_procedure`]'s output.
pub fn find_law(world: &World, f_variant: &TruthTable, y: WorldQuery) -> Vec<(WorldQuery, f64)> {
    let mut out = vec![(y, 0.5)];
    let queries = match y {
        WorldQuery::Eval { obfuscated, input } => {
            world.deobfuscate(obfuscated).map(|(p, _)| p.run(f_variant, input).1).unwrap_or_default()
        }
        WorldQuery::F(_) => vec![],
    };
    if queries.is_empty() {
        out[0].1 = 1.0;
        return out;
    }
    let w = 0.5 / queries.len() as f64;
    for x in queries {
        match out.iter_mut().find(|(q, _)| *q == WorldQuery::F(x)) {
            Some(e) => e.1 += w,
            None => out.push((WorldQuery::F(x), w)),
        }
    }
    out
}

/// Bit length of a query's encoding.
pub fn query_len(world: &World, y: WorldQuery) -> usize {
    match y {
        WorldQuery::F(_) => world.params.lambda_f,
        WorldQuery::Eval { .. } => 3 * world.params.lambda_o + world.params.lambda_f,
    }
}
