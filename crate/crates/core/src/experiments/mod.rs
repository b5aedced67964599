//! Named, seeded experiments that produce one result row per instance,
//! with a pass rule attached to every row.

mod runs;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const TOLERANCE: f64 = 1e-9;
pub const SIGMAS: f64 = 3.0;

/// How a row is judged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Check {
    /// `|measured − target| ≤ 1e-9`.
    Equal { measured: f64, target: f64 },
    /// `measured ≤ target + 1e-9`.
    AtMost { measured: f64, target: f64 },
    /// `measured ≥ target − 1e-9`.
    AtLeast { measured: f64, target: f64 },
    /// `measured < target`.
    Below { measured: f64, target: f64 },
    /// `|measured − target| ≤ 3σ`.
    Near { measured: f64, target: f64, sigma: f64 },
    /// `measured ≥ target − 3σ`.
    NotBelow { measured: f64, target: f64, sigma: f64 },
}

impl Check {
    pub fn is_statistical(&self) -> bool {
        matches!(self, Check::Near { .. } | Check::NotBelow { .. })
    }

    pub fn passes(&self) -> bool {
        match *self {
            Check::Equal { measured, target } => (measured - target).abs() <= TOLERANCE,
            Check::AtMost { measured, target } => measured <= target + TOLERANCE,
            Check::AtLeast { measured, target } => measured >= target - TOLERANCE,
            Check::Below { measured, target } => measured < target,
            Check::Near { measured, target, sigma } => (measured - target).abs() <= SIGMAS * sigma + TOLERANCE,
            Check::NotBelow { measured, target, sigma } => measured >= target - SIGMAS * sigma - TOLERANCE,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Check::Equal { .. } => "equal",
            Check::AtMost { .. } => "at_most",
            Check::AtLeast { .. } => "at_least",
            Check::Below { .. } => "below",
            Check::Near { .. } => "near",
            Check::NotBelow { .. } => "not_below",
        }
    }

    fn parts(&self) -> (f64, f64, f64) {
        match *self {
            Check::Equal { measured, target }
            | Check::AtMost { measured, target }
            | Check::AtLeast { measured, target }
            | Check::Below { measured, target } => (measured, target, 0.0),
            Check::Near { measured, target, sigma } | Check::NotBelow { measured, target, sigma } => {
                (measured, target, sigma)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Row {
    pub cells: Vec<String>,
    pub check: Check,
}

impl Row {
    pub fn new(cells: Vec<String>, check: Check) -> Self {
        Row { cells, check }
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub experiment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(experiment: &str, columns: &[&str]) -> Self {
        Table { experiment: experiment.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, cells: Vec<String>, check: Check) {
        self.rows.push(Row::new(cells, check));
    }

    /// Rows whose exact check fails.
    pub fn hard_failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.check.is_statistical() && !r.check.passes()).count()
    }

    pub fn statistical_failures(&self) -> usize {
        self.rows.iter().filter(|r| r.check.is_statistical() && !r.check.passes()).count()
    }

    pub fn passed(&self) -> bool {
        self.hard_failures() == 0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut head = self.columns.clone();
        head.extend(["check", "measured", "target", "sigma", "pass"].map(String::from));
        out.push_str(&head.join(","));
        out.push('\n');
        for r in &self.rows {
            let (m, t, s) = r.check.parts();
            let mut cells: Vec<String> = r.cells.iter().map(|c| csv_cell(c)).collect();
            cells.extend([r.check.name().to_string(), fmt(m), fmt(t), fmt(s), r.check.passes().to_string()]);
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

/// Shortest round-trip formatting, so identical runs give identical bytes.
pub fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Flat `key = value` configuration; `#` starts a comment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: "expected key = value".into() })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Parse { line: i + 1, msg: "empty key".into() });
            }
            if entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Parse { line: i + 1, msg: format!("duplicate key `{k}`") });
            }
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }
}

/// Configuration resolved against an experiment's declared parameters.
pub struct Params<'a> {
    defaults: &'a [(&'static str, &'static str)],
    config: &'a Config,
}

impl Params<'_> {
    fn raw(&self, key: &str) -> &str {
        self.config.entries.get(key).map(String::as_str).unwrap_or_else(|| {
            self.defaults.iter().find(|d| d.0 == key).map(|d| d.1).expect("parameter is declared")
        })
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.raw(key).parse().map_err(|_| Error::Config(format!("`{key}` must be a non-negative integer")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.raw(key).parse().map_err(|_| Error::Config(format!("`{key}` must be a number")))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.raw(key).parse().map_err(|_| Error::Config(format!("`{key}` must be true or false")))
    }

    /// `key` as an integer in `lo..=hi`.
    pub fn bounded(&self, key: &str, lo: usize, hi: usize) -> Result<usize> {
        let v = self.usize(key)?;
        if v < lo || v > hi {
            return Err(Error::CapViolation(format!("`{key}` = {v} outside {lo}..={hi}")));
        }
        Ok(v)
    }
}

type Runner = fn(&Params<'_>, u64) -> Result<Table>;

pub struct Experiment {
    pub name: &'static str,
    /// Library operation exercised.
    pub operation: &'static str,
    /// Property the rows check.
    pub checks: &'static str,
    pub statistical: bool,
    pub params: &'static [(&'static str, &'static str)],
    run: Runner,
}

pub fn catalog() -> &'static [Experiment] {
    runs::CATALOG
}

pub fn find(name: &str) -> Result<&'static Experiment> {
    catalog().iter().find(|e| e.name == name).ok_or_else(|| Error::UnknownExperiment(name.into()))
}

/// Runs `name` with `config` overriding its defaults.
pub fn run_experiment(name: &str, config: &Config, seed: u64) -> Result<Table> {
    let e = find(name)?;
    if let Some(k) = config.entries.keys().find(|k| !e.params.iter().any(|p| p.0 == k.as_str())) {
        return Err(Error::Config(format!("`{name}` has no parameter `{k}`")));
    }
    (e.run)(&Params { defaults: e.params, config }, seed)
}

/// Sidecar record for a result table.
pub fn metadata(table: &Table, config: &Config, seed: u64) -> Result<String> {
    let e = find(&table.experiment)?;
    let mut out = String::new();
    let _ = writeln!(out, "experiment = {}", e.name);
    let _ = writeln!(out, "operation = {}", e.operation);
    let _ = writeln!(out, "checks = {}", e.checks);
    let _ = writeln!(out, "pass_rule = {}", if e.statistical { "3 sigma (statistical rows), 1e-9 (exact rows)" } else { "1e-9" });
    let _ = writeln!(out, "seed = {seed}");
    let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "state_dim_cap = {}", crate::qsim::DEFAULT_DIM_CAP);
    for (k, default) in e.params {
        let v = config.entries.get(*k).map(String::as_str).unwrap_or(default);
        let _ = writeln!(out, "param.{k} = {v}");
    }
    let _ = writeln!(out, "rows = {}", table.rows.len());
    let _ = writeln!(out, "hard_failures = {}", table.hard_failures());
    let _ = writeln!(out, "statistical_failures = {}", table.statistical_failures());
    Ok(out)
}

/// Writes `out` (CSV) and `out.meta`.
pub fn write_outputs(table: &Table, config: &Config, seed: u64, out: &Path) -> Result<()> {
    std::fs::write(out, table.to_csv())?;
    let mut meta = out.as_os_str().to_owned();
    meta.push(".meta");
    std::fs::write(meta, metadata(table, config, seed)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_flat_pairs() {
        let c = Config::parse("# grid\ntrials = 10\n\nbits=2 # inline\n").unwrap();
        assert_eq!(c.entries().len(), 2);
        assert_eq!(c.entries()["bits"], "2");
        assert!(matches!(Config::parse("a = 1\na = 2"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Config::parse("junk"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn catalog_is_complete_and_ordered() {
        let names: Vec<&str> = catalog().iter().map(|e| e.name).collect();
        assert_eq!(
            names,
            [
                "csto-equiv",
                "advo-equiv",
                "ow2h",
                "ow2h-classical",
                "puzzle-extract",
                "meta3",
                "collapse",
                "repeat",
                "amplify",
                "token",
                "lightning",
                "breaker",
                "find",
                "sim4"
            ]
        );
        assert!(catalog().iter().all(|e| !e.checks.is_empty() && !e.operation.is_empty()));
    }

    #[test]
    fn unknown_names_and_keys_are_rejected() {
        assert!(matches!(run_experiment("nope", &Config::default(), 1), Err(Error::UnknownExperiment(_))));
        let mut c = Config::default();
        c.set("bogus", "1");
        assert!(matches!(run_experiment("sim4", &c, 1), Err(Error::Config(_))));
    }

    #[test]
    fn caps_are_enforced() {
        let mut c = Config::default();
        c.set("max_domain", "9");
        assert!(matches!(run_experiment("csto-equiv", &c, 1), Err(Error::CapViolation(_))));
    }

    #[test]
    fn pass_rules() {
        assert!(Check::Equal { measured: 1.0, target: 1.0 + 1e-10 }.passes());
        assert!(!Check::Below { measured: 1.0, target: 1.0 }.passes());
        assert!(Check::Near { measured: 0.5, target: 0.52, sigma: 0.01 }.passes());
        assert!(!Check::NotBelow { measured: 0.4, target: 0.5, sigma: 0.01 }.passes());
        let mut t = Table::new("sim4", &["a"]);
        t.push(vec!["x,y".into()], Check::Near { measured: 0.0, target: 1.0, sigma: 0.1 });
        assert!(t.passed());
        assert_eq!(t.statistical_failures(), 1);
        assert!(t.to_csv().contains("\"x,y\",near,0,1,0.1,false"));
    }

    #[test]
    fn same_seed_same_bytes() {
        let mut c = Config::default();
        c.set("instances", "5");
        let a = run_experiment("csto-equiv", &c, 9).unwrap().to_csv();
        let b = run_experiment("csto-equiv", &c, 9).unwrap().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn every_experiment_passes_at_small_settings() {
        let small: &[(&str, &[(&str, &str)])] = &[
            ("csto-equiv", &[("instances", "8")]),
            ("advo-equiv", &[("instances", "6")]),
            ("ow2h", &[("instances", "4"), ("trials", "500")]),
            ("ow2h-classical", &[("instances", "4"), ("trials", "500")]),
            ("puzzle-extract", &[]),
            ("meta3", &[]),
            ("collapse", &[]),
            ("repeat", &[("copies", "4"), ("trials", "300")]),
            ("amplify", &[("trials", "500")]),
            ("token", &[("trials", "300")]),
            ("lightning", &[("trials", "300")]),
            ("breaker", &[("lambda_f", "1"), ("lambda_o", "1"), ("trials", "200")]),
            ("find", &[("queries", "4"), ("trials", "500")]),
            ("sim4", &[]),
        ];
        for (name, kv) in small {
            let mut c = Config::default();
            for (k, v) in *kv {
                c.set(k, v);
            }
            let t = run_experiment(name, &c, 11).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!t.rows.is_empty(), "{name}");
            assert!(t.passed(), "{name}:\n{}", t.to_csv());
        }
    }
}
