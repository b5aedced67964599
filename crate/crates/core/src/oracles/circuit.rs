use std::fmt::Write as _;
use std::sync::OnceLock;

use num_complex::Complex64;
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};
use crate::qsim::{check_unitary, gates, CMatrix, RegisterLayout};

/// One step of an oracle-aided circuit.
#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    /// Local unitary `matrix` (a builtin name or a defined matrix) on `targets`.
    Unitary { name: String, targets: Vec<String>, matrix: String },
    /// Oracle query `|x, y⟩ ↦ |x, y ⊕ O(x)⟩` through slot `slot`.
    Call { slot: String, qreg: String, rreg: String },
}

/// Gate list over named registers with a declared query budget.
///
/// Text form, one directive per line (`#` starts a comment):
///
/// ```text
/// REG x 2
/// REG y 2
/// QUERIES 1
/// MATRIX flip 2 0,0 1,0 1,0 0,0
/// U h0 x H
/// CALL O x y
/// U f0 y flip
/// MEASURE y
/// ```
///
/// `MATRIX <name> <dim> <re,im>...` lists entries row-major. Floats are
/// written in shortest round-trip form, so serialization is bit-exact.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCircuit {
    registers: Vec<(String, usize)>,
    matrices: Vec<(String, CMatrix)>,
    gates: Vec<Gate>,
    budget: usize,
    measured: Vec<String>,
    digest: Digest,
}

/// Lazily computed SHA-256 of the text form; ignored by equality.
#[derive(Clone, Debug, Default)]
struct Digest(OnceLock<[u8; 32]>);

impl PartialEq for Digest {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl OracleCircuit {
    pub fn new<S: Into<String>>(registers: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let registers: Vec<(String, usize)> =
            registers.into_iter().map(|(n, d)| (n.into(), d)).collect();
        RegisterLayout::new(registers.iter().map(|(n, d)| (n.clone(), *d)))?;
        Ok(OracleCircuit { registers, matrices: vec![], gates: vec![], budget: 0, measured: vec![], digest: Digest::default() })
    }

    pub fn layout(&self) -> RegisterLayout {
        RegisterLayout::new(self.registers.iter().map(|(n, d)| (n.clone(), *d)))
            .expect("validated at construction")
    }

    pub fn registers(&self) -> &[(String, usize)] {
        &self.registers
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn measured(&self) -> &[String] {
        &self.measured
    }

    pub fn query_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Call { .. })).count()
    }

    /// Oracle slots named by call gates, in first-use order.
    pub fn slots(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for g in &self.gates {
            if let Gate::Call { slot, .. } = g {
                if !out.contains(slot) {
                    out.push(slot.clone());
                }
            }
        }
        out
    }

    fn reg_dim(&self, name: &str) -> Result<usize> {
        self.registers
            .iter()
            .find(|(n, _)| n == name)
            .map(|r| r.1)
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    pub fn set_budget(&mut self, q: usize) -> Result<&mut Self> {
        if self.query_count() > q {
            return Err(Error::QueryBudgetExceeded { budget: q });
        }
        self.budget = q;
        self.digest = Digest::default();
        Ok(self)
    }

    pub fn define_matrix(&mut self, name: &str, m: CMatrix) -> Result<&mut Self> {
        if gates::builtin(name).is_some() || self.matrices.iter().any(|(n, _)| n == name) {
            return Err(Error::InvalidArgument(format!("matrix name `{name}` already taken")));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("bad matrix name `{name}`")));
        }
        check_unitary(&m)?;
        self.matrices.push((name.to_string(), m));
        self.digest = Digest::default();
        Ok(self)
    }

    pub fn matrix(&self, name: &str) -> Result<CMatrix> {
        if let Some(m) = gates::builtin(name) {
            return Ok(m);
        }
        self.matrices
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m.clone())
            .ok_or_else(|| Error::InvalidArgument(format!("undefined matrix `{name}`")))
    }

    /// Appends a gate referring to a builtin or defined matrix.
    pub fn unitary(&mut self, name: &str, targets: &[&str], matrix: &str) -> Result<&mut Self> {
        let m = self.matrix(matrix)?;
        let mut dim = 1;
        for (i, t) in targets.iter().enumerate() {
            dim *= self.reg_dim(t)?;
            if targets[..i].contains(t) {
                return Err(Error::DuplicateRegister(t.to_string()));
            }
        }
        if m.nrows() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
        }
        self.gates.push(Gate::Unitary {
            name: name.to_string(),
            targets: targets.iter().map(|t| t.to_string()).collect(),
            matrix: matrix.to_string(),
        });
        self.digest = Digest::default();
        Ok(self)
    }

    /// Defines a fresh matrix and applies it in one step.
    pub fn apply(&mut self, targets: &[&str], m: CMatrix) -> Result<&mut Self> {
        let name = format!("m{}", self.matrices.len());
        self.define_matrix(&name, m)?;
        let label = format!("g{}", self.gates.len());
        self.unitary(&label, targets, &name)
    }

    /// Appends an oracle call; raises the budget if needed.
    pub fn call(&mut self, slot: &str, qreg: &str, rreg: &str) -> Result<&mut Self> {
        self.reg_dim(qreg)?;
        self.reg_dim(rreg)?;
        if qreg == rreg {
            return Err(Error::DuplicateRegister(qreg.to_string()));
        }
        if slot.is_empty() || slot.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("bad slot name `{slot}`")));
        }
        self.gates.push(Gate::Call {
            slot: slot.to_string(),
            qreg: qreg.to_string(),
            rreg: rreg.to_string(),
        });
        self.budget = self.budget.max(self.query_count());
        self.digest = Digest::default();
        Ok(self)
    }

    pub fn measure(&mut self, regs: &[&str]) -> Result<&mut Self> {
        for r in regs {
            self.reg_dim(r)?;
        }
        self.measured = regs.iter().map(|r| r.to_string()).collect();
        self.digest = Digest::default();
        Ok(self)
    }

    /// Appends every gate of `other`, whose registers must all exist here.
    /// Measured registers are added to this circuit's list.
    pub fn append(&mut self, other: &OracleCircuit) -> Result<&mut Self> {
        for g in &other.gates {
            match g {
                Gate::Unitary { targets, matrix, .. } => {
                    let t: Vec<&str> = targets.iter().map(String::as_str).collect();
                    self.apply(&t, other.matrix(matrix)?)?;
                }
                Gate::Call { slot, qreg, rreg } => {
                    self.call(slot, qreg, rreg)?;
                }
            }
        }
        for m in &other.measured {
            self.reg_dim(m)?;
            if !self.measured.contains(m) {
                self.measured.push(m.clone());
            }
        }
        self.digest = Digest::default();
        Ok(self)
    }

    /// Unitary of a circuit without oracle calls, as a matrix over its layout.
    pub fn local_unitary(&self) -> Result<CMatrix> {
        if let Some(Gate::Call { slot, .. }) = self.gates.iter().find(|g| matches!(g, Gate::Call { .. })) {
            return Err(Error::UnresolvedSlot(slot.clone()));
        }
        let layout = self.layout();
        let d = layout.dim();
        let mut out = CMatrix::zeros(d, d);
        for j in 0..d {
            let mut s = crate::qsim::StateVector::basis(layout.clone(), j);
            for g in &self.gates {
                if let Gate::Unitary { targets, matrix, .. } = g {
                    let t: Vec<&str> = targets.iter().map(String::as_str).collect();
                    s = s.apply_operator(&self.matrix(matrix)?, &t)?;
                }
            }
            for (i, a) in s.amplitudes().iter().enumerate() {
                out[(i, j)] = *a;
            }
        }
        Ok(out)
    }

    /// Copy with every register and slot name passed through `rename`.
    pub fn renamed(&self, reg: impl Fn(&str) -> String, slot: impl Fn(&str) -> String) -> OracleCircuit {
        OracleCircuit {
            registers: self.registers.iter().map(|(n, d)| (reg(n), *d)).collect(),
            matrices: self.matrices.clone(),
            gates: self
                .gates
                .iter()
                .map(|g| match g {
                    Gate::Unitary { name, targets, matrix } => Gate::Unitary {
                        name: name.clone(),
                        targets: targets.iter().map(|t| reg(t)).collect(),
                        matrix: matrix.clone(),
                    },
                    Gate::Call { slot: s, qreg, rreg } => {
                        Gate::Call { slot: slot(s), qreg: reg(qreg), rreg: reg(rreg) }
                    }
                })
                .collect(),
            budget: self.budget,
            measured: self.measured.iter().map(|m| reg(m)).collect(),
            digest: Digest::default(),
        }
    }

    /// SHA-256 of [`to_text`](Self::to_text), computed once per circuit value.
    pub fn digest(&self) -> [u8; 32] {
        *self.digest.0.get_or_init(|| Sha256::digest(self.to_text().as_bytes()).into())
    }

    /// Serializes to the line format; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (n, d) in &self.registers {
            let _ = writeln!(s, "REG {n} {d}");
        }
        let _ = writeln!(s, "QUERIES {}", self.budget);
        for (n, m) in &self.matrices {
            let _ = write!(s, "MATRIX {n} {}", m.nrows());
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    let z = m[(r, c)];
                    let _ = write!(s, " {:?},{:?}", z.re, z.im);
                }
            }
            s.push('\n');
        }
        for g in &self.gates {
            match g {
                Gate::Unitary { name, targets, matrix } => {
                    let _ = writeln!(s, "U {name} {} {matrix}", targets.join(","));
                }
                Gate::Call { slot, qreg, rreg } => {
                    let _ = writeln!(s, "CALL {slot} {qreg} {rreg}");
                }
            }
        }
        if !self.measured.is_empty() {
            let _ = writeln!(s, "MEASURE {}", self.measured.join(","));
        }
        s
    }

    pub fn parse(text: &str) -> Result<OracleCircuit> {
        let err = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let mut regs: Vec<(String, usize)> = Vec::new();
        let mut circuit: Option<OracleCircuit> = None;
        let mut declared_budget: Option<usize> = None;
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let wrap = |e: Error| err(ln, &e.to_string());
            match toks[0] {
                "REG" => {
                    if circuit.is_some() {
                        return Err(err(ln, "REG after body"));
                    }
                    if toks.len() != 3 {
                        return Err(err(ln, "expected `REG <name> <dim>`"));
                    }
                    let d = toks[2].parse().map_err(|_| err(ln, "bad dimension"))?;
                    regs.push((toks[1].to_string(), d));
                }
                kw => {
                    let c = match circuit.as_mut() {
                        Some(c) => c,
                        None => {
                            circuit = Some(OracleCircuit::new(regs.clone()).map_err(wrap)?);
                            circuit.as_mut().expect("just set")
                        }
                    };
                    match kw {
                        "QUERIES" => {
                            if toks.len() != 2 {
                                return Err(err(ln, "expected `QUERIES <q>`"));
                            }
                            declared_budget = Some(toks[1].parse().map_err(|_| err(ln, "bad budget"))?);
                        }
                        "MATRIX" => {
                            if toks.len() < 3 {
                                return Err(err(ln, "expected `MATRIX <name> <dim> <entries>`"));
                            }
                            let d: usize = toks[2].parse().map_err(|_| err(ln, "bad dimension"))?;
                            if toks.len() != 3 + d * d {
                                return Err(err(ln, "wrong number of matrix entries"));
                            }
                            let mut entries = Vec::with_capacity(d * d);
                            for t in &toks[3..] {
                                let (re, im) = t.split_once(',').ok_or_else(|| err(ln, "entry must be re,im"))?;
                                let re: f64 = re.parse().map_err(|_| err(ln, "bad float"))?;
                                let im: f64 = im.parse().map_err(|_| err(ln, "bad float"))?;
                                entries.push(Complex64::new(re, im));
                            }
                            c.define_matrix(toks[1], CMatrix::from_row_slice(d, d, &entries)).map_err(wrap)?;
                        }
                        "U" => {
                            if toks.len() != 4 {
                                return Err(err(ln, "expected `U <name> <targets> <matrix>`"));
                            }
                            let targets: Vec<&str> = toks[2].split(',').collect();
                            c.unitary(toks[1], &targets, toks[3]).map_err(wrap)?;
                        }
                        "CALL" => {
                            if toks.len() != 4 {
                                return Err(err(ln, "expected `CALL <slot> <qreg> <rreg>`"));
                            }
                            c.call(toks[1], toks[2], toks[3]).map_err(wrap)?;
                        }
                        "MEASURE" => {
                            if toks.len() != 2 {
                                return Err(err(ln, "expected `MEASURE <regs>`"));
                            }
                            let regs: Vec<&str> = toks[1].split(',').collect();
                            c.measure(&regs).map_err(wrap)?;
                        }
                        other => return Err(err(ln, &format!("unknown directive `{other}`"))),
                    }
                }
            }
        }
        let mut c = match circuit {
            Some(c) => c,
            None => OracleCircuit::new(regs).map_err(|e| err(0, &e.to_string()))?,
        };
        if let Some(q) = declared_budget {
            c.set_budget(q).map_err(|e| err(0, &e.to_string()))?;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::gates;
    use proptest::prelude::*;

    fn sample() -> OracleCircuit {
        let mut c = OracleCircuit::new([("x", 2), ("y", 4)]).unwrap();
        c.unitary("h", &["x"], "H").unwrap();
        c.apply(&["y"], gates::fourier(4)).unwrap();
        c.call("O", "x", "y").unwrap();
        c.measure(&["y", "x"]).unwrap();
        c
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let c = sample();
        let text = c.to_text();
        let back = OracleCircuit::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn parse_reports_line_numbers() {
        let e = OracleCircuit::parse("REG x 2\nU g x NOPE\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = OracleCircuit::parse("REG x 2\nREG y 2\nCALL O x y\nCALL O x y\nQUERIES 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
    }

    #[test]
    fn budget_tracks_calls() {
        let c = sample();
        assert_eq!(c.budget(), 1);
        assert_eq!(c.slots(), vec!["O".to_string()]);
    }

    proptest! {
        #[test]
        fn random_matrices_round_trip(theta in -10.0f64..10.0, phi in -1e-8f64..1e-8) {
            let mut c = OracleCircuit::new([("a", 2)]).unwrap();
            let (s, co) = theta.sin_cos();
            let m = CMatrix::from_row_slice(2, 2, &[
                Complex64::new(co, phi), Complex64::new(-s, 0.0),
                Complex64::new(s, 0.0), Complex64::new(co, -phi),
            ]);
            if crate::qsim::unitarity_defect(&m) < 1e-9 {
                c.apply(&["a"], m).unwrap();
                let back = OracleCircuit::parse(&c.to_text()).unwrap();
                prop_assert_eq!(back, c);
            }
        }
    }
}
