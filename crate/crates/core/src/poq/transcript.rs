use std::fmt;

use crate::error::{Error, Result};

/// The reserved `⊤` answer given on transcripts the honest prover never reaches.
pub const REJECT: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sender {
    Verifier,
    Prover,
}

impl Sender {
    fn tag(self) -> &'static str {
        match self {
            Sender::Verifier => "V",
            Sender::Prover => "P",
        }
    }
}

/// Ordered `(sender, symbol)` pairs.
///
/// Log format, one message per line: `<round> <V|P> <symbol>`, rounds
/// counted from 1 and `⊤` written as `T`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transcript {
    messages: Vec<(Sender, usize)>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_messages(messages: Vec<(Sender, usize)>) -> Self {
        Transcript { messages }
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn messages(&self) -> &[(Sender, usize)] {
        &self.messages
    }

    pub fn symbols(&self) -> Vec<usize> {
        self.messages.iter().map(|m| m.1).collect()
    }

    /// Symbol of message `i` (0-based).
    pub fn symbol(&self, i: usize) -> Option<usize> {
        self.messages.get(i).map(|m| m.1)
    }

    pub fn last(&self) -> Option<(Sender, usize)> {
        self.messages.last().copied()
    }

    pub fn push(&mut self, sender: Sender, symbol: usize) {
        self.messages.push((sender, symbol));
    }

    pub fn with(&self, sender: Sender, symbol: usize) -> Transcript {
        let mut t = self.clone();
        t.push(sender, symbol);
        t
    }

    /// First `n` messages.
    pub fn prefix(&self, n: usize) -> Transcript {
        Transcript { messages: self.messages[..n.min(self.len())].to_vec() }
    }

    pub fn prover_messages(&self) -> usize {
        self.messages.iter().filter(|m| m.0 == Sender::Prover).count()
    }

    pub fn is_rejected(&self) -> bool {
        self.messages.iter().any(|m| m.1 == REJECT)
    }

    pub fn to_log(&self) -> String {
        self.to_string()
    }

    pub fn parse_log(text: &str) -> Result<Transcript> {
        let mut t = Transcript::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Parse { line: n + 1, msg: msg.to_string() };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad("expected `<round> <V|P> <symbol>`"));
            }
            let round: usize = f[0].parse().map_err(|_| bad("bad round number"))?;
            if round != t.len() + 1 {
                return Err(bad("rounds must be consecutive from 1"));
            }
            let sender = match f[1] {
                "V" => Sender::Verifier,
                "P" => Sender::Prover,
                _ => return Err(bad("sender must be V or P")),
            };
            let symbol = match f[2] {
                "T" => REJECT,
                s => s.parse().map_err(|_| bad("bad symbol"))?,
            };
            t.push(sender, symbol);
        }
        Ok(t)
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (s, m)) in self.messages.iter().enumerate() {
            if *m == REJECT {
                writeln!(f, "{} {} T", i + 1, s.tag())?;
            } else {
                writeln!(f, "{} {} {m}", i + 1, s.tag())?;
            }
        }
        Ok(())
    }
}
