use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Lit, SatError, Var};

/// Clause database plus the names of the variables that stand for netlist
/// signals, keyed by (frame, signal name).
#[derive(Debug, Clone, Default)]
pub struct Cnf {
    pub clauses: Vec<Vec<Lit>>,
    pub num_vars: u32,
    pub var_map: BTreeMap<(usize, String), Var>,
}

impl Cnf {
    pub fn new() -> Cnf {
        Cnf::default()
    }

    pub fn new_var(&mut self) -> Var {
        let v = Var(self.num_vars);
        self.num_vars += 1;
        v
    }

    /// A fresh variable recorded under `(frame, name)`.
    ///
    /// # Panics
    /// If the name is already mapped in that frame.
    pub fn named_var(&mut self, frame: usize, name: &str) -> Var {
        let v = self.new_var();
        let prev = self.var_map.insert((frame, name.to_string()), v);
        assert!(prev.is_none(), "variable for ({frame}, {name}) already exists");
        v
    }

    pub fn add_clause(&mut self, c: impl Into<Vec<Lit>>) {
        let c = c.into();
        for l in &c {
            debug_assert!(l.var().0 < self.num_vars, "clause uses unallocated variable");
        }
        self.clauses.push(c);
    }

    pub fn lookup(&self, frame: usize, name: &str) -> Option<Var> {
        self.var_map.get(&(frame, name.to_string())).copied()
    }

    pub fn to_dimacs(&self) -> String {
        write_dimacs(self.num_vars as usize, &self.clauses)
    }

    /// `{"frame:name": dimacs_var, ...}` in frame-then-name order.
    pub fn var_map_json(&self) -> serde_json::Value {
        let m: serde_json::Map<String, serde_json::Value> = self
            .var_map
            .iter()
            .map(|((f, n), v)| (format!("{f}:{n}"), serde_json::Value::from(v.0 as u64 + 1)))
            .collect();
        serde_json::Value::Object(m)
    }
}

pub(crate) fn write_dimacs(nvars: usize, clauses: &[Vec<Lit>]) -> String {
    let mut s = String::with_capacity(clauses.len() * 12 + 32);
    let _ = writeln!(s, "p cnf {} {}", nvars, clauses.len());
    for c in clauses {
        for l in c {
            let _ = write!(s, "{} ", l.to_dimacs());
        }
        s.push_str("0\n");
    }
    s
}

/// Reads a DIMACS CNF. Returns the declared variable count and the clauses.
pub fn parse_dimacs(text: &str) -> Result<(usize, Vec<Vec<Lit>>), SatError> {
    let mut nvars = None;
    let mut clauses = Vec::new();
    let mut cur = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("p ") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            if f.len() != 3 || f[0] != "cnf" {
                return Err(SatError::Dimacs {
                    line: i + 1,
                    msg: "malformed header".into(),
                });
            }
            nvars = Some(f[1].parse().map_err(|_| SatError::Dimacs {
                line: i + 1,
                msg: "bad variable count".into(),
            })?);
            continue;
        }
        for tok in line.split_whitespace() {
            let d: i64 = tok.parse().map_err(|_| SatError::Dimacs {
                line: i + 1,
                msg: format!("bad literal `{tok}`"),
            })?;
            if d == 0 {
                clauses.push(std::mem::take(&mut cur));
            } else {
                cur.push(Lit::from_dimacs(d));
            }
        }
    }
    if !cur.is_empty() {
        clauses.push(cur);
    }
    let max = clauses
        .iter()
        .flatten()
        .map(|l| l.var().index() + 1)
        .max()
        .unwrap_or(0);
    Ok((nvars.unwrap_or(max).max(max), clauses))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimacs_is_bit_exact() {
        let mut c = Cnf::new();
        let a = c.named_var(0, "a");
        let b = c.named_var(0, "b");
        c.add_clause(vec![a.pos(), b.neg()]);
        c.add_clause(vec![b.pos()]);
        assert_eq!(c.to_dimacs(), "p cnf 2 2\n1 -2 0\n2 0\n");
        let (n, cl) = parse_dimacs(&c.to_dimacs()).unwrap();
        assert_eq!((n, cl), (2, c.clauses.clone()));
        assert_eq!(c.var_map_json()["0:b"], 2);
    }
}
