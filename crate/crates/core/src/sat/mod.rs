//! CNF encoding of netlists and the solver contract the attacks run on.

mod cdcl;
mod cnf;
mod dpll;
mod external;
mod tseitin;
mod unroll;

use std::fmt;
use std::ops::Not;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cdcl::Cdcl;
pub use cnf::{parse_dimacs, Cnf};
pub use dpll::Dpll;
pub use external::ExternalSolver;
pub use tseitin::{tseitin, Encoder, Sig};
pub use unroll::{
    build_miter, build_miter_in, constrain_io, encode_frames, unroll, FrameSpec, Frames, KeyCopy, Miter, MiterError,
    StateInit, UnrolledCircuit,
};

/// Solver variable, numbered from 0 (DIMACS adds one).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Var(pub u32);

impl Var {
    pub fn pos(self) -> Lit {
        Lit(self.0 << 1)
    }
    pub fn neg(self) -> Lit {
        Lit(self.0 << 1 | 1)
    }
    pub fn lit(self, positive: bool) -> Lit {
        if positive {
            self.pos()
        } else {
            self.neg()
        }
    }
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lit(u32);

impl Lit {
    pub fn var(self) -> Var {
        Var(self.0 >> 1)
    }
    pub fn is_neg(self) -> bool {
        self.0 & 1 == 1
    }
    /// Dense code `2 * var + sign`, for indexing watch lists.
    pub fn code(self) -> usize {
        self.0 as usize
    }
    pub fn from_code(c: usize) -> Lit {
        Lit(c as u32)
    }
    pub fn to_dimacs(self) -> i64 {
        let v = self.var().0 as i64 + 1;
        if self.is_neg() {
            -v
        } else {
            v
        }
    }
    pub fn from_dimacs(d: i64) -> Lit {
        assert!(d != 0, "0 is not a literal");
        let v = Var((d.unsigned_abs() - 1) as u32);
        v.lit(d > 0)
    }
    /// Truth value of the literal under a variable assignment.
    pub fn eval(self, var_value: bool) -> bool {
        var_value != self.is_neg()
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveResult {
    Sat,
    Unsat,
    /// Stopped by the deadline or conflict budget.
    Unknown,
}

#[derive(Debug, Error)]
pub enum SatError {
    #[error("external solver: {0}")]
    External(String),
    #[error("unknown solver backend `{0}` (expected cdcl, dpll or external:<path>)")]
    UnknownBackend(String),
    #[error("dimacs line {line}: {msg}")]
    Dimacs { line: usize, msg: String },
}

/// Incremental, assumption-based solving.
///
/// Variables come into existence when first mentioned by a clause or
/// assumption. Results are sound and complete for the clauses added so far;
/// assumptions hold for one call only.
pub trait SolverSession: Send {
    fn add_clause(&mut self, lits: &[Lit]);
    fn solve(&mut self, assumptions: &[Lit]) -> SolveResult;
    /// Value of `v` in the last satisfying assignment.
    fn value(&self, v: Var) -> Option<bool>;
    fn set_deadline(&mut self, deadline: Option<Instant>);
    fn num_vars(&self) -> usize;

    fn add_clauses(&mut self, clauses: &[Vec<Lit>]) {
        for c in clauses {
            self.add_clause(c);
        }
    }

    fn lit_value(&self, l: Lit) -> Option<bool> {
        self.value(l.var()).map(|b| l.eval(b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    Cdcl,
    Dpll,
    External(String),
}

/// Environment variable naming the solver backend.
pub const SOLVER_ENV: &str = "LOCKBENCH_SOLVER";

impl Backend {
    pub fn parse(s: &str) -> Result<Backend, SatError> {
        match s.trim() {
            "" | "cdcl" => Ok(Backend::Cdcl),
            "dpll" => Ok(Backend::Dpll),
            other => match other.strip_prefix("external:") {
                Some(path) if !path.is_empty() => Ok(Backend::External(path.to_string())),
                _ => Err(SatError::UnknownBackend(other.to_string())),
            },
        }
    }

    /// Reads [`SOLVER_ENV`]; unset means the built-in CDCL solver.
    pub fn from_env() -> Result<Backend, SatError> {
        match std::env::var(SOLVER_ENV) {
            Ok(s) => Backend::parse(&s),
            Err(_) => Ok(Backend::Cdcl),
        }
    }

    pub fn session(&self) -> Box<dyn SolverSession> {
        match self {
            Backend::Cdcl => Box::new(Cdcl::new()),
            Backend::Dpll => Box::new(Dpll::new()),
            Backend::External(p) => Box::new(ExternalSolver::new(p)),
        }
    }
}

/// Counts models projected onto `vars` by blocking each found projection.
/// Test and debugging helper; exponential.
pub fn count_models(cnf: &Cnf, vars: &[Var], limit: usize) -> usize {
    let mut s = Cdcl::new();
    s.add_clauses(&cnf.clauses);
    let mut n = 0;
    while n < limit && s.solve(&[]) == SolveResult::Sat {
        n += 1;
        let block: Vec<Lit> = vars
            .iter()
            .map(|&v| v.lit(!s.value(v).unwrap_or(false)))
            .collect();
        if block.is_empty() {
            break;
        }
        s.add_clause(&block);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_codes() {
        let v = Var(4);
        assert_eq!(v.pos().to_dimacs(), 5);
        assert_eq!((!v.pos()).to_dimacs(), -5);
        assert_eq!(Lit::from_dimacs(-5), v.neg());
        assert!(v.neg().eval(false));
    }

    #[test]
    fn backend_names() {
        assert_eq!(Backend::parse("cdcl").unwrap(), Backend::Cdcl);
        assert_eq!(Backend::parse("external:/bin/x").unwrap(), Backend::External("/bin/x".into()));
        assert!(Backend::parse("minisat").is_err());
    }
}
