//! Attacks against the locks: structural-then-functional FSM extraction, and
//! unrolling-based SAT key recovery (sequential and through the scan chain).

mod two_stage;
mod ubsat;

use std::time::Duration;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::equiv::random_sequences;
use crate::netlist::{Netlist, SimError, SimState, Simulator};
use crate::sat::{Backend, MiterError};

pub use two_stage::{
    functional_analysis, topological_analysis, two_stage_attack, FunctionalOptions, FunctionalReport, TwoStageReport,
};
pub use ubsat::{scan_unroll_attack, ubsat_attack, ScanPorts};

/// Black-box access to a working chip: every query starts from reset.
///
/// Attacks only ever see this interface.
pub trait Oracle: Send {
    fn num_inputs(&self) -> usize;
    fn num_outputs(&self) -> usize;
    fn query(&mut self, seq: &[Vec<bool>]) -> Vec<Vec<bool>>;
    fn queries(&self) -> usize;

    fn query_batch(&mut self, seqs: &[Vec<Vec<bool>>]) -> Vec<Vec<Vec<bool>>> {
        seqs.iter().map(|s| self.query(s)).collect()
    }
}

/// Simulated chip: a netlist, plus its key when the netlist is locked.
#[derive(Debug, Clone)]
pub struct SimOracle {
    netlist: Netlist,
    key: Option<Vec<bool>>,
    queries: usize,
}

impl SimOracle {
    pub fn new(netlist: Netlist) -> SimOracle {
        SimOracle {
            netlist,
            key: None,
            queries: 0,
        }
    }

    pub fn with_key(netlist: Netlist, key: Vec<bool>) -> Result<SimOracle, SimError> {
        Simulator::new(&netlist, Some(&key))?;
        Ok(SimOracle {
            netlist,
            key: Some(key),
            queries: 0,
        })
    }

    fn sim(&self) -> Simulator<'_> {
        Simulator::new(&self.netlist, self.key.as_deref()).expect("key width checked at construction")
    }
}

impl Oracle for SimOracle {
    fn num_inputs(&self) -> usize {
        self.netlist.inputs().len()
    }

    fn num_outputs(&self) -> usize {
        self.netlist.outputs().len()
    }

    fn query(&mut self, seq: &[Vec<bool>]) -> Vec<Vec<bool>> {
        self.queries += 1;
        self.sim()
            .run(&SimState::reset(&self.netlist), seq)
            .expect("query width matches the oracle")
    }

    fn queries(&self) -> usize {
        self.queries
    }

    fn query_batch(&mut self, seqs: &[Vec<Vec<bool>>]) -> Vec<Vec<Vec<bool>>> {
        self.queries += seqs.len();
        self.sim()
            .run_batch(&SimState::reset(&self.netlist), seqs)
            .expect("query width matches the oracle")
    }
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("oracle has {oracle} inputs/{oracle_out} outputs, locked netlist {locked}/{locked_out}")]
    Interface {
        oracle: usize,
        oracle_out: usize,
        locked: usize,
        locked_out: usize,
    },
    #[error("scan port `{0}` not found")]
    ScanPort(String),
    #[error("`{0}` is not a flip-flop")]
    NotAFlipFlop(String),
    #[error("solver backend: {0}")]
    Backend(String),
    #[error(transparent)]
    Miter(#[from] MiterError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackStatus {
    KeyFound,
    Timeout,
    InconclusiveAtBound,
}

impl AttackStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackStatus::KeyFound => "key-found",
            AttackStatus::Timeout => "timeout",
            AttackStatus::InconclusiveAtBound => "inconclusive-at-bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verification {
    pub sequences: usize,
    pub mismatches: usize,
}

/// Which check ended the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Only one key is consistent with the collected I/O.
    UniqueCompletion,
    /// The consistent keys are combinationally equivalent.
    CombinationalEquivalence,
    /// The query family was exhausted (fixed-depth scan attack).
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UbsatResult {
    pub status: AttackStatus,
    pub key: Option<IndexMap<String, bool>>,
    pub bound: usize,
    pub dis_count: usize,
    /// Attack time, excluding the final key verification.
    pub wall_ms: u128,
    pub elapsed: Duration,
    pub verification: Option<Verification>,
    pub termination: Option<Termination>,
    pub solver_calls: usize,
}

impl UbsatResult {
    /// Key found and it matched the oracle on every verification sequence.
    pub fn key_verified(&self) -> bool {
        self.status == AttackStatus::KeyFound && self.verification.is_some_and(|v| v.mismatches == 0)
    }

    pub fn key_bits(&self) -> Option<Vec<bool>> {
        self.key.as_ref().map(|k| k.values().copied().collect())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "status": self.status.as_str(),
            "key": self.key.as_ref().map(|k| k.iter().map(|(n, &b)| (n.clone(), serde_json::Value::from(b as u8))).collect::<serde_json::Map<_, _>>()),
            "bound": self.bound,
            "dis_count": self.dis_count,
            "wall_ms": self.wall_ms as u64,
            "verification": self.verification,
            "termination": self.termination,
            "key_verified": self.key_verified(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UbsatConfig {
    pub initial_boundary: usize,
    pub boundary_step: usize,
    pub max_bound: usize,
    pub time_limit: Duration,
    pub backend: Backend,
    pub verify_sequences: usize,
    pub verify_len: usize,
    pub seed: u64,
}

impl Default for UbsatConfig {
    fn default() -> Self {
        UbsatConfig {
            initial_boundary: 1,
            boundary_step: 1,
            max_bound: 64,
            time_limit: Duration::from_secs(600),
            backend: Backend::Cdcl,
            verify_sequences: 1000,
            verify_len: 50,
            seed: 0,
        }
    }
}

/// Runs `locked` under `key` and the oracle on the same random sequences.
pub fn verify_key(
    locked: &Netlist,
    key: &[bool],
    oracle: &mut dyn Oracle,
    count: usize,
    len: usize,
    seed: u64,
) -> Result<Verification, SimError> {
    let seqs = random_sequences(locked.inputs().len(), count, len, seed);
    let mine = Simulator::new(locked, Some(key))?.run_batch(&SimState::reset(locked), &seqs)?;
    let theirs = oracle.query_batch(&seqs);
    Ok(Verification {
        sequences: count,
        mismatches: mine.iter().zip(&theirs).filter(|(a, b)| a != b).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::bench::parse_bench;

    #[test]
    fn oracle_counts_queries() {
        let n = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n").unwrap();
        let mut o = SimOracle::new(n);
        assert_eq!(o.query(&[vec![false], vec![true]]), vec![vec![true], vec![false]]);
        o.query_batch(&[vec![vec![true]], vec![vec![false]]]);
        assert_eq!(o.queries(), 3);
    }
}
