//! Explicit state-transition graphs: extraction from netlists, comparison,
//! and synthesis from a KISS-style description.

mod spec;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use spec::{parse_fsm_spec, random_fsm, Encoding, FsmSpec, RandomFsm, SpecError, SpecTransition};
pub use synth::{extract_stg_explicit, synthesize_fsm, ExtractError};

/// One concrete transition. Input cubes are stored expanded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transition {
    pub state: u64,
    pub input: Vec<bool>,
    pub next: u64,
    pub output: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stg {
    pub state_width: usize,
    pub states: BTreeSet<u64>,
    pub initial: u64,
    pub transitions: BTreeSet<Transition>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StgError {
    #[error("state widths differ: {0} vs {1}")]
    Width(usize, usize),
    #[error("initial state {0:#b} is not a state")]
    MissingInitial(u64),
    #[error("state {state:#b} has conflicting transitions on one input")]
    Nondeterministic { state: u64 },
    #[error("transition target {0:#b} is not a state")]
    DanglingTarget(u64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StgDiff {
    /// States of `b` absent from `a`.
    pub extra_states: usize,
    /// Transitions of `a` absent from `b`.
    pub missing_transitions: usize,
    /// Transitions of `b` absent from `a`.
    pub false_transitions: usize,
}

impl StgDiff {
    pub fn is_zero(&self) -> bool {
        *self == StgDiff::default()
    }
}

impl Stg {
    pub fn new(state_width: usize, initial: u64, inputs: Vec<String>, outputs: Vec<String>) -> Stg {
        Stg {
            state_width,
            states: BTreeSet::from([initial]),
            initial,
            transitions: BTreeSet::new(),
            inputs,
            outputs,
        }
    }

    pub fn add(&mut self, t: Transition) {
        self.states.insert(t.state);
        self.states.insert(t.next);
        self.transitions.insert(t);
    }

    pub fn check(&self) -> Result<(), StgError> {
        if !self.states.contains(&self.initial) {
            return Err(StgError::MissingInitial(self.initial));
        }
        let mut seen: BTreeMap<(u64, &[bool]), &Transition> = BTreeMap::new();
        for t in &self.transitions {
            if !self.states.contains(&t.next) {
                return Err(StgError::DanglingTarget(t.next));
            }
            if let Some(prev) = seen.insert((t.state, &t.input), t) {
                if prev != t {
                    return Err(StgError::Nondeterministic { state: t.state });
                }
            }
        }
        Ok(())
    }

    /// States reachable from the initial state along transitions, found by
    /// depth-first search independent of how the graph was built.
    pub fn reachable(&self) -> BTreeSet<u64> {
        let mut succ: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for t in &self.transitions {
            succ.entry(t.state).or_default().push(t.next);
        }
        let mut seen = BTreeSet::from([self.initial]);
        let mut stack = vec![self.initial];
        while let Some(s) = stack.pop() {
            for &n in succ.get(&s).into_iter().flatten() {
                if seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        seen
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    /// Graphviz rendering; parallel edges with equal outputs are merged and
    /// labelled with one input vector per line.
    pub fn to_dot(&self) -> String {
        let bits = |v: u64| format!("{:0w$b}", v, w = self.state_width.max(1));
        let vec = |v: &[bool]| v.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>();
        let mut s = String::from("digraph stg {\n  rankdir=LR;\n");
        let _ = writeln!(s, "  init [shape=point];\n  init -> \"{}\";", bits(self.initial));
        for st in &self.states {
            let _ = writeln!(s, "  \"{}\" [shape=circle];", bits(*st));
        }
        let mut edges: BTreeMap<(u64, u64, String), Vec<String>> = BTreeMap::new();
        for t in &self.transitions {
            edges
                .entry((t.state, t.next, vec(&t.output)))
                .or_default()
                .push(vec(&t.input));
        }
        for ((a, b, out), ins) in edges {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [label=\"{}/{}\"];",
                bits(a),
                bits(b),
                ins.join("\\n"),
                out
            );
        }
        s.push_str("}\n");
        s
    }
}

pub fn stg_equal(a: &Stg, b: &Stg) -> Result<bool, StgError> {
    if a.state_width != b.state_width {
        return Err(StgError::Width(a.state_width, b.state_width));
    }
    Ok(a.initial == b.initial && a.states == b.states && a.transitions == b.transitions)
}

pub fn stg_diff(a: &Stg, b: &Stg) -> Result<StgDiff, StgError> {
    if a.state_width != b.state_width {
        return Err(StgError::Width(a.state_width, b.state_width));
    }
    Ok(StgDiff {
        extra_states: b.states.difference(&a.states).count(),
        missing_transitions: a.transitions.difference(&b.transitions).count(),
        false_transitions: b.transitions.difference(&a.transitions).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: u64) -> Stg {
        let mut g = Stg::new(2, 0, vec![], vec!["y".into()]);
        for s in 0..n {
            g.add(Transition {
                state: s,
                input: vec![],
                next: (s + 1) % n,
                output: vec![s == n - 1],
            });
        }
        g
    }

    #[test]
    fn diff_of_self_is_zero() {
        let g = ring(4);
        assert!(stg_diff(&g, &g).unwrap().is_zero());
        assert!(stg_equal(&g, &g).unwrap());
        assert_eq!(g.reachable().len(), 4);
    }

    #[test]
    fn diff_counts() {
        let a = ring(3);
        let b = ring(4);
        let d = stg_diff(&a, &b).unwrap();
        assert_eq!(d.extra_states, 1);
        // 2->0 replaced by 2->3, plus 3->0
        assert_eq!(d.false_transitions, 2);
        assert_eq!(d.missing_transitions, 1);
    }

    #[test]
    fn nondeterminism_detected() {
        let mut g = ring(2);
        g.add(Transition {
            state: 0,
            input: vec![],
            next: 0,
            output: vec![false],
        });
        assert_eq!(g.check(), Err(StgError::Nondeterministic { state: 0 }));
    }

    #[test]
    fn dot_mentions_every_state() {
        let d = ring(3).to_dot();
        for s in ["00", "01", "10"] {
            assert!(d.contains(&format!("\"{s}\"")));
        }
    }
}
