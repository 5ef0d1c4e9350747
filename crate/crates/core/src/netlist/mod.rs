//! Gate-level netlist IR.
//!
//! A [`Netlist`] is a directed graph of named signals. Every signal has exactly
//! one driver: a primary input, a key input, a gate, a D flip-flop or a ROM
//! data bit. The gate-only subgraph is acyclic; flip-flop and ROM outputs are
//! treated as sources.
//!
//! Netlists are immutable once built. Transformations go through
//! [`Netlist::to_builder`] and rebuild, which re-validates every invariant.

mod analysis;
pub mod bench;
mod compiled;
pub mod equiv;
pub mod generate;
mod scan;
mod sim;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use analysis::cone_gates;
pub use analysis::{fan_in_cone, ff_dependency_graph, support_of, DependencyGraph};
pub use compiled::{Compiled, Driver};
pub use scan::insert_scan_chain;
pub use sim::{simulate, LaneState, SimError, SimState, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
    /// `MUX2(sel, a, b)` is `b` when `sel` is high, `a` otherwise.
    Mux2,
}

impl GateKind {
    pub const ALL: [GateKind; 9] = [
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
        GateKind::Mux2,
    ];

    pub fn arity_ok(self, n: usize) -> bool {
        match self {
            GateKind::Not | GateKind::Buf => n == 1,
            GateKind::Mux2 => n == 3,
            _ => n >= 2,
        }
    }

    pub fn bench_name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUFF",
            GateKind::Mux2 => "MUX",
        }
    }

    pub fn from_bench_name(s: &str) -> Option<GateKind> {
        Some(match s.to_ascii_uppercase().as_str() {
            "AND" => GateKind::And,
            "NAND" => GateKind::Nand,
            "OR" => GateKind::Or,
            "NOR" => GateKind::Nor,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            "NOT" | "INV" => GateKind::Not,
            "BUF" | "BUFF" => GateKind::Buf,
            "MUX" | "MUX2" => GateKind::Mux2,
            _ => return None,
        })
    }

    /// Evaluates the gate on 64 independent lanes at once.
    #[inline]
    pub fn eval_lanes(self, ins: impl Iterator<Item = u64>) -> u64 {
        let mut it = ins;
        match self {
            GateKind::And => it.fold(!0, |a, b| a & b),
            GateKind::Nand => !it.fold(!0, |a, b| a & b),
            GateKind::Or => it.fold(0, |a, b| a | b),
            GateKind::Nor => !it.fold(0, |a, b| a | b),
            GateKind::Xor => it.fold(0, |a, b| a ^ b),
            GateKind::Xnor => !it.fold(0, |a, b| a ^ b),
            GateKind::Not => !it.next().unwrap_or(0),
            GateKind::Buf => it.next().unwrap_or(0),
            GateKind::Mux2 => {
                let s = it.next().unwrap_or(0);
                let a = it.next().unwrap_or(0);
                let b = it.next().unwrap_or(0);
                (s & b) | (!s & a)
            }
        }
    }

    pub fn eval(self, ins: &[bool]) -> bool {
        self.eval_lanes(ins.iter().map(|&b| if b { !0 } else { 0 })) & 1 == 1
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.bench_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<String>,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScanPins {
    pub si: String,
    pub se: String,
}

/// D flip-flop. With scan pins the effective next state is `se ? si : d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dff {
    pub d: String,
    pub q: String,
    pub scan: Option<ScanPins>,
}

/// Synchronous ROM with one cycle of read latency: the data bits in cycle
/// `t + 1` hold `contents[address(t)]`. Address bit 0 is the MSB.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RomNode {
    pub name: String,
    pub address: Vec<String>,
    pub data: Vec<String>,
    /// `contents[word][bit]`, `2^address.len()` words of `data.len()` bits.
    pub contents: Vec<Vec<bool>>,
}

impl RomNode {
    pub fn words(&self) -> usize {
        1usize << self.address.len()
    }

    pub fn bits(&self) -> usize {
        self.words() * self.data.len()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("signal `{0}` has more than one driver")]
    DuplicateDriver(String),
    #[error("signal `{signal}` used by `{user}` is never defined")]
    Undefined { signal: String, user: String },
    #[error("gate `{output}` of kind {kind} has {got} inputs")]
    Arity {
        output: String,
        kind: GateKind,
        got: usize,
    },
    #[error("combinational cycle through `{0}`")]
    CombinationalCycle(String),
    #[error("rom `{rom}`: {reason}")]
    RomShape { rom: String, reason: String },
    #[error("key input `{0}` is also declared as a primary input")]
    KeyIsInput(String),
}

/// Mutable staging area for building or transforming a [`Netlist`].
#[derive(Debug, Clone, Default)]
pub struct NetlistBuilder {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub key_inputs: Vec<String>,
    pub gates: Vec<Gate>,
    pub dffs: Vec<Dff>,
    pub roms: Vec<RomNode>,
}

impl NetlistBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        NetlistBuilder {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn input(&mut self, name: impl Into<String>) -> &mut Self {
        self.inputs.push(name.into());
        self
    }

    pub fn key_input(&mut self, name: impl Into<String>) -> &mut Self {
        self.key_inputs.push(name.into());
        self
    }

    pub fn output(&mut self, name: impl Into<String>) -> &mut Self {
        self.outputs.push(name.into());
        self
    }

    pub fn gate<S: Into<String>>(
        &mut self,
        kind: GateKind,
        inputs: impl IntoIterator<Item = S>,
        output: impl Into<String>,
    ) -> &mut Self {
        self.gates.push(Gate {
            kind,
            inputs: inputs.into_iter().map(Into::into).collect(),
            output: output.into(),
        });
        self
    }

    pub fn dff(&mut self, d: impl Into<String>, q: impl Into<String>) -> &mut Self {
        self.dffs.push(Dff {
            d: d.into(),
            q: q.into(),
            scan: None,
        });
        self
    }

    pub fn rom(&mut self, rom: RomNode) -> &mut Self {
        self.roms.push(rom);
        self
    }

    /// Every signal name currently driven by something in the builder.
    pub fn driven_names(&self) -> HashSet<String> {
        let mut s: HashSet<String> = HashSet::new();
        s.extend(self.inputs.iter().cloned());
        s.extend(self.key_inputs.iter().cloned());
        s.extend(self.gates.iter().map(|g| g.output.clone()));
        s.extend(self.dffs.iter().map(|d| d.q.clone()));
        for r in &self.roms {
            s.extend(r.data.iter().cloned());
        }
        s
    }

    /// Drops gates whose outputs reach no output, flip-flop pin or ROM address,
    /// restricted to the candidates given.
    pub fn remove_dead_gates(&mut self, candidates: &HashSet<String>) {
        loop {
            let mut used: HashSet<&str> = HashSet::new();
            used.extend(self.outputs.iter().map(String::as_str));
            for g in &self.gates {
                used.extend(g.inputs.iter().map(String::as_str));
            }
            for d in &self.dffs {
                used.insert(&d.d);
                if let Some(s) = &d.scan {
                    used.insert(&s.si);
                    used.insert(&s.se);
                }
            }
            for r in &self.roms {
                used.extend(r.address.iter().map(String::as_str));
            }
            let dead: HashSet<String> = self
                .gates
                .iter()
                .filter(|g| candidates.contains(&g.output) && !used.contains(g.output.as_str()))
                .map(|g| g.output.clone())
                .collect();
            if dead.is_empty() {
                return;
            }
            self.gates.retain(|g| !dead.contains(&g.output));
        }
    }

    pub fn build(self) -> Result<Netlist, NetlistError> {
        let compiled = Compiled::new(&self)?;
        let NetlistBuilder {
            name,
            inputs,
            outputs,
            key_inputs,
            gates,
            dffs,
            roms,
        } = self;
        let cell = OnceLock::new();
        let _ = cell.set(compiled);
        Ok(Netlist {
            name,
            inputs,
            outputs,
            key_inputs,
            gates,
            dffs,
            roms,
            compiled: cell,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Netlist {
    name: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    key_inputs: Vec<String>,
    gates: Vec<Gate>,
    dffs: Vec<Dff>,
    roms: Vec<RomNode>,
    compiled: OnceLock<Compiled>,
}

impl Netlist {
    pub fn builder(name: impl Into<String>) -> NetlistBuilder {
        NetlistBuilder::new(name)
    }

    pub fn to_builder(&self) -> NetlistBuilder {
        NetlistBuilder {
            name: self.name.clone(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            key_inputs: self.key_inputs.clone(),
            gates: self.gates.clone(),
            dffs: self.dffs.clone(),
            roms: self.roms.clone(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }
    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }
    pub fn key_inputs(&self) -> &[String] {
        &self.key_inputs
    }
    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }
    pub fn dffs(&self) -> &[Dff] {
        &self.dffs
    }
    pub fn roms(&self) -> &[RomNode] {
        &self.roms
    }

    pub fn with_name(&self, name: impl Into<String>) -> Netlist {
        let mut n = self.clone();
        n.name = name.into();
        n
    }

    pub fn compiled(&self) -> &Compiled {
        self.compiled.get_or_init(|| {
            Compiled::new(&self.to_builder()).expect("netlist invariants checked at build")
        })
    }

    pub fn is_combinational(&self) -> bool {
        self.dffs.is_empty() && self.roms.is_empty()
    }

    pub fn has_scan(&self) -> bool {
        !self.dffs.is_empty() && self.dffs.iter().all(|d| d.scan.is_some())
    }

    pub fn dff_by_q(&self, q: &str) -> Option<usize> {
        self.dffs.iter().position(|d| d.q == q)
    }

    pub fn contains_signal(&self, s: &str) -> bool {
        self.compiled().index.contains_key(s)
    }

    /// Counts in the order the ISCAS headers use: inputs, outputs, DFFs, gates.
    pub fn stats(&self) -> NetlistStats {
        NetlistStats {
            inputs: self.inputs.len(),
            outputs: self.outputs.len(),
            key_inputs: self.key_inputs.len(),
            dffs: self.dffs.len(),
            gates: self.gates.len(),
            roms: self.roms.len(),
        }
    }

    /// Structural equality up to statement order: same I/O lists (in order),
    /// same gate set, same flip-flops and ROMs.
    pub fn structurally_equal(&self, other: &Netlist) -> bool {
        fn sorted<T: Clone, K: Ord>(v: &[T], key: impl Fn(&T) -> K) -> Vec<T> {
            let mut v = v.to_vec();
            v.sort_by_key(|x| key(x));
            v
        }
        self.inputs == other.inputs
            && self.outputs == other.outputs
            && self.key_inputs == other.key_inputs
            && sorted(&self.gates, |g| g.output.clone()) == sorted(&other.gates, |g| g.output.clone())
            && sorted(&self.dffs, |d| d.q.clone()) == sorted(&other.dffs, |d| d.q.clone())
            && sorted(&self.roms, |r| r.name.clone()) == sorted(&other.roms, |r| r.name.clone())
    }

    /// Returns a signal name with the given stem that is not yet used.
    pub fn fresh_name(&self, stem: &str) -> String {
        fresh_name(&self.compiled().index, stem)
    }
}

pub(crate) fn fresh_name<V>(taken: &HashMap<String, V>, stem: &str) -> String {
    if !taken.contains_key(stem) {
        return stem.to_string();
    }
    (0..)
        .map(|i| format!("{stem}_{i}"))
        .find(|c| !taken.contains_key(c))
        .expect("unbounded")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetlistStats {
    pub inputs: usize,
    pub outputs: usize,
    pub key_inputs: usize,
    pub dffs: usize,
    pub gates: usize,
    pub roms: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_rules() {
        assert!(GateKind::Not.arity_ok(1));
        assert!(!GateKind::Not.arity_ok(2));
        assert!(GateKind::Mux2.arity_ok(3));
        assert!(!GateKind::And.arity_ok(1));
        assert!(GateKind::Xor.arity_ok(4));
    }

    #[test]
    fn mux_select_first() {
        assert!(!GateKind::Mux2.eval(&[false, false, true]));
        assert!(GateKind::Mux2.eval(&[true, false, true]));
        assert!(GateKind::Mux2.eval(&[false, true, false]));
    }

    #[test]
    fn builder_rejects_duplicate_driver() {
        let mut b = Netlist::builder("dup");
        b.input("a").gate(GateKind::Not, ["a"], "y").gate(GateKind::Buf, ["a"], "y");
        assert_eq!(b.build().unwrap_err(), NetlistError::DuplicateDriver("y".into()));
    }

    #[test]
    fn builder_rejects_cycle() {
        let mut b = Netlist::builder("cyc");
        b.input("a")
            .gate(GateKind::And, ["a", "z"], "y")
            .gate(GateKind::Not, ["y"], "z")
            .output("z");
        assert!(matches!(b.build(), Err(NetlistError::CombinationalCycle(_))));
    }

    #[test]
    fn builder_rejects_undefined() {
        let mut b = Netlist::builder("undef");
        b.input("a").gate(GateKind::And, ["a", "b"], "y").output("y");
        assert!(matches!(b.build(), Err(NetlistError::Undefined { .. })));
    }

    #[test]
    fn dead_gate_removal_is_restricted_to_candidates() {
        let mut b = Netlist::builder("dead");
        b.input("a")
            .gate(GateKind::Not, ["a"], "x")
            .gate(GateKind::Not, ["x"], "y")
            .gate(GateKind::Buf, ["a"], "keep");
        let cands: HashSet<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
        b.remove_dead_gates(&cands);
        assert_eq!(b.gates.len(), 1);
        assert_eq!(b.gates[0].output, "keep");
    }
}
