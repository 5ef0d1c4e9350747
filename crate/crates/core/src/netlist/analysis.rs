//! Structural queries: fan-in cones, supports, flip-flop dependencies.

use std::collections::{BTreeSet, HashSet};

use petgraph::graph::DiGraph;
use thiserror::Error;

use super::{Compiled, Netlist, NetlistBuilder};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConeError {
    #[error("`{0}` is neither a flip-flop data pin nor a primary output")]
    UnknownSink(String),
}

/// Source signals (inputs, keys, flip-flop and ROM outputs) that reach `sig`
/// through gates only. A source's support is itself.
pub fn support_of(c: &Compiled, sig: usize) -> BTreeSet<usize> {
    let mut seen = HashSet::new();
    let mut stack = vec![sig];
    let mut out = BTreeSet::new();
    while let Some(s) = stack.pop() {
        if !seen.insert(s) {
            continue;
        }
        match c.gate_of(s) {
            Some(g) => stack.extend(g.ins.iter().copied()),
            None => {
                out.insert(s);
            }
        }
    }
    out
}

/// Gate-signal indices in the transitive fan-in of `sinks`.
pub(crate) fn cone_gates(c: &Compiled, sinks: &[usize]) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<usize> = sinks.to_vec();
    while let Some(s) = stack.pop() {
        if let Some(g) = c.gate_of(s) {
            if seen.insert(s) {
                stack.extend(g.ins.iter().copied());
            }
        }
    }
    seen
}

/// The smallest combinational sub-netlist driving `sinks`.
///
/// Frontier signals become the sub-netlist's inputs (key inputs stay key
/// inputs); the sinks become its outputs.
pub fn fan_in_cone(n: &Netlist, sinks: &[&str]) -> Result<Netlist, ConeError> {
    let c = n.compiled();
    let valid: HashSet<&str> = n
        .dffs()
        .iter()
        .map(|d| d.d.as_str())
        .chain(n.outputs().iter().map(String::as_str))
        .collect();
    let mut idx = Vec::with_capacity(sinks.len());
    for &s in sinks {
        if !valid.contains(s) {
            return Err(ConeError::UnknownSink(s.to_string()));
        }
        idx.push(c.index[s]);
    }
    let gates = cone_gates(c, &idx);
    let mut frontier = BTreeSet::new();
    for &s in &idx {
        frontier.extend(support_of(c, s));
    }
    let mut b = NetlistBuilder::new(format!("{}_cone", n.name()));
    for &s in &frontier {
        match c.driver[s] {
            super::Driver::Key(_) => b.key_input(c.names[s].clone()),
            _ => b.input(c.names[s].clone()),
        };
    }
    let mut outs_seen = HashSet::new();
    for &s in sinks {
        if outs_seen.insert(s) {
            b.output(s);
        }
    }
    // Keep the original gate statement order.
    let mut gi: Vec<usize> = gates
        .iter()
        .map(|&s| match c.driver[s] {
            super::Driver::Gate(g) => c.gate_origin[g],
            _ => unreachable!(),
        })
        .collect();
    gi.sort_unstable();
    for g in gi {
        b.gates.push(n.gates()[g].clone());
    }
    Ok(b.build().expect("cone of a valid netlist is valid"))
}

/// Flip-flop dependency graph: node `i` is `n.dffs()[i]`, and an edge `A -> B`
/// exists iff `A.q` is in the combinational support of `B.d` (or of `B`'s
/// scan pins, when present).
#[derive(Debug, Clone)]
pub struct DependencyGraph {
    pub dffs: Vec<String>,
    pub succ: Vec<BTreeSet<usize>>,
}

impl DependencyGraph {
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.succ[a].contains(&b)
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(BTreeSet::len).sum()
    }

    pub fn to_petgraph(&self) -> DiGraph<String, ()> {
        let mut g = DiGraph::new();
        let nodes: Vec<_> = self.dffs.iter().map(|q| g.add_node(q.clone())).collect();
        for (a, succ) in self.succ.iter().enumerate() {
            for &b in succ {
                g.add_edge(nodes[a], nodes[b], ());
            }
        }
        g
    }

    /// Strongly connected components as sorted node lists, in ascending order
    /// of their smallest member.
    pub fn sccs(&self) -> Vec<Vec<usize>> {
        let g = self.to_petgraph();
        let mut comps: Vec<Vec<usize>> = petgraph::algo::tarjan_scc(&g)
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        comps.sort();
        comps
    }

    /// A node is cyclic when it sits in a multi-node SCC or has a self-loop.
    pub fn cyclic_nodes(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for comp in self.sccs() {
            if comp.len() > 1 || self.has_edge(comp[0], comp[0]) {
                out.extend(comp);
            }
        }
        out
    }
}

pub fn ff_dependency_graph(n: &Netlist) -> DependencyGraph {
    let c = n.compiled();
    let q_to_ff: std::collections::HashMap<usize, usize> =
        c.dff_q.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let succ_of_b: Vec<BTreeSet<usize>> = (0..c.dff_q.len())
        .map(|b| {
            let mut roots = vec![c.dff_d[b]];
            if let Some((si, se)) = c.dff_scan[b] {
                roots.push(si);
                roots.push(se);
            }
            roots
                .into_iter()
                .flat_map(|r| support_of(c, r))
                .filter_map(|s| q_to_ff.get(&s).copied())
                .collect()
        })
        .collect();
    // succ_of_b holds predecessors; invert.
    let mut succ = vec![BTreeSet::new(); c.dff_q.len()];
    for (b, preds) in succ_of_b.iter().enumerate() {
        for &a in preds {
            succ[a].insert(b);
        }
    }
    DependencyGraph {
        dffs: n.dffs().iter().map(|d| d.q.clone()).collect(),
        succ,
    }
}
