use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::time::{Duration, Instant};

use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::fsm::{Stg, Transition};
use crate::netlist::{cone_gates, support_of, Driver, GateKind, Netlist};
use crate::sat::{encode_frames, Backend, Cnf, FrameSpec, Lit, Sig, SolveResult, StateInit};

/// A storage bit as the attacker sees it: a flip-flop or a ROM output register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reg {
    Dff(usize),
    Rom(usize, usize),
}

struct RegGraph {
    names: Vec<String>,
    /// Register indices feeding each register's next value.
    preds: Vec<BTreeSet<usize>>,
    /// Structural control signature.
    signature: Vec<BTreeSet<String>>,
    input_dependent: Vec<bool>,
}

fn reg_graph(n: &Netlist) -> RegGraph {
    let c = n.compiled();
    let mut regs = Vec::new();
    let mut names = Vec::new();
    for (i, &q) in c.dff_q.iter().enumerate() {
        regs.push(Reg::Dff(i));
        names.push(c.names[q].clone());
    }
    for (r, rom) in c.roms.iter().enumerate() {
        for (b, &d) in rom.data.iter().enumerate() {
            regs.push(Reg::Rom(r, b));
            names.push(c.names[d].clone());
        }
    }
    let of_signal: HashMap<usize, usize> = names.iter().enumerate().map(|(i, s)| (c.index[s], i)).collect();
    let mut preds = Vec::with_capacity(regs.len());
    let mut signature = Vec::with_capacity(regs.len());
    let mut input_dependent = Vec::with_capacity(regs.len());
    for reg in &regs {
        // a ROM is opaque: every data bit may depend on every address bit
        let roots: Vec<usize> = match *reg {
            Reg::Dff(i) => vec![c.dff_d[i]],
            Reg::Rom(r, _) => c.roms[r].address.clone(),
        };
        let support: BTreeSet<usize> = roots.iter().flat_map(|&s| support_of(c, s)).collect();
        preds.push(support.iter().filter_map(|s| of_signal.get(s).copied()).collect());
        input_dependent.push(support.iter().any(|&s| matches!(c.driver[s], Driver::Input(_))));
        signature.push(match *reg {
            Reg::Dff(_) => cone_gates(c, &roots)
                .into_iter()
                .filter_map(|g| {
                    let g = c.gate_of(g)?;
                    (g.kind == GateKind::Mux2).then(|| c.names[g.ins[0]].clone())
                })
                .collect(),
            Reg::Rom(r, _) => BTreeSet::from([format!("rom:{}", n.roms()[r].name)]),
        });
    }
    RegGraph {
        names,
        preds,
        signature,
        input_dependent,
    }
}

/// Stage one: candidate state-register sets from structure alone.
///
/// Registers (flip-flops and ROM output bits) are grouped by the MUX2 select
/// signals in their next-state cones. Each group keeps only members on a
/// feedback cycle, is split along strongly connected components, and is
/// dropped when no member's next value reads a primary input. ROMs are
/// opaque, so their bits depend on the whole address. Output order is
/// deterministic.
pub fn topological_analysis(n: &Netlist) -> Vec<Vec<String>> {
    let g = reg_graph(n);
    let mut pg = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = g.names.iter().map(|_| pg.add_node(())).collect();
    for (b, ps) in g.preds.iter().enumerate() {
        for &a in ps {
            pg.add_edge(nodes[a], nodes[b], ());
        }
    }
    let mut scc_of = vec![0; g.names.len()];
    let mut cyclic = vec![false; g.names.len()];
    for (k, comp) in petgraph::algo::tarjan_scc(&pg).into_iter().enumerate() {
        let looped = comp.len() > 1 || g.preds[comp[0].index()].contains(&comp[0].index());
        for v in comp {
            scc_of[v.index()] = k;
            cyclic[v.index()] = looped;
        }
    }
    let mut groups: BTreeMap<(&BTreeSet<String>, usize), Vec<usize>> = BTreeMap::new();
    for i in (0..g.names.len()).filter(|&i| cyclic[i]) {
        groups.entry((&g.signature[i], scc_of[i])).or_default().push(i);
    }
    let mut out: Vec<Vec<String>> = groups
        .into_values()
        .filter(|set| set.iter().any(|&i| g.input_dependent[i]))
        .map(|set| set.into_iter().map(|i| g.names[i].clone()).collect())
        .collect();
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalOptions {
    pub backend: Backend,
    /// Stop after this many recorded transitions.
    pub max_transitions: usize,
    pub time_limit: Duration,
    /// Model ROM next values as unconstrained: the attacker cannot read the
    /// contents.
    pub rom_unknown: bool,
}

impl Default for FunctionalOptions {
    fn default() -> Self {
        FunctionalOptions {
            backend: Backend::Cdcl,
            max_transitions: 1 << 16,
            time_limit: Duration::from_secs(600),
            rom_unknown: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub stg: Stg,
    /// Every reached state was fully enumerated.
    pub complete: bool,
    /// No (state, input) pair has two outcomes.
    pub deterministic: bool,
    pub sat_calls: usize,
}

/// Stage two: rebuilds the STG over `state_regs` (MSB first) by SAT.
///
/// One combinational frame is encoded with free registers, keys and inputs.
/// Breadth-first from `initial`, each state is pinned by assumptions and all
/// distinct (input, next state, output) triples are enumerated with blocking
/// clauses. Registers outside `state_regs` stay free, so their influence
/// shows up as nondeterminism.
pub fn functional_analysis(
    n: &Netlist,
    state_regs: &[String],
    initial: u64,
    opts: &FunctionalOptions,
) -> Result<FunctionalReport, AttackError> {
    let c = n.compiled();
    let w = state_regs.len();
    let mut cnf = Cnf::new();
    let mut fr = encode_frames(
        &mut cnf,
        n,
        &FrameSpec {
            frames: 1,
            init: &StateInit::Free,
            keys: None,
            inputs: None,
            tag: None,
        },
    );
    if opts.rom_unknown {
        for word in fr.roms[1].iter_mut() {
            for s in word.iter_mut() {
                *s = Sig::Lit(cnf.new_var().pos());
            }
        }
    }
    let mut cur = Vec::with_capacity(w);
    let mut nxt = Vec::with_capacity(w);
    for s in state_regs {
        let idx = *c.index.get(s).ok_or_else(|| AttackError::NotAFlipFlop(s.clone()))?;
        match c.driver[idx] {
            Driver::Dff(i) => {
                cur.push(fr.states[0][i]);
                nxt.push(fr.states[1][i]);
            }
            Driver::Rom { rom, bit } => {
                cur.push(fr.roms[0][rom][bit]);
                nxt.push(fr.roms[1][rom][bit]);
            }
            _ => return Err(AttackError::NotAFlipFlop(s.clone())),
        }
    }
    let ins = fr.inputs[0].clone();
    let outs = fr.outputs[0].clone();
    let watched: Vec<Sig> = ins.iter().chain(&nxt).chain(&outs).copied().collect();

    let deadline = Instant::now() + opts.time_limit;
    let mut s = opts.backend.session();
    s.set_deadline(Some(deadline));
    let mut pushed = 0;
    let mut stg = Stg::new(w, initial, n.inputs().to_vec(), n.outputs().to_vec());
    let mut seen_pairs: BTreeSet<(u64, Vec<bool>)> = BTreeSet::new();
    let (mut complete, mut deterministic, mut calls) = (true, true, 0);
    let mut seen = BTreeSet::from([initial]);
    let mut queue = VecDeque::from([initial]);
    'bfs: while let Some(code) = queue.pop_front() {
        let mut assume: Vec<Lit> = Vec::with_capacity(w + 1);
        let mut feasible = true;
        for (k, sig) in cur.iter().enumerate() {
            let bit = (code >> (w - 1 - k)) & 1 == 1;
            match *sig {
                Sig::Const(b) => feasible &= b == bit,
                Sig::Lit(l) => assume.push(if bit { l } else { !l }),
            }
        }
        if !feasible {
            continue;
        }
        let act = cnf.new_var().pos();
        assume.push(act);
        loop {
            if stg.num_transitions() >= opts.max_transitions {
                complete = false;
                break 'bfs;
            }
            s.add_clauses(&cnf.clauses[pushed..]);
            pushed = cnf.clauses.len();
            calls += 1;
            match s.solve(&assume) {
                SolveResult::Unsat => break,
                SolveResult::Unknown => {
                    complete = false;
                    break 'bfs;
                }
                SolveResult::Sat => {}
            }
            let val = |x: &Sig| x.eval(|v| s.value(v));
            let input: Vec<bool> = ins.iter().map(val).collect();
            let next = nxt.iter().fold(0u64, |a, x| a << 1 | val(x) as u64);
            let output: Vec<bool> = outs.iter().map(val).collect();
            let mut block = vec![!act];
            for x in &watched {
                if let Sig::Lit(l) = *x {
                    block.push(if val(x) { !l } else { l });
                }
            }
            cnf.add_clause(block);
            if !seen_pairs.insert((code, input.clone())) {
                deterministic = false;
            }
            stg.add(Transition {
                state: code,
                input,
                next,
                output,
            });
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    Ok(FunctionalReport {
        stg,
        complete,
        deterministic,
        sat_calls: calls,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageReport {
    pub candidates: Vec<Vec<String>>,
    /// The largest candidate set, empty when there is none.
    pub chosen: Vec<String>,
    pub initial: u64,
    pub functional: Option<FunctionalReport>,
    pub topological_ms: u128,
    pub functional_ms: u128,
}

impl TwoStageReport {
    pub fn stg(&self) -> Option<&Stg> {
        self.functional.as_ref().map(|f| &f.stg)
    }

    /// A complete, deterministic STG was recovered.
    pub fn succeeded(&self) -> bool {
        self.functional.as_ref().is_some_and(|f| f.complete && f.deterministic)
    }
}

/// Both stages, with the all-zero reset state as the known initial state.
pub fn two_stage_attack(n: &Netlist, opts: &FunctionalOptions) -> Result<TwoStageReport, AttackError> {
    let t0 = Instant::now();
    let candidates = topological_analysis(n);
    let topological_ms = t0.elapsed().as_millis();
    let chosen = candidates
        .iter()
        .fold(None::<&Vec<String>>, |best, c| match best {
            Some(b) if b.len() >= c.len() => Some(b),
            _ => Some(c),
        })
        .cloned()
        .unwrap_or_default();
    let t1 = Instant::now();
    let functional = if chosen.is_empty() || chosen.len() > 63 {
        None
    } else {
        Some(functional_analysis(n, &chosen, 0, opts)?)
    };
    Ok(TwoStageReport {
        candidates,
        chosen,
        initial: 0,
        functional,
        topological_ms,
        functional_ms: t1.elapsed().as_millis(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsm::{extract_stg_explicit, parse_fsm_spec, stg_equal, synthesize_fsm};
    use crate::netlist::bench::parse_bench;

    fn small_fsm() -> (Netlist, Vec<String>) {
        let s = parse_fsm_spec(
            "f",
            ".i 1\n.o 1\n0 A A 0\n1 A B 0\n0 B C 1\n1 B A 0\n- C A 1\n",
        )
        .unwrap();
        synthesize_fsm(&s).unwrap()
    }

    #[test]
    fn pipeline_has_no_candidates() {
        let n = parse_bench("INPUT(a)\nOUTPUT(y)\np = DFF(a)\ny = DFF(p)\n").unwrap();
        assert!(topological_analysis(&n).is_empty());
    }

    #[test]
    fn toggler_stg() {
        let n = parse_bench("OUTPUT(q)\nq = DFF(d)\nd = NOT(q)\n").unwrap();
        let r = functional_analysis(&n, &["q".into()], 0, &FunctionalOptions::default()).unwrap();
        assert!(r.complete && r.deterministic);
        assert_eq!(r.stg.states.len(), 2);
        assert_eq!(r.stg.num_transitions(), 2);
    }

    #[test]
    fn fsm_state_bits_found_and_stg_matches() {
        let (n, q) = small_fsm();
        let mut b = n.to_builder();
        b.input("din").dff("din", "sr0").dff("sr0", "sr1").output("sr1");
        let with_sr = b.build().unwrap();
        let cands = topological_analysis(&with_sr);
        assert_eq!(cands, vec![q.clone()]);
        let r = functional_analysis(&n, &q, 0, &FunctionalOptions::default()).unwrap();
        let truth = extract_stg_explicit(&n, &q, 0, None).unwrap();
        assert!(stg_equal(&r.stg, &truth).unwrap());
        assert!(r.complete && r.deterministic);
    }

    #[test]
    fn input_independent_counter_is_dropped() {
        let n = parse_bench("INPUT(en)\nOUTPUT(q1)\nq0 = DFF(d0)\nq1 = DFF(d1)\nd0 = NOT(q0)\nd1 = XOR(q1, q0)\n")
            .unwrap();
        assert!(topological_analysis(&n).is_empty());
    }

    #[test]
    fn free_key_makes_stg_nondeterministic() {
        let n = parse_bench("INPUT(a)\n# KEYINPUT k\nINPUT(k)\nOUTPUT(q)\nq = DFF(d)\nd = XOR(q, k, a)\n").unwrap();
        let r = functional_analysis(&n, &["q".into()], 0, &FunctionalOptions::default()).unwrap();
        assert!(!r.deterministic);
    }
}
