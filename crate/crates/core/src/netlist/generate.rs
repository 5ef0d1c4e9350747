//! Seeded random circuit generators for tests and synthetic benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GateKind, Netlist, NetlistBuilder};

/// Interface and size of a generated sequential circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitProfile {
    pub inputs: usize,
    pub outputs: usize,
    pub dffs: usize,
    pub gates: usize,
}

impl CircuitProfile {
    pub const S298: CircuitProfile = CircuitProfile {
        inputs: 3,
        outputs: 6,
        dffs: 14,
        gates: 119,
    };
    pub const S1196: CircuitProfile = CircuitProfile {
        inputs: 14,
        outputs: 14,
        dffs: 18,
        gates: 529,
    };
    pub const S1423: CircuitProfile = CircuitProfile {
        inputs: 17,
        outputs: 5,
        dffs: 74,
        gates: 657,
    };
}

/// ISCAS-style random sequential circuit: AND/NAND/OR/NOR gates with
/// inverters, every flip-flop fed by logic that may read any flip-flop.
///
/// Gate inputs prefer signals that have no reader yet so that little logic
/// dangles. Signal names follow the `G<n>` convention.
pub fn random_sequential(name: &str, p: CircuitProfile, seed: u64) -> Netlist {
    assert!(p.gates >= p.dffs.max(p.outputs).max(1), "profile needs enough gates");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = NetlistBuilder::new(name);
    let mut next = 0usize;
    let mut fresh = || {
        let s = format!("G{next}");
        next += 1;
        s
    };
    let inputs: Vec<String> = (0..p.inputs).map(|_| fresh()).collect();
    let qs: Vec<String> = (0..p.dffs).map(|_| fresh()).collect();
    let mut signals: Vec<String> = inputs.iter().chain(&qs).cloned().collect();
    let mut unread: Vec<String> = signals.clone();
    let mut gate_outs = Vec::with_capacity(p.gates);

    for _ in 0..p.gates {
        let out = fresh();
        let kind = match rng.gen_range(0..100) {
            0..=29 => GateKind::Not,
            30..=49 => GateKind::And,
            50..=64 => GateKind::Nand,
            65..=79 => GateKind::Or,
            _ => GateKind::Nor,
        };
        let arity = if kind == GateKind::Not {
            1
        } else if rng.gen_bool(0.8) {
            2
        } else {
            rng.gen_range(3..=4)
        };
        let mut ins: Vec<String> = Vec::with_capacity(arity);
        while ins.len() < arity {
            let pick = if !unread.is_empty() && rng.gen_bool(0.7) {
                let i = rng.gen_range(0..unread.len());
                unread.swap_remove(i)
            } else {
                // Bias toward recent signals for depth.
                let lo = signals.len().saturating_sub(24);
                let i = if rng.gen_bool(0.6) {
                    rng.gen_range(lo..signals.len())
                } else {
                    rng.gen_range(0..signals.len())
                };
                signals[i].clone()
            };
            if !ins.contains(&pick) {
                unread.retain(|s| s != &pick);
                ins.push(pick);
            } else if signals.len() <= arity {
                break;
            }
        }
        if ins.len() < 2 && kind != GateKind::Not {
            b.gate(GateKind::Not, [ins[0].clone()], out.clone());
        } else {
            b.gate(kind, ins, out.clone());
        }
        signals.push(out.clone());
        unread.push(out.clone());
        gate_outs.push(out);
    }

    // Sinks draw first from unread gate outputs, then from late gates.
    let mut pool: Vec<String> = unread
        .iter()
        .filter(|s| gate_outs.contains(s))
        .cloned()
        .collect();
    pool.shuffle(&mut rng);
    let mut take_sink = |rng: &mut ChaCha8Rng| -> String {
        pool.pop().unwrap_or_else(|| {
            let lo = gate_outs.len() / 2;
            gate_outs[rng.gen_range(lo..gate_outs.len())].clone()
        })
    };
    for q in &qs {
        let d = take_sink(&mut rng);
        b.dff(d, q.clone());
    }
    let mut outs: Vec<String> = Vec::new();
    while outs.len() < p.outputs {
        let o = take_sink(&mut rng);
        if !outs.contains(&o) {
            outs.push(o);
        }
    }
    for i in inputs {
        b.input(i);
    }
    for o in outs {
        b.output(o);
    }
    b.build().expect("generator emits acyclic netlists")
}

/// Random circuit in which every flip-flop data pin and every output is a
/// fanout-free tree over distinct source signals. Without reconvergence every
/// structural dependency is also a functional one.
pub fn fanout_free(name: &str, inputs: usize, dffs: usize, outputs: usize, seed: u64) -> Netlist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = NetlistBuilder::new(name);
    let ins: Vec<String> = (0..inputs).map(|i| format!("i{i}")).collect();
    let qs: Vec<String> = (0..dffs).map(|i| format!("q{i}")).collect();
    let sources: Vec<String> = ins.iter().chain(&qs).cloned().collect();
    let mut counter = 0usize;
    let mut tree = |b: &mut NetlistBuilder, rng: &mut ChaCha8Rng| -> String {
        let k = rng.gen_range(1..=sources.len().min(4));
        let mut leaves: Vec<String> = sources.choose_multiple(rng, k).cloned().collect();
        while leaves.len() > 1 {
            let x = leaves.remove(rng.gen_range(0..leaves.len()));
            let y = leaves.remove(rng.gen_range(0..leaves.len()));
            let out = format!("t{counter}");
            counter += 1;
            let kind = *[
                GateKind::And,
                GateKind::Nand,
                GateKind::Or,
                GateKind::Nor,
                GateKind::Xor,
                GateKind::Xnor,
            ]
            .choose(rng)
            .unwrap();
            b.gate(kind, [x, y], out.clone());
            leaves.push(out);
        }
        let root = leaves.pop().unwrap();
        let out = format!("t{counter}");
        counter += 1;
        let kind = if rng.gen_bool(0.5) { GateKind::Not } else { GateKind::Buf };
        b.gate(kind, [root], out.clone());
        out
    };
    let mut ds = Vec::new();
    for _ in 0..dffs {
        ds.push(tree(&mut b, &mut rng));
    }
    let mut os = Vec::new();
    for _ in 0..outputs {
        os.push(tree(&mut b, &mut rng));
    }
    for i in &ins {
        b.input(i.clone());
    }
    for (d, q) in ds.into_iter().zip(&qs) {
        b.dff(d, q.clone());
    }
    for o in os {
        b.output(o);
    }
    b.build().expect("trees are acyclic")
}

/// Small random sequential circuit over all gate kinds, for property tests.
pub fn random_small(seed: u64, max_inputs: usize, max_dffs: usize, max_gates: usize) -> Netlist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ni = rng.gen_range(1..=max_inputs.max(1));
    let nd = rng.gen_range(0..=max_dffs);
    let ng = rng.gen_range(1..=max_gates.max(1));
    let mut b = NetlistBuilder::new(format!("rand{seed}"));
    let mut signals: Vec<String> = (0..ni).map(|i| format!("i{i}")).collect();
    for s in &signals {
        b.input(s.clone());
    }
    let qs: Vec<String> = (0..nd).map(|i| format!("q{i}")).collect();
    signals.extend(qs.iter().cloned());
    let mut gouts = Vec::new();
    for g in 0..ng {
        let kind = GateKind::ALL[rng.gen_range(0..GateKind::ALL.len())];
        let arity = match kind {
            GateKind::Not | GateKind::Buf => 1,
            GateKind::Mux2 => 3,
            _ => rng.gen_range(2..=3),
        };
        let ins: Vec<String> = (0..arity)
            .map(|_| signals[rng.gen_range(0..signals.len())].clone())
            .collect();
        let out = format!("g{g}");
        b.gate(kind, ins, out.clone());
        signals.push(out.clone());
        gouts.push(out);
    }
    for q in qs {
        let d = signals[rng.gen_range(0..signals.len())].clone();
        b.dff(d, q);
    }
    let no = rng.gen_range(1..=3);
    for _ in 0..no {
        let o = signals[rng.gen_range(0..signals.len())].clone();
        if !b.outputs.contains(&o) {
            b.output(o);
        }
    }
    b.build().expect("generator emits acyclic netlists")
}
