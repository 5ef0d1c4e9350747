//! Sequential equivalence by random simulation and by exhaustive
//! product-machine search.

use std::collections::{HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LaneState, Netlist, SimError, SimState, Simulator};

pub fn random_sequences(width: usize, count: usize, len: usize, seed: u64) -> Vec<Vec<Vec<bool>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..len).map(|_| (0..width).map(|_| rng.gen()).collect()).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivReport {
    pub sequences: usize,
    pub mismatches: usize,
    /// Index of the first mismatching sequence and its first bad cycle.
    pub first_mismatch: Option<(usize, usize)>,
}

impl EquivReport {
    pub fn equivalent(&self) -> bool {
        self.mismatches == 0
    }
}

/// Compares `a` under `key_a` with `b` under `key_b` on `count` random
/// sequences of `len` cycles, both from the all-zero state.
pub fn random_equivalence(
    a: &Netlist,
    key_a: Option<&[bool]>,
    b: &Netlist,
    key_b: Option<&[bool]>,
    count: usize,
    len: usize,
    seed: u64,
) -> Result<EquivReport, SimError> {
    let sa = Simulator::new(a, key_a)?;
    let sb = Simulator::new(b, key_b)?;
    let seqs = random_sequences(a.inputs().len(), count, len, seed);
    let oa = sa.run_batch(&SimState::reset(a), &seqs)?;
    let ob = sb.run_batch(&SimState::reset(b), &seqs)?;
    let mut rep = EquivReport {
        sequences: count,
        mismatches: 0,
        first_mismatch: None,
    };
    for (i, (x, y)) in oa.iter().zip(&ob).enumerate() {
        if let Some(t) = x.iter().zip(y).position(|(p, q)| p != q) {
            rep.mismatches += 1;
            rep.first_mismatch.get_or_insert((i, t));
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exhaustive {
    Equivalent { joint_states: usize },
    /// An input sequence from reset whose last cycle shows differing outputs.
    Counterexample(Vec<Vec<bool>>),
    TooLarge,
}

/// Breadth-first search over the product machine of `a` and `b` from reset,
/// applying every input vector in every reachable joint state. Decides
/// equivalence over all input sequences of any length.
///
/// Gives up with [`Exhaustive::TooLarge`] past `max_inputs` inputs or
/// `max_states` joint states.
pub fn exhaustive_equivalence(
    a: &Netlist,
    key_a: Option<&[bool]>,
    b: &Netlist,
    key_b: Option<&[bool]>,
    max_inputs: usize,
    max_states: usize,
) -> Result<Exhaustive, SimError> {
    let ni = a.inputs().len();
    if ni != b.inputs().len() {
        return Err(SimError::Width {
            cycle: 0,
            got: b.inputs().len(),
            expected: ni,
        });
    }
    if ni > max_inputs.min(20) {
        return Ok(Exhaustive::TooLarge);
    }
    let sa = Simulator::new(a, key_a)?;
    let sb = Simulator::new(b, key_b)?;
    let start = (SimState::reset(a), SimState::reset(b));
    // parent links for counterexample reconstruction
    let mut nodes: Vec<((SimState, SimState), Option<(usize, u64)>)> = vec![(start.clone(), None)];
    let mut seen: HashSet<(SimState, SimState)> = HashSet::from([start]);
    let mut queue = VecDeque::from([0usize]);
    let total = 1u64 << ni;
    let (mut va, mut vb) = (Vec::new(), Vec::new());
    va.resize(sa.compiled().num_signals(), 0);
    vb.resize(sb.compiled().num_signals(), 0);
    let trace = |nodes: &Vec<((SimState, SimState), Option<(usize, u64)>)>, mut at: usize, last: u64| {
        let mut vs = vec![last];
        while let Some((p, v)) = nodes[at].1 {
            vs.push(v);
            at = p;
        }
        vs.reverse();
        vs.into_iter()
            .map(|v| (0..ni).map(|i| (v >> i) & 1 == 1).collect())
            .collect()
    };
    while let Some(id) = queue.pop_front() {
        let (ref st_a, ref st_b) = nodes[id].0.clone();
        let la = LaneState::broadcast(st_a);
        let lb = LaneState::broadcast(st_b);
        let mut base = 0u64;
        while base < total {
            let lanes = (total - base).min(64);
            // lane l carries input vector base + l; bit i of the vector is input i
            let ins: Vec<u64> = (0..ni)
                .map(|i| (0..lanes).fold(0u64, |w, l| w | (((base + l) >> i) & 1) << l))
                .collect();
            sa.eval_comb(&la, &ins, &mut va);
            sb.eval_comb(&lb, &ins, &mut vb);
            let mask = if lanes == 64 { !0 } else { (1u64 << lanes) - 1 };
            let diff = sa
                .compiled()
                .outputs
                .iter()
                .zip(&sb.compiled().outputs)
                .fold(0u64, |d, (&x, &y)| d | (va[x] ^ vb[y]));
            if diff & mask != 0 {
                let l = (diff & mask).trailing_zeros() as u64;
                return Ok(Exhaustive::Counterexample(trace(&nodes, id, base + l)));
            }
            let na = sa.next_state(&va);
            let nb = sb.next_state(&vb);
            for l in 0..lanes as usize {
                let key = (na.lane(l), nb.lane(l));
                if !seen.contains(&key) {
                    if seen.len() >= max_states {
                        return Ok(Exhaustive::TooLarge);
                    }
                    seen.insert(key.clone());
                    nodes.push((key, Some((id, base + l as u64))));
                    queue.push_back(nodes.len() - 1);
                }
            }
            base += lanes;
        }
    }
    Ok(Exhaustive::Equivalent {
        joint_states: seen.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::GateKind;

    fn counter(invert_out: bool) -> Netlist {
        let mut b = Netlist::builder("c");
        b.input("en")
            .output("y")
            .dff("d0", "q0")
            .dff("d1", "q1")
            .gate(GateKind::Xor, ["q0", "en"], "d0")
            .gate(GateKind::And, ["q0", "en"], "c0")
            .gate(GateKind::Xor, ["q1", "c0"], "d1")
            .gate(if invert_out { GateKind::Nand } else { GateKind::And }, ["q1", "q0"], "y");
        b.build().unwrap()
    }

    #[test]
    fn self_equivalence() {
        let n = counter(false);
        let r = exhaustive_equivalence(&n, None, &n, None, 8, 1000).unwrap();
        assert_eq!(r, Exhaustive::Equivalent { joint_states: 4 });
        assert!(random_equivalence(&n, None, &n, None, 100, 20, 1).unwrap().equivalent());
    }

    #[test]
    fn counterexample_is_shortest_and_real() {
        let a = counter(false);
        let b = counter(true);
        match exhaustive_equivalence(&a, None, &b, None, 8, 1000).unwrap() {
            Exhaustive::Counterexample(seq) => {
                assert_eq!(seq.len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }
}
