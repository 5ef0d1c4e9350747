//! Cycle-accurate two-valued simulation.
//!
//! The engine is bit-parallel: every signal carries a `u64` whose lanes are
//! independent simulations. Single-sequence helpers put the sequence in lane 0.

use thiserror::Error;

use super::{Compiled, Netlist};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("input vector {cycle} has width {got}, expected {expected}")]
    Width {
        cycle: usize,
        got: usize,
        expected: usize,
    },
    #[error("key has width {got}, expected {expected}")]
    KeyWidth { got: usize, expected: usize },
    #[error("state does not match the netlist's flip-flop/ROM layout")]
    StateShape,
}

/// Stored values of every flip-flop and every ROM output register.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimState {
    pub dff_values: Vec<bool>,
    pub rom_pipeline: Vec<Vec<bool>>,
}

impl SimState {
    /// All-zero reset state.
    pub fn reset(n: &Netlist) -> SimState {
        SimState {
            dff_values: vec![false; n.dffs().len()],
            rom_pipeline: n.roms().iter().map(|r| vec![false; r.data.len()]).collect(),
        }
    }

    fn matches(&self, c: &Compiled) -> bool {
        self.dff_values.len() == c.dff_q.len()
            && self.rom_pipeline.len() == c.roms.len()
            && self
                .rom_pipeline
                .iter()
                .zip(&c.roms)
                .all(|(w, r)| w.len() == r.data.len())
    }
}

/// Per-lane register contents for the bit-parallel engine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaneState {
    pub dff: Vec<u64>,
    pub rom: Vec<Vec<u64>>,
}

impl LaneState {
    pub fn broadcast(s: &SimState) -> LaneState {
        let lane = |b: bool| if b { !0u64 } else { 0 };
        LaneState {
            dff: s.dff_values.iter().map(|&b| lane(b)).collect(),
            rom: s
                .rom_pipeline
                .iter()
                .map(|w| w.iter().map(|&b| lane(b)).collect())
                .collect(),
        }
    }

    pub fn lane(&self, l: usize) -> SimState {
        SimState {
            dff_values: self.dff.iter().map(|&w| (w >> l) & 1 == 1).collect(),
            rom_pipeline: self
                .rom
                .iter()
                .map(|r| r.iter().map(|&w| (w >> l) & 1 == 1).collect())
                .collect(),
        }
    }
}

/// A netlist with its key inputs bound to fixed values.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    c: &'a Compiled,
    key: Vec<u64>,
}

impl<'a> Simulator<'a> {
    /// Binds `key` (ordered like `n.key_inputs()`); `None` means all-zero.
    pub fn new(n: &'a Netlist, key: Option<&[bool]>) -> Result<Simulator<'a>, SimError> {
        let c = n.compiled();
        let key = match key {
            Some(k) if k.len() != c.keys.len() => {
                return Err(SimError::KeyWidth {
                    got: k.len(),
                    expected: c.keys.len(),
                })
            }
            Some(k) => k.iter().map(|&b| if b { !0 } else { 0 }).collect(),
            None => vec![0; c.keys.len()],
        };
        Ok(Simulator { c, key })
    }

    pub fn compiled(&self) -> &Compiled {
        self.c
    }

    pub fn num_inputs(&self) -> usize {
        self.c.inputs.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.c.outputs.len()
    }

    /// Evaluates all combinational logic for the current register contents.
    /// `values` must have one slot per signal.
    pub fn eval_comb(&self, state: &LaneState, inputs: &[u64], values: &mut [u64]) {
        let c = self.c;
        for (&s, &v) in c.inputs.iter().zip(inputs) {
            values[s] = v;
        }
        for (&s, &v) in c.keys.iter().zip(&self.key) {
            values[s] = v;
        }
        for (&s, &v) in c.dff_q.iter().zip(&state.dff) {
            values[s] = v;
        }
        for (r, rom) in c.roms.iter().enumerate() {
            for (&s, &v) in rom.data.iter().zip(&state.rom[r]) {
                values[s] = v;
            }
        }
        for g in &c.gates {
            let v = g.kind.eval_lanes(g.ins.iter().map(|&i| values[i]));
            values[g.out] = v;
        }
    }

    /// Register contents after the clock edge, given evaluated `values`.
    pub fn next_state(&self, values: &[u64]) -> LaneState {
        let c = self.c;
        let dff = c
            .dff_d
            .iter()
            .zip(&c.dff_scan)
            .map(|(&d, scan)| match *scan {
                Some((si, se)) => (values[se] & values[si]) | (!values[se] & values[d]),
                None => values[d],
            })
            .collect();
        let rom = c
            .roms
            .iter()
            .map(|rom| {
                let mut out = vec![0u64; rom.data.len()];
                for lane in 0..64 {
                    let addr = rom
                        .address
                        .iter()
                        .fold(0usize, |a, &s| (a << 1) | ((values[s] >> lane) & 1) as usize);
                    let w = rom.words[addr];
                    for (j, o) in out.iter_mut().enumerate() {
                        *o |= ((w >> j) & 1) << lane;
                    }
                }
                out
            })
            .collect();
        LaneState { dff, rom }
    }

    /// One clock cycle on all lanes. Returns the output words of the cycle.
    pub fn step_lanes(&self, state: &mut LaneState, inputs: &[u64], scratch: &mut Vec<u64>) -> Vec<u64> {
        scratch.resize(self.c.num_signals(), 0);
        self.eval_comb(state, inputs, scratch);
        let outs = self.c.outputs.iter().map(|&o| scratch[o]).collect();
        *state = self.next_state(scratch);
        outs
    }

    pub fn run(&self, init: &SimState, seq: &[Vec<bool>]) -> Result<Vec<Vec<bool>>, SimError> {
        if !init.matches(self.c) {
            return Err(SimError::StateShape);
        }
        for (cycle, v) in seq.iter().enumerate() {
            if v.len() != self.c.inputs.len() {
                return Err(SimError::Width {
                    cycle,
                    got: v.len(),
                    expected: self.c.inputs.len(),
                });
            }
        }
        let mut st = LaneState::broadcast(init);
        let mut scratch = Vec::new();
        Ok(seq
            .iter()
            .map(|v| {
                let ins: Vec<u64> = v.iter().map(|&b| b as u64).collect();
                self.step_lanes(&mut st, &ins, &mut scratch)
                    .into_iter()
                    .map(|w| w & 1 == 1)
                    .collect()
            })
            .collect())
    }

    /// Runs many sequences from the same initial state, 64 at a time.
    /// Sequences may have different lengths.
    pub fn run_batch(
        &self,
        init: &SimState,
        seqs: &[Vec<Vec<bool>>],
    ) -> Result<Vec<Vec<Vec<bool>>>, SimError> {
        if !init.matches(self.c) {
            return Err(SimError::StateShape);
        }
        let ni = self.c.inputs.len();
        for seq in seqs {
            for (cycle, v) in seq.iter().enumerate() {
                if v.len() != ni {
                    return Err(SimError::Width {
                        cycle,
                        got: v.len(),
                        expected: ni,
                    });
                }
            }
        }
        let mut result = Vec::with_capacity(seqs.len());
        let mut scratch = Vec::new();
        for chunk in seqs.chunks(64) {
            let len = chunk.iter().map(Vec::len).max().unwrap_or(0);
            let mut st = LaneState::broadcast(init);
            let mut outs: Vec<Vec<Vec<bool>>> = chunk.iter().map(|s| Vec::with_capacity(s.len())).collect();
            for t in 0..len {
                let ins: Vec<u64> = (0..ni)
                    .map(|i| {
                        chunk.iter().enumerate().fold(0u64, |w, (l, s)| {
                            w | (s.get(t).map_or(false, |v| v[i]) as u64) << l
                        })
                    })
                    .collect();
                let o = self.step_lanes(&mut st, &ins, &mut scratch);
                for (l, s) in chunk.iter().enumerate() {
                    if t < s.len() {
                        outs[l].push(o.iter().map(|&w| (w >> l) & 1 == 1).collect());
                    }
                }
            }
            result.extend(outs);
        }
        Ok(result)
    }
}

/// Simulates `seq` from `init`. Each vector assigns the primary inputs
/// followed by the key inputs.
pub fn simulate(n: &Netlist, init: &SimState, seq: &[Vec<bool>]) -> Result<Vec<Vec<bool>>, SimError> {
    let ni = n.inputs().len();
    let nk = n.key_inputs().len();
    for (cycle, v) in seq.iter().enumerate() {
        if v.len() != ni + nk {
            return Err(SimError::Width {
                cycle,
                got: v.len(),
                expected: ni + nk,
            });
        }
    }
    if nk == 0 {
        return Simulator::new(n, None)?.run(init, seq);
    }
    // Keys may change per cycle here, so run cycle by cycle with rebinding.
    let c = n.compiled();
    if !init.matches(c) {
        return Err(SimError::StateShape);
    }
    let mut st = LaneState::broadcast(init);
    let mut scratch = Vec::new();
    let mut out = Vec::with_capacity(seq.len());
    for v in seq {
        let sim = Simulator::new(n, Some(&v[ni..]))?;
        let ins: Vec<u64> = v[..ni].iter().map(|&b| b as u64).collect();
        out.push(
            sim.step_lanes(&mut st, &ins, &mut scratch)
                .into_iter()
                .map(|w| w & 1 == 1)
                .collect(),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{GateKind, Netlist, RomNode};

    fn not_gate() -> Netlist {
        let mut b = Netlist::builder("inv");
        b.input("a").output("y").gate(GateKind::Not, ["a"], "y");
        b.build().unwrap()
    }

    pub(crate) fn counter2() -> Netlist {
        let mut b = Netlist::builder("counter2");
        b.input("en")
            .output("q1")
            .output("q0")
            .dff("d0", "q0")
            .dff("d1", "q1")
            .gate(GateKind::Not, ["q0"], "d0")
            .gate(GateKind::Xor, ["q1", "q0"], "d1");
        b.build().unwrap()
    }

    #[test]
    fn not_gate_outputs() {
        let n = not_gate();
        let out = simulate(&n, &SimState::reset(&n), &[vec![false], vec![true]]).unwrap();
        assert_eq!(out, vec![vec![true], vec![false]]);
    }

    #[test]
    fn counter_counts() {
        let n = counter2();
        let seq = vec![vec![false]; 4];
        let out = simulate(&n, &SimState::reset(&n), &seq).unwrap();
        let codes: Vec<(bool, bool)> = out.iter().map(|o| (o[0], o[1])).collect();
        assert_eq!(
            codes,
            vec![(false, false), (false, true), (true, false), (true, true)]
        );
    }

    #[test]
    fn width_mismatch() {
        let n = not_gate();
        let err = simulate(&n, &SimState::reset(&n), &[vec![]]).unwrap_err();
        assert!(matches!(err, SimError::Width { cycle: 0, .. }));
    }

    #[test]
    fn rom_has_one_cycle_latency() {
        let mut b = Netlist::builder("rom");
        b.input("a").output("y").rom(RomNode {
            name: "m".into(),
            address: vec!["a".into()],
            data: vec!["y".into()],
            contents: vec![vec![true], vec![false]],
        });
        let n = b.build().unwrap();
        let out = simulate(&n, &SimState::reset(&n), &[vec![false], vec![true], vec![true]]).unwrap();
        // cycle 0 shows the reset word, then contents[a(t-1)]
        assert_eq!(out, vec![vec![false], vec![true], vec![false]]);
    }

    #[test]
    fn batch_matches_single() {
        let n = counter2();
        let sim = Simulator::new(&n, None).unwrap();
        let seqs: Vec<Vec<Vec<bool>>> = (0..70)
            .map(|i| (0..(i % 7 + 1)).map(|t| vec![(i + t) % 3 == 0]).collect())
            .collect();
        let init = SimState::reset(&n);
        let batch = sim.run_batch(&init, &seqs).unwrap();
        for (s, b) in seqs.iter().zip(&batch) {
            assert_eq!(&sim.run(&init, s).unwrap(), b);
        }
    }
}
