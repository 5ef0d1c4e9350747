//! Time-frame expansion, miters and oracle I/O constraints.

use thiserror::Error;

use super::tseitin::encode_comb;
use super::{Cnf, Encoder, Lit, Sig, Var};
use crate::netlist::{Driver, Netlist, SimState};

/// How frame-0 registers are bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateInit {
    /// Constants; they fold through the first frames.
    Known(SimState),
    /// Fresh variables.
    Free,
    /// Existing signals, e.g. another copy's free state.
    Signals { dff: Vec<Sig>, rom: Vec<Vec<Sig>> },
}

impl StateInit {
    pub fn reset(n: &Netlist) -> StateInit {
        StateInit::Known(SimState::reset(n))
    }
}

/// Parameters of one unrolled copy.
#[derive(Debug, Clone)]
pub struct FrameSpec<'a> {
    pub frames: usize,
    pub init: &'a StateInit,
    /// Key values shared by all frames; `None` allocates fresh variables.
    pub keys: Option<&'a [Sig]>,
    /// Per-frame input values; `None` allocates fresh variables.
    pub inputs: Option<&'a [Vec<Sig>]>,
    /// Prefix for var-map names; `None` leaves the copy's variables unnamed.
    pub tag: Option<&'a str>,
}

/// The signals of an unrolled copy.
#[derive(Debug, Clone, Default)]
pub struct Frames {
    /// `[frame][input]`
    pub inputs: Vec<Vec<Sig>>,
    pub keys: Vec<Sig>,
    /// `[frame][output]`
    pub outputs: Vec<Vec<Sig>>,
    /// Flip-flop values at the start of each frame, plus the final state.
    pub states: Vec<Vec<Sig>>,
    /// ROM output registers at the start of each frame, plus the final ones.
    pub roms: Vec<Vec<Vec<Sig>>>,
}

/// Encodes `spec.frames` copies of the combinational core of `n`, chaining
/// flip-flops and ROM registers from frame to frame.
pub fn encode_frames(cnf: &mut Cnf, n: &Netlist, spec: &FrameSpec) -> Frames {
    let c = n.compiled();
    let mut out = Frames::default();
    let (mut state, mut rom): (Vec<Option<Sig>>, Vec<Vec<Option<Sig>>>) = match spec.init {
        StateInit::Known(s) => (
            s.dff_values.iter().map(|&b| Some(Sig::Const(b))).collect(),
            s.rom_pipeline
                .iter()
                .map(|w| w.iter().map(|&b| Some(Sig::Const(b))).collect())
                .collect(),
        ),
        StateInit::Free => (
            vec![None; c.dff_q.len()],
            c.roms.iter().map(|r| vec![None; r.data.len()]).collect(),
        ),
        StateInit::Signals { dff, rom } => (
            dff.iter().map(|&s| Some(s)).collect(),
            rom.iter().map(|w| w.iter().map(|&s| Some(s)).collect()).collect(),
        ),
    };
    let mut keys: Vec<Option<Sig>> = match spec.keys {
        Some(k) => k.iter().map(|&s| Some(s)).collect(),
        None => vec![None; c.keys.len()],
    };
    for f in 0..spec.frames {
        let ins: Vec<Option<Sig>> = match spec.inputs {
            Some(v) => v[f].iter().map(|&s| Some(s)).collect(),
            None => vec![None; c.inputs.len()],
        };
        let sig = encode_comb(cnf, c, spec.tag.map(|t| (f, t)), &mut |s| match c.driver[s] {
            Driver::Input(i) => ins[i],
            Driver::Key(k) => keys[k],
            Driver::Dff(d) => state[d],
            Driver::Rom { rom: r, bit } => rom[r][bit],
            Driver::Gate(_) => None,
        });
        if f == 0 {
            keys = c.keys.iter().map(|&k| Some(sig[k])).collect();
            out.keys = c.keys.iter().map(|&k| sig[k]).collect();
        }
        out.inputs.push(c.inputs.iter().map(|&i| sig[i]).collect());
        out.outputs.push(c.outputs.iter().map(|&o| sig[o]).collect());
        out.states.push(c.dff_q.iter().map(|&q| sig[q]).collect());
        out.roms.push(
            c.roms
                .iter()
                .map(|r| r.data.iter().map(|&d| sig[d]).collect())
                .collect(),
        );
        let mut e = Encoder::new(cnf);
        state = c
            .dff_d
            .iter()
            .zip(&c.dff_scan)
            .map(|(&d, scan)| {
                Some(match *scan {
                    Some((si, se)) => e.mux(sig[se], sig[d], sig[si]),
                    None => sig[d],
                })
            })
            .collect();
        rom = c
            .roms
            .iter()
            .map(|r| {
                let addr: Vec<Sig> = r.address.iter().map(|&a| sig[a]).collect();
                (0..r.data.len())
                    .map(|j| {
                        let leaves: Vec<Sig> =
                            r.words.iter().map(|w| Sig::Const((w >> j) & 1 == 1)).collect();
                        Some(e.mux_tree(&addr, &leaves))
                    })
                    .collect()
            })
            .collect();
    }
    // Final registers: free state with zero frames still needs variables.
    let fresh = |s: Option<Sig>, cnf: &mut Cnf| s.unwrap_or_else(|| Sig::Lit(cnf.new_var().pos()));
    out.states.push(state.into_iter().map(|s| fresh(s, cnf)).collect());
    out.roms
        .push(rom.into_iter().map(|w| w.into_iter().map(|s| fresh(s, cnf)).collect()).collect());
    out
}

/// A purely combinational expansion of a sequential netlist.
#[derive(Debug, Clone)]
pub struct UnrolledCircuit {
    pub cnf: Cnf,
    pub frames: Frames,
}

impl UnrolledCircuit {
    pub fn num_frames(&self) -> usize {
        self.frames.outputs.len()
    }
}

/// `b` frames from `init`, with fresh per-frame inputs and shared keys.
/// Variables are named `(frame, signal)`.
pub fn unroll(n: &Netlist, b: usize, init: &SimState) -> UnrolledCircuit {
    let mut cnf = Cnf::new();
    let init = StateInit::Known(init.clone());
    let frames = encode_frames(
        &mut cnf,
        n,
        &FrameSpec {
            frames: b,
            init: &init,
            keys: None,
            inputs: None,
            tag: Some(""),
        },
    );
    UnrolledCircuit { cnf, frames }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MiterError {
    #[error("sequence has {inputs} input vectors but {outputs} output vectors")]
    Length { inputs: usize, outputs: usize },
    #[error("vector width {got}, expected {expected}")]
    Width { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyCopy {
    K1,
    K2,
    Both,
}

/// Two unrolled copies sharing every frame input, with separate keys.
#[derive(Debug, Clone)]
pub struct Miter {
    pub cnf: Cnf,
    pub init: StateInit,
    pub a: Frames,
    pub b: Frames,
    /// True iff some frame output differs between the copies. Pass it as an
    /// assumption to ask for a distinguishing input sequence.
    pub diff: Lit,
    constraints: usize,
}

impl Miter {
    pub fn k1(&self) -> &[Sig] {
        &self.a.keys
    }

    pub fn k2(&self) -> &[Sig] {
        &self.b.keys
    }

    pub fn frames(&self) -> usize {
        self.a.outputs.len()
    }

    /// Input sequence of a model.
    pub fn read_inputs(&self, value: impl Fn(Var) -> Option<bool>) -> Vec<Vec<bool>> {
        self.a
            .inputs
            .iter()
            .map(|v| v.iter().map(|s| s.eval(&value)).collect())
            .collect()
    }

    pub fn read_key(keys: &[Sig], value: impl Fn(Var) -> Option<bool>) -> Vec<bool> {
        keys.iter().map(|s| s.eval(&value)).collect()
    }

    /// Literal that is true iff K1 and K2 differ somewhere.
    pub fn keys_differ(&mut self) -> Lit {
        let (k1, k2) = (self.a.keys.clone(), self.b.keys.clone());
        let mut e = Encoder::new(&mut self.cnf);
        let diffs: Vec<Sig> = k1.iter().zip(&k2).map(|(&x, &y)| e.xor(x, y)).collect();
        let d = e.or(&diffs);
        e.as_lit(d)
    }

    /// Forces the chosen key copies to reproduce `outs` on input sequence
    /// `seq` from the miter's initial state. Each call adds fresh unnamed
    /// copies of the circuit with constant inputs.
    pub fn constrain_io(
        &mut self,
        n: &Netlist,
        seq: &[Vec<bool>],
        outs: &[Vec<bool>],
        which: KeyCopy,
    ) -> Result<(), MiterError> {
        let keys: Vec<Vec<Sig>> = match which {
            KeyCopy::K1 => vec![self.a.keys.clone()],
            KeyCopy::K2 => vec![self.b.keys.clone()],
            KeyCopy::Both => vec![self.a.keys.clone(), self.b.keys.clone()],
        };
        for k in keys {
            constrain_io(&mut self.cnf, n, &self.init, &k, seq, outs)?;
        }
        self.constraints += 1;
        Ok(())
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints
    }
}

/// Builds the `frames`-deep miter of `n` against itself.
///
/// Copy A's variables are named `A/<signal>`, copy B's `B/<signal>`.
pub fn build_miter(n: &Netlist, frames: usize, init: StateInit) -> Miter {
    build_miter_in(Cnf::new(), n, frames, init, None)
}

/// Like [`build_miter`], continuing `cnf`. `inputs` supplies the shared
/// frame inputs (built on `cnf`, possibly pinned to constants).
pub fn build_miter_in(
    mut cnf: Cnf,
    n: &Netlist,
    frames: usize,
    init: StateInit,
    inputs: Option<&[Vec<Sig>]>,
) -> Miter {
    let a = encode_frames(
        &mut cnf,
        n,
        &FrameSpec {
            frames,
            init: &init,
            keys: None,
            inputs,
            tag: Some("A/"),
        },
    );
    let b = encode_frames(
        &mut cnf,
        n,
        &FrameSpec {
            frames,
            init: &init,
            keys: None,
            inputs: Some(&a.inputs),
            tag: Some("B/"),
        },
    );
    let mut e = Encoder::new(&mut cnf);
    let mut diffs = Vec::new();
    for (oa, ob) in a.outputs.iter().zip(&b.outputs) {
        for (&x, &y) in oa.iter().zip(ob) {
            diffs.push(e.xor(x, y));
        }
    }
    let d = e.or(&diffs);
    let diff = e.as_lit(d);
    Miter {
        cnf,
        init,
        a,
        b,
        diff,
        constraints: 0,
    }
}

/// Adds a copy of `n` under `keys` with inputs fixed to `seq` and asserts
/// that its outputs equal `outs`, cycle by cycle.
pub fn constrain_io(
    cnf: &mut Cnf,
    n: &Netlist,
    init: &StateInit,
    keys: &[Sig],
    seq: &[Vec<bool>],
    outs: &[Vec<bool>],
) -> Result<(), MiterError> {
    if seq.len() != outs.len() {
        return Err(MiterError::Length {
            inputs: seq.len(),
            outputs: outs.len(),
        });
    }
    let (ni, no) = (n.inputs().len(), n.outputs().len());
    for (x, y) in seq.iter().zip(outs) {
        if x.len() != ni {
            return Err(MiterError::Width {
                got: x.len(),
                expected: ni,
            });
        }
        if y.len() != no {
            return Err(MiterError::Width {
                got: y.len(),
                expected: no,
            });
        }
    }
    let inputs: Vec<Vec<Sig>> = seq
        .iter()
        .map(|v| v.iter().map(|&b| Sig::Const(b)).collect())
        .collect();
    let fr = encode_frames(
        cnf,
        n,
        &FrameSpec {
            frames: seq.len(),
            init,
            keys: Some(keys),
            inputs: Some(&inputs),
            tag: None,
        },
    );
    let mut e = Encoder::new(cnf);
    for (os, want) in fr.outputs.iter().zip(outs) {
        for (&s, &w) in os.iter().zip(want) {
            e.assert(if w { s } else { !s });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{GateKind, Netlist, Simulator};
    use crate::sat::{Cdcl, SolveResult, SolverSession};

    fn counter2() -> Netlist {
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
    fn counter_frames_fold_to_constants() {
        let n = counter2();
        let u = unroll(&n, 4, &SimState::reset(&n));
        let vals: Vec<(Sig, Sig)> = u.frames.outputs.iter().map(|o| (o[0], o[1])).collect();
        let c = |b| Sig::Const(b);
        assert_eq!(
            vals,
            vec![(c(false), c(false)), (c(false), c(true)), (c(true), c(false)), (c(true), c(true))]
        );
    }

    #[test]
    fn miter_without_keys_is_unsat() {
        let n = counter2();
        let m = build_miter(&n, 3, StateInit::reset(&n));
        let mut s = Cdcl::new();
        s.add_clauses(&m.cnf.clauses);
        assert_eq!(s.solve(&[m.diff]), SolveResult::Unsat);
    }

    #[test]
    fn keyed_miter_finds_dis_and_io_prunes() {
        // y = x XOR k: any DIS separates the two keys
        let mut b = Netlist::builder("xk");
        b.input("x").key_input("k").output("y").gate(GateKind::Xor, ["x", "k"], "y");
        let n = b.build().unwrap();
        let mut m = build_miter(&n, 1, StateInit::reset(&n));
        let mut s = Cdcl::new();
        s.add_clauses(&m.cnf.clauses);
        assert_eq!(s.solve(&[m.diff]), SolveResult::Sat);
        let dis = m.read_inputs(|v| s.value(v));
        let oracle = Simulator::new(&n, Some(&[true])).unwrap();
        let outs = oracle.run(&SimState::reset(&n), &dis).unwrap();
        let before = m.cnf.clauses.len();
        m.constrain_io(&n, &dis, &outs, KeyCopy::Both).unwrap();
        s.add_clauses(&m.cnf.clauses[before..]);
        assert_eq!(s.solve(&[m.diff]), SolveResult::Unsat);
        assert_eq!(s.solve(&[]), SolveResult::Sat);
        assert_eq!(Miter::read_key(m.k1(), |v| s.value(v)), vec![true]);
    }
}
