use std::collections::{BTreeSet, HashSet, VecDeque};

use thiserror::Error;

use super::spec::{bits_msb, FsmSpec, SpecError};
use super::{Stg, Transition};
use crate::netlist::{Driver, GateKind, LaneState, Netlist, NetlistBuilder, NetlistError, SimError, Simulator};

/// Two-level implementation of `spec`.
///
/// Flip-flops are named `q0..` with `q0` the most significant state bit and
/// hold [`FsmSpec::stored_code`]. Unused codes fall back to the reset state.
/// Returns the netlist and its state flip-flops, MSB first.
pub fn synthesize_fsm(spec: &FsmSpec) -> Result<(Netlist, Vec<String>), SpecError> {
    spec.validate()?;
    let w = spec.width;
    let ni = spec.inputs.len();
    let mut b = NetlistBuilder::new(spec.name.clone());
    for x in &spec.inputs {
        b.input(x.clone());
    }
    for y in &spec.outputs {
        b.output(y.clone());
    }
    let q: Vec<String> = (0..w).map(|i| format!("q{i}")).collect();

    let mut made: HashSet<String> = HashSet::new();
    let mut not = |b: &mut NetlistBuilder, src: &str, name: String| -> String {
        if made.insert(name.clone()) {
            b.gate(GateKind::Not, [src], name.clone());
        }
        name
    };

    let bit = |code: u64, i: usize| (code >> (w - 1 - i)) & 1 == 1;

    // State decoders, built on demand.
    let mut decoders: Vec<Option<String>> = vec![None; spec.states.len()];
    let mut decoder = |b: &mut NetlistBuilder, s: usize, not: &mut dyn FnMut(&mut NetlistBuilder, &str, String) -> String| {
        if let Some(d) = &decoders[s] {
            return d.clone();
        }
        let c = spec.stored_code(s);
        let lits: Vec<String> = (0..w)
            .map(|i| if bit(c, i) { q[i].clone() } else { not(b, &q[i], format!("nq{i}")) })
            .collect();
        let d = if lits.len() == 1 {
            lits[0].clone()
        } else {
            let name = format!("st{s}");
            b.gate(GateKind::And, lits, name.clone());
            name
        };
        decoders[s] = Some(d.clone());
        d
    };

    // (signal, next state, outputs) per product term
    let mut terms: Vec<(String, usize, Vec<bool>)> = Vec::new();
    for (k, t) in spec.transitions.iter().enumerate() {
        let st = decoder(&mut b, t.from, &mut not);
        let mut lits = vec![st.clone()];
        for (i, c) in t.cube.iter().enumerate() {
            match c {
                Some(true) => lits.push(spec.inputs[i].clone()),
                Some(false) => lits.push(not(&mut b, &spec.inputs[i], format!("nx{i}"))),
                None => {}
            }
        }
        let sig = if lits.len() == 1 {
            st
        } else {
            let name = format!("t{k}");
            b.gate(GateKind::And, lits, name.clone());
            name
        };
        terms.push((sig, t.to, t.output.clone()));
    }

    // Self-loops for (state, input) pairs no cube covers.
    for s in 0..spec.states.len() {
        let own: Vec<usize> = (0..spec.transitions.len())
            .filter(|&k| spec.transitions[k].from == s)
            .collect();
        if own.iter().any(|&k| spec.transitions[k].cube.iter().all(Option::is_none)) {
            continue;
        }
        let covered = ni <= super::spec::MAX_SPEC_INPUTS
            && (0..1u64 << ni).all(|x| {
                let v = bits_msb(x, ni);
                own.iter().any(|&k| {
                    spec.transitions[k]
                        .cube
                        .iter()
                        .zip(&v)
                        .all(|(c, &b)| c.map_or(true, |c| c == b))
                })
            });
        if covered {
            continue;
        }
        let st = decoder(&mut b, s, &mut not);
        let hold = if own.is_empty() {
            st
        } else {
            let cov = if own.len() == 1 {
                terms[own[0]].0.clone()
            } else {
                let name = format!("cov{s}");
                b.gate(GateKind::Or, own.iter().map(|&k| terms[k].0.clone()), name.clone());
                name
            };
            let ncov = not(&mut b, &cov, format!("ncov{s}"));
            let name = format!("hold{s}");
            b.gate(GateKind::And, [st, ncov], name.clone());
            name
        };
        terms.push((hold, s, vec![false; spec.outputs.len()]));
    }

    let mut zero: Option<String> = None;
    let mut zero_sig = |b: &mut NetlistBuilder| {
        zero.get_or_insert_with(|| {
            b.gate(GateKind::Xor, [q[0].clone(), q[0].clone()], "zero");
            "zero".to_string()
        })
        .clone()
    };

    for i in 0..w {
        let on: Vec<String> = terms
            .iter()
            .filter(|(_, to, _)| bit(spec.stored_code(*to), i))
            .map(|(s, _, _)| s.clone())
            .collect();
        let d = match on.len() {
            0 => zero_sig(&mut b),
            1 => on[0].clone(),
            _ => {
                let name = format!("d{i}");
                b.gate(GateKind::Or, on, name.clone());
                name
            }
        };
        b.dff(d, q[i].clone());
    }
    for (j, y) in spec.outputs.iter().enumerate() {
        let on: Vec<String> = terms.iter().filter(|t| t.2[j]).map(|t| t.0.clone()).collect();
        match on.len() {
            0 => {
                let z = zero_sig(&mut b);
                b.gate(GateKind::Buf, [z], y.clone());
            }
            1 => {
                b.gate(GateKind::Buf, on, y.clone());
            }
            _ => {
                b.gate(GateKind::Or, on, y.clone());
            }
        }
    }
    let n = b.build().map_err(|e| match e {
        NetlistError::DuplicateDriver(s) => SpecError::Syntax {
            line: 0,
            msg: format!("name `{s}` collides with a generated signal"),
        },
        other => SpecError::Syntax {
            line: 0,
            msg: other.to_string(),
        },
    })?;
    Ok((n, q))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error("{0} primary inputs exceed the exhaustive cap of 16")]
    TooManyInputs(usize),
    #[error("register `{0}` is not listed as a state bit")]
    NonStateRegister(String),
    #[error("`{0}` is not a flip-flop output or ROM data bit")]
    NotARegister(String),
    #[error("state width {0} outside 1..=63")]
    Width(usize),
    #[error("more than {0} state visits")]
    TooManyStates(usize),
    #[error(transparent)]
    Sim(#[from] SimError),
}

pub const MAX_EXTRACT_INPUTS: usize = 16;
const MAX_VISITS: usize = 1 << 24;

/// Reachable STG by breadth-first search from `initial`, sweeping every input
/// vector in each state. `state_bits` are flip-flop outputs or ROM data bits,
/// most significant first; every register must be one of them.
pub fn extract_stg_explicit(
    n: &Netlist,
    state_bits: &[String],
    initial: u64,
    key: Option<&[bool]>,
) -> Result<Stg, ExtractError> {
    let c = n.compiled();
    let ni = c.inputs.len();
    let w = state_bits.len();
    if ni > MAX_EXTRACT_INPUTS {
        return Err(ExtractError::TooManyInputs(ni));
    }
    if w == 0 || w > 63 {
        return Err(ExtractError::Width(w));
    }
    // where each state bit lives in LaneState
    #[derive(Clone, Copy)]
    enum Slot {
        Dff(usize),
        Rom(usize, usize),
    }
    let mut slots = Vec::with_capacity(w);
    let mut claimed: HashSet<usize> = HashSet::new();
    for s in state_bits {
        let idx = *c.index.get(s).ok_or_else(|| ExtractError::NotARegister(s.clone()))?;
        claimed.insert(idx);
        slots.push(match c.driver[idx] {
            Driver::Dff(i) => Slot::Dff(i),
            Driver::Rom { rom, bit } => Slot::Rom(rom, bit),
            _ => return Err(ExtractError::NotARegister(s.clone())),
        });
    }
    for &qi in c.dff_q.iter().chain(c.roms.iter().flat_map(|r| r.data.iter())) {
        if !claimed.contains(&qi) {
            return Err(ExtractError::NonStateRegister(c.names[qi].clone()));
        }
    }

    let sim = Simulator::new(n, key)?;
    let mut stg = Stg::new(w, initial, n.inputs().to_vec(), n.outputs().to_vec());
    let mut template = LaneState {
        dff: vec![0; c.dff_q.len()],
        rom: c.roms.iter().map(|r| vec![0; r.data.len()]).collect(),
    };
    let total = 1u64 << ni;
    let lanes = total.min(64) as usize;
    let mut values = vec![0u64; c.num_signals()];
    let mut seen = BTreeSet::from([initial]);
    let mut queue = VecDeque::from([initial]);
    let mut visits = 0usize;
    while let Some(code) = queue.pop_front() {
        for (k, slot) in slots.iter().enumerate() {
            let v = if (code >> (w - 1 - k)) & 1 == 1 { !0 } else { 0 };
            match *slot {
                Slot::Dff(i) => template.dff[i] = v,
                Slot::Rom(r, b) => template.rom[r][b] = v,
            }
        }
        let mut base = 0u64;
        while base < total {
            visits += lanes;
            if visits > MAX_VISITS {
                return Err(ExtractError::TooManyStates(MAX_VISITS));
            }
            let ins: Vec<u64> = (0..ni)
                .map(|i| {
                    let p = ni - 1 - i;
                    if p < 6 {
                        lane_pattern(p)
                    } else if (base >> p) & 1 == 1 {
                        !0
                    } else {
                        0
                    }
                })
                .collect();
            sim.eval_comb(&template, &ins, &mut values);
            let next = sim.next_state(&values);
            for l in 0..lanes {
                let mut nc = 0u64;
                for slot in &slots {
                    let word = match *slot {
                        Slot::Dff(i) => next.dff[i],
                        Slot::Rom(r, b) => next.rom[r][b],
                    };
                    nc = nc << 1 | (word >> l) & 1;
                }
                let x = base + l as u64;
                stg.add(Transition {
                    state: code,
                    input: bits_msb(x, ni),
                    next: nc,
                    output: c.outputs.iter().map(|&o| (values[o] >> l) & 1 == 1).collect(),
                });
                if seen.insert(nc) {
                    queue.push_back(nc);
                }
            }
            base += 64;
        }
    }
    Ok(stg)
}

/// Lane word whose lane `l` carries bit `p` of `l`.
fn lane_pattern(p: usize) -> u64 {
    (0..64).filter(|l| (l >> p) & 1 == 1).fold(0, |w, l| w | 1 << l)
}

#[cfg(test)]
mod tests {
    use super::super::{parse_fsm_spec, random_fsm, stg_equal, Encoding, RandomFsm};
    use super::*;
    use crate::netlist::bench::parse_bench;

    #[test]
    fn toggler_is_one_flop_with_inverter() {
        let s = parse_fsm_spec("t", ".i 0\n.o 1\n- A B 0\n- B A 1\n").unwrap();
        let (n, q) = synthesize_fsm(&s).unwrap();
        assert_eq!(q, ["q0"]);
        assert_eq!(n.dffs().len(), 1);
        let d = &n.dffs()[0].d;
        let g = n.gates().iter().find(|g| &g.output == d).unwrap();
        assert_eq!((g.kind, g.inputs.as_slice()), (GateKind::Not, &["q0".to_string()][..]));
        let stg = extract_stg_explicit(&n, &q, 0, None).unwrap();
        assert_eq!((stg.states.len(), stg.transitions.len()), (2, 2));
        assert!(stg_equal(&stg, &s.to_stg().unwrap()).unwrap());
    }

    #[test]
    fn counter_ring() {
        let n = parse_bench(
            "INPUT(en)\nOUTPUT(q1)\nOUTPUT(q0)\nq0 = DFF(d0)\nq1 = DFF(d1)\nd0 = NOT(q0)\nd1 = XOR(q1, q0)\n",
        )
        .unwrap();
        let g = extract_stg_explicit(&n, &["q1".into(), "q0".into()], 0, None).unwrap();
        assert_eq!(g.states, BTreeSet::from([0, 1, 2, 3]));
        for t in &g.transitions {
            assert_eq!(t.next, (t.state + 1) % 4);
        }
        assert_eq!(g.transitions.len(), 8);
    }

    #[test]
    fn one_hot_round_trip() {
        let s = random_fsm(&RandomFsm {
            states: 4,
            inputs: 2,
            outputs: 2,
            deps: 2,
            encoding: Encoding::OneHot,
            width: None,
            seed: 3,
        });
        let (n, q) = synthesize_fsm(&s).unwrap();
        assert_eq!(q.len(), 4);
        let g = extract_stg_explicit(&n, &q, 0, None).unwrap();
        assert!(stg_equal(&g, &s.to_stg().unwrap()).unwrap());
    }

    #[test]
    fn partial_spec_holds_state() {
        let s = parse_fsm_spec("p", ".i 2\n.o 1\n11 A B 1\n-- B A 0\n").unwrap();
        let (n, q) = synthesize_fsm(&s).unwrap();
        let g = extract_stg_explicit(&n, &q, 0, None).unwrap();
        assert!(stg_equal(&g, &s.to_stg().unwrap()).unwrap());
        let self_loops = g.transitions.iter().filter(|t| t.state == t.next).count();
        assert_eq!(self_loops, 3);
    }

    #[test]
    fn extra_register_rejected() {
        let n = parse_bench("INPUT(a)\nOUTPUT(y)\nq = DFF(a)\nr = DFF(q)\ny = AND(q, r)\n").unwrap();
        assert_eq!(
            extract_stg_explicit(&n, &["q".into()], 0, None),
            Err(ExtractError::NonStateRegister("r".into()))
        );
    }

    #[test]
    fn wide_inputs_cross_lane_chunks() {
        let s = random_fsm(&RandomFsm {
            states: 5,
            inputs: 8,
            outputs: 1,
            deps: 3,
            encoding: Encoding::Binary,
            width: None,
            seed: 11,
        });
        let (n, q) = synthesize_fsm(&s).unwrap();
        let g = extract_stg_explicit(&n, &q, 0, None).unwrap();
        assert_eq!(g.transitions.len(), 5 * 256);
        assert!(stg_equal(&g, &s.to_stg().unwrap()).unwrap());
    }
}
