use std::collections::HashSet;
use std::time::Instant;

use indexmap::IndexMap;

use super::{
    verify_key, AttackError, AttackStatus, Oracle, Termination, UbsatConfig, UbsatResult,
};
use crate::netlist::{support_of, Driver, Netlist};
use crate::sat::{
    build_miter_in, encode_frames, Cnf, Encoder, FrameSpec, KeyCopy, Lit, Miter, Sig, SolveResult, SolverSession,
    StateInit,
};

/// A solver session fed incrementally from a growing [`Cnf`].
struct Session {
    s: Box<dyn SolverSession>,
    pushed: usize,
    calls: usize,
    deadline: Instant,
}

impl Session {
    fn new(cfg: &UbsatConfig, deadline: Instant) -> Session {
        let mut s = cfg.backend.session();
        s.set_deadline(Some(deadline));
        Session {
            s,
            pushed: 0,
            calls: 0,
            deadline,
        }
    }

    fn solve(&mut self, cnf: &Cnf, assumptions: &[Lit]) -> SolveResult {
        self.s.add_clauses(&cnf.clauses[self.pushed..]);
        self.pushed = cnf.clauses.len();
        self.calls += 1;
        if Instant::now() >= self.deadline {
            return SolveResult::Unknown;
        }
        self.s.solve(assumptions)
    }

    fn key(&self, keys: &[Sig]) -> Vec<bool> {
        Miter::read_key(keys, |v| self.s.value(v))
    }
}

type Dis = (Vec<Vec<bool>>, Vec<Vec<bool>>);

enum Inner {
    /// No further distinguishing sequence at this bound.
    Exhausted,
    Timeout,
}

/// Finds distinguishing sequences until the miter is UNSAT, constraining
/// both key copies with the oracle's response to each.
fn dis_loop(
    m: &mut Miter,
    s: &mut Session,
    locked: &Netlist,
    oracle: &mut dyn Oracle,
    found: &mut Vec<Dis>,
) -> Result<Inner, AttackError> {
    loop {
        match s.solve(&m.cnf, &[m.diff]) {
            SolveResult::Unknown => return Ok(Inner::Timeout),
            SolveResult::Unsat => return Ok(Inner::Exhausted),
            SolveResult::Sat => {
                let seq = m.read_inputs(|v| s.s.value(v));
                let outs = oracle.query(&seq);
                m.constrain_io(locked, &seq, &outs, KeyCopy::Both)?;
                found.push((seq, outs));
            }
        }
    }
}

/// True iff the two keys give different outputs or next observable states
/// from some common state and input.
fn combinational_difference(m: &mut Miter, n: &Netlist) -> Lit {
    let (k1, k2) = (m.a.keys.clone(), m.b.keys.clone());
    let a = encode_frames(
        &mut m.cnf,
        n,
        &FrameSpec {
            frames: 1,
            init: &StateInit::Free,
            keys: Some(&k1),
            inputs: None,
            tag: None,
        },
    );
    let init = StateInit::Signals {
        dff: a.states[0].clone(),
        rom: a.roms[0].clone(),
    };
    let b = encode_frames(
        &mut m.cnf,
        n,
        &FrameSpec {
            frames: 1,
            init: &init,
            keys: Some(&k2),
            inputs: Some(&a.inputs),
            tag: None,
        },
    );
    let (obs_dff, obs_rom) = observable_registers(n);
    let mut e = Encoder::new(&mut m.cnf);
    let rom_pairs = a.roms[1].iter().zip(&b.roms[1]).zip(&obs_rom).filter(|(_, &o)| o).flat_map(|((x, y), _)| x.iter().zip(y));
    let pairs = a.outputs[0]
        .iter()
        .zip(&b.outputs[0])
        .chain(a.states[1].iter().zip(&b.states[1]).zip(&obs_dff).filter(|(_, &o)| o).map(|(p, _)| p))
        .chain(rom_pairs);
    let diffs: Vec<Sig> = pairs.map(|(&x, &y)| e.xor(x, y)).collect();
    let d = e.or(&diffs);
    e.as_lit(d)
}

/// Flip-flops and ROMs whose value can ever reach a primary output.
/// Registers outside this set cannot tell two keys apart.
fn observable_registers(n: &Netlist) -> (Vec<bool>, Vec<bool>) {
    let c = n.compiled();
    let mut dff = vec![false; c.dff_q.len()];
    let mut rom = vec![false; c.roms.len()];
    let mut stack: Vec<usize> = c.outputs.clone();
    let mut seen = HashSet::new();
    while let Some(s) = stack.pop() {
        for src in support_of(c, s) {
            if !seen.insert(src) {
                continue;
            }
            match c.driver[src] {
                Driver::Dff(i) => {
                    dff[i] = true;
                    stack.push(c.dff_d[i]);
                    if let Some((si, se)) = c.dff_scan[i] {
                        stack.extend([si, se]);
                    }
                }
                Driver::Rom { rom: r, .. } => {
                    rom[r] = true;
                    stack.extend(c.roms[r].address.iter().copied());
                }
                _ => {}
            }
        }
    }
    (dff, rom)
}

fn check_interface(locked: &Netlist, oracle: &dyn Oracle) -> Result<(), AttackError> {
    if oracle.num_inputs() != locked.inputs().len() || oracle.num_outputs() != locked.outputs().len() {
        return Err(AttackError::Interface {
            oracle: oracle.num_inputs(),
            oracle_out: oracle.num_outputs(),
            locked: locked.inputs().len(),
            locked_out: locked.outputs().len(),
        });
    }
    Ok(())
}

fn finish(
    locked: &Netlist,
    oracle: &mut dyn Oracle,
    cfg: &UbsatConfig,
    start: Instant,
    status: AttackStatus,
    key: Option<Vec<bool>>,
    bound: usize,
    dis_count: usize,
    termination: Option<Termination>,
    solver_calls: usize,
) -> Result<UbsatResult, AttackError> {
    let elapsed = start.elapsed();
    let verification = match &key {
        Some(k) => Some(verify_key(locked, k, oracle, cfg.verify_sequences, cfg.verify_len, cfg.seed)?),
        None => None,
    };
    let key = key.map(|k| {
        locked
            .key_inputs()
            .iter()
            .cloned()
            .zip(k)
            .collect::<IndexMap<String, bool>>()
    });
    Ok(UbsatResult {
        status,
        key,
        bound,
        dis_count,
        wall_ms: elapsed.as_millis(),
        elapsed,
        verification,
        termination,
        solver_calls,
    })
}

/// Unrolling-based key recovery with increasing bound.
///
/// At each bound the distinguishing-sequence loop runs to exhaustion. Then
/// the search ends if the surviving keys are unique (checked first) or
/// combinationally equivalent (checked second); otherwise the bound grows
/// by `boundary_step`, replaying the sequences found so far. Past
/// `max_bound` the result is inconclusive. The returned key is always
/// re-checked against the oracle on random sequences.
pub fn ubsat_attack(locked: &Netlist, oracle: &mut dyn Oracle, cfg: &UbsatConfig) -> Result<UbsatResult, AttackError> {
    check_interface(locked, oracle)?;
    let start = Instant::now();
    let deadline = start + cfg.time_limit;
    let mut found: Vec<Dis> = Vec::new();
    let mut calls = 0;
    let mut b = cfg.initial_boundary.max(1);
    loop {
        let mut m = build_miter_in(Cnf::new(), locked, b, StateInit::reset(locked), None);
        for (seq, outs) in &found {
            m.constrain_io(locked, seq, outs, KeyCopy::Both)?;
        }
        let mut s = Session::new(cfg, deadline);
        let inner = dis_loop(&mut m, &mut s, locked, oracle, &mut found)?;
        if let Inner::Timeout = inner {
            calls += s.calls;
            return finish(locked, oracle, cfg, start, AttackStatus::Timeout, None, b, found.len(), None, calls);
        }
        let differ = m.keys_differ();
        let uc = s.solve(&m.cnf, &[differ]);
        let termination = match uc {
            SolveResult::Unknown => None,
            SolveResult::Unsat => Some(Termination::UniqueCompletion),
            SolveResult::Sat => {
                let ce = combinational_difference(&mut m, locked);
                match s.solve(&m.cnf, &[ce]) {
                    SolveResult::Unsat => Some(Termination::CombinationalEquivalence),
                    _ => None,
                }
            }
        };
        if Instant::now() >= deadline {
            calls += s.calls;
            return finish(locked, oracle, cfg, start, AttackStatus::Timeout, None, b, found.len(), None, calls);
        }
        if let Some(t) = termination {
            let status = s.solve(&m.cnf, &[]);
            calls += s.calls;
            if status != SolveResult::Sat {
                return finish(locked, oracle, cfg, start, AttackStatus::Timeout, None, b, found.len(), None, calls);
            }
            let key = s.key(m.k1());
            return finish(locked, oracle, cfg, start, AttackStatus::KeyFound, Some(key), b, found.len(), Some(t), calls);
        }
        calls += s.calls;
        if b >= cfg.max_bound {
            return finish(locked, oracle, cfg, start, AttackStatus::InconclusiveAtBound, None, b, found.len(), None, calls);
        }
        b = (b + cfg.boundary_step.max(1)).min(cfg.max_bound);
    }
}

/// Names of the scan-control ports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanPorts {
    pub enable: String,
    pub scan_in: String,
    pub scan_out: String,
}

impl Default for ScanPorts {
    fn default() -> Self {
        ScanPorts {
            enable: "scan_en".into(),
            scan_in: "scan_in".into(),
            scan_out: "scan_out".into(),
        }
    }
}

/// Key recovery through a locked scan chain.
///
/// Each query is one test pattern: shift `L` bits in (scan enable high,
/// other inputs low), capture one cycle with free primary inputs, then shift
/// `L` cycles out, where `L` is the number of scan flip-flops. The pattern is
/// unrolled once into a fixed-depth miter and the distinguishing loop runs
/// until no two surviving keys disagree on any pattern.
pub fn scan_unroll_attack(
    locked: &Netlist,
    oracle: &mut dyn Oracle,
    ports: &ScanPorts,
    cfg: &UbsatConfig,
) -> Result<UbsatResult, AttackError> {
    check_interface(locked, oracle)?;
    let pos = |s: &str| {
        locked
            .inputs()
            .iter()
            .position(|x| x == s)
            .ok_or_else(|| AttackError::ScanPort(s.to_string()))
    };
    let se = pos(&ports.enable)?;
    let si = pos(&ports.scan_in)?;
    if !locked.outputs().contains(&ports.scan_out) {
        return Err(AttackError::ScanPort(ports.scan_out.clone()));
    }
    let chain = locked.dffs().iter().filter(|d| d.scan.is_some()).count();
    let frames = 2 * chain + 1;
    let ni = locked.inputs().len();

    let start = Instant::now();
    let deadline = start + cfg.time_limit;
    let mut cnf = Cnf::new();
    let inputs: Vec<Vec<Sig>> = (0..frames)
        .map(|f| {
            let load = f < chain;
            let capture = f == chain;
            (0..ni)
                .map(|i| {
                    if i == se {
                        Sig::Const(!capture)
                    } else if (i == si && load) || (i != si && capture) {
                        Sig::Lit(cnf.new_var().pos())
                    } else {
                        Sig::Const(false)
                    }
                })
                .collect()
        })
        .collect();
    let mut m = build_miter_in(cnf, locked, frames, StateInit::reset(locked), Some(&inputs));
    let mut s = Session::new(cfg, deadline);
    let mut found = Vec::new();
    let inner = dis_loop(&mut m, &mut s, locked, oracle, &mut found)?;
    let (status, key, termination) = match inner {
        Inner::Timeout => (AttackStatus::Timeout, None, None),
        Inner::Exhausted => match s.solve(&m.cnf, &[]) {
            SolveResult::Sat => (AttackStatus::KeyFound, Some(s.key(m.k1())), Some(Termination::Exhausted)),
            _ => (AttackStatus::Timeout, None, None),
        },
    };
    let calls = s.calls;
    finish(locked, oracle, cfg, start, status, key, frames, found.len(), termination, calls)
}

#[cfg(test)]
mod tests {
    use super::super::SimOracle;
    use super::*;
    use crate::lock::{lock_connectivity, LockTargets, TargetMode};
    use crate::netlist::bench::parse_bench;
    use crate::netlist::insert_scan_chain;
    use crate::switch::NetworkParams;

    fn counter() -> Netlist {
        parse_bench("INPUT(en)\nOUTPUT(q1)\nOUTPUT(q0)\nq0 = DFF(d0)\nq1 = DFF(d1)\nd0 = NOT(q0)\nd1 = XOR(q1, q0)\n")
            .unwrap()
    }

    fn quick() -> UbsatConfig {
        UbsatConfig {
            verify_sequences: 200,
            verify_len: 20,
            ..UbsatConfig::default()
        }
    }

    #[test]
    fn unlocked_circuit_is_trivial() {
        let n = counter();
        let mut o = SimOracle::new(n.clone());
        let r = ubsat_attack(&n, &mut o, &quick()).unwrap();
        assert_eq!(r.status, AttackStatus::KeyFound);
        assert_eq!(r.dis_count, 0);
        assert!(r.key_verified());
    }

    #[test]
    fn counter_size_two() {
        let n = counter();
        let t = LockTargets {
            mode: TargetMode::FsmDataIn,
            ffs: vec!["q1".into(), "q0".into()],
        };
        for seed in 0..4 {
            let pkg = lock_connectivity(&n, &t, NetworkParams::new(2, 0, 1).unwrap(), seed).unwrap();
            let mut o = SimOracle::new(n.clone());
            let r = ubsat_attack(&pkg.locked, &mut o, &quick()).unwrap();
            assert!(r.key_verified(), "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn interface_mismatch() {
        let n = counter();
        let other = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n").unwrap();
        let mut o = SimOracle::new(other);
        assert!(matches!(ubsat_attack(&n, &mut o, &quick()), Err(AttackError::Interface { .. })));
    }

    #[test]
    fn scan_attack_on_counter() {
        let n = insert_scan_chain(&counter(), None).unwrap();
        let t = LockTargets {
            mode: TargetMode::ScanIn,
            ffs: vec!["q0".into(), "q1".into()],
        };
        let pkg = lock_connectivity(&n, &t, NetworkParams::new(2, 0, 1).unwrap(), 5).unwrap();
        let mut o = SimOracle::new(n.clone());
        let r = scan_unroll_attack(&pkg.locked, &mut o, &ScanPorts::default(), &quick()).unwrap();
        assert!(r.key_verified(), "{r:?}");
        assert_eq!(r.bound, 5);
    }
}
