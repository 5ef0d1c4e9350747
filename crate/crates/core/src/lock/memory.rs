use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fresh_prefix, LockError, LockMeta, LockMethod, LockPackage};
use crate::netlist::{cone_gates, support_of, Compiled, Driver, GateKind, LaneState, Netlist, RomNode, SimState, Simulator};
use crate::switch::mux_tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryMode {
    Full,
    Fsmim,
}

/// Per-state input selection feeding the ROM address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmimSpec {
    /// Register outputs in the cone support, most significant first.
    pub state_signals: Vec<String>,
    /// Selected primary inputs per reachable state code, slot 0 first.
    pub per_state_inputs: BTreeMap<u64, Vec<String>>,
    pub mux_width: usize,
    pub address_layout: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConeTable {
    /// Rows indexed by the support values, `address[0]` the MSB.
    Full {
        address: Vec<String>,
        table: Vec<Vec<bool>>,
    },
    Fsmim {
        spec: FsmimSpec,
        /// Width of the full support, for size comparisons.
        support_width: usize,
        table: Vec<Vec<bool>>,
    },
}

impl ConeTable {
    pub fn table(&self) -> &[Vec<bool>] {
        match self {
            ConeTable::Full { table, .. } | ConeTable::Fsmim { table, .. } => table,
        }
    }

    pub fn address_width(&self) -> usize {
        self.table().len().trailing_zeros() as usize
    }

    pub fn bits(&self) -> usize {
        self.table().len() * self.table().first().map_or(0, Vec::len)
    }

    /// Bits a full-support table over the same cones would need.
    pub fn full_bits(&self) -> u128 {
        let y = self.table().first().map_or(0, Vec::len) as u128;
        match self {
            ConeTable::Full { table, .. } => table.len() as u128 * y,
            ConeTable::Fsmim { support_width, .. } => (1u128 << support_width) * y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryLockOptions {
    pub mode: MemoryMode,
    /// Pads the address with spare signals up to exactly this width.
    pub addr_width: Option<usize>,
    /// Adds the targeted flip-flops' own outputs to the address, so every
    /// ROM bit feeds back into the ROM.
    pub feedback_targets: bool,
    pub seed: u64,
}

impl MemoryLockOptions {
    pub fn new(mode: MemoryMode) -> Self {
        MemoryLockOptions {
            mode,
            addr_width: None,
            feedback_targets: false,
            seed: 0,
        }
    }
}

pub const FULL_SUPPORT_CAP: usize = 20;
pub const REACH_CAP: usize = 1 << 20;
pub const DEFAULT_LUT_CAP: usize = 16;

struct Cones {
    sinks: Vec<usize>,
    /// Registers first, then inputs; compiled order within each group.
    support: Vec<usize>,
}

fn cones(n: &Netlist, ffs: &[String], feedback: bool) -> Result<Cones, LockError> {
    let c = n.compiled();
    let mut sinks = Vec::with_capacity(ffs.len());
    let mut support = BTreeSet::new();
    let mut seen = HashSet::new();
    for q in ffs {
        let i = n.dff_by_q(q).ok_or_else(|| LockError::UnknownFf(q.clone()))?;
        if !seen.insert(q) {
            return Err(LockError::DuplicateFf(q.clone()));
        }
        sinks.push(c.dff_d[i]);
        support.extend(support_of(c, c.dff_d[i]));
        if feedback {
            support.insert(c.dff_q[i]);
        }
    }
    let is_reg = |s: &usize| matches!(c.driver[*s], Driver::Dff(_) | Driver::Rom { .. });
    let mut ordered: Vec<usize> = support.iter().copied().filter(is_reg).collect();
    ordered.extend(support.iter().copied().filter(|s| !is_reg(s)));
    Ok(Cones {
        sinks,
        support: ordered,
    })
}

/// Evaluates the cones for up to 64 source assignments at once.
/// `assign[k]` is the lane word for `sources[k]`; other sources read 0.
fn eval_cones(c: &Compiled, sources: &[usize], assign: &[u64], sinks: &[usize], values: &mut Vec<u64>) -> Vec<u64> {
    values.clear();
    values.resize(c.num_signals(), 0);
    for (&s, &w) in sources.iter().zip(assign) {
        values[s] = w;
    }
    for g in &c.gates {
        values[g.out] = g.kind.eval_lanes(g.ins.iter().map(|&i| values[i]));
    }
    sinks.iter().map(|&s| values[s]).collect()
}

/// Words `f(row)` for `rows` consecutive assignments starting at `base`,
/// with source `k` taking bit `width - 1 - k` of the row.
fn sweep(c: &Compiled, sources: &[usize], fixed: &[(usize, u64)], sinks: &[usize], total: u64) -> Vec<u64> {
    let w = sources.len();
    let mut out = Vec::with_capacity(total as usize);
    let mut values = Vec::new();
    let mut base = 0u64;
    while base < total {
        let lanes = (total - base).min(64);
        let mut assign: Vec<u64> = (0..w)
            .map(|k| {
                let p = w - 1 - k;
                (0..lanes).fold(0u64, |acc, l| acc | (((base + l) >> p) & 1) << l)
            })
            .collect();
        let mut srcs = sources.to_vec();
        for &(s, v) in fixed {
            srcs.push(s);
            assign.push(if v & 1 == 1 { !0 } else { 0 });
        }
        let words = eval_cones(c, &srcs, &assign, sinks, &mut values);
        for l in 0..lanes {
            out.push(
                words
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (j, &wd)| acc | ((wd >> l) & 1) << j),
            );
        }
        base += 64;
    }
    out
}

fn unpack(word: u64, y: usize) -> Vec<bool> {
    (0..y).map(|j| (word >> j) & 1 == 1).collect()
}

/// Register states reachable from reset, found by breadth-first search with
/// every input vector applied in every state.
fn reachable_states(n: &Netlist) -> Result<Vec<SimState>, LockError> {
    let sim = Simulator::new(n, None)?;
    let c = n.compiled();
    let ni = c.inputs.len();
    if ni >= 20 {
        return Err(LockError::ReachCap(REACH_CAP));
    }
    let total = 1u64 << ni;
    let lanes = total.min(64) as usize;
    let start = SimState::reset(n);
    let mut seen: HashSet<SimState> = HashSet::from([start.clone()]);
    let mut order = vec![start.clone()];
    let mut queue = VecDeque::from([start]);
    let mut visits = 0usize;
    let mut values = vec![0u64; c.num_signals()];
    while let Some(s) = queue.pop_front() {
        let ls = LaneState::broadcast(&s);
        let mut base = 0u64;
        while base < total {
            visits += lanes;
            if visits > REACH_CAP {
                return Err(LockError::ReachCap(REACH_CAP));
            }
            let ins: Vec<u64> = (0..ni)
                .map(|i| {
                    let p = ni - 1 - i;
                    (0..lanes as u64).fold(0u64, |acc, l| acc | (((base + l) >> p) & 1) << l)
                })
                .collect();
            sim.eval_comb(&ls, &ins, &mut values);
            let next = sim.next_state(&values);
            for l in 0..lanes {
                let ns = next.lane(l);
                if seen.insert(ns.clone()) {
                    order.push(ns.clone());
                    queue.push_back(ns);
                }
            }
            base += 64;
        }
    }
    Ok(order)
}

fn register_value(c: &Compiled, st: &SimState, s: usize) -> bool {
    match c.driver[s] {
        Driver::Dff(i) => st.dff_values[i],
        Driver::Rom { rom, bit } => st.rom_pipeline[rom][bit],
        _ => false,
    }
}

pub fn extract_cone_table(n: &Netlist, ffs: &[String], mode: MemoryMode) -> Result<ConeTable, LockError> {
    extract_with(n, ffs, mode, false)
}

fn extract_with(n: &Netlist, ffs: &[String], mode: MemoryMode, feedback: bool) -> Result<ConeTable, LockError> {
    let c = n.compiled();
    let Cones { sinks, support } = cones(n, ffs, feedback)?;
    let y = sinks.len();
    match mode {
        MemoryMode::Full => {
            if support.len() > FULL_SUPPORT_CAP {
                return Err(LockError::SupportCap {
                    got: support.len(),
                    cap: FULL_SUPPORT_CAP,
                });
            }
            let rows = sweep(c, &support, &[], &sinks, 1u64 << support.len());
            Ok(ConeTable::Full {
                address: support.iter().map(|&s| c.names[s].clone()).collect(),
                table: rows.into_iter().map(|w| unpack(w, y)).collect(),
            })
        }
        MemoryMode::Fsmim => {
            let regs: Vec<usize> = support
                .iter()
                .copied()
                .filter(|&s| matches!(c.driver[s], Driver::Dff(_) | Driver::Rom { .. }))
                .collect();
            let ins: Vec<usize> = support[regs.len()..].to_vec();
            if ins.len() > FULL_SUPPORT_CAP {
                return Err(LockError::SupportCap {
                    got: ins.len(),
                    cap: FULL_SUPPORT_CAP,
                });
            }
            let w = regs.len();
            let codes: BTreeSet<u64> = reachable_states(n)?
                .iter()
                .map(|st| regs.iter().fold(0u64, |a, &r| a << 1 | register_value(c, st, r) as u64))
                .collect();
            let ni = ins.len();
            let mut per_state: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            let mut tables: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
            for &code in &codes {
                let fixed: Vec<(usize, u64)> = regs
                    .iter()
                    .enumerate()
                    .map(|(k, &r)| (r, code >> (w - 1 - k)))
                    .collect();
                let t = sweep(c, &ins, &fixed, &sinks, 1u64 << ni);
                // cofactor test: input k matters iff flipping it changes a row
                let deps: Vec<usize> = (0..ni)
                    .filter(|&k| {
                        let m = 1usize << (ni - 1 - k);
                        (0..t.len()).any(|r| t[r] != t[r ^ m])
                    })
                    .collect();
                per_state.insert(code, deps);
                tables.insert(code, t);
            }
            let mw = per_state.values().map(Vec::len).max().unwrap_or(0);
            let mut table = vec![vec![false; y]; 1usize << (w + mw)];
            for (&code, deps) in &per_state {
                let t = &tables[&code];
                for v in 0..1usize << mw {
                    let mut row = 0usize;
                    for (j, &k) in deps.iter().enumerate() {
                        if (v >> (mw - 1 - j)) & 1 == 1 {
                            row |= 1 << (ni - 1 - k);
                        }
                    }
                    table[((code as usize) << mw) | v] = unpack(t[row], y);
                }
            }
            Ok(ConeTable::Fsmim {
                spec: FsmimSpec {
                    state_signals: regs.iter().map(|&s| c.names[s].clone()).collect(),
                    per_state_inputs: per_state
                        .into_iter()
                        .map(|(code, d)| (code, d.into_iter().map(|k| c.names[ins[k]].clone()).collect()))
                        .collect(),
                    mux_width: mw,
                    address_layout: "state bits high (MSB first), selected inputs low (slot 0 first)".into(),
                },
                support_width: support.len(),
                table,
            })
        }
    }
}

/// Replaces the targeted flip-flops and their fan-in cones with a ROM.
///
/// The ROM's registered data bits take over the flip-flops' output names,
/// so the replaced stage keeps its one-cycle timing. The correct key is the
/// ROM contents, left in the returned netlist.
pub fn lock_memory(n: &Netlist, ffs: &[String], opts: &MemoryLockOptions) -> Result<LockPackage, LockError> {
    let c = n.compiled();
    let table = extract_with(n, ffs, opts.mode, opts.feedback_targets)?;
    let prefix = fresh_prefix(n, "slk");
    let mut b = n.to_builder();

    let mut address: Vec<String> = match &table {
        ConeTable::Full { address, .. } => address.clone(),
        ConeTable::Fsmim { spec, .. } => {
            let mut addr = spec.state_signals.clone();
            addr.extend(fsmim_muxes(&mut b, &prefix, spec));
            addr
        }
    };
    let mut contents = table.table().to_vec();

    if let Some(want) = opts.addr_width {
        let have = address.len();
        if want < have {
            return Err(LockError::AddressTooNarrow { want, need: have });
        }
        let used: HashSet<&String> = address.iter().chain(ffs).collect();
        let mut spare: Vec<String> = c
            .inputs
            .iter()
            .chain(&c.dff_q)
            .map(|&s| c.names[s].clone())
            .filter(|s| !used.contains(s))
            .collect();
        if spare.len() < want - have {
            return Err(LockError::AddressPadding(want));
        }
        spare.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));
        let pad = want - have;
        address.extend(spare.into_iter().take(pad));
        contents = contents
            .into_iter()
            .flat_map(|w| std::iter::repeat(w).take(1 << pad))
            .collect();
    }

    let sinks: Vec<usize> = ffs.iter().map(|q| c.dff_d[n.dff_by_q(q).unwrap()]).collect();
    let dead: HashSet<String> = cone_gates(c, &sinks)
        .into_iter()
        .map(|s| c.names[s].clone())
        .collect();
    let targets: HashSet<&String> = ffs.iter().collect();
    b.dffs.retain(|d| !targets.contains(&d.q));
    let rom_name = format!("{prefix}rom");
    b.rom(RomNode {
        name: rom_name.clone(),
        address: address.clone(),
        data: ffs.to_vec(),
        contents,
    });
    b.remove_dead_gates(&dead);
    let locked = b.build()?;

    let mut params = serde_json::json!({
        "mode": opts.mode,
        "rom": rom_name,
        "address": address,
        "address_width": address.len(),
        "word_width": ffs.len(),
        "table_bits": (1usize << address.len()) * ffs.len(),
        "cone_table_bits": table.bits(),
        "full_table_bits": table.full_bits().to_string(),
        "feedback_targets": opts.feedback_targets,
    });
    if let ConeTable::Fsmim { spec, .. } = &table {
        params["fsmim"] = serde_json::to_value(spec).expect("serializable");
    }
    Ok(LockPackage {
        locked,
        correct_key: IndexMap::new(),
        meta: LockMeta {
            method: LockMethod::ScrambleL,
            params,
            targets: ffs.to_vec(),
            seed: opts.seed,
        },
    })
}

/// Slot `j` carries the `j`-th selected input of whichever state is current.
fn fsmim_muxes(b: &mut crate::netlist::NetlistBuilder, prefix: &str, spec: &FsmimSpec) -> Vec<String> {
    let w = spec.state_signals.len();
    let mut inverted: HashSet<usize> = HashSet::new();
    let mut decoder = |b: &mut crate::netlist::NetlistBuilder, code: u64| -> Option<String> {
        if w == 0 {
            return None;
        }
        let lits: Vec<String> = (0..w)
            .map(|k| {
                if (code >> (w - 1 - k)) & 1 == 1 {
                    spec.state_signals[k].clone()
                } else {
                    let nm = format!("{prefix}n{k}");
                    if inverted.insert(k) {
                        b.gate(GateKind::Not, [spec.state_signals[k].clone()], nm.clone());
                    }
                    nm
                }
            })
            .collect();
        if lits.len() == 1 {
            return Some(lits[0].clone());
        }
        let nm = format!("{prefix}st{code}");
        b.gate(GateKind::And, lits, nm.clone());
        Some(nm)
    };
    let decoders: BTreeMap<u64, Option<String>> = spec
        .per_state_inputs
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(&code, _)| (code, decoder(b, code)))
        .collect();
    (0..spec.mux_width)
        .map(|j| {
            let mut terms = Vec::new();
            for (code, ins) in &spec.per_state_inputs {
                let Some(x) = ins.get(j) else { continue };
                terms.push(match &decoders[code] {
                    Some(d) => {
                        let nm = format!("{prefix}m{j}_{code}");
                        b.gate(GateKind::And, [d.clone(), x.clone()], nm.clone());
                        nm
                    }
                    None => x.clone(),
                });
            }
            let nm = format!("{prefix}sel{j}");
            if terms.len() == 1 {
                b.gate(GateKind::Buf, terms, nm.clone());
            } else {
                b.gate(GateKind::Or, terms, nm.clone());
            }
            nm
        })
        .collect()
}

/// A ROM rewritten as key-programmable lookup tables.
#[derive(Debug, Clone)]
pub struct LutModel {
    pub netlist: Netlist,
    /// Key inputs, one table at a time: bit 0's words, then bit 1's, ...
    pub keys: Vec<String>,
    /// The ROM contents in key order; the key that reproduces the ROM.
    pub contents_key: Vec<bool>,
}

/// Replaces `rom` with one `2^X`-leaf selector per data bit whose leaves are
/// fresh key inputs. A flip-flop per data bit keeps the one-cycle latency.
pub fn memory_as_luts(n: &Netlist, rom: &str, cap: usize) -> Result<LutModel, LockError> {
    let r = n
        .roms()
        .iter()
        .find(|r| r.name == rom)
        .ok_or_else(|| LockError::UnknownRom(rom.to_string()))?
        .clone();
    let x = r.address.len();
    if x > cap {
        return Err(LockError::LutCap { got: x, cap });
    }
    let prefix = fresh_prefix(n, &format!("{rom}_lut"));
    let mut b = n.to_builder();
    b.roms.retain(|q| q.name != rom);
    let mut keys = Vec::with_capacity(r.bits());
    let mut contents_key = Vec::with_capacity(r.bits());
    for (j, data) in r.data.iter().enumerate() {
        let leaves: Vec<String> = (0..r.words())
            .map(|w| {
                let k = format!("{prefix}k{j}_{w}");
                b.key_input(k.clone());
                keys.push(k.clone());
                contents_key.push(r.contents[w][j]);
                k
            })
            .collect();
        let mut counter = 0;
        let out = mux_tree(&mut b, &format!("{prefix}b{j}m"), &r.address, &leaves, &mut counter);
        b.dff(out, data.clone());
    }
    Ok(LutModel {
        netlist: b.build()?,
        keys,
        contents_key,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::bench::parse_bench;
    use crate::netlist::equiv::{exhaustive_equivalence, random_equivalence, Exhaustive};

    fn not_ff() -> Netlist {
        parse_bench("INPUT(a)\nOUTPUT(q)\nq = DFF(d)\nd = NOT(a)\n").unwrap()
    }

    fn counter() -> Netlist {
        parse_bench("INPUT(en)\nOUTPUT(q1)\nOUTPUT(q0)\nq0 = DFF(d0)\nq1 = DFF(d1)\nd0 = NOT(q0)\nd1 = XOR(q1, q0)\n")
            .unwrap()
    }

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn not_cone_table() {
        let t = extract_cone_table(&not_ff(), &names(&["q"]), MemoryMode::Full).unwrap();
        assert_eq!(t.table(), &[vec![true], vec![false]]);
        let pkg = lock_memory(&not_ff(), &names(&["q"]), &MemoryLockOptions::new(MemoryMode::Full)).unwrap();
        assert_eq!(pkg.locked.roms()[0].contents, vec![vec![true], vec![false]]);
        assert!(pkg.locked.gates().is_empty());
        assert!(pkg.verify(&not_ff(), 100, 20, 0).unwrap().equivalent());
    }

    #[test]
    fn counter_rom_walk() {
        let n = counter();
        let pkg = lock_memory(&n, &names(&["q1", "q0"]), &MemoryLockOptions::new(MemoryMode::Full)).unwrap();
        let rom = &pkg.locked.roms()[0];
        assert_eq!(rom.address, ["q0", "q1"]);
        assert_eq!(rom.words(), 4);
        let eq = exhaustive_equivalence(&pkg.locked, None, &n, None, 4, 1 << 10).unwrap();
        assert!(matches!(eq, Exhaustive::Equivalent { .. }));
    }

    #[test]
    fn luts_match_rom() {
        let n = counter();
        let pkg = lock_memory(&n, &names(&["q1", "q0"]), &MemoryLockOptions::new(MemoryMode::Full)).unwrap();
        let m = memory_as_luts(&pkg.locked, &pkg.locked.roms()[0].name, DEFAULT_LUT_CAP).unwrap();
        assert_eq!(m.keys.len(), 8);
        let eq = exhaustive_equivalence(&m.netlist, Some(&m.contents_key), &n, None, 4, 1 << 10).unwrap();
        assert!(matches!(eq, Exhaustive::Equivalent { .. }));
        let two = parse_bench("INPUT(a)\nOUTPUT(q)\nq = DFF(d)\nd = NOT(a)\n").unwrap();
        let p2 = lock_memory(&two, &names(&["q"]), &MemoryLockOptions::new(MemoryMode::Full)).unwrap();
        let m2 = memory_as_luts(&p2.locked, &p2.locked.roms()[0].name, 16).unwrap();
        assert_eq!(m2.keys.len(), 2);
        assert!(matches!(
            memory_as_luts(&p2.locked, &p2.locked.roms()[0].name, 0),
            Err(LockError::LutCap { got: 1, cap: 0 })
        ));
    }

    #[test]
    fn fsmim_selects_one_input_per_state() {
        // two-state machine; state 0 looks at a only, state 1 at c only
        let n = parse_bench(
            "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(s)\ns = DFF(ns)\nnots = NOT(s)\n\
             t0 = AND(nots, a)\nt1 = AND(s, c)\nu = AND(a, b, c, nots, s)\nns = OR(t0, t1, u)\n",
        )
        .unwrap();
        let t = extract_cone_table(&n, &names(&["s"]), MemoryMode::Fsmim).unwrap();
        let ConeTable::Fsmim { spec, support_width, .. } = &t else {
            panic!()
        };
        assert_eq!(*support_width, 4);
        assert_eq!(spec.per_state_inputs[&0], ["a"]);
        assert_eq!(spec.per_state_inputs[&1], ["c"]);
        assert_eq!(t.address_width(), 2);
        let pkg = lock_memory(&n, &names(&["s"]), &MemoryLockOptions::new(MemoryMode::Fsmim)).unwrap();
        let eq = exhaustive_equivalence(&pkg.locked, None, &n, None, 4, 1 << 10).unwrap();
        assert!(matches!(eq, Exhaustive::Equivalent { .. }));
    }

    #[test]
    fn address_padding() {
        let n = counter();
        let mut o = MemoryLockOptions::new(MemoryMode::Full);
        o.addr_width = Some(3);
        let pkg = lock_memory(&n, &names(&["q0"]), &o).unwrap();
        assert_eq!(pkg.locked.roms()[0].address.len(), 3);
        let rep = random_equivalence(&pkg.locked, None, &n, None, 100, 20, 3).unwrap();
        assert!(rep.equivalent());
        o.addr_width = Some(9);
        assert!(matches!(lock_memory(&n, &names(&["q0"]), &o), Err(LockError::AddressPadding(9))));
    }
}
