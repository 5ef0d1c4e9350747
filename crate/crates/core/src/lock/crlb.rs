use std::collections::{BTreeSet, HashSet};

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fresh_prefix, LockError, LockMeta, LockMethod, LockPackage};
use crate::netlist::{ff_dependency_graph, GateKind, Netlist};
use crate::switch::{
    apply_config, build_network, route_with_budget, synthesize_into, NetworkParams, PortMapping, RouteOutcome, SwitchConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    FsmDataIn,
    DatapathDataIn,
    ScanIn,
}

/// Flip-flops (by q name) whose incoming wires the block re-drives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockTargets {
    pub mode: TargetMode,
    pub ffs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Leading bits of the hinted state register (hint is MSB first).
    MsbState,
    LsbState,
    /// Alternates state and datapath flip-flops.
    Mixed,
    /// A seed-placed window of consecutive scan-chain positions.
    ScanWindow,
    Explicit { ffs: Vec<String>, mode: TargetMode },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionStrategy {
    pub kind: Strategy,
    pub size: usize,
    pub seed: u64,
}

/// Scan chain as flip-flop q names from `scan_in` onward.
pub fn scan_chain_order(n: &Netlist) -> Vec<String> {
    let qs: HashSet<&str> = n.dffs().iter().map(|d| d.q.as_str()).collect();
    let mut order = Vec::new();
    let mut cur = n
        .dffs()
        .iter()
        .find(|d| d.scan.as_ref().is_some_and(|s| !qs.contains(s.si.as_str())));
    let mut seen = HashSet::new();
    while let Some(d) = cur {
        if !seen.insert(d.q.clone()) {
            break;
        }
        order.push(d.q.clone());
        cur = n
            .dffs()
            .iter()
            .find(|e| e.scan.as_ref().is_some_and(|s| s.si == d.q));
    }
    order
}

pub fn select_target_ffs(
    n: &Netlist,
    strategy: &SelectionStrategy,
    state_ffs_hint: Option<&[String]>,
) -> Result<LockTargets, LockError> {
    let size = strategy.size;
    let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);
    let check = |ffs: &[String]| -> Result<(), LockError> {
        let mut seen = HashSet::new();
        for q in ffs {
            if n.dff_by_q(q).is_none() {
                return Err(LockError::UnknownFf(q.clone()));
            }
            if !seen.insert(q) {
                return Err(LockError::DuplicateFf(q.clone()));
            }
        }
        Ok(())
    };
    let take = |pool: &[String], k: usize| -> Result<(), LockError> {
        if pool.len() < k {
            Err(LockError::InsufficientDffs { need: k, have: pool.len() })
        } else {
            Ok(())
        }
    };
    let targets = match &strategy.kind {
        Strategy::Explicit { ffs, mode } => LockTargets {
            mode: *mode,
            ffs: ffs.clone(),
        },
        Strategy::MsbState | Strategy::LsbState => {
            let hint = state_ffs_hint.ok_or(LockError::MissingHint)?;
            take(hint, size)?;
            let ffs = if strategy.kind == Strategy::MsbState {
                hint[..size].to_vec()
            } else {
                hint[hint.len() - size..].to_vec()
            };
            LockTargets {
                mode: TargetMode::FsmDataIn,
                ffs,
            }
        }
        Strategy::Mixed => {
            let all: Vec<String> = n.dffs().iter().map(|d| d.q.clone()).collect();
            let state: BTreeSet<String> = match state_ffs_hint {
                Some(h) => h.iter().cloned().collect(),
                None => {
                    let g = ff_dependency_graph(n);
                    g.cyclic_nodes().into_iter().map(|i| all[i].clone()).collect()
                }
            };
            let mut s: Vec<String> = all.iter().filter(|q| state.contains(*q)).cloned().collect();
            let mut d: Vec<String> = all.iter().filter(|q| !state.contains(*q)).cloned().collect();
            let (ns, nd) = (size.div_ceil(2), size / 2);
            take(&s, ns)?;
            take(&d, nd.max(1))?;
            s.shuffle(&mut rng);
            d.shuffle(&mut rng);
            let mut ffs = Vec::with_capacity(size);
            for i in 0..ns {
                ffs.push(s[i].clone());
                if i < nd {
                    ffs.push(d[i].clone());
                }
            }
            LockTargets {
                mode: TargetMode::DatapathDataIn,
                ffs,
            }
        }
        Strategy::ScanWindow => {
            let chain = scan_chain_order(n);
            if chain.is_empty() {
                return Err(LockError::NotScan(n.dffs().first().map_or_else(String::new, |d| d.q.clone())));
            }
            take(&chain, size)?;
            let start = rng.gen_range(0..=chain.len() - size);
            LockTargets {
                mode: TargetMode::ScanIn,
                ffs: chain[start..start + size].to_vec(),
            }
        }
    };
    check(&targets.ffs)?;
    Ok(targets)
}

const ROUTE_BUDGET: u64 = 1 << 22;
const MAX_DRAWS: usize = 64;

/// Cuts the wires into the targeted pins and re-drives them through a
/// synthesized switching block.
///
/// Wire `i` enters port `sigma(i)` after an optional fixed inverter; output
/// port `i` drives target `i`. Both `sigma` and the inverters are drawn from
/// `seed`, and the correct key routes `sigma` back with inversions that
/// cancel the fixed inverters. Unroutable draws are redrawn.
///
/// With fewer targets than `params.n` ports, the spare ports carry decoy
/// wires: randomly chosen existing signals routed into fresh flip-flops
/// whose outputs are unused.
pub fn lock_connectivity(
    n: &Netlist,
    targets: &LockTargets,
    params: NetworkParams,
    seed: u64,
) -> Result<LockPackage, LockError> {
    let width = params.n;
    if width < 2 || !width.is_power_of_two() {
        return Err(LockError::BadSize(width));
    }
    if targets.ffs.len() > width {
        return Err(LockError::BadSize(targets.ffs.len()));
    }
    let mut seen = HashSet::new();
    for q in &targets.ffs {
        let i = n.dff_by_q(q).ok_or_else(|| LockError::UnknownFf(q.clone()))?;
        if !seen.insert(q) {
            return Err(LockError::DuplicateFf(q.clone()));
        }
        if targets.mode == TargetMode::ScanIn && n.dffs()[i].scan.is_none() {
            return Err(LockError::NotScan(q.clone()));
        }
    }
    let net = build_network(params, true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prefix = fresh_prefix(n, "crlb");

    // wires currently feeding the targeted pins
    let mut wires: Vec<String> = targets
        .ffs
        .iter()
        .map(|q| {
            let d = &n.dffs()[n.dff_by_q(q).unwrap()];
            match targets.mode {
                TargetMode::ScanIn => d.scan.as_ref().unwrap().si.clone(),
                _ => d.d.clone(),
            }
        })
        .collect();
    let decoys = width - wires.len();
    if decoys > 0 {
        let used: HashSet<&String> = wires.iter().collect();
        let mut pool: Vec<String> = n
            .compiled()
            .names
            .iter()
            .filter(|s| !used.contains(s) && !n.key_inputs().contains(s))
            .cloned()
            .collect();
        pool.shuffle(&mut rng);
        for i in 0..decoys {
            wires.push(pool.get(i).cloned().unwrap_or_else(|| wires[i % targets.ffs.len().max(1)].clone()));
        }
    }

    let mut draws = 0;
    let (sigma, inv, cfg) = loop {
        if draws == MAX_DRAWS {
            if params.p != 1 {
                return Err(LockError::Unroutable(MAX_DRAWS));
            }
            // Strongly blocking networks rarely route a random permutation;
            // a random setting always realizes something.
            let mut cfg = SwitchConfig::zero(&net);
            cfg.switch_bits.iter_mut().for_each(|b| *b = rng.gen());
            cfg.inversion_bits.iter_mut().for_each(|b| *b = rng.gen());
            let m = apply_config(&net, &cfg)?;
            let mut sigma = vec![0; width];
            for (port, &i) in m.permutation.iter().enumerate() {
                sigma[i] = port;
            }
            break (sigma, m.negation, cfg);
        }
        draws += 1;
        let mut sigma: Vec<usize> = (0..width).collect();
        sigma.shuffle(&mut rng);
        let inv: Vec<bool> = (0..width).map(|_| rng.gen()).collect();
        let mut permutation = vec![0; width];
        for i in 0..width {
            permutation[sigma[i]] = i;
        }
        let target = PortMapping {
            permutation,
            negation: inv.clone(),
        };
        if let RouteOutcome::Routed(cfg) = route_with_budget(&net, &target, ROUTE_BUDGET)? {
            break (sigma, inv, cfg);
        }
    };

    let mut b = n.to_builder();
    let mut port_in = vec![String::new(); width];
    for (i, w) in wires.iter().enumerate() {
        port_in[sigma[i]] = if inv[i] {
            let name = format!("{prefix}pi{i}");
            b.gate(GateKind::Not, [w.clone()], name.clone());
            name
        } else {
            w.clone()
        };
    }
    let port_out: Vec<String> = (0..width).map(|i| format!("{prefix}o{i}")).collect();
    let keys = synthesize_into(&net, &mut b, &format!("{prefix}n_"), &port_in, &port_out)?;
    for (i, q) in targets.ffs.iter().enumerate() {
        let d = b.dffs.iter_mut().find(|d| &d.q == q).unwrap();
        match targets.mode {
            TargetMode::ScanIn => d.scan.as_mut().unwrap().si = port_out[i].clone(),
            _ => d.d = port_out[i].clone(),
        }
    }
    let decoy_ffs: Vec<String> = (targets.ffs.len()..width)
        .map(|i| {
            let q = format!("{prefix}dq{i}");
            b.dff(port_out[i].clone(), q.clone());
            q
        })
        .collect();
    let locked = b.build()?;
    let correct_key: IndexMap<String, bool> = keys.into_iter().zip(cfg.to_key_bits()).collect();
    Ok(LockPackage {
        locked,
        correct_key,
        meta: LockMeta {
            method: LockMethod::ScrambleC,
            params: serde_json::json!({
                "n": params.n,
                "m": params.m,
                "p": params.p,
                "mode": targets.mode,
                "decoys": decoy_ffs,
                "draws": draws,
                "stages": cfg.stage_strings(&net),
            }),
            targets: targets.ffs.clone(),
            seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::bench::parse_bench;
    use crate::netlist::equiv::{exhaustive_equivalence, Exhaustive};
    use crate::netlist::{insert_scan_chain, SimState, Simulator};

    fn counter() -> Netlist {
        parse_bench("INPUT(en)\nOUTPUT(q1)\nOUTPUT(q0)\nq0 = DFF(d0)\nq1 = DFF(d1)\nd0 = NOT(q0)\nd1 = XOR(q1, q0)\n")
            .unwrap()
    }

    fn explicit(ffs: &[&str], mode: TargetMode) -> LockTargets {
        LockTargets {
            mode,
            ffs: ffs.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn counter_size_two() {
        let n = counter();
        let t = explicit(&["q1", "q0"], TargetMode::FsmDataIn);
        for seed in 0..8 {
            let pkg = lock_connectivity(&n, &t, NetworkParams::new(2, 0, 1).unwrap(), seed).unwrap();
            assert_eq!(pkg.locked.key_inputs().len(), 3);
            let key = pkg.key_bits();
            let eq = exhaustive_equivalence(&pkg.locked, Some(&key), &n, None, 4, 1 << 12).unwrap();
            assert!(matches!(eq, Exhaustive::Equivalent { .. }), "seed {seed}");
        }
    }

    #[test]
    fn swapped_wires_break_the_counter() {
        let n = counter();
        let t = explicit(&["q1", "q0"], TargetMode::FsmDataIn);
        let pkg = lock_connectivity(&n, &t, NetworkParams::new(2, 0, 1).unwrap(), 1).unwrap();
        let mut key = pkg.key_bits();
        key[0] = !key[0];
        let seq = vec![vec![false]; 4];
        let good = Simulator::new(&n, None).unwrap().run(&SimState::reset(&n), &seq).unwrap();
        let bad = Simulator::new(&pkg.locked, Some(&key))
            .unwrap()
            .run(&SimState::reset(&pkg.locked), &seq)
            .unwrap();
        assert_ne!(good, bad);
    }

    #[test]
    fn decoys_pad_small_circuits() {
        let n = counter();
        let t = explicit(&["q0"], TargetMode::FsmDataIn);
        let pkg = lock_connectivity(&n, &t, NetworkParams::new(8, 0, 1).unwrap(), 4).unwrap();
        assert_eq!(pkg.locked.dffs().len(), 2 + 7);
        let key = pkg.key_bits();
        let rep = pkg.verify(&n, 200, 30, 1).unwrap();
        assert!(rep.equivalent());
        assert_eq!(key.len(), 12 + 8);
    }

    #[test]
    fn scan_mode_keeps_function() {
        let n = insert_scan_chain(&counter(), None).unwrap();
        let t = select_target_ffs(
            &n,
            &SelectionStrategy {
                kind: Strategy::ScanWindow,
                size: 2,
                seed: 0,
            },
            None,
        )
        .unwrap();
        assert_eq!(t.mode, TargetMode::ScanIn);
        let pkg = lock_connectivity(&n, &t, NetworkParams::new(2, 0, 1).unwrap(), 9).unwrap();
        assert!(pkg.verify(&n, 200, 20, 2).unwrap().equivalent());
        // functional d pins untouched
        for d in pkg.locked.dffs() {
            assert!(d.d.starts_with('d'));
        }
    }

    #[test]
    fn msb_lsb_and_mixed_selection() {
        let hint: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let mut bld = Netlist::builder("x");
        bld.input("i").output("y");
        for q in &hint {
            bld.dff("g", q.clone());
        }
        bld.dff("i", "p0").dff("p0", "p1");
        bld.gate(GateKind::Xor, ["a", "b", "c", "d", "i"], "g");
        bld.gate(GateKind::And, ["g", "p1"], "y");
        let n = bld.build().unwrap();
        let s = |kind| SelectionStrategy { kind, size: 2, seed: 3 };
        assert_eq!(select_target_ffs(&n, &s(Strategy::MsbState), Some(&hint)).unwrap().ffs, ["a", "b"]);
        assert_eq!(select_target_ffs(&n, &s(Strategy::LsbState), Some(&hint)).unwrap().ffs, ["c", "d"]);
        assert!(matches!(
            select_target_ffs(&n, &s(Strategy::MsbState), None),
            Err(LockError::MissingHint)
        ));
        let m = select_target_ffs(&n, &s(Strategy::Mixed), None).unwrap();
        assert!(hint.contains(&m.ffs[0]) && m.ffs[1].starts_with('p'));
    }
}
