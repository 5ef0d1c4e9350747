use proptest::prelude::*;

use lockbench::fsm::{extract_stg_explicit, parse_fsm_spec, random_fsm, stg_equal, synthesize_fsm, Encoding, RandomFsm};
use lockbench::lock::{lock_connectivity, lock_memory, LockTargets, MemoryLockOptions, MemoryMode, TargetMode};
use lockbench::netlist::generate::random_small;
use lockbench::switch::{apply_config, build_network, route, NetworkParams, PortMapping};

fn encoding() -> impl Strategy<Value = Encoding> {
    prop_oneof![Just(Encoding::Binary), Just(Encoding::Gray), Just(Encoding::OneHot)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fsm_text_and_synthesis_round_trip(
        states in 1usize..20,
        inputs in 1usize..4,
        outputs in 1usize..3,
        enc in encoding(),
        seed in any::<u64>(),
    ) {
        let spec = random_fsm(&RandomFsm { states, inputs, outputs, deps: 2, encoding: enc, width: None, seed });
        let back = parse_fsm_spec(&spec.name, &spec.to_text()).unwrap();
        prop_assert_eq!(back.to_stg().unwrap(), spec.to_stg().unwrap());
        let (n, q) = synthesize_fsm(&spec).unwrap();
        let got = extract_stg_explicit(&n, &q, 0, None).unwrap();
        prop_assert!(stg_equal(&got, &spec.to_stg().unwrap()).unwrap());
    }

    #[test]
    fn routed_configs_realize_their_target(
        perm in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle(),
        neg in proptest::collection::vec(any::<bool>(), 8),
        m in 0usize..3,
    ) {
        let net = build_network(NetworkParams::new(8, m, 1).unwrap(), true).unwrap();
        let target = PortMapping { permutation: perm, negation: neg };
        if let Some(cfg) = route(&net, &target).unwrap() {
            prop_assert_eq!(apply_config(&net, &cfg).unwrap(), target);
        }
    }

    #[test]
    fn crlb_lock_is_transparent_under_its_key(seed in any::<u64>(), width in prop_oneof![Just(2usize), Just(4)]) {
        let n = random_small(seed, 3, 4, 12);
        let ffs: Vec<String> = n.dffs().iter().take(width).map(|d| d.q.clone()).collect();
        prop_assume!(!ffs.is_empty());
        let targets = LockTargets { mode: TargetMode::FsmDataIn, ffs };
        let pkg = lock_connectivity(&n, &targets, NetworkParams::new(width, 0, 1).unwrap(), seed).unwrap();
        prop_assert!(pkg.verify(&n, 64, 20, seed).unwrap().equivalent());
    }

    #[test]
    fn rom_lock_is_transparent(seed in any::<u64>(), fsmim in any::<bool>()) {
        let n = random_small(seed, 3, 4, 12);
        let ffs: Vec<String> = n.dffs().iter().map(|d| d.q.clone()).collect();
        prop_assume!(!ffs.is_empty());
        let mode = if fsmim { MemoryMode::Fsmim } else { MemoryMode::Full };
        let pkg = lock_memory(&n, &ffs, &MemoryLockOptions::new(mode)).unwrap();
        prop_assert!(pkg.verify(&n, 64, 20, seed).unwrap().equivalent());
    }
}

#[test]
fn s1423_behind_a_sixteen_port_block() {
    use lockbench::harness::{lock_circuit, LockConfig, StateOrder, TargetKind};
    let c = lockbench::fixtures::circuit("s1423").unwrap();
    assert_eq!(c.netlist.dffs().len(), 74);
    for (m, keys) in [(0, 48), (2, 64)] {
        let cfg = LockConfig::ScrambleC { size: 16, targets: TargetKind::Fsm, m, p: 1, order: StateOrder::Msb };
        let case = lock_circuit(&c, &cfg, 3).unwrap();
        assert_eq!(case.package.locked.key_inputs().len(), keys);
        assert!(case.package.verify(&c.netlist, 1000, 50, 0).unwrap().equivalent());
    }
}
