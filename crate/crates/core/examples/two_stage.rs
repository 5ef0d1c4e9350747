//! Oracle-less FSM extraction. It finds the state register of a plain FSM
//! with a shift register beside it, then fails once a ROM lock mixes two
//! accumulator registers into the state.
//!
//! cargo run --release --example two_stage

use lockbench::attack::{two_stage_attack, FunctionalOptions};
use lockbench::fixtures;
use lockbench::lock::{lock_memory, MemoryLockOptions, MemoryMode};
use lockbench::netlist::GateKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (fsm, state) = fixtures::fsm10();
    let ins = fsm.inputs().to_vec();
    let mut b = fsm.to_builder();
    // datapath registers stay internal so the FSM outputs are all the oracle-less
    // attacker has to explain
    b.input("din").dff("din", "sr0").dff("sr0", "sr1");
    b.gate(GateKind::Xor, ["acc0", ins[0].as_str()], "acc0_d")
        .dff("acc0_d", "acc0")
        .gate(GateKind::Xor, ["acc1", "acc0", ins[1].as_str()], "acc1_d")
        .dff("acc1_d", "acc1");
    let design = b.build()?;
    let opts = FunctionalOptions::default();

    let r = two_stage_attack(&design, &opts)?;
    println!("unlocked: candidates {:?}", r.candidates);
    println!("  chosen {:?} (true state {:?})", r.chosen, state);
    if let Some(f) = &r.functional {
        println!("  {} transitions, complete {}, deterministic {}", f.stg.num_transitions(), f.complete, f.deterministic);
    }

    let mut targets = state.clone();
    targets.extend(["acc0".to_string(), "acc1".to_string()]);
    let pkg = lock_memory(&design, &targets, &MemoryLockOptions::new(MemoryMode::Full))?;
    let r = two_stage_attack(&pkg.locked, &opts)?;
    println!("locked: candidates {:?}", r.candidates);
    if let Some(f) = &r.functional {
        println!("  {} transitions, complete {}, deterministic {}", f.stg.num_transitions(), f.complete, f.deterministic);
    }
    println!("  attack succeeded: {}", r.succeeded());
    Ok(())
}
