//! Locks the 2-bit counter with a 2-wide switching block and shows that only
//! the correct key restores it.
//!
//! cargo run --example lock_counter

use lockbench::fixtures;
use lockbench::lock::{lock_connectivity, LockTargets, TargetMode};
use lockbench::netlist::bench::write_bench;
use lockbench::switch::NetworkParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let counter = fixtures::counter2();
    let targets = LockTargets {
        mode: TargetMode::FsmDataIn,
        ffs: vec!["q1".into(), "q0".into()],
    };
    let pkg = lock_connectivity(&counter, &targets, NetworkParams::new(2, 0, 1)?, 7)?;

    println!("{}", write_bench(&pkg.locked)?);
    println!("correct key: {:?}", pkg.correct_key);

    let good = pkg.verify(&counter, 1000, 50, 0)?;
    println!("correct key: {} of {} sequences differ", good.mismatches, good.sequences);

    // every other key, with the same sequences
    let bits = pkg.key_bits();
    for code in 0..1u32 << bits.len() {
        let key: Vec<bool> = (0..bits.len()).map(|i| (code >> i) & 1 == 1).collect();
        if key == bits {
            continue;
        }
        let rep = lockbench::netlist::equiv::random_equivalence(&pkg.locked, Some(&key), &counter, None, 1000, 50, 0)?;
        println!("key {key:?}: {} of {} sequences differ", rep.mismatches, rep.sequences);
    }
    Ok(())
}
