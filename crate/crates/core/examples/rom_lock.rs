//! Moves the next-state logic of an FSM into a ROM, with and without input
//! multiplexing, and prints what each table costs.
//!
//! cargo run --release --example rom_lock

use lockbench::fsm::{random_fsm, synthesize_fsm, Encoding, RandomFsm};
use lockbench::lock::{extract_cone_table, lock_memory, memory_as_luts, MemoryLockOptions, MemoryMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // every state looks at 3 of the 10 inputs
    let spec = random_fsm(&RandomFsm {
        states: 12,
        inputs: 10,
        outputs: 2,
        deps: 3,
        encoding: Encoding::Binary,
        width: None,
        seed: 3,
    });
    let (n, q) = synthesize_fsm(&spec)?;

    for mode in [MemoryMode::Full, MemoryMode::Fsmim] {
        let table = extract_cone_table(&n, &q, mode)?;
        let pkg = lock_memory(&n, &q, &MemoryLockOptions::new(mode))?;
        let rep = pkg.verify(&n, 1000, 50, 0)?;
        println!(
            "{mode:?}: {} address bits, {} table bits ({} for full support), equivalent: {}",
            table.address_width(),
            table.bits(),
            table.full_bits(),
            rep.equivalent()
        );
        let rom = &pkg.locked.roms()[0];
        let luts = memory_as_luts(&pkg.locked, &rom.name, 16)?;
        println!("  as key-programmable LUTs: {} key bits, {} gates", luts.keys.len(), luts.netlist.gates().len());
    }
    Ok(())
}
