//! Scrambles the scan chain of s27 and breaks the lock by driving the chain:
//! shift a state in, clock once, shift the result out.
//!
//! cargo run --release --example scan_attack

use lockbench::attack::{scan_unroll_attack, ScanPorts, SimOracle, UbsatConfig};
use lockbench::fixtures;
use lockbench::harness::{attack_model, lock_circuit, LockConfig, StateOrder, TargetKind};
use lockbench::lock::scan_chain_order;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s27 = fixtures::circuit("s27").expect("bundled");
    let lock = LockConfig::ScrambleC {
        size: 4,
        targets: TargetKind::Scan,
        m: 0,
        p: 1,
        order: StateOrder::Msb,
    };
    let case = lock_circuit(&s27, &lock, 2)?;
    println!("chain: {:?}", scan_chain_order(&case.package.locked));

    let model = attack_model(&case.package.locked)?;
    let mut oracle = SimOracle::new(case.reference.clone());
    let r = scan_unroll_attack(&model, &mut oracle, &ScanPorts::default(), &UbsatConfig::default())?;
    println!("{}", serde_json::to_string_pretty(&r.to_json())?);
    println!("oracle queries: {}", lockbench::attack::Oracle::queries(&oracle));
    Ok(())
}
