//! Locks s27 with growing switching blocks and recovers each key with the
//! unrolling SAT attack, using the original circuit as the oracle.
//!
//! cargo run --release --example ubsat_attack
//! LOCKBENCH_SOLVER=external:/usr/bin/kissat cargo run --release --example ubsat_attack

use std::time::Duration;

use lockbench::attack::{ubsat_attack, SimOracle, UbsatConfig};
use lockbench::fixtures;
use lockbench::harness::{attack_model, lock_circuit, LockConfig, StateOrder, TargetKind};
use lockbench::sat::Backend;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s27 = fixtures::circuit("s27").expect("bundled");
    let cfg = UbsatConfig {
        time_limit: Duration::from_secs(120),
        backend: Backend::from_env()?,
        ..UbsatConfig::default()
    };
    for size in [2, 4, 8] {
        let lock = LockConfig::ScrambleC {
            size,
            targets: TargetKind::Fsm,
            m: 0,
            p: 1,
            order: StateOrder::Msb,
        };
        let case = lock_circuit(&s27, &lock, 1)?;
        let model = attack_model(&case.package.locked)?;
        let mut oracle = SimOracle::new(case.reference.clone());
        let r = ubsat_attack(&model, &mut oracle, &cfg)?;
        let right = r.key_bits().as_deref() == Some(&case.package.key_bits()[..]);
        println!(
            "size {size}: {} key bits, {} at bound {} after {} DISes, {} ms, verified {}, same bits as the lock: {right}",
            model.key_inputs().len(),
            r.status.as_str(),
            r.bound,
            r.dis_count,
            r.wall_ms,
            r.key_verified(),
        );
    }
    Ok(())
}
