//! Builds a 3-frame miter of a locked counter and asks each solver backend
//! for a discriminating input sequence. Set LOCKBENCH_SOLVER to
//! `external:/path/to/solver` to include a DIMACS solver binary.
//!
//! cargo run --example sat_backends

use lockbench::fixtures;
use lockbench::harness::{lock_circuit, LockConfig, StateOrder, TargetKind};
use lockbench::sat::{build_miter, Backend, SolveResult, StateInit};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = fixtures::circuit("counter2").expect("bundled");
    let lock = LockConfig::ScrambleC {
        size: 2,
        targets: TargetKind::Fsm,
        m: 0,
        p: 1,
        order: StateOrder::Msb,
    };
    let locked = lock_circuit(&c, &lock, 0)?.package.locked;
    let miter = build_miter(&locked, 3, StateInit::reset(&locked));
    println!("miter: {} variables, {} clauses", miter.cnf.num_vars, miter.cnf.clauses.len());

    let mut backends = vec![Backend::Cdcl, Backend::Dpll];
    if let b @ Backend::External(_) = Backend::from_env()? {
        backends.push(b);
    }
    for b in backends {
        let mut s = b.session();
        s.add_clauses(&miter.cnf.clauses);
        s.add_clause(&[miter.diff]);
        match s.solve(&[]) {
            SolveResult::Sat => {
                let seq = miter.read_inputs(|v| s.value(v));
                let k1 = lockbench::sat::Miter::read_key(miter.k1(), |v| s.value(v));
                let k2 = lockbench::sat::Miter::read_key(miter.k2(), |v| s.value(v));
                println!("{b:?}: keys {k1:?} and {k2:?} disagree on {seq:?}");
            }
            r => println!("{b:?}: {r:?}"),
        }
    }
    Ok(())
}
