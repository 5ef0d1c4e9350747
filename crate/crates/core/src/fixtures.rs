//! The bundled benchmark circuits.
//!
//! `s298`, `s1196` and `s1423` are seeded synthetic stand-ins with the
//! interface and size of the ISCAS-89 circuits of the same name; `s27` is
//! the real one.

use crate::fsm::{parse_fsm_spec, synthesize_fsm, FsmSpec};
use crate::harness::{state_register_hint, Circuit};
use crate::netlist::bench::parse_bench;
use crate::netlist::Netlist;

/// `(name, bench text)` for every bundled netlist.
pub const BENCH: [(&str, &str); 6] = [
    ("toggler", include_str!("../circuits/toggler.bench")),
    ("counter2", include_str!("../circuits/counter2.bench")),
    ("s27", include_str!("../circuits/s27.bench")),
    ("s298", include_str!("../circuits/s298.bench")),
    ("s1196", include_str!("../circuits/s1196.bench")),
    ("s1423", include_str!("../circuits/s1423.bench")),
];

pub const FSM10_KISS: &str = include_str!("../circuits/fsm10.kiss");

/// Parses a bundled netlist by name.
pub fn bench(name: &str) -> Option<Netlist> {
    let (_, text) = BENCH.iter().find(|(n, _)| *n == name)?;
    Some(parse_bench(text).expect("bundled circuits parse").with_name(name))
}

pub fn toggler() -> Netlist {
    bench("toggler").unwrap()
}

pub fn counter2() -> Netlist {
    bench("counter2").unwrap()
}

pub fn s27() -> Netlist {
    bench("s27").unwrap()
}

pub fn s298() -> Netlist {
    bench("s298").unwrap()
}

/// 10 states in 4 binary-encoded flip-flops.
pub fn fsm10_spec() -> FsmSpec {
    parse_fsm_spec("fsm10", FSM10_KISS).expect("bundled spec parses")
}

/// The synthesized `fsm10` and its state flip-flops, MSB first.
pub fn fsm10() -> (Netlist, Vec<String>) {
    synthesize_fsm(&fsm10_spec()).expect("bundled spec synthesizes")
}

/// A bundled circuit with its state-register hint; `fsm10` included.
pub fn circuit(name: &str) -> Option<Circuit> {
    if name == "fsm10" {
        let (netlist, state_ffs) = fsm10();
        return Some(Circuit {
            name: name.into(),
            netlist,
            state_ffs,
        });
    }
    let netlist = bench(name)?;
    let state_ffs = state_register_hint(&netlist);
    Some(Circuit {
        name: name.into(),
        netlist,
        state_ffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interfaces() {
        let sizes: Vec<(usize, usize, usize)> = BENCH
            .iter()
            .map(|(n, _)| {
                let s = bench(n).unwrap().stats();
                (s.inputs, s.outputs, s.dffs)
            })
            .collect();
        assert_eq!(sizes, [(0, 1, 1), (1, 2, 2), (4, 1, 3), (3, 6, 14), (14, 14, 18), (17, 5, 74)]);
        let (n, q) = fsm10();
        assert_eq!((q.len(), n.inputs().len()), (4, 2));
    }
}
