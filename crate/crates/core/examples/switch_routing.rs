//! Routes permutations through log2(N) networks and measures how blocking
//! they are as stages are added.
//!
//! cargo run --release --example switch_routing

use lockbench::switch::{
    apply_config, build_network, route, routable_fraction, FractionMode, NetworkParams, PortMapping,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = build_network(NetworkParams::new(8, 0, 1)?, true)?;
    let target = PortMapping {
        permutation: vec![7, 6, 5, 4, 3, 2, 1, 0],
        negation: vec![true, false, false, true, false, false, false, false],
    };
    match route(&net, &target)? {
        Some(cfg) => {
            println!("reversal routes; stages {:?}", cfg.stage_strings(&net));
            assert_eq!(apply_config(&net, &cfg)?, target);
        }
        None => println!("reversal is blocked"),
    }

    for m in 0..=1 {
        let net = build_network(NetworkParams::new(8, m, 1)?, false)?;
        let f = routable_fraction(&net, FractionMode::Exhaustive)?;
        println!("n=8 m={m}: {:.2}% of 40320 permutations routable", f * 100.0);
    }
    let wide = build_network(NetworkParams::near_nonblocking(16)?, false)?;
    let f = routable_fraction(&wide, FractionMode::Sampled { k: 2000, seed: 1 })?;
    println!("n=16 m=2: {:.2}% of 2000 sampled permutations routable", f * 100.0);
    Ok(())
}
