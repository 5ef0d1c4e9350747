//! Synthesizes the bundled 10-state machine and reads its state transition
//! graph back out of the gates.
//!
//! cargo run --example fsm_synthesis > fsm10.dot

use lockbench::fixtures;
use lockbench::fsm::{extract_stg_explicit, synthesize_fsm};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = fixtures::fsm10_spec();
    let (netlist, state) = synthesize_fsm(&spec)?;
    let st = netlist.stats();
    eprintln!("{} states -> {} flip-flops {:?}, {} gates", spec.states.len(), st.dffs, state, st.gates);

    let stg = extract_stg_explicit(&netlist, &state, 0, None)?;
    eprintln!("{} reachable states, {} transitions", stg.reachable().len(), stg.num_transitions());
    print!("{}", stg.to_dot());
    Ok(())
}
