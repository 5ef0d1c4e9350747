use super::{GateKind, Netlist, NetlistError, ScanPins};

/// Stitches every flip-flop into one scan chain.
///
/// Adds primary inputs `scan_en` and `scan_in` and a primary output
/// `scan_out` (names are made unique if taken). The chain follows `order`
/// (flip-flop q names) or the netlist's flip-flop order: `scan_in` feeds the
/// first flip-flop and each later one shifts from its predecessor.
pub fn insert_scan_chain(n: &Netlist, order: Option<&[String]>) -> Result<Netlist, NetlistError> {
    let se = n.fresh_name("scan_en");
    let si = n.fresh_name("scan_in");
    let so = n.fresh_name("scan_out");
    let chain: Vec<String> = match order {
        Some(o) => o.to_vec(),
        None => n.dffs().iter().map(|d| d.q.clone()).collect(),
    };
    let mut b = n.to_builder();
    b.inputs.push(se.clone());
    b.inputs.push(si.clone());
    let mut prev = si.clone();
    for q in &chain {
        let dff = b
            .dffs
            .iter_mut()
            .find(|d| &d.q == q)
            .ok_or_else(|| NetlistError::Undefined {
                signal: q.clone(),
                user: "scan chain".into(),
            })?;
        dff.scan = Some(ScanPins {
            si: prev.clone(),
            se: se.clone(),
        });
        prev = q.clone();
    }
    b.gate(GateKind::Buf, [prev], so.clone());
    b.outputs.push(so);
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{SimState, Simulator};

    #[test]
    fn shifts_through_chain() {
        let mut b = Netlist::builder("p");
        b.input("a")
            .output("y")
            .dff("a", "q0")
            .dff("q0", "q1")
            .gate(GateKind::And, ["q0", "q1"], "y");
        let n = insert_scan_chain(&b.build().unwrap(), None).unwrap();
        assert!(n.has_scan());
        assert_eq!(n.inputs(), ["a", "scan_en", "scan_in"]);
        let sim = Simulator::new(&n, None).unwrap();
        // shift in 1, 0 then read back through scan_out
        let seq = vec![
            vec![false, true, true],
            vec![false, true, false],
            vec![false, true, false],
            vec![false, true, false],
        ];
        let out = sim.run(&SimState::reset(&n), &seq).unwrap();
        let so: Vec<bool> = out.iter().map(|o| o[1]).collect();
        assert_eq!(so, vec![false, false, true, false]);
    }
}
