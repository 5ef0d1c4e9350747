use std::collections::HashMap;

use super::{GateKind, NetlistBuilder, NetlistError};

/// Who drives a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Input(usize),
    Key(usize),
    Dff(usize),
    Rom { rom: usize, bit: usize },
    Gate(usize),
}

#[derive(Debug, Clone)]
pub struct CGate {
    pub kind: GateKind,
    pub ins: Vec<usize>,
    pub out: usize,
}

#[derive(Debug, Clone)]
pub struct CRom {
    pub address: Vec<usize>,
    pub data: Vec<usize>,
    /// Word per address; bit `j` of the word is data bit `j`.
    pub words: Vec<u64>,
}

/// Index-based view of a netlist used by the simulator, the CNF encoder and
/// the structural analyses.
///
/// Signal indices are laid out as: primary inputs, key inputs, flip-flop
/// outputs, ROM data bits, then gate outputs in topological order. `gates`
/// is stored in that same topological order.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub names: Vec<String>,
    pub index: HashMap<String, usize>,
    pub driver: Vec<Driver>,
    pub inputs: Vec<usize>,
    pub keys: Vec<usize>,
    pub outputs: Vec<usize>,
    pub dff_q: Vec<usize>,
    pub dff_d: Vec<usize>,
    /// `(si, se)` per flip-flop when scan-stitched.
    pub dff_scan: Vec<Option<(usize, usize)>>,
    pub roms: Vec<CRom>,
    pub gates: Vec<CGate>,
    /// For each gate in `gates`, its position in the builder's gate list.
    pub gate_origin: Vec<usize>,
}

pub const MAX_ROM_ADDRESS_BITS: usize = 24;

impl Compiled {
    pub fn new(b: &NetlistBuilder) -> Result<Compiled, NetlistError> {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut driver: Vec<Driver> = Vec::new();
        let mut define = |name: &str, d: Driver, names: &mut Vec<String>, driver: &mut Vec<Driver>| {
            if index.contains_key(name) {
                return Err(NetlistError::DuplicateDriver(name.to_string()));
            }
            index.insert(name.to_string(), names.len());
            names.push(name.to_string());
            driver.push(d);
            Ok(())
        };

        for k in &b.key_inputs {
            if b.inputs.contains(k) {
                return Err(NetlistError::KeyIsInput(k.clone()));
            }
        }
        for (i, s) in b.inputs.iter().enumerate() {
            define(s, Driver::Input(i), &mut names, &mut driver)?;
        }
        for (i, s) in b.key_inputs.iter().enumerate() {
            define(s, Driver::Key(i), &mut names, &mut driver)?;
        }
        for (i, d) in b.dffs.iter().enumerate() {
            define(&d.q, Driver::Dff(i), &mut names, &mut driver)?;
        }
        for (r, rom) in b.roms.iter().enumerate() {
            if rom.address.len() > MAX_ROM_ADDRESS_BITS {
                return Err(NetlistError::RomShape {
                    rom: rom.name.clone(),
                    reason: format!("address width {} exceeds {}", rom.address.len(), MAX_ROM_ADDRESS_BITS),
                });
            }
            if rom.data.is_empty() || rom.data.len() > 64 {
                return Err(NetlistError::RomShape {
                    rom: rom.name.clone(),
                    reason: format!("word width {} outside 1..=64", rom.data.len()),
                });
            }
            if rom.contents.len() != 1 << rom.address.len() {
                return Err(NetlistError::RomShape {
                    rom: rom.name.clone(),
                    reason: format!("{} words for {} address bits", rom.contents.len(), rom.address.len()),
                });
            }
            if let Some(w) = rom.contents.iter().find(|w| w.len() != rom.data.len()) {
                return Err(NetlistError::RomShape {
                    rom: rom.name.clone(),
                    reason: format!("word of {} bits, expected {}", w.len(), rom.data.len()),
                });
            }
            for (bit, s) in rom.data.iter().enumerate() {
                define(s, Driver::Rom { rom: r, bit }, &mut names, &mut driver)?;
            }
        }
        for g in &b.gates {
            if !g.kind.arity_ok(g.inputs.len()) {
                return Err(NetlistError::Arity {
                    output: g.output.clone(),
                    kind: g.kind,
                    got: g.inputs.len(),
                });
            }
        }
        // Gate outputs get provisional indices; they are renumbered below.
        let n_sources = names.len();
        for (i, g) in b.gates.iter().enumerate() {
            define(&g.output, Driver::Gate(i), &mut names, &mut driver)?;
        }

        let lookup = |s: &str, user: &str| -> Result<usize, NetlistError> {
            index.get(s).copied().ok_or_else(|| NetlistError::Undefined {
                signal: s.to_string(),
                user: user.to_string(),
            })
        };

        let mut gate_ins: Vec<Vec<usize>> = Vec::with_capacity(b.gates.len());
        for g in &b.gates {
            gate_ins.push(
                g.inputs
                    .iter()
                    .map(|s| lookup(s, &g.output))
                    .collect::<Result<_, _>>()?,
            );
        }

        // Kahn's algorithm over gates.
        let ng = b.gates.len();
        let mut indeg = vec![0usize; ng];
        let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); ng];
        for (gi, ins) in gate_ins.iter().enumerate() {
            for &s in ins {
                if let Driver::Gate(src) = driver[s] {
                    indeg[gi] += 1;
                    fanout[src].push(gi);
                }
            }
        }
        let mut order: Vec<usize> = Vec::with_capacity(ng);
        let mut stack: Vec<usize> = (0..ng).rev().filter(|&g| indeg[g] == 0).collect();
        while let Some(g) = stack.pop() {
            order.push(g);
            for &h in fanout[g].iter().rev() {
                indeg[h] -= 1;
                if indeg[h] == 0 {
                    stack.push(h);
                }
            }
        }
        if order.len() != ng {
            let stuck = (0..ng).find(|&g| indeg[g] > 0).expect("cycle member");
            return Err(NetlistError::CombinationalCycle(b.gates[stuck].output.clone()));
        }

        // Renumber gate outputs into topological order.
        let mut remap: Vec<usize> = (0..names.len()).collect();
        let mut new_names = names[..n_sources].to_vec();
        let mut new_driver = driver[..n_sources].to_vec();
        for &g in &order {
            let old = n_sources + g;
            remap[old] = new_names.len();
            new_names.push(names[old].clone());
            new_driver.push(Driver::Gate(new_names.len() - 1 - n_sources));
        }
        let index: HashMap<String, usize> = new_names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let get = |s: &str, user: &str| -> Result<usize, NetlistError> {
            index.get(s).copied().ok_or_else(|| NetlistError::Undefined {
                signal: s.to_string(),
                user: user.to_string(),
            })
        };
        let gates: Vec<CGate> = order
            .iter()
            .map(|&g| CGate {
                kind: b.gates[g].kind,
                ins: gate_ins[g].iter().map(|&s| remap[s]).collect(),
                out: remap[n_sources + g],
            })
            .collect();

        let inputs = b.inputs.iter().map(|s| index[s]).collect();
        let keys = b.key_inputs.iter().map(|s| index[s]).collect();
        let outputs = b
            .outputs
            .iter()
            .map(|s| get(s, "OUTPUT"))
            .collect::<Result<_, _>>()?;
        let dff_q = b.dffs.iter().map(|d| index[&d.q]).collect();
        let dff_d = b
            .dffs
            .iter()
            .map(|d| get(&d.d, &d.q))
            .collect::<Result<_, _>>()?;
        let dff_scan = b
            .dffs
            .iter()
            .map(|d| match &d.scan {
                Some(sp) => Ok(Some((get(&sp.si, &d.q)?, get(&sp.se, &d.q)?))),
                None => Ok(None),
            })
            .collect::<Result<_, _>>()?;
        let roms = b
            .roms
            .iter()
            .map(|r| {
                Ok(CRom {
                    address: r
                        .address
                        .iter()
                        .map(|s| get(s, &r.name))
                        .collect::<Result<_, _>>()?,
                    data: r.data.iter().map(|s| index[s]).collect(),
                    words: r
                        .contents
                        .iter()
                        .map(|w| {
                            w.iter()
                                .enumerate()
                                .fold(0u64, |acc, (j, &bit)| acc | ((bit as u64) << j))
                        })
                        .collect(),
                })
            })
            .collect::<Result<_, NetlistError>>()?;

        Ok(Compiled {
            names: new_names,
            index,
            driver: new_driver,
            inputs,
            keys,
            outputs,
            dff_q,
            dff_d,
            dff_scan,
            roms,
            gates,
            gate_origin: order,
        })
    }

    pub fn num_signals(&self) -> usize {
        self.names.len()
    }

    /// Index of the first gate-driven signal.
    pub fn first_gate_signal(&self) -> usize {
        self.names.len() - self.gates.len()
    }

    pub fn is_source(&self, s: usize) -> bool {
        !matches!(self.driver[s], Driver::Gate(_))
    }

    /// Gate (in `gates` order) driving a gate signal.
    pub fn gate_of(&self, s: usize) -> Option<&CGate> {
        match self.driver[s] {
            Driver::Gate(g) => Some(&self.gates[g]),
            _ => None,
        }
    }
}
