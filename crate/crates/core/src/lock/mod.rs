//! The two locks: a keyed routing block between flip-flops and their
//! fan-in cones (`crlb`), and a ROM that replaces the cones (`memory`).

mod crlb;
mod memory;

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::{stg_diff, Stg, StgError};
use crate::netlist::equiv::{random_equivalence, EquivReport};
use crate::netlist::{NetlistError, Netlist, SimError};
use crate::switch::SwitchError;

pub use crlb::{lock_connectivity, scan_chain_order, select_target_ffs, LockTargets, SelectionStrategy, Strategy, TargetMode};
pub use memory::{
    extract_cone_table, lock_memory, memory_as_luts, ConeTable, FsmimSpec, LutModel, MemoryLockOptions, MemoryMode,
    DEFAULT_LUT_CAP,
};

#[derive(Debug, Error)]
pub enum LockError {
    #[error("flip-flop `{0}` does not exist")]
    UnknownFf(String),
    #[error("flip-flop `{0}` listed twice")]
    DuplicateFf(String),
    #[error("need {need} flip-flops of the requested class, found {have}")]
    InsufficientDffs { need: usize, have: usize },
    #[error("strategy needs a state flip-flop hint")]
    MissingHint,
    #[error("lock size {0} is not a power of two of at least 2")]
    BadSize(usize),
    #[error("flip-flop `{0}` is not scan-stitched")]
    NotScan(String),
    #[error("no routable restoring permutation after {0} draws")]
    Unroutable(usize),
    #[error("cone support of {got} signals exceeds the cap of {cap}")]
    SupportCap { got: usize, cap: usize },
    #[error("address width {want} is below the {need} signals the cones need")]
    AddressTooNarrow { want: usize, need: usize },
    #[error("not enough spare signals to pad the address to {0} bits")]
    AddressPadding(usize),
    #[error("reachability search exceeded {0} visits")]
    ReachCap(usize),
    #[error("rom `{0}` not found")]
    UnknownRom(String),
    #[error("rom address width {got} exceeds the LUT cap {cap}")]
    LutCap { got: usize, cap: usize },
    #[error("bad key file: {0}")]
    KeyFile(String),
    #[error(transparent)]
    Switch(#[from] SwitchError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LockMethod {
    ScrambleC,
    ScrambleL,
}

impl LockMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            LockMethod::ScrambleC => "scramble-c",
            LockMethod::ScrambleL => "scramble-l",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockMeta {
    pub method: LockMethod,
    pub params: serde_json::Value,
    pub targets: Vec<String>,
    pub seed: u64,
}

/// A locked netlist with the key that restores the original behavior.
///
/// For the memory lock the key is the ROM contents, which stay inside the
/// netlist; `correct_key` is then empty.
#[derive(Debug, Clone)]
pub struct LockPackage {
    pub locked: Netlist,
    pub correct_key: IndexMap<String, bool>,
    pub meta: LockMeta,
}

impl LockPackage {
    /// Key bits in `locked.key_inputs()` order.
    pub fn key_bits(&self) -> Vec<bool> {
        self.locked.key_inputs().iter().map(|k| self.correct_key[k]).collect()
    }

    /// Random-sequence comparison against `original` under the correct key.
    pub fn verify(&self, original: &Netlist, count: usize, len: usize, seed: u64) -> Result<EquivReport, SimError> {
        let key = self.key_bits();
        random_equivalence(&self.locked, Some(&key), original, None, count, len, seed)
    }

    /// Key file contents. `contents_file` names the ROM hex sidecar, if any.
    pub fn key_file(&self, contents_file: Option<&str>) -> serde_json::Value {
        let mut v = serde_json::json!({
            "method": self.meta.method.as_str(),
            "seed": self.meta.seed,
            "params": self.meta.params,
            "targets": self.meta.targets,
            "key": self.correct_key.iter().map(|(k, &b)| (k.clone(), serde_json::Value::from(b as u8))).collect::<serde_json::Map<_, _>>(),
        });
        if let Some(f) = contents_file {
            v["contents_file"] = f.into();
        }
        if let Some(layout) = self.meta.params.get("address") {
            v["address_layout"] = layout.clone();
        }
        v
    }
}

/// Parsed key file.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyFile {
    pub method: String,
    pub seed: u64,
    pub params: serde_json::Value,
    pub key: IndexMap<String, bool>,
    pub contents_file: Option<String>,
}

impl KeyFile {
    pub fn parse(text: &str) -> Result<KeyFile, LockError> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| LockError::KeyFile(e.to_string()))?;
        let bad = |m: &str| LockError::KeyFile(m.to_string());
        let method = v["method"].as_str().ok_or_else(|| bad("missing method"))?.to_string();
        let mut key = IndexMap::new();
        if let Some(m) = v["key"].as_object() {
            for (k, b) in m {
                let bit = match b {
                    serde_json::Value::Bool(b) => *b,
                    serde_json::Value::Number(n) => n.as_u64() == Some(1),
                    _ => return Err(bad("key values must be 0/1")),
                };
                key.insert(k.clone(), bit);
            }
        }
        Ok(KeyFile {
            method,
            seed: v["seed"].as_u64().unwrap_or(0),
            params: v["params"].clone(),
            key,
            contents_file: v["contents_file"].as_str().map(str::to_string),
        })
    }

    /// Key bits ordered like `n.key_inputs()`.
    pub fn bits_for(&self, n: &Netlist) -> Result<Vec<bool>, LockError> {
        n.key_inputs()
            .iter()
            .map(|k| {
                self.key
                    .get(k)
                    .copied()
                    .ok_or_else(|| LockError::KeyFile(format!("no value for key input `{k}`")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FalseTransitions {
    pub extra_states: usize,
    pub false_transitions: usize,
}

/// Compares the STG of a locked circuit under some key with the original.
pub fn count_false_transitions(original: &Stg, locked: &Stg) -> Result<FalseTransitions, StgError> {
    let d = stg_diff(original, locked)?;
    Ok(FalseTransitions {
        extra_states: d.extra_states,
        false_transitions: d.false_transitions,
    })
}

/// A prefix no existing signal starts with.
pub(crate) fn fresh_prefix(n: &Netlist, stem: &str) -> String {
    let names: HashSet<&str> = n.compiled().names.iter().map(String::as_str).collect();
    (0..)
        .map(|i| if i == 0 { format!("{stem}_") } else { format!("{stem}{i}_") })
        .find(|p| !names.iter().any(|s| s.starts_with(p.as_str())))
        .expect("unbounded")
}
