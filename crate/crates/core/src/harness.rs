//! Experiment sweeps: lock every circuit with every configuration, attack
//! each locked copy, and tabulate the outcome.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{
    scan_unroll_attack, topological_analysis, two_stage_attack, ubsat_attack, AttackError, AttackStatus,
    FunctionalOptions, ScanPorts, SimOracle, UbsatConfig,
};
use crate::fsm::{parse_fsm_spec, synthesize_fsm, SpecError};
use crate::lock::{
    lock_connectivity, lock_memory, memory_as_luts, scan_chain_order, LockError, LockPackage, LockTargets,
    MemoryLockOptions, MemoryMode, TargetMode, DEFAULT_LUT_CAP,
};
use crate::netlist::bench::{read_bench_file, BenchError};
use crate::netlist::{ff_dependency_graph, insert_scan_chain, Netlist, NetlistError, SimError};
use crate::sat::Backend;
use crate::switch::{NetworkParams, SwitchError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Bench { path: PathBuf, source: BenchError },
    #[error("{path}: {source}")]
    Spec { path: PathBuf, source: SpecError },
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("self-check failed: {mismatches} of {sequences} sequences differ under the correct key")]
    SelfCheck { sequences: usize, mismatches: usize },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Lock(#[from] LockError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Switch(#[from] SwitchError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A benchmark circuit with its best-known state register, MSB first.
#[derive(Debug, Clone)]
pub struct Circuit {
    pub name: String,
    pub netlist: Netlist,
    pub state_ffs: Vec<String>,
}

/// State flip-flops of a netlist without FSM metadata: the largest stage-one
/// candidate set, else every flip-flop on a feedback cycle, else all of them.
/// Netlist order is kept.
pub fn state_register_hint(n: &Netlist) -> Vec<String> {
    let is_ff = |q: &String| n.dff_by_q(q).is_some();
    let best = topological_analysis(n)
        .into_iter()
        .map(|s| s.into_iter().filter(is_ff).collect::<Vec<_>>())
        .max_by_key(Vec::len)
        .filter(|s| !s.is_empty());
    let set: Vec<String> = match best {
        Some(s) => s,
        None => {
            let g = ff_dependency_graph(n);
            let cyc: Vec<String> = g.cyclic_nodes().into_iter().map(|i| g.dffs[i].clone()).collect();
            if cyc.is_empty() {
                g.dffs
            } else {
                cyc
            }
        }
    };
    n.dffs().iter().map(|d| d.q.clone()).filter(|q| set.contains(q)).collect()
}

/// Reads a `.bench` netlist, or synthesizes a `.kiss` FSM description.
pub fn load_circuit(path: &Path) -> Result<Circuit, HarnessError> {
    let name = path
        .file_stem()
        .map_or_else(|| "circuit".to_string(), |s| s.to_string_lossy().into_owned());
    if path.extension().is_some_and(|e| e == "kiss") {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.into(),
            source,
        })?;
        let spec = parse_fsm_spec(&name, &text).map_err(|source| HarnessError::Spec {
            path: path.into(),
            source,
        })?;
        let (netlist, state_ffs) = synthesize_fsm(&spec).map_err(|source| HarnessError::Spec {
            path: path.into(),
            source,
        })?;
        return Ok(Circuit {
            name,
            netlist,
            state_ffs,
        });
    }
    let netlist = read_bench_file(path).map_err(|source| HarnessError::Bench {
        path: path.into(),
        source,
    })?;
    let state_ffs = state_register_hint(&netlist);
    Ok(Circuit {
        name,
        netlist,
        state_ffs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Fsm,
    Datapath,
    Scan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum LockConfig {
    ScrambleC {
        size: usize,
        targets: TargetKind,
        #[serde(default)]
        m: usize,
        #[serde(default = "one")]
        p: usize,
        /// Which end of the state register `fsm` targets take.
        #[serde(default)]
        order: StateOrder,
    },
    ScrambleL {
        mode: MemoryMode,
        #[serde(default)]
        addr_width: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateOrder {
    #[default]
    Msb,
    Lsb,
}

fn one() -> usize {
    1
}

impl LockConfig {
    pub fn method(&self) -> &'static str {
        match self {
            LockConfig::ScrambleC { .. } => "scramble-c",
            LockConfig::ScrambleL { .. } => "scramble-l",
        }
    }

    /// The table column label: lock size, or memory mode and address width.
    pub fn param(&self) -> String {
        match self {
            LockConfig::ScrambleC { size, m, p, .. } if (*m, *p) == (0, 1) => size.to_string(),
            LockConfig::ScrambleC { size, m, p, .. } => format!("{size}/m{m}/p{p}"),
            LockConfig::ScrambleL { mode, addr_width } => {
                let mode = match mode {
                    MemoryMode::Full => "full",
                    MemoryMode::Fsmim => "fsmim",
                };
                match addr_width {
                    Some(x) => format!("{mode}/x{x}"),
                    None => mode.to_string(),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Ubsat,
    TwoStage,
    Scansat,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::Ubsat => "ubsat",
            AttackKind::TwoStage => "two-stage",
            AttackKind::Scansat => "scansat",
        }
    }
}

/// Budgets shared by every attack cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackLimits {
    pub time_limit: Duration,
    pub max_bound: usize,
    pub boundary_step: usize,
    pub backend: Backend,
}

impl Default for AttackLimits {
    fn default() -> Self {
        AttackLimits {
            time_limit: Duration::from_secs(600),
            max_bound: 64,
            boundary_step: 1,
            backend: Backend::Cdcl,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub circuits: Vec<PathBuf>,
    pub locks: Vec<LockConfig>,
    #[serde(default)]
    pub attacks: Vec<AttackKind>,
    #[serde(default = "default_limit")]
    pub time_limit_s: f64,
    #[serde(default = "default_bound")]
    pub max_bound: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// CSV path; the markdown table goes next to it with an `.md` extension.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "one")]
    pub workers: usize,
}

fn default_limit() -> f64 {
    600.0
}
fn default_bound() -> usize {
    64
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<ExperimentPlan, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Plan(e.to_string()))
    }

    /// Relative circuit paths resolve against `base`.
    pub fn resolve(&mut self, base: &Path) {
        for c in &mut self.circuits {
            if c.is_relative() {
                *c = base.join(&*c);
            }
        }
        if let Some(o) = &mut self.output {
            if o.is_relative() {
                *o = base.join(&*o);
            }
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.time_limit_s > 0.0 && self.time_limit_s.is_finite()) {
            return Err(HarnessError::Plan(format!("time limit {} is not positive", self.time_limit_s)));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Plan("no seeds".into()));
        }
        if let Some(c) = self.circuits.iter().find(|c| !c.is_file()) {
            return Err(HarnessError::Plan(format!("{} does not exist", c.display())));
        }
        Ok(())
    }

    pub fn limits(&self) -> AttackLimits {
        AttackLimits {
            time_limit: Duration::from_secs_f64(self.time_limit_s),
            max_bound: self.max_bound,
            ..AttackLimits::default()
        }
    }
}

/// A locked circuit and the reference design its oracle simulates (the
/// original, scan-stitched when the lock targets the scan chain).
#[derive(Debug, Clone)]
pub struct LockedCase {
    pub package: LockPackage,
    pub reference: Netlist,
}

/// Locks `c` per `cfg`, then checks the correct key on 100 random sequences.
///
/// When a lock is wider than the available targets the switching block pads
/// the spare ports with decoys.
pub fn lock_circuit(c: &Circuit, cfg: &LockConfig, seed: u64) -> Result<LockedCase, HarnessError> {
    let n = &c.netlist;
    let (package, reference) = match *cfg {
        LockConfig::ScrambleC {
            size,
            targets,
            m,
            p,
            order,
        } => {
            let params = NetworkParams::new(size, m, p)?;
            let (reference, t) = match targets {
                TargetKind::Fsm => (
                    n.clone(),
                    LockTargets {
                        mode: TargetMode::FsmDataIn,
                        ffs: match order {
                            StateOrder::Msb => c.state_ffs.iter().take(size).cloned().collect(),
                            StateOrder::Lsb => c.state_ffs[c.state_ffs.len().saturating_sub(size)..].to_vec(),
                        },
                    },
                ),
                TargetKind::Datapath => {
                    let (data, state): (Vec<String>, Vec<String>) =
                        n.dffs().iter().map(|d| d.q.clone()).partition(|q| !c.state_ffs.contains(q));
                    (
                        n.clone(),
                        LockTargets {
                            mode: TargetMode::DatapathDataIn,
                            ffs: data.into_iter().chain(state).take(size).collect(),
                        },
                    )
                }
                TargetKind::Scan => {
                    let s = if n.has_scan() { n.clone() } else { insert_scan_chain(n, None)? };
                    let ffs = scan_chain_order(&s).into_iter().take(size).collect();
                    (
                        s,
                        LockTargets {
                            mode: TargetMode::ScanIn,
                            ffs,
                        },
                    )
                }
            };
            (lock_connectivity(&reference, &t, params, seed)?, reference)
        }
        LockConfig::ScrambleL { mode, addr_width } => {
            let opts = MemoryLockOptions {
                mode,
                addr_width,
                feedback_targets: false,
                seed,
            };
            (lock_memory(n, &c.state_ffs, &opts)?, n.clone())
        }
    };
    let rep = package.verify(&reference, 100, 50, seed)?;
    if !rep.equivalent() {
        return Err(HarnessError::SelfCheck {
            sequences: rep.sequences,
            mismatches: rep.mismatches,
        });
    }
    Ok(LockedCase { package, reference })
}

/// The netlist an oracle-guided attack works on: ROMs become key-addressed
/// lookup tables, since the attacker cannot read their contents.
pub fn attack_model(locked: &Netlist) -> Result<Netlist, HarnessError> {
    let mut n = locked.clone();
    for rom in locked.roms() {
        n = memory_as_luts(&n, &rom.name, DEFAULT_LUT_CAP)?.netlist;
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackOutcome {
    pub status: String,
    pub wall_ms: u128,
    pub key_verified: bool,
    pub detail: serde_json::Value,
}

pub const STATUS_TIMEOUT: &str = "TIMEOUT";

fn status_cell(s: AttackStatus) -> String {
    match s {
        AttackStatus::Timeout => STATUS_TIMEOUT.to_string(),
        other => other.as_str().to_string(),
    }
}

pub fn run_attack(case: &LockedCase, kind: AttackKind, limits: &AttackLimits, seed: u64) -> Result<AttackOutcome, HarnessError> {
    let t0 = Instant::now();
    let cfg = UbsatConfig {
        max_bound: limits.max_bound,
        boundary_step: limits.boundary_step,
        time_limit: limits.time_limit,
        backend: limits.backend.clone(),
        seed,
        ..UbsatConfig::default()
    };
    match kind {
        AttackKind::Ubsat | AttackKind::Scansat => {
            let model = attack_model(&case.package.locked)?;
            let mut oracle = SimOracle::new(case.reference.clone());
            let r = if kind == AttackKind::Ubsat {
                ubsat_attack(&model, &mut oracle, &cfg)?
            } else {
                if !model.dffs().iter().any(|d| d.scan.is_some()) {
                    return Err(HarnessError::Unsupported("scansat needs a scan-stitched circuit".into()));
                }
                scan_unroll_attack(&model, &mut oracle, &ScanPorts::default(), &cfg)?
            };
            Ok(AttackOutcome {
                status: status_cell(r.status),
                wall_ms: r.wall_ms,
                key_verified: r.key_verified(),
                detail: r.to_json(),
            })
        }
        AttackKind::TwoStage => {
            let opts = FunctionalOptions {
                backend: limits.backend.clone(),
                time_limit: limits.time_limit,
                ..FunctionalOptions::default()
            };
            let r = two_stage_attack(&case.package.locked, &opts)?;
            let timed_out = t0.elapsed() >= limits.time_limit;
            let status = if r.succeeded() {
                "stg-recovered"
            } else if timed_out {
                STATUS_TIMEOUT
            } else {
                "stg-failed"
            };
            Ok(AttackOutcome {
                status: status.to_string(),
                wall_ms: t0.elapsed().as_millis(),
                key_verified: false,
                detail: serde_json::to_value(&r).unwrap_or_default(),
            })
        }
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub circuit: String,
    pub ffs: usize,
    pub gates: usize,
    pub method: String,
    pub param: String,
    pub attack: String,
    pub status: String,
    pub wall_ms: u128,
    pub key_verified: bool,
}

/// Runs every (circuit, lock, seed) cell on a pool of `plan.workers`
/// threads. Cell failures become `error: ...` rows. With no attacks listed
/// each cell reports the lock's key count and self-check instead.
pub fn run_plan(plan: &ExperimentPlan) -> Result<Vec<ReportRow>, HarnessError> {
    plan.validate()?;
    let circuits: Vec<Circuit> = plan.circuits.iter().map(|p| load_circuit(p)).collect::<Result<_, _>>()?;
    let limits = plan.limits();
    let cells: Vec<(&Circuit, &LockConfig, u64)> = circuits
        .iter()
        .flat_map(|c| plan.locks.iter().flat_map(move |l| plan.seeds.iter().map(move |&s| (c, l, s))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.max(1))
        .build()
        .map_err(|e| HarnessError::Plan(e.to_string()))?;
    let rows: Vec<Vec<ReportRow>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(c, l, seed)| run_cell(c, l, seed, &plan.attacks, &limits))
            .collect()
    });
    Ok(rows.into_iter().flatten().collect())
}

fn run_cell(c: &Circuit, l: &LockConfig, seed: u64, attacks: &[AttackKind], limits: &AttackLimits) -> Vec<ReportRow> {
    let stats = c.netlist.stats();
    let row = |attack: &str, status: String, wall_ms: u128, key_verified: bool| ReportRow {
        circuit: c.name.clone(),
        ffs: stats.dffs,
        gates: stats.gates,
        method: l.method().to_string(),
        param: l.param(),
        attack: attack.to_string(),
        status,
        wall_ms,
        key_verified,
    };
    let t0 = Instant::now();
    let case = match lock_circuit(c, l, seed) {
        Ok(case) => case,
        Err(e) => {
            let names: Vec<&str> = if attacks.is_empty() {
                vec!["none"]
            } else {
                attacks.iter().map(|a| a.as_str()).collect()
            };
            return names
                .into_iter()
                .map(|a| row(a, format!("error: {e}"), t0.elapsed().as_millis(), false))
                .collect();
        }
    };
    if attacks.is_empty() {
        let keys = case.package.locked.key_inputs().len();
        let bits = case.package.meta.params.get("table_bits").and_then(|v| v.as_u64());
        let status = match bits {
            Some(b) => format!("locked: {b} table bits"),
            None => format!("locked: {keys} key bits"),
        };
        return vec![row("none", status, t0.elapsed().as_millis(), false)];
    }
    attacks
        .iter()
        .map(|&a| match run_attack(&case, a, limits, seed) {
            Ok(o) => row(a.as_str(), o.status, o.wall_ms, o.key_verified),
            Err(e) => row(a.as_str(), format!("error: {e}"), 0, false),
        })
        .collect()
}

pub const CSV_HEADER: [&str; 9] = [
    "circuit",
    "ffs",
    "gates",
    "method",
    "param",
    "attack",
    "status",
    "wall_ms",
    "key_verified",
];

pub fn write_csv<W: std::io::Write>(rows: &[ReportRow], w: W) -> Result<(), HarnessError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in rows {
        wr.write_record([
            r.circuit.clone(),
            r.ffs.to_string(),
            r.gates.to_string(),
            r.method.clone(),
            r.param.clone(),
            r.attack.clone(),
            r.status.clone(),
            r.wall_ms.to_string(),
            r.key_verified.to_string(),
        ])?;
    }
    wr.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<ReportRow>, HarnessError> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<Result<Vec<ReportRow>, _>>()
        .map_err(HarnessError::from)
}

/// Tables per (attack, method): one row per circuit, one column per lock
/// parameter. Cells hold wall time in ms, `✗` for a timeout, or the status.
/// Several seeds in one cell are joined with ` / `.
pub fn to_markdown(rows: &[ReportRow]) -> String {
    let mut tables: BTreeMap<(&str, &str), Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        tables.entry((&r.attack, &r.method)).or_default().push(r);
    }
    let mut out = String::new();
    for ((attack, method), rs) in tables {
        let mut params: Vec<&str> = Vec::new();
        let mut circuits: Vec<(&str, usize, usize)> = Vec::new();
        for r in &rs {
            if !params.contains(&r.param.as_str()) {
                params.push(&r.param);
            }
            if !circuits.iter().any(|c| c.0 == r.circuit) {
                circuits.push((&r.circuit, r.ffs, r.gates));
            }
        }
        let _ = writeln!(out, "### {method} / {attack}\n");
        let _ = writeln!(out, "| circuit | #FF | #gates | {} |", params.join(" | "));
        let _ = writeln!(out, "|---|---:|---:|{}", "---:|".repeat(params.len()));
        for (c, ffs, gates) in circuits {
            let cells: Vec<String> = params
                .iter()
                .map(|p| {
                    let v: Vec<String> = rs
                        .iter()
                        .filter(|r| r.circuit == c && r.param == *p)
                        .map(|r| cell(r))
                        .collect();
                    if v.is_empty() {
                        "-".into()
                    } else {
                        v.join(" / ")
                    }
                })
                .collect();
            let _ = writeln!(out, "| {c} | {ffs} | {gates} | {} |", cells.join(" | "));
        }
        out.push('\n');
    }
    out
}

fn cell(r: &ReportRow) -> String {
    match r.status.as_str() {
        STATUS_TIMEOUT => "✗".into(),
        "key-found" if r.key_verified => r.wall_ms.to_string(),
        "stg-recovered" => format!("{} (stg)", r.wall_ms),
        s => s.to_string(),
    }
}

/// Writes `<output>` as CSV and `<output>.md` next to it.
pub fn write_outputs(rows: &[ReportRow], csv_path: &Path) -> Result<PathBuf, HarnessError> {
    let io = |source| HarnessError::Io {
        path: csv_path.into(),
        source,
    };
    let f = std::fs::File::create(csv_path).map_err(io)?;
    write_csv(rows, f)?;
    let md = csv_path.with_extension("md");
    std::fs::write(&md, to_markdown(rows)).map_err(|source| HarnessError::Io {
        path: md.clone(),
        source,
    })?;
    Ok(md)
}
