use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use lockbench::attack::{
    scan_unroll_attack, two_stage_attack, ubsat_attack, AttackStatus, FunctionalOptions, ScanPorts, SimOracle,
    UbsatConfig,
};
use lockbench::harness::{
    attack_model, load_circuit, lock_circuit, run_plan, write_csv, write_outputs, ExperimentPlan, LockConfig,
    StateOrder, TargetKind,
};
use lockbench::lock::MemoryMode;
use lockbench::netlist::bench::{read_bench_file, write_bench_file};
use lockbench::netlist::insert_scan_chain;
use lockbench::sat::{parse_dimacs, Backend, SolveResult};

#[derive(Parser)]
#[command(name = "lockbench", version, about = "Lock sequential netlists and attack the locks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    ScrambleC,
    ScrambleL,
}

#[derive(Clone, Copy, ValueEnum)]
enum Targets {
    Fsm,
    Datapath,
    Scan,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Msb,
    Lsb,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    Fsmim,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AttackMethod {
    Ubsat,
    TwoStage,
    Scansat,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lock a .bench (or .kiss) circuit.
    Lock {
        #[arg(long, value_enum)]
        method: Method,
        /// Switching-block width (scramble-c).
        #[arg(long, default_value_t = 4)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        extra_stages: usize,
        #[arg(long, default_value_t = 1)]
        copies: usize,
        /// ROM address width (scramble-l); the cone support by default.
        #[arg(long)]
        addr_width: Option<usize>,
        #[arg(long, value_enum, default_value = "full")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "fsm")]
        targets: Targets,
        #[arg(long, value_enum, default_value = "msb")]
        strategy: Order,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        key: PathBuf,
    },
    /// Attack a locked circuit with the original as a black-box oracle.
    Attack {
        #[arg(long, value_enum)]
        method: AttackMethod,
        locked: PathBuf,
        #[arg(long)]
        oracle: PathBuf,
        #[arg(long, default_value_t = 600.0)]
        time_limit: f64,
        #[arg(long, default_value_t = 64)]
        max_bound: usize,
        #[arg(long, default_value_t = 1)]
        boundary_step: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment plan (JSON) and write the CSV and markdown tables.
    Run {
        plan: PathBuf,
        /// Overrides the plan's output path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Solve a DIMACS file, printing competition-format output.
    #[command(hide = true)]
    Solve { cnf: PathBuf },
}

fn main() -> ExitCode {
    match run(Cli::parse().cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

type Res<T> = Result<T, Box<dyn std::error::Error>>;

fn backend() -> Res<Backend> {
    Ok(Backend::from_env()?)
}

fn run(cmd: Cmd) -> Res<u8> {
    match cmd {
        Cmd::Lock {
            method,
            size,
            extra_stages,
            copies,
            addr_width,
            mode,
            targets,
            strategy,
            seed,
            input,
            out,
            key,
        } => {
            let c = load_circuit(&input)?;
            let cfg = match method {
                Method::ScrambleC => LockConfig::ScrambleC {
                    size,
                    targets: match targets {
                        Targets::Fsm => TargetKind::Fsm,
                        Targets::Datapath => TargetKind::Datapath,
                        Targets::Scan => TargetKind::Scan,
                    },
                    m: extra_stages,
                    p: copies,
                    order: match strategy {
                        Order::Msb => StateOrder::Msb,
                        Order::Lsb => StateOrder::Lsb,
                    },
                },
                Method::ScrambleL => LockConfig::ScrambleL {
                    mode: match mode {
                        Mode::Full => MemoryMode::Full,
                        Mode::Fsmim => MemoryMode::Fsmim,
                    },
                    addr_width,
                },
            };
            let case = lock_circuit(&c, &cfg, seed)?;
            let written = write_bench_file(&case.package.locked, &out)?;
            let sidecar = written.get(1).and_then(|p| p.file_name()).map(|f| f.to_string_lossy().into_owned());
            let kf = case.package.key_file(sidecar.as_deref());
            std::fs::write(&key, serde_json::to_string_pretty(&kf)? + "\n")?;
            eprintln!(
                "locked {} ({} key bits) -> {}",
                c.name,
                case.package.locked.key_inputs().len(),
                out.display()
            );
            Ok(0)
        }
        Cmd::Attack {
            method,
            locked,
            oracle,
            time_limit,
            max_bound,
            boundary_step,
            seed,
            out,
        } => {
            let locked = read_bench_file(&locked)?;
            let mut reference = load_circuit(&oracle)?.netlist;
            if locked.inputs().iter().any(|i| i == "scan_en") && !reference.inputs().iter().any(|i| i == "scan_en") {
                reference = insert_scan_chain(&reference, None)?;
            }
            let limit = Duration::from_secs_f64(time_limit);
            let (report, ok) = match method {
                AttackMethod::TwoStage => {
                    let opts = FunctionalOptions {
                        backend: backend()?,
                        time_limit: limit,
                        ..FunctionalOptions::default()
                    };
                    let r = two_stage_attack(&locked, &opts)?;
                    let ok = r.succeeded();
                    let mut v = serde_json::to_value(&r)?;
                    v["status"] = if ok { "stg-recovered" } else { "stg-failed" }.into();
                    (v, ok)
                }
                AttackMethod::Ubsat | AttackMethod::Scansat => {
                    let cfg = UbsatConfig {
                        time_limit: limit,
                        max_bound,
                        boundary_step,
                        backend: backend()?,
                        seed,
                        ..UbsatConfig::default()
                    };
                    let model = attack_model(&locked)?;
                    let mut o = SimOracle::new(reference);
                    let r = if method == AttackMethod::Ubsat {
                        ubsat_attack(&model, &mut o, &cfg)?
                    } else {
                        scan_unroll_attack(&model, &mut o, &ScanPorts::default(), &cfg)?
                    };
                    (r.to_json(), r.status == AttackStatus::KeyFound && r.key_verified())
                }
            };
            emit(&report, out.as_deref())?;
            Ok(if ok { 0 } else { 1 })
        }
        Cmd::Run { plan, out, workers } => {
            let text = std::fs::read_to_string(&plan)?;
            let mut p = ExperimentPlan::from_json(&text)?;
            p.resolve(plan.parent().unwrap_or(Path::new(".")));
            if let Some(o) = out {
                p.output = Some(o);
            }
            if let Some(w) = workers {
                p.workers = w;
            }
            let rows = run_plan(&p)?;
            match &p.output {
                Some(csv) => {
                    let md = write_outputs(&rows, csv)?;
                    eprintln!("wrote {} and {}", csv.display(), md.display());
                }
                None => write_csv(&rows, std::io::stdout())?,
            }
            Ok(0)
        }
        Cmd::Solve { cnf } => {
            let (_, clauses) = parse_dimacs(&std::fs::read_to_string(&cnf)?)?;
            let mut s = backend()?.session();
            s.add_clauses(&clauses);
            match s.solve(&[]) {
                SolveResult::Sat => {
                    println!("s SATISFIABLE");
                    let lits: Vec<String> = (0..s.num_vars())
                        .map(|v| {
                            let var = lockbench::sat::Var(v as u32);
                            var.lit(s.value(var).unwrap_or(false)).to_dimacs().to_string()
                        })
                        .collect();
                    println!("v {} 0", lits.join(" "));
                    Ok(10)
                }
                SolveResult::Unsat => {
                    println!("s UNSATISFIABLE");
                    Ok(20)
                }
                SolveResult::Unknown => {
                    println!("s UNKNOWN");
                    Ok(0)
                }
            }
        }
    }
}

fn emit(v: &serde_json::Value, out: Option<&Path>) -> Res<()> {
    let text = serde_json::to_string_pretty(v)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
