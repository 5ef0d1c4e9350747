use std::path::Path;
use std::process::Command;

use lockbench::harness::read_csv;
use lockbench::lock::KeyFile;
use lockbench::netlist::bench::read_bench_file;

const BIN: &str = env!("CARGO_BIN_EXE_lockbench");

fn circuit(name: &str) -> String {
    format!("{}/circuits/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn lockbench(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn lock_then_attack_counter() {
    let dir = tempfile::tempdir().unwrap();
    let (out, key) = (dir.path().join("c.bench"), dir.path().join("c.key.json"));
    let r = lockbench(&["lock", "--method", "scramble-c", "--size", "2", &circuit("counter2.bench"), "--out", s(&out), "--key", s(&key)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let locked = read_bench_file(&out).unwrap();
    assert_eq!(locked.key_inputs().len(), 3);
    let kf = KeyFile::parse(&std::fs::read_to_string(&key).unwrap()).unwrap();
    assert_eq!(kf.bits_for(&locked).unwrap().len(), 3);

    let r = lockbench(&["attack", "--method", "ubsat", s(&out), "--oracle", &circuit("counter2.bench")]);
    assert_eq!(r.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(report["status"], "key-found");
    assert_eq!(report["key_verified"], true);
}

#[test]
fn rom_lock_writes_hex_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let (out, key) = (dir.path().join("f.bench"), dir.path().join("f.key.json"));
    let r = lockbench(&[
        "lock", "--method", "scramble-l", "--addr-width", "7", &circuit("s298.bench"), "--out", s(&out), "--key", s(&key),
    ]);
    // 14 state flip-flops and 3 inputs cannot fit in 7 address bits
    assert_eq!(r.status.code(), Some(2));

    let r = lockbench(&[
        "lock", "--method", "scramble-l", "--addr-width", "6", &circuit("fsm10.kiss"), "--out", s(&out), "--key", s(&key),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let hex: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "hex"))
        .collect();
    assert_eq!(hex.len(), 1);
    assert_eq!(std::fs::read_to_string(&hex[0]).unwrap().lines().count(), 64);
    let locked = read_bench_file(&out).unwrap();
    assert_eq!(locked.roms()[0].address.len(), 6);
}

#[test]
fn two_stage_on_rom_lock_reports_failure() {
    let dir = tempfile::tempdir().unwrap();
    let (out, key) = (dir.path().join("s.bench"), dir.path().join("s.key.json"));
    let r = lockbench(&["lock", "--method", "scramble-l", &circuit("s27.bench"), "--out", s(&out), "--key", s(&key)]);
    assert!(r.status.success());
    let r = lockbench(&["attack", "--method", "two-stage", s(&out), "--oracle", &circuit("s27.bench")]);
    assert_eq!(r.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(report["status"], "stg-failed");
}

#[test]
fn run_writes_csv_and_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    std::fs::write(
        &plan,
        serde_json::json!({
            "circuits": [circuit("counter2.bench"), circuit("s27.bench")],
            "locks": [{"method": "scramble-c", "size": 2, "targets": "fsm"}],
            "attacks": ["ubsat"],
            "time_limit_s": 60,
            "output": "out.csv"
        })
        .to_string(),
    )
    .unwrap();
    let r = lockbench(&["run", s(&plan)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let rows = read_csv(std::fs::File::open(dir.path().join("out.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.status == "key-found" && r.key_verified));
    let md = std::fs::read_to_string(dir.path().join("out.md")).unwrap();
    assert!(md.contains("| counter2 |"), "{md}");
}

#[test]
fn hidden_solve_speaks_dimacs() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("x.cnf");
    std::fs::write(&f, "p cnf 2 2\n1 2 0\n-1 0\n").unwrap();
    let r = lockbench(&["solve", s(&f)]);
    assert_eq!(r.status.code(), Some(10));
    let text = String::from_utf8(r.stdout).unwrap();
    assert!(text.contains("s SATISFIABLE") && text.contains("v -1 2 0"), "{text}");
    std::fs::write(&f, "p cnf 1 2\n1 0\n-1 0\n").unwrap();
    assert_eq!(lockbench(&["solve", s(&f)]).status.code(), Some(20));
    let help = String::from_utf8(lockbench(&["--help"]).stdout).unwrap();
    assert!(!help.contains("solve"));
}
