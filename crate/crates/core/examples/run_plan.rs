//! Runs a small experiment grid (locks x attacks over two circuits) and prints
//! the markdown report. `lockbench run plan.json` does the same from a file.
//!
//! cargo run --release --example run_plan

use lockbench::fixtures;
use lockbench::harness::{run_plan, to_markdown, write_outputs, ExperimentPlan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    for name in ["counter2", "s27"] {
        let (_, text) = fixtures::BENCH.iter().find(|(n, _)| *n == name).expect("bundled");
        std::fs::write(dir.path().join(format!("{name}.bench")), text)?;
    }
    let plan = ExperimentPlan::from_json(
        r#"{
            "circuits": ["counter2.bench", "s27.bench"],
            "locks": [
                {"method": "scramble-c", "size": 2, "targets": "fsm"},
                {"method": "scramble-c", "size": 4, "targets": "fsm"},
                {"method": "scramble-l", "mode": "fsmim"}
            ],
            "attacks": ["ubsat", "two-stage"],
            "time_limit_s": 60,
            "output": "results.csv",
            "workers": 2
        }"#,
    )?;
    let mut plan = plan;
    plan.resolve(dir.path());

    let rows = run_plan(&plan)?;
    print!("{}", to_markdown(&rows));
    let md = write_outputs(&rows, plan.output.as_deref().expect("set above"))?;
    eprintln!("wrote {}", md.display());
    Ok(())
}
