//! Any DIMACS solver binary that follows the competition output format
//! (`s SATISFIABLE` / `s UNSATISFIABLE`, `v` lines). Each call writes the
//! whole formula plus assumptions as unit clauses to a temporary file.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::{cnf::write_dimacs, Lit, SolveResult, SolverSession, Var};

#[derive(Debug, Clone)]
pub struct ExternalSolver {
    program: String,
    clauses: Vec<Vec<Lit>>,
    nvars: usize,
    model: Vec<bool>,
    deadline: Option<Instant>,
    pub last_error: Option<String>,
}

impl ExternalSolver {
    pub fn new(program: impl Into<String>) -> ExternalSolver {
        ExternalSolver {
            program: program.into(),
            clauses: Vec::new(),
            nvars: 0,
            model: Vec::new(),
            deadline: None,
            last_error: None,
        }
    }

    fn run(&mut self, assumptions: &[Lit]) -> Result<SolveResult, String> {
        let mut f = tempfile::Builder::new()
            .suffix(".cnf")
            .tempfile()
            .map_err(|e| e.to_string())?;
        let units: Vec<Vec<Lit>> = assumptions.iter().map(|&l| vec![l]).collect();
        let all: Vec<Vec<Lit>> = self.clauses.iter().cloned().chain(units).collect();
        f.write_all(write_dimacs(self.nvars, &all).as_bytes())
            .map_err(|e| e.to_string())?;
        f.flush().map_err(|e| e.to_string())?;
        let mut child = Command::new(&self.program)
            .arg(f.path())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("{}: {e}", self.program))?;
        // drain stdout concurrently so a large model cannot fill the pipe
        let mut stdout = child.stdout.take().expect("piped");
        let reader = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stdout.read_to_end(&mut buf);
            buf
        });
        loop {
            if child.try_wait().map_err(|e| e.to_string())?.is_some() {
                break;
            }
            if self.deadline.is_some_and(|d| Instant::now() >= d) {
                let _ = child.kill();
                let _ = child.wait();
                let _ = reader.join();
                return Ok(SolveResult::Unknown);
            }
            std::thread::sleep(Duration::from_millis(2));
        }
        let out = reader.join().map_err(|_| "solver output reader panicked".to_string())?;
        let text = String::from_utf8_lossy(&out);
        let mut status = None;
        let mut model = vec![false; self.nvars];
        for line in text.lines() {
            let line = line.trim();
            if let Some(s) = line.strip_prefix("s ") {
                status = Some(match s.trim() {
                    "SATISFIABLE" => SolveResult::Sat,
                    "UNSATISFIABLE" => SolveResult::Unsat,
                    _ => SolveResult::Unknown,
                });
            } else if let Some(v) = line.strip_prefix("v ") {
                for tok in v.split_whitespace() {
                    let d: i64 = tok.parse().map_err(|_| format!("bad model token `{tok}`"))?;
                    if d != 0 {
                        let l = Lit::from_dimacs(d);
                        if l.var().index() < model.len() {
                            model[l.var().index()] = !l.is_neg();
                        }
                    }
                }
            }
        }
        let status = status.ok_or_else(|| "no status line in solver output".to_string())?;
        if status == SolveResult::Sat {
            self.model = model;
        }
        Ok(status)
    }
}

impl SolverSession for ExternalSolver {
    fn add_clause(&mut self, lits: &[Lit]) {
        for l in lits {
            self.nvars = self.nvars.max(l.var().index() + 1);
        }
        self.clauses.push(lits.to_vec());
    }

    fn solve(&mut self, assumptions: &[Lit]) -> SolveResult {
        self.model.clear();
        for l in assumptions {
            self.nvars = self.nvars.max(l.var().index() + 1);
        }
        match self.run(assumptions) {
            Ok(r) => r,
            Err(e) => {
                self.last_error = Some(e);
                SolveResult::Unknown
            }
        }
    }

    fn value(&self, v: Var) -> Option<bool> {
        self.model.get(v.index()).copied()
    }

    fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    fn num_vars(&self) -> usize {
        self.nvars
    }
}
