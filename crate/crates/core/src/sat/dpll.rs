//! Plain DPLL with unit propagation. Re-solves from scratch on every call;
//! kept as a slow, obviously-correct reference backend.

use std::time::Instant;

use super::{Lit, SolveResult, SolverSession, Var};

#[derive(Debug, Clone, Default)]
pub struct Dpll {
    clauses: Vec<Vec<Lit>>,
    nvars: usize,
    model: Vec<bool>,
    deadline: Option<Instant>,
}

impl Dpll {
    pub fn new() -> Dpll {
        Dpll::default()
    }

    fn lit_val(assign: &[Option<bool>], l: Lit) -> Option<bool> {
        assign[l.var().index()].map(|b| l.eval(b))
    }

    /// Returns false on conflict.
    fn propagate(&self, assign: &mut [Option<bool>], trail: &mut Vec<usize>) -> bool {
        loop {
            let mut changed = false;
            for c in &self.clauses {
                let mut unassigned = None;
                let mut count = 0;
                let mut sat = false;
                for &l in c {
                    match Self::lit_val(assign, l) {
                        Some(true) => {
                            sat = true;
                            break;
                        }
                        Some(false) => {}
                        None => {
                            count += 1;
                            unassigned = Some(l);
                        }
                    }
                }
                if sat {
                    continue;
                }
                match (count, unassigned) {
                    (0, _) => return false,
                    (1, Some(l)) => {
                        assign[l.var().index()] = Some(!l.is_neg());
                        trail.push(l.var().index());
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn rec(&self, assign: &mut Vec<Option<bool>>) -> Option<bool> {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return None;
        }
        let mut trail = Vec::new();
        if !self.propagate(assign, &mut trail) {
            for v in trail {
                assign[v] = None;
            }
            return Some(false);
        }
        let Some(v) = (0..self.nvars).find(|&v| assign[v].is_none()) else {
            return Some(true);
        };
        for val in [false, true] {
            assign[v] = Some(val);
            match self.rec(assign) {
                Some(true) => return Some(true),
                None => return None,
                Some(false) => {}
            }
        }
        assign[v] = None;
        for v in trail {
            assign[v] = None;
        }
        Some(false)
    }
}

impl SolverSession for Dpll {
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
        let mut assign = vec![None; self.nvars];
        for &a in assumptions {
            match assign[a.var().index()] {
                Some(b) if b != !a.is_neg() => return SolveResult::Unsat,
                _ => assign[a.var().index()] = Some(!a.is_neg()),
            }
        }
        match self.rec(&mut assign) {
            Some(true) => {
                self.model = assign.into_iter().map(|b| b.unwrap_or(false)).collect();
                SolveResult::Sat
            }
            Some(false) => SolveResult::Unsat,
            None => SolveResult::Unknown,
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
