//! Conflict-driven clause learning: two watched literals, VSIDS, first-UIP
//! learning with recursive minimization, Luby restarts, phase saving and
//! LBD-based clause deletion. Incremental under assumptions.

use std::time::Instant;

use super::{Lit, SolveResult, SolverSession, Var};

const NO_REASON: u32 = u32::MAX;
const UNDEF: u8 = 2;

#[derive(Debug, Clone)]
struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: f32,
    lbd: u32,
}

#[derive(Debug, Clone, Copy)]
struct Watch {
    cref: u32,
    blocker: Lit,
}

/// Indexed binary max-heap over variables keyed by activity.
#[derive(Debug, Clone, Default)]
struct VarHeap {
    heap: Vec<u32>,
    pos: Vec<usize>,
}

impl VarHeap {
    const ABSENT: usize = usize::MAX;

    fn grow(&mut self, n: usize) {
        self.pos.resize(n, Self::ABSENT);
    }

    fn contains(&self, v: u32) -> bool {
        self.pos[v as usize] != Self::ABSENT
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if act[self.heap[parent] as usize] >= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.pos[self.heap[i] as usize] = i;
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i;
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let c = if r < n && act[self.heap[r] as usize] > act[self.heap[l] as usize] {
                r
            } else {
                l
            };
            if act[self.heap[c] as usize] <= act[v as usize] {
                break;
            }
            self.heap[i] = self.heap[c];
            self.pos[self.heap[i] as usize] = i;
            i = c;
        }
        self.heap[i] = v;
        self.pos[v as usize] = i;
    }

    fn insert(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v);
        let i = self.heap.len() - 1;
        self.pos[v as usize] = i;
        self.up(i, act);
    }

    fn bumped(&mut self, v: u32, act: &[f64]) {
        if self.contains(v) {
            self.up(self.pos[v as usize], act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<u32> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.pos[top as usize] = Self::ABSENT;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = 0;
            self.down(0, act);
        }
        Some(top)
    }
}

#[derive(Debug, Clone)]
pub struct Cdcl {
    clauses: Vec<Clause>,
    free_crefs: Vec<u32>,
    watches: Vec<Vec<Watch>>,
    assigns: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f32,
    heap: VarHeap,
    polarity: Vec<bool>,
    seen: Vec<u8>,
    model: Vec<bool>,
    ok: bool,
    deadline: Option<Instant>,
    num_learnts: usize,
    max_learnts: f64,
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
}

impl Default for Cdcl {
    fn default() -> Self {
        Self::new()
    }
}

enum Search {
    Sat,
    Unsat,
    Restart,
    Stopped,
}

fn luby(y: f64, mut x: u64) -> f64 {
    let (mut size, mut seq) = (1u64, 0u32);
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq as i32)
}

impl Cdcl {
    pub fn new() -> Cdcl {
        Cdcl {
            clauses: Vec::new(),
            free_crefs: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            cla_inc: 1.0,
            heap: VarHeap::default(),
            polarity: Vec::new(),
            seen: Vec::new(),
            model: Vec::new(),
            ok: true,
            deadline: None,
            num_learnts: 0,
            max_learnts: 0.0,
            conflicts: 0,
            decisions: 0,
            propagations: 0,
        }
    }

    fn ensure_var(&mut self, v: Var) {
        let n = v.index() + 1;
        if n <= self.assigns.len() {
            return;
        }
        let old = self.assigns.len();
        self.assigns.resize(n, UNDEF);
        self.level.resize(n, 0);
        self.reason.resize(n, NO_REASON);
        self.activity.resize(n, 0.0);
        self.polarity.resize(n, false);
        self.seen.resize(n, 0);
        self.watches.resize(2 * n, Vec::new());
        self.heap.grow(n);
        for x in old..n {
            self.heap.insert(x as u32, &self.activity);
        }
    }

    #[inline]
    fn lval(&self, l: Lit) -> u8 {
        let a = self.assigns[l.var().index()];
        if a == UNDEF {
            UNDEF
        } else {
            a ^ l.is_neg() as u8
        }
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    #[inline]
    fn enqueue(&mut self, l: Lit, reason: u32) {
        let v = l.var().index();
        self.assigns[v] = !l.is_neg() as u8;
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn cancel_until(&mut self, lvl: usize) {
        if self.decision_level() <= lvl {
            return;
        }
        let lim = self.trail_lim[lvl];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().index();
            self.assigns[v] = UNDEF;
            self.reason[v] = NO_REASON;
            self.polarity[v] = !l.is_neg();
            self.heap.insert(v as u32, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(lvl);
        self.qhead = lim;
    }

    fn alloc_clause(&mut self, c: Clause) -> u32 {
        match self.free_crefs.pop() {
            Some(r) => {
                self.clauses[r as usize] = c;
                r
            }
            None => {
                self.clauses.push(c);
                (self.clauses.len() - 1) as u32
            }
        }
    }

    fn attach(&mut self, cref: u32) {
        let c = &self.clauses[cref as usize];
        let (a, b) = (c.lits[0], c.lits[1]);
        self.watches[(!a).code()].push(Watch { cref, blocker: b });
        self.watches[(!b).code()].push(Watch { cref, blocker: a });
    }

    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[p.code()]);
            let (mut i, mut j) = (0, 0);
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.lval(w.blocker) == 1 {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref as usize;
                {
                    let lits = &mut self.clauses[cref].lits;
                    if lits[0] == false_lit {
                        lits.swap(0, 1);
                    }
                }
                let first = self.clauses[cref].lits[0];
                let nw = Watch {
                    cref: w.cref,
                    blocker: first,
                };
                if first != w.blocker && self.lval(first) == 1 {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let len = self.clauses[cref].lits.len();
                let mut moved = false;
                for k in 2..len {
                    let l = self.clauses[cref].lits[k];
                    if self.lval(l) != 0 {
                        self.clauses[cref].lits.swap(1, k);
                        self.watches[(!l).code()].push(nw);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = nw;
                j += 1;
                if self.lval(first) == 0 {
                    conflict = Some(w.cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        i += 1;
                        j += 1;
                    }
                } else {
                    self.enqueue(first, w.cref);
                }
            }
            ws.truncate(j);
            // Watches pushed onto p's own list during the scan are impossible:
            // a new watch is never a false literal.
            debug_assert!(self.watches[p.code()].is_empty());
            self.watches[p.code()] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v as u32, &self.activity);
    }

    fn bump_clause(&mut self, cref: usize) {
        let c = &mut self.clauses[cref];
        if !c.learnt {
            return;
        }
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for c in self.clauses.iter_mut().filter(|c| c.learnt) {
                c.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    fn abstract_level(&self, v: usize) -> u32 {
        1 << (self.level[v] & 31)
    }

    fn lit_redundant(&mut self, p: Lit, abs: u32, toclear: &mut Vec<Lit>) -> bool {
        let mut stack = vec![p];
        let top = toclear.len();
        while let Some(q) = stack.pop() {
            let r = self.reason[q.var().index()] as usize;
            let n = self.clauses[r].lits.len();
            for k in 1..n {
                let l = self.clauses[r].lits[k];
                let v = l.var().index();
                if self.seen[v] == 0 && self.level[v] > 0 {
                    if self.reason[v] != NO_REASON && self.abstract_level(v) & abs != 0 {
                        self.seen[v] = 1;
                        stack.push(l);
                        toclear.push(l);
                    } else {
                        for x in &toclear[top..] {
                            self.seen[x.var().index()] = 0;
                        }
                        toclear.truncate(top);
                        return false;
                    }
                }
            }
        }
        true
    }

    /// First-UIP learning. Returns the learnt clause (asserting literal
    /// first, highest remaining level second), backtrack level and LBD.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, usize, u32) {
        let mut learnt = vec![Lit::from_code(0)];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let cur = self.decision_level() as u32;
        loop {
            self.bump_clause(confl as usize);
            let start = if p.is_some() { 1 } else { 0 };
            let n = self.clauses[confl as usize].lits.len();
            for k in start..n {
                let q = self.clauses[confl as usize].lits[k];
                let v = q.var().index();
                if self.seen[v] == 0 && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = 1;
                    if self.level[v] >= cur {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().index()] != 0 {
                    break;
                }
            }
            let pl = self.trail[index];
            p = Some(pl);
            confl = self.reason[pl.var().index()];
            self.seen[pl.var().index()] = 0;
            path -= 1;
            if path == 0 {
                break;
            }
        }
        learnt[0] = !p.unwrap();

        let abs = learnt[1..]
            .iter()
            .fold(0u32, |a, l| a | self.abstract_level(l.var().index()));
        let mut toclear: Vec<Lit> = learnt.clone();
        let mut keep = vec![learnt[0]];
        for i in 1..learnt.len() {
            let l = learnt[i];
            if self.reason[l.var().index()] == NO_REASON || !self.lit_redundant(l, abs, &mut toclear) {
                keep.push(l);
            }
        }
        for l in &toclear {
            self.seen[l.var().index()] = 0;
        }
        let mut learnt = keep;

        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut mi = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var().index()] > self.level[learnt[mi].var().index()] {
                    mi = i;
                }
            }
            learnt.swap(1, mi);
            self.level[learnt[1].var().index()] as usize
        };
        let mut levels: Vec<u32> = learnt.iter().map(|l| self.level[l.var().index()]).collect();
        levels.sort_unstable();
        levels.dedup();
        (learnt, bt, levels.len() as u32)
    }

    fn locked(&self, cref: usize) -> bool {
        let c = &self.clauses[cref];
        let v = c.lits[0].var().index();
        self.reason[v] == cref as u32 && self.lval(c.lits[0]) == 1
    }

    fn reduce_db(&mut self) {
        let mut cands: Vec<usize> = (0..self.clauses.len())
            .filter(|&i| {
                let c = &self.clauses[i];
                c.learnt && !c.deleted && c.lbd > 2 && c.lits.len() > 2 && !self.locked(i)
            })
            .collect();
        cands.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a], &self.clauses[b]);
            cb.lbd
                .cmp(&ca.lbd)
                .then(ca.activity.partial_cmp(&cb.activity).unwrap_or(std::cmp::Ordering::Equal))
        });
        let kill = cands.len() / 2;
        for &i in &cands[..kill] {
            let c = &mut self.clauses[i];
            c.deleted = true;
            c.lits = Vec::new();
            self.free_crefs.push(i as u32);
            self.num_learnts -= 1;
        }
        let clauses = &self.clauses;
        for ws in self.watches.iter_mut() {
            ws.retain(|w| !clauses[w.cref as usize].deleted);
        }
    }

    fn search(&mut self, nof_conflicts: u64, assumptions: &[Lit]) -> Search {
        let mut conflicts_here = 0u64;
        loop {
            if let Some(confl) = self.propagate() {
                self.conflicts += 1;
                conflicts_here += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return Search::Unsat;
                }
                let (learnt, bt, lbd) = self.analyze(confl);
                self.cancel_until(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NO_REASON);
                } else {
                    let first = learnt[0];
                    let cref = self.alloc_clause(Clause {
                        lits: learnt,
                        learnt: true,
                        deleted: false,
                        activity: 0.0,
                        lbd,
                    });
                    self.attach(cref);
                    self.num_learnts += 1;
                    self.bump_clause(cref as usize);
                    self.enqueue(first, cref);
                }
                self.var_inc /= 0.95;
                self.cla_inc /= 0.999;
                if self.conflicts % 128 == 0 && self.past_deadline() {
                    return Search::Stopped;
                }
            } else {
                if conflicts_here >= nof_conflicts {
                    self.cancel_until(0);
                    return Search::Restart;
                }
                if self.num_learnts as f64 >= self.max_learnts + self.trail.len() as f64 {
                    self.reduce_db();
                    self.max_learnts *= 1.1;
                }
                let mut next = None;
                while self.decision_level() < assumptions.len() {
                    let a = assumptions[self.decision_level()];
                    match self.lval(a) {
                        1 => self.trail_lim.push(self.trail.len()),
                        0 => return Search::Unsat,
                        _ => {
                            next = Some(a);
                            break;
                        }
                    }
                }
                let next = match next {
                    Some(a) => a,
                    None => {
                        self.decisions += 1;
                        if self.decisions % 4096 == 0 && self.past_deadline() {
                            return Search::Stopped;
                        }
                        loop {
                            match self.heap.pop(&self.activity) {
                                None => return Search::Sat,
                                Some(v) if self.assigns[v as usize] == UNDEF => {
                                    break Var(v).lit(self.polarity[v as usize]);
                                }
                                Some(_) => {}
                            }
                        }
                    }
                };
                self.trail_lim.push(self.trail.len());
                self.enqueue(next, NO_REASON);
            }
        }
    }

    fn past_deadline(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.iter().filter(|c| !c.deleted && !c.learnt).count()
    }
}

impl SolverSession for Cdcl {
    fn add_clause(&mut self, lits: &[Lit]) {
        if !self.ok {
            return;
        }
        self.cancel_until(0);
        for l in lits {
            self.ensure_var(l.var());
        }
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort_unstable();
        c.dedup();
        let mut out = Vec::with_capacity(c.len());
        for (i, &l) in c.iter().enumerate() {
            if i > 0 && c[i - 1] == !l {
                return; // tautology
            }
            match self.lval(l) {
                1 => return,
                0 => {}
                _ => out.push(l),
            }
        }
        match out.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(out[0], NO_REASON);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                let cref = self.alloc_clause(Clause {
                    lits: out,
                    learnt: false,
                    deleted: false,
                    activity: 0.0,
                    lbd: 0,
                });
                self.attach(cref);
            }
        }
    }

    fn solve(&mut self, assumptions: &[Lit]) -> SolveResult {
        self.model.clear();
        if !self.ok {
            return SolveResult::Unsat;
        }
        self.cancel_until(0);
        for a in assumptions {
            self.ensure_var(a.var());
        }
        if self.propagate().is_some() {
            self.ok = false;
            return SolveResult::Unsat;
        }
        if self.max_learnts == 0.0 {
            self.max_learnts = (self.clauses.len() as f64 / 3.0).max(5000.0);
        }
        let mut restart = 0u64;
        let result = loop {
            let budget = (luby(2.0, restart) * 100.0) as u64;
            restart += 1;
            match self.search(budget, assumptions) {
                Search::Sat => {
                    self.model = self.assigns.iter().map(|&a| a == 1).collect();
                    break SolveResult::Sat;
                }
                Search::Unsat => break SolveResult::Unsat,
                Search::Stopped => break SolveResult::Unknown,
                Search::Restart => {
                    if self.past_deadline() {
                        break SolveResult::Unknown;
                    }
                }
            }
        };
        self.cancel_until(0);
        result
    }

    fn value(&self, v: Var) -> Option<bool> {
        self.model.get(v.index()).copied()
    }

    fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    fn num_vars(&self) -> usize {
        self.assigns.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::Dpll;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lits(v: &[i64]) -> Vec<Lit> {
        v.iter().map(|&d| Lit::from_dimacs(d)).collect()
    }

    #[test]
    fn trivial_cases() {
        let mut s = Cdcl::new();
        assert_eq!(s.solve(&[]), SolveResult::Sat);
        s.add_clause(&lits(&[1]));
        s.add_clause(&lits(&[-1, 2]));
        assert_eq!(s.solve(&[]), SolveResult::Sat);
        assert_eq!(s.value(Var(1)), Some(true));
        assert_eq!(s.solve(&lits(&[-2])), SolveResult::Unsat);
        // assumptions do not stick
        assert_eq!(s.solve(&[]), SolveResult::Sat);
        s.add_clause(&lits(&[-2]));
        assert_eq!(s.solve(&[]), SolveResult::Unsat);
    }

    #[test]
    fn pigeonhole_is_unsat() {
        // 5 pigeons, 4 holes
        let (p, h) = (5, 4);
        let x = |i: i64, j: i64| i * h + j + 1;
        let mut s = Cdcl::new();
        for i in 0..p {
            s.add_clause(&lits(&(0..h).map(|j| x(i, j)).collect::<Vec<_>>()));
        }
        for j in 0..h {
            for a in 0..p {
                for b in a + 1..p {
                    s.add_clause(&lits(&[-x(a, j), -x(b, j)]));
                }
            }
        }
        assert_eq!(s.solve(&[]), SolveResult::Unsat);
    }

    #[test]
    fn agrees_with_dpll_on_random_3sat() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for round in 0..300 {
            let nv = rng.gen_range(3..14);
            let nc = rng.gen_range(1..(nv * 5));
            let clauses: Vec<Vec<Lit>> = (0..nc)
                .map(|_| {
                    (0..3)
                        .map(|_| {
                            let v = rng.gen_range(1..=nv) as i64;
                            Lit::from_dimacs(if rng.gen() { v } else { -v })
                        })
                        .collect()
                })
                .collect();
            let assumptions: Vec<Lit> = (0..rng.gen_range(0..3))
                .map(|_| Var(rng.gen_range(0..nv as u32)).lit(rng.gen()))
                .collect();
            let mut a = Cdcl::new();
            let mut b = Dpll::new();
            a.add_clauses(&clauses);
            b.add_clauses(&clauses);
            let (ra, rb) = (a.solve(&assumptions), b.solve(&assumptions));
            assert_eq!(ra, rb, "round {round}");
            if ra == SolveResult::Sat {
                for c in &clauses {
                    assert!(c.iter().any(|&l| a.lit_value(l) == Some(true)));
                }
                for &l in &assumptions {
                    assert_eq!(a.lit_value(l), Some(true));
                }
            }
        }
    }

    #[test]
    fn deadline_in_the_past_stops() {
        // hard-ish pigeonhole so the search cannot finish before the check
        let (p, h) = (9, 8);
        let x = |i: i64, j: i64| i * h + j + 1;
        let mut s = Cdcl::new();
        for i in 0..p {
            s.add_clause(&lits(&(0..h).map(|j| x(i, j)).collect::<Vec<_>>()));
        }
        for j in 0..h {
            for a in 0..p {
                for b in a + 1..p {
                    s.add_clause(&lits(&[-x(a, j), -x(b, j)]));
                }
            }
        }
        s.set_deadline(Some(Instant::now()));
        assert_eq!(s.solve(&[]), SolveResult::Unknown);
    }
}
