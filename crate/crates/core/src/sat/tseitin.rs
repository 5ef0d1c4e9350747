//! Tseitin encoding with constant folding.
//!
//! Gates whose inputs are constants, duplicates or complements fold away
//! instead of getting a variable. NOT and BUF never get a variable; their
//! output is the (negated) input literal.

use std::ops::Not;

use super::{Cnf, Lit, Var};
use crate::netlist::{Compiled, GateKind, Netlist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sig {
    Const(bool),
    Lit(Lit),
}

impl Sig {
    pub fn lit(self) -> Option<Lit> {
        match self {
            Sig::Lit(l) => Some(l),
            Sig::Const(_) => None,
        }
    }

    /// Value under a model lookup.
    pub fn eval(self, value: impl Fn(Var) -> Option<bool>) -> bool {
        match self {
            Sig::Const(b) => b,
            Sig::Lit(l) => l.eval(value(l.var()).unwrap_or(false)),
        }
    }
}

impl Not for Sig {
    type Output = Sig;
    fn not(self) -> Sig {
        match self {
            Sig::Const(b) => Sig::Const(!b),
            Sig::Lit(l) => Sig::Lit(!l),
        }
    }
}

impl From<bool> for Sig {
    fn from(b: bool) -> Sig {
        Sig::Const(b)
    }
}

/// Residual function after folding. `neg` negates the gate's result.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Folded {
    Sig(Sig),
    And { ins: Vec<Lit>, neg: bool },
    Xor { ins: Vec<Lit>, neg: bool },
    Mux { s: Lit, a: Lit, b: Lit },
}

fn fold_and(ins: impl IntoIterator<Item = Sig>, neg: bool) -> Folded {
    let mut v = Vec::new();
    for s in ins {
        match s {
            Sig::Const(false) => return Folded::Sig(Sig::Const(neg)),
            Sig::Const(true) => {}
            Sig::Lit(l) => v.push(l),
        }
    }
    v.sort_unstable();
    v.dedup();
    // x and !x have adjacent codes
    if v.windows(2).any(|w| w[0] == !w[1]) {
        return Folded::Sig(Sig::Const(neg));
    }
    match v.len() {
        0 => Folded::Sig(Sig::Const(!neg)),
        1 => Folded::Sig(if neg { Sig::Lit(!v[0]) } else { Sig::Lit(v[0]) }),
        _ => Folded::And { ins: v, neg },
    }
}

fn fold_xor(ins: impl IntoIterator<Item = Sig>, neg: bool) -> Folded {
    let mut parity = neg;
    let mut v = Vec::new();
    for s in ins {
        match s {
            Sig::Const(b) => parity ^= b,
            Sig::Lit(l) => {
                parity ^= l.is_neg();
                v.push(l.var().pos());
            }
        }
    }
    v.sort_unstable();
    let mut odd = Vec::with_capacity(v.len());
    for l in v {
        if odd.last() == Some(&l) {
            odd.pop();
        } else {
            odd.push(l);
        }
    }
    match odd.len() {
        0 => Folded::Sig(Sig::Const(parity)),
        1 => Folded::Sig(Sig::Lit(if parity { !odd[0] } else { odd[0] })),
        _ => Folded::Xor { ins: odd, neg: parity },
    }
}

fn fold_mux(s: Sig, a: Sig, b: Sig) -> Folded {
    let s = match s {
        Sig::Const(false) => return Folded::Sig(a),
        Sig::Const(true) => return Folded::Sig(b),
        Sig::Lit(l) => l,
    };
    if a == b {
        return Folded::Sig(a);
    }
    let sl = Sig::Lit(s);
    match (a, b) {
        (Sig::Const(false), _) => return fold_and([sl, b], false),
        (Sig::Const(true), _) => return fold_and([sl, !b], true),
        (_, Sig::Const(false)) => return fold_and([!sl, a], false),
        (_, Sig::Const(true)) => return fold_and([!sl, !a], true),
        _ => {}
    }
    let (a, b) = (a.lit().unwrap(), b.lit().unwrap());
    if b == !a {
        return fold_xor([Sig::Lit(a), sl], false);
    }
    if a == s {
        return fold_and([sl, Sig::Lit(b)], false);
    }
    if a == !s {
        return fold_and([sl, Sig::Lit(!b)], true);
    }
    if b == s {
        return fold_and([!sl, Sig::Lit(!a)], true);
    }
    if b == !s {
        return fold_and([!sl, Sig::Lit(a)], false);
    }
    Folded::Mux { s, a, b }
}

fn fold(kind: GateKind, ins: &[Sig]) -> Folded {
    match kind {
        GateKind::And => fold_and(ins.iter().copied(), false),
        GateKind::Nand => fold_and(ins.iter().copied(), true),
        GateKind::Or => fold_and(ins.iter().map(|&s| !s), true),
        GateKind::Nor => fold_and(ins.iter().map(|&s| !s), false),
        GateKind::Xor => fold_xor(ins.iter().copied(), false),
        GateKind::Xnor => fold_xor(ins.iter().copied(), true),
        GateKind::Not => Folded::Sig(!ins[0]),
        GateKind::Buf => Folded::Sig(ins[0]),
        GateKind::Mux2 => fold_mux(ins[0], ins[1], ins[2]),
    }
}

/// Clauses forcing `y` to equal the residual function.
fn emit(cnf: &mut Cnf, f: &Folded, x: Var) {
    match f {
        Folded::Sig(_) => unreachable!("folded gates need no clauses"),
        Folded::And { ins, neg } => {
            let y = x.lit(!neg);
            for &i in ins {
                cnf.add_clause(vec![!y, i]);
            }
            let mut big: Vec<Lit> = ins.iter().map(|&i| !i).collect();
            big.push(y);
            cnf.add_clause(big);
        }
        Folded::Xor { ins, neg } => {
            let y = x.lit(!neg);
            let mut acc = ins[0];
            for (k, &i) in ins.iter().enumerate().skip(1) {
                let t = if k == ins.len() - 1 { y } else { cnf.new_var().pos() };
                xor2_clauses(cnf, t, acc, i);
                acc = t;
            }
        }
        Folded::Mux { s, a, b } => {
            let y = x.pos();
            cnf.add_clause(vec![!*s, !*b, y]);
            cnf.add_clause(vec![!*s, *b, !y]);
            cnf.add_clause(vec![*s, !*a, y]);
            cnf.add_clause(vec![*s, *a, !y]);
            cnf.add_clause(vec![!*a, !*b, y]);
            cnf.add_clause(vec![*a, *b, !y]);
        }
    }
}

fn xor2_clauses(cnf: &mut Cnf, y: Lit, a: Lit, b: Lit) {
    cnf.add_clause(vec![!y, a, b]);
    cnf.add_clause(vec![!y, !a, !b]);
    cnf.add_clause(vec![y, !a, b]);
    cnf.add_clause(vec![y, a, !b]);
}

/// Ad-hoc gate construction on a [`Cnf`] with unnamed auxiliary variables.
pub struct Encoder<'a> {
    pub cnf: &'a mut Cnf,
}

impl<'a> Encoder<'a> {
    pub fn new(cnf: &'a mut Cnf) -> Self {
        Encoder { cnf }
    }

    pub fn gate(&mut self, kind: GateKind, ins: &[Sig]) -> Sig {
        let f = fold(kind, ins);
        match f {
            Folded::Sig(s) => s,
            _ => {
                let x = self.cnf.new_var();
                emit(self.cnf, &f, x);
                Sig::Lit(x.pos())
            }
        }
    }

    pub fn and(&mut self, ins: &[Sig]) -> Sig {
        self.gate(GateKind::And, ins)
    }
    pub fn or(&mut self, ins: &[Sig]) -> Sig {
        self.gate(GateKind::Or, ins)
    }
    pub fn xor(&mut self, a: Sig, b: Sig) -> Sig {
        self.gate(GateKind::Xor, &[a, b])
    }
    pub fn mux(&mut self, s: Sig, a: Sig, b: Sig) -> Sig {
        self.gate(GateKind::Mux2, &[s, a, b])
    }

    /// Selector over `2^sel.len()` leaves, `sel[0]` the MSB.
    pub fn mux_tree(&mut self, sel: &[Sig], leaves: &[Sig]) -> Sig {
        debug_assert_eq!(leaves.len(), 1 << sel.len());
        if sel.is_empty() {
            return leaves[0];
        }
        let h = leaves.len() / 2;
        let lo = self.mux_tree(&sel[1..], &leaves[..h]);
        let hi = self.mux_tree(&sel[1..], &leaves[h..]);
        self.mux(sel[0], lo, hi)
    }

    /// Adds `s` as a fact. A false constant makes the formula unsatisfiable.
    pub fn assert(&mut self, s: Sig) {
        match s {
            Sig::Const(true) => {}
            Sig::Const(false) => self.cnf.add_clause(Vec::new()),
            Sig::Lit(l) => self.cnf.add_clause(vec![l]),
        }
    }

    /// A literal equivalent to `s`; constants get a fixed variable.
    pub fn as_lit(&mut self, s: Sig) -> Lit {
        match s {
            Sig::Lit(l) => l,
            Sig::Const(b) => {
                let v = self.cnf.new_var();
                self.cnf.add_clause(vec![v.lit(b)]);
                v.pos()
            }
        }
    }
}

/// Encodes one combinational evaluation of `c`.
///
/// `source(s)` supplies the value of source signal `s` or `None` for a fresh
/// variable. When `name` is given, fresh variables are recorded in the
/// var map as `(frame, prefix + signal)`, allocated in signal-name order.
/// Returns one [`Sig`] per signal.
pub(crate) fn encode_comb(
    cnf: &mut Cnf,
    c: &Compiled,
    name: Option<(usize, &str)>,
    source: &mut dyn FnMut(usize) -> Option<Sig>,
) -> Vec<Sig> {
    let ns = c.num_signals();
    let provided: Vec<Option<Sig>> = (0..ns)
        .map(|s| if c.is_source(s) { source(s) } else { None })
        .collect();
    // Pass 1 decides which signals need a variable, using placeholder
    // variables above everything allocated so far.
    let base = cnf.num_vars;
    let ph = |s: usize| Sig::Lit(Var(base + s as u32).pos());
    let mut sig: Vec<Sig> = (0..ns).map(|s| provided[s].unwrap_or_else(|| ph(s))).collect();
    let mut needs = vec![false; ns];
    for s in 0..ns {
        if c.is_source(s) && provided[s].is_none() {
            needs[s] = true;
        }
    }
    for g in &c.gates {
        let ins: Vec<Sig> = g.ins.iter().map(|&i| sig[i]).collect();
        match fold(g.kind, &ins) {
            Folded::Sig(s) => sig[g.out] = s,
            _ => {
                needs[g.out] = true;
                sig[g.out] = ph(g.out);
            }
        }
    }
    let mut order: Vec<usize> = (0..ns).filter(|&s| needs[s]).collect();
    order.sort_by(|&a, &b| c.names[a].cmp(&c.names[b]));
    let mut real: Vec<Option<Var>> = vec![None; ns];
    for s in order {
        real[s] = Some(match name {
            Some((frame, prefix)) => cnf.named_var(frame, &format!("{prefix}{}", c.names[s])),
            None => cnf.new_var(),
        });
    }
    // Pass 2 with real variables; folding takes the same shape.
    for s in 0..ns {
        sig[s] = match (provided[s], real[s]) {
            (Some(p), _) => p,
            (None, Some(v)) => Sig::Lit(v.pos()),
            _ => Sig::Const(false),
        };
    }
    for g in &c.gates {
        let ins: Vec<Sig> = g.ins.iter().map(|&i| sig[i]).collect();
        let f = fold(g.kind, &ins);
        match (&f, real[g.out]) {
            (Folded::Sig(s), None) => sig[g.out] = *s,
            (_, Some(x)) => {
                emit(cnf, &f, x);
                sig[g.out] = Sig::Lit(x.pos());
            }
            (_, None) => unreachable!("fold shape changed between passes"),
        }
    }
    sig
}

/// Tseitin CNF of one combinational frame of `n`. Inputs, keys, flip-flop
/// outputs and ROM data are free variables. Returns the per-signal encoding
/// (indexed like `n.compiled().names`).
pub fn tseitin(n: &Netlist) -> (Cnf, Vec<Sig>) {
    let mut cnf = Cnf::new();
    let sigs = encode_comb(&mut cnf, n.compiled(), Some((0, "")), &mut |_| None);
    (cnf, sigs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::{count_models, Cdcl, SolveResult, SolverSession};

    fn one_gate(kind: GateKind, arity: usize) -> Netlist {
        let mut b = Netlist::builder("g");
        let ins: Vec<String> = (0..arity).map(|i| format!("i{i}")).collect();
        for i in &ins {
            b.input(i.clone());
        }
        b.output("y").gate(kind, ins, "y");
        b.build().unwrap()
    }

    #[test]
    fn clause_counts() {
        assert_eq!(tseitin(&one_gate(GateKind::And, 2)).0.clauses.len(), 3);
        assert_eq!(tseitin(&one_gate(GateKind::Xor, 2)).0.clauses.len(), 4);
    }

    #[test]
    fn folding_rules() {
        let mut cnf = Cnf::new();
        let a = Sig::Lit(cnf.new_var().pos());
        let b = Sig::Lit(cnf.new_var().pos());
        let t = Sig::Const(true);
        let f = Sig::Const(false);
        let mut e = Encoder::new(&mut cnf);
        assert_eq!(e.and(&[a, t]), a);
        assert_eq!(e.and(&[a, !a]), f);
        assert_eq!(e.or(&[a, !a]), t);
        assert_eq!(e.xor(a, a), f);
        assert_eq!(e.xor(a, !a), t);
        assert_eq!(e.mux(t, a, b), b);
        assert_eq!(e.mux(a, f, t), a);
        assert_eq!(e.mux(a, t, f), !a);
        assert_eq!(cnf.num_vars, 2);
    }

    #[test]
    fn every_gate_kind_matches_truth_table() {
        for kind in GateKind::ALL {
            let arity = match kind {
                GateKind::Not | GateKind::Buf => 1,
                GateKind::Mux2 => 3,
                _ => 3,
            };
            let n = one_gate(kind, arity);
            let (cnf, sigs) = tseitin(&n);
            let c = n.compiled();
            for pat in 0..(1u32 << arity) {
                let ins: Vec<bool> = (0..arity).map(|i| (pat >> i) & 1 == 1).collect();
                let mut s = Cdcl::new();
                s.add_clauses(&cnf.clauses);
                let assumptions: Vec<Lit> = c
                    .inputs
                    .iter()
                    .zip(&ins)
                    .map(|(&i, &v)| {
                        let l = sigs[i].lit().unwrap();
                        if v { l } else { !l }
                    })
                    .collect();
                assert_eq!(s.solve(&assumptions), SolveResult::Sat);
                let y = sigs[c.index["y"]].eval(|v| s.value(v));
                assert_eq!(y, kind.eval(&ins), "{kind} {ins:?}");
            }
        }
    }

    #[test]
    fn model_count_is_input_count() {
        let n = crate::netlist::generate::random_small(4, 3, 0, 6);
        let (cnf, _) = tseitin(&n);
        let all: Vec<Var> = (0..cnf.num_vars).map(Var).collect();
        assert_eq!(count_models(&cnf, &all, 1 << 12), 1 << n.inputs().len());
    }
}
