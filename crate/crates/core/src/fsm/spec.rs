//! Symbolic FSM descriptions in a KISS-like text format.
//!
//! ```text
//! # comment
//! .i 2                 input count
//! .o 1                 output count
//! .inputs a b          optional names (default x0, x1, ...)
//! .outputs y           optional names (default y0, ...)
//! .enc binary          binary | gray | onehot (default binary)
//! .w 4                 optional state width, at least the encoding's minimum
//! .states IDLE RUN     optional state order, which fixes generated codes
//! .r IDLE              reset state (default: first state mentioned)
//! .code IDLE 0011      explicit code; if any state has one, all must
//! -1 IDLE RUN 0        cube  from  to  outputs
//! .e
//! ```
//!
//! Cubes use `0`, `1` and `-`. A (state, input) pair no line covers keeps the
//! state and drives all outputs low.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Stg, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoding {
    Binary,
    Gray,
    OneHot,
    Explicit,
}

impl Encoding {
    fn parse(s: &str) -> Option<Encoding> {
        match s {
            "binary" => Some(Encoding::Binary),
            "gray" => Some(Encoding::Gray),
            "onehot" | "one-hot" => Some(Encoding::OneHot),
            _ => None,
        }
    }

    fn min_width(self, states: usize) -> usize {
        match self {
            Encoding::OneHot => states,
            _ => (usize::BITS - states.saturating_sub(1).leading_zeros()).max(1) as usize,
        }
    }

    fn code(self, i: usize) -> u64 {
        match self {
            Encoding::Binary | Encoding::Explicit => i as u64,
            Encoding::Gray => (i ^ (i >> 1)) as u64,
            Encoding::OneHot => 1 << i,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecTransition {
    pub from: usize,
    /// `None` is a don't-care.
    pub cube: Vec<Option<bool>>,
    pub to: usize,
    pub output: Vec<bool>,
}

impl SpecTransition {
    fn covers(&self, input: &[bool]) -> bool {
        self.cube.iter().zip(input).all(|(c, &b)| c.map_or(true, |c| c == b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FsmSpec {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub states: Vec<String>,
    /// Code per state, bit `width - 1` being the most significant flip-flop.
    pub codes: Vec<u64>,
    pub width: usize,
    pub encoding: Encoding,
    pub reset: usize,
    pub transitions: Vec<SpecTransition>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("codes of `{0}` and `{1}` coincide")]
    DuplicateCode(String, String),
    #[error("code of `{state}` does not fit in {width} bits")]
    CodeWidth { state: String, width: usize },
    #[error("state width {0} outside 1..=63")]
    Width(usize),
    #[error("state `{state}` has overlapping cubes with different effects")]
    Nondeterministic { state: String },
    #[error("state `{0}` has no code")]
    MissingCode(String),
    #[error("transition width mismatch")]
    Shape,
    #[error("{0} inputs is too many to expand")]
    TooManyInputs(usize),
}

/// Inputs beyond this make exhaustive expansion impractical.
pub const MAX_SPEC_INPUTS: usize = 20;

impl FsmSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.width == 0 || self.width > 63 {
            return Err(SpecError::Width(self.width));
        }
        if self.codes.len() != self.states.len() {
            return Err(SpecError::Shape);
        }
        let mut seen: HashMap<u64, usize> = HashMap::new();
        for (i, &c) in self.codes.iter().enumerate() {
            if c >> self.width != 0 {
                return Err(SpecError::CodeWidth {
                    state: self.states[i].clone(),
                    width: self.width,
                });
            }
            if let Some(j) = seen.insert(c, i) {
                return Err(SpecError::DuplicateCode(self.states[j].clone(), self.states[i].clone()));
            }
        }
        for t in &self.transitions {
            if t.cube.len() != self.inputs.len()
                || t.output.len() != self.outputs.len()
                || t.from >= self.states.len()
                || t.to >= self.states.len()
            {
                return Err(SpecError::Shape);
            }
        }
        for (i, a) in self.transitions.iter().enumerate() {
            for b in &self.transitions[i + 1..] {
                let overlap = a.from == b.from
                    && a.cube.iter().zip(&b.cube).all(|(x, y)| match (x, y) {
                        (Some(x), Some(y)) => x == y,
                        _ => true,
                    });
                if overlap && (a.to != b.to || a.output != b.output) {
                    return Err(SpecError::Nondeterministic {
                        state: self.states[a.from].clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Code the flip-flops hold for state `i`. Codes are stored XORed with
    /// the reset code so that the all-zero power-up state is the reset state.
    pub fn stored_code(&self, i: usize) -> u64 {
        self.codes[i] ^ self.codes[self.reset]
    }

    /// Next state and outputs for a concrete input.
    pub fn step(&self, state: usize, input: &[bool]) -> (usize, Vec<bool>) {
        self.transitions
            .iter()
            .find(|t| t.from == state && t.covers(input))
            .map_or_else(|| (state, vec![false; self.outputs.len()]), |t| (t.to, t.output.clone()))
    }

    /// Expanded STG over the states reachable from reset, in stored-code space.
    pub fn to_stg(&self) -> Result<Stg, SpecError> {
        let ni = self.inputs.len();
        if ni > MAX_SPEC_INPUTS {
            return Err(SpecError::TooManyInputs(ni));
        }
        let mut g = Stg::new(self.width, 0, self.inputs.clone(), self.outputs.clone());
        let mut seen = BTreeSet::from([self.reset]);
        let mut queue = std::collections::VecDeque::from([self.reset]);
        while let Some(s) = queue.pop_front() {
            for x in 0..1u64 << ni {
                let input = bits_msb(x, ni);
                let (to, output) = self.step(s, &input);
                g.add(Transition {
                    state: self.stored_code(s),
                    input,
                    next: self.stored_code(to),
                    output,
                });
                if seen.insert(to) {
                    queue.push_back(to);
                }
            }
        }
        Ok(g)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", self.name);
        let _ = writeln!(s, ".i {}\n.o {}", self.inputs.len(), self.outputs.len());
        let _ = writeln!(s, ".inputs {}", self.inputs.join(" "));
        let _ = writeln!(s, ".outputs {}", self.outputs.join(" "));
        let _ = writeln!(s, ".states {}", self.states.join(" "));
        let _ = writeln!(s, ".w {}", self.width);
        let _ = writeln!(s, ".r {}", self.states[self.reset]);
        match self.encoding {
            Encoding::Binary => s.push_str(".enc binary\n"),
            Encoding::Gray => s.push_str(".enc gray\n"),
            Encoding::OneHot => s.push_str(".enc onehot\n"),
            Encoding::Explicit => {
                for (n, c) in self.states.iter().zip(&self.codes) {
                    let _ = writeln!(s, ".code {n} {:0w$b}", c, w = self.width);
                }
            }
        }
        for t in &self.transitions {
            let cube: String = t
                .cube
                .iter()
                .map(|c| match c {
                    None => '-',
                    Some(true) => '1',
                    Some(false) => '0',
                })
                .collect();
            let out: String = t.output.iter().map(|&b| if b { '1' } else { '0' }).collect();
            let cube = if cube.is_empty() { "-".to_string() } else { cube };
            let out = if out.is_empty() { "-".to_string() } else { out };
            let _ = writeln!(s, "{cube} {} {} {out}", self.states[t.from], self.states[t.to]);
        }
        s.push_str(".e\n");
        s
    }
}

pub(crate) fn bits_msb(x: u64, width: usize) -> Vec<bool> {
    (0..width).map(|i| (x >> (width - 1 - i)) & 1 == 1).collect()
}

pub fn parse_fsm_spec(name: &str, text: &str) -> Result<FsmSpec, SpecError> {
    let err = |line: usize, msg: String| SpecError::Syntax { line, msg };
    let mut ni: Option<usize> = None;
    let mut no: Option<usize> = None;
    let mut in_names: Option<Vec<String>> = None;
    let mut out_names: Option<Vec<String>> = None;
    let mut encoding = Encoding::Binary;
    let mut width: Option<usize> = None;
    let mut reset: Option<String> = None;
    let mut explicit: BTreeMap<String, u64> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut raw: Vec<(usize, String, String, String, String)> = Vec::new();

    let mut intern = |s: &str, order: &mut Vec<String>| -> usize {
        *index.entry(s.to_string()).or_insert_with(|| {
            order.push(s.to_string());
            order.len() - 1
        })
    };

    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let num = |t: Option<&&str>| -> Result<usize, SpecError> {
            t.and_then(|t| t.parse().ok())
                .ok_or_else(|| err(ln, format!("expected a number in `{line}`")))
        };
        match toks[0] {
            ".i" => ni = Some(num(toks.get(1))?),
            ".o" => no = Some(num(toks.get(1))?),
            ".w" => width = Some(num(toks.get(1))?),
            ".inputs" => in_names = Some(toks[1..].iter().map(|s| s.to_string()).collect()),
            ".outputs" => out_names = Some(toks[1..].iter().map(|s| s.to_string()).collect()),
            ".enc" => {
                encoding = toks
                    .get(1)
                    .and_then(|e| Encoding::parse(e))
                    .ok_or_else(|| err(ln, format!("unknown encoding in `{line}`")))?
            }
            ".r" => {
                let r = toks.get(1).ok_or_else(|| err(ln, "missing reset state".into()))?;
                intern(r, &mut order);
                reset = Some(r.to_string());
            }
            ".code" => {
                let (Some(s), Some(c)) = (toks.get(1), toks.get(2)) else {
                    return Err(err(ln, "expected `.code STATE BITS`".into()));
                };
                let v = u64::from_str_radix(c, 2).map_err(|_| err(ln, format!("bad code `{c}`")))?;
                width.get_or_insert(c.len());
                intern(s, &mut order);
                explicit.insert(s.to_string(), v);
            }
            ".states" => {
                for t in &toks[1..] {
                    intern(t, &mut order);
                }
            }
            ".s" | ".p" => {}
            ".e" | ".end" => break,
            d if d.starts_with('.') => return Err(err(ln, format!("unknown directive `{d}`"))),
            _ => {
                if toks.len() != 4 {
                    return Err(err(ln, format!("expected `cube from to outputs`, got `{line}`")));
                }
                intern(toks[1], &mut order);
                intern(toks[2], &mut order);
                raw.push((ln, toks[0].into(), toks[1].into(), toks[2].into(), toks[3].into()));
            }
        }
    }

    let ni = ni.or(in_names.as_ref().map(Vec::len)).unwrap_or(0);
    let no = no.or(out_names.as_ref().map(Vec::len)).unwrap_or(0);
    let inputs = in_names.unwrap_or_else(|| (0..ni).map(|i| format!("x{i}")).collect());
    let outputs = out_names.unwrap_or_else(|| (0..no).map(|i| format!("y{i}")).collect());
    if inputs.len() != ni || outputs.len() != no {
        return Err(err(0, "name list length disagrees with .i/.o".into()));
    }
    if order.is_empty() {
        return Err(err(0, "no states".into()));
    }

    let states = order;
    let idx: HashMap<&str, usize> = states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let parse_bits = |ln: usize, s: &str, n: usize, dc: bool| -> Result<Vec<Option<bool>>, SpecError> {
        if n == 0 && s == "-" {
            return Ok(vec![]);
        }
        if s.len() != n {
            return Err(err(ln, format!("`{s}` should have {n} characters")));
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(Some(false)),
                '1' => Ok(Some(true)),
                '-' if dc => Ok(None),
                '-' => Ok(Some(false)),
                _ => Err(err(ln, format!("bad character `{c}` in `{s}`"))),
            })
            .collect()
    };
    let mut transitions = Vec::new();
    for (ln, cube, from, to, out) in &raw {
        transitions.push(SpecTransition {
            from: idx[from.as_str()],
            cube: parse_bits(*ln, cube, ni, true)?,
            to: idx[to.as_str()],
            output: parse_bits(*ln, out, no, false)?
                .into_iter()
                .map(|b| b.unwrap_or(false))
                .collect(),
        });
    }

    let codes = if explicit.is_empty() {
        (0..states.len()).map(|i| encoding.code(i)).collect()
    } else {
        encoding = Encoding::Explicit;
        states
            .iter()
            .map(|s| explicit.get(s).copied().ok_or_else(|| SpecError::MissingCode(s.clone())))
            .collect::<Result<Vec<_>, _>>()?
    };
    let min = if encoding == Encoding::Explicit {
        1
    } else {
        encoding.min_width(states.len())
    };
    let width = width.unwrap_or(min);
    if width < min {
        return Err(SpecError::Width(width));
    }
    let reset = reset.map_or(0, |r| idx[r.as_str()]);
    let spec = FsmSpec {
        name: name.to_string(),
        inputs,
        outputs,
        states,
        codes,
        width,
        encoding,
        reset,
        transitions,
    };
    spec.validate()?;
    Ok(spec)
}

/// Parameters for [`random_fsm`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomFsm {
    pub states: usize,
    pub inputs: usize,
    pub outputs: usize,
    /// Inputs each state's transitions depend on (at most `inputs`).
    pub deps: usize,
    pub encoding: Encoding,
    /// State width; `None` means the encoding's minimum.
    pub width: Option<usize>,
    pub seed: u64,
}

/// Random, fully specified FSM whose states are all reachable from reset.
///
/// Each state branches on `deps` of the inputs, chosen per state. State `i`
/// always has one branch to state `i + 1`, which makes every state reachable.
pub fn random_fsm(p: &RandomFsm) -> FsmSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let n = p.states.max(1);
    let deps = p.deps.min(p.inputs);
    let mut transitions = Vec::new();
    for s in 0..n {
        let mut chosen: Vec<usize> = (0..p.inputs).collect();
        chosen.shuffle(&mut rng);
        chosen.truncate(deps);
        chosen.sort_unstable();
        let forced = rng.gen_range(0..1usize << deps);
        for x in 0..1usize << deps {
            let mut cube = vec![None; p.inputs];
            for (k, &i) in chosen.iter().enumerate() {
                cube[i] = Some((x >> (deps - 1 - k)) & 1 == 1);
            }
            let to = if x == forced && s + 1 < n {
                s + 1
            } else {
                rng.gen_range(0..n)
            };
            transitions.push(SpecTransition {
                from: s,
                cube,
                to,
                output: (0..p.outputs).map(|_| rng.gen()).collect(),
            });
        }
    }
    let width = p.width.unwrap_or_else(|| p.encoding.min_width(n));
    FsmSpec {
        name: format!("fsm{}_{}", n, p.seed),
        inputs: (0..p.inputs).map(|i| format!("x{i}")).collect(),
        outputs: (0..p.outputs).map(|i| format!("y{i}")).collect(),
        states: (0..n).map(|i| format!("S{i}")).collect(),
        codes: (0..n).map(|i| p.encoding.code(i)).collect(),
        width,
        encoding: p.encoding,
        reset: 0,
        transitions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOGGLE: &str = "\
.i 0
.o 1
- A B 0
- B A 1
";

    #[test]
    fn parse_toggler() {
        let s = parse_fsm_spec("t", TOGGLE).unwrap();
        assert_eq!(s.states, ["A", "B"]);
        assert_eq!(s.width, 1);
        let g = s.to_stg().unwrap();
        assert_eq!(g.states.len(), 2);
        assert_eq!(g.transitions.len(), 2);
    }

    #[test]
    fn text_round_trip() {
        let s = random_fsm(&RandomFsm {
            states: 6,
            inputs: 3,
            outputs: 2,
            deps: 2,
            encoding: Encoding::Gray,
            width: None,
            seed: 5,
        });
        let back = parse_fsm_spec(&s.name, &s.to_text()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn encodings() {
        assert_eq!(Encoding::Binary.min_width(10), 4);
        assert_eq!(Encoding::Binary.min_width(1), 1);
        assert_eq!(Encoding::OneHot.min_width(4), 4);
        assert_eq!(Encoding::Gray.code(3), 2);
    }

    #[test]
    fn explicit_codes_and_reset_offset() {
        let text = ".i 1\n.o 0\n.r B\n.code A 01\n.code B 10\n1 A B -\n- B A -\n";
        let s = parse_fsm_spec("e", text).unwrap();
        assert_eq!(s.encoding, Encoding::Explicit);
        assert_eq!(s.stored_code(s.reset), 0);
        let a = s.states.iter().position(|x| x == "A").unwrap();
        assert_eq!(s.stored_code(a), 0b11);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_fsm_spec("x", ".i 1\n.o 0\n1 A B -\n- A A -\n"),
            Err(SpecError::Nondeterministic { .. })
        ));
        assert!(matches!(
            parse_fsm_spec("x", ".i 1\n.code A 1\n.code B 1\n1 A B -\n"),
            Err(SpecError::DuplicateCode(..))
        ));
        assert!(matches!(
            parse_fsm_spec("x", ".i 2\n1 A B -\n"),
            Err(SpecError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn generated_fsms_are_connected() {
        for seed in 0..10 {
            let s = random_fsm(&RandomFsm {
                states: 12,
                inputs: 4,
                outputs: 1,
                deps: 1,
                encoding: Encoding::Binary,
                width: None,
                seed,
            });
            assert_eq!(s.to_stg().unwrap().states.len(), 12);
        }
    }
}
