//! ISCAS-89 `.bench` reader and writer.
//!
//! Besides the classic statements (`INPUT(x)`, `OUTPUT(y)`, `q = DFF(d)`,
//! `y = AND(a, b)`, `#` comments) the format is extended with:
//!
//! * `# KEYINPUT k` comment tags marking an `INPUT` line as a key input;
//! * `y = MUX(s, a, b)` two-way multiplexers (select first);
//! * `q = SDFF(d, si, se)` scan flip-flops;
//! * `y0, y1 = ROM(a0, a1, a2) @file.hex` one-cycle ROMs whose contents live
//!   in a hex sidecar file (one word per line, address ascending, word bits
//!   big-endian so `y0` is the most significant bit).
//!
//! Statements may share a line; tools that write one statement per line are
//! still read back correctly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::{Dff, GateKind, Netlist, NetlistBuilder, NetlistError, RomNode, ScanPins};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BenchErrorKind {
    #[error("syntax error near `{0}`")]
    Syntax(String),
    #[error("unknown gate kind `{0}`")]
    UnknownGate(String),
    #[error("signal `{0}` is driven more than once")]
    DuplicateDriver(String),
    #[error("signal `{0}` is used but never defined")]
    Undefined(String),
    #[error("combinational cycle through `{0}`")]
    CombinationalCycle(String),
    #[error("{0}")]
    Invalid(String),
    #[error("rom: {0}")]
    Rom(String),
    #[error("netlist has ROM nodes; use the extended writer")]
    RomNotAllowed,
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct BenchError {
    /// 1-based; 0 when the error is not tied to a line.
    pub line: usize,
    pub kind: BenchErrorKind,
}

impl BenchError {
    fn at(line: usize, kind: BenchErrorKind) -> Self {
        BenchError { line, kind }
    }
}

static IO_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(INPUT|OUTPUT)\s*\(\s*([^()\s,]+)\s*\)").unwrap());
static ASSIGN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*([^=()\s,]+(?:\s*,\s*[^=()\s,]+)*)\s*=\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(([^()]*)\)(?:\s*@\s*(\S+))?")
        .unwrap()
});
static KEY_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*#\s*KEYINPUT\s+(\S+)").unwrap());

fn split_args(s: &str) -> Vec<String> {
    s.split(',')
        .map(|a| a.trim().to_string())
        .filter(|a| !a.is_empty())
        .collect()
}

/// Parses bench text. ROM statements are rejected because their contents
/// cannot be resolved; see [`parse_bench_with`].
pub fn parse_bench(text: &str) -> Result<Netlist, BenchError> {
    parse_bench_with(text, "bench", &mut |f| {
        Err(format!("no loader for ROM sidecar `{f}`"))
    })
}

/// Parses bench text, resolving ROM sidecar files through `loader`.
pub fn parse_bench_with(
    text: &str,
    name: &str,
    loader: &mut dyn FnMut(&str) -> Result<String, String>,
) -> Result<Netlist, BenchError> {
    let mut b = NetlistBuilder::new(name);
    let mut keys: Vec<String> = Vec::new();
    let mut declared_inputs: Vec<(String, usize)> = Vec::new();
    let mut def_line: HashMap<String, usize> = HashMap::new();
    let mut use_line: HashMap<String, usize> = HashMap::new();
    let mut dup: Option<(String, usize)> = None;

    let mut define = |s: &str, line: usize, def_line: &mut HashMap<String, usize>| {
        if def_line.contains_key(s) && dup.is_none() {
            dup = Some((s.to_string(), line));
        }
        def_line.entry(s.to_string()).or_insert(line);
    };

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        if let Some(c) = KEY_RE.captures(raw) {
            keys.push(c[1].to_string());
            continue;
        }
        let body = raw.split('#').next().unwrap_or("");
        let mut rest = body;
        while !rest.trim().is_empty() {
            if let Some(c) = IO_RE.captures(rest) {
                let sig = c[2].to_string();
                if &c[1] == "INPUT" {
                    define(&sig, line, &mut def_line);
                    declared_inputs.push((sig, line));
                } else {
                    use_line.entry(sig.clone()).or_insert(line);
                    b.outputs.push(sig);
                }
                rest = &rest[c.get(0).unwrap().end()..];
                continue;
            }
            if let Some(c) = ASSIGN_RE.captures(rest) {
                let lhs = split_args(&c[1]);
                let kind = c[2].to_ascii_uppercase();
                let args = split_args(&c[3]);
                for a in &args {
                    use_line.entry(a.clone()).or_insert(line);
                }
                for l in &lhs {
                    define(l, line, &mut def_line);
                }
                let single = |lhs: &[String]| -> Result<String, BenchError> {
                    match lhs {
                        [one] => Ok(one.clone()),
                        _ => Err(BenchError::at(
                            line,
                            BenchErrorKind::Syntax(format!("{} needs a single output", kind)),
                        )),
                    }
                };
                match kind.as_str() {
                    "DFF" => {
                        let q = single(&lhs)?;
                        if args.len() != 1 {
                            return Err(BenchError::at(
                                line,
                                BenchErrorKind::Invalid(format!("DFF `{q}` needs one input")),
                            ));
                        }
                        b.dffs.push(Dff {
                            d: args[0].clone(),
                            q,
                            scan: None,
                        });
                    }
                    "SDFF" => {
                        let q = single(&lhs)?;
                        if args.len() != 3 {
                            return Err(BenchError::at(
                                line,
                                BenchErrorKind::Invalid(format!("SDFF `{q}` needs (d, si, se)")),
                            ));
                        }
                        b.dffs.push(Dff {
                            d: args[0].clone(),
                            q,
                            scan: Some(ScanPins {
                                si: args[1].clone(),
                                se: args[2].clone(),
                            }),
                        });
                    }
                    "ROM" => {
                        let file = c.get(4).map(|m| m.as_str()).ok_or_else(|| {
                            BenchError::at(line, BenchErrorKind::Rom("missing `@file` contents reference".into()))
                        })?;
                        let hex = loader(file).map_err(|e| BenchError::at(line, BenchErrorKind::Rom(e)))?;
                        let contents = rom_from_hex(&hex, args.len(), lhs.len())
                            .map_err(|e| BenchError::at(line, BenchErrorKind::Rom(e)))?;
                        let rom_name = Path::new(file)
                            .file_stem()
                            .and_then(|s| s.to_str())
                            .unwrap_or(file)
                            .to_string();
                        b.roms.push(RomNode {
                            name: rom_name,
                            address: args,
                            data: lhs,
                            contents,
                        });
                    }
                    other => {
                        let out = single(&lhs)?;
                        let gk = GateKind::from_bench_name(other).ok_or_else(|| {
                            BenchError::at(line, BenchErrorKind::UnknownGate(other.to_string()))
                        })?;
                        if !gk.arity_ok(args.len()) {
                            return Err(BenchError::at(
                                line,
                                BenchErrorKind::Invalid(format!(
                                    "gate `{out}` of kind {gk} has {} inputs",
                                    args.len()
                                )),
                            ));
                        }
                        b.gates.push(super::Gate {
                            kind: gk,
                            inputs: args,
                            output: out,
                        });
                    }
                }
                rest = &rest[c.get(0).unwrap().end()..];
                continue;
            }
            return Err(BenchError::at(
                line,
                BenchErrorKind::Syntax(rest.trim().chars().take(40).collect()),
            ));
        }
    }

    if let Some((s, line)) = dup {
        return Err(BenchError::at(line, BenchErrorKind::DuplicateDriver(s)));
    }
    for (sig, _) in declared_inputs {
        if keys.contains(&sig) {
            b.key_inputs.push(sig);
        } else {
            b.inputs.push(sig);
        }
    }
    // Keep key order as listed by the tags.
    b.key_inputs.sort_by_key(|k| keys.iter().position(|x| x == k));

    b.build().map_err(|e| match e {
        NetlistError::DuplicateDriver(s) => {
            let line = def_line.get(&s).copied().unwrap_or(0);
            BenchError::at(line, BenchErrorKind::DuplicateDriver(s))
        }
        NetlistError::Undefined { signal, .. } => {
            let line = use_line.get(&signal).copied().unwrap_or(0);
            BenchError::at(line, BenchErrorKind::Undefined(signal))
        }
        NetlistError::CombinationalCycle(s) => {
            let line = def_line.get(&s).copied().unwrap_or(0);
            BenchError::at(line, BenchErrorKind::CombinationalCycle(s))
        }
        other => BenchError::at(0, BenchErrorKind::Invalid(other.to_string())),
    })
}

/// Reads a bench file, resolving ROM sidecars relative to its directory.
/// The netlist is named after the file stem.
pub fn read_bench_file(path: impl AsRef<Path>) -> Result<Netlist, BenchError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::at(0, BenchErrorKind::Io(e.to_string())))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("bench")
        .to_string();
    parse_bench_with(&text, &name, &mut |f| {
        std::fs::read_to_string(dir.join(f)).map_err(|e| format!("{f}: {e}"))
    })
}

/// Classic bench text. Fails when the netlist contains ROMs.
pub fn write_bench(n: &Netlist) -> Result<String, BenchError> {
    if !n.roms().is_empty() {
        return Err(BenchError::at(0, BenchErrorKind::RomNotAllowed));
    }
    Ok(write_bench_extended(n).0)
}

/// A ROM sidecar to be written next to the bench file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RomFile {
    pub file_name: String,
    pub text: String,
}

/// Bench text plus one hex sidecar per ROM, named `<rom name>.hex`.
pub fn write_bench_extended(n: &Netlist) -> (String, Vec<RomFile>) {
    let st = n.stats();
    let mut s = String::new();
    let _ = writeln!(s, "# {}", n.name());
    let _ = writeln!(s, "# {} inputs", st.inputs);
    let _ = writeln!(s, "# {} outputs", st.outputs);
    if st.key_inputs > 0 {
        let _ = writeln!(s, "# {} key inputs", st.key_inputs);
    }
    let _ = writeln!(s, "# {} D-type flipflops", st.dffs);
    let _ = writeln!(s, "# {} gates", st.gates);
    if st.roms > 0 {
        let _ = writeln!(s, "# {} roms", st.roms);
    }
    s.push('\n');
    for i in n.inputs() {
        let _ = writeln!(s, "INPUT({i})");
    }
    for k in n.key_inputs() {
        let _ = writeln!(s, "# KEYINPUT {k}");
        let _ = writeln!(s, "INPUT({k})");
    }
    s.push('\n');
    for o in n.outputs() {
        let _ = writeln!(s, "OUTPUT({o})");
    }
    s.push('\n');
    for d in n.dffs() {
        match &d.scan {
            None => {
                let _ = writeln!(s, "{} = DFF({})", d.q, d.d);
            }
            Some(sp) => {
                let _ = writeln!(s, "{} = SDFF({}, {}, {})", d.q, d.d, sp.si, sp.se);
            }
        }
    }
    s.push('\n');
    for g in n.gates() {
        let _ = writeln!(s, "{} = {}({})", g.output, g.kind.bench_name(), g.inputs.join(", "));
    }
    let mut files = Vec::new();
    if !n.roms().is_empty() {
        s.push('\n');
    }
    for r in n.roms() {
        let file_name = format!("{}.hex", r.name);
        let _ = writeln!(
            s,
            "{} = ROM({}) @{}",
            r.data.join(", "),
            r.address.join(", "),
            file_name
        );
        files.push(RomFile {
            file_name,
            text: rom_to_hex(r),
        });
    }
    (s, files)
}

/// Writes `path` and any ROM sidecars next to it.
pub fn write_bench_file(n: &Netlist, path: impl AsRef<Path>) -> std::io::Result<Vec<std::path::PathBuf>> {
    let path = path.as_ref();
    let (text, roms) = write_bench_extended(n);
    std::fs::write(path, text)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut written = vec![path.to_path_buf()];
    for r in roms {
        let p = dir.join(&r.file_name);
        std::fs::write(&p, r.text)?;
        written.push(p);
    }
    Ok(written)
}

pub fn rom_to_hex(r: &RomNode) -> String {
    let digits = r.data.len().div_ceil(4);
    let mut s = String::with_capacity(r.contents.len() * (digits + 1));
    for w in &r.contents {
        let v = w.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        let _ = writeln!(s, "{:0width$x}", v, width = digits);
    }
    s
}

pub fn rom_from_hex(text: &str, address_bits: usize, word_bits: usize) -> Result<Vec<Vec<bool>>, String> {
    let words: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let expected = 1usize << address_bits;
    if words.len() != expected {
        return Err(format!("{} words in contents, expected {}", words.len(), expected));
    }
    if word_bits > 64 {
        return Err(format!("word width {word_bits} exceeds 64"));
    }
    words
        .iter()
        .enumerate()
        .map(|(a, w)| {
            let v = u64::from_str_radix(w, 16).map_err(|e| format!("word {a}: {e}"))?;
            if word_bits < 64 && v >> word_bits != 0 {
                return Err(format!("word {a} has more than {word_bits} bits"));
            }
            Ok((0..word_bits).map(|j| (v >> (word_bits - 1 - j)) & 1 == 1).collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const S27: &str = include_str!("../../circuits/s27.bench");

    #[test]
    fn minimal_one_line() {
        let n = parse_bench("INPUT(a) OUTPUT(y) y=NOT(a)").unwrap();
        assert_eq!(n.inputs().len(), 1);
        assert_eq!(n.outputs().len(), 1);
        assert_eq!(n.gates().len(), 1);
    }

    #[test]
    fn s27_header_counts() {
        let n = parse_bench(S27).unwrap();
        let st = n.stats();
        assert_eq!((st.inputs, st.outputs, st.dffs, st.gates), (4, 1, 3, 10));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\ny = BUFF(a)\n").unwrap_err();
        assert_eq!(e, BenchError::at(4, BenchErrorKind::DuplicateDriver("y".into())));

        let e = parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a, b)\n").unwrap_err();
        assert_eq!(e, BenchError::at(3, BenchErrorKind::Undefined("b".into())));

        let e = parse_bench("INPUT(a)\n\ny = FOO(a)\n").unwrap_err();
        assert_eq!(e, BenchError::at(3, BenchErrorKind::UnknownGate("FOO".into())));

        let e = parse_bench("INPUT(a)\nOUTPUT(y)\ny = AND(a, z)\nz = NOT(y)\n").unwrap_err();
        assert!(matches!(e.kind, BenchErrorKind::CombinationalCycle(_)));
        assert!(e.line == 3 || e.line == 4);
    }

    #[test]
    fn key_inputs_are_tagged() {
        let text = "INPUT(a)\n# KEYINPUT k0\nINPUT(k0)\nOUTPUT(y)\ny = XOR(a, k0)\n";
        let n = parse_bench(text).unwrap();
        assert_eq!(n.inputs(), ["a".to_string()]);
        assert_eq!(n.key_inputs(), ["k0".to_string()]);
        let back = parse_bench(&write_bench(&n).unwrap()).unwrap();
        assert!(back.structurally_equal(&n));
    }

    #[test]
    fn rom_round_trip_through_sidecar() {
        let mut b = Netlist::builder("r");
        b.input("a0").input("a1").output("y0").rom(RomNode {
            name: "mem".into(),
            address: vec!["a0".into(), "a1".into()],
            data: vec!["y0".into(), "y1".into(), "y2".into(), "y3".into(), "y4".into()],
            contents: (0..4)
                .map(|a| (0..5).map(|j| (a * 7 + j) % 3 == 0).collect())
                .collect(),
        });
        let n = b.build().unwrap();
        assert_eq!(write_bench(&n).unwrap_err().kind, BenchErrorKind::RomNotAllowed);
        let (text, files) = write_bench_extended(&n);
        assert_eq!(files.len(), 1);
        assert_eq!(files[0].text.lines().count(), 4);
        let back = parse_bench_with(&text, "r", &mut |f| {
            assert_eq!(f, "mem.hex");
            Ok(files[0].text.clone())
        })
        .unwrap();
        assert!(back.structurally_equal(&n));
    }

    #[test]
    fn hex_words_are_big_endian() {
        let r = RomNode {
            name: "m".into(),
            address: vec!["a".into()],
            data: vec!["y0".into(), "y1".into(), "y2".into(), "y3".into(), "y4".into()],
            contents: vec![
                vec![true, false, false, false, false],
                vec![false, false, false, false, true],
            ],
        };
        assert_eq!(rom_to_hex(&r), "10\n01\n");
        assert_eq!(rom_from_hex("10\n01\n", 1, 5).unwrap(), r.contents);
    }
}
