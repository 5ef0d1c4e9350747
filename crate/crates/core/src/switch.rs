//! Key-programmable LOG2(N, M, P) switching networks.
//!
//! Each plane is `log2(n) + m` layers of `n/2` 2x2 switchboxes, with a perfect
//! shuffle in front of every layer. With `p > 1` every input fans out to all
//! planes and each output picks one plane through a keyed selector. An
//! optional XOR inversion layer sits on the outputs.
//!
//! A [`PortMapping`] is read as "input `i` arrives at output `permutation[i]`,
//! and output `o` is negated when `negation[o]`".

use std::collections::HashSet;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{GateKind, Netlist, NetlistBuilder, NetlistError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SwitchError {
    #[error("network size {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),
    #[error("network size {0} exceeds the supported maximum of 64")]
    TooLarge(usize),
    #[error("p must be at least 1")]
    ZeroPlanes,
    #[error("config or target dimensions do not match the network")]
    Dimension,
    #[error("target is not a permutation")]
    NotBijective,
    #[error("exhaustive analysis is limited to n <= 8")]
    ExhaustiveTooLarge,
    #[error("signal `{0}` already exists")]
    NameCollision(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetworkParams {
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

impl NetworkParams {
    pub fn new(n: usize, m: usize, p: usize) -> Result<Self, SwitchError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(SwitchError::NotPowerOfTwo(n));
        }
        if n > 64 {
            return Err(SwitchError::TooLarge(n));
        }
        if p == 0 {
            return Err(SwitchError::ZeroPlanes);
        }
        Ok(NetworkParams { n, m, p })
    }

    /// LOG2(n, log2(n) - 2, 1), with m clamped at zero for n < 4.
    pub fn near_nonblocking(n: usize) -> Result<Self, SwitchError> {
        let k = n.max(1).trailing_zeros() as usize;
        Self::new(n, k.saturating_sub(2), 1)
    }

    pub fn log_n(&self) -> usize {
        self.n.trailing_zeros() as usize
    }

    /// Switch layers per plane.
    pub fn stages(&self) -> usize {
        self.log_n() + self.m
    }

    pub fn layers(&self) -> usize {
        self.p * self.stages()
    }

    pub fn switch_count(&self) -> usize {
        self.n / 2 * self.layers()
    }

    /// Select bits per output when planes are merged.
    pub fn select_width(&self) -> usize {
        if self.p <= 1 {
            0
        } else {
            (usize::BITS - (self.p - 1).leading_zeros()) as usize
        }
    }

    pub fn select_count(&self) -> usize {
        self.n * self.select_width()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchNetwork {
    pub params: NetworkParams,
    /// The fixed interconnect in front of each layer: position `x` moves to
    /// `interconnect[x]`. Identical for every layer.
    pub interconnect: Vec<usize>,
    pub has_inversion_layer: bool,
}

/// Perfect shuffle on `2^k` positions: rotate the index left by one bit.
pub fn shuffle(x: usize, k: usize) -> usize {
    if k == 0 {
        return x;
    }
    let n = 1usize << k;
    ((x << 1) | (x >> (k - 1))) & (n - 1)
}

pub fn build_network(params: NetworkParams, inversion: bool) -> Result<SwitchNetwork, SwitchError> {
    let params = NetworkParams::new(params.n, params.m, params.p)?;
    let k = params.log_n();
    Ok(SwitchNetwork {
        params,
        interconnect: (0..params.n).map(|x| shuffle(x, k)).collect(),
        has_inversion_layer: inversion,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwitchConfig {
    /// Plane-major, then stage-major, then switch index. 1 = cross.
    pub switch_bits: Vec<bool>,
    /// Output-major, MSB first; empty when `p == 1`.
    pub select_bits: Vec<bool>,
    pub inversion_bits: Vec<bool>,
}

impl SwitchConfig {
    pub fn zero(net: &SwitchNetwork) -> SwitchConfig {
        SwitchConfig {
            switch_bits: vec![false; net.params.switch_count()],
            select_bits: vec![false; net.params.select_count()],
            inversion_bits: vec![false; if net.has_inversion_layer { net.params.n } else { 0 }],
        }
    }

    pub fn key_len(net: &SwitchNetwork) -> usize {
        key_count(net)
    }

    /// Flattened in key order: switches, selectors, inversions.
    pub fn to_key_bits(&self) -> Vec<bool> {
        self.switch_bits
            .iter()
            .chain(&self.select_bits)
            .chain(&self.inversion_bits)
            .copied()
            .collect()
    }

    pub fn from_key_bits(net: &SwitchNetwork, bits: &[bool]) -> Result<SwitchConfig, SwitchError> {
        if bits.len() != key_count(net) {
            return Err(SwitchError::Dimension);
        }
        let s = net.params.switch_count();
        let c = net.params.select_count();
        Ok(SwitchConfig {
            switch_bits: bits[..s].to_vec(),
            select_bits: bits[s..s + c].to_vec(),
            inversion_bits: bits[s + c..].to_vec(),
        })
    }

    /// One `0`/`1` string per switch layer, in layer order.
    pub fn stage_strings(&self, net: &SwitchNetwork) -> Vec<String> {
        self.switch_bits
            .chunks(net.params.n / 2)
            .map(|c| c.iter().map(|&b| if b { '1' } else { '0' }).collect())
            .collect()
    }

    fn check(&self, net: &SwitchNetwork) -> Result<(), SwitchError> {
        let inv = if net.has_inversion_layer { net.params.n } else { 0 };
        if self.switch_bits.len() != net.params.switch_count()
            || self.select_bits.len() != net.params.select_count()
            || self.inversion_bits.len() != inv
        {
            return Err(SwitchError::Dimension);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PortMapping {
    pub permutation: Vec<usize>,
    pub negation: Vec<bool>,
}

impl PortMapping {
    pub fn identity(n: usize) -> PortMapping {
        PortMapping {
            permutation: (0..n).collect(),
            negation: vec![false; n],
        }
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.permutation.len()];
        self.permutation.iter().all(|&o| o < seen.len() && !std::mem::replace(&mut seen[o], true))
    }

    /// Applies the mapping to a data vector: `out[perm[i]] = in[i] ^ neg[perm[i]]`.
    pub fn apply(&self, data: &[bool]) -> Vec<bool> {
        let mut out = vec![false; data.len()];
        for (i, &o) in self.permutation.iter().enumerate() {
            out[o] = data[i] ^ self.negation[o];
        }
        out
    }
}

/// Total key bits of the synthesized network.
pub fn key_count(net: &SwitchNetwork) -> usize {
    let p = &net.params;
    p.switch_count() + p.select_count() + if net.has_inversion_layer { p.n } else { 0 }
}

/// Positions after one plane: `pos[i]` is where input `i` ends up.
fn plane_positions(net: &SwitchNetwork, bits: &[bool]) -> Vec<usize> {
    let half = net.params.n / 2;
    let mut pos: Vec<usize> = (0..net.params.n).collect();
    for layer in bits.chunks(half) {
        for x in pos.iter_mut() {
            let y = net.interconnect[*x];
            *x = if layer[y / 2] { y ^ 1 } else { y };
        }
    }
    pos
}

fn select_of(net: &SwitchNetwork, cfg: &SwitchConfig, o: usize) -> usize {
    let w = net.params.select_width();
    let q = cfg.select_bits[o * w..(o + 1) * w]
        .iter()
        .fold(0usize, |a, &b| (a << 1) | b as usize);
    q.min(net.params.p - 1)
}

pub fn apply_config(net: &SwitchNetwork, cfg: &SwitchConfig) -> Result<PortMapping, SwitchError> {
    cfg.check(net)?;
    let n = net.params.n;
    let per_plane = net.params.switch_count() / net.params.p;
    let planes: Vec<Vec<usize>> = cfg
        .switch_bits
        .chunks(per_plane.max(1))
        .take(net.params.p)
        .map(|b| plane_positions(net, b))
        .collect();
    let mut permutation = vec![usize::MAX; n];
    if net.params.p == 1 {
        permutation = planes[0].clone();
    } else {
        // output o listens to plane q; find which input arrives there
        for o in 0..n {
            let q = select_of(net, cfg, o);
            let i = planes[q].iter().position(|&x| x == o).unwrap();
            if permutation[i] != usize::MAX {
                return Err(SwitchError::NotBijective);
            }
            permutation[i] = o;
        }
    }
    let negation = if net.has_inversion_layer {
        cfg.inversion_bits.clone()
    } else {
        vec![false; n]
    };
    Ok(PortMapping { permutation, negation })
}

/// Destination-tag check of the last `log2(n)` layers (an omega network).
/// `at[x]` is the target of whatever sits at position `x`, or `None` when the
/// position carries a don't-care. On success, writes the forced switch bits.
fn omega_suffix(k: usize, at: &[Option<usize>], out: &mut Vec<bool>) -> bool {
    let n = at.len();
    let mut cur = at.to_vec();
    for step in 0..k {
        let mut shuffled = vec![None; n];
        for (x, t) in cur.iter().enumerate() {
            shuffled[shuffle(x, k)] = *t;
        }
        let bit = k - 1 - step;
        for j in 0..n / 2 {
            let (a, b) = (shuffled[2 * j], shuffled[2 * j + 1]);
            let wa = a.map(|t| (t >> bit) & 1);
            let wb = b.map(|t| (t >> bit) & 1);
            let cross = match (wa, wb) {
                (Some(x), Some(y)) if x == y => return false,
                (Some(x), _) => x == 1,
                (None, Some(y)) => y == 0,
                (None, None) => false,
            };
            out.push(cross);
            if cross {
                shuffled.swap(2 * j, 2 * j + 1);
            }
        }
        cur = shuffled;
    }
    true
}

/// Depth-first routing of one plane toward a partial target
/// (`target[i] = None` leaves input `i` unconstrained). Only the first `m`
/// layers branch; the trailing omega layers are forced.
fn route_plane(net: &SwitchNetwork, target: &[Option<usize>], budget: &mut u64) -> Option<Vec<bool>> {
    let n = net.params.n;
    let k = net.params.log_n();
    let half = n / 2;
    let prefix_bits = net.params.m * half;
    let mut failed: HashSet<(usize, Vec<Option<usize>>)> = HashSet::new();

    fn dfs(
        net: &SwitchNetwork,
        k: usize,
        layer: usize,
        at: &[Option<usize>],
        bits: &mut Vec<bool>,
        prefix_bits: usize,
        budget: &mut u64,
        failed: &mut HashSet<(usize, Vec<Option<usize>>)>,
    ) -> bool {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let n = at.len();
        let half = n / 2;
        if bits.len() == prefix_bits {
            let mark = bits.len();
            if omega_suffix(k, at, bits) {
                return true;
            }
            bits.truncate(mark);
            return false;
        }
        if failed.contains(&(layer, at.to_vec())) {
            return false;
        }
        let mut shuffled = vec![None; n];
        for (x, t) in at.iter().enumerate() {
            shuffled[net.interconnect[x]] = *t;
        }
        // Enumerate this layer's switches in ascending order, pass first.
        let mark = bits.len();
        for combo in 0u64..(1u64 << half) {
            // bit of switch 0 is the most significant so pass-before-cross
            // holds lexicographically in ascending switch index
            let mut next = shuffled.clone();
            bits.truncate(mark);
            for j in 0..half {
                let cross = (combo >> (half - 1 - j)) & 1 == 1;
                bits.push(cross);
                if cross {
                    next.swap(2 * j, 2 * j + 1);
                }
            }
            if dfs(net, k, layer + 1, &next, bits, prefix_bits, budget, failed) {
                return true;
            }
            if *budget == 0 {
                break;
            }
        }
        bits.truncate(mark);
        if *budget > 0 {
            failed.insert((layer, at.to_vec()));
        }
        false
    }

    // Inputs start at their own index, so position view = target view.
    let mut bits = Vec::with_capacity(net.params.stages() * half);
    if dfs(net, k, 0, target, &mut bits, prefix_bits, budget, &mut failed) {
        Some(bits)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouteOutcome {
    Routed(SwitchConfig),
    Unroutable,
    /// The search budget ran out before a decision.
    GaveUp,
}

/// Routes `target`, returning `None` when no configuration realizes it.
///
/// For `p == 1` the search is exact and deterministic: switches are decided
/// in ascending index, pass before cross, and the first hit is returned. For
/// `p > 1` planes are filled greedily and `None` can be a false negative.
pub fn route(net: &SwitchNetwork, target: &PortMapping) -> Result<Option<SwitchConfig>, SwitchError> {
    match route_with_budget(net, target, u64::MAX)? {
        RouteOutcome::Routed(c) => Ok(Some(c)),
        _ => Ok(None),
    }
}

pub fn route_with_budget(
    net: &SwitchNetwork,
    target: &PortMapping,
    budget: u64,
) -> Result<RouteOutcome, SwitchError> {
    let n = net.params.n;
    if target.permutation.len() != n || target.negation.len() != n {
        return Err(SwitchError::Dimension);
    }
    if !target.is_bijection() {
        return Err(SwitchError::NotBijective);
    }
    if !net.has_inversion_layer && target.negation.iter().any(|&b| b) {
        return Ok(RouteOutcome::Unroutable);
    }
    let mut budget = budget;
    let mut cfg = SwitchConfig::zero(net);
    if net.has_inversion_layer {
        cfg.inversion_bits = target.negation.clone();
    }
    let full: Vec<Option<usize>> = target.permutation.iter().map(|&o| Some(o)).collect();
    if net.params.p == 1 {
        return Ok(match route_plane(net, &full, &mut budget) {
            Some(bits) => {
                cfg.switch_bits = bits;
                RouteOutcome::Routed(cfg)
            }
            None if budget == 0 => RouteOutcome::GaveUp,
            None => RouteOutcome::Unroutable,
        });
    }
    // Greedy plane filling: each plane takes as many still-unplaced inputs as
    // it can route in ascending input order.
    let per_plane = net.params.switch_count() / net.params.p;
    let mut plane_of_output = vec![usize::MAX; n];
    let mut remaining: Vec<usize> = (0..n).collect();
    for q in 0..net.params.p {
        let mut chosen: Vec<Option<usize>> = vec![None; n];
        let mut bits = route_plane(net, &chosen, &mut budget).expect("empty target routes");
        let mut left = Vec::new();
        for &i in &remaining {
            chosen[i] = Some(target.permutation[i]);
            match route_plane(net, &chosen, &mut budget) {
                Some(b) => bits = b,
                None => {
                    chosen[i] = None;
                    left.push(i);
                }
            }
        }
        for o in chosen.iter().flatten() {
            plane_of_output[*o] = q;
        }
        cfg.switch_bits[q * per_plane..(q + 1) * per_plane].copy_from_slice(&bits);
        remaining = left;
        if remaining.is_empty() {
            break;
        }
    }
    if !remaining.is_empty() {
        return Ok(if budget == 0 { RouteOutcome::GaveUp } else { RouteOutcome::Unroutable });
    }
    let w = net.params.select_width();
    for (o, &q) in plane_of_output.iter().enumerate() {
        for b in 0..w {
            cfg.select_bits[o * w + b] = (q >> (w - 1 - b)) & 1 == 1;
        }
    }
    Ok(RouteOutcome::Routed(cfg))
}

/// Every permutation reachable by some switch setting (`p == 1`), by brute
/// force over all configurations. Limited to 20 switch bits.
pub fn achievable_permutations(net: &SwitchNetwork) -> Result<HashSet<Vec<usize>>, SwitchError> {
    let s = net.params.switch_count();
    if s > 20 || net.params.p != 1 {
        return Err(SwitchError::ExhaustiveTooLarge);
    }
    let mut out = HashSet::new();
    for code in 0u64..(1 << s) {
        let bits: Vec<bool> = (0..s).map(|b| (code >> b) & 1 == 1).collect();
        out.insert(plane_positions(net, &bits));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FractionMode {
    Exhaustive,
    Sampled { k: usize, seed: u64 },
}

pub fn routable_fraction(net: &SwitchNetwork, mode: FractionMode) -> Result<f64, SwitchError> {
    let n = net.params.n;
    let routes = |perm: Vec<usize>| -> Result<bool, SwitchError> {
        let t = PortMapping {
            permutation: perm,
            negation: vec![false; n],
        };
        Ok(route(net, &t)?.is_some())
    };
    let (mut ok, mut total) = (0usize, 0usize);
    match mode {
        FractionMode::Exhaustive => {
            if n > 8 {
                return Err(SwitchError::ExhaustiveTooLarge);
            }
            for perm in (0..n).permutations(n) {
                total += 1;
                ok += routes(perm)? as usize;
            }
        }
        FractionMode::Sampled { k, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..k {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                total += 1;
                ok += routes(perm)? as usize;
            }
        }
    }
    Ok(if total == 0 { 0.0 } else { ok as f64 / total as f64 })
}

/// Names of a synthesized network's ports and keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthesizedPorts {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// In [`SwitchConfig::to_key_bits`] order.
    pub keys: Vec<String>,
}

/// Emits the network into `b`, reading from `inputs` and driving `outputs`.
/// Internal wires and key inputs are named `{prefix}...`.
pub fn synthesize_into(
    net: &SwitchNetwork,
    b: &mut NetlistBuilder,
    prefix: &str,
    inputs: &[String],
    outputs: &[String],
) -> Result<Vec<String>, SwitchError> {
    let n = net.params.n;
    if inputs.len() != n || outputs.len() != n {
        return Err(SwitchError::Dimension);
    }
    let taken = b.driven_names();
    if let Some(clash) = taken.iter().find(|s| s.starts_with(prefix)) {
        return Err(SwitchError::NameCollision(clash.clone()));
    }
    if let Some(clash) = outputs.iter().find(|o| taken.contains(*o)) {
        return Err(SwitchError::NameCollision(clash.clone()));
    }
    let half = n / 2;
    let stages = net.params.stages();
    let mut keys = Vec::with_capacity(key_count(net));
    let key = |keys: &mut Vec<String>, b: &mut NetlistBuilder| {
        let k = format!("{prefix}k{}", keys.len());
        b.key_input(k.clone());
        keys.push(k.clone());
        k
    };
    let mut plane_outs = Vec::with_capacity(net.params.p);
    for q in 0..net.params.p {
        let mut cur: Vec<String> = inputs.to_vec();
        for t in 0..stages {
            let mut shuffled = vec![String::new(); n];
            for (x, s) in cur.iter().enumerate() {
                shuffled[net.interconnect[x]] = s.clone();
            }
            let mut next = vec![String::new(); n];
            for j in 0..half {
                let k = key(&mut keys, b);
                let (a, c) = (&shuffled[2 * j], &shuffled[2 * j + 1]);
                let top = format!("{prefix}p{q}s{t}w{}", 2 * j);
                let bot = format!("{prefix}p{q}s{t}w{}", 2 * j + 1);
                b.gate(GateKind::Mux2, [k.clone(), a.clone(), c.clone()], top.clone());
                b.gate(GateKind::Mux2, [k, c.clone(), a.clone()], bot.clone());
                next[2 * j] = top;
                next[2 * j + 1] = bot;
            }
            cur = next;
        }
        plane_outs.push(cur);
    }
    let w = net.params.select_width();
    let merged: Vec<String> = if net.params.p == 1 {
        plane_outs.pop().unwrap()
    } else {
        let mut merged = Vec::with_capacity(n);
        for o in 0..n {
            let sel: Vec<String> = (0..w).map(|_| key(&mut keys, b)).collect();
            let leaves: Vec<String> = (0..1usize << w)
                .map(|q| plane_outs[q.min(net.params.p - 1)][o].clone())
                .collect();
            let mut counter = 0;
            merged.push(mux_tree(b, &format!("{prefix}o{o}m"), &sel, &leaves, &mut counter));
        }
        merged
    };
    for (o, src) in merged.into_iter().enumerate() {
        if net.has_inversion_layer {
            let k = key(&mut keys, b);
            b.gate(GateKind::Xor, [k, src], outputs[o].clone());
        } else {
            b.gate(GateKind::Buf, [src], outputs[o].clone());
        }
    }
    Ok(keys)
}

/// Selector over `leaves` (length `2^sel.len()`), `sel[0]` the MSB.
pub(crate) fn mux_tree(
    b: &mut NetlistBuilder,
    stem: &str,
    sel: &[String],
    leaves: &[String],
    counter: &mut usize,
) -> String {
    if sel.is_empty() {
        return leaves[0].clone();
    }
    let h = leaves.len() / 2;
    let lo = mux_tree(b, stem, &sel[1..], &leaves[..h], counter);
    let hi = mux_tree(b, stem, &sel[1..], &leaves[h..], counter);
    let out = format!("{stem}{}", *counter);
    *counter += 1;
    b.gate(GateKind::Mux2, [sel[0].clone(), lo, hi], out.clone());
    out
}

/// Stand-alone netlist of the network: inputs `{prefix}in*`, outputs
/// `{prefix}out*`, keys in [`SwitchConfig::to_key_bits`] order.
pub fn synthesize(net: &SwitchNetwork, prefix: &str) -> Result<(Netlist, SynthesizedPorts), SwitchError> {
    let n = net.params.n;
    let inputs: Vec<String> = (0..n).map(|i| format!("{prefix}in{i}")).collect();
    let outputs: Vec<String> = (0..n).map(|i| format!("{prefix}out{i}")).collect();
    let mut b = NetlistBuilder::new(format!("{prefix}crlb"));
    let keys = synthesize_into(net, &mut b, &format!("{prefix}_"), &inputs, &outputs)?;
    b.inputs = inputs.clone();
    b.outputs = outputs.clone();
    Ok((b.build()?, SynthesizedPorts { inputs, outputs, keys }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{SimState, Simulator};

    fn net(n: usize, m: usize) -> SwitchNetwork {
        build_network(NetworkParams::new(n, m, 1).unwrap(), true).unwrap()
    }

    #[test]
    fn smallest_network() {
        let t = net(2, 0);
        assert_eq!(t.params.switch_count(), 1);
        let cfg = SwitchConfig {
            switch_bits: vec![true],
            select_bits: vec![],
            inversion_bits: vec![false, false],
        };
        assert_eq!(apply_config(&t, &cfg).unwrap().permutation, vec![1, 0]);
        assert_eq!(key_count(&t), 3);
    }

    #[test]
    fn near_nonblocking_eight() {
        let p = NetworkParams::near_nonblocking(8).unwrap();
        assert_eq!((p.m, p.stages(), p.switch_count()), (1, 4, 16));
        assert_eq!(key_count(&build_network(p, true).unwrap()), 24);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert_eq!(NetworkParams::new(6, 0, 1), Err(SwitchError::NotPowerOfTwo(6)));
    }

    #[test]
    fn inversion_is_pointwise() {
        let t = net(8, 1);
        let z = SwitchConfig::zero(&t);
        let mut inv = z.clone();
        inv.inversion_bits = vec![true; 8];
        let a = apply_config(&t, &z).unwrap();
        let b = apply_config(&t, &inv).unwrap();
        assert_eq!(a.permutation, b.permutation);
        assert!(b.negation.iter().all(|&x| x));
    }

    #[test]
    fn zero_config_is_shuffle_power() {
        // all-pass leaves only the interconnects: shuffle^(k+m)
        let t = net(8, 1);
        let m = apply_config(&t, &SwitchConfig::zero(&t)).unwrap();
        let expect: Vec<usize> = (0..8).map(|x| shuffle(shuffle(shuffle(shuffle(x, 3), 3), 3), 3)).collect();
        assert_eq!(m.permutation, expect);
    }

    #[test]
    fn omega_routing_matches_brute_force_n4() {
        let t = net(4, 0);
        let all = achievable_permutations(&t).unwrap();
        assert!(all.len() < 24);
        for perm in (0..4).permutations(4) {
            let target = PortMapping {
                permutation: perm.clone(),
                negation: vec![false; 4],
            };
            assert_eq!(route(&t, &target).unwrap().is_some(), all.contains(&perm), "{perm:?}");
        }
    }

    #[test]
    fn route_is_first_in_order() {
        // identity on the 2-input network needs no crossing
        let t = net(2, 0);
        let c = route(&t, &PortMapping::identity(2)).unwrap().unwrap();
        assert_eq!(c.switch_bits, vec![false]);
    }

    #[test]
    fn synthesized_matches_symbolic() {
        let t = net(4, 1);
        let (nl, ports) = synthesize(&t, "x").unwrap();
        assert_eq!(ports.keys.len(), key_count(&t));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let bits: Vec<bool> = (0..key_count(&t)).map(|_| rand::Rng::gen(&mut rng)).collect();
            let cfg = SwitchConfig::from_key_bits(&t, &bits).unwrap();
            let map = apply_config(&t, &cfg).unwrap();
            let sim = Simulator::new(&nl, Some(&bits)).unwrap();
            for pat in 0..16u32 {
                let v: Vec<bool> = (0..4).map(|i| (pat >> i) & 1 == 1).collect();
                let out = sim.run(&SimState::reset(&nl), &[v.clone()]).unwrap();
                assert_eq!(out[0], map.apply(&v));
            }
        }
    }

    #[test]
    fn multi_plane_routes_and_synthesizes() {
        let t = build_network(NetworkParams::new(4, 0, 2).unwrap(), true).unwrap();
        assert_eq!(key_count(&t), 4 * 2 + 4 + 4);
        let target = PortMapping {
            permutation: vec![1, 0, 3, 2],
            negation: vec![true, false, false, true],
        };
        let cfg = route(&t, &target).unwrap().unwrap();
        assert_eq!(apply_config(&t, &cfg).unwrap(), target);
        let (nl, _) = synthesize(&t, "y").unwrap();
        let sim = Simulator::new(&nl, Some(&cfg.to_key_bits())).unwrap();
        let v = vec![true, false, false, false];
        assert_eq!(sim.run(&SimState::reset(&nl), &[v.clone()]).unwrap()[0], target.apply(&v));
    }
}
