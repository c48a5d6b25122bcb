//! Engine/oracle equivalence on small patterns. Each pattern is run as a
//! sequence of CZ bonds, fusions, discards and terminal marks on both the
//! Z-flag engine and the dense simulator, with Pauli errors injected
//! between steps. The engine's prediction is accepted when, for every
//! outcome string `s` of the measured qubits, the faulty branch equals the
//! error-free branch at `s ⊕ f` times `Z^f` on the kept qubits, where `f`
//! is the engine's flag vector. Any decision made from `f` is then the one
//! the exact state supports, because two flag vectors satisfying this
//! differ only by a flip the error-free outcomes are symmetric under.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{ClusterState, Mutation};
use crate::code::{
    classify_residual, classify_z_pattern, decode_xl, Decoded, DetectionMode, LocatedPairs, PauliString, Residual, CZ_PERMUTATION,
};
use crate::oracle::{encoded, StateVector};
use crate::pauli::Pauli;
use crate::rng::RandomStream;
use crate::{Error, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Cz(usize, usize),
    /// Successful fusion; the first qubit survives.
    Fuse(usize, usize),
    /// Z measurement of an unused photon.
    Discard(usize),
    /// Only an X measurement remains for this qubit.
    Terminal(usize),
}

/// What happens to a qubit at the end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    X,
    /// Z-measured, or consumed by a fusion.
    Z,
    Kept,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Verdict {
    Located,
    Clean,
    /// Undetected now, detectable by the next round.
    Residual,
    Logical,
}

pub type VerdictFn = Arc<dyn Fn(&[bool]) -> Verdict + Send + Sync>;

#[derive(Clone)]
pub struct Pattern {
    pub name: String,
    pub n: usize,
    /// Qubits carrying the input state, most significant first in
    /// `input_amps`; all others start in `|+>`. Input qubits are not graph
    /// nodes, so X errors on them are only injected once terminal.
    pub input: Vec<usize>,
    pub input_amps: Vec<Complex64>,
    pub steps: Vec<Step>,
    pub basis: Vec<Basis>,
    /// `(m, via)` flows applied after measurement.
    pub flows: Vec<(usize, usize)>,
    pub verdict: VerdictFn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Injection {
    /// Applied just before this step; `steps.len()` means before readout.
    pub before: usize,
    pub qubit: usize,
    pub pauli: Pauli,
}

impl Pattern {
    fn initial(&self) -> Result<StateVector, Error> {
        let norm = (0.5f64).sqrt().powi((self.n - self.input.len()) as i32);
        let k = self.input.len();
        let amps = (0..1usize << self.n)
            .map(|i| {
                let idx = self.input.iter().enumerate().fold(0, |acc, (pos, &q)| acc | ((i >> q) & 1) << (k - 1 - pos));
                self.input_amps[idx] * norm
            })
            .collect();
        StateVector::from_amplitudes(self.n, amps)
    }

    /// Engine flags per qubit, or `None` if an injection is not allowed.
    pub fn engine(&self, errs: &[Injection], mutation: Mutation) -> Result<Option<Vec<bool>>, Error> {
        let mut st: ClusterState<bool> = ClusterState::new();
        st.mutation = mutation;
        let mut ids: Vec<Option<NodeId>> = (0..self.n).map(|_| Some(st.add_node())).collect();
        let id = |ids: &[Option<NodeId>], q: usize| ids[q].ok_or(Error::UnknownNode(q as NodeId));
        for k in 0..=self.steps.len() {
            for e in errs.iter().filter(|e| e.before == k) {
                let Some(node) = ids[e.qubit] else { return Ok(None) };
                if e.pauli.x_bit && self.input.contains(&e.qubit) && !st.is_terminal(node)? {
                    return Ok(None);
                }
                st.apply_pauli(node, e.pauli)?;
            }
            match self.steps.get(k) {
                Some(&Step::Cz(a, b)) => st.add_edge(id(&ids, a)?, id(&ids, b)?)?,
                Some(&Step::Fuse(a, b)) => {
                    let m = st.fuse_with(id(&ids, a)?, id(&ids, b)?, true)?;
                    ids[a] = m;
                    ids[b] = None;
                }
                Some(&Step::Discard(q)) => {
                    st.remove(id(&ids, q)?)?;
                    ids[q] = None;
                }
                Some(&Step::Terminal(q)) => st.mark_terminal(id(&ids, q)?)?,
                None => {}
            }
        }
        for q in (0..self.n).filter(|&q| self.basis[q] == Basis::X) {
            st.measure_x_with(id(&ids, q)?)?;
        }
        for &(m, via) in &self.flows {
            st.push_z(id(&ids, m)?, id(&ids, via)?)?;
        }
        let mut f = vec![false; self.n];
        for q in 0..self.n {
            if self.basis[q] != Basis::Z {
                f[q] = *st.z_flag(id(&ids, q)?)?;
            }
        }
        Ok(Some(f))
    }

    fn step(&self, s: &mut StateVector, k: usize) {
        match self.steps.get(k) {
            Some(&Step::Cz(a, b)) => s.cphase(a, b),
            Some(&Step::Fuse(a, b)) => s.fuse_in_place(a, b),
            _ => {}
        }
    }

    fn finish(&self, mut s: StateVector) -> StateVector {
        for q in (0..self.n).filter(|&q| self.basis[q] == Basis::X) {
            s.hadamard(q);
        }
        s
    }

    /// Error-free state before each step, and the final state.
    fn prefixes(&self) -> Result<(Vec<StateVector>, StateVector), Error> {
        let mut s = self.initial()?;
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        for k in 0..=self.steps.len() {
            out.push(s.clone());
            self.step(&mut s, k);
        }
        Ok((out, self.finish(s)))
    }

    fn oracle(&self, prefixes: &[StateVector], errs: &[Injection]) -> StateVector {
        let start = errs.iter().map(|e| e.before).min().unwrap_or(self.steps.len());
        let mut s = prefixes[start].clone();
        for k in start..=self.steps.len() {
            for e in errs.iter().filter(|e| e.before == k) {
                s.pauli(e.qubit, e.pauli);
            }
            self.step(&mut s, k);
        }
        self.finish(s)
    }

    /// Branch-by-branch comparison of the faulty state with the shifted
    /// error-free one.
    fn agrees(&self, faulty: &StateVector, clean: &StateVector, f: &[bool]) -> bool {
        let kept: usize = (0..self.n).filter(|&q| self.basis[q] == Basis::Kept).map(|q| 1 << q).sum();
        let flip: usize = (0..self.n).filter(|&q| self.basis[q] == Basis::X && f[q]).map(|q| 1 << q).sum();
        let zmask: usize = (0..self.n).filter(|&q| self.basis[q] == Basis::Kept && f[q]).map(|q| 1 << q).sum();
        let (e, c) = (faulty.amplitudes(), clean.amplitudes());
        let total: f64 = c.iter().map(|a| a.norm_sqr()).sum();
        let mut acc = vec![(Complex64::new(0.0, 0.0), 0.0f64, 0.0f64); e.len()];
        for i in 0..e.len() {
            let j = i ^ flip;
            let sign = if (i & zmask).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            let want = c[j] * sign;
            let slot = &mut acc[i & !kept];
            slot.0 += want.conj() * e[i];
            slot.1 += e[i].norm_sqr();
            slot.2 += want.norm_sqr();
        }
        let tol = 1e-9 * total;
        acc.iter().all(|&(ov, ne, nc)| (ne - nc).abs() <= tol && (ne * nc - ov.norm_sqr()).abs() <= tol * total)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepReport {
    pub pattern: String,
    pub cases: usize,
    pub mismatches: Vec<String>,
    pub verdicts: BTreeMap<Verdict, usize>,
}

impl SweepReport {
    pub fn pass(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Every allowed single injection of X, Y or Z. A terminal mark belongs
/// to the bond before it, so it opens no slot of its own.
pub fn single_injections(p: &Pattern) -> Result<Vec<Injection>, Error> {
    let mut out = Vec::new();
    for before in 0..=p.steps.len() {
        if matches!(p.steps.get(before), Some(Step::Terminal(_))) {
            continue;
        }
        for qubit in 0..p.n {
            for pauli in Pauli::NON_IDENTITY {
                let e = Injection { before, qubit, pauli };
                if p.engine(&[e], Mutation::None)?.is_some() {
                    out.push(e);
                }
            }
        }
    }
    Ok(out)
}

fn describe(errs: &[Injection]) -> String {
    errs.iter().map(|e| format!("{}@q{}/t{}", e.pauli.symbol(), e.qubit, e.before)).collect::<Vec<_>>().join(" ")
}

/// Runs the given error sets (each a list of injections) through both
/// simulators.
pub fn sweep(p: &Pattern, cases: &[Vec<Injection>], mutation: Mutation) -> Result<SweepReport, Error> {
    let (prefixes, clean) = p.prefixes()?;
    let results: Vec<Result<(Verdict, Option<String>), Error>> = cases
        .par_iter()
        .map(|errs| {
            let f =
                p.engine(errs, mutation)?.ok_or_else(|| Error::Config(format!("injection not allowed: {}", describe(errs))))?;
            let faulty = p.oracle(&prefixes, errs);
            let bad = (!p.agrees(&faulty, &clean, &f)).then(|| describe(errs));
            Ok(((p.verdict)(&f), bad))
        })
        .collect();
    let mut report = SweepReport { pattern: p.name.clone(), cases: cases.len(), ..SweepReport::default() };
    for r in results {
        let (v, bad) = r?;
        *report.verdicts.entry(v).or_default() += 1;
        report.mismatches.extend(bad);
    }
    Ok(report)
}

pub fn sweep_singles(p: &Pattern, mutation: Mutation) -> Result<SweepReport, Error> {
    let cases: Vec<Vec<Injection>> = single_injections(p)?.into_iter().map(|e| vec![e]).collect();
    sweep(p, &cases, mutation)
}

/// `count` random pairs of distinct single injections.
pub fn sweep_doubles(p: &Pattern, count: usize, seed: u64, mutation: Mutation) -> Result<SweepReport, Error> {
    let singles = single_injections(p)?;
    let mut rng = RandomStream::new(seed);
    let mut cases = Vec::with_capacity(count);
    while cases.len() < count && singles.len() > 1 {
        let (i, j) = (rng.gen_range(0..singles.len()), rng.gen_range(0..singles.len()));
        if i == j {
            continue;
        }
        let pair = vec![singles[i], singles[j]];
        if p.engine(&pair, Mutation::None)?.is_some() {
            cases.push(pair);
        }
    }
    sweep(p, &cases, mutation)
}

/// Every pair of distinct singles when there are at most `exhaustive` of
/// them, otherwise `sampled` random pairs.
pub fn sweep_pairs(p: &Pattern, exhaustive: usize, sampled: usize, seed: u64, mutation: Mutation) -> Result<SweepReport, Error> {
    let singles = single_injections(p)?;
    let n = singles.len();
    if n * n.saturating_sub(1) / 2 > exhaustive {
        return sweep_doubles(p, sampled, seed, mutation);
    }
    let mut cases = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let pair = vec![singles[i], singles[j]];
            if p.engine(&pair, Mutation::None)?.is_some() {
                cases.push(pair);
            }
        }
    }
    sweep(p, &cases, mutation)
}

fn generic_block() -> Vec<Complex64> {
    let (zero, one) = (encoded('0'), encoded('1'));
    let (a, b) = (Complex64::new(0.3f64.cos(), 0.0), Complex64::from_polar(0.3f64.sin(), 0.7));
    // block qubit k is bit 3-k of the oracle vector, i.e. most significant first
    zero.amplitudes().iter().zip(one.amplitudes()).map(|(&z, &o)| a * z + b * o).collect()
}

fn group(f: &[bool], base: usize) -> [bool; 4] {
    std::array::from_fn(|j| f[base + j])
}

fn xor4(a: [bool; 4], b: [bool; 4]) -> [bool; 4] {
    std::array::from_fn(|j| a[j] ^ b[j])
}

const ZL: [bool; 4] = [true, false, true, false];

fn strong(x: [bool; 4]) -> Option<bool> {
    match decode_xl(x, LocatedPairs::NONE, DetectionMode::Strong) {
        Decoded::Value(v) => Some(v),
        Decoded::Located => None,
    }
}

fn classify_output(z: [bool; 4], x_flip: bool) -> Verdict {
    match classify_z_pattern(z) {
        Some(true) => Verdict::Logical,
        _ if x_flip => Verdict::Logical,
        _ if z.iter().any(|&b| b) => Verdict::Residual,
        _ => Verdict::Clean,
    }
}

// input c 0-3, ancilla a 4-7 with middles 8-9, output o 10-13 with
// middles 14-15
fn memory_verdict(f: &[bool]) -> Verdict {
    match (strong(group(f, 0)), strong(group(f, 4))) {
        (Some(vc), Some(va)) => classify_output(if vc { xor4(group(f, 10), ZL) } else { group(f, 10) }, va),
        _ => Verdict::Located,
    }
}

fn measurement_verdict(f: &[bool]) -> Verdict {
    match (strong(group(f, 0)), strong(group(f, 4)), strong(group(f, 10))) {
        (Some(vc), Some(va), Some(vo)) if va || vc ^ vo => Verdict::Logical,
        (Some(_), Some(_), Some(_)) => Verdict::Clean,
        _ => Verdict::Located,
    }
}

/// Verdict on a kept block from its flags plus the X and Z the decoding
/// assigns to it.
fn classify_kept(z: [bool; 4], x: [bool; 4]) -> Verdict {
    let e: PauliString = std::array::from_fn(|j| Pauli::new(x[j], z[j]));
    match classify_residual(&e) {
        Residual::Detected => Verdict::Residual,
        Residual::LogicalI => Verdict::Clean,
        _ => Verdict::Logical,
    }
}

const XL: [bool; 4] = [true, true, false, false];

/// Output kept. A middle flag flows through the first centre of its pair
/// onto that centre's A neighbour and leaves an X on the centre.
fn kept_memory_verdict(f: &[bool]) -> Verdict {
    let mut a = group(f, 4);
    let mut x = [false; 4];
    for (m, centre, nb) in [(14, 0, 0), (15, 2, 1)] {
        if f[m] {
            a[nb] ^= true;
            x[centre] ^= true;
        }
    }
    match (strong(group(f, 0)), strong(a)) {
        (Some(vc), Some(va)) => {
            let z = if vc { xor4(group(f, 10), ZL) } else { group(f, 10) };
            classify_kept(z, if va { xor4(x, XL) } else { x })
        }
        _ => Verdict::Located,
    }
}

/// P 0-3, M 4-7 with middles 8-9, Q 10-13 with middles 14-15. The Q
/// middles flow like the kept output's.
fn bell_verdict(f: &[bool]) -> Verdict {
    let mut m = group(f, 4);
    let mut x = [false; 4];
    for (mid, centre, nb) in [(14, 0, 0), (15, 2, 1)] {
        if f[mid] {
            m[nb] ^= true;
            x[centre] ^= true;
        }
    }
    match strong(m) {
        None => Verdict::Located,
        Some(vm) => classify_output(group(f, 0), vm).max(classify_kept(group(f, 10), x)),
    }
}

/// Majority vote over the successful fusions; ties are located. The
/// source flag becomes an X on the destination, the vote a Z.
fn transfer_verdict(success: u8, f: &[bool]) -> Verdict {
    let votes: Vec<bool> = (0..4).filter(|k| success >> k & 1 == 1).map(|k| f[1 + k]).collect();
    let flipped = votes.iter().filter(|&&b| b).count();
    if votes.is_empty() || 2 * flipped == votes.len() {
        return Verdict::Located;
    }
    let z = (2 * flipped > votes.len()) ^ f[5];
    if z || f[0] {
        Verdict::Logical
    } else {
        Verdict::Clean
    }
}

/// Marks every X-measured qubit terminal right after its last bond.
fn with_terminals(steps: Vec<Step>, basis: &[Basis]) -> Vec<Step> {
    let touches = |st: &Step, q: usize| matches!(*st, Step::Cz(a, b) | Step::Fuse(a, b) if a == q || b == q);
    let mut out = Vec::with_capacity(steps.len() + basis.len());
    for (k, st) in steps.iter().enumerate() {
        out.push(*st);
        for q in (0..basis.len()).filter(|&q| basis[q] == Basis::X && touches(st, q)) {
            if !steps[k + 1..].iter().any(|t| touches(t, q)) {
                out.push(Step::Terminal(q));
            }
        }
    }
    out
}

fn with_mids(block: usize, mids: usize) -> [Step; 4] {
    [Step::Cz(block, mids), Step::Cz(block + 1, mids), Step::Cz(block + 2, mids + 1), Step::Cz(block + 3, mids + 1)]
}

fn transversal(from: usize, to: usize) -> impl Iterator<Item = Step> {
    (0..4).map(move |j| Step::Cz(from + j, to + CZ_PERMUTATION[j]))
}

/// Input, ancilla and output blocks with Bell middles on the last two.
/// With `kept` the output stays unmeasured and carries the state on.
pub fn memory_pattern(kept: bool, measurement: bool) -> Pattern {
    let mut steps: Vec<Step> = with_mids(4, 8).into_iter().chain(with_mids(10, 14)).collect();
    steps.extend(transversal(4, 10));
    steps.extend(transversal(0, 4));
    let mut basis = vec![Basis::X; 16];
    let mut flows = vec![(8, 4), (9, 6)];
    if kept {
        basis[10..14].fill(Basis::Kept);
    } else {
        flows.extend([(14, 10), (15, 12)]);
    }
    let (name, verdict): (&str, VerdictFn) = match (kept, measurement) {
        (true, _) => ("transfer-circuit", Arc::new(kept_memory_verdict)),
        (false, false) => ("memory", Arc::new(memory_verdict)),
        (false, true) => ("measurement", Arc::new(measurement_verdict)),
    };
    let steps = with_terminals(steps, &basis);
    Pattern { name: name.into(), n: 16, input: (0..4).collect(), input_amps: generic_block(), steps, basis, flows, verdict }
}

/// Output blocks P and Q joined through a measured block M.
pub fn bell_pattern() -> Pattern {
    let mut steps: Vec<Step> = with_mids(4, 8).into_iter().chain(with_mids(10, 14)).collect();
    steps.extend(transversal(0, 4));
    steps.extend(transversal(4, 10));
    let mut basis = vec![Basis::X; 16];
    basis[0..4].fill(Basis::Kept);
    basis[10..14].fill(Basis::Kept);
    let steps = with_terminals(steps, &basis);
    Pattern {
        name: "bell".into(),
        n: 16,
        input: Vec::new(),
        input_amps: vec![Complex64::new(1.0, 0.0)],
        steps,
        basis,
        flows: vec![(8, 4), (9, 6)],
        verdict: Arc::new(bell_verdict),
    }
}

/// Level-0 transfer from a source centre (0, leaves 1-4) to a destination
/// centre (5, leaves 6-9); bit `k` of `success` says whether fusion `k`
/// succeeds.
pub fn transfer_pattern(success: u8) -> Pattern {
    let mut steps: Vec<Step> = (1..5).map(|l| Step::Cz(0, l)).chain((6..10).map(|l| Step::Cz(5, l))).collect();
    let mut basis = vec![Basis::Z; 10];
    basis[0] = Basis::X;
    basis[5] = Basis::Kept;
    for k in 0..4 {
        if success >> k & 1 == 1 {
            steps.push(Step::Fuse(1 + k, 6 + k));
            basis[1 + k] = Basis::X;
        } else {
            steps.push(Step::Discard(1 + k));
            steps.push(Step::Discard(6 + k));
        }
    }
    let amps = vec![Complex64::new(0.3f64.cos(), 0.0), Complex64::from_polar(0.3f64.sin(), 0.7)];
    let steps = with_terminals(steps, &basis);
    let verdict: VerdictFn = Arc::new(move |f| transfer_verdict(success, f));
    Pattern {
        name: format!("transfer-{success:04b}"),
        n: 10,
        input: vec![0],
        input_amps: amps,
        steps,
        basis,
        flows: Vec::new(),
        verdict,
    }
}

pub fn all_patterns() -> Vec<Pattern> {
    let mut v = vec![memory_pattern(true, false), memory_pattern(false, false), memory_pattern(false, true), bell_pattern()];
    v.extend((0..16).map(transfer_pattern));
    v
}

/// Singles on every pattern, plus pairs on each: all of them up to
/// `exhaustive` cases, `sampled` random ones beyond.
pub fn run_all(exhaustive: usize, sampled: usize, seed: u64, mutation: Mutation) -> Result<Vec<SweepReport>, Error> {
    let mut out = Vec::new();
    for (i, p) in all_patterns().iter().enumerate() {
        out.push(sweep_singles(p, mutation)?);
        if exhaustive > 0 || sampled > 0 {
            let mut r = sweep_pairs(p, exhaustive, sampled, seed.wrapping_add(i as u64), mutation)?;
            r.pattern.push_str(" (pairs)");
            out.push(r);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_free_agrees_with_itself() {
        for p in all_patterns() {
            let r = sweep(&p, &[Vec::new()], Mutation::None).unwrap();
            assert!(r.pass(), "{}", p.name);
        }
    }

    #[test]
    fn fusion_keeps_coherence() {
        let mut s = StateVector::plus(2).unwrap();
        s.cphase(0, 1);
        s.hadamard(1);
        s.fuse_in_place(0, 1);
        // |00> + |11> survives with both components
        let a = s.amplitudes();
        assert!(a[0].norm() > 0.4 && a[1].norm() > 0.4 && a[2].norm() < 1e-12 && a[3].norm() < 1e-12);
    }

    #[test]
    fn transfer_singles_agree() {
        for m in 0..16u8 {
            let p = transfer_pattern(m);
            let r = sweep_singles(&p, Mutation::None).unwrap();
            assert!(r.pass(), "{}: {:?}", p.name, &r.mismatches[..r.mismatches.len().min(5)]);
        }
    }

    #[test]
    fn input_x_before_terminal_is_refused() {
        let p = memory_pattern(false, false);
        let e = Injection { before: 0, qubit: 0, pauli: Pauli::X };
        assert!(p.engine(&[e], Mutation::None).unwrap().is_none());
    }

    #[test]
    fn mutations_are_caught() {
        let p = transfer_pattern(0b1111);
        for m in [Mutation::FusionDropsSecondFlag, Mutation::IgnoreXErrors] {
            let r = sweep_singles(&p, m).unwrap();
            assert!(!r.pass(), "{m:?} went unnoticed");
        }
    }

    #[test]
    fn sixteen_qubit_singles_agree() {
        for p in [memory_pattern(true, false), memory_pattern(false, false), memory_pattern(false, true), bell_pattern()] {
            let r = sweep_singles(&p, Mutation::None).unwrap();
            assert!(
                r.pass(),
                "{}: {} of {} {:?}",
                p.name,
                r.mismatches.len(),
                r.cases,
                &r.mismatches[..r.mismatches.len().min(8)]
            );
            if p.name == "memory" || p.name == "transfer-circuit" {
                // one fault never slips through as a logical error
                assert!(!r.verdicts.contains_key(&Verdict::Logical), "{:?}", r.verdicts);
            }
        }
    }

    #[test]
    fn small_patterns_get_every_pair() {
        let p = transfer_pattern(0b0110);
        let n = single_injections(&p).unwrap().len();
        let r = sweep_pairs(&p, usize::MAX, 0, 0, Mutation::None).unwrap();
        assert!(r.pass());
        assert!(r.cases > 0 && r.cases <= n * (n - 1) / 2);
    }

    #[test]
    fn random_pairs_agree() {
        for p in [memory_pattern(true, false), bell_pattern(), transfer_pattern(0b1011)] {
            let r = sweep_doubles(&p, 150, 3, Mutation::None).unwrap();
            assert_eq!(r.cases, 150);
            assert!(r.pass(), "{}: {:?}", p.name, &r.mismatches[..r.mismatches.len().min(5)]);
        }
    }
}
