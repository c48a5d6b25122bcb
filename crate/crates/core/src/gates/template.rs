//! Level-1 ancilla clusters: the time-stepped construction schedule, noise
//! bookkeeping, and compilation of the whole construction into per-location
//! flip masks over the observable photons.
//!
//! Construction is followed along the all-success path. Loss on a photon
//! that is later fused or measured during construction is caught there and
//! only costs a retry, so an accepted ancilla carries Pauli noise from every
//! location but loss only on the photons that survive it.

use std::collections::{BTreeMap, BTreeSet};

use crate::cluster::{ClusterState, ZFlag};
use crate::code::CZ_PERMUTATION;
use crate::noise::{sample_depol_pair, sample_depol_single, sample_loss, NoiseLocation, NoiseParams};
use crate::rng::RandomStream;
use crate::{Error, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum AncillaKind {
    Memory,
    Measurement,
    Bell,
    Cphase,
    CphaseMeasure,
}

impl AncillaKind {
    pub const ALL: [AncillaKind; 5] =
        [AncillaKind::Memory, AncillaKind::Measurement, AncillaKind::Bell, AncillaKind::Cphase, AncillaKind::CphaseMeasure];
}

/// Set of noise symbols under symmetric difference; lets one construction
/// run record which noise events reach which photon.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolSet(pub Vec<u32>);

impl SymbolSet {
    pub fn single(s: u32) -> Self {
        SymbolSet(vec![s])
    }
}

impl ZFlag for SymbolSet {
    fn toggle(&mut self, other: &Self) {
        if other.0.is_empty() {
            return;
        }
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        self.0 = out;
    }
}

/// Receives every noise location during construction.
pub trait NoiseSink<F: ZFlag> {
    type Loss: Clone;
    fn noise(&mut self, st: &mut ClusterState<F>, loc: NoiseLocation, photons: &[NodeId]) -> Result<Vec<Self::Loss>, Error>;
}

/// Draws noise as it happens.
pub struct SampledNoise<'a> {
    pub params: NoiseParams,
    pub rng: &'a mut RandomStream,
}

impl NoiseSink<bool> for SampledNoise<'_> {
    type Loss = bool;
    fn noise(&mut self, st: &mut ClusterState<bool>, _loc: NoiseLocation, photons: &[NodeId]) -> Result<Vec<bool>, Error> {
        let lost: Vec<bool> = photons.iter().map(|_| sample_loss(&self.params, self.rng)).collect();
        if photons.len() == 2 {
            let (a, b) = sample_depol_pair(&self.params, self.rng);
            st.apply_pauli(photons[0], a)?;
            st.apply_pauli(photons[1], b)?;
        } else {
            let a = sample_depol_single(&self.params, self.rng);
            st.apply_pauli(photons[0], a)?;
        }
        Ok(lost)
    }
}

/// Gives every photon at every location its own X and Z symbol. Symbol
/// `4*loc + 2*i` is the X part on photon `i`, the next one the Z part.
#[derive(Default)]
pub struct SymbolicNoise {
    pub locations: Vec<(NoiseLocation, u8)>,
}

impl NoiseSink<SymbolSet> for SymbolicNoise {
    type Loss = u32;
    fn noise(&mut self, st: &mut ClusterState<SymbolSet>, loc: NoiseLocation, photons: &[NodeId]) -> Result<Vec<u32>, Error> {
        let idx = self.locations.len() as u32;
        self.locations.push((loc, photons.len() as u8));
        let mut out = Vec::new();
        for (i, &n) in photons.iter().enumerate() {
            let base = 4 * idx + 2 * i as u32;
            st.apply_error(n, &SymbolSet::single(base), &SymbolSet::single(base + 1))?;
            out.push(2 * idx + i as u32);
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossClass {
    /// Caught at a construction fusion; that fusion is simply retried.
    Retry,
    /// Caught at a construction measurement; the ancilla restarts.
    Restart,
}

/// One construction step, kept for resource counting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Construct {
    Bell(NodeId, NodeId),
    /// Fusion of `a` and `b`; `exposures` counts the loss chances on the
    /// two photons, all of which show up as a failed fusion.
    Fuse {
        a: NodeId,
        b: NodeId,
        out: NodeId,
        exposures: u32,
    },
}

struct Builder<'s, F: ZFlag, S: NoiseSink<F>> {
    log: Vec<Construct>,
    st: ClusterState<F>,
    sink: &'s mut S,
    exposure: BTreeMap<NodeId, Vec<S::Loss>>,
    detected: Vec<(S::Loss, LossClass)>,
    busy: BTreeSet<NodeId>,
}

impl<'s, F: ZFlag, S: NoiseSink<F>> Builder<'s, F, S> {
    fn new(sink: &'s mut S) -> Self {
        Builder {
            log: Vec::new(),
            st: ClusterState::new(),
            sink,
            exposure: BTreeMap::new(),
            detected: Vec::new(),
            busy: BTreeSet::new(),
        }
    }

    fn noise(&mut self, loc: NoiseLocation, photons: &[NodeId]) -> Result<(), Error> {
        let losses = self.sink.noise(&mut self.st, loc, photons)?;
        for (&n, l) in photons.iter().zip(losses) {
            self.exposure.entry(n).or_default().push(l);
        }
        Ok(())
    }

    fn catch(&mut self, n: NodeId, class: LossClass) {
        for l in self.exposure.remove(&n).unwrap_or_default() {
            self.detected.push((l, class));
        }
    }

    fn bell(&mut self) -> Result<(NodeId, NodeId), Error> {
        let (a, b) = self.st.new_bell_pair();
        self.noise(NoiseLocation::AfterBellPrep, &[a, b])?;
        self.busy.extend([a, b]);
        self.log.push(Construct::Bell(a, b));
        Ok((a, b))
    }

    fn fuse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, Error> {
        self.noise(NoiseLocation::BeforeFusion, &[a, b])?;
        let exposures = [a, b].iter().map(|n| self.exposure.get(n).map_or(0, |e| e.len() as u32)).sum();
        self.catch(a, LossClass::Retry);
        self.catch(b, LossClass::Retry);
        let m = self.st.fuse_with(a, b, true)?.expect("success path");
        self.log.push(Construct::Fuse { a, b, out: m, exposures });
        self.busy.insert(m);
        Ok(m)
    }

    /// Fusion whose survivor is read out in X straight away; both output
    /// photons carry measurement noise.
    fn fuse_measure(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, Error> {
        self.noise(NoiseLocation::BeforeFusion, &[a, b])?;
        let exposures = [a, b].iter().map(|n| self.exposure.get(n).map_or(0, |e| e.len() as u32)).sum();
        self.catch(a, LossClass::Retry);
        self.catch(b, LossClass::Retry);
        let m = self.st.fuse_with(a, b, true)?.expect("success path");
        self.log.push(Construct::Fuse { a, b, out: m, exposures });
        self.st.mark_terminal(m)?;
        self.noise(NoiseLocation::BeforeMeasurement, &[m])?;
        self.noise(NoiseLocation::BeforeMeasurement, &[m])?;
        self.catch(m, LossClass::Restart);
        self.st.measure_x_with(m)?;
        self.busy.insert(m);
        Ok(m)
    }

    fn measure(&mut self, n: NodeId) -> Result<(), Error> {
        self.st.mark_terminal(n)?;
        self.noise(NoiseLocation::BeforeMeasurement, &[n])?;
        self.catch(n, LossClass::Restart);
        self.st.measure_x_with(n)?;
        self.busy.insert(n);
        Ok(())
    }

    /// Z measurement of an unused leaf.
    fn discard(&mut self, n: NodeId) -> Result<(), Error> {
        self.noise(NoiseLocation::BeforeMeasurement, &[n])?;
        self.catch(n, LossClass::Restart);
        self.st.remove(n)?;
        Ok(())
    }

    /// Memory noise on every photon that did nothing this step.
    fn end_step(&mut self) -> Result<(), Error> {
        let idle: Vec<NodeId> =
            self.st.live_nodes().filter(|n| !self.busy.contains(n) && !self.st.is_measured(*n).unwrap_or(true)).collect();
        for n in idle {
            self.noise(NoiseLocation::BeforeMemory, &[n])?;
        }
        self.busy.clear();
        Ok(())
    }
}

/// Block `j` of column `col`.
type Slot = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ColumnRole {
    Port,
    Readout,
    Output,
    /// Read out and also the target of the parity filter.
    FilteredReadout,
}

impl ColumnRole {
    /// Centre X-measured during construction; a port centre is the readout
    /// of the input it receives.
    fn is_readout(self) -> bool {
        self != ColumnRole::Output
    }
}

struct Recipe {
    columns: Vec<(ColumnRole, usize)>,
    /// `(x, y)`: the `x` leaf fuses first, the `y` leaf is fuse-measured.
    bonds: Vec<(Slot, Slot)>,
    /// Bell middles, column and the two blocks; flows through the first.
    mids: Vec<(usize, usize, usize)>,
    idle_outputs: bool,
}

fn bell_mids(col: usize) -> [(usize, usize, usize); 2] {
    [(col, 0, 1), (col, 2, 3)]
}

fn transversal(from: usize, to: usize) -> impl Iterator<Item = (Slot, Slot)> {
    (0..4).map(move |j| ((from, j), (to, CZ_PERMUTATION[j])))
}

fn recipe(kind: AncillaKind) -> Recipe {
    use ColumnRole::*;
    let (columns, mut bonds, mids, idle_outputs): (Vec<(ColumnRole, usize)>, Vec<(Slot, Slot)>, Vec<_>, bool) = match kind {
        AncillaKind::Memory => (
            vec![(Port, 5), (Readout, 4), (Output, 6)],
            transversal(0, 1).chain(transversal(1, 2)).collect(),
            [bell_mids(1), bell_mids(2)].concat(),
            true,
        ),
        AncillaKind::Measurement => (
            vec![(Port, 5), (Readout, 4), (FilteredReadout, 4)],
            transversal(0, 1).chain(transversal(1, 2)).collect(),
            [bell_mids(1), bell_mids(2)].concat(),
            false,
        ),
        AncillaKind::Bell => (
            vec![(Output, 6), (FilteredReadout, 4), (Output, 6)],
            transversal(0, 1).chain(transversal(1, 2)).collect(),
            [bell_mids(0), bell_mids(1), bell_mids(2)].concat(),
            false,
        ),
        AncillaKind::Cphase => (
            vec![(Port, 5), (Readout, 4), (Output, 8), (Port, 5), (Readout, 4), (Output, 8)],
            transversal(0, 1).chain(transversal(1, 2)).chain(transversal(3, 4)).chain(transversal(4, 5)).collect(),
            [bell_mids(1), bell_mids(2), bell_mids(4), bell_mids(5)].concat(),
            true,
        ),
        AncillaKind::CphaseMeasure => (
            vec![(Port, 5), (Readout, 4), (Output, 8), (Port, 5), (Readout, 4), (FilteredReadout, 4)],
            transversal(0, 1).chain(transversal(1, 2)).chain(transversal(3, 4)).chain(transversal(4, 5)).collect(),
            [bell_mids(1), bell_mids(2), bell_mids(4), bell_mids(5)].concat(),
            true,
        ),
    };
    if matches!(kind, AncillaKind::Cphase | AncillaKind::CphaseMeasure) {
        bonds.extend(transversal(2, 5));
    }
    Recipe { columns, bonds, mids, idle_outputs }
}

/// Positions of the observable photons in the flag words.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    /// Port and readout columns in column order.
    pub readouts: usize,
    pub outputs: usize,
    pub ports: usize,
    /// Readout group checked by the parity filter, if any.
    pub filter: Option<usize>,
}

impl Layout {
    pub fn readout(&self, g: usize, j: usize) -> usize {
        4 * g + j
    }
    pub fn output_centre(&self, o: usize, j: usize) -> usize {
        4 * self.readouts + 20 * o + j
    }
    pub fn output_leaf(&self, o: usize, j: usize, k: usize) -> usize {
        4 * self.readouts + 20 * o + 4 + 4 * j + k
    }
    pub fn port_leaf(&self, p: usize, j: usize, k: usize) -> usize {
        4 * self.readouts + 20 * self.outputs + 16 * p + 4 * j + k
    }
    pub fn len(&self) -> usize {
        4 * self.readouts + 20 * self.outputs + 16 * self.ports
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A finished construction.
pub struct Built<F: ZFlag, L> {
    pub state: ClusterState<F>,
    pub layout: Layout,
    /// Node behind each observable position.
    pub observed: Vec<NodeId>,
    /// Loss exposures still live on each observable photon.
    pub exposures: Vec<Vec<L>>,
    pub detected: Vec<(L, LossClass)>,
    pub construction: Vec<Construct>,
}

struct Star {
    centre: NodeId,
    originals: [NodeId; 4],
    extras: Vec<NodeId>,
}

fn build<F: ZFlag, S: NoiseSink<F>>(kind: AncillaKind, sink: &mut S) -> Result<Built<F, S::Loss>, Error> {
    let r = recipe(kind);
    let mut b = Builder::new(sink);
    let ncol = r.columns.len();
    let slots: Vec<Slot> = (0..ncol).flat_map(|c| (0..4).map(move |j| (c, j))).collect();
    let leaves = |s: &Slot| r.columns[s.0].1;

    // t0: Bell pairs for every 5-star (two per slot for 8-leaf columns)
    let mut pairs: BTreeMap<(Slot, usize), [(NodeId, NodeId); 4]> = BTreeMap::new();
    for s in &slots {
        let count = if leaves(s) == 8 { 2 } else { 1 };
        for k in 0..count {
            let mut p = [(0, 0); 4];
            for q in &mut p {
                *q = b.bell()?;
            }
            pairs.insert((*s, k), p);
        }
    }
    b.end_step()?;

    // t1: three-chains; Bell pairs for the chains of 6-leaf columns
    let mut chains: BTreeMap<(Slot, usize), (NodeId, NodeId)> = BTreeMap::new();
    for (key, p) in &pairs {
        let m1 = b.fuse(p[0].1, p[1].0)?;
        let m2 = b.fuse(p[2].1, p[3].0)?;
        chains.insert(*key, (m1, m2));
    }
    let mut six: BTreeMap<Slot, [(NodeId, NodeId); 2]> = BTreeMap::new();
    for s in slots.iter().filter(|s| leaves(s) == 6) {
        six.insert(*s, [b.bell()?, b.bell()?]);
    }
    b.end_step()?;

    // t2: star centres; extra-leaf pieces; bond Bell pairs
    let mut stars: BTreeMap<(Slot, usize), Star> = BTreeMap::new();
    for (key, (m1, m2)) in &chains {
        let centre = b.fuse(*m1, *m2)?;
        let p = pairs[key];
        stars.insert(*key, Star { centre, originals: [p[0].0, p[1].1, p[2].0, p[3].1], extras: Vec::new() });
    }
    let mut six_mid: BTreeMap<Slot, (NodeId, [NodeId; 2])> = BTreeMap::new();
    for (s, q) in &six {
        let m = b.fuse(q[0].1, q[1].0)?;
        six_mid.insert(*s, (m, [q[0].0, q[1].1]));
    }
    let mut five: BTreeMap<Slot, (NodeId, NodeId)> = BTreeMap::new();
    for s in slots.iter().filter(|s| leaves(s) == 5) {
        five.insert(*s, b.bell()?);
    }
    let mut bond_pairs = Vec::new();
    for _ in &r.bonds {
        bond_pairs.push(b.bell()?);
    }
    for s in slots.iter().filter(|s| leaves(s) == 4) {
        b.st.mark_terminal(stars[&(*s, 0)].centre)?;
    }
    b.end_step()?;

    // t3: complete the centres, first half of every bond, Bell middles
    let mut cols: BTreeMap<Slot, Star> = BTreeMap::new();
    for s in &slots {
        let mut star = stars.remove(&(*s, 0)).expect("star");
        match leaves(s) {
            5 => {
                let (e0, e1) = five[s];
                star.centre = b.fuse(star.centre, e0)?;
                star.extras.push(e1);
            }
            6 => {
                let (m, ends) = six_mid[s];
                star.centre = b.fuse(star.centre, m)?;
                star.extras.extend(ends);
            }
            8 => {
                let second = stars.remove(&(*s, 1)).expect("second star");
                star.centre = b.fuse(star.centre, second.centre)?;
                star.extras.extend(second.originals);
            }
            _ => {}
        }
        b.st.mark_terminal(star.centre)?;
        cols.insert(*s, star);
    }
    let mut next_leaf: BTreeMap<Slot, usize> = BTreeMap::new();
    let mut take = |s: Slot, cols: &BTreeMap<Slot, Star>| {
        let k = next_leaf.entry(s).or_insert(0);
        *k += 1;
        cols[&s].originals[*k - 1]
    };
    let mut bond_plan = Vec::new();
    for (i, &(x, y)) in r.bonds.iter().enumerate() {
        let (lx, ly) = (take(x, &cols), take(y, &cols));
        let (g, h) = bond_pairs[i];
        let u = b.fuse(lx, g)?;
        b.st.mark_terminal(u)?;
        bond_plan.push((u, h, ly));
    }
    let mut mid_nodes = Vec::new();
    for &(c, p, q) in &r.mids {
        let (lp, lq) = (take((c, p), &cols), take((c, q), &cols));
        let m = b.fuse(lp, lq)?;
        b.st.mark_terminal(m)?;
        mid_nodes.push((m, cols[&(c, p)].centre));
    }
    let mut dangling: BTreeMap<Slot, Vec<NodeId>> = BTreeMap::new();
    for s in &slots {
        let used = next_leaf.get(s).copied().unwrap_or(0);
        let rest: Vec<NodeId> = cols[s].originals[used..].to_vec();
        let role = r.columns[s.0].0;
        let mut keep: Vec<NodeId> = Vec::new();
        if matches!(role, ColumnRole::Port | ColumnRole::Output) {
            keep = cols[s].extras.clone();
            let need = 4 - keep.len();
            keep.extend(&rest[..need]);
            for &n in &rest[need..] {
                b.discard(n)?;
            }
        } else {
            for &n in &rest {
                b.discard(n)?;
            }
        }
        dangling.insert(*s, keep);
    }
    b.end_step()?;

    // t4: second half of every bond; read out the measured columns
    let mut bond_nodes = Vec::new();
    for &(u, h, ly) in &bond_plan {
        let w = b.fuse_measure(h, ly)?;
        b.measure(u)?;
        bond_nodes.push((u, w));
    }
    for &(m, _) in &mid_nodes {
        b.measure(m)?;
    }
    // port centres too: only the input fusions remain once the input arrives
    for s in &slots {
        if r.columns[s.0].0.is_readout() {
            b.measure(cols[s].centre)?;
        }
    }
    b.end_step()?;

    // t5: outputs wait while the data step runs
    if r.idle_outputs {
        for s in &slots {
            if r.columns[s.0].0 == ColumnRole::Output {
                let mut nodes = vec![cols[s].centre];
                nodes.extend(&dangling[s]);
                for n in nodes {
                    b.noise(NoiseLocation::BeforeMemory, &[n])?;
                }
            }
        }
    }

    for &(m, via) in &mid_nodes {
        b.st.push_z(m, via)?;
    }
    for &(u, w) in &bond_nodes {
        b.st.push_z(u, w)?;
        b.st.push_z(w, u)?;
    }

    let count = |role: fn(ColumnRole) -> bool| r.columns.iter().filter(|c| role(c.0)).count();
    let layout = Layout {
        readouts: count(ColumnRole::is_readout),
        outputs: count(|c| c == ColumnRole::Output),
        ports: count(|c| c == ColumnRole::Port),
        filter: r.columns.iter().filter(|c| c.0.is_readout()).position(|c| c.0 == ColumnRole::FilteredReadout),
    };
    let mut observed = vec![0; layout.len()];
    let (mut g, mut o, mut p) = (0, 0, 0);
    for (c, (role, _)) in r.columns.iter().enumerate() {
        for j in 0..4 {
            let s = (c, j);
            match role {
                ColumnRole::Readout | ColumnRole::FilteredReadout => observed[layout.readout(g, j)] = cols[&s].centre,
                ColumnRole::Output => {
                    observed[layout.output_centre(o, j)] = cols[&s].centre;
                    for (k, &n) in dangling[&s].iter().enumerate() {
                        observed[layout.output_leaf(o, j, k)] = n;
                    }
                }
                ColumnRole::Port => {
                    observed[layout.readout(g, j)] = cols[&s].centre;
                    for (k, &n) in dangling[&s].iter().enumerate() {
                        observed[layout.port_leaf(p, j, k)] = n;
                    }
                }
            }
        }
        match role {
            ColumnRole::Readout | ColumnRole::FilteredReadout => g += 1,
            ColumnRole::Output => o += 1,
            ColumnRole::Port => {
                g += 1;
                p += 1;
            }
        }
    }
    let mut exposures = Vec::with_capacity(observed.len());
    for &n in &observed {
        exposures.push(b.exposure.remove(&n).unwrap_or_default());
    }
    // whatever is left belongs to measured photons whose loss shows up at
    // readout
    let leftover: Vec<NodeId> = b.exposure.keys().copied().collect();
    for n in leftover {
        b.catch(n, LossClass::Restart);
    }
    b.st.check_integrity()?;
    Ok(Built { state: b.st, layout, observed, exposures, detected: b.detected, construction: b.log })
}

/// One accepted-or-not ancilla draw in flag-word form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AncillaSample {
    pub flags: u128,
    pub lost: u128,
    pub retry_losses: u32,
    pub restart_losses: u32,
}

impl AncillaSample {
    pub fn bit(&self, i: usize) -> bool {
        self.flags >> i & 1 == 1
    }
    pub fn lost_bit(&self, i: usize) -> bool {
        self.lost >> i & 1 == 1
    }
    pub fn group(&self, base: usize) -> [bool; 4] {
        std::array::from_fn(|j| self.bit(base + j))
    }
}

/// Runs the construction with noise drawn on the fly.
pub fn build_sampled(
    kind: AncillaKind,
    params: &NoiseParams,
    rng: &mut RandomStream,
) -> Result<(Built<bool, bool>, AncillaSample), Error> {
    let mut sink = SampledNoise { params: *params, rng };
    let built = build(kind, &mut sink)?;
    let mut s = AncillaSample::default();
    for (i, &n) in built.observed.iter().enumerate() {
        if built.state.z_error(n)? {
            s.flags |= 1 << i;
        }
        if built.exposures[i].iter().any(|&l| l) {
            s.lost |= 1 << i;
        }
    }
    for &(l, class) in &built.detected {
        if l {
            match class {
                LossClass::Retry => s.retry_losses += 1,
                LossClass::Restart => s.restart_losses += 1,
            }
        }
    }
    Ok((built, s))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossTarget {
    Observed(u8),
    Caught(LossClass),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompiledLocation {
    pub kind: NoiseLocation,
    pub photons: u8,
    pub x: [u128; 2],
    pub z: [u128; 2],
    pub loss: [LossTarget; 2],
}

/// Construction reduced to its effect on the observable flags.
#[derive(Clone, Debug)]
pub struct CompiledAncilla {
    pub kind: AncillaKind,
    pub layout: Layout,
    pub locations: Vec<CompiledLocation>,
    /// Number of loss exposures left on each observable photon.
    pub live_exposures: Vec<u32>,
    pub construction: Vec<Construct>,
    /// Loss exposures caught by construction measurements.
    pub restart_exposures: u32,
}

impl CompiledAncilla {
    pub fn compile(kind: AncillaKind) -> Result<Self, Error> {
        let mut sink = SymbolicNoise::default();
        let built = build(kind, &mut sink)?;
        let mut masks = vec![0u128; 4 * sink.locations.len()];
        for (i, &n) in built.observed.iter().enumerate() {
            for &s in &built.state.z_flag(n)?.0 {
                masks[s as usize] |= 1 << i;
            }
        }
        let mut loss = vec![LossTarget::Caught(LossClass::Retry); 2 * sink.locations.len()];
        for (i, ex) in built.exposures.iter().enumerate() {
            for &e in ex {
                loss[e as usize] = LossTarget::Observed(i as u8);
            }
        }
        for &(e, class) in &built.detected {
            loss[e as usize] = LossTarget::Caught(class);
        }
        let locations = sink
            .locations
            .iter()
            .enumerate()
            .map(|(l, &(kind, photons))| CompiledLocation {
                kind,
                photons,
                x: [masks[4 * l], masks[4 * l + 2]],
                z: [masks[4 * l + 1], masks[4 * l + 3]],
                loss: [loss[2 * l], loss[2 * l + 1]],
            })
            .collect();
        let live_exposures = built.exposures.iter().map(|e| e.len() as u32).collect();
        let restart_exposures = built.detected.iter().filter(|d| d.1 == LossClass::Restart).count() as u32;
        Ok(CompiledAncilla {
            kind,
            layout: built.layout,
            locations,
            live_exposures,
            construction: built.construction,
            restart_exposures,
        })
    }

    /// Draws one construction; consumes random numbers in the same order as
    /// [`build_sampled`].
    pub fn sample(&self, params: &NoiseParams, rng: &mut RandomStream) -> AncillaSample {
        let mut s = AncillaSample::default();
        for loc in &self.locations {
            for i in 0..loc.photons as usize {
                if sample_loss(params, rng) {
                    match loc.loss[i] {
                        LossTarget::Observed(b) => s.lost |= 1 << b,
                        LossTarget::Caught(LossClass::Retry) => s.retry_losses += 1,
                        LossTarget::Caught(LossClass::Restart) => s.restart_losses += 1,
                    }
                }
            }
            let ps = if loc.photons == 2 {
                let (a, b) = sample_depol_pair(params, rng);
                [a, b]
            } else {
                [sample_depol_single(params, rng), crate::pauli::Pauli::I]
            };
            for (i, p) in ps.iter().enumerate() {
                if p.x_bit {
                    s.flags ^= loc.x[i];
                }
                if p.z_bit {
                    s.flags ^= loc.z[i];
                }
            }
        }
        s
    }

    /// Draws until the parity filter passes. Returns the sample and the
    /// number of rejected constructions.
    pub fn sample_accepted(&self, params: &NoiseParams, rng: &mut RandomStream) -> (AncillaSample, u64) {
        let mut rejected = 0;
        loop {
            let s = self.sample(params, rng);
            match self.layout.filter {
                Some(g) if s.group(self.layout.readout(g, 0)).iter().fold(false, |a, &b| a ^ b) => rejected += 1,
                _ => return (s, rejected),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_set_is_xor() {
        let mut a = SymbolSet(vec![1, 3, 5]);
        a.toggle(&SymbolSet(vec![3, 4]));
        assert_eq!(a.0, vec![1, 4, 5]);
        a.toggle(&SymbolSet(vec![1, 4, 5]));
        assert!(a.0.is_empty());
    }

    #[test]
    fn compiled_matches_step_by_step() {
        let params = NoiseParams::new(0.02, 0.05).unwrap();
        for kind in AncillaKind::ALL {
            let c = CompiledAncilla::compile(kind).unwrap();
            for seed in 0..200 {
                let mut r1 = RandomStream::new(seed);
                let mut r2 = RandomStream::new(seed);
                let (_, direct) = build_sampled(kind, &params, &mut r1).unwrap();
                let fast = c.sample(&params, &mut r2);
                assert_eq!(direct, fast, "{kind:?} seed {seed}");
            }
        }
    }

    #[test]
    fn noiseless_ancilla_is_clean() {
        for kind in AncillaKind::ALL {
            let c = CompiledAncilla::compile(kind).unwrap();
            let s = c.sample(&NoiseParams::noiseless(), &mut RandomStream::new(1));
            assert_eq!(s, AncillaSample::default());
        }
    }

    #[test]
    fn memory_exposure_counts() {
        let c = CompiledAncilla::compile(AncillaKind::Memory).unwrap();
        let l = c.layout;
        // output side: centre then the four leaves of each block
        for j in 0..4 {
            assert_eq!(c.live_exposures[l.output_centre(0, j)], 2);
            let mut leaves: Vec<u32> = (0..4).map(|k| c.live_exposures[l.output_leaf(0, j, k)]).collect();
            leaves.sort_unstable();
            assert_eq!(leaves, vec![5, 5, 6, 6]);
            let mut ports: Vec<u32> = (0..4).map(|k| c.live_exposures[l.port_leaf(0, j, k)]).collect();
            ports.sort_unstable();
            assert_eq!(ports, vec![3, 5, 5, 5]);
        }
    }

    #[test]
    fn single_faults_reach_few_observables() {
        let c = CompiledAncilla::compile(AncillaKind::Memory).unwrap();
        assert!(c.locations.iter().all(|l| l.photons as usize == l.kind.arity()));
        assert!(c.locations.iter().any(|l| l.z[0] != 0));
    }
}
