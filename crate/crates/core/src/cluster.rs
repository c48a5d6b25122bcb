//! Graph state of photons with Z-error flags and loss marks.
//!
//! X-basis measurements are deferred: a measured node stays in the graph so
//! that later X errors on its neighbours still reach its readout, and so
//! that measured-node errors can be pushed along the graph at evaluation
//! time. Z-measured photons (failed fusions, unused leaves) are removed.
//!
//! A node is terminal once all of its own fusions are done and only an X
//! measurement remains. An X error there commutes with everything that
//! follows and is dropped instead of being pushed onto the neighbours.

use std::fmt::Debug;

use crate::noise::{apply_location_noise, NoiseLocation, NoiseParams};
use crate::pauli::{Graph, Outcome, Pauli, PauliFrame};
use crate::rng::RandomStream;
use crate::{Error, NodeId};

/// Value stored as a node's Z-error flag. `bool` for sampled runs; the gate
/// compiler uses a symbolic GF(2) vector.
pub trait ZFlag: Clone + Default + PartialEq + Debug {
    fn toggle(&mut self, other: &Self);
}

impl ZFlag for bool {
    fn toggle(&mut self, other: &bool) {
        *self ^= *other;
    }
}

#[derive(Clone, Debug)]
struct Node<F> {
    adj: Vec<NodeId>,
    z: F,
    lost: bool,
    measured: bool,
    terminal: bool,
}

/// Deliberate rule defects, used only to check that verification notices
/// a broken engine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mutation {
    #[default]
    None,
    /// Fusion keeps only the first input's flag.
    FusionDropsSecondFlag,
    /// X errors are dropped everywhere instead of toggling neighbours.
    IgnoreXErrors,
}

#[derive(Clone, Debug)]
pub struct ClusterState<F: ZFlag = bool> {
    nodes: Vec<Option<Node<F>>>,
    pub frame: PauliFrame,
    pub mutation: Mutation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FusionOutcome {
    Success(NodeId),
    Failure,
    LocatedLoss,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureOutcome {
    Value(Outcome),
    Located,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FuseMeasureOutcome {
    Value { node: NodeId, outcome: Outcome },
    Failure,
    Located,
}

impl<F: ZFlag> Default for ClusterState<F> {
    fn default() -> Self {
        ClusterState { nodes: Vec::new(), frame: PauliFrame::new(), mutation: Mutation::None }
    }
}

impl<F: ZFlag> ClusterState<F> {
    pub fn new() -> Self {
        Self::default()
    }

    fn node(&self, n: NodeId) -> Result<&Node<F>, Error> {
        self.nodes.get(n as usize).and_then(|x| x.as_ref()).ok_or(Error::UnknownNode(n))
    }

    fn node_mut(&mut self, n: NodeId) -> Result<&mut Node<F>, Error> {
        self.nodes.get_mut(n as usize).and_then(|x| x.as_mut()).ok_or(Error::UnknownNode(n))
    }

    fn unmeasured(&self, n: NodeId) -> Result<&Node<F>, Error> {
        let node = self.node(n)?;
        if node.measured {
            return Err(Error::AlreadyMeasured(n));
        }
        Ok(node)
    }

    pub fn add_node(&mut self) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Some(Node { adj: Vec::new(), z: F::default(), lost: false, measured: false, terminal: false }));
        id
    }

    pub fn add_edge(&mut self, a: NodeId, b: NodeId) -> Result<(), Error> {
        if a == b {
            return Err(Error::SelfLoop(a));
        }
        self.node(a)?;
        self.node(b)?;
        if !self.node(a)?.adj.contains(&b) {
            self.node_mut(a)?.adj.push(b);
            self.node_mut(b)?.adj.push(a);
        }
        Ok(())
    }

    /// Two fresh photons joined by an edge (a Bell pair up to a local
    /// Hadamard).
    pub fn new_bell_pair(&mut self) -> (NodeId, NodeId) {
        let a = self.add_node();
        let b = self.add_node();
        self.add_edge(a, b).expect("fresh nodes");
        (a, b)
    }

    pub fn is_live(&self, n: NodeId) -> bool {
        self.node(n).is_ok()
    }

    pub fn is_measured(&self, n: NodeId) -> Result<bool, Error> {
        Ok(self.node(n)?.measured)
    }

    pub fn neighbors_of(&self, n: NodeId) -> Result<&[NodeId], Error> {
        Ok(&self.node(n)?.adj)
    }

    pub fn live_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| n.as_ref().map(|_| i as NodeId))
    }

    pub fn z_flag(&self, n: NodeId) -> Result<&F, Error> {
        Ok(&self.node(n)?.z)
    }

    pub fn toggle_z(&mut self, n: NodeId, f: &F) -> Result<(), Error> {
        self.node_mut(n)?.z.toggle(f);
        Ok(())
    }

    pub fn take_z(&mut self, n: NodeId) -> Result<F, Error> {
        Ok(std::mem::take(&mut self.node_mut(n)?.z))
    }

    pub fn mark_terminal(&mut self, n: NodeId) -> Result<(), Error> {
        self.node_mut(n)?.terminal = true;
        Ok(())
    }

    pub fn is_terminal(&self, n: NodeId) -> Result<bool, Error> {
        Ok(self.node(n)?.terminal)
    }

    /// Records an X component `x` and Z component `z` on `n`, with X
    /// rewritten as Z on every current neighbour unless `n` is terminal.
    pub fn apply_error(&mut self, n: NodeId, x: &F, z: &F) -> Result<(), Error> {
        self.unmeasured(n)?;
        self.node_mut(n)?.z.toggle(z);
        if self.node(n)?.terminal || self.mutation == Mutation::IgnoreXErrors {
            return Ok(());
        }
        let adj = self.node(n)?.adj.clone();
        for m in adj {
            self.node_mut(m)?.z.toggle(x);
        }
        Ok(())
    }

    pub fn mark_lost(&mut self, n: NodeId) -> Result<(), Error> {
        self.node_mut(n)?.lost = true;
        Ok(())
    }

    pub fn clear_lost(&mut self, n: NodeId) -> Result<(), Error> {
        self.node_mut(n)?.lost = false;
        Ok(())
    }

    pub fn is_lost(&self, n: NodeId) -> Result<bool, Error> {
        Ok(self.node(n)?.lost)
    }

    /// Removes a photon as by a Z measurement. Z flags on it are discarded.
    pub fn remove(&mut self, n: NodeId) -> Result<Vec<NodeId>, Error> {
        let adj = self.node(n)?.adj.clone();
        for &m in &adj {
            self.node_mut(m)?.adj.retain(|&k| k != n);
        }
        self.nodes[n as usize] = None;
        self.frame.remove(n);
        Ok(adj)
    }

    /// Fusion with a prescribed result. On success a new node replaces `a`
    /// and `b`, inherits both neighbourhoods and carries the XOR of their
    /// flags; on failure both are removed.
    pub fn fuse_with(&mut self, a: NodeId, b: NodeId, success: bool) -> Result<Option<NodeId>, Error> {
        if a == b {
            return Err(Error::SelfLoop(a));
        }
        self.unmeasured(a)?;
        self.unmeasured(b)?;
        if !success {
            self.remove(a)?;
            self.remove(b)?;
            return Ok(None);
        }
        let mut z = self.node(a)?.z.clone();
        if self.mutation != Mutation::FusionDropsSecondFlag {
            z.toggle(&self.node(b)?.z);
        }
        let lost = self.node(a)?.lost || self.node(b)?.lost;
        let na = self.remove(a)?;
        let nb = self.remove(b)?;
        let m = self.add_node();
        {
            let node = self.node_mut(m)?;
            node.z = z;
            node.lost = lost;
        }
        for k in na.into_iter().chain(nb) {
            if k != a && k != b {
                self.add_edge(m, k)?;
            }
        }
        Ok(Some(m))
    }

    /// Marks `n` as X-measured and returns its flag, i.e. whether the
    /// frame-interpreted outcome deviates from the error-free one.
    pub fn measure_x_with(&mut self, n: NodeId) -> Result<F, Error> {
        self.unmeasured(n)?;
        let node = self.node_mut(n)?;
        node.measured = true;
        node.terminal = true;
        Ok(node.z.clone())
    }

    /// Applies `Z_m ≡ Z_{N(v)\{m}}` for an X-measured `m` next to `v`, where
    /// `v` only ever undergoes an X measurement. Clears the flag on `m`.
    pub fn push_z(&mut self, m: NodeId, via: NodeId) -> Result<(), Error> {
        if !self.node(via)?.adj.contains(&m) {
            return Err(Error::NotAdjacent(m, via));
        }
        let f = self.take_z(m)?;
        let adj = self.node(via)?.adj.clone();
        for k in adj {
            if k != m {
                self.node_mut(k)?.z.toggle(&f);
            }
        }
        Ok(())
    }

    /// Checks that adjacency is symmetric and references only live nodes.
    pub fn check_integrity(&self) -> Result<(), Error> {
        for n in self.live_nodes() {
            for &m in &self.node(n)?.adj {
                if m == n {
                    return Err(Error::SelfLoop(n));
                }
                if !self.node(m)?.adj.contains(&n) {
                    return Err(Error::NotAdjacent(m, n));
                }
            }
        }
        Ok(())
    }
}

impl ClusterState<bool> {
    pub fn apply_pauli(&mut self, n: NodeId, p: Pauli) -> Result<(), Error> {
        self.apply_error(n, &p.x_bit, &p.z_bit)
    }

    pub fn z_error(&self, n: NodeId) -> Result<bool, Error> {
        Ok(self.node(n)?.z)
    }

    /// Noisy Bell pair: AfterBellPrep noise on both photons.
    pub fn new_bell_pair_noisy(&mut self, params: &NoiseParams, rng: &mut RandomStream) -> (NodeId, NodeId) {
        let (a, b) = self.new_bell_pair();
        apply_location_noise(NoiseLocation::AfterBellPrep, &[a, b], self, params, rng).expect("fresh pair");
        (a, b)
    }

    /// Type-I fusion with BeforeFusion noise. A loss on either input is
    /// flagged; otherwise success with probability 1/2.
    pub fn fuse(&mut self, a: NodeId, b: NodeId, rng: &mut RandomStream, params: &NoiseParams) -> Result<FusionOutcome, Error> {
        self.unmeasured(a)?;
        self.unmeasured(b)?;
        apply_location_noise(NoiseLocation::BeforeFusion, &[a, b], self, params, rng)?;
        let success = rng.coin();
        if self.is_lost(a)? || self.is_lost(b)? {
            self.remove(a)?;
            self.remove(b)?;
            return Ok(FusionOutcome::LocatedLoss);
        }
        if success {
            let m = self.fuse_with(a, b, true)?.expect("success branch");
            Ok(FusionOutcome::Success(m))
        } else {
            // Z outcomes of the two removed photons become frame corrections.
            let (sa, sb) = (rng.coin(), rng.coin());
            let (na, nb) = (self.neighbors_of(a)?.to_vec(), self.neighbors_of(b)?.to_vec());
            self.fuse_with(a, b, false)?;
            for (nbrs, s) in [(na, sa), (nb, sb)] {
                if s {
                    for k in nbrs {
                        if self.is_live(k) {
                            self.frame.apply(k, Pauli::Z);
                        }
                    }
                }
            }
            Ok(FusionOutcome::Failure)
        }
    }

    /// X measurement with BeforeMeasurement noise.
    pub fn measure_x(&mut self, n: NodeId, rng: &mut RandomStream, params: &NoiseParams) -> Result<MeasureOutcome, Error> {
        self.unmeasured(n)?;
        apply_location_noise(NoiseLocation::BeforeMeasurement, &[n], self, params, rng)?;
        if self.is_lost(n)? {
            self.node_mut(n)?.measured = true;
            self.node_mut(n)?.terminal = true;
            return Ok(MeasureOutcome::Located);
        }
        let flip = self.measure_x_with(n)?;
        Ok(MeasureOutcome::Value(Outcome::from_flip(flip)))
    }

    /// Fusion followed by an X measurement of the survivor, charged as two
    /// time steps of noise.
    pub fn fuse_and_measure(
        &mut self,
        a: NodeId,
        b: NodeId,
        rng: &mut RandomStream,
        params: &NoiseParams,
    ) -> Result<FuseMeasureOutcome, Error> {
        self.unmeasured(a)?;
        self.unmeasured(b)?;
        apply_location_noise(NoiseLocation::BeforeFusion, &[a, b], self, params, rng)?;
        let success = rng.coin();
        // both output photons are read out, so both carry measurement noise
        let la = crate::noise::sample_loss(params, rng);
        let pa = crate::noise::sample_depol_single(params, rng);
        let lb = crate::noise::sample_loss(params, rng);
        let pb = crate::noise::sample_depol_single(params, rng);
        let lost = self.is_lost(a)? || self.is_lost(b)? || la || lb;
        if lost {
            self.remove(a)?;
            self.remove(b)?;
            return Ok(FuseMeasureOutcome::Located);
        }
        if !success {
            self.fuse_with(a, b, false)?;
            return Ok(FuseMeasureOutcome::Failure);
        }
        let m = self.fuse_with(a, b, true)?.expect("success branch");
        let z = self.z_error(m)? ^ pa.z_bit ^ pb.z_bit;
        self.node_mut(m)?.z = z;
        self.node_mut(m)?.measured = true;
        self.node_mut(m)?.terminal = true;
        Ok(FuseMeasureOutcome::Value { node: m, outcome: Outcome::from_flip(z) })
    }
}

impl<F: ZFlag> Graph for ClusterState<F> {
    fn contains(&self, node: NodeId) -> bool {
        self.is_live(node)
    }
    fn neighbors(&self, node: NodeId) -> Vec<NodeId> {
        self.node(node).map(|n| n.adj.clone()).unwrap_or_default()
    }
    fn node_order(&self) -> Vec<NodeId> {
        self.live_nodes().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{normalize_to_z, ErrorMask};

    #[test]
    fn bell_pair_noiseless() {
        let mut st = ClusterState::<bool>::new();
        let mut r = RandomStream::new(0);
        let (a, b) = st.new_bell_pair_noisy(&NoiseParams::noiseless(), &mut r);
        assert_eq!(st.neighbors_of(a).unwrap(), &[b]);
        assert!(!st.z_error(a).unwrap() && !st.z_error(b).unwrap());
    }

    #[test]
    fn x_on_bell_photon_becomes_partner_z() {
        let mut st = ClusterState::<bool>::new();
        let (a, b) = st.new_bell_pair();
        st.apply_pauli(a, Pauli::X).unwrap();
        assert!(!st.z_error(a).unwrap());
        assert!(st.z_error(b).unwrap());
    }

    #[test]
    fn incremental_matches_batch_normalization() {
        let mut st = ClusterState::<bool>::new();
        let n: Vec<_> = (0..4).map(|_| st.add_node()).collect();
        for w in n.windows(2) {
            st.add_edge(w[0], w[1]).unwrap();
        }
        let mask: ErrorMask = [(n[1], Pauli::Y), (n[3], Pauli::X)].into_iter().collect();
        let batch = normalize_to_z(&st, &mask).unwrap();
        for (k, p) in mask.iter() {
            st.apply_pauli(k, p).unwrap();
        }
        for &k in &n {
            assert_eq!(st.z_error(k).unwrap(), batch.get(k).z_bit);
        }
    }

    #[test]
    fn xor_rule_on_success() {
        for (za, zb) in [(false, false), (true, false), (false, true), (true, true)] {
            let mut st = ClusterState::<bool>::new();
            let (a, x) = st.new_bell_pair();
            let (b, y) = st.new_bell_pair();
            st.apply_pauli(a, Pauli::new(false, za)).unwrap();
            st.apply_pauli(b, Pauli::new(false, zb)).unwrap();
            let m = st.fuse_with(a, b, true).unwrap().unwrap();
            assert_eq!(st.z_error(m).unwrap(), za ^ zb);
            let mut nb = st.neighbors_of(m).unwrap().to_vec();
            nb.sort();
            assert_eq!(nb, vec![x, y]);
            st.check_integrity().unwrap();
        }
    }

    #[test]
    fn failure_removes_both() {
        let mut st = ClusterState::<bool>::new();
        let (a, x) = st.new_bell_pair();
        let (b, _) = st.new_bell_pair();
        assert_eq!(st.fuse_with(a, b, false).unwrap(), None);
        assert!(!st.is_live(a) && !st.is_live(b));
        assert!(st.neighbors_of(x).unwrap().is_empty());
        assert!(st.fuse_with(a, x, true).is_err());
    }

    #[test]
    fn success_rate_half() {
        let mut r = RandomStream::new(21);
        let p = NoiseParams::noiseless();
        let n = 1_000_000u64;
        let mut ok = 0u64;
        let mut st = ClusterState::<bool>::new();
        for _ in 0..n {
            let (a, _) = st.new_bell_pair();
            let (b, _) = st.new_bell_pair();
            if let FusionOutcome::Success(_) = st.fuse(a, b, &mut r, &p).unwrap() {
                ok += 1;
            }
        }
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((ok as f64 - n as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn loss_is_located() {
        let mut r = RandomStream::new(2);
        let p = NoiseParams::new(1.0, 0.0).unwrap();
        let mut st = ClusterState::<bool>::new();
        let (a, _) = st.new_bell_pair();
        let (b, _) = st.new_bell_pair();
        assert_eq!(st.fuse(a, b, &mut r, &p).unwrap(), FusionOutcome::LocatedLoss);
        let c = st.add_node();
        assert_eq!(st.measure_x(c, &mut r, &p).unwrap(), MeasureOutcome::Located);
        let (d, _) = st.new_bell_pair();
        let (e, _) = st.new_bell_pair();
        assert_eq!(st.fuse_and_measure(d, e, &mut r, &p).unwrap(), FuseMeasureOutcome::Located);
    }

    #[test]
    fn measurement_reports_flag() {
        let mut r = RandomStream::new(2);
        let p = NoiseParams::noiseless();
        let mut st = ClusterState::<bool>::new();
        let a = st.add_node();
        let b = st.add_node();
        st.apply_pauli(b, Pauli::Z).unwrap();
        assert_eq!(st.measure_x(a, &mut r, &p).unwrap(), MeasureOutcome::Value(Outcome::Plus));
        assert_eq!(st.measure_x(b, &mut r, &p).unwrap(), MeasureOutcome::Value(Outcome::Minus));
        assert!(st.measure_x(b, &mut r, &p).is_err());
    }

    #[test]
    fn fuse_and_measure_matches_two_step_noise() {
        // ε-only noise: the flip probability of the survivor equals the
        // composition of a pair draw with two single draws.
        let eps = 0.3;
        let p = NoiseParams::new(0.0, eps).unwrap();
        let mut r = RandomStream::new(9);
        let n = 400_000u64;
        let (mut succ, mut flips) = (0u64, 0u64);
        for _ in 0..n {
            let mut st = ClusterState::<bool>::new();
            let a = st.add_node();
            let b = st.add_node();
            if let FuseMeasureOutcome::Value { outcome, .. } = st.fuse_and_measure(a, b, &mut r, &p).unwrap() {
                succ += 1;
                flips += outcome.is_minus() as u64;
            }
        }
        // pair: z-parity odd for 8 of 15 non-identity pairs
        let q_pair = eps * 8.0 / 15.0;
        let q_single = eps * 2.0 / 3.0;
        let odd = |a: f64, b: f64| a * (1.0 - b) + b * (1.0 - a);
        let expected = odd(odd(q_pair, q_single), q_single);
        let observed = flips as f64 / succ as f64;
        let sigma = (expected * (1.0 - expected) / succ as f64).sqrt();
        assert!((observed - expected).abs() < 4.0 * sigma, "{observed} vs {expected}");
    }

    #[test]
    fn x_on_terminal_node_is_dropped() {
        let mut st = ClusterState::<bool>::new();
        let (a, b) = st.new_bell_pair();
        st.mark_terminal(a).unwrap();
        st.apply_pauli(a, Pauli::Y).unwrap();
        assert!(st.z_error(a).unwrap());
        assert!(!st.z_error(b).unwrap());
    }

    #[test]
    fn push_z_moves_flag() {
        let mut st = ClusterState::<bool>::new();
        let n: Vec<_> = (0..4).map(|_| st.add_node()).collect();
        for w in n.windows(2) {
            st.add_edge(w[0], w[1]).unwrap();
        }
        st.apply_pauli(n[1], Pauli::Z).unwrap();
        st.push_z(n[1], n[2]).unwrap();
        assert!(!st.z_error(n[1]).unwrap());
        assert!(st.z_error(n[3]).unwrap());
        assert!(st.push_z(n[0], n[3]).is_err());
    }
}
