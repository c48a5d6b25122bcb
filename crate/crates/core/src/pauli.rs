//! Single-qubit Paulis modulo phase, sparse error masks and the rule that
//! rewrites X components on a graph state as Z errors on neighbours.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, NodeId};

/// Pauli operator with the global phase dropped. `I=00, X=10, Z=01, Y=11`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pauli {
    pub x_bit: bool,
    pub z_bit: bool,
}

impl Pauli {
    pub const I: Pauli = Pauli { x_bit: false, z_bit: false };
    pub const X: Pauli = Pauli { x_bit: true, z_bit: false };
    pub const Z: Pauli = Pauli { x_bit: false, z_bit: true };
    pub const Y: Pauli = Pauli { x_bit: true, z_bit: true };
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    pub const NON_IDENTITY: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub const fn new(x_bit: bool, z_bit: bool) -> Self {
        Pauli { x_bit, z_bit }
    }

    pub fn is_identity(self) -> bool {
        !self.x_bit && !self.z_bit
    }

    /// Two Paulis anticommute iff the symplectic product is odd.
    pub fn anticommutes(self, other: Pauli) -> bool {
        (self.x_bit & other.z_bit) ^ (self.z_bit & other.x_bit)
    }

    pub fn symbol(self) -> char {
        match (self.x_bit, self.z_bit) {
            (false, false) => 'I',
            (true, false) => 'X',
            (false, true) => 'Z',
            (true, true) => 'Y',
        }
    }
}

impl std::ops::Mul for Pauli {
    type Output = Pauli;
    fn mul(self, rhs: Pauli) -> Pauli {
        compose(self, rhs)
    }
}

impl std::ops::MulAssign for Pauli {
    fn mul_assign(&mut self, rhs: Pauli) {
        *self = compose(*self, rhs);
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

pub fn compose(a: Pauli, b: Pauli) -> Pauli {
    Pauli::new(a.x_bit ^ b.x_bit, a.z_bit ^ b.z_bit)
}

/// Moves a pair of errors from before a CPHASE to after it.
pub fn conjugate_through_cphase(err_control: Pauli, err_target: Pauli) -> (Pauli, Pauli) {
    (
        Pauli::new(err_control.x_bit, err_control.z_bit ^ err_target.x_bit),
        Pauli::new(err_target.x_bit, err_target.z_bit ^ err_control.x_bit),
    )
}

/// Measurement outcome in the X basis, `+1` or `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn from_flip(flipped: bool) -> Self {
        if flipped {
            Outcome::Minus
        } else {
            Outcome::Plus
        }
    }

    pub fn is_minus(self) -> bool {
        self == Outcome::Minus
    }

    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn negate(self) -> Self {
        Outcome::from_flip(!self.is_minus())
    }
}

/// Only X-basis readout appears in the detection circuits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    X,
}

/// Applies the frame to a raw X-basis outcome.
pub fn interpret_measurement(raw: Outcome, frame: Pauli, basis: Basis) -> Outcome {
    match basis {
        Basis::X => {
            if frame.z_bit {
                raw.negate()
            } else {
                raw
            }
        }
    }
}

/// Sparse node → Pauli map; missing nodes carry identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorMask {
    entries: BTreeMap<NodeId, Pauli>,
}

/// Frame corrections owed to nodes. Same layout as an error mask but never
/// applied to the state.
pub type PauliFrame = ErrorMask;

impl ErrorMask {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, node: NodeId) -> Pauli {
        self.entries.get(&node).copied().unwrap_or(Pauli::I)
    }

    /// Multiplies `p` into the entry for `node`.
    pub fn apply(&mut self, node: NodeId, p: Pauli) {
        let next = self.get(node) * p;
        if next.is_identity() {
            self.entries.remove(&node);
        } else {
            self.entries.insert(node, next);
        }
    }

    pub fn set(&mut self, node: NodeId, p: Pauli) {
        if p.is_identity() {
            self.entries.remove(&node);
        } else {
            self.entries.insert(node, p);
        }
    }

    pub fn remove(&mut self, node: NodeId) {
        self.entries.remove(&node);
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, Pauli)> + '_ {
        self.entries.iter().map(|(&n, &p)| (n, p))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_z_only(&self) -> bool {
        self.entries.values().all(|p| !p.x_bit)
    }
}

impl FromIterator<(NodeId, Pauli)> for ErrorMask {
    fn from_iter<T: IntoIterator<Item = (NodeId, Pauli)>>(iter: T) -> Self {
        let mut m = ErrorMask::new();
        for (n, p) in iter {
            m.apply(n, p);
        }
        m
    }
}

/// Read access to a graph, enough to apply the stabilizer `X_v Z_{N(v)}`.
pub trait Graph {
    fn contains(&self, node: NodeId) -> bool;
    fn neighbors(&self, node: NodeId) -> Vec<NodeId>;
    /// Nodes in construction order.
    fn node_order(&self) -> Vec<NodeId>;
}

/// Rewrites every X component as Z errors on the neighbours, using
/// `X_v |G> = Z_{N(v)} |G>`.
pub fn normalize_to_z<G: Graph>(graph: &G, errors: &ErrorMask) -> Result<ErrorMask, Error> {
    for (n, _) in errors.iter() {
        if !graph.contains(n) {
            return Err(Error::UnknownNode(n));
        }
    }
    let mut out = ErrorMask::new();
    for n in graph.node_order() {
        let p = errors.get(n);
        if p.z_bit {
            out.apply(n, Pauli::Z);
        }
        if p.x_bit {
            for m in graph.neighbors(n) {
                out.apply(m, Pauli::Z);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Line(u32);

    impl Graph for Line {
        fn contains(&self, node: NodeId) -> bool {
            node < self.0
        }
        fn neighbors(&self, node: NodeId) -> Vec<NodeId> {
            let mut v = Vec::new();
            if node > 0 {
                v.push(node - 1);
            }
            if node + 1 < self.0 {
                v.push(node + 1);
            }
            v
        }
        fn node_order(&self) -> Vec<NodeId> {
            (0..self.0).collect()
        }
    }

    #[test]
    fn compose_examples() {
        assert_eq!(compose(Pauli::X, Pauli::Z), Pauli::Y);
        assert_eq!(compose(Pauli::Z, Pauli::Z), Pauli::I);
        assert_eq!(compose(Pauli::I, Pauli::Y), Pauli::Y);
    }

    #[test]
    fn group_law_table() {
        for a in Pauli::ALL {
            assert_eq!(a * a, Pauli::I);
            for b in Pauli::ALL {
                assert_eq!(a * b, b * a);
                for c in Pauli::ALL {
                    assert_eq!((a * b) * c, a * (b * c));
                }
            }
        }
    }

    #[test]
    fn cphase_conjugation() {
        assert_eq!(conjugate_through_cphase(Pauli::X, Pauli::I), (Pauli::X, Pauli::Z));
        assert_eq!(conjugate_through_cphase(Pauli::Z, Pauli::Z), (Pauli::Z, Pauli::Z));
        assert_eq!(conjugate_through_cphase(Pauli::Y, Pauli::I), (Pauli::Y, Pauli::Z));
        assert_eq!(conjugate_through_cphase(Pauli::Y, Pauli::X), (Pauli::X, Pauli::Y));
    }

    #[test]
    fn measurement_interpretation() {
        assert_eq!(interpret_measurement(Outcome::Plus, Pauli::I, Basis::X), Outcome::Plus);
        assert_eq!(interpret_measurement(Outcome::Plus, Pauli::Z, Basis::X), Outcome::Minus);
        assert_eq!(interpret_measurement(Outcome::Minus, Pauli::Y, Basis::X), Outcome::Plus);
        assert_eq!(interpret_measurement(Outcome::Minus, Pauli::X, Basis::X), Outcome::Minus);
    }

    #[test]
    fn normalize_examples() {
        let two = Line(2);
        let m: ErrorMask = [(0, Pauli::X)].into_iter().collect();
        let n = normalize_to_z(&two, &m).unwrap();
        assert_eq!(n.get(0), Pauli::I);
        assert_eq!(n.get(1), Pauli::Z);

        let three = Line(3);
        let m: ErrorMask = [(1, Pauli::Y)].into_iter().collect();
        let n = normalize_to_z(&three, &m).unwrap();
        assert!(n.is_z_only());
        assert_eq!(n.len(), 3);

        let z: ErrorMask = [(0, Pauli::Z), (2, Pauli::Z)].into_iter().collect();
        assert_eq!(normalize_to_z(&three, &z).unwrap(), z);
    }

    #[test]
    fn normalize_rejects_unknown_nodes() {
        let m: ErrorMask = [(9, Pauli::X)].into_iter().collect();
        assert!(normalize_to_z(&Line(3), &m).is_err());
    }

    #[test]
    fn mask_drops_identity_entries() {
        let mut m = ErrorMask::new();
        m.apply(3, Pauli::X);
        m.apply(3, Pauli::X);
        assert!(m.is_empty());
    }
}
