//! The four-qubit error-detecting code: stabilizers `XXXX, ZZII, IIZZ`,
//! logicals `Z_L = ZIZI`, `X_L = XXII`.

use serde::{Deserialize, Serialize};

use crate::pauli::Pauli;

/// Four-qubit Pauli string, qubit 0 first.
pub type PauliString = [Pauli; 4];

pub const S1: PauliString = [Pauli::X, Pauli::X, Pauli::X, Pauli::X];
pub const S2: PauliString = [Pauli::Z, Pauli::Z, Pauli::I, Pauli::I];
pub const S3: PauliString = [Pauli::I, Pauli::I, Pauli::Z, Pauli::Z];
pub const STABILIZERS: [PauliString; 3] = [S1, S2, S3];
pub const LOGICAL_Z: PauliString = [Pauli::Z, Pauli::I, Pauli::Z, Pauli::I];
pub const LOGICAL_X: PauliString = [Pauli::X, Pauli::X, Pauli::I, Pauli::I];

/// Qubit `k` of one block meets qubit `CZ_PERMUTATION[k]` of the other in
/// the transversal encoded CPHASE.
pub const CZ_PERMUTATION: [usize; 4] = [0, 2, 1, 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DetectionMode {
    Strong,
    Weak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Residual {
    Detected,
    LogicalI,
    LogicalX,
    LogicalZ,
    LogicalY,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decoded {
    Value(bool),
    Located,
}

/// Readout pairs of the X_L measurement: qubits {0,1} and {2,3}.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LocatedPairs {
    pub pair12: bool,
    pub pair34: bool,
}

impl LocatedPairs {
    pub const NONE: LocatedPairs = LocatedPairs { pair12: false, pair34: false };

    pub fn any(self) -> bool {
        self.pair12 || self.pair34
    }

    /// Marks the pair containing qubit `k`.
    pub fn kill(&mut self, k: usize) {
        if k < 2 {
            self.pair12 = true;
        } else {
            self.pair34 = true;
        }
    }
}

pub fn string_anticommutes(a: &PauliString, b: &PauliString) -> bool {
    a.iter().zip(b).fold(false, |acc, (p, q)| acc ^ p.anticommutes(*q))
}

pub fn string_mul(a: &PauliString, b: &PauliString) -> PauliString {
    [a[0] * b[0], a[1] * b[1], a[2] * b[2], a[3] * b[3]]
}

/// Parity of four X outcomes given as flip flags (`true` = −1).
pub fn check_parity(flips: [bool; 4]) -> Parity {
    if flips.iter().fold(false, |a, &b| a ^ b) {
        Parity::Odd
    } else {
        Parity::Even
    }
}

/// Same as [`check_parity`] on ±1 values.
pub fn check_parity_values(values: [i8; 4]) -> Parity {
    if values.iter().map(|&v| v as i32).product::<i32>() > 0 {
        Parity::Even
    } else {
        Parity::Odd
    }
}

/// Decodes the encoded X_L readout from four outcome flips. Returns whether
/// the logical value is flipped.
pub fn decode_xl(flips: [bool; 4], located: LocatedPairs, mode: DetectionMode) -> Decoded {
    let v12 = flips[0] ^ flips[1];
    let v34 = flips[2] ^ flips[3];
    match mode {
        DetectionMode::Strong => {
            if located.any() || v12 != v34 {
                Decoded::Located
            } else {
                Decoded::Value(v12)
            }
        }
        DetectionMode::Weak => match (located.pair12, located.pair34) {
            (true, true) => Decoded::Located,
            (true, false) => Decoded::Value(v34),
            (false, true) => Decoded::Value(v12),
            (false, false) => {
                if v12 == v34 {
                    Decoded::Value(v12)
                } else {
                    Decoded::Located
                }
            }
        },
    }
}

/// Decodes ±1 values; `Located` or `Value(-1/+1)`.
pub fn decode_xl_values(values: [i8; 4], located: LocatedPairs, mode: DetectionMode) -> Option<i8> {
    let flips = values.map(|v| v < 0);
    match decode_xl(flips, located, mode) {
        Decoded::Located => None,
        Decoded::Value(f) => Some(if f { -1 } else { 1 }),
    }
}

/// Classifies a four-qubit Pauli string modulo the stabilizer group.
pub fn classify_residual(e: &PauliString) -> Residual {
    if STABILIZERS.iter().any(|s| string_anticommutes(e, s)) {
        return Residual::Detected;
    }
    let x = string_anticommutes(e, &LOGICAL_Z);
    let z = string_anticommutes(e, &LOGICAL_X);
    match (x, z) {
        (false, false) => Residual::LogicalI,
        (true, false) => Residual::LogicalX,
        (false, true) => Residual::LogicalZ,
        (true, true) => Residual::LogicalY,
    }
}

/// Z-only pattern on a block (bit k = qubit k): `Some(logical_z)` when it
/// commutes with `XXXX`, `None` when detectable.
pub fn classify_z_pattern(z: [bool; 4]) -> Option<bool> {
    if z.iter().filter(|&&b| b).count() % 2 == 1 {
        None
    } else {
        Some(z[0] ^ z[1])
    }
}

/// X-only pattern on a block: `Some(logical_x)` when it commutes with
/// `ZZII` and `IIZZ`.
pub fn classify_x_pattern(x: [bool; 4]) -> Option<bool> {
    if x[0] ^ x[1] || x[2] ^ x[3] {
        None
    } else {
        Some(x[0] ^ x[2])
    }
}

/// All 8 elements of the stabilizer group.
pub fn stabilizer_group() -> Vec<PauliString> {
    let id = [Pauli::I; 4];
    let mut out = Vec::with_capacity(8);
    for mask in 0..8u8 {
        let mut g = id;
        for (k, s) in STABILIZERS.iter().enumerate() {
            if mask >> k & 1 == 1 {
                g = string_mul(&g, s);
            }
        }
        out.push(g);
    }
    out
}

/// Single-qubit logical Pauli for a residual that is not detected.
pub fn residual_pauli(r: Residual) -> Option<Pauli> {
    match r {
        Residual::Detected => None,
        Residual::LogicalI => Some(Pauli::I),
        Residual::LogicalX => Some(Pauli::X),
        Residual::LogicalZ => Some(Pauli::Z),
        Residual::LogicalY => Some(Pauli::Y),
    }
}

/// Reduces a two-qubit logical error on an encoded Bell pair (stabilized by
/// `X⊗X` and `Z⊗Z`) to an equivalent error on the second qubit.
pub fn canonicalize_bell(first: Pauli, second: Pauli) -> Pauli {
    first * second
}

/// Amplitudes of the encoded basis states over 16 computational states,
/// qubit 0 as the most significant bit.
pub struct EncodedStates {
    pub zero: [f64; 16],
    pub one: [f64; 16],
    pub plus: [f64; 16],
    pub minus: [f64; 16],
}

pub fn encoded_states() -> EncodedStates {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut zero = [0.0; 16];
    let mut one = [0.0; 16];
    zero[0b0000] = h;
    zero[0b1111] = h;
    one[0b0011] = h;
    one[0b1100] = h;
    let mut plus = [0.0; 16];
    let mut minus = [0.0; 16];
    for i in 0..16 {
        plus[i] = (zero[i] + one[i]) * h;
        minus[i] = (zero[i] - one[i]) * h;
    }
    EncodedStates { zero, one, plus, minus }
}

/// Exhaustive checks of the code's detection and classification rules.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CodePropertyReport {
    pub weight_one_detected: usize,
    pub weight_one_total: usize,
    pub x1x2_logical_x: bool,
    pub stabilizers_logical_i: usize,
    pub stabilizer_group_size: usize,
}

impl CodePropertyReport {
    pub fn pass(&self) -> bool {
        self.weight_one_total == 12
            && self.weight_one_detected == 12
            && self.x1x2_logical_x
            && self.stabilizer_group_size == 8
            && self.stabilizers_logical_i == 8
    }
}

pub fn code_properties() -> CodePropertyReport {
    let mut r = CodePropertyReport::default();
    for k in 0..4 {
        for p in Pauli::NON_IDENTITY {
            let mut e = [Pauli::I; 4];
            e[k] = p;
            r.weight_one_total += 1;
            r.weight_one_detected += (classify_residual(&e) == Residual::Detected) as usize;
        }
    }
    r.x1x2_logical_x = classify_residual(&[Pauli::X, Pauli::X, Pauli::I, Pauli::I]) == Residual::LogicalX;
    let group = stabilizer_group();
    r.stabilizer_group_size = group.iter().enumerate().filter(|(i, g)| !group[..*i].contains(g)).count();
    r.stabilizers_logical_i = group.iter().filter(|g| classify_residual(g) == Residual::LogicalI).count();
    r
}
