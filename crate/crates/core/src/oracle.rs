//! Dense state-vector simulator for at most 16 qubits. It shares nothing
//! with the Z-flag engine and serves as ground truth in verification.

use num_complex::Complex64;

use crate::code::{self, PauliString, LOGICAL_X, LOGICAL_Z, STABILIZERS};
use crate::pauli::{Outcome, Pauli};
use crate::Error;

pub const MAX_QUBITS: usize = 16;
const TOL: f64 = 1e-12;

/// Qubit `q` is bit `q` of the basis index.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    PrepPlus(usize),
    Cphase(usize, usize),
    Hadamard(usize),
    Pauli(usize, Pauli),
}

impl StateVector {
    pub fn zeros(n: usize) -> Result<Self, Error> {
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits { max: MAX_QUBITS, requested: n });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    /// `|+>^{⊗n}`.
    pub fn plus(n: usize) -> Result<Self, Error> {
        let mut s = Self::zeros(n)?;
        let a = 1.0 / ((1usize << n) as f64).sqrt();
        s.amps.iter_mut().for_each(|x| *x = Complex64::new(a, 0.0));
        Ok(s)
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self, Error> {
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits { max: MAX_QUBITS, requested: n });
        }
        assert_eq!(amps.len(), 1 << n);
        Ok(StateVector { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Appends a qubit in `|+>` as the new highest index.
    pub fn append_plus(&mut self) -> Result<usize, Error> {
        if self.n + 1 > MAX_QUBITS {
            return Err(Error::TooManyQubits { max: MAX_QUBITS, requested: self.n + 1 });
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = Vec::with_capacity(self.amps.len() * 2);
        amps.extend(self.amps.iter().map(|a| a * h));
        amps.extend(self.amps.iter().map(|a| a * h));
        self.amps = amps;
        self.n += 1;
        Ok(self.n - 1)
    }

    /// Tensor product; `other`'s qubits get indices after ours.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector, Error> {
        let n = self.n + other.n;
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits { max: MAX_QUBITS, requested: n });
        }
        let mut amps = Vec::with_capacity(1 << n);
        for b in &other.amps {
            for a in &self.amps {
                amps.push(a * b);
            }
        }
        Ok(StateVector { n, amps })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn apply(&mut self, g: Gate) {
        match g {
            Gate::PrepPlus(q) => self.reset_plus(q),
            Gate::Cphase(a, b) => self.cphase(a, b),
            Gate::Hadamard(q) => self.hadamard(q),
            Gate::Pauli(q, p) => self.pauli(q, p),
        }
    }

    pub fn hadamard(&mut self, q: usize) {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bit = 1 << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = (a + b) * h;
                self.amps[i | bit] = (a - b) * h;
            }
        }
    }

    pub fn cphase(&mut self, a: usize, b: usize) {
        let m = (1 << a) | (1 << b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & m == m {
                *amp = -*amp;
            }
        }
    }

    pub fn pauli(&mut self, q: usize, p: Pauli) {
        let bit = 1 << q;
        if p.z_bit {
            for (i, amp) in self.amps.iter_mut().enumerate() {
                if i & bit != 0 {
                    *amp = -*amp;
                }
            }
        }
        if p.x_bit {
            for i in 0..self.amps.len() {
                if i & bit == 0 {
                    self.amps.swap(i, i | bit);
                }
            }
        }
    }

    pub fn pauli_string(&mut self, qubits: &[usize], s: &[Pauli]) {
        for (&q, &p) in qubits.iter().zip(s) {
            self.pauli(q, p);
        }
    }

    fn reset_plus(&mut self, q: usize) {
        // trace out by projecting onto |0>, then rotate to |+>
        let bit = 1 << q;
        for i in 0..self.amps.len() {
            if i & bit != 0 {
                let v = self.amps[i];
                self.amps[i ^ bit] += v;
                self.amps[i] = Complex64::new(0.0, 0.0);
            }
        }
        self.normalize();
        self.hadamard(q);
    }

    /// Drops qubit `q` keeping the component with bit value `v`.
    fn slice(&self, q: usize, v: usize) -> StateVector {
        let mut amps = Vec::with_capacity(self.amps.len() / 2);
        let low = (1 << q) - 1;
        for j in 0..self.amps.len() / 2 {
            let i = (j & low) | ((j & !low) << 1) | (v << q);
            amps.push(self.amps[i]);
        }
        StateVector { n: self.n - 1, amps }
    }

    /// Projects qubit `q` onto the X eigenstate for `outcome`, removes it and
    /// returns the unnormalized post-measurement state.
    pub fn project_x(&self, q: usize, outcome: Outcome) -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s0 = self.slice(q, 0);
        let s1 = self.slice(q, 1);
        let sign = if outcome.is_minus() { -1.0 } else { 1.0 };
        let amps = s0.amps.iter().zip(&s1.amps).map(|(a, b)| (a + b * sign) * h).collect();
        StateVector { n: self.n - 1, amps }
    }

    pub fn project_z(&self, q: usize, bit: bool) -> StateVector {
        self.slice(q, bit as usize)
    }

    /// Born-rule X measurement with a forced or sampled outcome; the result
    /// is normalized and the probability of the outcome returned.
    pub fn measure_x(&self, q: usize, forced: Outcome) -> (StateVector, f64) {
        let mut s = self.project_x(q, forced);
        let p = s.norm_sqr() / self.norm_sqr();
        s.normalize();
        (s, p)
    }

    /// Successful type-I fusion of `a` and `b`: `|00>→|0>`, `|11>→|1>`; the
    /// survivor keeps index `min(a, b)` and the other index is removed.
    pub fn fuse_success(&self, a: usize, b: usize) -> StateVector {
        let (keep, drop) = if a < b { (a, b) } else { (b, a) };
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len() / 2];
        let low = (1 << drop) - 1;
        for (j, out) in amps.iter_mut().enumerate() {
            let v = (j >> keep) & 1;
            let i = (j & low) | ((j & !low) << 1) | (v << drop);
            *out = self.amps[i];
        }
        StateVector { n: self.n - 1, amps }
    }

    /// Same projection as [`fuse_success`](Self::fuse_success) but `b` stays
    /// in the register, left in `|0>`.
    pub fn fuse_in_place(&mut self, a: usize, b: usize) {
        let (ma, mb) = (1usize << a, 1usize << b);
        for i in 0..self.amps.len() {
            let (xa, xb) = (i & ma != 0, i & mb != 0);
            if xa != xb {
                self.amps[i] = Complex64::new(0.0, 0.0);
            } else if xa {
                self.amps[i & !mb] = self.amps[i];
                self.amps[i] = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Expectation of a Pauli string on the given qubits.
    pub fn expectation(&self, qubits: &[usize], s: &[Pauli]) -> f64 {
        let mut t = self.clone();
        t.pauli_string(qubits, s);
        // Y = XZ up to the phase i; restore it so the value is real
        let ys = s.iter().filter(|p| p.x_bit && p.z_bit).count();
        let phase = match ys % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        (self.inner(&t) * phase).re / self.norm_sqr()
    }

    /// True iff `other = c · self` for some complex `c` with both nonzero.
    pub fn proportional(&self, other: &StateVector) -> bool {
        let (na, nb) = (self.norm_sqr(), other.norm_sqr());
        if na < TOL || nb < TOL {
            return na < TOL && nb < TOL;
        }
        let ov = self.inner(other).norm_sqr();
        (ov - na * nb).abs() <= 1e-9 * na * nb
    }
}

fn from_real(a: &[f64; 16]) -> StateVector {
    StateVector { n: 4, amps: a.iter().map(|&x| Complex64::new(x, 0.0)).collect() }
}

/// Qubit `k` of a 4-qubit block is bit `3-k`, so that amplitude tables read
/// qubit 0 as the most significant bit.
pub fn block_qubits() -> [usize; 4] {
    [3, 2, 1, 0]
}

/// Encoded basis state as a 4-qubit vector.
pub fn encoded(which: char) -> StateVector {
    let e = code::encoded_states();
    match which {
        '0' => from_real(&e.zero),
        '1' => from_real(&e.one),
        '+' => from_real(&e.plus),
        _ => from_real(&e.minus),
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EncodedStateReport {
    pub checks: usize,
    pub failures: Vec<String>,
}

impl EncodedStateReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn verify_encoded_states() -> EncodedStateReport {
    let mut rep = EncodedStateReport::default();
    let q = block_qubits();
    let mut check = |ok: bool, what: String| {
        rep.checks += 1;
        if !ok {
            rep.failures.push(what);
        }
    };
    for w in ['0', '1', '+', '-'] {
        let s = encoded(w);
        check((s.norm_sqr() - 1.0).abs() < TOL, format!("norm of |{w}>_L"));
        for (k, st) in STABILIZERS.iter().enumerate() {
            let e = s.expectation(&q, st);
            check((e - 1.0).abs() < TOL, format!("S{} on |{w}>_L = {e}", k + 1));
        }
    }
    let apply = |which: char, op: &PauliString| {
        let mut s = encoded(which);
        s.pauli_string(&q, op);
        s
    };
    let close = |a: &StateVector, b: &StateVector| a.amps.iter().zip(&b.amps).all(|(x, y)| (x - y).norm() < TOL);
    check(close(&apply('0', &LOGICAL_X), &encoded('1')), "X_L|0> = |1>".into());
    check(close(&apply('1', &LOGICAL_X), &encoded('0')), "X_L|1> = |0>".into());
    check(close(&apply('0', &LOGICAL_Z), &encoded('0')), "Z_L|0> = |0>".into());
    let mut minus_one = encoded('1');
    minus_one.amps.iter_mut().for_each(|a| *a = -*a);
    check(close(&apply('1', &LOGICAL_Z), &minus_one), "Z_L|1> = -|1>".into());
    check(close(&apply('+', &LOGICAL_Z), &encoded('-')), "Z_L|+> = |->".into());
    // |+>_L as the product of Bell pairs (|00>+|11>) on (0,1) and (2,3)
    let mut bell = StateVector::zeros(4).expect("4 qubits");
    let b = 0.5;
    for i in [0b0000usize, 0b0011, 0b1100, 0b1111] {
        bell.amps[i] = Complex64::new(b, 0.0);
    }
    check(close(&bell, &encoded('+')), "|+>_L is two Bell pairs".into());
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_limit() {
        assert!(StateVector::zeros(17).is_err());
        assert!(StateVector::zeros(16).is_ok());
    }

    #[test]
    fn cluster_identity_transfer() {
        let mut s = StateVector::plus(2).unwrap();
        s.cphase(0, 1);
        let (after, p) = s.measure_x(0, Outcome::Plus);
        assert!((p - 0.5).abs() < TOL);
        // one-way transfer applies H: the survivor is H|+> = |0>
        let mut plus = StateVector::plus(1).unwrap();
        plus.hadamard(0);
        assert!(after.proportional(&plus));
    }

    #[test]
    fn gates_preserve_norm() {
        let mut s = StateVector::plus(5).unwrap();
        s.cphase(0, 3);
        s.hadamard(2);
        s.pauli(4, Pauli::Y);
        s.cphase(1, 2);
        s.hadamard(0);
        assert!((s.norm_sqr() - 1.0).abs() < TOL);
        s.apply(Gate::PrepPlus(1));
        assert!((s.norm_sqr() - 1.0).abs() < TOL);
    }

    #[test]
    fn fusion_keeps_coherence() {
        // (|00>+|11>) on (0,1) and (|00>+|11>) on (2,3); fuse 1 and 2
        let mut s = StateVector::zeros(4).unwrap();
        for i in [0b0000usize, 0b0011, 0b1100, 0b1111] {
            s.amps[i] = Complex64::new(0.5, 0.0);
        }
        let f = s.fuse_success(1, 2);
        // expect a 3-qubit GHZ state on the remaining qubits
        let mut ghz = StateVector::zeros(3).unwrap();
        ghz.amps[0] = Complex64::new(1.0, 0.0);
        ghz.amps[7] = Complex64::new(1.0, 0.0);
        assert!(f.proportional(&ghz));
    }

    #[test]
    fn cphase_conjugation_oracle() {
        // (Y ⊗ I) CZ = CZ (Y ⊗ Z)
        let mut a = StateVector::plus(2).unwrap();
        a.hadamard(0);
        a.pauli(1, Pauli::X);
        let mut lhs = a.clone();
        lhs.pauli(0, Pauli::Y);
        lhs.cphase(0, 1);
        let mut rhs = a.clone();
        rhs.cphase(0, 1);
        rhs.pauli(0, Pauli::Y);
        rhs.pauli(1, Pauli::Z);
        assert!(lhs.proportional(&rhs));
    }

    #[test]
    fn encoded_states_verify() {
        let r = verify_encoded_states();
        assert!(r.passed(), "{:?}", r.failures);
        assert!(r.checks >= 20);
    }
}
