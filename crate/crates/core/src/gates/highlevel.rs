//! Level ≥2 gates as circuits of level-(ℓ−1) operations. Each lower-level
//! operation is a single draw from its estimated rates, a CPHASE is two
//! independent memory draws followed by an ideal CPHASE, and errors are
//! tracked as a Pauli frame over the three blocks `in`, `A` and `C`.

use crate::code::{canonicalize_bell, classify_x_pattern, decode_xl, Decoded, DetectionMode, LocatedPairs, CZ_PERMUTATION};
use crate::gates::level1::GateSample;
use crate::gates::{ConcatMethod, GateKind, GateOutcome};
use crate::pauli::{conjugate_through_cphase, Pauli};
use crate::rng::RandomStream;
use crate::Error;

/// Source of level-(ℓ−1) error draws.
pub trait LowerLevel {
    /// Residual Pauli of one execution, or `None` when located. For a Bell
    /// preparation the residual sits on the second qubit.
    fn draw(&self, kind: GateKind, mode: DetectionMode, rng: &mut RandomStream) -> Option<Pauli>;

    fn located_rate(&self, kind: GateKind, mode: DetectionMode) -> f64;

    /// A draw conditioned on not being located.
    fn draw_unlocated(&self, kind: GateKind, mode: DetectionMode, rng: &mut RandomStream) -> Pauli;
}

pub type Block = [Pauli; 4];

/// Encoded-level CPHASE acting on a pair of error Paulis.
pub fn cphase_propagate(e_a: Pauli, e_b: Pauli) -> (Pauli, Pauli) {
    conjugate_through_cphase(e_a, e_b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HighLevel {
    pub level: u32,
    pub method: ConcatMethod,
    pub l_c: u32,
    /// Accepted memory rounds before a sampled gate.
    pub burn_in: u32,
}

/// Circuit shape of a level-ℓ gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    /// Ancilla including the A-side measurements is filtered before the
    /// input arrives.
    Delayed,
    /// Lower-level gates in plain time order.
    Normal,
}

fn pairs() -> [(usize, usize); 2] {
    [(0, 1), (2, 3)]
}

fn z_bits(b: &Block) -> [bool; 4] {
    std::array::from_fn(|j| b[j].z_bit)
}

fn x_bits(b: &Block) -> [bool; 4] {
    std::array::from_fn(|j| b[j].x_bit)
}

/// Removes logical X/Z from an output block; what stays is detectable by
/// the next round.
fn settle_block(b: &mut Block) -> Pauli {
    let z = z_bits(b);
    let lz = crate::code::classify_z_pattern(z) == Some(true);
    if lz {
        b[0] *= Pauli::Z;
        b[2] *= Pauli::Z;
    }
    let lx = classify_x_pattern(x_bits(b)) == Some(true);
    if lx {
        b[0] *= Pauli::X;
        b[1] *= Pauli::X;
    }
    Pauli::new(lx, lz)
}

fn apply_logical_z(b: &mut Block) {
    b[0] *= Pauli::Z;
    b[2] *= Pauli::Z;
}

fn apply_logical_x(b: &mut Block) {
    b[0] *= Pauli::X;
    b[1] *= Pauli::X;
}

/// Readout side of one transfer: flips of the input and A readouts plus
/// the pairs killed by located draws.
#[derive(Clone, Copy, Debug, Default)]
struct Readouts {
    input: [bool; 4],
    a: [bool; 4],
    in_loc: LocatedPairs,
    a_loc: LocatedPairs,
}

impl Readouts {
    fn kill(&mut self, i: usize) {
        self.in_loc.kill(i);
        self.a_loc.kill(CZ_PERMUTATION[i]);
    }

    fn any_located(&self) -> bool {
        self.in_loc.any() || self.a_loc.any()
    }

    fn decode(&self, mode: DetectionMode) -> Option<(bool, bool)> {
        match (decode_xl(self.input, self.in_loc, mode), decode_xl(self.a, self.a_loc, mode)) {
            (Decoded::Value(i), Decoded::Value(a)) => Some((i, a)),
            _ => None,
        }
    }
}

/// Ancilla blocks after the preparation stage.
struct Ancilla {
    a: Block,
    c: Block,
    /// A-side measurement flips (delayed form only).
    a_meas: [bool; 4],
    /// C-side measurement flips (measurement gate only).
    c_meas: [bool; 4],
}

impl HighLevel {
    pub fn new(level: u32, method: ConcatMethod, l_c: u32) -> Result<Self, Error> {
        if level < 2 {
            return Err(Error::Config(format!("circuit gates start at level 2, got {level}")));
        }
        Ok(HighLevel { level, method, l_c, burn_in: 1 })
    }

    pub fn form(&self) -> Form {
        if self.level <= self.l_c {
            Form::Delayed
        } else {
            Form::Normal
        }
    }

    /// Detection mode of the lower-level ancilla operations.
    pub fn ancilla_mode(&self) -> DetectionMode {
        match (self.method, self.level) {
            (ConcatMethod::Method2, 2) => DetectionMode::Weak,
            _ => DetectionMode::Strong,
        }
    }

    /// Lower-level entries this gate draws from.
    pub fn requirements(&self, kind: GateKind) -> Result<Vec<(GateKind, DetectionMode)>, Error> {
        let am = self.ancilla_mode();
        let w = DetectionMode::Weak;
        let mut out = vec![(GateKind::BellPrep, am), (GateKind::Memory, am)];
        match kind {
            GateKind::BellPrep => out.push((GateKind::MeasurementX, am)),
            GateKind::Memory | GateKind::MeasurementX | GateKind::DelayedMeasurement(_) => {
                let delay = match kind {
                    GateKind::DelayedMeasurement(n) => n as u32,
                    _ => 0,
                };
                if kind == GateKind::MeasurementX || self.form() == Form::Delayed {
                    out.push((GateKind::MeasurementX, am));
                }
                match self.form() {
                    Form::Delayed => {
                        if self.level + delay > self.l_c {
                            return Err(Error::Config(format!(
                                "delay {delay} at level {} exceeds the delayed-fusion depth l_c = {}",
                                self.level, self.l_c
                            )));
                        }
                        out.push((GateKind::DelayedMeasurement(delay as u8 + 1), w));
                    }
                    Form::Normal => {
                        if delay > 0 {
                            return Err(Error::Config("delayed gates exist only below l_c".into()));
                        }
                        out.push((GateKind::Memory, w));
                        out.push((GateKind::MeasurementX, w));
                    }
                }
            }
            GateKind::Cphase | GateKind::CphasePlusMeasurement => {
                return Err(Error::Config("level ≥2 CPHASE is sampled as a composite of memory draws".into()))
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn sample<L: LowerLevel>(&self, kind: GateKind, lower: &L, rng: &mut RandomStream) -> Result<GateSample, Error> {
        match kind {
            GateKind::Memory => {
                let input = self.steady_input(lower, rng);
                Ok(self.memory_round(&input, 0, lower, rng).0)
            }
            GateKind::DelayedMeasurement(n) => {
                let input = self.steady_input(lower, rng);
                Ok(self.memory_round(&input, n as usize, lower, rng).0)
            }
            GateKind::MeasurementX => {
                let input = self.steady_input(lower, rng);
                Ok(self.measurement(&input, lower, rng))
            }
            GateKind::BellPrep => Ok(self.bell(lower, rng)),
            GateKind::Cphase | GateKind::CphasePlusMeasurement => {
                Err(Error::Config("level ≥2 CPHASE is sampled with composite_sample".into()))
            }
        }
    }

    /// Frame after `burn_in` accepted memory rounds from a clean input.
    pub fn steady_input<L: LowerLevel>(&self, lower: &L, rng: &mut RandomStream) -> Block {
        let mut input = [Pauli::I; 4];
        for _ in 0..self.burn_in {
            for _ in 0..10_000 {
                if let (_, Some(c)) = self.memory_round(&input, 0, lower, rng) {
                    input = c;
                    break;
                }
            }
        }
        input
    }

    /// Preparation attempts thrown away by located draws before the first
    /// attempt in which none of `ops` is located. The accepted attempt is
    /// then drawn conditioned on no located error, which has the same
    /// distribution as redrawing everything.
    fn located_restarts<L: LowerLevel>(&self, ops: &[(GateKind, i32)], lower: &L, rng: &mut RandomStream) -> u64 {
        let am = self.ancilla_mode();
        let p: f64 = ops.iter().map(|&(k, c)| (1.0 - lower.located_rate(k, am)).powi(c)).product();
        rng.geometric_failures(p)
    }

    /// Bell pairs on both halves of a block; residuals land on the second
    /// qubit of each pair.
    fn bell_block<L: LowerLevel>(&self, b: &mut Block, lower: &L, rng: &mut RandomStream) {
        for (_, second) in pairs() {
            b[second] *= lower.draw_unlocated(GateKind::BellPrep, self.ancilla_mode(), rng);
        }
    }

    /// CPHASE between `x` and `y` as independent memory draws then an ideal
    /// gate.
    fn cphase<L: LowerLevel>(&self, x: &mut Pauli, y: &mut Pauli, lower: &L, rng: &mut RandomStream) {
        let am = self.ancilla_mode();
        let ex = lower.draw_unlocated(GateKind::Memory, am, rng);
        let ey = lower.draw_unlocated(GateKind::Memory, am, rng);
        let (nx, ny) = cphase_propagate(*x * ex, *y * ey);
        *x = nx;
        *y = ny;
    }

    fn measure_unlocated<L: LowerLevel>(&self, lower: &L, rng: &mut RandomStream) -> bool {
        lower.draw_unlocated(GateKind::MeasurementX, self.ancilla_mode(), rng).z_bit
    }

    fn measure<L: LowerLevel>(&self, mode: DetectionMode, lower: &L, rng: &mut RandomStream) -> Option<bool> {
        lower.draw(GateKind::MeasurementX, mode, rng).map(|p| p.z_bit)
    }

    /// Preparation stage, repeated until no draw is located and the C
    /// parity (when read out) is even. Returns the ancilla and the number
    /// of restarts.
    fn ancilla<L: LowerLevel>(&self, measure_c: bool, lower: &L, rng: &mut RandomStream) -> (Ancilla, u64) {
        let delayed = self.form() == Form::Delayed;
        let n_meas = 4 * (delayed as i32 + measure_c as i32);
        let ops = [(GateKind::BellPrep, 4), (GateKind::Memory, 8), (GateKind::MeasurementX, n_meas)];
        let mut restarts = 0u64;
        loop {
            restarts = restarts.saturating_add(self.located_restarts(&ops, lower, rng));
            let mut anc = Ancilla { a: [Pauli::I; 4], c: [Pauli::I; 4], a_meas: [false; 4], c_meas: [false; 4] };
            self.bell_block(&mut anc.a, lower, rng);
            self.bell_block(&mut anc.c, lower, rng);
            for j in 0..4 {
                let k = CZ_PERMUTATION[j];
                let (mut x, mut y) = (anc.a[j], anc.c[k]);
                self.cphase(&mut x, &mut y, lower, rng);
                anc.a[j] = x;
                anc.c[k] = y;
            }
            if delayed {
                for j in 0..4 {
                    anc.a_meas[j] = self.measure_unlocated(lower, rng);
                }
            }
            if measure_c {
                for j in 0..4 {
                    anc.c_meas[j] = self.measure_unlocated(lower, rng) ^ anc.c[j].z_bit;
                }
                if anc.c_meas.iter().fold(false, |a, &b| a ^ b) {
                    restarts = restarts.saturating_add(1);
                    continue;
                }
            }
            return (anc, restarts);
        }
    }

    /// Data part: the input meets A, then input and A are read out.
    fn data<L: LowerLevel>(&self, input: &Block, anc: &mut Ancilla, delay: usize, lower: &L, rng: &mut RandomStream) -> Readouts {
        let w = DetectionMode::Weak;
        let mut r = Readouts::default();
        let mut a_err = anc.a;
        for i in 0..4 {
            let k = CZ_PERMUTATION[i];
            let mut e_in = input[i];
            let mut located = false;
            match self.form() {
                Form::Delayed => match lower.draw(GateKind::DelayedMeasurement(delay as u8 + 1), w, rng) {
                    Some(p) => e_in *= p,
                    None => located = true,
                },
                Form::Normal => match lower.draw(GateKind::Memory, w, rng) {
                    Some(p) => e_in *= p,
                    None => located = true,
                },
            }
            let (pi, pa) = cphase_propagate(e_in, a_err[k]);
            a_err[k] = pa;
            r.input[i] = pi.z_bit;
            if self.form() == Form::Normal {
                for target in [&mut r.input[i], &mut r.a[k]] {
                    match self.measure(w, lower, rng) {
                        Some(f) => *target ^= f,
                        None => located = true,
                    }
                }
            }
            if located {
                r.kill(i);
            }
        }
        for j in 0..4 {
            r.a[j] ^= a_err[j].z_bit ^ anc.a_meas[j];
        }
        r
    }

    /// One memory round; the second value is the output frame when the
    /// weak decoding accepts.
    pub fn memory_round<L: LowerLevel>(
        &self,
        input: &Block,
        delay: usize,
        lower: &L,
        rng: &mut RandomStream,
    ) -> (GateSample, Option<Block>) {
        let (mut anc, restarts) = self.ancilla(false, lower, rng);
        let r = self.data(input, &mut anc, delay, lower, rng);
        let mut out = [GateOutcome::Located; 2];
        let mut carry = None;
        for (m, mode) in [DetectionMode::Strong, DetectionMode::Weak].into_iter().enumerate() {
            if let Some((vi, va)) = r.decode(mode) {
                let mut c = anc.c;
                if vi {
                    apply_logical_z(&mut c);
                }
                if va {
                    apply_logical_x(&mut c);
                }
                let p = settle_block(&mut c);
                out[m] = GateOutcome::Unlocated([p, Pauli::I]);
                if mode == DetectionMode::Weak {
                    carry = Some(c);
                }
            }
        }
        (GateSample { strong: out[0], weak: out[1], restarts, data_located: r.any_located() }, carry)
    }

    /// Measurement: the memory circuit with C read out in the ancilla and
    /// filtered on its parity. The result flip is the Z bit; the A value is
    /// reported as the X bit.
    pub fn measurement<L: LowerLevel>(&self, input: &Block, lower: &L, rng: &mut RandomStream) -> GateSample {
        let (mut anc, restarts) = self.ancilla(true, lower, rng);
        let r = self.data(input, &mut anc, 0, lower, rng);
        let mut out = [GateOutcome::Located; 2];
        for (m, mode) in [DetectionMode::Strong, DetectionMode::Weak].into_iter().enumerate() {
            if let (Some((vi, va)), Decoded::Value(vc)) = (r.decode(mode), decode_xl(anc.c_meas, LocatedPairs::NONE, mode)) {
                out[m] = GateOutcome::Unlocated([Pauli::new(va, vi ^ vc), Pauli::I]);
            }
        }
        GateSample { strong: out[0], weak: out[1], restarts, data_located: r.any_located() }
    }

    /// Bell preparation from three |+⟩_L blocks P, M, Q with M read out and
    /// filtered; the residual is canonicalized onto Q.
    pub fn bell<L: LowerLevel>(&self, lower: &L, rng: &mut RandomStream) -> GateSample {
        let ops = [(GateKind::BellPrep, 6), (GateKind::Memory, 16), (GateKind::MeasurementX, 4)];
        let mut restarts = 0u64;
        loop {
            restarts = restarts.saturating_add(self.located_restarts(&ops, lower, rng));
            let mut blocks = [[Pauli::I; 4]; 3];
            for b in blocks.iter_mut() {
                self.bell_block(b, lower, rng);
            }
            for (x, y) in [(0usize, 1usize), (1, 2)] {
                for j in 0..4 {
                    let k = CZ_PERMUTATION[j];
                    let (mut ex, mut ey) = (blocks[x][j], blocks[y][k]);
                    self.cphase(&mut ex, &mut ey, lower, rng);
                    blocks[x][j] = ex;
                    blocks[y][k] = ey;
                }
            }
            let m: [bool; 4] = std::array::from_fn(|j| self.measure_unlocated(lower, rng) ^ blocks[1][j].z_bit);
            if m.iter().fold(false, |a, &b| a ^ b) {
                restarts = restarts.saturating_add(1);
                continue;
            }
            let [p, _, q] = blocks;
            let mut out = [GateOutcome::Located; 2];
            for (i, mode) in [DetectionMode::Strong, DetectionMode::Weak].into_iter().enumerate() {
                if let Decoded::Value(vm) = decode_xl(m, LocatedPairs::NONE, mode) {
                    let mut pp = p;
                    if vm {
                        apply_logical_x(&mut pp);
                    }
                    let first = settle_block(&mut pp);
                    let mut qq = q;
                    let second = settle_block(&mut qq);
                    out[i] = GateOutcome::Unlocated([canonicalize_bell(first, second), Pauli::I]);
                }
            }
            return GateSample { strong: out[0], weak: out[1], restarts, data_located: false };
        }
    }
}

/// CPHASE under the independence approximation: each input independently
/// draws the error of `kinds[i]` at the given mode, then an ideal CPHASE
/// propagates them.
pub fn composite_sample<L: LowerLevel>(
    kinds: [GateKind; 2],
    mode: DetectionMode,
    lower: &L,
    rng: &mut RandomStream,
) -> GateOutcome {
    let (Some(a), Some(b)) = (lower.draw(kinds[0], mode, rng), lower.draw(kinds[1], mode, rng)) else {
        return GateOutcome::Located;
    };
    let (a, b) = cphase_propagate(a, b);
    GateOutcome::Unlocated([a, b])
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Lower level that never errs, or is located with a fixed rate.
    struct Fixed {
        q: f64,
        p: Pauli,
        p_rate: f64,
    }

    impl LowerLevel for Fixed {
        fn draw(&self, _kind: GateKind, _mode: DetectionMode, rng: &mut RandomStream) -> Option<Pauli> {
            if rng.uniform() < self.q {
                None
            } else if rng.uniform() < self.p_rate {
                Some(self.p)
            } else {
                Some(Pauli::I)
            }
        }

        fn located_rate(&self, _kind: GateKind, _mode: DetectionMode) -> f64 {
            self.q
        }

        fn draw_unlocated(&self, _kind: GateKind, _mode: DetectionMode, rng: &mut RandomStream) -> Pauli {
            if rng.uniform() < self.p_rate {
                self.p
            } else {
                Pauli::I
            }
        }
    }

    fn clean() -> Fixed {
        Fixed { q: 0.0, p: Pauli::I, p_rate: 0.0 }
    }

    #[test]
    fn cphase_propagation_examples() {
        assert_eq!(cphase_propagate(Pauli::X, Pauli::I), (Pauli::X, Pauli::Z));
        assert_eq!(cphase_propagate(Pauli::I, Pauli::I), (Pauli::I, Pauli::I));
        assert_eq!(cphase_propagate(Pauli::Y, Pauli::X), (Pauli::Y * Pauli::Z, Pauli::X * Pauli::Z));
    }

    #[test]
    fn clean_lower_level_gives_clean_gates() {
        let mut r = RandomStream::new(1);
        for level in [2, 6] {
            let h = HighLevel::new(level, ConcatMethod::Method1, 5).unwrap();
            for kind in [GateKind::Memory, GateKind::MeasurementX, GateKind::BellPrep] {
                let s = h.sample(kind, &clean(), &mut r).unwrap();
                assert_eq!(s.weak, GateOutcome::CLEAN, "{kind:?}");
                assert_eq!(s.strong, GateOutcome::CLEAN);
                assert_eq!(s.restarts, 0);
            }
        }
    }

    #[test]
    fn single_input_error_is_detected() {
        let h = HighLevel::new(2, ConcatMethod::Method1, 5).unwrap();
        let mut r = RandomStream::new(2);
        for j in 0..4 {
            for p in Pauli::NON_IDENTITY {
                let mut input = [Pauli::I; 4];
                input[j] = p;
                let (s, _) = h.memory_round(&input, 0, &clean(), &mut r);
                assert_eq!(s.strong, GateOutcome::Located, "{j} {p:?}");
                assert_eq!(s.weak, GateOutcome::Located);
            }
        }
    }

    #[test]
    fn logical_input_errors_pass_through() {
        let h = HighLevel::new(2, ConcatMethod::Method1, 5).unwrap();
        let mut r = RandomStream::new(3);
        let zl = [Pauli::Z, Pauli::I, Pauli::Z, Pauli::I];
        let (s, c) = h.memory_round(&zl, 0, &clean(), &mut r);
        assert_eq!(s.weak.first(), Some(Pauli::Z));
        assert_eq!(c, Some([Pauli::I; 4]));
        let xl = [Pauli::X, Pauli::X, Pauli::I, Pauli::I];
        let (s, _) = h.memory_round(&xl, 0, &clean(), &mut r);
        assert_eq!(s.weak.first(), Some(Pauli::X));
    }

    #[test]
    fn normal_form_located_budget() {
        // located-only lower level at the fixed point of the normal form
        let q = 0.0210;
        let h = HighLevel::new(6, ConcatMethod::Method1, 5).unwrap();
        let lower = Fixed { q, p: Pauli::I, p_rate: 0.0 };
        let mut r = RandomStream::new(4);
        let n = 200_000;
        let mut located = 0;
        for _ in 0..n {
            let (s, _) = h.memory_round(&[Pauli::I; 4], 0, &lower, &mut r);
            located += s.weak.is_located() as u32;
        }
        let got = located as f64 / n as f64;
        assert!((got - q).abs() < 0.0012, "{got}");
    }

    #[test]
    fn requirements_respect_depth() {
        let h = HighLevel::new(2, ConcatMethod::Method1, 5).unwrap();
        let req = h.requirements(GateKind::DelayedMeasurement(3)).unwrap();
        assert!(req.contains(&(GateKind::DelayedMeasurement(4), DetectionMode::Weak)));
        assert!(h.requirements(GateKind::DelayedMeasurement(4)).is_err());
        let h2 = HighLevel::new(2, ConcatMethod::Method2, 5).unwrap();
        assert_eq!(h2.ancilla_mode(), DetectionMode::Weak);
    }

    #[test]
    fn composite_propagates_x() {
        let lower = Fixed { q: 0.0, p: Pauli::X, p_rate: 1.0 };
        let mut r = RandomStream::new(5);
        let o = composite_sample([GateKind::Memory, GateKind::Memory], DetectionMode::Weak, &lower, &mut r);
        assert_eq!(o, GateOutcome::Unlocated([Pauli::Y, Pauli::Y]));
    }
}
