//! Level-1 gates: a compiled ancilla, the data step that teleports the
//! input into its carriers, and the readout decoding.

use std::collections::BTreeMap;

use crate::code::{canonicalize_bell, classify_z_pattern, decode_xl, Decoded, DetectionMode, LocatedPairs, CZ_PERMUTATION};
use crate::gates::level0::{transfer_bits, Microcluster, Receivers, Transfer};
use crate::gates::template::{AncillaKind, AncillaSample, CompiledAncilla, Layout};
use crate::gates::{GateKind, GateOutcome};
use crate::noise::NoiseParams;
use crate::pauli::Pauli;
use crate::rng::RandomStream;
use crate::Error;

/// Error flags of an encoded output handed to the next gate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Carry {
    pub blocks: [Microcluster; 4],
}

/// One accepted gate execution evaluated under both detection modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GateSample {
    pub strong: GateOutcome,
    pub weak: GateOutcome,
    /// Constructions thrown away by the parity filter before acceptance.
    pub restarts: u64,
    /// Some data-part location was located.
    pub data_located: bool,
}

impl GateSample {
    pub fn outcome(&self, mode: DetectionMode) -> GateOutcome {
        match mode {
            DetectionMode::Strong => self.strong,
            DetectionMode::Weak => self.weak,
        }
    }
}

const ZL: [bool; 4] = [true, false, true, false];

fn xor4(a: [bool; 4], b: [bool; 4]) -> [bool; 4] {
    std::array::from_fn(|j| a[j] ^ b[j])
}

/// Splits an output Z pattern into a logical Z (removed) and the residue
/// left for the next round to detect.
fn settle(z: [bool; 4]) -> (bool, [bool; 4]) {
    match classify_z_pattern(z) {
        Some(true) => (true, xor4(z, ZL)),
        _ => (false, z),
    }
}

fn carry_from(s: &AncillaSample, layout: &Layout, o: usize, centres: [bool; 4]) -> Carry {
    Carry {
        blocks: std::array::from_fn(|j| Microcluster {
            centre_z: centres[j],
            centre_lost: s.lost_bit(layout.output_centre(o, j)),
            leaf_z: std::array::from_fn(|k| s.bit(layout.output_leaf(o, j, k))),
            leaf_lost: std::array::from_fn(|k| s.lost_bit(layout.output_leaf(o, j, k))),
        }),
    }
}

fn output_centres(s: &AncillaSample, layout: &Layout, o: usize) -> [bool; 4] {
    s.group(layout.output_centre(o, 0))
}

/// Readout flips of one input port after its data step.
#[derive(Clone, Copy, Debug, Default)]
struct Side {
    c: [bool; 4],
    a: [bool; 4],
    c_loc: LocatedPairs,
    a_loc: LocatedPairs,
}

impl Side {
    fn any_located(&self) -> bool {
        self.c_loc.any() || self.a_loc.any()
    }

    /// `(c value flip, a value flip)`, or `None` when located.
    fn decode(&self, mode: DetectionMode) -> Option<(bool, bool)> {
        match (decode_xl(self.c, self.c_loc, mode), decode_xl(self.a, self.a_loc, mode)) {
            (Decoded::Value(c), Decoded::Value(a)) => Some((c, a)),
            _ => None,
        }
    }
}

fn data_step(
    s: &AncillaSample,
    layout: &Layout,
    port: usize,
    input: &Carry,
    delay: usize,
    params: &NoiseParams,
    rng: &mut RandomStream,
) -> Side {
    let mut side =
        Side { c: s.group(layout.readout(2 * port, 0)), a: s.group(layout.readout(2 * port + 1, 0)), ..Side::default() };
    for j in 0..4 {
        let dst = Receivers {
            leaf_z: std::array::from_fn(|k| s.bit(layout.port_leaf(port, j, k))),
            leaf_lost: std::array::from_fn(|k| s.lost_bit(layout.port_leaf(port, j, k))),
        };
        let t = transfer_bits(&input.blocks[j], &dst, delay, params, rng);
        let pj = CZ_PERMUTATION[j];
        side.c[j] ^= t.z_flip;
        side.a[pj] ^= t.x_flip;
        if t.located {
            side.c_loc.kill(j);
            side.a_loc.kill(pj);
        }
    }
    side
}

fn modes() -> [DetectionMode; 2] {
    [DetectionMode::Strong, DetectionMode::Weak]
}

/// Compiled level-1 ancillas plus the samplers built on them.
pub struct Level1 {
    ancillas: BTreeMap<AncillaKind, CompiledAncilla>,
    /// Accepted memory rounds run before a sampled gate to reach the
    /// steady input.
    pub burn_in: u32,
}

impl Level1 {
    pub fn new() -> Result<Self, Error> {
        let mut ancillas = BTreeMap::new();
        for k in AncillaKind::ALL {
            ancillas.insert(k, CompiledAncilla::compile(k)?);
        }
        Ok(Level1 { ancillas, burn_in: 1 })
    }

    pub fn ancilla(&self, kind: AncillaKind) -> &CompiledAncilla {
        &self.ancillas[&kind]
    }

    /// One memory round on `input`; also returns the output's flags when the
    /// weak decoding accepts.
    pub fn memory_round(
        &self,
        input: &Carry,
        delay: usize,
        params: &NoiseParams,
        rng: &mut RandomStream,
    ) -> (GateSample, Option<Carry>) {
        let anc = self.ancilla(AncillaKind::Memory);
        let l = anc.layout;
        let s = anc.sample(params, rng);
        let side = data_step(&s, &l, 0, input, delay, params, rng);
        let z = output_centres(&s, &l, 0);
        let mut carry = None;
        let mut out = [GateOutcome::Located; 2];
        for (m, mode) in modes().into_iter().enumerate() {
            if let Some((vc, va)) = side.decode(mode) {
                let (lz, residue) = settle(if vc { xor4(z, ZL) } else { z });
                out[m] = GateOutcome::Unlocated([Pauli::new(va, lz), Pauli::I]);
                if mode == DetectionMode::Weak {
                    carry = Some(carry_from(&s, &l, 0, residue));
                }
            }
        }
        (GateSample { strong: out[0], weak: out[1], restarts: 0, data_located: side.any_located() }, carry)
    }

    /// Input after `burn_in` accepted memory rounds starting from a clean
    /// state. A located round is redrawn on the same input.
    pub fn steady_input(&self, params: &NoiseParams, rng: &mut RandomStream) -> Carry {
        let mut input = Carry::default();
        for _ in 0..self.burn_in {
            for _ in 0..10_000 {
                if let (_, Some(c)) = self.memory_round(&input, 0, params, rng) {
                    input = c;
                    break;
                }
            }
        }
        input
    }

    pub fn sample(&self, kind: GateKind, params: &NoiseParams, rng: &mut RandomStream) -> GateSample {
        match kind {
            GateKind::Memory => self.sample_memory(0, params, rng),
            GateKind::DelayedMeasurement(n) => self.sample_memory(n as usize, params, rng),
            GateKind::MeasurementX => self.sample_measurement(params, rng),
            GateKind::BellPrep => self.sample_bell(params, rng),
            GateKind::Cphase => self.sample_cphase(false, params, rng),
            GateKind::CphasePlusMeasurement => self.sample_cphase(true, params, rng),
        }
    }

    fn sample_memory(&self, delay: usize, params: &NoiseParams, rng: &mut RandomStream) -> GateSample {
        let input = self.steady_input(params, rng);
        self.memory_round(&input, delay, params, rng).0
    }

    /// One data-side link (transfer into carrier 0) after `delay` idle
    /// steps, on a steady input.
    pub fn sample_link(&self, delay: usize, params: &NoiseParams, rng: &mut RandomStream) -> Transfer {
        let input = self.steady_input(params, rng);
        let anc = self.ancilla(AncillaKind::Memory);
        let l = anc.layout;
        let s = anc.sample(params, rng);
        let dst = Receivers {
            leaf_z: std::array::from_fn(|k| s.bit(l.port_leaf(0, 0, k))),
            leaf_lost: std::array::from_fn(|k| s.lost_bit(l.port_leaf(0, 0, k))),
        };
        transfer_bits(&input.blocks[0], &dst, delay, params, rng)
    }

    fn sample_measurement(&self, params: &NoiseParams, rng: &mut RandomStream) -> GateSample {
        let input = self.steady_input(params, rng);
        let anc = self.ancilla(AncillaKind::Measurement);
        let l = anc.layout;
        let (s, restarts) = anc.sample_accepted(params, rng);
        let side = data_step(&s, &l, 0, &input, 0, params, rng);
        let o = s.group(l.readout(2, 0));
        let mut out = [GateOutcome::Located; 2];
        for (m, mode) in modes().into_iter().enumerate() {
            if let (Some((vc, va)), Decoded::Value(vo)) = (side.decode(mode), decode_xl(o, LocatedPairs::NONE, mode)) {
                out[m] = GateOutcome::Unlocated([Pauli::new(va, vc ^ vo), Pauli::I]);
            }
        }
        GateSample { strong: out[0], weak: out[1], restarts, data_located: side.any_located() }
    }

    fn sample_bell(&self, params: &NoiseParams, rng: &mut RandomStream) -> GateSample {
        let anc = self.ancilla(AncillaKind::Bell);
        let l = anc.layout;
        let (s, restarts) = anc.sample_accepted(params, rng);
        let m = s.group(l.readout(0, 0));
        let (zp, _) = settle(output_centres(&s, &l, 0));
        let (zq, _) = settle(output_centres(&s, &l, 1));
        let mut out = [GateOutcome::Located; 2];
        for (i, mode) in modes().into_iter().enumerate() {
            if let Decoded::Value(vm) = decode_xl(m, LocatedPairs::NONE, mode) {
                let p = canonicalize_bell(Pauli::new(vm, zp), Pauli::new(false, zq));
                out[i] = GateOutcome::Unlocated([p, Pauli::I]);
            }
        }
        GateSample { strong: out[0], weak: out[1], restarts, data_located: false }
    }

    fn sample_cphase(&self, measure_second: bool, params: &NoiseParams, rng: &mut RandomStream) -> GateSample {
        let inputs = [self.steady_input(params, rng), self.steady_input(params, rng)];
        let kind = if measure_second { AncillaKind::CphaseMeasure } else { AncillaKind::Cphase };
        let anc = self.ancilla(kind);
        let l = anc.layout;
        let (s, restarts) = anc.sample_accepted(params, rng);
        let sides = [data_step(&s, &l, 0, &inputs[0], 0, params, rng), data_step(&s, &l, 1, &inputs[1], 0, params, rng)];
        let mut out = [GateOutcome::Located; 2];
        for (m, mode) in modes().into_iter().enumerate() {
            let (Some((c0, a0)), Some((c1, a1))) = (sides[0].decode(mode), sides[1].decode(mode)) else {
                continue;
            };
            // a c flip is Z_L on its own output; an a flip is X_L on its own
            // output and Z_L on the other one
            let (z0, _) = settle(xor4(output_centres(&s, &l, 0), if c0 ^ a1 { ZL } else { [false; 4] }));
            let first = Pauli::new(a0, z0);
            if measure_second {
                if let Decoded::Value(vo) = decode_xl(s.group(l.readout(4, 0)), LocatedPairs::NONE, mode) {
                    out[m] = GateOutcome::Unlocated([first, Pauli::new(a1, c1 ^ a0 ^ vo)]);
                }
            } else {
                let (z1, _) = settle(xor4(output_centres(&s, &l, 1), if c1 ^ a0 { ZL } else { [false; 4] }));
                out[m] = GateOutcome::Unlocated([first, Pauli::new(a1, z1)]);
            }
        }
        GateSample { strong: out[0], weak: out[1], restarts, data_located: sides.iter().any(Side::any_located) }
    }
}
