//! Closed-form recursion for levels above the sampled ones. A level-(ℓ+1)
//! gate is reduced to its four data-part error locations, each an
//! independent level-ℓ draw; everything in the ancilla is assumed filtered.

use std::collections::BTreeMap;

use crate::code::{decode_xl, Decoded, DetectionMode, LocatedPairs, CZ_PERMUTATION};
use crate::gates::GateKind;
use crate::montecarlo::{RateTable, Rates};
use crate::Error;

pub type RateMap = BTreeMap<(u32, GateKind, DetectionMode), Rates>;

/// Loss exposures of one level-0 transfer with `n` idle steps.
pub fn link_exposures(n: u32) -> i32 {
    59 + 9 * n as i32
}

/// Located probability of one level-0 transfer at ε = 0.
pub fn link_located(gamma: f64, n: u32) -> f64 {
    1.0 - (1.0 - gamma).powi(link_exposures(n)) * 15.0 / 16.0
}

/// Located rate of a gate whose four data locations are located with
/// probability `p` each; two or more always kill a readout side.
pub fn located_two_of_four(p: f64) -> f64 {
    1.0 - (1.0 - p).powi(4) - 4.0 * p * (1.0 - p).powi(3)
}

pub fn rates_from_table(table: &RateTable) -> RateMap {
    table.entries.iter().map(|(k, e)| (*k, e.rates())).collect()
}

/// Distribution of one data location: located, or the flips of the input
/// readout (bit 1) and of the A readout (bit 0).
#[derive(Clone, Copy, Debug, PartialEq)]
struct Location {
    located: f64,
    flips: [f64; 4],
}

impl Location {
    fn from_rates(r: &Rates) -> Self {
        let u = 1.0 - r.q;
        // X on the input reaches A; Z flips the input readout
        Location { located: r.q, flips: [u * (1.0 - r.unlocated_total()), u * r.px, u * r.pz, u * r.py] }
    }

    /// Independent composition; located wins.
    fn then(self, o: Location) -> Self {
        let mut flips = [0.0; 4];
        for a in 0..4 {
            for b in 0..4 {
                flips[a ^ b] += self.flips[a] * o.flips[b];
            }
        }
        Location { located: 1.0 - (1.0 - self.located) * (1.0 - o.located), flips }
    }
}

/// Outcome distribution of a level-(ℓ+1) data part under `mode`.
fn combine(loc: Location, mode: DetectionMode) -> Rates {
    let mut q = 0.0;
    let mut p = [0.0; 4];
    let outcomes: [(Option<usize>, f64); 5] =
        [(None, loc.located), (Some(0), loc.flips[0]), (Some(1), loc.flips[1]), (Some(2), loc.flips[2]), (Some(3), loc.flips[3])];
    for a in outcomes {
        for b in outcomes {
            for c in outcomes {
                for d in outcomes {
                    let w = a.1 * b.1 * c.1 * d.1;
                    if w == 0.0 {
                        continue;
                    }
                    let mut fin = [false; 4];
                    let mut fa = [false; 4];
                    let mut lin = LocatedPairs::NONE;
                    let mut la = LocatedPairs::NONE;
                    for (i, o) in [a.0, b.0, c.0, d.0].into_iter().enumerate() {
                        let k = CZ_PERMUTATION[i];
                        match o {
                            None => {
                                lin.kill(i);
                                la.kill(k);
                            }
                            Some(f) => {
                                fin[i] = f & 2 != 0;
                                fa[k] = f & 1 != 0;
                            }
                        }
                    }
                    match (decode_xl(fin, lin, mode), decode_xl(fa, la, mode)) {
                        (Decoded::Value(vi), Decoded::Value(va)) => p[(vi as usize) << 1 | va as usize] += w,
                        _ => q += w,
                    }
                }
            }
        }
    }
    let u = 1.0 - q;
    let c = |x: f64| if u > 0.0 { x / u } else { 0.0 };
    Rates { q, px: c(p[1]), py: c(p[3]), pz: c(p[2]) }
}

/// Refuses to extrapolate unless located rates dominate unlocated ones and
/// weak-mode unlocated rates are at least the strong-mode ones.
pub fn check_regime(map: &RateMap, level: u32) -> Result<(), Error> {
    for kind in [GateKind::Memory, GateKind::MeasurementX] {
        let get = |m| map.get(&(level, kind, m)).ok_or_else(|| Error::MissingEntry(format!("level {level} {}", kind.label())));
        let (w, s) = (get(DetectionMode::Weak)?, get(DetectionMode::Strong)?);
        if w.q <= w.unlocated_total() {
            return Err(Error::Config(format!(
                "level {level} {}: located {:.3e} does not dominate unlocated {:.3e}",
                kind.label(),
                w.q,
                w.unlocated_total()
            )));
        }
        if w.unlocated_total() < s.unlocated_total() {
            return Err(Error::Config(format!("level {level} {}: weak unlocated below strong", kind.label())));
        }
    }
    Ok(())
}

/// Adds levels `from + 1 ..= to`. Levels up to `l_c` use the delayed form
/// (one delayed-measurement location per input block); above it the data
/// part is a memory and two measurements per block.
pub fn extrapolate(map: &RateMap, from: u32, to: u32, l_c: u32) -> Result<RateMap, Error> {
    check_regime(map, from)?;
    let mut out = map.clone();
    let weak = DetectionMode::Weak;
    for level in from + 1..=to {
        let below = level - 1;
        let get = |k: GateKind| {
            out.get(&(below, k, weak))
                .copied()
                .ok_or_else(|| Error::MissingEntry(format!("level {below} {} for extrapolation", k.label())))
        };
        let max_delay = if level <= l_c { l_c.min(to) - level } else { 0 };
        let mut fresh = Vec::new();
        for n in 0..=max_delay {
            let loc = if level <= l_c {
                Location::from_rates(&get(GateKind::DelayedMeasurement(n as u8 + 1))?)
            } else {
                let s = Location::from_rates(&get(GateKind::MeasurementX)?);
                // a measurement flip on A has the A bit only
                let s_a = Location { located: s.located, flips: [s.flips[0] + s.flips[1], s.flips[2] + s.flips[3], 0.0, 0.0] };
                let s_in = Location { located: s.located, flips: [s.flips[0] + s.flips[1], 0.0, s.flips[2] + s.flips[3], 0.0] };
                Location::from_rates(&get(GateKind::Memory)?).then(s_in).then(s_a)
            };
            for mode in [DetectionMode::Strong, weak] {
                let r = combine(loc, mode);
                if n == 0 {
                    fresh.push(((level, GateKind::Memory, mode), r));
                    fresh.push(((level, GateKind::MeasurementX, mode), r));
                } else {
                    fresh.push(((level, GateKind::DelayedMeasurement(n as u8), mode), r));
                }
            }
        }
        for mode in [DetectionMode::Strong, weak] {
            fresh.push(((level, GateKind::BellPrep, mode), Rates::default()));
        }
        out.extend(fresh);
    }
    Ok(out)
}

/// Located-only rates from level 1 upward at ε = 0.
pub fn loss_only_map(gamma: f64, max_level: u32, l_c: u32) -> RateMap {
    let mut map = RateMap::new();
    let top = l_c.min(max_level);
    for mode in [DetectionMode::Strong, DetectionMode::Weak] {
        for n in 0..top.max(1) {
            let p = link_located(gamma, n);
            let q = match mode {
                DetectionMode::Weak => located_two_of_four(p),
                DetectionMode::Strong => 1.0 - (1.0 - p).powi(4),
            };
            let r = Rates { q, ..Rates::default() };
            if n == 0 {
                map.insert((1, GateKind::Memory, mode), r);
                map.insert((1, GateKind::MeasurementX, mode), r);
                map.insert((1, GateKind::BellPrep, mode), Rates::default());
            } else {
                map.insert((1, GateKind::DelayedMeasurement(n as u8), mode), r);
            }
        }
    }
    if max_level <= 1 {
        return map;
    }
    extrapolate(&map, 1, max_level, l_c).expect("located-only map is in the extrapolation regime")
}
