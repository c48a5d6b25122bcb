//! Rate estimation with deterministic block-parallel sampling, and
//! level-by-level table propagation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::DetectionMode;
use crate::gates::highlevel::{composite_sample, HighLevel, LowerLevel};
use crate::gates::level1::{GateSample, Level1};
use crate::gates::{ConcatMethod, GateKind, GateOutcome};
use crate::noise::NoiseParams;
use crate::pauli::Pauli;
use crate::rng::RandomStream;
use crate::Error;

/// Samples per substream block.
pub const BLOCK: u64 = 1024;

const Z95: f64 = 1.959_963_984_540_054;

/// Integer counters; merging is order independent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub n: u64,
    pub located: u64,
    /// X, Y, Z counts of the first residual.
    pub first: [u64; 3],
    /// X, Y, Z counts of the second residual (two-qubit gates).
    pub second: [u64; 3],
    pub restarts: u64,
}

fn pauli_index(p: Pauli) -> Option<usize> {
    match (p.x_bit, p.z_bit) {
        (true, false) => Some(0),
        (true, true) => Some(1),
        (false, true) => Some(2),
        _ => None,
    }
}

impl Tally {
    pub fn add(&mut self, o: GateOutcome, restarts: u64) {
        self.n += 1;
        self.restarts += restarts;
        match o {
            GateOutcome::Located => self.located += 1,
            GateOutcome::Unlocated([a, b]) => {
                if let Some(i) = pauli_index(a) {
                    self.first[i] += 1;
                }
                if let Some(i) = pauli_index(b) {
                    self.second[i] += 1;
                }
            }
        }
    }

    pub fn merge(mut self, o: Tally) -> Tally {
        self.n += o.n;
        self.located += o.located;
        self.restarts += o.restarts;
        for i in 0..3 {
            self.first[i] += o.first[i];
            self.second[i] += o.second[i];
        }
        self
    }
}

/// Wilson score interval at 95%. With `k = 0` the upper end is the
/// one-sided 95% bound.
pub fn wilson(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    if k == 0 {
        return (0.0, 1.0 - 0.05f64.powf(1.0 / n as f64));
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub q: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

impl Rates {
    pub fn unlocated_total(&self) -> f64 {
        self.px + self.py + self.pz
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub level: u32,
    pub kind: GateKind,
    pub mode: DetectionMode,
    pub n_samples: u64,
    pub tally: Tally,
    pub located_q: f64,
    /// Conditional on no located error.
    pub unlocated_px: f64,
    pub unlocated_py: f64,
    pub unlocated_pz: f64,
    pub ci_halfwidth: Rates,
    pub lower: Rates,
    pub upper: Rates,
    /// Constructions discarded per accepted one.
    pub restarts_per_sample: f64,
}

impl RateEstimate {
    pub fn from_tally(level: u32, kind: GateKind, mode: DetectionMode, t: Tally) -> Self {
        let n = t.n;
        let m = n - t.located;
        let frac = |k: u64, d: u64| if d == 0 { 0.0 } else { k as f64 / d as f64 };
        let (ql, qh) = wilson(t.located, n);
        let bands: Vec<(f64, f64)> = t.first.iter().map(|&k| wilson(k, m)).collect();
        let half = |lo: f64, hi: f64, k: u64| if k == 0 { hi } else { (hi - lo) / 2.0 };
        RateEstimate {
            level,
            kind,
            mode,
            n_samples: n,
            tally: t,
            located_q: frac(t.located, n),
            unlocated_px: frac(t.first[0], m),
            unlocated_py: frac(t.first[1], m),
            unlocated_pz: frac(t.first[2], m),
            ci_halfwidth: Rates {
                q: half(ql, qh, t.located),
                px: half(bands[0].0, bands[0].1, t.first[0]),
                py: half(bands[1].0, bands[1].1, t.first[1]),
                pz: half(bands[2].0, bands[2].1, t.first[2]),
            },
            lower: Rates { q: ql, px: bands[0].0, py: bands[1].0, pz: bands[2].0 },
            upper: Rates { q: qh, px: bands[0].1, py: bands[1].1, pz: bands[2].1 },
            restarts_per_sample: frac(t.restarts, n),
        }
    }

    pub fn rates(&self) -> Rates {
        Rates { q: self.located_q, px: self.unlocated_px, py: self.unlocated_py, pz: self.unlocated_pz }
    }

    /// Conditional rates of the second residual.
    pub fn second_rates(&self) -> Rates {
        let m = self.tally.n - self.tally.located;
        let f = |k: u64| if m == 0 { 0.0 } else { k as f64 / m as f64 };
        Rates { q: self.located_q, px: f(self.tally.second[0]), py: f(self.tally.second[1]), pz: f(self.tally.second[2]) }
    }
}

/// One draw from point rates; `None` when located.
pub fn draw(r: &Rates, rng: &mut RandomStream) -> Option<Pauli> {
    if rng.uniform() < r.q {
        return None;
    }
    let v = rng.uniform();
    Some(if v < r.px {
        Pauli::X
    } else if v < r.px + r.py {
        Pauli::Y
    } else if v < r.px + r.py + r.pz {
        Pauli::Z
    } else {
        Pauli::I
    })
}

pub type TableKey = (u32, GateKind, DetectionMode);

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    #[serde(with = "entries")]
    pub entries: BTreeMap<TableKey, RateEstimate>,
}

mod entries {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<TableKey, RateEstimate>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<TableKey, RateEstimate>, D::Error> {
        let v: Vec<RateEstimate> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|e| ((e.level, e.kind, e.mode), e)).collect())
    }
}

impl RateTable {
    pub fn get(&self, level: u32, kind: GateKind, mode: DetectionMode) -> Result<&RateEstimate, Error> {
        self.entries
            .get(&(level, kind, mode))
            .ok_or_else(|| Error::MissingEntry(format!("level {level} {} {mode:?}", kind.label())))
    }

    pub fn insert(&mut self, e: RateEstimate) {
        self.entries.insert((e.level, e.kind, e.mode), e);
    }

    pub fn contains(&self, level: u32, kind: GateKind, mode: DetectionMode) -> bool {
        self.entries.contains_key(&(level, kind, mode))
    }

    pub fn max_level(&self) -> Option<u32> {
        self.entries.keys().map(|k| k.0).max()
    }

    /// Draw view over one level. Entries must have been checked.
    pub fn view(&self, level: u32) -> LevelView<'_> {
        LevelView { table: self, level }
    }
}

pub struct LevelView<'a> {
    table: &'a RateTable,
    level: u32,
}

impl LowerLevel for LevelView<'_> {
    fn draw(&self, kind: GateKind, mode: DetectionMode, rng: &mut RandomStream) -> Option<Pauli> {
        let e = &self.table.entries[&(self.level, kind, mode)];
        draw(&e.rates(), rng)
    }

    fn located_rate(&self, kind: GateKind, mode: DetectionMode) -> f64 {
        self.table.entries[&(self.level, kind, mode)].located_q
    }

    fn draw_unlocated(&self, kind: GateKind, mode: DetectionMode, rng: &mut RandomStream) -> Pauli {
        let e = &self.table.entries[&(self.level, kind, mode)];
        draw(&Rates { q: 0.0, ..e.rates() }, rng).unwrap_or(Pauli::I)
    }
}

/// Sample counts per level, level 0 first; levels past the end reuse the
/// last count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub per_level: Vec<u64>,
}

impl SamplePlan {
    pub fn new(per_level: Vec<u64>) -> Result<Self, Error> {
        if per_level.is_empty() || per_level.contains(&0) {
            return Err(Error::Config("sample counts must be non-empty and positive".into()));
        }
        Ok(SamplePlan { per_level })
    }

    pub fn desk() -> Self {
        SamplePlan { per_level: vec![100_000, 100_000, 1_000_000] }
    }

    pub fn full() -> Self {
        SamplePlan { per_level: vec![10_000_000, 100_000_000, 100_000_000] }
    }

    pub fn at(&self, level: u32) -> u64 {
        let i = (level as usize).min(self.per_level.len() - 1);
        self.per_level[i]
    }
}

/// Everything a sampler needs besides the table.
pub struct Sampler {
    pub params: NoiseParams,
    pub method: ConcatMethod,
    pub l_c: u32,
    pub level1: Level1,
}

/// What produces the samples of one estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    /// The level's own simulator.
    Direct,
    /// Two independent same-level draws propagated through a CPHASE.
    Composite,
}

impl Sampler {
    pub fn new(params: NoiseParams, method: ConcatMethod, l_c: u32) -> Result<Self, Error> {
        params.validate()?;
        if l_c < 1 {
            return Err(Error::Config("l_c must be at least 1".into()));
        }
        Ok(Sampler { params, method, l_c, level1: Level1::new()? })
    }

    pub fn with_burn_in(mut self, burn_in: u32) -> Self {
        self.level1.burn_in = burn_in.max(1);
        self
    }

    fn high(&self, level: u32) -> Result<HighLevel, Error> {
        let mut h = HighLevel::new(level, self.method, self.l_c)?;
        h.burn_in = self.level1.burn_in;
        Ok(h)
    }

    fn check(&self, table: &RateTable, level: u32, deps: &[(GateKind, DetectionMode)]) -> Result<(), Error> {
        for &(k, m) in deps {
            table.get(level, k, m)?;
        }
        Ok(())
    }

    /// Located-and-residual counts for both modes from `n` samples.
    pub fn estimate(
        &self,
        level: u32,
        kind: GateKind,
        source: Source,
        n: u64,
        seed: u64,
        table: &RateTable,
    ) -> Result<[RateEstimate; 2], Error> {
        if n == 0 {
            return Err(Error::Config("n_samples must be positive".into()));
        }
        let composite_kinds = match kind {
            GateKind::CphasePlusMeasurement => [GateKind::Memory, GateKind::MeasurementX],
            _ => [GateKind::Memory, GateKind::Memory],
        };
        let composite =
            source == Source::Composite || (level >= 2 && matches!(kind, GateKind::Cphase | GateKind::CphasePlusMeasurement));
        let high = if level >= 2 && !composite { Some(self.high(level)?) } else { None };
        if composite {
            if !matches!(kind, GateKind::Cphase | GateKind::CphasePlusMeasurement) {
                return Err(Error::Config(format!("no composite form for {}", kind.label())));
            }
            for m in [DetectionMode::Strong, DetectionMode::Weak] {
                self.check(table, level, &[(composite_kinds[0], m), (composite_kinds[1], m)])?;
            }
        } else if let Some(h) = &high {
            self.check(table, level - 1, &h.requirements(kind)?)?;
        } else if level == 0 && kind != GateKind::Memory {
            return Err(Error::Config("level 0 has only the transfer entry (memory)".into()));
        }
        let tag = composite as u64;
        let blocks = n.div_ceil(BLOCK);
        let tallies = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = RandomStream::substream(seed, &[level as u64, kind.key(), tag, b]);
                let count = BLOCK.min(n - b * BLOCK);
                let mut t = [Tally::default(); 2];
                for _ in 0..count {
                    if composite {
                        let view = table.view(level);
                        for (i, m) in [DetectionMode::Strong, DetectionMode::Weak].into_iter().enumerate() {
                            t[i].add(composite_sample(composite_kinds, m, &view, &mut rng), 0);
                        }
                        continue;
                    }
                    let s = match (level, &high) {
                        (0, _) => {
                            let tr = self.level1.sample_link(0, &self.params, &mut rng);
                            let o = if tr.located {
                                GateOutcome::Located
                            } else {
                                GateOutcome::Unlocated([Pauli::new(tr.x_flip, tr.z_flip), Pauli::I])
                            };
                            GateSample { strong: o, weak: o, restarts: 0, data_located: tr.located }
                        }
                        (1, _) => self.level1.sample(kind, &self.params, &mut rng),
                        (_, Some(h)) => h.sample(kind, &table.view(level - 1), &mut rng).expect("requirements checked"),
                        _ => unreachable!(),
                    };
                    t[0].add(s.strong, s.restarts);
                    t[1].add(s.weak, s.restarts);
                }
                t
            })
            .reduce(|| [Tally::default(); 2], |a, b| [a[0].merge(b[0]), a[1].merge(b[1])]);
        Ok([
            RateEstimate::from_tally(level, kind, DetectionMode::Strong, tallies[0]),
            RateEstimate::from_tally(level, kind, DetectionMode::Weak, tallies[1]),
        ])
    }

    /// Gate kinds sampled at `level` so that every level up to `max_level`
    /// can be built.
    pub fn kinds_at(&self, level: u32, max_level: u32) -> Vec<GateKind> {
        if level == 0 {
            return vec![GateKind::Memory];
        }
        let mut v = vec![GateKind::Memory, GateKind::MeasurementX, GateKind::BellPrep];
        let top = self.l_c.min(max_level);
        for n in 1..=top.saturating_sub(level) {
            v.push(GateKind::DelayedMeasurement(n as u8));
        }
        v
    }

    /// Fills the table from level 0 to `max_level`. `progress` receives
    /// each finished level.
    pub fn propagate_levels(
        &self,
        max_level: u32,
        plan: &SamplePlan,
        seed: u64,
        progress: impl FnMut(u32, &RateTable),
    ) -> Result<RateTable, Error> {
        self.propagate_to(max_level, max_level, plan, seed, progress)
    }

    /// As `propagate_levels`, also sampling the delayed measurements that
    /// levels up to `horizon` will need when extrapolated.
    pub fn propagate_to(
        &self,
        max_level: u32,
        horizon: u32,
        plan: &SamplePlan,
        seed: u64,
        mut progress: impl FnMut(u32, &RateTable),
    ) -> Result<RateTable, Error> {
        if max_level < 1 || horizon < max_level {
            return Err(Error::Config("need 1 <= max_level <= horizon".into()));
        }
        let mut table = RateTable::default();
        for level in 0..=max_level {
            let mut kinds = self.kinds_at(level, horizon);
            // delayed entries first: the plain kinds at this level do not
            // depend on them, but this keeps the order stable
            kinds.sort();
            for kind in kinds {
                for e in self.estimate(level, kind, Source::Direct, plan.at(level), seed, &table)? {
                    table.insert(e);
                }
            }
            progress(level, &table);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_point_and_zero_bound() {
        let (lo, hi) = wilson(50, 1000);
        assert!(lo < 0.05 && hi > 0.05);
        let (lo, hi) = wilson(0, 1000);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.002_991).abs() < 1e-5);
    }

    #[test]
    fn tally_merge_is_order_independent() {
        let mut a = Tally::default();
        a.add(GateOutcome::Located, 2);
        let mut b = Tally::default();
        b.add(GateOutcome::Unlocated([Pauli::Y, Pauli::X]), 0);
        assert_eq!(a.merge(b), b.merge(a));
        assert_eq!(a.merge(b).first, [0, 1, 0]);
        assert_eq!(a.merge(b).second, [1, 0, 0]);
    }

    #[test]
    fn conditional_rates_use_unlocated_subsample() {
        let mut t = Tally::default();
        for _ in 0..50 {
            t.add(GateOutcome::Located, 0);
        }
        for _ in 0..25 {
            t.add(GateOutcome::Unlocated([Pauli::Z, Pauli::I]), 0);
        }
        for _ in 0..25 {
            t.add(GateOutcome::CLEAN, 0);
        }
        let e = RateEstimate::from_tally(1, GateKind::Memory, DetectionMode::Weak, t);
        assert_eq!(e.located_q, 0.5);
        assert_eq!(e.unlocated_pz, 0.5);
        assert_eq!(e.unlocated_px, 0.0);
        assert!(e.upper.px > 0.0);
    }

    #[test]
    fn draw_matches_rates() {
        let r = Rates { q: 0.2, px: 0.1, py: 0.0, pz: 0.3 };
        let mut rng = RandomStream::new(9);
        let n = 200_000;
        let (mut loc, mut x, mut z) = (0, 0, 0);
        for _ in 0..n {
            match draw(&r, &mut rng) {
                None => loc += 1,
                Some(p) if p == Pauli::X => x += 1,
                Some(p) if p == Pauli::Z => z += 1,
                _ => {}
            }
        }
        assert!((loc as f64 / n as f64 - 0.2).abs() < 0.005);
        assert!((x as f64 / (n - loc) as f64 - 0.1).abs() < 0.005);
        assert!((z as f64 / (n - loc) as f64 - 0.3).abs() < 0.006);
    }

    #[test]
    fn missing_dependency_is_reported() {
        let s = Sampler::new(NoiseParams::new(0.0, 0.0).unwrap(), ConcatMethod::Method1, 5).unwrap();
        let t = RateTable::default();
        assert!(matches!(s.estimate(2, GateKind::Memory, Source::Direct, 10, 1, &t), Err(Error::MissingEntry(_))));
        assert!(s.estimate(1, GateKind::Memory, Source::Direct, 0, 1, &t).is_err());
    }

    #[test]
    fn noiseless_level0_located_fraction() {
        let s = Sampler::new(NoiseParams::new(0.0, 0.0).unwrap(), ConcatMethod::Method1, 5).unwrap();
        let [e, _] = s.estimate(0, GateKind::Memory, Source::Direct, 20_000, 3, &RateTable::default()).unwrap();
        assert!((e.located_q - 0.0625).abs() < 4.0 * (0.0625f64 * 0.9375 / 20_000.0).sqrt());
        assert_eq!(e.unlocated_px + e.unlocated_py + e.unlocated_pz, 0.0);
    }

    #[test]
    fn kinds_cover_delayed_chain() {
        let s = Sampler::new(NoiseParams::new(0.0, 0.0).unwrap(), ConcatMethod::Method1, 5).unwrap();
        assert!(s.kinds_at(1, 5).contains(&GateKind::DelayedMeasurement(4)));
        assert!(!s.kinds_at(4, 5).contains(&GateKind::DelayedMeasurement(2)));
        assert!(s.kinds_at(4, 5).contains(&GateKind::DelayedMeasurement(1)));
        assert_eq!(s.kinds_at(5, 5).len(), 3);
    }
}
