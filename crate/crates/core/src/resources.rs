//! Expected Bell pairs consumed per accepted gate.
//!
//! Level 1 follows the recorded construction of each ancilla: a fusion
//! that fails (probability ½ plus losses on its two photons) throws away
//! both pieces it joins. Above level 1 a gate costs its preparation stage,
//! repeated until no lower-level operation in it is located, plus its data
//! part.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::code::DetectionMode;
use crate::extrapolate::{check_regime, extrapolate, rates_from_table, RateMap};
use crate::gates::highlevel::{Form, HighLevel};
use crate::gates::level1::Level1;
use crate::gates::template::{AncillaKind, CompiledAncilla, Construct};
use crate::gates::{ConcatMethod, GateKind};
use crate::montecarlo::{RateTable, Sampler};
use crate::Error;

/// Expected Bell pairs for one complete construction.
pub fn construction_cost(log: &[Construct], gamma: f64) -> f64 {
    let mut owner: HashMap<u32, usize> = HashMap::new();
    let mut cost: Vec<f64> = Vec::new();
    let mut parent: Vec<usize> = Vec::new();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for op in log {
        match *op {
            Construct::Bell(a, b) => {
                let id = cost.len();
                cost.push(1.0);
                parent.push(id);
                owner.insert(a, id);
                owner.insert(b, id);
            }
            Construct::Fuse { a, b, out, exposures } => {
                let pa = find(&mut parent, owner[&a]);
                let pb = find(&mut parent, owner[&b]);
                let p = 0.5 * (1.0 - gamma).powi(exposures as i32);
                let joined = if pa == pb { cost[pa] } else { cost[pa] + cost[pb] };
                parent[pb] = pa;
                cost[pa] = joined / p;
                owner.insert(out, pa);
            }
        }
    }
    let mut roots: Vec<usize> = (0..cost.len()).map(|i| find(&mut parent, i)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.iter().map(|&r| cost[r]).sum()
}

/// Cost of one accepted level-1 ancilla: construction, restarts on losses
/// caught by construction measurements, and parity-filter restarts.
pub fn level1_ancilla_cost(anc: &CompiledAncilla, gamma: f64, filter_restarts: f64) -> f64 {
    construction_cost(&anc.construction, gamma) / (1.0 - gamma).powi(anc.restart_exposures as i32) * (1.0 + filter_restarts)
}

fn ancilla_kind(kind: GateKind) -> AncillaKind {
    match kind {
        GateKind::Memory | GateKind::DelayedMeasurement(_) => AncillaKind::Memory,
        GateKind::MeasurementX => AncillaKind::Measurement,
        GateKind::BellPrep => AncillaKind::Bell,
        GateKind::Cphase => AncillaKind::Cphase,
        GateKind::CphasePlusMeasurement => AncillaKind::CphaseMeasure,
    }
}

/// Lower-level gate counts of one level-ℓ gate, split into preparation and
/// data parts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Composition {
    pub ancilla: Vec<(GateKind, u32)>,
    pub data: Vec<(GateKind, u32)>,
    /// Operations whose located outcome restarts the preparation, counted
    /// as they are drawn in the error model.
    pub located_draws: Vec<(GateKind, u32)>,
}

pub fn composition(kind: GateKind, form: Form) -> Composition {
    use GateKind::*;
    let delayed = form == Form::Delayed;
    // one encoded block pair: Bell pairs on A and C, transversal CPHASE,
    // A-side measurements when delayed
    let mut anc = vec![(BellPrep, 4), (Cphase, 4)];
    let mut draws = vec![(BellPrep, 4), (Memory, 8)];
    if delayed {
        anc.push((MeasurementX, 4));
        draws.push((MeasurementX, 4));
    }
    let data = if delayed { vec![(Memory, 4)] } else { vec![(CphasePlusMeasurement, 4)] };
    let scale = |v: &mut Vec<(GateKind, u32)>, f: u32| v.iter_mut().for_each(|e| e.1 *= f);
    match kind {
        Memory | DelayedMeasurement(_) => Composition { ancilla: anc, data, located_draws: draws },
        MeasurementX => {
            anc.push((MeasurementX, 4));
            draws.push((MeasurementX, 4));
            Composition { ancilla: anc, data, located_draws: draws }
        }
        BellPrep => Composition {
            ancilla: vec![(BellPrep, 6), (Cphase, 8), (MeasurementX, 4)],
            data: vec![],
            located_draws: vec![(BellPrep, 6), (Memory, 16), (MeasurementX, 4)],
        },
        Cphase | CphasePlusMeasurement => {
            let mut data = data;
            scale(&mut anc, 2);
            scale(&mut draws, 2);
            scale(&mut data, 2);
            // transversal CPHASE between the two output blocks
            anc.push((Cphase, 4));
            draws.push((Memory, 8));
            if kind == CphasePlusMeasurement {
                anc.push((MeasurementX, 4));
                draws.push((MeasurementX, 4));
            }
            Composition { ancilla: anc, data, located_draws: draws }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    pub level: u32,
    pub kind: GateKind,
    pub bell_pairs: f64,
    /// Preparation attempts per accepted one.
    pub attempts: f64,
}

pub struct ResourceModel {
    pub gamma: f64,
    pub method: ConcatMethod,
    pub l_c: u32,
    level1: BTreeMap<AncillaKind, f64>,
}

impl ResourceModel {
    /// `filter_restarts` gives the parity-filter restarts per accepted
    /// level-1 ancilla; kinds not listed use the measurement's value when
    /// they carry a filter.
    pub fn new(level1: &Level1, gamma: f64, method: ConcatMethod, l_c: u32, filter_restarts: &BTreeMap<GateKind, f64>) -> Self {
        let fr = |k: GateKind| filter_restarts.get(&k).copied();
        let meas = fr(GateKind::MeasurementX).unwrap_or(0.0);
        let mut costs = BTreeMap::new();
        for kind in AncillaKind::ALL {
            let r = match kind {
                AncillaKind::Memory | AncillaKind::Cphase => 0.0,
                AncillaKind::Measurement => meas,
                AncillaKind::Bell => fr(GateKind::BellPrep).unwrap_or(meas),
                AncillaKind::CphaseMeasure => fr(GateKind::CphasePlusMeasurement).unwrap_or(meas),
            };
            costs.insert(kind, level1_ancilla_cost(level1.ancilla(kind), gamma, r));
        }
        ResourceModel { gamma, method, l_c, level1: costs }
    }

    /// Level-1 costs by ancilla kind.
    pub fn level1_costs(&self) -> &BTreeMap<AncillaKind, f64> {
        &self.level1
    }

    /// Expected Bell pairs of one accepted `kind` at `level`, using located
    /// rates from `rates` for the restart probabilities.
    pub fn cost(&self, level: u32, kind: GateKind, rates: &RateMap) -> Result<CostEntry, Error> {
        let mut memo = BTreeMap::new();
        self.cost_memo(level, kind, rates, &mut memo)
    }

    fn cost_memo(
        &self,
        level: u32,
        kind: GateKind,
        rates: &RateMap,
        memo: &mut BTreeMap<(u32, GateKind), CostEntry>,
    ) -> Result<CostEntry, Error> {
        let kind = match kind {
            GateKind::DelayedMeasurement(_) => GateKind::Memory,
            k => k,
        };
        if let Some(e) = memo.get(&(level, kind)) {
            return Ok(e.clone());
        }
        let entry = match level {
            0 => return Err(Error::Config("gates start at level 1".into())),
            1 => CostEntry { level, kind, bell_pairs: self.level1[&ancilla_kind(kind)], attempts: 1.0 },
            _ => {
                let h = HighLevel::new(level, self.method, self.l_c)?;
                let comp = composition(kind, h.form());
                let mode = h.ancilla_mode();
                let mut accept = 1.0;
                for &(k, c) in &comp.located_draws {
                    let q = if k == GateKind::BellPrep {
                        0.0
                    } else {
                        rates
                            .get(&(level - 1, k, mode))
                            .ok_or_else(|| Error::MissingEntry(format!("level {} {} {mode:?} for costs", level - 1, k.label())))?
                            .q
                    };
                    accept *= (1.0 - q).powi(c as i32);
                }
                if accept <= 0.0 {
                    return Err(Error::Divergent(format!("level {level} {} never accepts", kind.label())));
                }
                let mut part = |v: &[(GateKind, u32)]| -> Result<f64, Error> {
                    let mut s = 0.0;
                    for &(k, c) in v {
                        s += c as f64 * self.cost_memo(level - 1, k, rates, memo)?.bell_pairs;
                    }
                    Ok(s)
                };
                let anc = part(&comp.ancilla)?;
                let data = part(&comp.data)?;
                let total = anc / accept + data;
                if !total.is_finite() {
                    return Err(Error::Divergent(format!("level {level} {} cost overflows", kind.label())));
                }
                CostEntry { level, kind, bell_pairs: total, attempts: 1.0 / accept }
            }
        };
        memo.insert((level, kind), entry.clone());
        Ok(entry)
    }
}

/// One point of the located-rate versus cost curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourcePoint {
    pub level: u32,
    pub q_memory: f64,
    pub bell_pairs: f64,
    /// Whether the rates at this level came from the recursion.
    pub extrapolated: bool,
}

pub fn resource_curve(
    model: &ResourceModel,
    rates: &RateMap,
    max_level: u32,
    sampled_up_to: u32,
) -> Result<Vec<ResourcePoint>, Error> {
    (1..=max_level)
        .map(|level| {
            let q = rates
                .get(&(level, GateKind::Memory, DetectionMode::Weak))
                .ok_or_else(|| Error::MissingEntry(format!("level {level} memory")))?
                .q;
            Ok(ResourcePoint {
                level,
                q_memory: q,
                bell_pairs: model.cost(level, GateKind::Memory, rates)?.bell_pairs,
                extrapolated: level > sampled_up_to,
            })
        })
        .collect()
}

/// Cost at located rate `target` by log-log interpolation between the
/// levels that bracket it; `None` when the curve never reaches it.
pub fn cost_at_rate(curve: &[ResourcePoint], target: f64) -> Option<f64> {
    for w in curve.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.q_memory >= target && b.q_memory <= target && b.q_memory > 0.0 {
            if a.q_memory == b.q_memory {
                return Some(a.bell_pairs);
            }
            let t = (target.ln() - a.q_memory.ln()) / (b.q_memory.ln() - a.q_memory.ln());
            return Some((a.bell_pairs.ln() + t * (b.bell_pairs.ln() - a.bell_pairs.ln())).exp());
        }
    }
    None
}

/// Fewest located memory events at a level before it may seed the
/// recursion.
pub const MIN_SWITCH_EVENTS: u64 = 10;

/// Level-1 parity-filter restarts per accepted ancilla, from weak-mode
/// level-1 entries.
pub fn filter_restarts(table: &RateTable) -> BTreeMap<GateKind, f64> {
    table
        .entries
        .values()
        .filter(|e| e.level == 1 && e.mode == DetectionMode::Weak)
        .map(|e| (e.kind, e.restarts_per_sample))
        .collect()
}

/// Highest sampled level at which the recursion may start: enough located
/// memory events and located rates dominating unlocated ones.
pub fn switch_level(table: &RateTable) -> Option<u32> {
    let map = rates_from_table(table);
    let top = table.max_level()?;
    (1..=top).rev().find(|&l| {
        table.get(l, GateKind::Memory, DetectionMode::Weak).map(|e| e.tally.located >= MIN_SWITCH_EVENTS).unwrap_or(false)
            && check_regime(&map, l).is_ok()
    })
}

/// Recursion one level below the switch against the sampled value there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    pub level: u32,
    pub sampled_q: f64,
    pub sampled_interval: (f64, f64),
    pub recursion_q: f64,
    pub agree: bool,
}

pub fn crossover(table: &RateTable, level: u32, l_c: u32) -> Result<Crossover, Error> {
    if level < 2 {
        return Err(Error::Config("crossover needs a sampled level below the switch".into()));
    }
    let e = table.get(level, GateKind::Memory, DetectionMode::Weak)?;
    let below: RateMap = rates_from_table(table).into_iter().filter(|(k, _)| k.0 < level).collect();
    let rec = extrapolate(&below, level - 1, level, l_c)?;
    let recursion_q = rec[&(level, GateKind::Memory, DetectionMode::Weak)].q;
    let sampled_interval = (e.lower.q, e.upper.q);
    Ok(Crossover {
        level,
        sampled_q: e.located_q,
        sampled_interval,
        recursion_q,
        agree: sampled_interval.0 <= recursion_q && recursion_q <= sampled_interval.1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub gamma: f64,
    pub epsilon: f64,
    pub method: ConcatMethod,
    pub l_c: u32,
    pub switch_level: u32,
    pub crossover: Option<Crossover>,
    pub level1_costs: BTreeMap<AncillaKind, f64>,
    pub curve: Vec<ResourcePoint>,
    pub target_q: f64,
    /// `None` when the curve never reaches the target.
    pub cost_at_target: Option<f64>,
}

/// Resource curve from a sampled table: sampled rates up to the switch
/// level, the recursion above it up to `horizon`.
pub fn resource_report(sampler: &Sampler, table: &RateTable, horizon: u32, target_q: f64) -> Result<ResourceReport, Error> {
    let switch = switch_level(table).ok_or_else(|| {
        Error::Divergent("no sampled level has located rates dominating unlocated ones; parameters look out of threshold".into())
    })?;
    let below: RateMap = rates_from_table(table).into_iter().filter(|(k, _)| k.0 <= switch).collect();
    let map = extrapolate(&below, switch, horizon, sampler.l_c)?;
    let model = ResourceModel::new(&sampler.level1, sampler.params.gamma, sampler.method, sampler.l_c, &filter_restarts(table));
    let curve = resource_curve(&model, &map, horizon, switch)?;
    Ok(ResourceReport {
        gamma: sampler.params.gamma,
        epsilon: sampler.params.epsilon,
        method: sampler.method,
        l_c: sampler.l_c,
        switch_level: switch,
        crossover: if switch >= 2 { crossover(table, switch, sampler.l_c).ok() } else { None },
        level1_costs: model.level1_costs().clone(),
        cost_at_target: cost_at_rate(&curve, target_q),
        curve,
        target_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bell_pair_costs_one() {
        assert_eq!(construction_cost(&[Construct::Bell(0, 1)], 0.0), 1.0);
    }

    #[test]
    fn three_chain_costs_four() {
        let log = [Construct::Bell(0, 1), Construct::Bell(2, 3), Construct::Fuse { a: 1, b: 2, out: 1, exposures: 2 }];
        assert_eq!(construction_cost(&log, 0.0), 4.0);
        assert!(construction_cost(&log, 0.1) > 4.0);
    }

    #[test]
    fn level1_costs_grow_with_loss() {
        let l1 = Level1::new().unwrap();
        let m0 = ResourceModel::new(&l1, 0.0, ConcatMethod::Method1, 5, &BTreeMap::new());
        let m1 = ResourceModel::new(&l1, 1e-3, ConcatMethod::Method1, 5, &BTreeMap::new());
        for k in AncillaKind::ALL {
            assert!(m1.level1_costs()[&k] > m0.level1_costs()[&k]);
            assert!(m0.level1_costs()[&k] > 100.0);
        }
        assert!(m0.level1_costs()[&AncillaKind::Cphase] > m0.level1_costs()[&AncillaKind::Memory]);
    }

    #[test]
    fn costs_increase_with_level_and_method2_is_cheaper() {
        let l1 = Level1::new().unwrap();
        let rates = crate::extrapolate::loss_only_map(4e-4, 7, 5);
        let m1 = ResourceModel::new(&l1, 4e-4, ConcatMethod::Method1, 5, &BTreeMap::new());
        let m2 = ResourceModel::new(&l1, 4e-4, ConcatMethod::Method2, 5, &BTreeMap::new());
        let c1 = resource_curve(&m1, &rates, 7, 1).unwrap();
        let c2 = resource_curve(&m2, &rates, 7, 1).unwrap();
        assert!(c1.windows(2).all(|w| w[1].bell_pairs > w[0].bell_pairs));
        for (a, b) in c1.iter().zip(&c2) {
            assert!(b.bell_pairs <= a.bell_pairs);
        }
    }

    #[test]
    fn interpolation_hits_bracket() {
        let c = [
            ResourcePoint { level: 1, q_memory: 1e-6, bell_pairs: 1e3, extrapolated: false },
            ResourcePoint { level: 2, q_memory: 1e-12, bell_pairs: 1e9, extrapolated: false },
        ];
        let v = cost_at_rate(&c, 1e-9).unwrap();
        assert!((v.log10() - 6.0).abs() < 1e-9);
        assert!(cost_at_rate(&c, 1e-15).is_none());
    }
}
