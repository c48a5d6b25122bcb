//! Statistical checks of modelling assumptions: independent draws for a
//! level-1 CPHASE, the need for delayed fusion, the quadratic order of
//! weak-mode unlocated rates, worker-count independence, and the
//! located-only recursion against sampling.

use rayon::prelude::*;
use serde::Serialize;

use crate::code::DetectionMode;
use crate::extrapolate::loss_only_map;
use crate::gates::highlevel::HighLevel;
use crate::gates::{ConcatMethod, GateKind, GateOutcome};
use crate::montecarlo::{wilson, RateEstimate, RateTable, SamplePlan, Sampler, Source, BLOCK};
use crate::noise::NoiseParams;
use crate::rng::RandomStream;
use crate::Error;

/// One rate from two estimators with their 95% intervals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldComparison {
    pub field: String,
    pub a: f64,
    pub a_interval: (f64, f64),
    pub b: f64,
    pub b_interval: (f64, f64),
    pub overlap: bool,
}

fn fields(e: &RateEstimate) -> Vec<(String, u64, u64)> {
    let t = &e.tally;
    let m = t.n - t.located;
    let mut v = vec![("q".to_string(), t.located, t.n)];
    for (i, p) in ["x", "y", "z"].iter().enumerate() {
        v.push((format!("first_p{p}"), t.first[i], m));
        v.push((format!("second_p{p}"), t.second[i], m));
    }
    v
}

fn compare(a: &RateEstimate, b: &RateEstimate) -> Vec<FieldComparison> {
    let tag = match a.mode {
        DetectionMode::Strong => "strong",
        DetectionMode::Weak => "weak",
    };
    fields(a)
        .into_iter()
        .zip(fields(b))
        .map(|((name, ka, na), (_, kb, nb))| {
            let (ia, ib) = (wilson(ka, na), wilson(kb, nb));
            let frac = |k: u64, n: u64| if n == 0 { 0.0 } else { k as f64 / n as f64 };
            FieldComparison {
                field: format!("{tag}.{name}"),
                a: frac(ka, na),
                a_interval: ia,
                b: frac(kb, nb),
                b_interval: ib,
                overlap: ia.0 <= ib.1 && ib.0 <= ia.1,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub params: NoiseParams,
    pub n_samples: u64,
    /// `a` is the full level-1 CPHASE simulation, `b` the composite of two
    /// memory draws.
    pub fields: Vec<FieldComparison>,
    pub pass: bool,
}

/// Level-1 CPHASE from the cluster simulation against two independent
/// level-1 memory draws through an ideal CPHASE.
pub fn independence_check(params: NoiseParams, method: ConcatMethod, n: u64, seed: u64) -> Result<IndependenceReport, Error> {
    let s = Sampler::new(params, method, 5)?;
    let mut table = RateTable::default();
    for e in s.estimate(1, GateKind::Memory, Source::Direct, n, seed, &table)? {
        table.insert(e);
    }
    let direct = s.estimate(1, GateKind::Cphase, Source::Direct, n, seed, &table)?;
    let composite = s.estimate(1, GateKind::Cphase, Source::Composite, n, seed, &table)?;
    let fields: Vec<FieldComparison> = (0..2).flat_map(|i| compare(&direct[i], &composite[i])).collect();
    Ok(IndependenceReport { params, n_samples: n, pass: fields.iter().all(|f| f.overlap), fields })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DelayedFusionReport {
    pub n_samples: u64,
    /// Weak-mode level-1 memory located rate fed to level 2.
    pub input_q: f64,
    pub normal_q: f64,
    pub normal_interval: (f64, f64),
    pub delayed_q: f64,
    pub delayed_interval: (f64, f64),
    pub pass: bool,
}

/// Level-2 memory at γ = ε = 0 in plain time order and with delayed
/// fusion, on the same level-1 table and the same seed.
pub fn delayed_fusion_check(n: u64, seed: u64) -> Result<DelayedFusionReport, Error> {
    let p = NoiseParams::noiseless();
    let delayed = Sampler::new(p, ConcatMethod::Method1, 5)?;
    let normal = Sampler::new(p, ConcatMethod::Method1, 1)?;
    let mut table = RateTable::default();
    for kind in delayed.kinds_at(1, 2) {
        for e in delayed.estimate(1, kind, Source::Direct, n, seed, &table)? {
            table.insert(e);
        }
    }
    let input_q = table.get(1, GateKind::Memory, DetectionMode::Weak)?.located_q;
    let weak = |s: &Sampler| -> Result<(f64, (f64, f64)), Error> {
        let [_, w] = s.estimate(2, GateKind::Memory, Source::Direct, n, seed, &table)?;
        Ok((w.located_q, (w.lower.q, w.upper.q)))
    };
    let (normal_q, normal_interval) = weak(&normal)?;
    let (delayed_q, delayed_interval) = weak(&delayed)?;
    Ok(DelayedFusionReport {
        n_samples: n,
        input_q,
        normal_q,
        normal_interval,
        delayed_q,
        delayed_interval,
        pass: normal_q >= input_q && delayed_q < input_q,
    })
}

/// Level-2 weak-mode memory outcomes restricted to samples in which no
/// data-part draw was located, so that single faults are all detected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct QuadraticCount {
    pub clean_data: u64,
    pub unlocated: u64,
}

impl QuadraticCount {
    pub fn rate(&self) -> f64 {
        if self.clean_data == 0 {
            0.0
        } else {
            self.unlocated as f64 / self.clean_data as f64
        }
    }
}

pub fn quadratic_count(s: &Sampler, table: &RateTable, n: u64, seed: u64) -> Result<QuadraticCount, Error> {
    let mut h = HighLevel::new(2, s.method, s.l_c)?;
    h.burn_in = s.level1.burn_in;
    let view = table.view(1);
    for (k, m) in h.requirements(GateKind::Memory)? {
        table.get(1, k, m)?;
    }
    let blocks = n.div_ceil(BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = RandomStream::substream(seed, &[2, GateKind::Memory.key(), 7, b]);
            let mut c = QuadraticCount::default();
            for _ in 0..BLOCK.min(n - b * BLOCK) {
                let g = h.sample(GateKind::Memory, &view, &mut rng).expect("requirements checked");
                if g.data_located {
                    continue;
                }
                c.clean_data += 1;
                if let GateOutcome::Unlocated(p) = g.weak {
                    c.unlocated += (!p[0].is_identity()) as u64;
                }
            }
            c
        })
        .reduce(QuadraticCount::default, |a, b| QuadraticCount {
            clean_data: a.clean_data + b.clean_data,
            unlocated: a.unlocated + b.unlocated,
        });
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopePoint {
    pub epsilon: f64,
    /// Weak-mode level-1 memory unlocated rate.
    pub lower_rate: f64,
    pub count: QuadraticCount,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeReport {
    pub gamma: f64,
    pub points: Vec<SlopePoint>,
    pub slope: f64,
    pub pass: bool,
}

/// Log-log slope of the level-2 quadratic unlocated rate against the
/// level-1 unlocated rate between two ε values.
pub fn scaling_slope(gamma: f64, eps: [f64; 2], method: ConcatMethod, n1: u64, n2: u64, seed: u64) -> Result<SlopeReport, Error> {
    let mut points = Vec::new();
    for e in eps {
        let s = Sampler::new(NoiseParams::new(gamma, e)?, method, 5)?;
        let mut table = RateTable::default();
        for kind in s.kinds_at(1, 2) {
            for est in s.estimate(1, kind, Source::Direct, n1, seed, &table)? {
                table.insert(est);
            }
        }
        let lower_rate = table.get(1, GateKind::Memory, DetectionMode::Weak)?.rates().unlocated_total();
        points.push(SlopePoint { epsilon: e, lower_rate, count: quadratic_count(&s, &table, n2, seed)? });
    }
    let (a, b) = (&points[0], &points[1]);
    let slope = (b.count.rate() / a.count.rate()).ln() / (b.lower_rate / a.lower_rate).ln();
    Ok(SlopeReport { gamma, pass: (slope - 2.0).abs() <= 0.3, slope, points })
}

/// Estimates the same level-1 entry under each worker count; true when all
/// results are identical.
pub fn worker_independent(params: NoiseParams, kind: GateKind, n: u64, seed: u64, workers: &[usize]) -> Result<bool, Error> {
    let s = Sampler::new(params, ConcatMethod::Method1, 5)?;
    let table = RateTable::default();
    let mut runs = Vec::new();
    for &w in workers {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(w).build().map_err(|e| Error::Config(e.to_string()))?;
        runs.push(pool.install(|| s.estimate(1, kind, Source::Direct, n, seed, &table))?);
    }
    Ok(runs.windows(2).all(|w| w[0] == w[1]))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecursionPoint {
    pub level: u32,
    pub sampled_q: f64,
    pub sampled_interval: (f64, f64),
    pub recursion_q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossOnlyConfirmation {
    pub gamma: f64,
    pub n_samples: u64,
    pub points: Vec<RecursionPoint>,
    /// Largest relative gap between sampled and recursion rates.
    pub max_relative_gap: f64,
}

/// Sampled weak-mode memory located rates at ε = 0 against the located-only
/// recursion, levels 1 to `max_level`.
pub fn loss_only_confirmation(gamma: f64, max_level: u32, n: u64, seed: u64) -> Result<LossOnlyConfirmation, Error> {
    let s = Sampler::new(NoiseParams::new(gamma, 0.0)?, ConcatMethod::Method1, 5)?;
    let table = s.propagate_levels(max_level, &SamplePlan::new(vec![n])?, seed, |_, _| {})?;
    let rec = loss_only_map(gamma, max_level, 5);
    let mut points = Vec::new();
    for level in 1..=max_level {
        let e = table.get(level, GateKind::Memory, DetectionMode::Weak)?;
        points.push(RecursionPoint {
            level,
            sampled_q: e.located_q,
            sampled_interval: (e.lower.q, e.upper.q),
            recursion_q: rec[&(level, GateKind::Memory, DetectionMode::Weak)].q,
        });
    }
    let max_relative_gap = points.iter().map(|p| (p.sampled_q - p.recursion_q).abs() / p.recursion_q).fold(0.0, f64::max);
    Ok(LossOnlyConfirmation { gamma, n_samples: n, points, max_relative_gap })
}
