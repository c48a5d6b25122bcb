//! Level-5 fault-tolerance criterion, the loss-only threshold and the ε*
//! scan at fixed γ.

use serde::{Deserialize, Serialize};

use crate::code::DetectionMode;
use crate::extrapolate::{loss_only_map, RateMap};
use crate::gates::GateKind;
use crate::montecarlo::{RateTable, Rates};
use crate::Error;

pub const CRITERION_LEVEL: u32 = 5;

const LIMIT_Q: f64 = 1e-2;
const LIMIT_BELL: f64 = 1e-6;
const LIMIT_GATE: f64 = 1e-4;

/// Rates entering the criterion. Located rates are those seen by data
/// operations (weak mode); unlocated rates use weak mode too, which bounds
/// the strong-mode ones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CriterionRates {
    pub q_m: f64,
    pub q_s: f64,
    pub bell: Rates,
    pub memory: Rates,
    pub measurement: Rates,
}

impl CriterionRates {
    pub fn from_map(map: &RateMap, level: u32) -> Result<Self, Error> {
        let get = |k: GateKind| {
            map.get(&(level, k, DetectionMode::Weak))
                .copied()
                .ok_or_else(|| Error::MissingEntry(format!("level {level} {} for the criterion", k.label())))
        };
        let memory = get(GateKind::Memory)?;
        let measurement = get(GateKind::MeasurementX)?;
        Ok(CriterionRates { q_m: memory.q, q_s: measurement.q, bell: get(GateKind::BellPrep)?, memory, measurement })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `limit - value`; negative when violated.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub pass: bool,
    pub conditions: Vec<Condition>,
}

fn pauli_max(r: &Rates) -> f64 {
    r.px.max(r.pz).max(100.0 * r.py)
}

pub fn evaluate_criterion(r: &CriterionRates) -> CriterionResult {
    let conditions: Vec<Condition> = [
        ("located", r.q_m.max(r.q_s), LIMIT_Q),
        ("bell", pauli_max(&r.bell), LIMIT_BELL),
        ("memory", pauli_max(&r.memory), LIMIT_GATE),
        ("measurement", pauli_max(&r.measurement), LIMIT_GATE),
    ]
    .into_iter()
    .map(|(name, value, limit)| Condition { name: name.into(), value, limit, margin: limit - value, pass: value <= limit })
    .collect();
    CriterionResult { pass: conditions.iter().all(|c| c.pass), conditions }
}

/// Which end of each rate's interval to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    Point,
    Lower,
    /// Wilson upper ends for observed events. Fields with no events keep
    /// their zero point value: at desk sample sizes the one-sided bound
    /// alone would exceed the Bell-pair limit.
    Upper,
}

pub fn table_map(table: &RateTable, bound: Bound) -> RateMap {
    table
        .entries
        .iter()
        .map(|(k, e)| {
            let p = e.rates();
            let pick = |point: f64, lo: f64, hi: f64| match bound {
                Bound::Point => point,
                Bound::Lower => lo,
                Bound::Upper if point > 0.0 => hi,
                Bound::Upper => point,
            };
            let r = Rates {
                q: pick(p.q, e.lower.q, e.upper.q),
                px: pick(p.px, e.lower.px, e.upper.px),
                py: pick(p.py, e.lower.py, e.upper.py),
                pz: pick(p.pz, e.lower.pz, e.upper.pz),
            };
            (*k, r)
        })
        .collect()
}

/// Bisection on γ over the located-only recursion; relative resolution
/// `rel`.
pub fn loss_only_threshold(l_c: u32, rel: f64) -> f64 {
    let passes = |g: f64| {
        let m = loss_only_map(g, CRITERION_LEVEL, l_c);
        CriterionRates::from_map(&m, CRITERION_LEVEL).map(|r| evaluate_criterion(&r).pass).unwrap_or(false)
    };
    let (mut lo, mut hi) = (0.0f64, 1e-2f64);
    while (hi - lo) > rel * lo.max(1e-9) {
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Criterion verdicts at one ε for the point rates and both interval ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub epsilon: f64,
    pub pass: bool,
    /// Verdict with every rate at its lower end.
    pub pass_optimistic: bool,
    /// Verdict with observed rates at their upper ends.
    pub pass_pessimistic: bool,
    pub detail: CriterionResult,
}

impl ThresholdPoint {
    pub fn from_table(epsilon: f64, table: &RateTable) -> Result<Self, Error> {
        let verdict = |b| -> Result<CriterionResult, Error> {
            Ok(evaluate_criterion(&CriterionRates::from_map(&table_map(table, b), CRITERION_LEVEL)?))
        };
        let detail = verdict(Bound::Point)?;
        Ok(ThresholdPoint {
            epsilon,
            pass: detail.pass,
            pass_optimistic: verdict(Bound::Lower)?.pass,
            pass_pessimistic: verdict(Bound::Upper)?.pass,
            detail,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonGrid {
    pub min: f64,
    pub max: f64,
    pub coarse_points: usize,
    /// Fine increment.
    pub delta: f64,
}

impl Default for EpsilonGrid {
    fn default() -> Self {
        EpsilonGrid { min: 0.0, max: 2e-4, coarse_points: 9, delta: 1e-5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonThreshold {
    pub gamma: f64,
    /// Largest scanned ε passing before the first failure; `None` when
    /// nothing passes or γ is beyond the loss-only threshold.
    pub epsilon_star: Option<f64>,
    /// ε* from the pessimistic and optimistic verdicts.
    pub band: Option<(f64, f64)>,
    pub points: Vec<ThresholdPoint>,
}

/// Coarse scan over the grid, then Δε steps above the last coarse pass
/// until the point and optimistic verdicts both fail. `eval` runs the
/// full propagation at one ε.
pub fn epsilon_threshold(
    gamma: f64,
    gamma_star: f64,
    grid: &EpsilonGrid,
    mut eval: impl FnMut(f64) -> Result<ThresholdPoint, Error>,
) -> Result<EpsilonThreshold, Error> {
    if grid.coarse_points < 2 || grid.delta <= 0.0 || grid.max <= grid.min {
        return Err(Error::Config("ε grid needs two coarse points, Δε > 0 and max > min".into()));
    }
    let mut out = EpsilonThreshold { gamma, epsilon_star: None, band: None, points: Vec::new() };
    if gamma >= gamma_star {
        return Ok(out);
    }
    let step = (grid.max - grid.min) / (grid.coarse_points - 1) as f64;
    let mut last_pass = None;
    for i in 0..grid.coarse_points {
        let eps = grid.min + step * i as f64;
        let p = eval(eps)?;
        let ok = p.pass || p.pass_optimistic;
        if p.pass {
            last_pass = Some(eps);
        }
        out.points.push(p);
        if !ok {
            break;
        }
    }
    if let Some(start) = last_pass {
        let mut k = 1;
        loop {
            let eps = start + grid.delta * k as f64;
            if eps >= start + step || out.points.iter().any(|p| (p.epsilon - eps).abs() < grid.delta * 1e-6) {
                break;
            }
            let p = eval(eps)?;
            let done = !p.pass && !p.pass_optimistic;
            out.points.push(p);
            if done {
                break;
            }
            k += 1;
        }
    }
    out.points.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let star = |f: &dyn Fn(&ThresholdPoint) -> bool| {
        let mut best = None;
        for p in &out.points {
            if f(p) {
                best = Some(p.epsilon);
            } else {
                break;
            }
        }
        best
    };
    out.epsilon_star = star(&|p| p.pass);
    let lo = star(&|p| p.pass_pessimistic);
    let hi = star(&|p| p.pass_optimistic);
    out.band = match (lo, hi, out.epsilon_star) {
        (l, Some(h), Some(s)) => Some((l.unwrap_or(0.0).min(s), h.max(s))),
        _ => None,
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero() -> CriterionRates {
        CriterionRates::default()
    }

    #[test]
    fn all_zero_passes() {
        assert!(evaluate_criterion(&zero()).pass);
    }

    #[test]
    fn located_limit() {
        let r = CriterionRates { q_m: 2e-2, ..zero() };
        let res = evaluate_criterion(&r);
        assert!(!res.pass);
        assert!(!res.conditions[0].pass);
        assert!(res.conditions[1..].iter().all(|c| c.pass));
    }

    #[test]
    fn y_weighted_by_hundred() {
        let r = CriterionRates { memory: Rates { py: 2e-6, ..Rates::default() }, ..zero() };
        let res = evaluate_criterion(&r);
        assert!(!res.pass);
        assert!((res.conditions[2].value - 2e-4).abs() < 1e-18);
    }

    #[test]
    fn loss_only_threshold_brackets() {
        let g = loss_only_threshold(5, 1e-4);
        let at = |g: f64| evaluate_criterion(&CriterionRates::from_map(&loss_only_map(g, 5, 5), 5).unwrap()).pass;
        assert!(at(g * 0.99));
        assert!(!at(g * 1.01));
        assert!(at(0.0));
        assert!(!at(1e-2));
    }

    fn synthetic(eps: f64, cut: f64) -> ThresholdPoint {
        let pass = eps <= cut;
        ThresholdPoint {
            epsilon: eps,
            pass,
            pass_optimistic: eps <= cut * 1.2,
            pass_pessimistic: eps <= cut * 0.8,
            detail: CriterionResult { pass, conditions: vec![] },
        }
    }

    #[test]
    fn scan_finds_boundary_to_delta() {
        let grid = EpsilonGrid { min: 0.0, max: 1e-4, coarse_points: 5, delta: 1e-6 };
        let t = epsilon_threshold(1e-4, 1.5e-3, &grid, |e| Ok(synthetic(e, 3.3e-5))).unwrap();
        let s = t.epsilon_star.unwrap();
        assert!((s - 3.3e-5).abs() <= 1e-6 + 1e-12, "{s}");
        let (lo, hi) = t.band.unwrap();
        assert!(lo <= s && s <= hi);
    }

    #[test]
    fn beyond_loss_threshold_has_no_star() {
        let grid = EpsilonGrid::default();
        let t = epsilon_threshold(2e-3, 1.5e-3, &grid, |e| Ok(synthetic(e, 1.0))).unwrap();
        assert!(t.epsilon_star.is_none() && t.points.is_empty());
    }
}
