//! Photon loss and depolarization at the four noise locations.

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterState;
use crate::pauli::Pauli;
use crate::rng::RandomStream;
use crate::{Error, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub gamma: f64,
    pub epsilon: f64,
}

impl NoiseParams {
    pub fn new(gamma: f64, epsilon: f64) -> Result<Self, Error> {
        let p = NoiseParams { gamma, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub const fn noiseless() -> Self {
        NoiseParams { gamma: 0.0, epsilon: 0.0 }
    }

    pub fn validate(&self) -> Result<(), Error> {
        for (name, v) in [("gamma", self.gamma), ("epsilon", self.epsilon)] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseLocation {
    AfterBellPrep,
    BeforeMemory,
    BeforeFusion,
    BeforeMeasurement,
}

impl NoiseLocation {
    pub fn arity(self) -> usize {
        match self {
            NoiseLocation::AfterBellPrep | NoiseLocation::BeforeFusion => 2,
            NoiseLocation::BeforeMemory | NoiseLocation::BeforeMeasurement => 1,
        }
    }
}

pub fn sample_loss(params: &NoiseParams, rng: &mut RandomStream) -> bool {
    rng.uniform() < params.gamma
}

/// `I` with probability `1-ε`, otherwise X, Y or Z with `ε/3` each.
pub fn sample_depol_single(params: &NoiseParams, rng: &mut RandomStream) -> Pauli {
    let u = rng.uniform();
    if u >= params.epsilon {
        return Pauli::I;
    }
    let k = ((u / params.epsilon) * 3.0) as usize;
    Pauli::NON_IDENTITY[k.min(2)]
}

/// `(I,I)` with probability `1-ε`, otherwise one of the 15 non-identity
/// products with `ε/15` each.
pub fn sample_depol_pair(params: &NoiseParams, rng: &mut RandomStream) -> (Pauli, Pauli) {
    let u = rng.uniform();
    if u >= params.epsilon {
        return (Pauli::I, Pauli::I);
    }
    let k = (((u / params.epsilon) * 15.0) as usize).min(14) + 1;
    (Pauli::ALL[k / 4], Pauli::ALL[k % 4])
}

/// Draws loss then depolarization for every target and records the Paulis
/// on `state`. Returns the per-target loss flags, which are also set on the
/// nodes.
pub fn apply_location_noise(
    location: NoiseLocation,
    targets: &[NodeId],
    state: &mut ClusterState,
    params: &NoiseParams,
    rng: &mut RandomStream,
) -> Result<Vec<bool>, Error> {
    if targets.len() != location.arity() {
        return Err(Error::Config(format!("{location:?} acts on {} photons, got {}", location.arity(), targets.len())));
    }
    let lost: Vec<bool> = targets.iter().map(|_| sample_loss(params, rng)).collect();
    let paulis = if location.arity() == 2 {
        let (a, b) = sample_depol_pair(params, rng);
        vec![a, b]
    } else {
        vec![sample_depol_single(params, rng)]
    };
    for ((&t, &l), p) in targets.iter().zip(&lost).zip(paulis) {
        if l {
            state.mark_lost(t)?;
        }
        state.apply_pauli(t, p)?;
    }
    Ok(lost)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn within_3_sigma(count: u64, n: u64, p: f64) -> bool {
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        (count as f64 - n as f64 * p).abs() <= 3.0 * sigma
    }

    #[test]
    fn loss_extremes() {
        let mut r = RandomStream::new(0);
        assert!((0..1000).all(|_| !sample_loss(&NoiseParams::new(0.0, 0.0).unwrap(), &mut r)));
        assert!((0..1000).all(|_| sample_loss(&NoiseParams::new(1.0, 0.0).unwrap(), &mut r)));
    }

    #[test]
    fn loss_frequency() {
        let p = NoiseParams::new(0.3, 0.0).unwrap();
        let mut r = RandomStream::new(11);
        let n = 1_000_000;
        let c = (0..n).filter(|_| sample_loss(&p, &mut r)).count() as u64;
        assert!(within_3_sigma(c, n, 0.3));
    }

    #[test]
    fn single_depol_frequencies() {
        let p = NoiseParams::new(0.0, 0.15).unwrap();
        let mut r = RandomStream::new(12);
        let n = 1_000_000u64;
        let mut counts = [0u64; 4];
        for _ in 0..n {
            let q = sample_depol_single(&p, &mut r);
            counts[Pauli::ALL.iter().position(|&a| a == q).unwrap()] += 1;
        }
        for c in &counts[1..] {
            assert!(within_3_sigma(*c, n, 0.05));
        }
        let zero = NoiseParams::new(0.0, 0.0).unwrap();
        assert!((0..1000).all(|_| sample_depol_single(&zero, &mut r).is_identity()));
        let one = NoiseParams::new(0.0, 1.0).unwrap();
        assert!((0..1000).all(|_| !sample_depol_single(&one, &mut r).is_identity()));
    }

    #[test]
    fn pair_depol_frequencies() {
        let p = NoiseParams::new(0.0, 0.15).unwrap();
        let mut r = RandomStream::new(13);
        let n = 1_000_000u64;
        let mut counts = [[0u64; 4]; 4];
        let mut first_nontrivial = 0u64;
        for _ in 0..n {
            let (a, b) = sample_depol_pair(&p, &mut r);
            let ia = Pauli::ALL.iter().position(|&q| q == a).unwrap();
            let ib = Pauli::ALL.iter().position(|&q| q == b).unwrap();
            counts[ia][ib] += 1;
            if !a.is_identity() {
                first_nontrivial += 1;
            }
        }
        for (ia, row) in counts.iter().enumerate() {
            for (ib, &c) in row.iter().enumerate() {
                if ia + ib > 0 {
                    assert!(within_3_sigma(c, n, 0.01), "{ia}{ib}: {c}");
                }
            }
        }
        assert!(within_3_sigma(first_nontrivial, n, 12.0 * 0.15 / 15.0));
    }

    #[test]
    fn loss_and_depol_uncorrelated() {
        let p = NoiseParams::new(0.3, 0.3).unwrap();
        let mut st = ClusterState::<bool>::new();
        let node = st.add_node();
        let mut r = RandomStream::new(14);
        let n = 1_000_000f64;
        let (mut sl, mut sd, mut sld) = (0.0, 0.0, 0.0);
        for _ in 0..n as usize {
            let before = st.z_error(node).unwrap();
            let lost = apply_location_noise(NoiseLocation::BeforeMeasurement, &[node], &mut st, &p, &mut r).unwrap()[0];
            let flipped = st.z_error(node).unwrap() != before;
            st.clear_lost(node).unwrap();
            let (l, d) = (lost as u8 as f64, flipped as u8 as f64);
            sl += l;
            sd += d;
            sld += l * d;
        }
        let cov = sld / n - (sl / n) * (sd / n);
        let sd_l = ((sl / n) * (1.0 - sl / n)).sqrt();
        let sd_d = ((sd / n) * (1.0 - sd / n)).sqrt();
        let corr = cov / (sd_l * sd_d);
        assert!(corr.abs() < 3.0 / n.sqrt(), "{corr}");
    }

    #[test]
    fn arity_checked() {
        let mut st = ClusterState::<bool>::new();
        let a = st.add_node();
        let p = NoiseParams::noiseless();
        let mut r = RandomStream::new(0);
        assert!(apply_location_noise(NoiseLocation::BeforeFusion, &[a], &mut st, &p, &mut r).is_err());
        let lost = apply_location_noise(NoiseLocation::BeforeMemory, &[a], &mut st, &p, &mut r).unwrap();
        assert_eq!(lost, vec![false]);
        assert!(!st.z_error(a).unwrap());
    }

    #[test]
    fn bell_location_loses_photons_independently() {
        let p = NoiseParams::new(0.5, 0.0).unwrap();
        let mut r = RandomStream::new(5);
        let mut both = 0u64;
        let n = 100_000u64;
        for _ in 0..n {
            let mut st = ClusterState::<bool>::new();
            let (a, b) = st.new_bell_pair();
            let l = apply_location_noise(NoiseLocation::AfterBellPrep, &[a, b], &mut st, &p, &mut r).unwrap();
            if l[0] && l[1] {
                both += 1;
            }
        }
        assert!(within_3_sigma(both, n, 0.25));
    }

    #[test]
    fn validation() {
        assert!(NoiseParams::new(-0.1, 0.0).is_err());
        assert!(NoiseParams::new(0.0, 1.5).is_err());
        assert!(NoiseParams::new(f64::NAN, 0.0).is_err());
    }
}
