//! Transfer of one physical qubit between microclusters: four leaf
//! fusions, an X measurement of the source centre and a majority vote.

use crate::cluster::{ClusterState, FuseMeasureOutcome};
use crate::noise::{apply_location_noise, sample_depol_pair, sample_depol_single, sample_loss, NoiseLocation, NoiseParams};
use crate::rng::RandomStream;
use crate::{Error, NodeId};

/// Error flags of a source microcluster (centre plus four leaves).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Microcluster {
    pub centre_z: bool,
    pub centre_lost: bool,
    pub leaf_z: [bool; 4],
    pub leaf_lost: [bool; 4],
}

/// Error flags of the four destination leaves that receive the qubit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Receivers {
    pub leaf_z: [bool; 4],
    pub leaf_lost: [bool; 4],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Transfer {
    pub located: bool,
    /// Flip of the destination centre's readout (Z on the destination).
    pub z_flip: bool,
    /// Flip of the majority vote (X on the destination).
    pub x_flip: bool,
    pub successes: u8,
}

fn vote(successes: u8, flipped: u8) -> (bool, bool) {
    let tie = successes == 0 || 2 * flipped == successes;
    (tie, 2 * flipped > successes)
}

/// Samples a transfer with `delay` idle steps before the fusions. Draw
/// order matches [`level0_transfer`] for `delay == 0`.
pub fn transfer_bits(
    src: &Microcluster,
    dst: &Receivers,
    delay: usize,
    params: &NoiseParams,
    rng: &mut RandomStream,
) -> Transfer {
    let mut src = *src;
    let mut dst = *dst;
    let mut z_flip = false;
    for _ in 0..delay {
        src.centre_lost |= sample_loss(params, rng);
        src.centre_z ^= sample_depol_single(params, rng).z_bit;
        for k in 0..4 {
            src.leaf_lost[k] |= sample_loss(params, rng);
            let p = sample_depol_single(params, rng);
            src.leaf_z[k] ^= p.z_bit;
            src.centre_z ^= p.x_bit;
        }
        for k in 0..4 {
            dst.leaf_lost[k] |= sample_loss(params, rng);
            let p = sample_depol_single(params, rng);
            dst.leaf_z[k] ^= p.z_bit;
            z_flip ^= p.x_bit;
        }
    }
    let mut located = src.centre_lost | sample_loss(params, rng);
    src.centre_z ^= sample_depol_single(params, rng).z_bit;
    let (mut successes, mut flipped) = (0u8, 0u8);
    for k in 0..4 {
        let l1 = sample_loss(params, rng);
        let l2 = sample_loss(params, rng);
        let (ps, pd) = sample_depol_pair(params, rng);
        let ok = rng.coin();
        let l3 = sample_loss(params, rng);
        let m1 = sample_depol_single(params, rng);
        let l4 = sample_loss(params, rng);
        let m2 = sample_depol_single(params, rng);
        src.centre_z ^= ps.x_bit;
        z_flip ^= pd.x_bit;
        let lost = l1 | l2 | l3 | l4 | src.leaf_lost[k] | dst.leaf_lost[k];
        located |= lost;
        if ok && !lost {
            successes += 1;
            flipped += (src.leaf_z[k] ^ dst.leaf_z[k] ^ ps.z_bit ^ pd.z_bit ^ m1.z_bit ^ m2.z_bit) as u8;
        }
    }
    let (tie, x_flip) = vote(successes, flipped);
    Transfer { located: located | tie, z_flip: z_flip ^ src.centre_z, x_flip, successes }
}

/// Graph version: `src` and `dst` are centres with four leaves each; leaf
/// `k` of `src` is fused with leaf `k` of `dst` (leaves in id order).
pub fn level0_transfer(
    st: &mut ClusterState,
    src: NodeId,
    dst: NodeId,
    params: &NoiseParams,
    rng: &mut RandomStream,
) -> Result<Transfer, Error> {
    let mut src_leaves: Vec<NodeId> = st.neighbors_of(src)?.to_vec();
    let mut dst_leaves: Vec<NodeId> = st.neighbors_of(dst)?.to_vec();
    src_leaves.sort_unstable();
    dst_leaves.sort_unstable();
    if src_leaves.len() != 4 || dst_leaves.len() != 4 {
        return Err(Error::Config("transfer needs four leaves on each side".into()));
    }
    st.mark_terminal(src)?;
    let mut located = apply_location_noise(NoiseLocation::BeforeMeasurement, &[src], st, params, rng)?[0] || st.is_lost(src)?;
    let (mut successes, mut flipped) = (0u8, 0u8);
    for k in 0..4 {
        match st.fuse_and_measure(src_leaves[k], dst_leaves[k], rng, params)? {
            FuseMeasureOutcome::Value { outcome, .. } => {
                successes += 1;
                flipped += outcome.is_minus() as u8;
            }
            FuseMeasureOutcome::Failure => {}
            FuseMeasureOutcome::Located => located = true,
        }
    }
    let z_flip = st.measure_x_with(src)? ^ st.take_z(dst)?;
    let (tie, x_flip) = vote(successes, flipped);
    Ok(Transfer { located: located | tie, z_flip, x_flip, successes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star(st: &mut ClusterState) -> NodeId {
        let c = st.add_node();
        for _ in 0..4 {
            let l = st.add_node();
            st.add_edge(c, l).unwrap();
        }
        c
    }

    #[test]
    fn graph_and_bit_versions_agree() {
        let params = NoiseParams::new(0.05, 0.2).unwrap();
        for seed in 0..2000 {
            let mut st = ClusterState::<bool>::new();
            let s = star(&mut st);
            let d = star(&mut st);
            let mut r1 = RandomStream::new(seed);
            let mut r2 = RandomStream::new(seed);
            let g = level0_transfer(&mut st, s, d, &params, &mut r1).unwrap();
            let b = transfer_bits(&Microcluster::default(), &Receivers::default(), 0, &params, &mut r2);
            assert_eq!(g.successes, b.successes, "seed {seed}");
            assert_eq!(g.located, b.located, "seed {seed}");
            if !g.located {
                assert_eq!((g.z_flip, g.x_flip), (b.z_flip, b.x_flip), "seed {seed}");
            }
        }
    }

    #[test]
    fn noiseless_success_statistics() {
        let params = NoiseParams::noiseless();
        let mut r = RandomStream::new(3);
        let n = 160_000;
        let mut located = 0;
        for _ in 0..n {
            let t = transfer_bits(&Microcluster::default(), &Receivers::default(), 0, &params, &mut r);
            assert!(!t.z_flip && !t.x_flip);
            located += t.located as u32;
        }
        let p = located as f64 / n as f64;
        assert!((p - 1.0 / 16.0).abs() < 0.003, "{p}");
    }

    #[test]
    fn single_leaf_error_outvoted() {
        let mut src = Microcluster::default();
        src.leaf_z[2] = true;
        let params = NoiseParams::noiseless();
        let mut r = RandomStream::new(9);
        for _ in 0..500 {
            let t = transfer_bits(&src, &Receivers::default(), 0, &params, &mut r);
            if t.successes >= 3 {
                assert!(!t.located && !t.x_flip);
            }
            if t.successes == 2 && !t.located {
                assert!(!t.x_flip);
            }
        }
    }

    #[test]
    fn centre_error_becomes_z() {
        let src = Microcluster { centre_z: true, ..Default::default() };
        let mut r = RandomStream::new(1);
        let t = transfer_bits(&src, &Receivers::default(), 0, &NoiseParams::noiseless(), &mut r);
        assert!(t.z_flip);
    }

    #[test]
    fn all_leaves_flipped_flip_the_vote() {
        let src = Microcluster { leaf_z: [true; 4], ..Default::default() };
        let mut r = RandomStream::new(1);
        for _ in 0..100 {
            let t = transfer_bits(&src, &Receivers::default(), 0, &NoiseParams::noiseless(), &mut r);
            assert!(t.located || t.x_flip);
        }
    }
}
