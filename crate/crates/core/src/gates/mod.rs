//! Encoded gate samplers: the level-0 photonic transfer, level-1 cluster
//! templates and the level-2+ circuits built from lower-level rates.

pub mod highlevel;
pub mod level0;
pub mod level1;
pub mod template;

use serde::{Deserialize, Serialize};

use crate::pauli::Pauli;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    BellPrep,
    Memory,
    MeasurementX,
    Cphase,
    CphasePlusMeasurement,
    /// Memory whose data step waits `n` extra time steps.
    DelayedMeasurement(u8),
}

impl GateKind {
    pub fn label(self) -> String {
        match self {
            GateKind::BellPrep => "bell".into(),
            GateKind::Memory => "memory".into(),
            GateKind::MeasurementX => "measurement".into(),
            GateKind::Cphase => "cphase".into(),
            GateKind::CphasePlusMeasurement => "cphase_measure".into(),
            GateKind::DelayedMeasurement(n) => format!("dm{n}"),
        }
    }

    pub fn parse(s: &str) -> Option<GateKind> {
        Some(match s {
            "bell" => GateKind::BellPrep,
            "memory" => GateKind::Memory,
            "measurement" => GateKind::MeasurementX,
            "cphase" => GateKind::Cphase,
            "cphase_measure" => GateKind::CphasePlusMeasurement,
            _ => GateKind::DelayedMeasurement(s.strip_prefix("dm")?.parse().ok()?),
        })
    }

    /// Stable small integer used to key random substreams.
    pub fn key(self) -> u64 {
        match self {
            GateKind::BellPrep => 0,
            GateKind::Memory => 1,
            GateKind::MeasurementX => 2,
            GateKind::Cphase => 3,
            GateKind::CphasePlusMeasurement => 4,
            GateKind::DelayedMeasurement(n) => 16 + n as u64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConcatMethod {
    /// Weak detection only for data-side operations.
    Method1,
    /// Weak detection also for the level-2 ancilla.
    Method2,
}

/// Result of one accepted gate execution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateOutcome {
    Located,
    /// Residual logical Pauli on each output (unused slots are identity).
    /// For measurements the Z bit of the first slot is the result flip.
    Unlocated([Pauli; 2]),
}

impl GateOutcome {
    pub const CLEAN: GateOutcome = GateOutcome::Unlocated([Pauli::I, Pauli::I]);

    pub fn is_located(self) -> bool {
        matches!(self, GateOutcome::Located)
    }

    pub fn first(self) -> Option<Pauli> {
        match self {
            GateOutcome::Located => None,
            GateOutcome::Unlocated(p) => Some(p[0]),
        }
    }
}
