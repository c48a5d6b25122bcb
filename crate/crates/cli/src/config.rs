//! Run configuration: TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use ed4sim::gates::ConcatMethod;
use ed4sim::montecarlo::SamplePlan;
use ed4sim::noise::NoiseParams;
use ed4sim::threshold::EpsilonGrid;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub gammas: Vec<f64>,
    pub methods: Vec<u8>,
    pub eps_min: f64,
    pub eps_max: f64,
    pub coarse_points: usize,
    pub delta: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let g = EpsilonGrid::default();
        SweepConfig {
            gammas: vec![1e-4, 4e-4, 8e-4],
            methods: vec![1, 2],
            eps_min: g.min,
            eps_max: g.max,
            coarse_points: g.coarse_points,
            delta: g.delta,
        }
    }
}

impl SweepConfig {
    pub fn grid(&self) -> EpsilonGrid {
        EpsilonGrid { min: self.eps_min, max: self.eps_max, coarse_points: self.coarse_points, delta: self.delta }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceConfig {
    /// Highest level reported; levels past the sampled ones come from the
    /// recursion.
    pub horizon: u32,
    pub target_q: f64,
}

impl Default for ResourceConfig {
    fn default() -> Self {
        ResourceConfig { horizon: 10, target_q: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub method: u8,
    pub l_c: u32,
    pub max_level: u32,
    pub dangling_count: u32,
    /// Samples at level 0, 1, 2, ...; levels past the end reuse the last.
    pub samples_per_level: Vec<u64>,
    pub seed: u64,
    pub output: PathBuf,
    /// Full-size sample counts and Δε = 1e-6.
    pub full_fidelity: bool,
    pub sweep: SweepConfig,
    pub resources: ResourceConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            gamma: 0.0,
            epsilon: 0.0,
            method: 1,
            l_c: 5,
            max_level: 5,
            dangling_count: 4,
            samples_per_level: vec![100_000, 100_000, 1_000_000, 1_000_000, 1_000_000, 1_000_000],
            seed: 7,
            output: PathBuf::from("out"),
            full_fidelity: false,
            sweep: SweepConfig::default(),
            resources: ResourceConfig::default(),
        }
    }
}

pub fn method_from(m: u8) -> Result<ConcatMethod, CliError> {
    match m {
        1 => Ok(ConcatMethod::Method1),
        2 => Ok(ConcatMethod::Method2),
        _ => Err(CliError::Usage(format!("method must be 1 or 2, got {m}"))),
    }
}

pub fn method_number(m: ConcatMethod) -> u8 {
    match m {
        ConcatMethod::Method1 => 1,
        ConcatMethod::Method2 => 2,
    }
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("reading {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    /// Swaps in full-size samples and Δε.
    pub fn apply_full_fidelity(&mut self) {
        if self.full_fidelity {
            let full = SamplePlan::full();
            self.samples_per_level = (0..=self.max_level).map(|l| full.at(l)).collect();
            self.sweep.delta = 1e-6;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        NoiseParams::new(self.gamma, self.epsilon).map_err(|e| CliError::Usage(e.to_string()))?;
        method_from(self.method)?;
        // TOML integers are signed
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed must be at most {}", i64::MAX));
        }
        if self.dangling_count != 4 {
            return bad(format!("dangling_count is fixed at 4, got {}", self.dangling_count));
        }
        if self.l_c < 1 {
            return bad("l_c must be at least 1".into());
        }
        if !(1..=12).contains(&self.max_level) {
            return bad(format!("max_level must lie in 1..=12, got {}", self.max_level));
        }
        if self.samples_per_level.is_empty() || self.samples_per_level.contains(&0) {
            return bad("samples_per_level needs positive entries".into());
        }
        let s = &self.sweep;
        if s.gammas.is_empty() || s.gammas.iter().any(|g| !(0.0..1.0).contains(g)) {
            return bad("sweep.gammas must be non-empty values in [0, 1)".into());
        }
        for &m in &s.methods {
            method_from(m)?;
        }
        if s.coarse_points < 2 || !(s.delta > 0.0) || !(s.eps_max > s.eps_min) || s.eps_min < 0.0 || s.eps_max > 1.0 {
            return bad("sweep grid needs coarse_points >= 2, delta > 0 and 0 <= eps_min < eps_max <= 1".into());
        }
        let r = &self.resources;
        if r.horizon < 2 || !(r.target_q > 0.0 && r.target_q < 1.0) {
            return bad("resources need horizon >= 2 and 0 < target_q < 1".into());
        }
        Ok(())
    }

    pub fn params(&self) -> NoiseParams {
        NoiseParams { gamma: self.gamma, epsilon: self.epsilon }
    }

    pub fn plan(&self) -> SamplePlan {
        SamplePlan { per_level: self.samples_per_level.clone() }
    }

    pub fn concat_method(&self) -> ConcatMethod {
        method_from(self.method).expect("validated")
    }
}
