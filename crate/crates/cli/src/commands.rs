//! Subcommand bodies. Each returns its data payload; `write_*` put the
//! artifacts under the configured output directory.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use ed4sim::cluster::Mutation;
use ed4sim::code::{code_properties, DetectionMode};
use ed4sim::gates::GateKind;
use ed4sim::montecarlo::{RateTable, Sampler};
use ed4sim::oracle::verify_encoded_states;
use ed4sim::resources::{resource_report, ResourceReport};
use ed4sim::threshold::{epsilon_threshold, loss_only_threshold, Condition, EpsilonGrid, ThresholdPoint, CRITERION_LEVEL};
use ed4sim::verify::{memory_pattern, run_all, sweep, sweep_singles, transfer_pattern, SweepReport, Verdict};
use serde::{Deserialize, Serialize};

use crate::artifacts::{rate_table_csv, resources_csv, threshold_csvs, verify_csv, write_file, Artifact, RunInfo};
use crate::config::{method_from, SimConfig};
use crate::CliError;

pub type Progress<'a> = &'a dyn Fn(&str);

fn sampler(cfg: &SimConfig, gamma: f64, epsilon: f64, method: u8) -> Result<Sampler, CliError> {
    let params = ed4sim::noise::NoiseParams::new(gamma, epsilon).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Sampler::new(params, method_from(method)?, cfg.l_c)?)
}

fn level_summary(level: u32, t: &RateTable) -> String {
    match t.get(level, GateKind::Memory, DetectionMode::Weak) {
        Ok(e) => format!(
            "level {level}: memory q = {:.4e} ± {:.1e}, unlocated = {:.2e} ({} samples)",
            e.located_q,
            e.ci_halfwidth.q,
            e.rates().unlocated_total(),
            e.n_samples
        ),
        Err(_) => format!("level {level} done"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateData {
    pub gamma: f64,
    pub epsilon: f64,
    pub method: u8,
    pub l_c: u32,
    pub max_level: u32,
    pub seed: u64,
    pub samples_per_level: Vec<u64>,
    pub table: RateTable,
}

pub fn estimate(cfg: &SimConfig, progress: Progress) -> Result<EstimateData, CliError> {
    let s = sampler(cfg, cfg.gamma, cfg.epsilon, cfg.method)?;
    let table = s.propagate_levels(cfg.max_level, &cfg.plan(), cfg.seed, |l, t| progress(&level_summary(l, t)))?;
    Ok(EstimateData {
        gamma: cfg.gamma,
        epsilon: cfg.epsilon,
        method: cfg.method,
        l_c: cfg.l_c,
        max_level: cfg.max_level,
        seed: cfg.seed,
        samples_per_level: cfg.samples_per_level.clone(),
        table,
    })
}

pub fn write_estimate(dir: &Path, data: EstimateData, wall: f64) -> Result<Vec<PathBuf>, CliError> {
    let csv = dir.join("rates.csv");
    write_file(&csv, &rate_table_csv(&data.table))?;
    let json = dir.join("rates.json");
    Artifact::new("rate_table", data, RunInfo::new(wall)).write(&json)?;
    Ok(vec![json, csv])
}

/// Identity of one sweep point in the resume cache.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointKey {
    pub gamma: f64,
    pub epsilon: f64,
    pub method: u8,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CachedPoint {
    key: PointKey,
    /// l_c and sample counts; points computed under other settings are
    /// ignored.
    settings: String,
    samples: u64,
    point: ThresholdPoint,
}

/// Append-only record of finished sweep points.
pub struct PointCache {
    path: PathBuf,
    settings: String,
    points: Vec<CachedPoint>,
    pub reused: usize,
    pub computed: usize,
}

impl PointCache {
    pub fn open(path: PathBuf, settings: String) -> Result<Self, CliError> {
        let mut points = Vec::new();
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            // a run killed mid-write leaves a partial last line
            for line in text.lines() {
                if let Ok(p) = serde_json::from_str::<CachedPoint>(line) {
                    if p.settings == settings {
                        points.push(p);
                    }
                }
            }
            if !text.is_empty() && !text.ends_with('\n') {
                let mut f = OpenOptions::new().append(true).open(&path).map_err(|e| CliError::Io(e.to_string()))?;
                writeln!(f).map_err(|e| CliError::Io(e.to_string()))?;
            }
        }
        Ok(PointCache { path, settings, points, reused: 0, computed: 0 })
    }

    fn find(&self, key: &PointKey) -> Option<&CachedPoint> {
        self.points.iter().find(|p| p.key == *key)
    }

    fn push(&mut self, p: CachedPoint) -> Result<(), CliError> {
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(f, "{}", serde_json::to_string(&p).map_err(|e| CliError::Io(e.to_string()))?)
            .map_err(|e| CliError::Io(e.to_string()))?;
        self.points.push(p);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub method: u8,
    pub gamma: f64,
    pub epsilon_star: Option<f64>,
    pub band: Option<(f64, f64)>,
    /// Criterion margins at ε*, or at the first point when nothing passes.
    pub margins: Vec<Condition>,
    pub samples_used: u64,
    pub points: Vec<ThresholdPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdData {
    /// ε = 0 threshold from the located-only recursion.
    pub gamma_star: f64,
    pub l_c: u32,
    pub seed: u64,
    pub samples_per_level: Vec<u64>,
    pub grid: EpsilonGrid,
    pub curves: Vec<CurveRecord>,
}

pub fn settings_fingerprint(cfg: &SimConfig) -> String {
    format!("l_c={};samples={:?}", cfg.l_c, cfg.samples_per_level)
}

pub fn threshold(cfg: &SimConfig, cache: &mut PointCache, progress: Progress) -> Result<ThresholdData, CliError> {
    let gamma_star = loss_only_threshold(cfg.l_c, 1e-4);
    progress(&format!("loss-only threshold gamma* = {gamma_star:.4e}"));
    let grid = cfg.sweep.grid();
    let mut curves = Vec::new();
    for &method in &cfg.sweep.methods {
        for &gamma in &cfg.sweep.gammas {
            let mut samples_used = 0;
            let mut eval = |eps: f64| -> Result<ThresholdPoint, ed4sim::Error> {
                let key = PointKey { gamma, epsilon: eps, method, seed: cfg.seed };
                if let Some(c) = cache.find(&key).cloned() {
                    cache.reused += 1;
                    samples_used += c.samples;
                    progress(&format!("method {method} gamma {gamma:.2e} eps {eps:.3e}: cached, pass = {}", c.point.pass));
                    return Ok(c.point);
                }
                let s = sampler(cfg, gamma, eps, method).map_err(|e| ed4sim::Error::Config(e.to_string()))?;
                let table = s.propagate_levels(CRITERION_LEVEL, &cfg.plan(), cfg.seed, |_, _| {})?;
                let point = ThresholdPoint::from_table(eps, &table)?;
                let samples = table.entries.values().filter(|e| e.mode == DetectionMode::Weak).map(|e| e.n_samples).sum();
                samples_used += samples;
                progress(&format!(
                    "method {method} gamma {gamma:.2e} eps {eps:.3e}: pass = {} (optimistic {}, pessimistic {}), level-5 memory q = {:.3e}",
                    point.pass,
                    point.pass_optimistic,
                    point.pass_pessimistic,
                    table.get(CRITERION_LEVEL, GateKind::Memory, DetectionMode::Weak).map(|e| e.located_q).unwrap_or(f64::NAN)
                ));
                cache
                    .push(CachedPoint { key, settings: cache.settings.clone(), samples, point: point.clone() })
                    .map_err(|e| ed4sim::Error::Config(e.to_string()))?;
                cache.computed += 1;
                Ok(point)
            };
            let t = epsilon_threshold(gamma, gamma_star, &grid, &mut eval)?;
            let at_star = t.epsilon_star.and_then(|s| t.points.iter().find(|p| p.epsilon == s)).or(t.points.first());
            curves.push(CurveRecord {
                method,
                gamma,
                epsilon_star: t.epsilon_star,
                band: t.band,
                margins: at_star.map(|p| p.detail.conditions.clone()).unwrap_or_default(),
                samples_used,
                points: t.points,
            });
        }
    }
    Ok(ThresholdData { gamma_star, l_c: cfg.l_c, seed: cfg.seed, samples_per_level: cfg.samples_per_level.clone(), grid, curves })
}

pub fn write_threshold(dir: &Path, data: ThresholdData, wall: f64) -> Result<Vec<PathBuf>, CliError> {
    let (curve, points) = threshold_csvs(&data);
    let (c, p, j) = (dir.join("threshold_curve.csv"), dir.join("threshold_points.csv"), dir.join("threshold.json"));
    write_file(&c, &curve)?;
    write_file(&p, &points)?;
    Artifact::new("threshold_curve", data, RunInfo::new(wall)).write(&j)?;
    Ok(vec![j, c, p])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceData {
    pub seed: u64,
    pub samples_per_level: Vec<u64>,
    pub sampled_levels: u32,
    pub report: ResourceReport,
}

pub fn resources(cfg: &SimConfig, progress: Progress) -> Result<ResourceData, CliError> {
    let s = sampler(cfg, cfg.gamma, cfg.epsilon, cfg.method)?;
    let horizon = cfg.resources.horizon.max(cfg.max_level);
    let table = s.propagate_to(cfg.max_level, horizon, &cfg.plan(), cfg.seed, |l, t| progress(&level_summary(l, t)))?;
    let report = resource_report(&s, &table, horizon, cfg.resources.target_q)?;
    progress(&format!(
        "switching to the recursion above level {}; cost at Q_M = {:.0e}: {}",
        report.switch_level,
        report.target_q,
        report.cost_at_target.map(|c| format!("{c:.3e} Bell pairs")).unwrap_or_else(|| "not reached".into())
    ));
    Ok(ResourceData { seed: cfg.seed, samples_per_level: cfg.samples_per_level.clone(), sampled_levels: cfg.max_level, report })
}

pub fn write_resources(dir: &Path, data: ResourceData, wall: f64) -> Result<Vec<PathBuf>, CliError> {
    let (c, j) = (dir.join("resources.csv"), dir.join("resources.json"));
    write_file(&c, &resources_csv(&data.report))?;
    Artifact::new("resource_curve", data, RunInfo::new(wall)).write(&j)?;
    Ok(vec![j, c])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyData {
    pub pass: bool,
    pub categories: Vec<Category>,
    pub sweeps: Vec<SweepReport>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifySettings {
    /// Pair sweeps are exhaustive up to this many cases.
    pub exhaustive_pairs: usize,
    /// Random pairs on larger patterns.
    pub sampled_pairs: usize,
    pub seed: u64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings { exhaustive_pairs: 100_000, sampled_pairs: 1_000, seed: 7 }
    }
}

fn sweep_category(name: &str, reports: &[&SweepReport]) -> Category {
    let cases = reports.iter().map(|r| r.cases).sum();
    let failures = reports.iter().map(|r| r.mismatches.len()).sum();
    let mut verdicts: BTreeMap<Verdict, usize> = BTreeMap::new();
    for r in reports {
        for (v, n) in &r.verdicts {
            *verdicts.entry(*v).or_default() += n;
        }
    }
    let detail = verdicts.iter().map(|(v, n)| format!("{v:?}={n}")).collect::<Vec<_>>().join(" ");
    Category { name: name.into(), cases, failures, pass: failures == 0, detail }
}

pub fn verify(settings: &VerifySettings, progress: Progress) -> Result<VerifyData, CliError> {
    let mut categories = Vec::new();
    let code = code_properties();
    categories.push(Category {
        name: "code-properties".into(),
        cases: code.weight_one_total + 1 + code.stabilizer_group_size,
        failures: (code.weight_one_total - code.weight_one_detected)
            + (!code.x1x2_logical_x) as usize
            + (code.stabilizer_group_size - code.stabilizers_logical_i),
        pass: code.pass(),
        detail: format!(
            "weight-1 detected {}/{}, X1X2 logical X {}, stabilizers logical I {}/{}",
            code.weight_one_detected,
            code.weight_one_total,
            code.x1x2_logical_x,
            code.stabilizers_logical_i,
            code.stabilizer_group_size
        ),
    });
    let states = verify_encoded_states();
    categories.push(Category {
        name: "encoded-states".into(),
        cases: states.checks,
        failures: states.failures.len(),
        pass: states.passed(),
        detail: states.failures.join("; "),
    });
    progress("code and encoded-state checks done");
    // error-free runs of the transfer circuit and every level-0 transfer
    let mut identity = vec![sweep(&memory_pattern(true, false), &[Vec::new()], Mutation::None)?];
    for s in 0..16 {
        identity.push(sweep(&transfer_pattern(s), &[Vec::new()], Mutation::None)?);
    }
    categories.push(sweep_category("transfer-identity", &identity.iter().collect::<Vec<_>>()));
    let sweeps = run_all(settings.exhaustive_pairs, settings.sampled_pairs, settings.seed, Mutation::None)?;
    let singles: Vec<&SweepReport> = sweeps.iter().filter(|r| !r.pattern.ends_with("(pairs)")).collect();
    let pairs: Vec<&SweepReport> = sweeps.iter().filter(|r| r.pattern.ends_with("(pairs)")).collect();
    categories.push(sweep_category("single-error-sweep", &singles));
    categories.push(sweep_category("double-error-sweep", &pairs));
    progress("engine/oracle sweeps done");
    // a deliberately broken engine must be caught
    let p = transfer_pattern(0b1111);
    let mut caught = 0;
    let mut detail = Vec::new();
    for m in [Mutation::FusionDropsSecondFlag, Mutation::IgnoreXErrors] {
        let r = sweep_singles(&p, m)?;
        caught += (!r.pass()) as usize;
        detail.push(format!("{m:?}: {} mismatches", r.mismatches.len()));
    }
    categories.push(Category {
        name: "mutation-detection".into(),
        cases: 2,
        failures: 2 - caught,
        pass: caught == 2,
        detail: detail.join("; "),
    });
    Ok(VerifyData { pass: categories.iter().all(|c| c.pass), categories, sweeps })
}

pub fn write_verify(dir: &Path, data: VerifyData, wall: f64) -> Result<Vec<PathBuf>, CliError> {
    let (c, j) = (dir.join("verify.csv"), dir.join("verify.json"));
    write_file(&c, &verify_csv(&data))?;
    let text = serde_json::to_string_pretty(&serde_json::json!({
        "schema_version": crate::artifacts::SCHEMA_VERSION,
        "kind": "verification",
        "data": data,
        "run": RunInfo::new(wall),
    }))
    .map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&j, &(text + "\n"))?;
    Ok(vec![j, c])
}
