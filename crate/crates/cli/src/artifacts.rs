//! Versioned JSON and CSV outputs. The `data` member of every JSON artifact
//! and every CSV file depend only on the configuration and seed; timing
//! lives under `run`.

use std::fs;
use std::path::Path;

use ed4sim::montecarlo::RateTable;
use ed4sim::resources::ResourceReport;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::commands::{ThresholdData, VerifyData};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub tool_version: String,
    pub workers: usize,
    pub wall_time_s: f64,
}

impl RunInfo {
    pub fn new(wall_time_s: f64) -> Self {
        RunInfo { tool_version: env!("CARGO_PKG_VERSION").into(), workers: rayon::current_num_threads(), wall_time_s }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub schema_version: u32,
    pub kind: String,
    pub data: T,
    pub run: RunInfo,
}

impl<T: Serialize + DeserializeOwned> Artifact<T> {
    pub fn new(kind: &str, data: T, run: RunInfo) -> Self {
        Artifact { schema_version: SCHEMA_VERSION, kind: kind.into(), data, run }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        write_file(path, &(text + "\n"))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let a: Self = serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if a.schema_version != SCHEMA_VERSION {
            return Err(CliError::Io(format!("{}: schema {} not {SCHEMA_VERSION}", path.display(), a.schema_version)));
        }
        Ok(a)
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["schema_version"];
    head.extend_from_slice(header);
    w.write_record(&head).expect("in-memory csv");
    for r in rows {
        let mut rec = vec![SCHEMA_VERSION.to_string()];
        rec.extend(r);
        w.write_record(&rec).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub const RATE_COLUMNS: [&str; 18] = [
    "level",
    "gate",
    "mode",
    "n_samples",
    "located",
    "located_q",
    "q_lo",
    "q_hi",
    "px",
    "px_lo",
    "px_hi",
    "py",
    "py_lo",
    "py_hi",
    "pz",
    "pz_lo",
    "pz_hi",
    "restarts_per_sample",
];

pub fn rate_table_csv(t: &RateTable) -> String {
    let rows = t
        .entries
        .values()
        .map(|e| {
            vec![
                e.level.to_string(),
                e.kind.label(),
                format!("{:?}", e.mode).to_lowercase(),
                e.n_samples.to_string(),
                e.tally.located.to_string(),
                num(e.located_q),
                num(e.lower.q),
                num(e.upper.q),
                num(e.unlocated_px),
                num(e.lower.px),
                num(e.upper.px),
                num(e.unlocated_py),
                num(e.lower.py),
                num(e.upper.py),
                num(e.unlocated_pz),
                num(e.lower.pz),
                num(e.upper.pz),
                num(e.restarts_per_sample),
            ]
        })
        .collect();
    csv_string(&RATE_COLUMNS, rows)
}

pub const CURVE_COLUMNS: [&str; 8] =
    ["method", "gamma", "epsilon_star", "band_lo", "band_hi", "samples_used", "binding_condition", "binding_ratio"];

pub const POINT_COLUMNS: [&str; 10] =
    ["method", "gamma", "epsilon", "pass", "pass_optimistic", "pass_pessimistic", "located", "bell", "memory", "measurement"];

pub fn threshold_csvs(d: &ThresholdData) -> (String, String) {
    let mut curve = Vec::new();
    let mut points = Vec::new();
    for c in &d.curves {
        // the condition closest to its limit, relative to the limit
        let binding = c.margins.iter().max_by(|a, b| (a.value / a.limit).total_cmp(&(b.value / b.limit)));
        curve.push(vec![
            c.method.to_string(),
            num(c.gamma),
            opt(c.epsilon_star),
            opt(c.band.map(|b| b.0)),
            opt(c.band.map(|b| b.1)),
            c.samples_used.to_string(),
            binding.map(|b| b.name.clone()).unwrap_or_default(),
            opt(binding.map(|b| b.value / b.limit)),
        ]);
        for p in &c.points {
            let mut row = vec![
                c.method.to_string(),
                num(c.gamma),
                num(p.epsilon),
                p.pass.to_string(),
                p.pass_optimistic.to_string(),
                p.pass_pessimistic.to_string(),
            ];
            row.extend(p.detail.conditions.iter().map(|k| num(k.value)));
            points.push(row);
        }
    }
    (csv_string(&CURVE_COLUMNS, curve), csv_string(&POINT_COLUMNS, points))
}

pub const RESOURCE_COLUMNS: [&str; 7] = ["method", "gamma", "epsilon", "level", "q_memory", "bell_pairs", "extrapolated"];

pub fn resources_csv(r: &ResourceReport) -> String {
    let m = crate::config::method_number(r.method).to_string();
    let rows = r
        .curve
        .iter()
        .map(|p| {
            vec![
                m.clone(),
                num(r.gamma),
                num(r.epsilon),
                p.level.to_string(),
                num(p.q_memory),
                num(p.bell_pairs),
                p.extrapolated.to_string(),
            ]
        })
        .collect();
    csv_string(&RESOURCE_COLUMNS, rows)
}

pub const VERIFY_COLUMNS: [&str; 5] = ["check", "cases", "failures", "pass", "detail"];

pub fn verify_csv(d: &VerifyData) -> String {
    let rows = d
        .categories
        .iter()
        .map(|c| vec![c.name.clone(), c.cases.to_string(), c.failures.to_string(), c.pass.to_string(), c.detail.clone()])
        .collect();
    csv_string(&VERIFY_COLUMNS, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_headers_are_pinned() {
        let t = rate_table_csv(&RateTable::default());
        assert_eq!(
            t.trim_end(),
            "schema_version,level,gate,mode,n_samples,located,located_q,q_lo,q_hi,px,px_lo,px_hi,py,py_lo,py_hi,pz,pz_lo,pz_hi,restarts_per_sample"
        );
    }

    #[test]
    fn artifact_json_shape_is_pinned() {
        let a = Artifact::new("rate_table", 3u32, RunInfo { tool_version: "x".into(), workers: 1, wall_time_s: 0.5 });
        let v: serde_json::Value = serde_json::to_value(&a).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort();
        assert_eq!(keys, ["data", "kind", "run", "schema_version"]);
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
    }

    #[test]
    fn artifact_round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        let a = Artifact::new("k", vec![1.5f64, 2e-9], RunInfo::new(1.0));
        a.write(&p).unwrap();
        assert_eq!(Artifact::<Vec<f64>>::read(&p).unwrap(), a);
        let bumped = std::fs::read_to_string(&p).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 99");
        std::fs::write(&p, bumped).unwrap();
        assert!(Artifact::<Vec<f64>>::read(&p).is_err());
    }
}
