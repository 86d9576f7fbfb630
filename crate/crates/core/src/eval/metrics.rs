//! Precision and recall over per-observation detection logs.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionLogRow {
    pub test_id: String,
    pub component: String,
    pub ground_truth: bool,
    pub predicted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("malformed log row {line}: {reason}")]
    MalformedLogRow { line: usize, reason: String },
    #[error("detection log io: {0}")]
    Io(String),
}

#[derive(Debug, Deserialize)]
struct RawRow {
    test_id: String,
    component: String,
    ground_truth: String,
    predicted: String,
}

fn flag(v: &str, column: &str, line: usize) -> Result<bool, MetricsError> {
    match v.trim() {
        "1" => Ok(true),
        "0" => Ok(false),
        other => Err(MetricsError::MalformedLogRow {
            line,
            reason: format!("{column} must be 0 or 1, got {other:?}"),
        }),
    }
}

/// Reads `test_id,component,ground_truth,predicted` CSV with a header row.
pub fn read_detection_log<R: Read>(reader: R) -> Result<Vec<DetectionLogRow>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<RawRow>().enumerate() {
        // Header is line 1.
        let line = i + 2;
        let raw = rec.map_err(|e| MetricsError::MalformedLogRow {
            line,
            reason: e.to_string(),
        })?;
        if raw.component.is_empty() {
            return Err(MetricsError::MalformedLogRow {
                line,
                reason: "empty component".into(),
            });
        }
        rows.push(DetectionLogRow {
            ground_truth: flag(&raw.ground_truth, "ground_truth", line)?,
            predicted: flag(&raw.predicted, "predicted", line)?,
            test_id: raw.test_id,
            component: raw.component,
        });
    }
    Ok(rows)
}

pub fn load_detection_log(path: &Path) -> Result<Vec<DetectionLogRow>, MetricsError> {
    let f = std::fs::File::open(path).map_err(|e| MetricsError::Io(format!("{}: {e}", path.display())))?;
    read_detection_log(f)
}

pub fn write_detection_log(path: &Path, rows: &[DetectionLogRow]) -> Result<(), MetricsError> {
    let io = |e: csv::Error| MetricsError::Io(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["test_id", "component", "ground_truth", "predicted"])
        .map_err(io)?;
    for r in rows {
        w.write_record([
            r.test_id.as_str(),
            r.component.as_str(),
            if r.ground_truth { "1" } else { "0" },
            if r.predicted { "1" } else { "0" },
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| MetricsError::Io(e.to_string()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentMetrics {
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
    pub tn: u32,
}

impl ComponentMetrics {
    /// `None` when nothing was predicted present.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `None` when the component was never actually present.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }
}

/// Two-decimal rendering with `N/A` for undefined values.
pub fn fmt_metric(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.2}"),
        None => "N/A".to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub sessions: usize,
    pub success_rate: f64,
    pub mean_time: Option<f64>,
    pub std_time: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub components: BTreeMap<String, ComponentMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sessions: Option<SessionStats>,
}

impl MetricsSummary {
    pub fn get(&self, component: &str) -> Option<&ComponentMetrics> {
        self.components.get(component)
    }
}

pub fn compute_pr(rows: &[DetectionLogRow]) -> MetricsSummary {
    let mut components: BTreeMap<String, ComponentMetrics> = BTreeMap::new();
    for r in rows {
        let m = components.entry(r.component.clone()).or_default();
        match (r.predicted, r.ground_truth) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    MetricsSummary {
        components,
        sessions: None,
    }
}

/// Mean and sample standard deviation; `None` for empty input (std needs two values).
pub fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), None);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}
