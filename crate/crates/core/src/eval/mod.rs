//! Desk-scale experiment runners and report tables.

mod metrics;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{feasible_set, load_catalog_file, ComponentCatalog, ComponentId, ComponentSet};
use crate::detection::NoiseModel;
use crate::orchestrator::{run_simulated, OrchestratorError, SessionConfig, SessionResult, Termination};
use crate::planner::motion::MagazineLayout;
use crate::sequence::AssemblySequence;
use crate::workcell::{sample_step_time, OperatorPolicy, ScriptedChoice, StepKind, TimeModel};

pub use metrics::{
    compute_pr, fmt_metric, load_detection_log, mean_std, read_detection_log, write_detection_log,
    ComponentMetrics, DetectionLogRow, MetricsError, MetricsSummary, SessionStats,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("experiment spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Session(#[from] OrchestratorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    E1,
    E2,
    E3,
    Pr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupMode {
    /// Full simulated session with detection, robot and a compliant operator.
    Guided,
    /// Operator alone with the instruction sheet; no detection, no robot.
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub mode: GroupMode,
    pub time_model: TimeModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledLog {
    pub label: String,
    pub path: PathBuf,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    #[serde(default = "one")]
    pub sessions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Free-text provenance of the calibration, copied into reports.
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub time_model: TimeModel,
    /// e2 deviation scripts; `None` enumerates every single-step deviation.
    #[serde(default)]
    pub scripts: Option<Vec<Vec<ScriptedChoice>>>,
    #[serde(default)]
    pub guided: Option<GroupSpec>,
    #[serde(default)]
    pub manual: Option<GroupSpec>,
    #[serde(default)]
    pub detection_logs: Vec<LabeledLog>,
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    #[serde(default)]
    pub layout: Option<PathBuf>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(experiment: ExperimentKind, sessions: usize, seed: u64) -> Self {
        Self {
            experiment,
            sessions,
            seed,
            note: None,
            noise: NoiseModel::noiseless(),
            time_model: TimeModel::guided_default(),
            scripts: None,
            guided: None,
            manual: None,
            detection_logs: Vec::new(),
            catalog: None,
            layout: None,
            max_iterations: None,
        }
    }

    /// Parses a spec; relative paths inside are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, EvalError> {
        let mut spec: Self = serde_json::from_str(text).map_err(|e| EvalError::Spec(e.to_string()))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        spec.catalog.iter_mut().for_each(fix);
        spec.layout.iter_mut().for_each(fix);
        spec.detection_logs.iter_mut().for_each(|l| fix(&mut l.path));
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EvalError::Spec(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.sessions == 0 {
            return Err(EvalError::Spec("sessions must be >= 1".into()));
        }
        self.noise.validate().map_err(EvalError::Spec)?;
        self.time_model.validate().map_err(EvalError::Spec)?;
        if self.experiment == ExperimentKind::E3 && (self.guided.is_none() || self.manual.is_none()) {
            return Err(EvalError::Spec("e3 needs both `guided` and `manual` groups".into()));
        }
        if self.experiment == ExperimentKind::Pr && self.detection_logs.is_empty() {
            return Err(EvalError::Spec("pr needs at least one entry in `detection_logs`".into()));
        }
        Ok(())
    }

    /// Session config built from the spec's catalog and layout (or the defaults).
    pub fn session_config(&self) -> Result<SessionConfig, EvalError> {
        let catalog = match &self.catalog {
            Some(p) => load_catalog_file(p).map_err(|e| EvalError::Spec(e.to_string()))?,
            None => ComponentCatalog::default_aircraft(),
        };
        let layout = match &self.layout {
            Some(p) => MagazineLayout::from_file(p).map_err(|e| EvalError::Spec(e.to_string()))?,
            None => MagazineLayout::default_layout(),
        };
        let mut cfg = SessionConfig::new(catalog, layout);
        cfg.time_model = self.time_model;
        if let Some(m) = self.max_iterations {
            cfg.max_iterations = m;
        }
        Ok(cfg)
    }
}

/// Independent per-session seed for `stream` derived from a base seed.
pub fn derive_seed(base: u64, session: usize, stream: u64) -> u64 {
    // splitmix64 finaliser over a combined counter.
    let mut z = base
        .wrapping_add((session as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn error_detail(counts: &BTreeMap<ComponentId, u32>, catalog: &ComponentCatalog) -> String {
    let parts: Vec<String> = counts
        .iter()
        .filter(|(_, n)| **n > 0)
        .map(|(id, n)| format!("{n}x{}", catalog.name(*id)))
        .collect();
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" ")
    }
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn md_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}|", header.iter().map(|_| "---").collect::<Vec<_>>().join("|"));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out
}

fn mark(success: bool) -> &'static str {
    if success {
        "yes"
    } else {
        "no"
    }
}

/// Everything a runner writes to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedReport {
    pub csv: String,
    pub markdown: String,
    pub json: String,
}

fn session_stats(results: &[&SessionResult]) -> SessionStats {
    let successes = results.iter().filter(|r| r.success).count();
    // Failed sessions have no meaningful completion time.
    let times: Vec<f64> = results
        .iter()
        .filter(|r| r.success)
        .map(|r| r.total_seconds)
        .collect();
    let (mean_time, std_time) = mean_std(&times);
    SessionStats {
        sessions: results.len(),
        success_rate: successes as f64 / results.len().max(1) as f64,
        mean_time,
        std_time,
    }
}

// ---------------------------------------------------------------- e1

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E1Row {
    pub test: usize,
    pub fp: u32,
    pub fn_: u32,
    pub fp_detail: String,
    pub fn_detail: String,
    pub total_time: f64,
    pub avg_llm_time: f64,
    pub success: bool,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E1Report {
    pub rows: Vec<E1Row>,
    pub stats: SessionStats,
    pub note: Option<String>,
}

impl E1Report {
    pub fn render(&self) -> RenderedReport {
        let header = [
            "test",
            "false_positives",
            "false_negatives",
            "total_time_s",
            "avg_llm_time_s",
            "success",
            "termination",
        ];
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.test.to_string(),
                    r.fp_detail.clone(),
                    r.fn_detail.clone(),
                    format!("{:.1}", r.total_time),
                    format!("{:.1}", r.avg_llm_time),
                    mark(r.success).into(),
                    serde_json::to_value(r.termination).unwrap().as_str().unwrap().into(),
                ]
            })
            .collect();
        let md_rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .zip(&rows)
            .map(|(r, row)| {
                let mut row = row.clone();
                if !r.success {
                    row[3] = "-".into();
                }
                row
            })
            .collect();
        let mut md = String::from("# Guided sessions with detection noise\n\n");
        if let Some(n) = &self.note {
            let _ = writeln!(md, "{n}\n");
        }
        let _ = writeln!(
            md,
            "Sessions: {}, success rate: {:.3}, mean time of successful sessions: {} s (sd {} s)\n",
            self.stats.sessions,
            self.stats.success_rate,
            fmt_metric(self.stats.mean_time),
            fmt_metric(self.stats.std_time)
        );
        md.push_str(&md_table(
            &["Test", "False positives", "False negatives", "Total time [s]", "Avg LLM time [s]", "Success", "Termination"],
            &md_rows,
        ));
        RenderedReport {
            csv: csv_string(&header, rows),
            markdown: md,
            json: serde_json::to_string_pretty(self).expect("report serializes"),
        }
    }
}

fn run_many<F>(n: usize, f: F) -> Result<Vec<SessionResult>, EvalError>
where
    F: Fn(usize) -> Result<SessionResult, OrchestratorError> + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| f(i).map_err(EvalError::from))
        .collect()
}

pub fn run_experiment1(spec: &ExperimentSpec) -> Result<E1Report, EvalError> {
    spec.validate()?;
    let base = spec.session_config()?;
    let results = run_many(spec.sessions, |i| {
        let mut cfg = base.clone();
        cfg.seed = derive_seed(spec.seed, i, 2);
        let noise = spec.noise.clone().with_seed(derive_seed(spec.seed, i, 1));
        run_simulated(&cfg, noise, OperatorPolicy::compliant())
    })?;
    let catalog = &base.catalog;
    let rows = results
        .iter()
        .enumerate()
        .map(|(i, r)| E1Row {
            test: i + 1,
            fp: r.total_fp(),
            fn_: r.total_fn(),
            fp_detail: error_detail(&r.fp_count, catalog),
            fn_detail: error_detail(&r.fn_count, catalog),
            total_time: r.total_seconds,
            avg_llm_time: r.avg_llm_seconds,
            success: r.success,
            termination: r.termination,
        })
        .collect();
    Ok(E1Report {
        rows,
        stats: session_stats(&results.iter().collect::<Vec<_>>()),
        note: spec.note.clone(),
    })
}

// ---------------------------------------------------------------- e2

/// Order produced by the lowest-id policy when everything goes right.
pub fn compliant_order(catalog: &ComponentCatalog) -> AssemblySequence {
    let mut order = AssemblySequence::default();
    let mut done = ComponentSet::new();
    while let Some(c) = feasible_set(&done, catalog)
        .ok()
        .and_then(|f| f.into_iter().next())
    {
        done.insert(c);
        order.push(c);
    }
    order
}

/// Every single-step deviation inside the interchangeable part of the order.
///
/// The interchangeable group is the union of all feasible sets with more than
/// one member along the compliant order. For each position held by a group
/// member, the operator is scripted to take each other group member instead.
pub fn single_deviation_scripts(catalog: &ComponentCatalog) -> Vec<Vec<ScriptedChoice>> {
    let order = compliant_order(catalog);
    let mut group = ComponentSet::new();
    let mut done = ComponentSet::new();
    for c in order.as_slice() {
        let f = feasible_set(&done, catalog).unwrap_or_default();
        if f.len() > 1 {
            group.extend(f);
        }
        done.insert(*c);
    }
    let mut scripts = Vec::new();
    for (i, c) in order.as_slice().iter().enumerate() {
        if !group.contains(c) {
            continue;
        }
        for alt in group.iter().filter(|a| *a != c) {
            scripts.push(vec![ScriptedChoice {
                step: i + 1,
                component: *alt,
            }]);
        }
    }
    scripts
}

fn script_label(script: &[ScriptedChoice]) -> String {
    if script.is_empty() {
        return "none".into();
    }
    script
        .iter()
        .map(|s| format!("step {} -> {}", s.step, s.component))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2Row {
    pub test: usize,
    pub script: String,
    pub fp: u32,
    pub fn_: u32,
    pub total_time: f64,
    pub avg_llm_time: f64,
    pub success: bool,
    pub order: String,
    pub rejected_attempts: usize,
    /// False when the scripted part was already gone and the operator complied.
    pub deviated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2Report {
    pub rows: Vec<E2Row>,
    pub stats: SessionStats,
    pub note: Option<String>,
}

impl E2Report {
    pub fn render(&self) -> RenderedReport {
        let header = [
            "test",
            "script",
            "false_positives",
            "false_negatives",
            "total_time_s",
            "avg_llm_time_s",
            "success",
            "assembly_order",
            "rejected_attempts",
            "deviated",
        ];
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.test.to_string(),
                    r.script.clone(),
                    r.fp.to_string(),
                    r.fn_.to_string(),
                    format!("{:.1}", r.total_time),
                    format!("{:.1}", r.avg_llm_time),
                    mark(r.success).into(),
                    r.order.clone(),
                    r.rejected_attempts.to_string(),
                    mark(r.deviated).into(),
                ]
            })
            .collect();
        let mut md = String::from("# Sessions with operator deviations\n\n");
        if let Some(n) = &self.note {
            let _ = writeln!(md, "{n}\n");
        }
        let _ = writeln!(
            md,
            "Sessions: {}, success rate: {:.3}\n",
            self.stats.sessions, self.stats.success_rate
        );
        md.push_str(&md_table(
            &["Test", "Script", "FP", "FN", "Total time [s]", "Avg LLM time [s]", "Success", "Assembly order", "Rejected", "Deviated"],
            &rows,
        ));
        RenderedReport {
            csv: csv_string(&header, rows),
            markdown: md,
            json: serde_json::to_string_pretty(self).expect("report serializes"),
        }
    }
}

pub fn run_experiment2(spec: &ExperimentSpec) -> Result<E2Report, EvalError> {
    spec.validate()?;
    let base = spec.session_config()?;
    let catalog = &base.catalog;
    let scripts = spec
        .scripts
        .clone()
        .unwrap_or_else(|| single_deviation_scripts(catalog));
    for s in &scripts {
        OperatorPolicy::deviate(s.clone())
            .validate(catalog)
            .map_err(EvalError::Spec)?;
    }
    if scripts.is_empty() {
        return Err(EvalError::Spec("no deviation scripts".into()));
    }
    let n = scripts.len() * spec.sessions;
    let results = run_many(n, |i| {
        let mut cfg = base.clone();
        cfg.seed = derive_seed(spec.seed, i, 2);
        let noise = spec.noise.clone().with_seed(derive_seed(spec.seed, i, 1));
        run_simulated(&cfg, noise, OperatorPolicy::deviate(scripts[i % scripts.len()].clone()))
    })?;
    let rows = results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let script = &scripts[i % scripts.len()];
            let deviated = r
                .steps
                .iter()
                .map(|s| &s.operator)
                .chain(&r.drain_events)
                .any(|e| e.is_deviation());
            E2Row {
                test: i + 1,
                script: script_label(script),
                fp: r.total_fp(),
                fn_: r.total_fn(),
                total_time: r.total_seconds,
                avg_llm_time: r.avg_llm_seconds,
                success: r.success,
                order: r.sequence.to_string(),
                rejected_attempts: r.rejected_attempts(),
                deviated,
            }
        })
        .collect();
    Ok(E2Report {
        rows,
        stats: session_stats(&results.iter().collect::<Vec<_>>()),
        note: spec.note.clone(),
    })
}

// ---------------------------------------------------------------- e3

/// One operator assembling every component alone; each step may need rework.
pub fn simulate_manual_session(catalog: &ComponentCatalog, model: &TimeModel, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.0;
    for _ in 0..catalog.len() {
        t += sample_step_time(model, StepKind::HumanAssemble, &mut rng);
        t += sample_step_time(model, StepKind::ManualRework, &mut rng);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub mode: GroupMode,
    pub times: Vec<f64>,
    pub successes: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E3Report {
    pub guided: GroupSummary,
    pub manual: GroupSummary,
    /// `1 - guided.mean / manual.mean`, as a percentage.
    pub reduction_pct: f64,
    pub note: Option<String>,
}

fn run_group(group: &GroupSpec, base: &SessionConfig, sessions: usize) -> Result<GroupSummary, EvalError> {
    let (times, successes) = match group.mode {
        GroupMode::Manual => {
            let times: Vec<f64> = (0..sessions)
                .map(|i| simulate_manual_session(&base.catalog, &group.time_model, derive_seed(group.seed, i, 3)))
                .collect();
            let n = times.len();
            (times, n)
        }
        GroupMode::Guided => {
            let results = run_many(sessions, |i| {
                let mut cfg = base.clone();
                cfg.time_model = group.time_model;
                cfg.seed = derive_seed(group.seed, i, 2);
                let noise = group.noise.clone().with_seed(derive_seed(group.seed, i, 1));
                run_simulated(&cfg, noise, OperatorPolicy::compliant())
            })?;
            let successes = results.iter().filter(|r| r.success).count();
            (results.iter().map(|r| r.total_seconds).collect(), successes)
        }
    };
    let (mean, std) = mean_std(&times);
    Ok(GroupSummary {
        mode: group.mode,
        successes,
        mean: mean.unwrap_or(0.0),
        std: std.unwrap_or(0.0),
        times,
    })
}

impl E3Report {
    pub fn render(&self) -> RenderedReport {
        let header = ["group", "session", "mode", "total_time_s"];
        let mut rows = Vec::new();
        for (name, g) in [("guided", &self.guided), ("manual", &self.manual)] {
            for (i, t) in g.times.iter().enumerate() {
                rows.push(vec![
                    name.to_string(),
                    (i + 1).to_string(),
                    serde_json::to_value(g.mode).unwrap().as_str().unwrap().to_string(),
                    format!("{t:.1}"),
                ]);
            }
        }
        let mut md = String::from("# Assembly time, guided vs manual (calibration)\n\n");
        md.push_str(
            "Both groups are simulated from declared time models; the comparison checks the \
             calibration and is not an independent prediction.\n\n",
        );
        if let Some(n) = &self.note {
            let _ = writeln!(md, "{n}\n");
        }
        md.push_str(&md_table(
            &["Group", "Sessions", "Mean [s]", "SD [s]"],
            &[
                vec!["guided".into(), self.guided.times.len().to_string(), format!("{:.1}", self.guided.mean), format!("{:.1}", self.guided.std)],
                vec!["manual".into(), self.manual.times.len().to_string(), format!("{:.1}", self.manual.mean), format!("{:.1}", self.manual.std)],
            ],
        ));
        let _ = writeln!(md, "\nMean time reduction: {:.1}%", self.reduction_pct);
        RenderedReport {
            csv: csv_string(&header, rows),
            markdown: md,
            json: serde_json::to_string_pretty(self).expect("report serializes"),
        }
    }
}

pub fn run_experiment3(spec: &ExperimentSpec) -> Result<E3Report, EvalError> {
    spec.validate()?;
    let base = spec.session_config()?;
    let guided = run_group(spec.guided.as_ref().expect("validated"), &base, spec.sessions)?;
    let manual = run_group(spec.manual.as_ref().expect("validated"), &base, spec.sessions)?;
    let reduction_pct = if manual.mean > 0.0 {
        100.0 * (1.0 - guided.mean / manual.mean)
    } else {
        0.0
    };
    Ok(E3Report {
        guided,
        manual,
        reduction_pct,
        note: spec.note.clone(),
    })
}

// ---------------------------------------------------------------- pr

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrReport {
    /// Detector label to its per-component metrics, in spec order.
    pub detectors: Vec<(String, MetricsSummary)>,
}

impl PrReport {
    pub fn render(&self) -> RenderedReport {
        let header = ["detector", "component", "tp", "fp", "fn", "tn", "precision", "recall"];
        let mut rows = Vec::new();
        let mut components: Vec<String> = Vec::new();
        for (label, summary) in &self.detectors {
            for (c, m) in &summary.components {
                if !components.contains(c) {
                    components.push(c.clone());
                }
                rows.push(vec![
                    label.clone(),
                    c.clone(),
                    m.tp.to_string(),
                    m.fp.to_string(),
                    m.fn_.to_string(),
                    m.tn.to_string(),
                    fmt_metric(m.precision()),
                    fmt_metric(m.recall()),
                ]);
            }
        }
        let mut md_header = vec!["Component".to_string()];
        for (label, _) in &self.detectors {
            md_header.push(format!("{label} P"));
            md_header.push(format!("{label} R"));
        }
        let md_rows: Vec<Vec<String>> = components
            .iter()
            .map(|c| {
                let mut row = vec![c.clone()];
                for (_, s) in &self.detectors {
                    let m = s.get(c).copied().unwrap_or_default();
                    row.push(fmt_metric(m.precision()));
                    row.push(fmt_metric(m.recall()));
                }
                row
            })
            .collect();
        let mut md = String::from("# Detection precision and recall\n\n");
        let refs: Vec<&str> = md_header.iter().map(String::as_str).collect();
        md.push_str(&md_table(&refs, &md_rows));
        RenderedReport {
            csv: csv_string(&header, rows),
            markdown: md,
            json: serde_json::to_string_pretty(self).expect("report serializes"),
        }
    }
}

pub fn run_pr(spec: &ExperimentSpec) -> Result<PrReport, EvalError> {
    spec.validate()?;
    let mut detectors = Vec::new();
    for log in &spec.detection_logs {
        let rows = load_detection_log(&log.path)?;
        detectors.push((log.label.clone(), compute_pr(&rows)));
    }
    Ok(PrReport { detectors })
}

/// Runs whichever experiment the spec names and renders it.
pub fn run_and_render(spec: &ExperimentSpec) -> Result<RenderedReport, EvalError> {
    Ok(match spec.experiment {
        ExperimentKind::E1 => run_experiment1(spec)?.render(),
        ExperimentKind::E2 => run_experiment2(spec)?.render(),
        ExperimentKind::E3 => run_experiment3(spec)?.render(),
        ExperimentKind::Pr => run_pr(spec)?.render(),
    })
}

/// Writes `<name>.csv`, `<name>.md` and `<name>.json` into `dir`.
pub fn write_report(dir: &Path, name: &str, report: &RenderedReport) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{name}.csv")), &report.csv)?;
    std::fs::write(dir.join(format!("{name}.md")), &report.markdown)?;
    std::fs::write(dir.join(format!("{name}.json")), &report.json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{ComponentNoise, Persistence};

    #[test]
    fn exhaustive_scripts_for_default_catalog() {
        let cat = ComponentCatalog::default_aircraft();
        assert_eq!(compliant_order(&cat).to_string(), "1-2-3-4-5-6-7-8-9");
        let scripts = single_deviation_scripts(&cat);
        assert_eq!(scripts.len(), 12);
        let pairs: Vec<(usize, u32)> = scripts.iter().map(|s| (s[0].step, s[0].component.0)).collect();
        assert_eq!(pairs[0], (5, 6));
        assert_eq!(pairs[11], (8, 7));
        assert!(pairs.iter().all(|(s, c)| (5..=8).contains(s) && (5..=8).contains(c) && *s as u32 != *c));
    }

    #[test]
    fn e1_zero_noise_all_succeed_and_forced_chassis_all_fail() {
        let spec = ExperimentSpec::new(ExperimentKind::E1, 20, 1);
        let r = run_experiment1(&spec).unwrap();
        assert_eq!(r.stats.success_rate, 1.0);

        let mut spec = ExperimentSpec::new(ExperimentKind::E1, 20, 1);
        spec.noise = NoiseModel::noiseless().set(
            7,
            ComponentNoise { fp_rate: 1.0, fn_rate: 0.0, persistence: Persistence::Sticky },
        );
        let r = run_experiment1(&spec).unwrap();
        assert_eq!(r.stats.success_rate, 0.0);
        assert!(r.rows.iter().all(|row| row.termination == Termination::Deadlock));
        let md = r.render().markdown;
        assert!(md.contains("| 1 | 6xchassis | 0 | - | "), "{md}");
    }

    #[test]
    fn e2_table_orders() {
        let mut spec = ExperimentSpec::new(ExperimentKind::E2, 1, 0);
        let sc = |step, c| ScriptedChoice { step, component: ComponentId(c) };
        spec.scripts = Some(vec![
            vec![sc(5, 8)],
            vec![sc(5, 6), sc(6, 7), sc(7, 8)],
            vec![sc(5, 8), sc(6, 6)],
        ]);
        let r = run_experiment2(&spec).unwrap();
        let orders: Vec<&str> = r.rows.iter().map(|x| x.order.as_str()).collect();
        assert_eq!(orders, ["1-2-3-4-8-5-6-7-9", "1-2-3-4-6-7-8-5-9", "1-2-3-4-8-6-5-7-9"]);
        assert_eq!(r.rows.iter().filter(|x| x.deviated).count(), 3);
        assert!(r.rows.iter().all(|x| x.success));
    }

    #[test]
    fn e3_identical_groups_give_zero_reduction() {
        let mut spec = ExperimentSpec::new(ExperimentKind::E3, 5, 0);
        let g = GroupSpec {
            mode: GroupMode::Manual,
            time_model: TimeModel::manual_default(),
            seed: 4,
            noise: NoiseModel::noiseless(),
        };
        spec.guided = Some(g.clone());
        spec.manual = Some(g);
        let r = run_experiment3(&spec).unwrap();
        assert_eq!(r.reduction_pct, 0.0);
    }

    #[test]
    fn reports_are_seed_deterministic() {
        let mut spec = ExperimentSpec::new(ExperimentKind::E1, 30, 17);
        spec.noise = NoiseModel::noiseless().set(
            5,
            ComponentNoise { fp_rate: 0.05, fn_rate: 0.2, persistence: Persistence::IndependentPerCall },
        );
        let a = run_experiment1(&spec).unwrap().render();
        let b = run_experiment1(&spec).unwrap().render();
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_are_distinct() {
        let seeds: std::collections::BTreeSet<u64> =
            (0..1000).flat_map(|i| [derive_seed(7, i, 1), derive_seed(7, i, 2)]).collect();
        assert_eq!(seeds.len(), 2000);
    }
}
