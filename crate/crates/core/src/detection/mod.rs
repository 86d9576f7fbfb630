//! Presence detection of assembled components.
//!
//! A [`Detector`] turns a [`SceneSnapshot`] into a [`DetectionReport`] with one
//! YES/NO verdict per catalog component. Three backends are provided: a vision
//! chat model reached over HTTP ([`LlmDetector`]), a ground-truth oracle with
//! configurable noise ([`OracleDetector`]) and a fixture replayer
//! ([`ReplayDetector`]).

mod llm;
mod noise;
mod parse;
mod prompt;
mod replay;
pub mod tokens;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{ComponentCatalog, ComponentId, ComponentSet};
use crate::workcell::SceneSnapshot;

pub use llm::LlmDetector;
pub use noise::{ComponentNoise, NoiseModel, OracleDetector, Persistence};
pub use parse::{parse_detection_response, ParseError};
pub use crate::chat::{PromptBundle, UserItem};
pub use prompt::{build_detection_prompt, format_report_lines, DETECTION_SYSTEM_TEXT};
pub use replay::{
    bundle_hash, load_fixture, write_fixture, RecordingDetector, ReplayDetector, ReplayRecord,
};
pub use tokens::estimate_image_tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detail {
    Low,
    High,
}

/// Where the encoded image bytes live.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadRef {
    File(PathBuf),
    /// Placeholder used in simulation, e.g. `sim:top?assembled=1,2`.
    Symbolic(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageSpec {
    pub width: u32,
    pub height: u32,
    pub detail: Detail,
    pub payload: PayloadRef,
}

impl ImageSpec {
    pub fn new(width: u32, height: u32, detail: Detail, payload: PayloadRef) -> Option<Self> {
        (width > 0 && height > 0).then_some(Self {
            width,
            height,
            detail,
            payload,
        })
    }

    /// 680x480 scene camera frame.
    pub fn scene_camera(payload: PayloadRef) -> Self {
        Self {
            width: 680,
            height: 480,
            detail: Detail::High,
            payload,
        }
    }

    /// 768x2048 component list image, always analysed in high detail.
    pub fn catalog_sheet(payload: PayloadRef) -> Self {
        Self {
            width: 768,
            height: 2048,
            detail: Detail::High,
            payload,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Present,
    Absent,
}

impl Verdict {
    pub fn from_bool(present: bool) -> Self {
        if present {
            Verdict::Present
        } else {
            Verdict::Absent
        }
    }

    pub fn is_present(self) -> bool {
        self == Verdict::Present
    }

    pub fn as_answer(self) -> &'static str {
        match self {
            Verdict::Present => "YES",
            Verdict::Absent => "NO",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionSource {
    Llm,
    Oracle,
    Replay,
    ExternalLog,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub image_tokens: u32,
    pub prompt_tokens: Option<u32>,
    pub completion_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub verdicts: BTreeMap<ComponentId, Verdict>,
    pub source: DetectionSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    /// Seconds since session start.
    pub timestamp: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
}

impl DetectionReport {
    /// Report marking exactly `present` as assembled.
    pub fn from_present(
        catalog: &ComponentCatalog,
        present: &ComponentSet,
        source: DetectionSource,
        timestamp: f64,
    ) -> Self {
        Self {
            verdicts: catalog
                .ids()
                .map(|id| (id, Verdict::from_bool(present.contains(&id))))
                .collect(),
            source,
            raw_text: None,
            timestamp,
            usage: None,
        }
    }

    pub fn present(&self) -> ComponentSet {
        self.verdicts
            .iter()
            .filter(|(_, v)| v.is_present())
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn verdict(&self, id: ComponentId) -> Option<Verdict> {
        self.verdicts.get(&id).copied()
    }

    /// True when the report covers exactly the catalog ids.
    pub fn is_complete_for(&self, catalog: &ComponentCatalog) -> bool {
        self.verdicts.len() == catalog.len() && catalog.ids().all(|id| self.verdicts.contains_key(&id))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectionError {
    #[error("detector backend timed out")]
    BackendTimeout,
    #[error("detector backend protocol error: {0}")]
    BackendProtocolError(String),
    #[error("detector backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("could not parse detector response: {0}")]
    ParseFailure(#[from] ParseError),
    #[error("no replay record for request {0}")]
    ReplayMiss(String),
}

/// A presence detector. One call per loop iteration.
pub trait Detector: Send {
    fn detect(
        &mut self,
        scene: &SceneSnapshot,
        prior: Option<&DetectionReport>,
    ) -> Result<DetectionReport, DetectionError>;
}

impl<D: Detector + ?Sized> Detector for Box<D> {
    fn detect(
        &mut self,
        scene: &SceneSnapshot,
        prior: Option<&DetectionReport>,
    ) -> Result<DetectionReport, DetectionError> {
        (**self).detect(scene, prior)
    }
}

/// Number of extra attempts after a failed detection call.
pub const DETECTION_RETRIES: u32 = 2;

/// Calls `detector`, retrying up to `retries` times with fresh requests.
///
/// Returns the final error together with the number of attempts made.
pub fn detect_with_retry<D: Detector + ?Sized>(
    detector: &mut D,
    scene: &SceneSnapshot,
    prior: Option<&DetectionReport>,
    retries: u32,
) -> Result<(DetectionReport, u32), (DetectionError, u32)> {
    let mut attempts = 0;
    loop {
        attempts += 1;
        match detector.detect(scene, prior) {
            Ok(report) => return Ok((report, attempts)),
            Err(e) if attempts > retries => return Err((e, attempts)),
            Err(e) => tracing::warn!(attempt = attempts, error = %e, "detection failed, retrying"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::set_of;

    struct Flaky {
        failures: u32,
    }

    impl Detector for Flaky {
        fn detect(
            &mut self,
            scene: &SceneSnapshot,
            _prior: Option<&DetectionReport>,
        ) -> Result<DetectionReport, DetectionError> {
            if self.failures > 0 {
                self.failures -= 1;
                return Err(DetectionError::BackendTimeout);
            }
            let cat = ComponentCatalog::default_aircraft();
            Ok(DetectionReport::from_present(
                &cat,
                &scene.view,
                DetectionSource::Oracle,
                scene.clock,
            ))
        }
    }

    #[test]
    fn retry_recovers_within_budget() {
        let scene = SceneSnapshot::symbolic(set_of([1, 2]), 0.0);
        let (report, attempts) =
            detect_with_retry(&mut Flaky { failures: 2 }, &scene, None, DETECTION_RETRIES).unwrap();
        assert_eq!(attempts, 3);
        assert_eq!(report.present(), set_of([1, 2]));
    }

    #[test]
    fn retry_gives_up() {
        let scene = SceneSnapshot::symbolic(set_of([1, 2]), 0.0);
        let (err, attempts) =
            detect_with_retry(&mut Flaky { failures: 3 }, &scene, None, DETECTION_RETRIES)
                .unwrap_err();
        assert_eq!(attempts, 3);
        assert_eq!(err, DetectionError::BackendTimeout);
    }

    #[test]
    fn zero_size_image_rejected() {
        assert!(ImageSpec::new(0, 10, Detail::High, PayloadRef::Symbolic("x".into())).is_none());
    }
}
