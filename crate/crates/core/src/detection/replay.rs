//! Recorded request/response fixtures for deterministic detector replay.
//!
//! A fixture is newline-delimited JSON, one `{"request_hash", "response_text"}`
//! record per line. The hash is SHA-256 over the serialized prompt bundle, so a
//! replay only answers the exact request that was recorded.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::ComponentCatalog;
use crate::chat::PromptBundle;
use crate::workcell::SceneSnapshot;

use super::{
    build_detection_prompt, format_report_lines, parse_detection_response, DetectionError,
    DetectionReport, DetectionSource, Detector, ImageSpec,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub request_hash: String,
    pub response_text: String,
}

pub fn bundle_hash(bundle: &PromptBundle) -> String {
    let json = serde_json::to_vec(bundle).expect("bundle serializes");
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_fixture(path: &Path) -> std::io::Result<Vec<ReplayRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), n + 1),
            )
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_fixture(path: &Path, records: &[ReplayRecord]) -> std::io::Result<()> {
    let mut f = File::create(path)?;
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ReplayDetector {
    catalog: ComponentCatalog,
    catalog_image: ImageSpec,
    responses: HashMap<String, String>,
}

impl ReplayDetector {
    pub fn new(
        catalog: ComponentCatalog,
        catalog_image: ImageSpec,
        records: impl IntoIterator<Item = ReplayRecord>,
    ) -> Self {
        Self {
            catalog,
            catalog_image,
            responses: records
                .into_iter()
                .map(|r| (r.request_hash, r.response_text))
                .collect(),
        }
    }

    pub fn from_file(
        catalog: ComponentCatalog,
        catalog_image: ImageSpec,
        path: &Path,
    ) -> std::io::Result<Self> {
        Ok(Self::new(catalog, catalog_image, load_fixture(path)?))
    }
}

impl Detector for ReplayDetector {
    fn detect(
        &mut self,
        scene: &SceneSnapshot,
        prior: Option<&DetectionReport>,
    ) -> Result<DetectionReport, DetectionError> {
        let bundle = build_detection_prompt(&self.catalog, &self.catalog_image, &scene.images, prior)
            .map_err(|e| DetectionError::BackendProtocolError(e.to_string()))?;
        let hash = bundle_hash(&bundle);
        let text = self
            .responses
            .get(&hash)
            .ok_or(DetectionError::ReplayMiss(hash))?;
        let mut report = parse_detection_response(text, &self.catalog)?;
        report.source = DetectionSource::Replay;
        report.timestamp = scene.clock;
        Ok(report)
    }
}

/// Wraps a detector and records each request/response pair it serves.
#[derive(Debug)]
pub struct RecordingDetector<D> {
    inner: D,
    catalog: ComponentCatalog,
    catalog_image: ImageSpec,
    records: Vec<ReplayRecord>,
}

impl<D: Detector> RecordingDetector<D> {
    pub fn new(inner: D, catalog: ComponentCatalog, catalog_image: ImageSpec) -> Self {
        Self {
            inner,
            catalog,
            catalog_image,
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[ReplayRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ReplayRecord> {
        self.records
    }
}

impl<D: Detector> Detector for RecordingDetector<D> {
    fn detect(
        &mut self,
        scene: &SceneSnapshot,
        prior: Option<&DetectionReport>,
    ) -> Result<DetectionReport, DetectionError> {
        let bundle = build_detection_prompt(&self.catalog, &self.catalog_image, &scene.images, prior)
            .map_err(|e| DetectionError::BackendProtocolError(e.to_string()))?;
        let report = self.inner.detect(scene, prior)?;
        let response_text = report
            .raw_text
            .clone()
            .unwrap_or_else(|| format_report_lines(&report, &self.catalog));
        self.records.push(ReplayRecord {
            request_hash: bundle_hash(&bundle),
            response_text,
        });
        Ok(report)
    }
}
