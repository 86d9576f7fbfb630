use crate::catalog::ComponentCatalog;
use crate::chat::{ChatClient, ChatError, ChatRequest};
use crate::workcell::SceneSnapshot;

use super::{
    build_detection_prompt, estimate_image_tokens, parse_detection_response, DetectionError,
    DetectionReport, DetectionSource, Detector, ImageSpec, TokenUsage,
};

/// Detector backed by a vision chat model.
pub struct LlmDetector {
    client: Box<dyn ChatClient>,
    model: String,
    catalog: ComponentCatalog,
    catalog_image: ImageSpec,
}

impl LlmDetector {
    pub fn new(
        client: Box<dyn ChatClient>,
        model: impl Into<String>,
        catalog: ComponentCatalog,
        catalog_image: ImageSpec,
    ) -> Self {
        Self {
            client,
            model: model.into(),
            catalog,
            catalog_image,
        }
    }
}

impl From<ChatError> for DetectionError {
    fn from(e: ChatError) -> Self {
        match e {
            ChatError::Timeout => DetectionError::BackendTimeout,
            ChatError::Protocol(m) => DetectionError::BackendProtocolError(m),
            ChatError::Status(code) => DetectionError::BackendProtocolError(format!("http status {code}")),
            ChatError::Transport(m) | ChatError::Request(m) => DetectionError::BackendUnavailable(m),
        }
    }
}

impl Detector for LlmDetector {
    fn detect(
        &mut self,
        scene: &SceneSnapshot,
        prior: Option<&DetectionReport>,
    ) -> Result<DetectionReport, DetectionError> {
        let bundle = build_detection_prompt(&self.catalog, &self.catalog_image, &scene.images, prior)
            .map_err(|e| DetectionError::BackendProtocolError(e.to_string()))?;
        let image_tokens = bundle.images().map(estimate_image_tokens).sum();
        let reply = self
            .client
            .complete(&ChatRequest::from_bundle(&self.model, &bundle))?;
        let mut report = parse_detection_response(&reply.text, &self.catalog)?;
        report.source = DetectionSource::Llm;
        report.timestamp = scene.clock;
        report.usage = Some(TokenUsage {
            image_tokens,
            prompt_tokens: reply.prompt_tokens,
            completion_tokens: reply.completion_tokens,
        });
        Ok(report)
    }
}
