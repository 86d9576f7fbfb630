//! Choosing the next component to deliver, and the robot motions that deliver it.

pub mod motion;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::BeliefState;
use crate::catalog::{format_set, missing_prerequisites, ComponentCatalog, ComponentId, ComponentSet};
use crate::chat::{ChatClient, ChatRequest, PromptBundle, UserItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanPolicy {
    Reference,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDecision {
    pub next: Option<ComponentId>,
    pub rationale: String,
    pub policy: PlanPolicy,
    /// Set when the LLM answer was rejected and the reference policy stood in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no component id found in planner reply")]
    NoIdFound,
    #[error("component {id} is missing detected prerequisites {missing}", id = .0, missing = format_set(.1))]
    InfeasibleChoice(ComponentId, ComponentSet),
    #[error("component {0} is not available for delivery")]
    NotAvailable(ComponentId),
    #[error("planner backend: {0}")]
    Backend(String),
}

fn deliverable_candidates<'a>(
    belief: &'a BeliefState,
    catalog: &'a ComponentCatalog,
) -> impl Iterator<Item = ComponentId> + 'a {
    belief.avail.iter().copied().filter(move |c| {
        catalog.get(*c).is_some_and(|s| s.robot_deliverable)
            && catalog.prerequisites(*c).is_subset(&belief.det)
    })
}

/// Lowest-id available, deliverable component whose prerequisites were all
/// detected. Prerequisites count only once seen, never merely delivered.
pub fn plan_next_reference(belief: &BeliefState, catalog: &ComponentCatalog) -> PlanDecision {
    match deliverable_candidates(belief, catalog).next() {
        Some(c) => PlanDecision {
            next: Some(c),
            rationale: format!(
                "component {c} ({}) is the lowest-numbered available part whose prerequisites are detected",
                catalog.name(c)
            ),
            policy: PlanPolicy::Reference,
            fallback_reason: None,
        },
        None => PlanDecision {
            next: None,
            rationale: if belief.avail.is_empty() {
                "all components handled".to_string()
            } else {
                format!(
                    "no deliverable part among {} has its prerequisites detected",
                    format_set(&belief.avail)
                )
            },
            policy: PlanPolicy::Reference,
            fallback_reason: None,
        },
    }
}

pub const PLANNER_SYSTEM_TEXT: &str = "\
You plan deliveries for a robot that hands parts to a person assembling a workpiece. \
Each turn you receive which components were detected as assembled, which ones the robot \
already brought, and the full component list with prerequisites. Pick one component \
that is not detected, not yet brought, can be delivered by the robot, and whose \
prerequisites are all detected. Then confirm the pick-and-place.";

pub const PLANNER_EXAMPLE: &str = "NEXT: 3\nPICK_AND_PLACE: confirmed";

const PLANNER_TEMPLATE: &str = "\
Detected as assembled: {detected}
Already brought by the robot: {brought}
All components: {available}
Components:
{components}
Reply with `NEXT: <number>` for the one component to pick from the magazine and deliver, \
followed by `PICK_AND_PLACE: confirmed`. If no component qualifies, reply `DONE`.";

fn list_or_none(set: &ComponentSet) -> String {
    if set.is_empty() {
        "none".into()
    } else {
        set.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
    }
}

fn component_lines(catalog: &ComponentCatalog) -> String {
    let mut out = String::new();
    for c in catalog.components() {
        let _ = writeln!(
            out,
            "- {} {}: requires {}; {}",
            c.id,
            c.name,
            list_or_none(&c.prerequisites),
            if c.robot_deliverable { "robot can deliver" } else { "operator only" }
        );
    }
    out.truncate(out.trim_end().len());
    out
}

/// Text-only planning prompt with `{detected}`, `{brought}` and `{available}` substituted.
pub fn build_planner_prompt(belief: &BeliefState, catalog: &ComponentCatalog) -> PromptBundle {
    let question = PLANNER_TEMPLATE
        .replace("{detected}", &list_or_none(&belief.det))
        .replace("{brought}", &list_or_none(&belief.brought))
        .replace("{available}", &list_or_none(&belief.avail0))
        .replace("{components}", &component_lines(catalog));
    PromptBundle {
        system_text: PLANNER_SYSTEM_TEXT.to_string(),
        assistant_example: PLANNER_EXAMPLE.to_string(),
        user_items: vec![UserItem {
            question,
            images: Vec::new(),
        }],
        prior_detection: None,
    }
}

fn numbers(text: &str) -> Vec<(usize, u32)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        match (ch.is_ascii_digit(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if let Ok(n) = text[s..i].parse() {
                    out.push((s, n));
                }
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Extracts and validates the planner's choice. A `NEXT:` marker wins over any
/// other number; otherwise the first in-catalog number is taken.
pub fn parse_planner_response(
    text: &str,
    belief: &BeliefState,
    catalog: &ComponentCatalog,
) -> Result<PlanDecision, PlanError> {
    let lower = text.to_ascii_lowercase();
    let nums = numbers(&lower);
    let marked = lower
        .find("next")
        .and_then(|at| nums.iter().find(|(pos, _)| *pos > at));
    let choice = marked
        .or_else(|| {
            nums.iter()
                .find(|(_, n)| *n >= 1 && (*n as usize) <= catalog.len())
        })
        .map(|(_, n)| ComponentId(*n));

    let Some(id) = choice else {
        let says_done = lower
            .split(|c: char| !c.is_ascii_alphabetic())
            .any(|w| w == "done");
        if says_done && deliverable_candidates(belief, catalog).next().is_none() {
            return Ok(PlanDecision {
                next: None,
                rationale: text.trim().to_string(),
                policy: PlanPolicy::Llm,
                fallback_reason: None,
            });
        }
        return Err(PlanError::NoIdFound);
    };

    let deliverable = catalog.get(id).is_some_and(|s| s.robot_deliverable);
    if !belief.avail.contains(&id) || !deliverable {
        return Err(PlanError::NotAvailable(id));
    }
    let missing = missing_prerequisites(id, &belief.det, catalog);
    if !missing.is_empty() {
        return Err(PlanError::InfeasibleChoice(id, missing));
    }
    Ok(PlanDecision {
        next: Some(id),
        rationale: text.trim().to_string(),
        policy: PlanPolicy::Llm,
        fallback_reason: None,
    })
}

pub trait Planner: Send {
    fn plan(&mut self, belief: &BeliefState) -> PlanDecision;

    /// Whether each call costs a language-model round trip.
    fn uses_llm(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct ReferencePlanner {
    catalog: ComponentCatalog,
}

impl ReferencePlanner {
    pub fn new(catalog: ComponentCatalog) -> Self {
        Self { catalog }
    }
}

impl Planner for ReferencePlanner {
    fn plan(&mut self, belief: &BeliefState) -> PlanDecision {
        plan_next_reference(belief, &self.catalog)
    }
}

/// Chat-model planner. Any unusable answer falls back to the reference policy.
pub struct LlmPlanner {
    client: Box<dyn ChatClient>,
    model: String,
    catalog: ComponentCatalog,
}

impl LlmPlanner {
    pub fn new(client: Box<dyn ChatClient>, model: impl Into<String>, catalog: ComponentCatalog) -> Self {
        Self {
            client,
            model: model.into(),
            catalog,
        }
    }

    fn ask(&self, belief: &BeliefState) -> Result<PlanDecision, PlanError> {
        let bundle = build_planner_prompt(belief, &self.catalog);
        let reply = self
            .client
            .complete(&ChatRequest::from_bundle(&self.model, &bundle))
            .map_err(|e| PlanError::Backend(e.to_string()))?;
        parse_planner_response(&reply.text, belief, &self.catalog)
    }
}

impl Planner for LlmPlanner {
    fn plan(&mut self, belief: &BeliefState) -> PlanDecision {
        match self.ask(belief) {
            Ok(d) => d,
            Err(e) => {
                tracing::warn!(error = %e, "planner reply rejected, using reference policy");
                PlanDecision {
                    fallback_reason: Some(e.to_string()),
                    ..plan_next_reference(belief, &self.catalog)
                }
            }
        }
    }

    fn uses_llm(&self) -> bool {
        true
    }
}
