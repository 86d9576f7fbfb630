//! Detection prompt construction.

use std::fmt::Write as _;

use crate::catalog::{ComponentCatalog, ComponentSet};
use crate::chat::{PromptBundle, UserItem};
use crate::error::CatalogError;

use super::{DetectionReport, Detail, ImageSpec, Verdict};

pub const DETECTION_SYSTEM_TEXT: &str = "\
You inspect a workpiece on an assembly bench. The first image is the component sheet: \
it shows every component with its number and the components it must be mounted on. \
The other images show the bench right now, seen from the top camera and the side camera. \
A component counts as assembled when it is mounted on the workpiece in at least one of the \
bench images. Loose parts lying on the bench do not count. \
Answer every question with exactly one word, YES or NO, one line per component, \
in the form `<number> (<name>): YES` or `<number> (<name>): NO`.";

const PRIOR_HEADER: &str = "Previous detection:";

/// One `<id> (<name>): YES|NO` line per component, in id order.
pub fn format_report_lines(report: &DetectionReport, catalog: &ComponentCatalog) -> String {
    let mut out = String::new();
    for id in catalog.ids() {
        let verdict = report.verdict(id).unwrap_or(Verdict::Absent);
        let _ = writeln!(out, "{id} ({}): {}", catalog.name(id), verdict.as_answer());
    }
    out.truncate(out.trim_end().len());
    out
}

fn example_answer(catalog: &ComponentCatalog) -> String {
    // Example state: only the components with no prerequisites are mounted.
    let roots: ComponentSet = catalog
        .components()
        .iter()
        .filter(|c| c.prerequisites.is_empty())
        .map(|c| c.id)
        .collect();
    let mut out = String::new();
    for id in catalog.ids() {
        let answer = Verdict::from_bool(roots.contains(&id)).as_answer();
        let _ = writeln!(out, "{id} ({}): {answer}", catalog.name(id));
    }
    out.truncate(out.trim_end().len());
    out
}

fn question(catalog: &ComponentCatalog, id: crate::catalog::ComponentId, views: usize) -> String {
    let spec = catalog.spec(id);
    let view_refs = match views {
        1 => "bench image 2".to_string(),
        n => format!(
            "bench images {}",
            (2..=n + 1).map(|i| i.to_string()).collect::<Vec<_>>().join(" and ")
        ),
    };
    format!(
        "Component {id} ({}): looking at {view_refs}, is it already assembled on the workpiece? \
         Answer YES or NO.",
        spec.name
    )
}

/// Builds the per-component YES/NO prompt.
///
/// The component sheet and all scene images ride on the first user item; each
/// question refers to the scene images by position. A prior report, when
/// given, is carried in the assistant role.
pub fn build_detection_prompt(
    catalog: &ComponentCatalog,
    catalog_image: &ImageSpec,
    scene_images: &[ImageSpec],
    prior: Option<&DetectionReport>,
) -> Result<PromptBundle, CatalogError> {
    if catalog.is_empty() {
        return Err(CatalogError::EmptyCatalog);
    }
    let mut sheet = catalog_image.clone();
    sheet.detail = Detail::High;

    let user_items = catalog
        .ids()
        .enumerate()
        .map(|(i, id)| UserItem {
            question: question(catalog, id, scene_images.len()),
            images: if i == 0 {
                std::iter::once(sheet.clone())
                    .chain(scene_images.iter().cloned())
                    .collect()
            } else {
                Vec::new()
            },
        })
        .collect();

    Ok(PromptBundle {
        system_text: DETECTION_SYSTEM_TEXT.to_string(),
        assistant_example: example_answer(catalog),
        user_items,
        prior_detection: prior
            .map(|p| format!("{PRIOR_HEADER}\n{}", format_report_lines(p, catalog))),
    })
}
