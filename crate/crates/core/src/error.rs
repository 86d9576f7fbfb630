use thiserror::Error;

use crate::catalog::{format_set, ComponentId, ComponentSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("catalog has no components")]
    EmptyCatalog,
    #[error("duplicate component ids: {}", format_set(.0))]
    DuplicateId(ComponentSet),
    #[error("component ids must be 1..=n without gaps; offending: {}", format_set(.0))]
    NonContiguousIds(ComponentSet),
    #[error("component {component} lists unknown prerequisites: {}", format_set(.missing))]
    UnknownPrerequisite {
        component: ComponentId,
        missing: ComponentSet,
    },
    #[error("cyclic precedence among components: {}", format_set(.0))]
    CyclicPrecedence(ComponentSet),
    #[error("unknown components: {}", format_set(.0))]
    UnknownComponent(ComponentSet),
    #[error("catalog schema error: {0}")]
    Schema(String),
    #[error("catalog io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("component {0} appears more than once in the sequence")]
    DuplicateInSequence(ComponentId),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}
