//! Assembly sequences and their validation against the precedence graph.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{missing_prerequisites, ComponentCatalog, ComponentId, ComponentSet};
use crate::error::SequenceError;

/// Physical assembly order, first element assembled first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssemblySequence(pub Vec<ComponentId>);

impl AssemblySequence {
    pub fn new(ids: Vec<ComponentId>) -> Self {
        Self(ids)
    }

    pub fn from_ids<I: IntoIterator<Item = u32>>(ids: I) -> Self {
        Self(ids.into_iter().map(ComponentId).collect())
    }

    pub fn as_slice(&self) -> &[ComponentId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, id: ComponentId) {
        self.0.push(id);
    }

    pub fn as_set(&self) -> ComponentSet {
        self.0.iter().copied().collect()
    }
}

/// Renders as `1-2-3-4`.
impl fmt::Display for AssemblySequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

impl FromStr for AssemblySequence {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() {
            return Ok(Self::default());
        }
        s.split(['-', ','])
            .map(|p| p.trim().parse::<u32>().map(ComponentId))
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SequenceVerdict {
    Valid,
    Invalid {
        index: usize,
        component: ComponentId,
        missing: ComponentSet,
    },
}

impl SequenceVerdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, SequenceVerdict::Valid)
    }
}

/// Checks that every element's prerequisites occur earlier in `seq`.
///
/// The sequence need not be complete; a prefix of a valid order is valid.
pub fn validate_sequence(
    seq: &AssemblySequence,
    catalog: &ComponentCatalog,
) -> Result<SequenceVerdict, SequenceError> {
    catalog.check_ids(seq.as_slice())?;
    let mut seen = BTreeSet::new();
    for id in seq.as_slice() {
        if !seen.insert(*id) {
            return Err(SequenceError::DuplicateInSequence(*id));
        }
    }

    let mut placed = ComponentSet::new();
    for (index, id) in seq.as_slice().iter().enumerate() {
        let missing = missing_prerequisites(*id, &placed, catalog);
        if !missing.is_empty() {
            return Ok(SequenceVerdict::Invalid {
                index,
                component: *id,
                missing,
            });
        }
        placed.insert(*id);
    }
    Ok(SequenceVerdict::Valid)
}
