//! Belief sets tracked by the loop: detected, brought and still available.

use serde::{Deserialize, Serialize};

use crate::catalog::{ComponentCatalog, ComponentId, ComponentSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefState {
    /// Components detected as assembled at the latest observation.
    pub det: ComponentSet,
    /// Components already delivered by the robot.
    pub brought: ComponentSet,
    /// Components still to be handled: `avail0 - (det | brought)`.
    pub avail: ComponentSet,
    /// The full component set at session start.
    pub avail0: ComponentSet,
}

impl BeliefState {
    /// Initial belief: nothing detected, nothing brought, everything available.
    pub fn initial(catalog: &ComponentCatalog) -> Self {
        let all = catalog.all_ids();
        Self {
            det: ComponentSet::new(),
            brought: ComponentSet::new(),
            avail: all.clone(),
            avail0: all,
        }
    }

    pub fn with_sets(det: ComponentSet, brought: ComponentSet, avail0: ComponentSet) -> Self {
        update_avail(Self {
            det,
            brought,
            avail: ComponentSet::new(),
            avail0,
        })
    }

    pub fn is_done(&self) -> bool {
        self.avail.is_empty()
    }

    /// Belief with `det` replaced and `avail` recomputed.
    pub fn observe(&self, det: ComponentSet) -> Self {
        update_avail(Self {
            det,
            ..self.clone()
        })
    }

    /// Belief with `bring` added to `brought` and `avail` recomputed.
    pub fn record_delivery(&self, bring: Option<ComponentId>) -> Self {
        let mut brought = self.brought.clone();
        brought.extend(bring);
        update_avail(Self {
            brought,
            ..self.clone()
        })
    }

    /// Checks the set invariants (`det`, `brought` inside `avail0`, `avail` consistent).
    pub fn is_consistent(&self) -> bool {
        self.det.is_subset(&self.avail0)
            && self.brought.is_subset(&self.avail0)
            && self.avail == expected_avail(&self.avail0, &self.det, &self.brought)
    }
}

fn expected_avail(avail0: &ComponentSet, det: &ComponentSet, brought: &ComponentSet) -> ComponentSet {
    avail0
        .iter()
        .filter(|c| !det.contains(c) && !brought.contains(c))
        .copied()
        .collect()
}

/// Recomputes `avail = avail0 - (det | brought)`, leaving other fields intact.
pub fn update_avail(mut belief: BeliefState) -> BeliefState {
    belief.avail = expected_avail(&belief.avail0, &belief.det, &belief.brought);
    belief
}
