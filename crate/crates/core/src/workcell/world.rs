use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{
    format_set, missing_prerequisites, ComponentCatalog, ComponentId, ComponentSet,
};
use crate::sequence::AssemblySequence;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("component {0} is not in the magazine")]
    NotInMagazine(ComponentId),
    #[error("gripper already holds component {0}")]
    GripperOccupied(ComponentId),
    #[error("gripper holds {held:?}, not component {expected}")]
    GripperMismatch {
        expected: ComponentId,
        held: Option<ComponentId>,
    },
    #[error("starting components {} need prerequisites the operator does not start with", format_set(.0))]
    StartNotClosed(ComponentSet),
}

/// Where a part came from when the operator tried to mount it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartSource {
    DeliveryZone,
    Magazine,
}

/// Ground truth of the workcell.
///
/// Every robot-deliverable component sits in exactly one of: magazine,
/// gripper, delivery zone, assembled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub assembled: ComponentSet,
    /// Order in which `assembled` grew.
    pub history: AssemblySequence,
    pub magazine: ComponentSet,
    /// Delivered but not yet mounted, oldest delivery first.
    pub delivery_zone: Vec<ComponentId>,
    pub in_gripper: Option<ComponentId>,
    /// Simulated seconds since session start.
    pub clock: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AssemblyOutcome {
    Assembled,
    Rejected { missing: ComponentSet },
}

impl WorldState {
    /// Session start: the operator has mounted the non-deliverable components,
    /// everything else waits in the magazine.
    pub fn initial(catalog: &ComponentCatalog) -> Result<Self, WorldError> {
        let start = catalog.operator_start_ids();
        let not_closed: ComponentSet = start
            .iter()
            .copied()
            .filter(|c| !catalog.prerequisites(*c).is_subset(&start))
            .collect();
        if !not_closed.is_empty() {
            return Err(WorldError::StartNotClosed(not_closed));
        }
        // Lowest-id-first topological order over the starting set.
        let mut history = AssemblySequence::default();
        let mut placed = ComponentSet::new();
        while placed.len() < start.len() {
            let next = start
                .iter()
                .copied()
                .find(|c| !placed.contains(c) && catalog.prerequisites(*c).is_subset(&placed))
                .expect("catalog is acyclic");
            placed.insert(next);
            history.push(next);
        }
        Ok(Self {
            assembled: placed,
            history,
            magazine: catalog.deliverable_ids(),
            delivery_zone: Vec::new(),
            in_gripper: None,
            clock: 0.0,
        })
    }

    pub fn is_complete(&self, catalog: &ComponentCatalog) -> bool {
        self.assembled.len() == catalog.len()
    }

    pub fn delivery_set(&self) -> ComponentSet {
        self.delivery_zone.iter().copied().collect()
    }

    pub fn robot_pick(&mut self, c: ComponentId) -> Result<(), WorldError> {
        if let Some(h) = self.in_gripper {
            return Err(WorldError::GripperOccupied(h));
        }
        if !self.magazine.remove(&c) {
            return Err(WorldError::NotInMagazine(c));
        }
        self.in_gripper = Some(c);
        Ok(())
    }

    pub fn robot_place(&mut self, c: ComponentId) -> Result<(), WorldError> {
        if self.in_gripper != Some(c) {
            return Err(WorldError::GripperMismatch {
                expected: c,
                held: self.in_gripper,
            });
        }
        self.in_gripper = None;
        self.delivery_zone.push(c);
        Ok(())
    }

    /// Mounts `c` taken from `source` if its prerequisites are mounted.
    /// A rejected attempt leaves the world untouched.
    pub fn try_assemble(
        &mut self,
        c: ComponentId,
        source: PartSource,
        catalog: &ComponentCatalog,
    ) -> AssemblyOutcome {
        let missing = missing_prerequisites(c, &self.assembled, catalog);
        if !missing.is_empty() {
            return AssemblyOutcome::Rejected { missing };
        }
        match source {
            PartSource::DeliveryZone => self.delivery_zone.retain(|d| *d != c),
            PartSource::Magazine => {
                self.magazine.remove(&c);
            }
        }
        self.assembled.insert(c);
        self.history.push(c);
        AssemblyOutcome::Assembled
    }

    /// True when magazine, gripper, delivery zone and the mounted deliverables
    /// partition the deliverable set.
    pub fn conservation_holds(&self, catalog: &ComponentCatalog) -> bool {
        let deliverable = catalog.deliverable_ids();
        let mut seen = ComponentSet::new();
        let regions = self
            .magazine
            .iter()
            .chain(self.in_gripper.iter())
            .chain(self.delivery_zone.iter())
            .chain(self.assembled.iter().filter(|c| deliverable.contains(c)));
        for c in regions {
            if !seen.insert(*c) {
                return false;
            }
        }
        seen == deliverable
    }
}
