//! End-effector poses, discrete robot actions and the magazine layout.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{ComponentCatalog, ComponentId};

const QUAT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Metres in the robot base frame.
    pub position: [f64; 3],
    /// Unit quaternion `(w, x, y, z)`.
    pub orientation: [f64; 4],
}

impl Pose {
    pub fn new(position: [f64; 3], orientation: [f64; 4]) -> Result<Self, LayoutError> {
        let pose = Self {
            position,
            orientation,
        };
        if pose.is_unit() {
            Ok(pose)
        } else {
            Err(LayoutError::NonUnitQuaternion(orientation))
        }
    }

    pub fn is_unit(&self) -> bool {
        let n2: f64 = self.orientation.iter().map(|q| q * q).sum();
        (n2.sqrt() - 1.0).abs() <= QUAT_NORM_TOL
    }

    /// Same orientation, raised by `dz` metres along the base z axis.
    pub fn raised(&self, dz: f64) -> Self {
        let [x, y, z] = self.position;
        Self {
            position: [x, y, z + dz],
            orientation: self.orientation,
        }
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        self.position
            .iter()
            .zip(other.position.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Home pose used at simulator start.
    pub fn home() -> Self {
        Self {
            position: [0.3, 0.0, 0.4],
            orientation: [0.0, 1.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedClass {
    Transit,
    Approach,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperCommand {
    Open,
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobotAction {
    MoveTo { pose: Pose, speed_class: SpeedClass },
    SetGripper { gripper: GripperCommand },
}

impl RobotAction {
    pub fn is_move(&self) -> bool {
        matches!(self, RobotAction::MoveTo { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("quaternion {0:?} is not unit length")]
    NonUnitQuaternion([f64; 4]),
    #[error("approach offset must be positive, got {0}")]
    NonPositiveOffset(f64),
    #[error("component {component} uses magazine slot {slot}, which the layout does not map")]
    MissingSlot { component: ComponentId, slot: u32 },
    #[error("component {0} has no magazine slot in this layout")]
    UnmappedSlot(ComponentId),
    #[error("layout schema error: {0}")]
    Schema(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutDoc {
    slots: BTreeMap<u32, Pose>,
    delivery_pose: Pose,
    approach_offset_m: f64,
}

#[derive(Debug, Serialize)]
struct LayoutDocOut<'a> {
    slots: &'a BTreeMap<u32, Pose>,
    delivery_pose: &'a Pose,
    approach_offset_m: f64,
}

/// Known poses of the magazine slots and the delivery spot.
#[derive(Debug, Clone, PartialEq)]
pub struct MagazineLayout {
    slots: BTreeMap<u32, Pose>,
    delivery_pose: Pose,
    approach_offset: f64,
}

const DEFAULT_LAYOUT: &str = include_str!("../../../../data/layout.json");

impl MagazineLayout {
    pub fn new(
        slots: BTreeMap<u32, Pose>,
        delivery_pose: Pose,
        approach_offset: f64,
    ) -> Result<Self, LayoutError> {
        if approach_offset.is_nan() || approach_offset <= 0.0 {
            return Err(LayoutError::NonPositiveOffset(approach_offset));
        }
        for pose in slots.values().chain(std::iter::once(&delivery_pose)) {
            if !pose.is_unit() {
                return Err(LayoutError::NonUnitQuaternion(pose.orientation));
            }
        }
        Ok(Self {
            slots,
            delivery_pose,
            approach_offset,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, LayoutError> {
        let doc: LayoutDoc =
            serde_json::from_str(text).map_err(|e| LayoutError::Schema(e.to_string()))?;
        Self::new(doc.slots, doc.delivery_pose, doc.approach_offset_m)
    }

    pub fn from_file(path: &Path) -> Result<Self, LayoutError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LayoutError::Schema(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LayoutDocOut {
            slots: &self.slots,
            delivery_pose: &self.delivery_pose,
            approach_offset_m: self.approach_offset,
        })
        .expect("layout serializes")
    }

    /// Layout matching the bundled default catalog.
    pub fn default_layout() -> Self {
        Self::from_json(DEFAULT_LAYOUT).expect("bundled layout is valid")
    }

    /// Checks that every magazine slot named by the catalog is mapped.
    pub fn validate_for(&self, catalog: &ComponentCatalog) -> Result<(), LayoutError> {
        for c in catalog.components() {
            if let Some(slot) = c.magazine_slot {
                if !self.slots.contains_key(&slot) {
                    return Err(LayoutError::MissingSlot {
                        component: c.id,
                        slot,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn slot_pose(&self, slot: u32) -> Option<&Pose> {
        self.slots.get(&slot)
    }

    pub fn slots(&self) -> &BTreeMap<u32, Pose> {
        &self.slots
    }

    pub fn delivery_pose(&self) -> &Pose {
        &self.delivery_pose
    }

    pub fn approach_offset(&self) -> f64 {
        self.approach_offset
    }

    /// Slot whose pose lies within `tol` metres of `pose`.
    pub fn slot_at(&self, pose: &Pose, tol: f64) -> Option<u32> {
        self.slots
            .iter()
            .find(|(_, p)| p.distance_to(pose) <= tol)
            .map(|(s, _)| *s)
    }
}

/// The eight-waypoint pick-and-place job for one component.
pub fn generate_actions(
    component: ComponentId,
    layout: &MagazineLayout,
    catalog: &ComponentCatalog,
) -> Result<Vec<RobotAction>, LayoutError> {
    let slot = catalog
        .get(component)
        .and_then(|c| c.magazine_slot)
        .ok_or(LayoutError::UnmappedSlot(component))?;
    let pick = *layout
        .slot_pose(slot)
        .ok_or(LayoutError::UnmappedSlot(component))?;
    let place = *layout.delivery_pose();
    let dz = layout.approach_offset();

    let mv = |pose: Pose, speed_class| RobotAction::MoveTo { pose, speed_class };
    Ok(vec![
        mv(pick.raised(dz), SpeedClass::Transit),
        mv(pick, SpeedClass::Approach),
        RobotAction::SetGripper {
            gripper: GripperCommand::Close,
        },
        mv(pick.raised(dz), SpeedClass::Approach),
        mv(place.raised(dz), SpeedClass::Transit),
        mv(place, SpeedClass::Approach),
        RobotAction::SetGripper {
            gripper: GripperCommand::Open,
        },
        mv(place.raised(dz), SpeedClass::Approach),
    ])
}
