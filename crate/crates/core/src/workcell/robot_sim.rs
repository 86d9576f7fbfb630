//! Kinematics-free robot stand-in that executes discrete actions against the world.

use serde::{Deserialize, Serialize};

use crate::catalog::{ComponentCatalog, ComponentId};
use crate::planner::motion::{GripperCommand, MagazineLayout, Pose, RobotAction, SpeedClass};

use super::world::{WorldError, WorldState};

/// Slot and delivery matching tolerance, metres.
pub const POSE_TOLERANCE_M: f64 = 1e-3;

/// Mutations the robot may perform on the world.
pub trait WorldAccess {
    fn robot_pick(&mut self, c: ComponentId) -> Result<(), WorldError>;
    fn robot_place(&mut self, c: ComponentId) -> Result<(), WorldError>;
}

impl WorldAccess for WorldState {
    fn robot_pick(&mut self, c: ComponentId) -> Result<(), WorldError> {
        WorldState::robot_pick(self, c)
    }

    fn robot_place(&mut self, c: ComponentId) -> Result<(), WorldError> {
        WorldState::robot_place(self, c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleTimeModel {
    pub transit_s: f64,
    pub approach_s: f64,
    pub gripper_s: f64,
}

impl Default for CycleTimeModel {
    fn default() -> Self {
        // 2 transit + 4 approach + 2 gripper actions = 12 s per job.
        Self {
            transit_s: 3.0,
            approach_s: 1.25,
            gripper_s: 0.5,
        }
    }
}

impl CycleTimeModel {
    /// Default proportions rescaled so a standard job takes `seconds`.
    pub fn for_job_seconds(seconds: f64) -> Self {
        let d = Self::default();
        let k = seconds / d.job_seconds();
        Self {
            transit_s: d.transit_s * k,
            approach_s: d.approach_s * k,
            gripper_s: d.gripper_s * k,
        }
    }

    pub fn job_seconds(&self) -> f64 {
        2.0 * self.transit_s + 4.0 * self.approach_s + 2.0 * self.gripper_s
    }

    pub fn action_seconds(&self, action: &RobotAction) -> f64 {
        match action {
            RobotAction::MoveTo {
                speed_class: SpeedClass::Transit,
                ..
            } => self.transit_s,
            RobotAction::MoveTo {
                speed_class: SpeedClass::Approach,
                ..
            } => self.approach_s,
            RobotAction::SetGripper { .. } => self.gripper_s,
        }
    }
}

/// Why the simulator refused an action. The wire reason is the snake_case name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimFault {
    InvalidPose,
    EmptySlot,
    NotAtSlot,
    AlreadyHolding,
    NotAtDelivery,
}

impl SimFault {
    pub fn reason(self) -> &'static str {
        match self {
            SimFault::InvalidPose => "invalid_pose",
            SimFault::EmptySlot => "empty_slot",
            SimFault::NotAtSlot => "not_at_slot",
            SimFault::AlreadyHolding => "already_holding",
            SimFault::NotAtDelivery => "not_at_delivery",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSimState {
    pub pose: Pose,
    pub gripper: GripperCommand,
    pub held: Option<ComponentId>,
    pub cycle_time: CycleTimeModel,
}

impl RobotSimState {
    pub fn new(cycle_time: CycleTimeModel) -> Self {
        Self {
            pose: Pose::home(),
            gripper: GripperCommand::Open,
            held: None,
            cycle_time,
        }
    }

    /// Executes one action and returns its simulated duration.
    pub fn execute<W: WorldAccess + ?Sized>(
        &mut self,
        action: &RobotAction,
        layout: &MagazineLayout,
        catalog: &ComponentCatalog,
        world: &mut W,
    ) -> Result<f64, SimFault> {
        match *action {
            RobotAction::MoveTo { pose, .. } => {
                if !pose.is_unit() || pose.position.iter().any(|v| !v.is_finite()) {
                    return Err(SimFault::InvalidPose);
                }
                self.pose = pose;
            }
            RobotAction::SetGripper {
                gripper: GripperCommand::Close,
            } => {
                if self.held.is_some() {
                    return Err(SimFault::AlreadyHolding);
                }
                let slot = layout
                    .slot_at(&self.pose, POSE_TOLERANCE_M)
                    .ok_or(SimFault::NotAtSlot)?;
                let component = catalog.component_in_slot(slot).ok_or(SimFault::EmptySlot)?;
                world.robot_pick(component).map_err(|_| SimFault::EmptySlot)?;
                self.held = Some(component);
                self.gripper = GripperCommand::Close;
            }
            RobotAction::SetGripper {
                gripper: GripperCommand::Open,
            } => {
                if let Some(c) = self.held {
                    if layout.delivery_pose().distance_to(&self.pose) > POSE_TOLERANCE_M {
                        return Err(SimFault::NotAtDelivery);
                    }
                    world
                        .robot_place(c)
                        .expect("held component is in the gripper region");
                    self.held = None;
                }
                self.gripper = GripperCommand::Open;
            }
        }
        Ok(self.cycle_time.action_seconds(action))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::motion::generate_actions;

    fn setup() -> (ComponentCatalog, MagazineLayout, WorldState, RobotSimState) {
        let cat = ComponentCatalog::default_aircraft();
        let layout = MagazineLayout::default_layout();
        let world = WorldState::initial(&cat).unwrap();
        (cat, layout, world, RobotSimState::new(CycleTimeModel::default()))
    }

    #[test]
    fn job_moves_component_and_takes_twelve_seconds() {
        let (cat, layout, mut world, mut sim) = setup();
        let mut elapsed = 0.0;
        for a in generate_actions(ComponentId(5), &layout, &cat).unwrap() {
            elapsed += sim.execute(&a, &layout, &cat, &mut world).unwrap();
            assert!(world.conservation_holds(&cat));
        }
        assert!((elapsed - 12.0).abs() < 1e-9);
        assert_eq!(world.delivery_zone, vec![ComponentId(5)]);
        assert!(!world.magazine.contains(&ComponentId(5)));
        assert_eq!(sim.held, None);
    }

    #[test]
    fn close_on_empty_slot_fails_at_third_action() {
        let (cat, layout, mut world, mut sim) = setup();
        world.magazine.remove(&ComponentId(3));
        world.delivery_zone.push(ComponentId(3));
        let actions = generate_actions(ComponentId(3), &layout, &cat).unwrap();
        let mut done = 0;
        let mut fault = None;
        for a in &actions {
            match sim.execute(a, &layout, &cat, &mut world) {
                Ok(_) => done += 1,
                Err(f) => {
                    fault = Some(f);
                    break;
                }
            }
        }
        assert_eq!(done, 2);
        assert_eq!(fault, Some(SimFault::EmptySlot));
    }

    #[test]
    fn close_away_from_slot_fails() {
        let (cat, layout, mut world, mut sim) = setup();
        let close = RobotAction::SetGripper { gripper: GripperCommand::Close };
        assert_eq!(sim.execute(&close, &layout, &cat, &mut world), Err(SimFault::NotAtSlot));
        // Two millimetres off the slot is outside tolerance.
        let slot = *layout.slot_pose(1).unwrap();
        let off = Pose { position: [slot.position[0] + 0.002, slot.position[1], slot.position[2]], ..slot };
        sim.execute(&RobotAction::MoveTo { pose: off, speed_class: SpeedClass::Approach }, &layout, &cat, &mut world)
            .unwrap();
        assert_eq!(sim.execute(&close, &layout, &cat, &mut world), Err(SimFault::NotAtSlot));
    }

    #[test]
    fn scaled_cycle_model() {
        let m = CycleTimeModel::for_job_seconds(24.0);
        assert!((m.job_seconds() - 24.0).abs() < 1e-12);
        assert!((m.transit_s - 6.0).abs() < 1e-12);
    }
}
