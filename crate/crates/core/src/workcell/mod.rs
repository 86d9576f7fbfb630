//! Simulated workcell: ground-truth world, operator behaviour, robot stand-in
//! and the stochastic time model.

mod handle;
mod operator;
mod robot_sim;
mod time;
mod world;

use serde::{Deserialize, Serialize};

use crate::catalog::ComponentSet;
use crate::detection::{ImageSpec, PayloadRef};

pub use handle::WorldHandle;
pub use operator::{
    apply_choice, operator_act, OperatorChoice, OperatorEvent, OperatorKind, OperatorPolicy,
    ScriptedChoice, SimOperator,
};
pub use robot_sim::{CycleTimeModel, RobotSimState, SimFault, WorldAccess, POSE_TOLERANCE_M};
pub use time::{sample_step_time, Distribution, ReworkModel, StepKind, TimeModel};
pub use world::{AssemblyOutcome, PartSource, WorldError, WorldState};

/// What the two bench cameras see at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    /// Physically assembled components visible to the cameras.
    pub view: ComponentSet,
    /// Top and side frames.
    pub images: Vec<ImageSpec>,
    pub clock: f64,
}

impl SceneSnapshot {
    /// Snapshot with placeholder frames that name the visible set.
    pub fn symbolic(view: ComponentSet, clock: f64) -> Self {
        let tag = view
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let images = ["top", "side"]
            .iter()
            .map(|cam| ImageSpec::scene_camera(PayloadRef::Symbolic(format!("sim:{cam}?assembled={tag}"))))
            .collect();
        Self { view, images, clock }
    }

    /// Snapshot backed by real frames, e.g. recorded bench photos.
    pub fn with_images(view: ComponentSet, images: Vec<ImageSpec>, clock: f64) -> Self {
        Self { view, images, clock }
    }
}

pub fn snapshot(world: &WorldState) -> SceneSnapshot {
    SceneSnapshot::symbolic(world.assembled.clone(), world.clock)
}
