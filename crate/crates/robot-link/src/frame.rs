use assist_core::catalog::ComponentId;
use assist_core::planner::motion::{GripperCommand, Pose, RobotAction, SpeedClass};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireFrame {
    Hello {
        seq: u64,
    },
    MoveTo {
        seq: u64,
        position: [f64; 3],
        orientation: [f64; 4],
        speed_class: SpeedClass,
    },
    SetGripper {
        seq: u64,
        gripper: GripperCommand,
    },
    Ack {
        seq: u64,
        /// Simulated seconds the command took.
        #[serde(default)]
        elapsed_s: f64,
    },
    Nack {
        seq: u64,
        reason: String,
    },
    Status {
        position: [f64; 3],
        orientation: [f64; 4],
        gripper: GripperCommand,
        held: Option<ComponentId>,
    },
}

impl WireFrame {
    /// Sequence number for everything except `status`.
    pub fn seq(&self) -> Option<u64> {
        match self {
            WireFrame::Hello { seq }
            | WireFrame::MoveTo { seq, .. }
            | WireFrame::SetGripper { seq, .. }
            | WireFrame::Ack { seq, .. }
            | WireFrame::Nack { seq, .. } => Some(*seq),
            WireFrame::Status { .. } => None,
        }
    }

    pub fn is_command(&self) -> bool {
        matches!(
            self,
            WireFrame::Hello { .. } | WireFrame::MoveTo { .. } | WireFrame::SetGripper { .. }
        )
    }

    /// The robot action carried by a command frame. The pose is not checked here.
    pub fn to_action(&self) -> Option<RobotAction> {
        match *self {
            WireFrame::MoveTo {
                position,
                orientation,
                speed_class,
                ..
            } => Some(RobotAction::MoveTo {
                pose: Pose {
                    position,
                    orientation,
                },
                speed_class,
            }),
            WireFrame::SetGripper { gripper, .. } => Some(RobotAction::SetGripper { gripper }),
            _ => None,
        }
    }
}

pub fn action_frame(seq: u64, action: &RobotAction) -> WireFrame {
    match *action {
        RobotAction::MoveTo { pose, speed_class } => WireFrame::MoveTo {
            seq,
            position: pose.position,
            orientation: pose.orientation,
            speed_class,
        },
        RobotAction::SetGripper { gripper } => WireFrame::SetGripper { seq, gripper },
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("frame is not valid: {0}")]
    Malformed(String),
    #[error("frame contains a line break")]
    Embedded,
}

/// One line including the trailing LF.
pub fn encode(frame: &WireFrame) -> String {
    let mut s = serde_json::to_string(frame).expect("frames serialize");
    s.push('\n');
    s
}

pub fn decode(line: &str) -> Result<WireFrame, FrameError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    if line.contains('\n') {
        return Err(FrameError::Embedded);
    }
    serde_json::from_str(line).map_err(|e| FrameError::Malformed(e.to_string()))
}
