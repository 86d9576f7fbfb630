use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::ComponentCatalog;
use crate::planner::motion::{MagazineLayout, RobotAction};
use crate::workcell::{RobotSimState, WorldHandle};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JobReport {
    /// Actions acknowledged before the job ended.
    pub completed: usize,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JobError {
    #[error("connection lost after {} acknowledged actions", .report.completed)]
    ConnectionLost { report: JobReport },
    #[error("action seq {seq} refused: {reason}")]
    NackReceived {
        seq: u64,
        reason: String,
        report: JobReport,
    },
    #[error("no reply to seq {seq}")]
    Timeout { seq: u64, report: JobReport },
}

impl JobError {
    pub fn report(&self) -> JobReport {
        match self {
            JobError::ConnectionLost { report }
            | JobError::NackReceived { report, .. }
            | JobError::Timeout { report, .. } => *report,
        }
    }

    /// A refused action is a failed step; anything else means the robot is gone.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, JobError::NackReceived { .. })
    }
}

pub trait RobotDriver: Send {
    fn send_job(&mut self, actions: &[RobotAction]) -> Result<JobReport, JobError>;

    /// False when the robot mutates a world the orchestrator cannot see, in
    /// which case the orchestrator mirrors successful deliveries itself.
    fn shares_world(&self) -> bool {
        true
    }
}

/// Simulated robot executing directly against the session's world actor.
#[derive(Debug)]
pub struct InProcessRobot {
    sim: RobotSimState,
    world: WorldHandle,
    layout: MagazineLayout,
    catalog: ComponentCatalog,
    seq: u64,
}

impl InProcessRobot {
    pub fn new(
        sim: RobotSimState,
        world: WorldHandle,
        layout: MagazineLayout,
        catalog: ComponentCatalog,
    ) -> Self {
        Self {
            sim,
            world,
            layout,
            catalog,
            seq: 0,
        }
    }

    pub fn state(&self) -> &RobotSimState {
        &self.sim
    }
}

impl RobotDriver for InProcessRobot {
    fn send_job(&mut self, actions: &[RobotAction]) -> Result<JobReport, JobError> {
        let mut report = JobReport::default();
        for action in actions {
            self.seq += 1;
            match self
                .sim
                .execute(action, &self.layout, &self.catalog, &mut self.world)
            {
                Ok(dt) => {
                    report.completed += 1;
                    report.elapsed_s += dt;
                }
                Err(fault) => {
                    return Err(JobError::NackReceived {
                        seq: self.seq,
                        reason: fault.reason().to_string(),
                        report,
                    })
                }
            }
        }
        Ok(report)
    }
}
