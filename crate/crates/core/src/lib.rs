//! Perception, planning and delivery loop for robot-assisted assembly.
//!
//! Each iteration detects which components are mounted, picks the next part to
//! hand over, has the robot deliver it, and waits for the operator.

pub mod belief;
pub mod catalog;
pub mod chat;
pub mod detection;
pub mod error;
pub mod eval;
pub mod orchestrator;
pub mod planner;
pub mod scenario;
pub mod sequence;
pub mod workcell;

pub use belief::{update_avail, BeliefState};
pub use catalog::{
    feasible_set, load_catalog, load_catalog_file, set_of, ComponentCatalog, ComponentId,
    ComponentSet, ComponentSpec,
};
pub use error::{CatalogError, SequenceError};
pub use sequence::{validate_sequence, AssemblySequence, SequenceVerdict};
