//! Deterministic, virtual-time simulation of NoteBridge clients talking to the
//! real sync server logic, with a lossy network, partitions and crashes.

pub mod action;
mod client;
pub mod durability;
pub mod engine;
pub mod fuzz;
pub mod net;
pub mod scenario;

pub use action::ClientAction;
pub use durability::{durability_script, run_durability, DurabilityRun, DURABILITY_OPS};
pub use engine::{LatencyStats, Participant, ScenarioReport, SimError, Simulation};
pub use fuzz::{random_edit, run_fuzz, Edit};
pub use net::{NetConfig, Partition};
pub use scenario::{run_scripted, Scenario, ScenarioRun, TimedAction};
