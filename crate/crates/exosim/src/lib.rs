//! Deterministic simulator of a vision-controlled pneumatic hand-exoskeleton
//! controller: a priority-preemptive task kernel running the four firmware
//! tasks against simulated sensors, plant, and battery, plus a numerical
//! model of the MOSFET driver electronics. Scenarios are scripted timelines;
//! runs produce machine-checkable traces and summaries.

pub mod cli;
pub mod driver;
pub mod firmware;
pub mod kernel;
pub mod peripherals;
pub mod scenario;
pub mod sim;
pub mod trace;

pub use kernel::{Kernel, KernelEvent, TaskId, TaskState, Tick};
pub use scenario::{parse_scenario, Scenario};
pub use sim::{run_simulation, RunOutcome, SimConfig, SimResult};
pub use trace::{RunSummary, TraceMode, TraceRecord};
